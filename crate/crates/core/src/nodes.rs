//! Band-node inventories: locating discriminant zeros in 3D momentum regions,
//! telling Weyl points from exceptional-line crossings, and measuring Weyl
//! chirality as the biorthogonal Berry-phase flow over a small sphere.
//!
//! The search is a coarse |Disc| scan followed by Gauss–Newton on the two real
//! residuals (Re Disc, Im Disc) in three unknowns. Classification probes a
//! candidate with three small axis-aligned circles: a circle linking an
//! exceptional line sees the eigenvalue exchange (a swap braid), while an
//! isolated Weyl point leaves all three probes trivial and gets its chirality
//! from [`chern_sphere`].
//!
//! Chirality convention: spheres are parameterized outward with the polar
//! angle θ from the +k_z pole and right-handed azimuth φ; band charge is the
//! unwrapped per-band Berry phase change from pole to pole divided by 2π. With
//! this orientation the Hermitian Weyl Hamiltonian +k·σ carries charge +1 on
//! its lower-Re band, and the reported chirality of a Weyl point is the charge
//! of the band that is canonically first (lowest (Re, Im)) at the north pole
//! of the probe sphere.

use crate::braids::{braid_along_loop, BraidError};
use crate::models::{BlochModel, LoopSpec, Momentum};
use crate::spectra::{self, discriminant, SpectraError, DEFAULT_GAP_RATIO};
use crate::wilson::band_phases_from_frames;
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Coarse-scan seed threshold on |Disc|.
const SEED_THRESHOLD: f64 = 1e-2;
/// Deduplication radius for converged node positions.
const DEDUP_RADIUS: f64 = 1e-4;
/// Default convergence tolerance on |Disc| at a refined node.
pub const DEFAULT_NODE_TOL: f64 = 1e-10;
/// Default number of latitude/azimuth samples for sphere charges.
pub const DEFAULT_SPHERE_SAMPLES: usize = 201;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("invalid search region: {0}")]
    InvalidRegion(String),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("probe intersects a degeneracy ({detail}); shrink the probe radius")]
    ProbeDegenerate { detail: String },
    #[error("band tracking along two meridians disagrees at latitude {theta_index}")]
    SeamInconsistent { theta_index: usize },
    #[error(
        "band {band} charge {value} is {residue:.3} from an integer; refine the sphere sampling"
    )]
    RoundingResidue {
        band: usize,
        value: f64,
        residue: f64,
    },
    #[error("probe braid failed: {0}")]
    Braid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    WeylPoint,
    ExceptionalCrossing,
}

/// A located (and possibly classified) band degeneracy.
#[derive(Debug, Clone)]
pub struct NodeReport {
    pub position: Momentum,
    pub kind: Option<NodeKind>,
    /// Sphere charge of the canonically-first band; Weyl points only.
    pub chirality: Option<i64>,
    /// Set when |chirality| > 1 (legal but outside the generic ±1 range).
    pub chirality_flagged: bool,
    /// |Disc| at the refined position.
    pub residual: f64,
    pub probe_radius: Option<f64>,
}

impl NodeReport {
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("position".into(), json!(self.position.components()));
        obj.insert(
            "kind".into(),
            match self.kind {
                Some(NodeKind::WeylPoint) => json!("weyl_point"),
                Some(NodeKind::ExceptionalCrossing) => json!("exceptional_crossing"),
                None => json!(null),
            },
        );
        if let Some(ch) = self.chirality {
            obj.insert("chirality".into(), json!(ch));
        }
        if self.chirality_flagged {
            obj.insert("flagged".into(), json!(true));
        }
        obj.insert("residual".into(), json!(self.residual));
        serde_json::Value::Object(obj)
    }
}

pub fn nodes_to_json(nodes: &[NodeReport]) -> serde_json::Value {
    json!(nodes.iter().map(NodeReport::to_json).collect::<Vec<_>>())
}

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Region { min, max }
    }

    /// One full Brillouin zone, [0, 2π)³.
    pub fn full_bz() -> Self {
        Region {
            min: [0.0; 3],
            max: [TAU; 3],
        }
    }

    fn contains(&self, k: &[f64], margin: f64) -> bool {
        k.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| *x >= lo - margin && *x <= hi + margin)
    }
}

/// Outcome of a node scan: converged, deduplicated positions (sorted
/// lexicographically) plus any seeds whose refinement failed to converge.
#[derive(Debug, Clone)]
pub struct NodeScan {
    pub nodes: Vec<NodeReport>,
    pub failed_seeds: Vec<Momentum>,
}

fn abs_disc(model: &BlochModel, k: &[f64; 3]) -> f64 {
    match model.eval(&Momentum::new(k)) {
        Ok(h) => discriminant(&h).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn disc_residuals(model: &BlochModel, k: &[f64; 3]) -> Option<[f64; 2]> {
    let h = model.eval(&Momentum::new(k)).ok()?;
    let d = discriminant(&h);
    Some([d.re, d.im])
}

/// Damped Gauss–Newton on |Disc|²: two real residuals (Re Disc, Im Disc),
/// three unknowns, central finite-difference Jacobian (step 1e−6). Near a
/// Weyl point the two residual rows degenerate onto a common direction, so
/// the step solves (J·Jᵀ + λ)y = r with Levenberg–Marquardt damping and only
/// descent steps are accepted. Returns the refined position when |Disc| < tol.
fn refine_node(model: &BlochModel, seed: [f64; 3], tol: f64) -> Option<([f64; 3], f64)> {
    const FD_STEP: f64 = 1e-6;
    const MAX_STEP: f64 = 0.3;
    let mut k = seed;
    let mut r = disc_residuals(model, &k)?;
    let mut rnorm = (r[0] * r[0] + r[1] * r[1]).sqrt();
    let mut lambda = 1e-6;
    'outer: for _ in 0..200 {
        let mut j = [[0.0f64; 3]; 2];
        for axis in 0..3 {
            let mut kp = k;
            let mut km = k;
            kp[axis] += FD_STEP;
            km[axis] -= FD_STEP;
            let rp = disc_residuals(model, &kp)?;
            let rm = disc_residuals(model, &km)?;
            j[0][axis] = (rp[0] - rm[0]) / (2.0 * FD_STEP);
            j[1][axis] = (rp[1] - rm[1]) / (2.0 * FD_STEP);
        }
        let g00 = j[0].iter().map(|x| x * x).sum::<f64>();
        let g11 = j[1].iter().map(|x| x * x).sum::<f64>();
        let g01 = j[0].iter().zip(&j[1]).map(|(a, b)| a * b).sum::<f64>();
        if g00 + g11 <= 0.0 {
            break; // Jacobian vanished: stalled at a stationary point
        }
        loop {
            // (G + λ·diag) y = r with the 2×2 closed form
            let a = g00 + lambda * (g00 + g11).max(1e-300);
            let d = g11 + lambda * (g00 + g11).max(1e-300);
            let det = a * d - g01 * g01;
            if det <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let y = [(d * r[0] - g01 * r[1]) / det, (a * r[1] - g01 * r[0]) / det];
            let mut step = [0.0f64; 3];
            for axis in 0..3 {
                step[axis] = -(j[0][axis] * y[0] + j[1][axis] * y[1]);
            }
            let slen = (step.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if slen > MAX_STEP {
                for s in &mut step {
                    *s *= MAX_STEP / slen;
                }
            }
            let mut k_try = k;
            for axis in 0..3 {
                k_try[axis] += step[axis];
            }
            let r_try = disc_residuals(model, &k_try)?;
            let rn_try = (r_try[0] * r_try[0] + r_try[1] * r_try[1]).sqrt();
            if rn_try < rnorm {
                k = k_try;
                r = r_try;
                rnorm = rn_try;
                lambda = (lambda / 4.0).max(1e-14);
                if rnorm < tol * 1e-3 || slen < 1e-13 {
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break 'outer; // no descent direction left at this precision
            }
        }
    }
    let residual = abs_disc(model, &k);
    (residual < tol).then_some((k, residual))
}

/// Distance between positions, shortest-image on periodic axes.
fn node_distance(model: &BlochModel, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(axis, (x, y))| {
            let mut d = (x - y).abs();
            if model.periodic(axis) {
                d = d.rem_euclid(TAU);
                d = d.min(TAU - d);
            }
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Scans an axis-aligned region for band degeneracies. Every strict local
/// minimum of |Disc| on the coarse grid below 10⁻² seeds a Gauss–Newton
/// refinement; converged positions are deduplicated within 10⁻⁴ and returned
/// sorted lexicographically, kinds unset. Seeds that fail to converge are
/// reported, not fatal.
///
/// Pick coarse counts that put model symmetry planes on the grid (odd counts
/// for a box symmetric about such a plane): a symmetric pair of samples
/// straddling the plane takes exactly equal |Disc| values, and a tie never
/// counts as a strict minimum.
pub fn find_nodes(
    model: &BlochModel,
    region: &Region,
    coarse: [usize; 3],
    tol: f64,
) -> Result<NodeScan, NodeError> {
    if model.dim() != 3 {
        return Err(NodeError::InvalidRegion(
            "node scans need a three-dimensional model".into(),
        ));
    }
    if coarse.iter().any(|&n| n < 8) {
        return Err(NodeError::InvalidRegion(format!(
            "coarse grid must be at least 8 per axis, got {coarse:?}"
        )));
    }
    for axis in 0..3 {
        if region.max[axis] <= region.min[axis] {
            return Err(NodeError::InvalidRegion(format!(
                "region is empty along axis {axis}"
            )));
        }
    }

    // grid coordinates: periodic axes spanning a full period sample the
    // half-open interval so that 0 and 2π are not double-counted
    let mut axis_coords: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut wraps = [false; 3];
    for axis in 0..3 {
        let span = region.max[axis] - region.min[axis];
        let n = coarse[axis];
        let full_period = model.periodic(axis) && (span - TAU).abs() < 1e-9;
        wraps[axis] = full_period;
        let coords = if full_period {
            (0..n)
                .map(|i| region.min[axis] + span * i as f64 / n as f64)
                .collect()
        } else {
            (0..n)
                .map(|i| region.min[axis] + span * i as f64 / (n - 1) as f64)
                .collect()
        };
        axis_coords.push(coords);
    }

    let (nx, ny, nz) = (coarse[0], coarse[1], coarse[2]);
    // fail fast on models that cannot be evaluated on the scan grid (grid
    // models are only defined at their own nodes) instead of reporting an
    // empty inventory
    let values: Vec<f64> = (0..nx * ny * nz)
        .into_par_iter()
        .map(|flat| {
            let i = flat / (ny * nz);
            let j = (flat / nz) % ny;
            let l = flat % nz;
            let k = Momentum::new(&[axis_coords[0][i], axis_coords[1][j], axis_coords[2][l]]);
            model.eval(&k).map(|h| discriminant(&h).norm())
        })
        .collect::<Result<_, _>>()?;
    let value_at = |i: usize, j: usize, l: usize| values[(i * ny + j) * nz + l];

    let neighbor = |idx: usize, axis: usize, delta: isize, n: usize| -> Option<usize> {
        let j = idx as isize + delta;
        if wraps[axis] {
            Some(j.rem_euclid(n as isize) as usize)
        } else if j < 0 || j >= n as isize {
            None
        } else {
            Some(j as usize)
        }
    };

    let mut seeds: Vec<[f64; 3]> = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for l in 0..nz {
                let v = value_at(i, j, l);
                if v >= SEED_THRESHOLD {
                    continue;
                }
                let mut strict_min = true;
                'outer: for (axis, (idx, n)) in [(i, nx), (j, ny), (l, nz)].into_iter().enumerate()
                {
                    for delta in [-1isize, 1] {
                        if let Some(w) = neighbor(idx, axis, delta, n) {
                            let nv = match axis {
                                0 => value_at(w, j, l),
                                1 => value_at(i, w, l),
                                _ => value_at(i, j, w),
                            };
                            if nv <= v {
                                strict_min = false;
                                break 'outer;
                            }
                        }
                    }
                }
                if strict_min {
                    seeds.push([axis_coords[0][i], axis_coords[1][j], axis_coords[2][l]]);
                }
            }
        }
    }

    type Refined = Option<([f64; 3], f64)>;
    let refined: Vec<(usize, Refined)> = seeds
        .par_iter()
        .enumerate()
        .map(|(s, seed)| (s, refine_node(model, *seed, tol)))
        .collect();

    let mut failed_seeds = Vec::new();
    let mut candidates: Vec<([f64; 3], f64)> = Vec::new();
    for (s, outcome) in refined {
        match outcome {
            Some((mut k, residual)) => {
                // canonical representative on periodic axes, tolerating the
                // wrap-around of positions refined to just below the period
                for (axis, coord) in k.iter_mut().enumerate() {
                    if model.periodic(axis) {
                        *coord = (*coord - region.min[axis] + 1e-6).rem_euclid(TAU) - 1e-6
                            + region.min[axis];
                    }
                }
                if region.contains(&k, 1e-6) {
                    candidates.push((k, residual));
                }
            }
            None => failed_seeds.push(Momentum::new(&seeds[s])),
        }
    }

    candidates.sort_by(|a, b| {
        a.0[0]
            .total_cmp(&b.0[0])
            .then(a.0[1].total_cmp(&b.0[1]))
            .then(a.0[2].total_cmp(&b.0[2]))
    });
    let mut nodes: Vec<NodeReport> = Vec::new();
    for (k, residual) in candidates {
        let dup = nodes
            .iter()
            .any(|n| node_distance(model, &k, n.position.components()) < DEDUP_RADIUS);
        if !dup {
            nodes.push(NodeReport {
                position: Momentum::new(&k),
                kind: None,
                chirality: None,
                chirality_flagged: false,
                residual,
                probe_radius: None,
            });
        }
    }

    Ok(NodeScan {
        nodes,
        failed_seeds,
    })
}

enum ProbeOutcome {
    Clean(bool), // true when the probe braid permutes the bands
    Pierced(String),
}

fn probe_circle(
    model: &BlochModel,
    center: &Momentum,
    radius: f64,
    normal: usize,
) -> Result<ProbeOutcome, NodeError> {
    let circle = LoopSpec::Circle {
        center: *center,
        radius,
        normal,
    };
    match braid_along_loop(model, &circle, 401) {
        Ok(inv) => Ok(ProbeOutcome::Clean(!inv.permutation.is_identity())),
        Err(BraidError::Spectra(
            SpectraError::DegenerateOnPath { .. } | SpectraError::RefinementExhausted { .. },
        )) => Ok(ProbeOutcome::Pierced(format!(
            "degeneracy on the probe circle normal to axis {normal}"
        ))),
        Err(BraidError::ProjectionDegenerate { .. }) => Ok(ProbeOutcome::Pierced(format!(
            "unresolvable braid on the probe circle normal to axis {normal}"
        ))),
        Err(e) => Err(NodeError::Braid(e.to_string())),
    }
}

/// Classifies a converged node by braiding three small axis-aligned circles
/// around it: any circle that links an exceptional line sees a band exchange.
/// A node with three trivial probes is an isolated Weyl point and gets its
/// chirality from [`chern_sphere`] at the probe radius.
pub fn classify_node(
    model: &BlochModel,
    position: &Momentum,
    probe_radius: f64,
) -> Result<NodeReport, NodeError> {
    assert!(probe_radius > 0.0);
    let residual = abs_disc(
        model,
        position
            .components()
            .try_into()
            .expect("classify_node needs 3D positions"),
    );
    let mut pierced: Vec<String> = Vec::new();
    let mut exchanged = false;
    for normal in 0..3 {
        match probe_circle(model, position, probe_radius, normal)? {
            ProbeOutcome::Clean(true) => exchanged = true,
            ProbeOutcome::Clean(false) => {}
            ProbeOutcome::Pierced(detail) => pierced.push(detail),
        }
    }
    if exchanged {
        return Ok(NodeReport {
            position: *position,
            kind: Some(NodeKind::ExceptionalCrossing),
            chirality: None,
            chirality_flagged: false,
            residual,
            probe_radius: Some(probe_radius),
        });
    }
    if !pierced.is_empty() {
        return Err(NodeError::ProbeDegenerate {
            detail: pierced.join("; "),
        });
    }
    let charges = chern_sphere(
        model,
        position,
        probe_radius,
        DEFAULT_SPHERE_SAMPLES,
        DEFAULT_SPHERE_SAMPLES,
    )?;
    let chirality = charges[0];
    Ok(NodeReport {
        position: *position,
        kind: Some(NodeKind::WeylPoint),
        chirality: Some(chirality),
        chirality_flagged: chirality.abs() > 1,
        residual,
        probe_radius: Some(probe_radius),
    })
}

struct Latitude {
    phases: Vec<f64>,
    start_values: Vec<num_complex::Complex64>,
    mid_values: Vec<num_complex::Complex64>,
}

/// Per-band sphere charges from the biorthogonal Berry-phase flow over
/// latitude circles, tracked from the north pole. Band order is the canonical
/// eigenvalue order at the north-pole end of the φ = 0 meridian; charges of
/// the bands sum to zero. Checks that band transport along the φ = 0 and
/// φ ≈ π meridians agrees before trusting the flow.
pub fn chern_sphere(
    model: &BlochModel,
    center: &Momentum,
    radius: f64,
    n_theta: usize,
    n_phi: usize,
) -> Result<Vec<i64>, NodeError> {
    assert!(radius > 0.0);
    assert!(n_theta >= 16 && n_phi >= 16, "sphere sampling too coarse");
    assert_eq!(center.dim(), 3);
    let c = center.components();
    let bands = model.bands();

    let latitudes: Vec<Result<Latitude, NodeError>> = (0..n_theta)
        .into_par_iter()
        .map(|t| {
            let theta = PI * (t as f64 + 0.5) / n_theta as f64;
            let (st, ct) = (theta.sin(), theta.cos());
            let point_of = |u: f64| {
                let phi = TAU * (u - u.floor());
                Momentum::k3(
                    c[0] + radius * st * phi.cos(),
                    c[1] + radius * st * phi.sin(),
                    c[2] + radius * ct,
                )
            };
            let mut ts: Vec<f64> = (0..n_phi).map(|i| i as f64 / n_phi as f64).collect();
            ts.push(1.0);
            let bp = spectra::track_param(model, &point_of, &ts, DEFAULT_GAP_RATIO).map_err(
                |e| match e {
                    SpectraError::DegenerateOnPath { t, .. } => NodeError::ProbeDegenerate {
                        detail: format!(
                            "degeneracy on the probe sphere at latitude {theta}, φ/2π = {t}"
                        ),
                    },
                    other => NodeError::Spectra(other),
                },
            )?;
            if !bp.composite().is_identity() {
                // a contractible latitude loop can only wind if an exceptional
                // structure pierces the sphere between sample rings
                return Err(NodeError::ProbeDegenerate {
                    detail: format!("bands wind around the latitude ring at θ = {theta}"),
                });
            }
            let frames = bp.strand_frames();
            let phases = band_phases_from_frames(&frames)
                .iter()
                .map(|p| p.0)
                .collect();
            let start_values = frames[0].values.clone();
            let mid_values = frames[n_phi / 2].values.clone();
            Ok(Latitude {
                phases,
                start_values,
                mid_values,
            })
        })
        .collect();
    let latitudes: Vec<Latitude> = latitudes.into_iter().collect::<Result<_, _>>()?;

    // chain band labels from latitude to latitude along two meridians
    let mut labels: Vec<usize> = (0..bands).collect(); // global band -> strand index
    let mut unwrapped: Vec<Vec<f64>> = vec![Vec::with_capacity(n_theta); bands];
    for (g, &s) in labels.iter().enumerate() {
        unwrapped[g].push(latitudes[0].phases[s]);
    }
    for t in 0..n_theta - 1 {
        let a = spectra::continue_strands(
            &latitudes[t].start_values,
            &latitudes[t + 1].start_values,
            DEFAULT_GAP_RATIO,
        )
        .ok_or(NodeError::SeamInconsistent { theta_index: t })?;
        let b = spectra::continue_strands(
            &latitudes[t].mid_values,
            &latitudes[t + 1].mid_values,
            DEFAULT_GAP_RATIO,
        )
        .ok_or(NodeError::SeamInconsistent { theta_index: t })?;
        if a != b {
            return Err(NodeError::SeamInconsistent { theta_index: t });
        }
        labels = labels.iter().map(|&s| a.apply(s)).collect();
        for (g, &s) in labels.iter().enumerate() {
            let prev = *unwrapped[g].last().unwrap();
            let raw = latitudes[t + 1].phases[s];
            let k = ((prev - raw) / TAU).round();
            let lifted = raw + TAU * k;
            if (lifted - prev).abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(NodeError::RoundingResidue {
                    band: g,
                    value: (lifted - prev) / TAU,
                    residue: (lifted - prev).abs() / TAU,
                });
            }
            unwrapped[g].push(lifted);
        }
    }

    let mut charges = Vec::with_capacity(bands);
    for (g, strand) in unwrapped.iter().enumerate() {
        let delta = strand.last().unwrap() - strand.first().unwrap();
        let turns = delta / TAU;
        let rounded = turns.round();
        if (turns - rounded).abs() >= 0.05 {
            return Err(NodeError::RoundingResidue {
                band: g,
                value: turns,
                residue: (turns - rounded).abs(),
            });
        }
        charges.push(rounded as i64);
    }
    Ok(charges)
}
