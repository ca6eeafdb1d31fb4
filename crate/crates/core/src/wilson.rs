//! Biorthogonal Wilson-loop eigenphase flow on cylinders and the Z₂ crossing
//! invariant.
//!
//! For a loop with trivially permuted bands, each tracked band b carries the
//! Wilson factor w_b = ∏_j ⟨L_b(k_{j+1})|R_b(k_j)⟩ around the loop, the
//! biorthogonal Berry factor of that band. The factors are gauge invariant:
//! rescaling an eigenvector pair at any point cancels between the two overlaps
//! that reference it, since the chain closes on the basepoint frame itself.
//! (The full N×N overlap-matrix product is not the object to diagonalize —
//! biorthonormal completeness R·L† = 1 makes it telescope to the identity
//! exactly; the per-band product is what carries the flow.) A loop whose
//! bands wind cannot host a Wilson loop at all — consistent band ordering
//! around the loop is exactly what winding destroys — so that direction is
//! reserved for the flow parameter.
//!
//! The cylinder flow slices a cylinder of θ-circles along k_z. For two bands
//! the per-slice eigenphases obey φ₁ + φ₂ ≡ 0 (mod 2π) (the closed product has
//! unit determinant by biorthonormality), so phase crossings can only occur at
//! 0 or π. Counting transversal passages of one continuously unwrapped strand
//! through those two levels over a full period gives the crossing report; the
//! Z₂ verdict is the parity of the π crossings. Crossings are counted on the
//! unwrapped strand rather than phases folded into [0, π] — folding turns
//! crossings into tangencies.
//!
//! Overlap matrices are used raw, with no per-step unitarization: finite-
//! resolution non-Hermitian Wilson eigenvalues are not exactly unimodular, and
//! the modulus drift is reported as a convergence diagnostic instead of being
//! normalized away.

use crate::algebra::Permutation;
use crate::models::{BlochModel, LoopSpec, Momentum};
use crate::spectra::{self, EigenFrame, SpectraError, DEFAULT_GAP_RATIO};
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WilsonError {
    #[error(
        "bands wind along the loop (permutation {permutation}); slice along this direction instead"
    )]
    WindingAlongLoop { permutation: Permutation },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("slice {index} (k_z = {kz}) failed: {source}")]
    Slice {
        index: usize,
        kz: f64,
        source: Box<WilsonError>,
    },
    #[error("per-slice phase sum |φ₁+φ₂| = {residual:.3e} at slice {slice} exceeds 1e-3")]
    PhaseSum { slice: usize, residual: f64 },
    #[error("phase strands cannot be continued across slice {slice}; increase flow_samples")]
    UnresolvedFlow { slice: usize },
    #[error("strand tangent to the {level} level near slice {slice}; refine flow_samples")]
    NonTransversal { slice: usize, level: &'static str },
    #[error("crossing counting is defined for two bands, model has {bands}")]
    NotTwoBands { bands: usize },
}

/// Cylinder geometry: θ-circles of radius `radius` around `center` in the
/// (k_x, k_y) plane, stacked along k_z over one period.
#[derive(Debug, Clone)]
pub struct CylinderSpec {
    pub center: (f64, f64),
    pub radius: f64,
    pub loop_axis: LoopAxis,
    pub flow_axis: FlowAxis,
    pub loop_samples: usize,
    pub flow_samples: usize,
}

/// Loop direction on the cylinder. Only θ-circles are supported; a model that
/// winds along both primitive directions should be sliced along a diagonal
/// before being handed to the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopAxis {
    #[default]
    Theta,
}

/// Flow direction of the cylinder slicing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowAxis {
    #[default]
    Kz,
}

impl CylinderSpec {
    pub fn new(center: (f64, f64), radius: f64) -> Self {
        CylinderSpec {
            center,
            radius,
            loop_axis: LoopAxis::Theta,
            flow_axis: FlowAxis::Kz,
            loop_samples: 401,
            flow_samples: 401,
        }
    }

    fn validate(&self) {
        assert!(self.radius > 0.0, "cylinder radius must be positive");
        assert!(
            self.loop_samples >= 32 && self.flow_samples >= 32,
            "need at least 32 samples"
        );
    }
}

/// Wilson eigenphase flow over the slicing parameter.
#[derive(Debug, Clone)]
pub struct WilsonFlow {
    /// Flow-axis value of each slice.
    pub slice_params: Vec<f64>,
    /// Per slice: the N eigenphases in (−π, π], in tracked band order.
    pub phases: Vec<Vec<f64>>,
    /// Per slice: eigenvalue moduli, matching `phases`.
    pub moduli: Vec<Vec<f64>>,
    /// Continuously unwrapped strands, indexed [strand][slice].
    pub unwrapped: Vec<Vec<f64>>,
    /// max |modulus − 1| over all slices and bands.
    pub modulus_drift: f64,
}

/// Crossing counts at the 0 and π phase levels and the Z₂ verdict
/// nu = n_pi mod 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub n_zero: usize,
    pub n_pi: usize,
    pub nu: u8,
    pub modulus_drift: f64,
}

impl CrossingReport {
    pub fn counts(&self) -> (usize, usize, u8) {
        (self.n_zero, self.n_pi, self.nu)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n_zero": self.n_zero,
            "n_pi": self.n_pi,
            "nu": self.nu,
            "modulus_drift": self.modulus_drift,
        })
    }
}

/// Per-band Wilson factors from a closed chain of strand-ordered frames
/// (`frames[M]` must be the frame object at the basepoint again):
/// w_b = ∏_j ⟨L_b(k_{j+1})|R_b(k_j)⟩, returned as (phase in (−π, π], modulus)
/// per band.
pub fn band_phases_from_frames(frames: &[EigenFrame]) -> Vec<(f64, f64)> {
    assert!(frames.len() >= 2);
    let n = frames[0].bands();
    let steps = frames.len() - 1;
    let mut acc = vec![num_complex::Complex64::new(1.0, 0.0); n];
    for j in 0..steps {
        for (b, a) in acc.iter_mut().enumerate() {
            let mut s = num_complex::Complex64::new(0.0, 0.0);
            for r in 0..n {
                s += frames[j + 1].left[[r, b]].conj() * frames[j].right[[r, b]];
            }
            *a *= s;
        }
    }
    acc.iter().map(|z| (z.arg(), z.norm())).collect()
}

fn closed_strand_frames(
    model: &BlochModel,
    loop_spec: &LoopSpec,
    resolution: usize,
) -> Result<Vec<EigenFrame>, WilsonError> {
    assert!(
        loop_spec.is_closed(),
        "loop's first and last momenta must coincide"
    );
    let mut ts: Vec<f64> = (0..resolution)
        .map(|i| i as f64 / resolution as f64)
        .collect();
    ts.push(1.0);
    let point_of = |t: f64| loop_spec.point_at(t);
    let bp = spectra::track_param(model, &point_of, &ts, DEFAULT_GAP_RATIO)?;
    let composite = bp.composite();
    if !composite.is_identity() {
        return Err(WilsonError::WindingAlongLoop {
            permutation: composite,
        });
    }
    Ok(bp.strand_frames())
}

/// Biorthogonal Wilson-loop eigenvalues of a closed loop, one (phase, modulus)
/// pair per tracked band. The loop must carry trivially permuted (non-winding)
/// bands; [`WilsonError::WindingAlongLoop`] reports the offending permutation
/// otherwise.
pub fn wilson_loop(
    model: &BlochModel,
    loop_spec: &LoopSpec,
    resolution: usize,
) -> Result<Vec<(f64, f64)>, WilsonError> {
    let frames = closed_strand_frames(model, loop_spec, resolution)?;
    Ok(band_phases_from_frames(&frames))
}

fn wrap_to_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Continues each strand onto the next slice's phases (up to 2π shifts),
/// bijectively. Strands are matched against a linear extrapolation of their
/// recent motion, not against their last value — at a transversal level
/// crossing the two strands pass through each other, and nearest-value
/// matching would bounce them apart and hide the crossing. Jumps from the
/// current values must stay below π/2.
fn continue_phases(prev: Option<&[f64]>, current: &[f64], next: &[f64]) -> Option<Vec<f64>> {
    let n = current.len();
    let predicted: Vec<f64> = match prev {
        Some(p) => current.iter().zip(p).map(|(c, q)| 2.0 * c - q).collect(),
        None => current.to_vec(),
    };
    let lift = |target: f64, near: f64| -> f64 {
        let k = ((near - target) / TAU).round();
        target + TAU * k
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    // n is tiny (two bands in practice): enumerate assignments directly
    permute(&mut perm, 0, &mut |p: &[usize]| {
        let lifted: Vec<f64> = (0..n).map(|i| lift(next[p[i]], predicted[i])).collect();
        let cost = lifted
            .iter()
            .zip(&predicted)
            .map(|(l, q)| (l - q).abs())
            .sum::<f64>();
        if best.as_ref().is_none_or(|(w, _)| cost < *w) {
            best = Some((cost, lifted));
        }
    });
    let (_, lifted) = best?;
    let worst_jump = lifted
        .iter()
        .zip(current)
        .map(|(l, c)| (l - c).abs())
        .fold(0.0f64, f64::max);
    if worst_jump >= FRAC_PI_2 {
        return None;
    }
    Some(lifted)
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// Computes the Wilson eigenphase flow over one k_z period. Slices are placed
/// at k_z = −π + 2π(j+¼)/F, which keeps the symmetric planes k_z = 0 and ±π —
/// where crossings like to sit — strictly between samples for every F; the
/// invariant is unchanged by translating the window.
pub fn wilson_flow(model: &BlochModel, spec: &CylinderSpec) -> Result<WilsonFlow, WilsonError> {
    wilson_flow_in_window(model, spec, 0.0)
}

/// [`wilson_flow`] over the translated window [−π+δ, π+δ); the crossing
/// counts cover one full period either way.
pub fn wilson_flow_in_window(
    model: &BlochModel,
    spec: &CylinderSpec,
    window_offset: f64,
) -> Result<WilsonFlow, WilsonError> {
    spec.validate();
    let f = spec.flow_samples;
    let slice_params: Vec<f64> = (0..f)
        .map(|j| window_offset - PI + TAU * (j as f64 + 0.25) / f as f64)
        .collect();

    let slices: Vec<(Vec<(f64, f64)>, usize)> = slice_params
        .par_iter()
        .enumerate()
        .map(|(index, &kz)| {
            let circle = LoopSpec::Circle {
                center: Momentum::k3(spec.center.0, spec.center.1, kz),
                radius: spec.radius,
                normal: 2,
            };
            wilson_loop(model, &circle, spec.loop_samples)
                .map(|v| (v, index))
                .map_err(|e| WilsonError::Slice {
                    index,
                    kz,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;

    let mut phases = Vec::with_capacity(f);
    let mut moduli = Vec::with_capacity(f);
    let mut drift = 0.0f64;
    for (pairs, _) in &slices {
        phases.push(pairs.iter().map(|p| p.0).collect::<Vec<f64>>());
        moduli.push(pairs.iter().map(|p| p.1).collect::<Vec<f64>>());
        for &(_, m) in pairs {
            drift = drift.max((m - 1.0).abs());
        }
    }

    // unwrap strands continuously in k_z
    let n = phases[0].len();
    let mut strands: Vec<Vec<f64>> = vec![Vec::with_capacity(f); n];
    let mut prev: Option<Vec<f64>> = None;
    let mut current: Vec<f64> = phases[0].clone();
    for (b, &v) in current.iter().enumerate() {
        strands[b].push(v);
    }
    for (j, raw) in phases.iter().enumerate().skip(1) {
        let next = continue_phases(prev.as_deref(), &current, raw)
            .ok_or(WilsonError::UnresolvedFlow { slice: j })?;
        prev = Some(std::mem::replace(&mut current, next));
        for (b, &v) in current.iter().enumerate() {
            strands[b].push(v);
        }
    }

    Ok(WilsonFlow {
        slice_params,
        phases,
        moduli,
        unwrapped: strands,
        modulus_drift: drift,
    })
}

/// Counts transversal passages of one continuously tracked strand through the
/// 0 and π levels (mod 2π) over one full flow period, closing the strand onto
/// the first slice shifted by its net winding.
pub fn count_crossings(flow: &WilsonFlow) -> Result<CrossingReport, WilsonError> {
    let n = flow.phases.first().map_or(0, |p| p.len());
    if n != 2 {
        return Err(WilsonError::NotTwoBands { bands: n });
    }
    for (slice, p) in flow.phases.iter().enumerate() {
        let residual = wrap_to_pi(p.iter().sum::<f64>()).abs();
        if residual > 1e-3 {
            return Err(WilsonError::PhaseSum { slice, residual });
        }
    }
    let f = flow.slice_params.len();
    // close the period: continue the tracked pair onto slice 0 again
    let last: Vec<f64> = flow.unwrapped.iter().map(|s| s[f - 1]).collect();
    let before_last: Option<Vec<f64>> =
        (f >= 2).then(|| flow.unwrapped.iter().map(|s| s[f - 2]).collect());
    let closed = continue_phases(before_last.as_deref(), &last, &flow.phases[0])
        .ok_or(WilsonError::UnresolvedFlow { slice: f })?;

    let mut strand: Vec<f64> = flow.unwrapped[0].clone();
    strand.push(closed[0]);

    let count_level = |base: f64, name: &'static str| -> Result<usize, WilsonError> {
        let tol = 1e-6;
        let mut count = 0usize;
        for (j, w) in strand.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let a_on = wrap_to_pi(a - base).abs() < tol;
            let b_on = wrap_to_pi(b - base).abs() < tol;
            if a_on || b_on {
                // resting exactly on the level is fine (no passage); departing
                // from it within one step is an unresolvable tangency
                if (b - a).abs() > tol {
                    return Err(WilsonError::NonTransversal {
                        slice: j,
                        level: name,
                    });
                }
                continue;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let first = ((lo - base) / TAU).ceil() as i64;
            let last = ((hi - base) / TAU).floor() as i64;
            if last >= first {
                count += (last - first + 1) as usize;
            }
        }
        Ok(count)
    };

    let n_zero = count_level(0.0, "0")?;
    let n_pi = count_level(PI, "pi")?;
    Ok(CrossingReport {
        n_zero,
        n_pi,
        nu: (n_pi % 2) as u8,
        modulus_drift: flow.modulus_drift,
    })
}

/// CSV export: header `kz,phi1,phi2,mod1,mod2`, one row per slice, phases in
/// radians in (−π, π], 12 significant digits.
pub fn write_flow_csv<W: Write>(flow: &WilsonFlow, mut sink: W) -> io::Result<()> {
    writeln!(sink, "kz,phi1,phi2,mod1,mod2")?;
    for (j, &kz) in flow.slice_params.iter().enumerate() {
        write!(sink, "{kz:.11e}")?;
        for p in &flow.phases[j] {
            write!(sink, ",{p:.11e}")?;
        }
        for m in &flow.moduli[j] {
            write!(sink, ",{m:.11e}")?;
        }
        writeln!(sink)?;
    }
    Ok(())
}
