//! Eigen-decomposition with biorthogonal frames, discriminant evaluation, and
//! eigenvalue continuation along momentum paths.
//!
//! Non-Hermitian eigenvectors are not orthogonal; the useful inner-product
//! structure pairs right eigenvectors R with left eigenvectors L normalized to
//! L†R = 1. Two-band matrices are decomposed in closed form — the eigenvalues
//! of h₊σ₊ + h₋σ₋ + h_zσ_z are ±√(4h₊h₋ + h_z²) — so that the invariant
//! computations downstream are not limited by iterative-solver noise. General
//! N falls back to a dense solver, with left vectors taken from the inverse of
//! the right-eigenvector matrix, which enforces biorthonormality exactly.
//!
//! The decomposition has a hard failure mode: within `tol` of an exceptional
//! point the eigenvector basis degenerates and the biorthogonal overlap matrix
//! becomes singular beyond 1/tol. That is reported as [`SpectraError::Defective`]
//! rather than silently returning an ill-conditioned frame.

use crate::algebra::Permutation;
use crate::models::{BlochModel, CMat, ModelError, Momentum};
use ndarray::Array2;
use ndarray_linalg::{Eig, EigVals, Inverse, SVD};
use num_complex::Complex64;
use thiserror::Error;

/// Default defectiveness tolerance: overlap condition number above 1/tol = 10⁸
/// is treated as an exceptional point.
pub const DEFAULT_DECOMPOSE_TOL: f64 = 1e-8;
/// Default continuity margin for [`track`].
pub const DEFAULT_GAP_RATIO: f64 = 0.5;
/// Relative eigenvalue-gap floor below which a path sample counts as degenerate.
pub const DEGENERACY_GAP_FLOOR: f64 = 1e-9;

const MAX_BISECTION: usize = 20;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error(
        "matrix is within tolerance of an exceptional point \
         (biorthogonal overlap condition number {cond:.3e})"
    )]
    Defective { cond: f64 },
    #[error("band degeneracy on path at parameter {t}: relative eigenvalue gap {gap:.3e}")]
    DegenerateOnPath { t: f64, gap: f64 },
    #[error("band assignment still ambiguous after {levels} bisection levels near parameter {t}")]
    RefinementExhausted { t: f64, levels: usize },
    #[error("invalid path: {0}")]
    InvalidPath(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("eigensolver failure: {0}")]
    Backend(String),
}

/// Complex eigenvalues plus biorthonormal right/left eigenvector matrices
/// (columns are eigenvectors, L†R = 1) at a single momentum.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    pub values: Vec<Complex64>,
    pub right: CMat,
    pub left: CMat,
    pub residual: f64,
}

impl EigenFrame {
    pub fn bands(&self) -> usize {
        self.values.len()
    }

    /// Frame with bands reordered so that new band s is old band `order[s]`.
    pub fn permuted(&self, order: &[usize]) -> EigenFrame {
        let n = self.bands();
        assert_eq!(order.len(), n);
        let mut right = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        let mut left = right.clone();
        let mut values = Vec::with_capacity(n);
        for (s, &o) in order.iter().enumerate() {
            values.push(self.values[o]);
            for r in 0..n {
                right[[r, s]] = self.right[[r, o]];
                left[[r, s]] = self.left[[r, o]];
            }
        }
        EigenFrame {
            values,
            right,
            left,
            residual: self.residual,
        }
    }

    /// Biorthogonal overlap block ⟨L_a(self) | R_b(other)⟩ = (L_self† · R_other).
    pub fn overlap_from(&self, other: &EigenFrame) -> CMat {
        adjoint(&self.left).dot(&other.right)
    }
}

pub(crate) fn adjoint(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

fn canonical_order(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    idx
}

fn frame_residual(h: &CMat, values: &[Complex64], right: &CMat, left: &CMat) -> f64 {
    let n = values.len();
    let hr = h.dot(right);
    let lh = adjoint(left).dot(h);
    let mut worst = 0.0f64;
    for j in 0..n {
        for r in 0..n {
            worst = worst.max((hr[[r, j]] - values[j] * right[[r, j]]).norm());
            worst = worst.max((lh[[j, r]] - values[j] * adjoint(left)[[j, r]]).norm());
        }
    }
    worst
}

/// Condition number of a 2×2 complex matrix from its singular values.
fn cond_2x2(b: &CMat) -> f64 {
    // singular values² = eigenvalues of B†B
    let g = adjoint(b).dot(b);
    let half_tr = 0.5 * (g[[0, 0]].re + g[[1, 1]].re);
    let det = (g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]]).re;
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    let smax2 = half_tr + disc;
    let smin2 = (half_tr - disc).max(0.0);
    if smin2 <= 0.0 {
        f64::INFINITY
    } else {
        (smax2 / smin2).sqrt()
    }
}

fn decompose_two(h: &CMat, tol: f64) -> Result<EigenFrame, SpectraError> {
    let a = h[[0, 0]];
    let b = h[[0, 1]];
    let c = h[[1, 0]];
    let d = h[[1, 1]];
    let scale = [a, b, c, d]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let mu = 0.5 * (a + d);
    let s = (b * c + 0.25 * (a - d) * (a - d)).sqrt();
    let raw = [mu + s, mu - s];

    // scalar-like matrix: eigenvectors are free, use coordinate columns
    if b.norm() + c.norm() + (a - d).norm() < 1e-14 * scale {
        let order = canonical_order(&raw);
        let values = vec![raw[order[0]], raw[order[1]]];
        let eye = Array2::from_shape_fn((2, 2), |(i, j)| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        let residual = frame_residual(h, &values, &eye, &eye);
        return Ok(EigenFrame {
            values,
            right: eye.clone(),
            left: eye,
            residual,
        });
    }

    let mut right = Array2::from_elem((2, 2), Complex64::new(0.0, 0.0));
    let mut left = right.clone();
    for (j, &lambda) in raw.iter().enumerate() {
        // right eigenvector: (b, λ−a) or (λ−d, c), whichever is larger
        let r1 = [b, lambda - a];
        let r2 = [lambda - d, c];
        let pick_r = if r1[0].norm() + r1[1].norm() >= r2[0].norm() + r2[1].norm() {
            r1
        } else {
            r2
        };
        let rn = (pick_r[0].norm_sqr() + pick_r[1].norm_sqr()).sqrt();
        // left eigenvector solves H†l = λ̄l: (c̄, λ̄−ā) or (λ̄−d̄, b̄)
        let lam_c = lambda.conj();
        let l1 = [c.conj(), lam_c - a.conj()];
        let l2 = [lam_c - d.conj(), b.conj()];
        let pick_l = if l1[0].norm() + l1[1].norm() >= l2[0].norm() + l2[1].norm() {
            l1
        } else {
            l2
        };
        let ln = (pick_l[0].norm_sqr() + pick_l[1].norm_sqr()).sqrt();
        if rn < 1e-300 || ln < 1e-300 {
            return Err(SpectraError::Defective {
                cond: f64::INFINITY,
            });
        }
        for r in 0..2 {
            right[[r, j]] = pick_r[r] / rn;
            left[[r, j]] = pick_l[r] / ln;
        }
    }

    // defectiveness gate: near an exceptional point the unit-norm eigenvector
    // basis degenerates, which is equivalent (up to the bounded √2 factor) to
    // the biorthogonal overlap losing rank beyond 1/tol
    let cond = cond_2x2(&right);
    if !cond.is_finite() || cond > 1.0 / tol {
        return Err(SpectraError::Defective { cond });
    }
    let overlap = adjoint(&left).dot(&right);
    let det = overlap[[0, 0]] * overlap[[1, 1]] - overlap[[0, 1]] * overlap[[1, 0]];
    if det.norm() < 1e-300 {
        return Err(SpectraError::Defective {
            cond: f64::INFINITY,
        });
    }
    let inv = Array2::from_shape_vec(
        (2, 2),
        vec![
            overlap[[1, 1]] / det,
            -overlap[[0, 1]] / det,
            -overlap[[1, 0]] / det,
            overlap[[0, 0]] / det,
        ],
    )
    .unwrap();
    // L'† = B⁻¹·L† so that L'†R = 1 exactly
    let left_adj = inv.dot(&adjoint(&left));
    let left = adjoint(&left_adj);

    let order = canonical_order(&raw);
    let values: Vec<Complex64> = order.iter().map(|&i| raw[i]).collect();
    let right = Array2::from_shape_fn((2, 2), |(r, j)| right[[r, order[j]]]);
    let left = Array2::from_shape_fn((2, 2), |(r, j)| left[[r, order[j]]]);
    let residual = frame_residual(h, &values, &right, &left);
    Ok(EigenFrame {
        values,
        right,
        left,
        residual,
    })
}

fn decompose_general(h: &CMat, tol: f64) -> Result<EigenFrame, SpectraError> {
    let (raw_vals, raw_vecs) = h
        .eig()
        .map_err(|e| SpectraError::Backend(format!("dense eigensolver failed: {e}")))?;
    let n = raw_vals.len();
    let order = canonical_order(raw_vals.as_slice().unwrap());
    let values: Vec<Complex64> = order.iter().map(|&i| raw_vals[i]).collect();
    let mut right = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
    for (j, &o) in order.iter().enumerate() {
        let norm = raw_vecs
            .column(o)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        for r in 0..n {
            right[[r, j]] = raw_vecs[[r, o]] / norm;
        }
    }
    // eigenbasis condition gates defectiveness (σmax of a unit-column matrix
    // is at most √n, so this matches the 1/tol overlap criterion)
    let (_, sing, _) = right
        .svd(false, false)
        .map_err(|e| SpectraError::Backend(format!("svd failed: {e}")))?;
    let smax = sing.iter().cloned().fold(0.0, f64::max);
    let smin = sing.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > 1.0 / tol {
        return Err(SpectraError::Defective { cond });
    }
    let left_adj = right.inv().map_err(|_| SpectraError::Defective {
        cond: f64::INFINITY,
    })?;
    let left = adjoint(&left_adj);
    let residual = frame_residual(h, &values, &right, &left);
    Ok(EigenFrame {
        values,
        right,
        left,
        residual,
    })
}

/// Biorthogonal eigen-decomposition with eigenvalues in canonical
/// (Re, Im)-lexicographic order. Fails with [`SpectraError::Defective`] within
/// `tol` of an exceptional point.
pub fn decompose(h: &CMat, tol: f64) -> Result<EigenFrame, SpectraError> {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "matrix must be square");
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SpectraError::Backend("non-finite matrix entry".into()));
    }
    match n {
        0 => Err(SpectraError::Backend("empty matrix".into())),
        1 => {
            let one = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
            Ok(EigenFrame {
                values: vec![h[[0, 0]]],
                right: one.clone(),
                left: one,
                residual: 0.0,
            })
        }
        2 => decompose_two(h, tol),
        _ => decompose_general(h, tol),
    }
}

/// Eigenvalues only, without the frame machinery (works on defective input).
pub fn eigenvalues(h: &CMat) -> Result<Vec<Complex64>, SpectraError> {
    let n = h.nrows();
    match n {
        2 => {
            let a = h[[0, 0]];
            let b = h[[0, 1]];
            let c = h[[1, 0]];
            let d = h[[1, 1]];
            let mu = 0.5 * (a + d);
            let s = (b * c + 0.25 * (a - d) * (a - d)).sqrt();
            let raw = [mu + s, mu - s];
            let order = canonical_order(&raw);
            Ok(order.iter().map(|&i| raw[i]).collect())
        }
        _ => {
            let vals = h
                .eigvals()
                .map_err(|e| SpectraError::Backend(format!("eigenvalue solve failed: {e}")))?;
            let mut v: Vec<Complex64> = vals.to_vec();
            let order = canonical_order(&v);
            v = order.iter().map(|&i| v[i]).collect();
            Ok(v)
        }
    }
}

/// Discriminant ∏_{i<j}(λ_i − λ_j)². For two bands this is tr(H)² − 4 det(H),
/// evaluated without an eigen-solve; the value is independent of eigenvalue
/// ordering.
pub fn discriminant(h: &CMat) -> Complex64 {
    let n = h.nrows();
    assert_eq!(n, h.ncols());
    match n {
        0 | 1 => Complex64::new(1.0, 0.0),
        2 => {
            let tr = h[[0, 0]] + h[[1, 1]];
            let det = h[[0, 0]] * h[[1, 1]] - h[[0, 1]] * h[[1, 0]];
            tr * tr - 4.0 * det
        }
        _ => {
            let vals = eigenvalues(h).expect("eigenvalue solve failed in discriminant");
            let mut acc = Complex64::new(1.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    let d = vals[i] - vals[j];
                    acc *= d * d;
                }
            }
            acc
        }
    }
}

/// Eigenvalue strands along a parameterized path: per-sample frames plus the
/// per-step index assignment that continues each strand.
#[derive(Debug, Clone)]
pub struct BandPath {
    pub params: Vec<f64>,
    pub frames: Vec<EigenFrame>,
    /// `assignments[t]` maps the band index of a strand at sample t to its
    /// index at sample t+1.
    pub assignments: Vec<Permutation>,
    /// True for samples inserted by bisection refinement.
    pub refined: Vec<bool>,
}

impl BandPath {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.frames.first().map_or(0, |f| f.bands())
    }

    /// Final-to-initial strand permutation: the strand starting at index i
    /// ends at index `composite().apply(i)`.
    pub fn composite(&self) -> Permutation {
        let mut acc = Permutation::identity(self.bands());
        for a in &self.assignments {
            acc = a.compose(&acc);
        }
        acc
    }

    /// For each sample, the band index occupied by each strand
    /// (`orders[t][s]` is strand s's index at sample t; strands are labeled by
    /// their index at sample 0).
    pub fn strand_orders(&self) -> Vec<Vec<usize>> {
        let n = self.bands();
        let mut orders = Vec::with_capacity(self.len());
        let mut cur: Vec<usize> = (0..n).collect();
        orders.push(cur.clone());
        for a in &self.assignments {
            cur = cur.iter().map(|&i| a.apply(i)).collect();
            orders.push(cur.clone());
        }
        orders
    }

    /// `values[t][s]` is the eigenvalue of strand s at sample t.
    pub fn strand_values(&self) -> Vec<Vec<Complex64>> {
        self.strand_orders()
            .iter()
            .zip(&self.frames)
            .map(|(order, frame)| order.iter().map(|&i| frame.values[i]).collect())
            .collect()
    }

    /// Frames with columns reordered to strand order.
    pub fn strand_frames(&self) -> Vec<EigenFrame> {
        self.strand_orders()
            .iter()
            .zip(&self.frames)
            .map(|(order, frame)| frame.permuted(order))
            .collect()
    }
}

struct Tracker<'a> {
    model: &'a BlochModel,
    gap_ratio: f64,
    params: Vec<f64>,
    frames: Vec<EigenFrame>,
    assignments: Vec<Permutation>,
    refined: Vec<bool>,
}

impl Tracker<'_> {
    fn frame_at(
        &self,
        point_of: &dyn Fn(f64) -> Momentum,
        t: f64,
    ) -> Result<EigenFrame, SpectraError> {
        let h = self.model.eval(&point_of(t))?;
        let frame = match decompose(&h, DEFAULT_DECOMPOSE_TOL) {
            Ok(f) => f,
            Err(SpectraError::Defective { cond }) => {
                return Err(SpectraError::DegenerateOnPath {
                    t,
                    gap: 1.0 / cond.max(1.0),
                })
            }
            Err(e) => return Err(e),
        };
        let scale = frame
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(1.0);
        let gap = min_pairwise_gap(&frame.values);
        if gap < DEGENERACY_GAP_FLOOR * scale {
            return Err(SpectraError::DegenerateOnPath {
                t,
                gap: gap / scale,
            });
        }
        Ok(frame)
    }

    fn advance(
        &mut self,
        point_of: &dyn Fn(f64) -> Momentum,
        t1: f64,
        f1: EigenFrame,
        depth: usize,
    ) -> Result<(), SpectraError> {
        let f0 = self.frames.last().expect("tracker seeded");
        if let Some(assignment) = continue_strands(&f0.values, &f1.values, self.gap_ratio) {
            self.params.push(t1);
            self.frames.push(f1);
            self.assignments.push(assignment);
            self.refined.push(depth > 0);
            return Ok(());
        }
        if depth >= MAX_BISECTION {
            // persistent ambiguity at vanishing gap is a degeneracy squeezed
            // between samples, not a resolution problem
            let scale = f1
                .values
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max)
                .max(1.0);
            let gap = min_pairwise_gap(&f0.values).min(min_pairwise_gap(&f1.values));
            if gap < 1e-5 * scale {
                return Err(SpectraError::DegenerateOnPath {
                    t: t1,
                    gap: gap / scale,
                });
            }
            return Err(SpectraError::RefinementExhausted {
                t: t1,
                levels: depth,
            });
        }
        let t0 = *self.params.last().unwrap();
        let tm = 0.5 * (t0 + t1);
        let fm = self.frame_at(point_of, tm)?;
        self.advance(point_of, tm, fm, depth + 1)?;
        self.advance(point_of, t1, f1, depth + 1)
    }
}

fn min_pairwise_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Minimum-total-distance matching from `from` to `to`, accepted only when
/// every strand moves less than `gap_ratio` times its local gap.
pub(crate) fn continue_strands(
    from: &[Complex64],
    to: &[Complex64],
    gap_ratio: f64,
) -> Option<Permutation> {
    let n = from.len();
    let assign = if n <= 8 {
        optimal_assignment(from, to)
    } else {
        greedy_assignment(from, to)?
    };
    for i in 0..n {
        let moved = (to[assign[i]] - from[i]).norm();
        let gap = (0..n)
            .filter(|&j| j != i)
            .map(|j| (from[j] - from[i]).norm())
            .fold(f64::INFINITY, f64::min);
        if moved >= gap_ratio * gap {
            return None;
        }
    }
    Some(Permutation::from_zero_based_unchecked(assign))
}

fn optimal_assignment(from: &[Complex64], to: &[Complex64]) -> Vec<usize> {
    let n = from.len();
    let cost: Vec<Vec<f64>> = from
        .iter()
        .map(|v| to.iter().map(|w| (v - w).norm()).collect())
        .collect();
    let mut best = f64::INFINITY;
    let mut best_assign: Vec<usize> = (0..n).collect();
    let mut used = vec![false; n];
    let mut cur = vec![0usize; n];
    fn rec(
        row: usize,
        acc: f64,
        cost: &[Vec<f64>],
        used: &mut [bool],
        cur: &mut [usize],
        best: &mut f64,
        best_assign: &mut [usize],
    ) {
        let n = cost.len();
        if acc >= *best {
            return;
        }
        if row == n {
            *best = acc;
            best_assign.copy_from_slice(cur);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur[row] = j;
                rec(
                    row + 1,
                    acc + cost[row][j],
                    cost,
                    used,
                    cur,
                    best,
                    best_assign,
                );
                used[j] = false;
            }
        }
    }
    rec(
        0,
        0.0,
        &cost,
        &mut used,
        &mut cur,
        &mut best,
        &mut best_assign,
    );
    best_assign
}

fn greedy_assignment(from: &[Complex64], to: &[Complex64]) -> Option<Vec<usize>> {
    let n = from.len();
    let mut taken = vec![false; n];
    let mut assign = vec![usize::MAX; n];
    // most constrained first: strands with the smallest nearest-neighbor slack
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let near = |i: usize| {
            to.iter()
                .map(|w| (from[i] - w).norm())
                .fold(f64::INFINITY, f64::min)
        };
        near(a).total_cmp(&near(b))
    });
    for &i in &order {
        let mut best = f64::INFINITY;
        let mut pick = usize::MAX;
        for (j, w) in to.iter().enumerate() {
            if !taken[j] {
                let d = (from[i] - w).norm();
                if d < best {
                    best = d;
                    pick = j;
                }
            }
        }
        if pick == usize::MAX {
            return None;
        }
        taken[pick] = true;
        assign[i] = pick;
    }
    Some(assign)
}

/// Tracks eigenvalue strands along an explicit polyline of momenta. Strands
/// are matched by minimum-total-distance assignment between consecutive
/// samples; ambiguous steps are bisected (evaluating the model at geometric
/// midpoints) up to 20 levels.
pub fn track(
    model: &BlochModel,
    path: &[Momentum],
    gap_ratio: f64,
) -> Result<BandPath, SpectraError> {
    if path.len() < 2 {
        return Err(SpectraError::InvalidPath("path needs at least two points"));
    }
    let segments = path.len() - 1;
    let point_of = move |t: f64| -> Momentum {
        let scaled = (t.clamp(0.0, 1.0)) * segments as f64;
        let seg = (scaled.floor() as usize).min(segments - 1);
        let frac = scaled - seg as f64;
        let a = path[seg].components();
        let b = path[seg + 1].components();
        let coords: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect();
        Momentum::new(&coords)
    };
    let ts: Vec<f64> = (0..path.len())
        .map(|i| i as f64 / segments as f64)
        .collect();
    track_param(model, &point_of, &ts, gap_ratio)
}

/// Tracks strands over explicit parameter values of a path function. The
/// parameterization is used for bisection refinement between samples.
pub fn track_param(
    model: &BlochModel,
    point_of: &dyn Fn(f64) -> Momentum,
    ts: &[f64],
    gap_ratio: f64,
) -> Result<BandPath, SpectraError> {
    if ts.len() < 2 {
        return Err(SpectraError::InvalidPath(
            "need at least two parameter values",
        ));
    }
    let mut tracker = Tracker {
        model,
        gap_ratio,
        params: Vec::with_capacity(ts.len()),
        frames: Vec::with_capacity(ts.len()),
        assignments: Vec::with_capacity(ts.len().saturating_sub(1)),
        refined: Vec::with_capacity(ts.len()),
    };
    let first = tracker.frame_at(point_of, ts[0])?;
    tracker.params.push(ts[0]);
    tracker.frames.push(first);
    tracker.refined.push(false);
    for &t in &ts[1..] {
        let f = tracker.frame_at(point_of, t)?;
        tracker.advance(point_of, t, f, 0)?;
    }
    Ok(BandPath {
        params: tracker.params,
        frames: tracker.frames,
        assignments: tracker.assignments,
        refined: tracker.refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{eval_kp, eval_lattice, GridAxis, GridModel, LatticeVariant};
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sigma_z_frame() {
        let h = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let f = decompose(&h, DEFAULT_DECOMPOSE_TOL).unwrap();
        assert_eq!(f.values, vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        // columns are coordinate vectors up to phase
        assert!((f.right[[1, 0]].norm() - 1.0).abs() < 1e-14);
        assert!(f.right[[0, 0]].norm() < 1e-14);
        assert!((f.right[[0, 1]].norm() - 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        let overlap = f.overlap_from(&f);
        assert!((overlap[[0, 0]] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(overlap[[0, 1]].norm() < 1e-14);
    }

    #[test]
    fn jordan_block_is_defective() {
        // −½σ₊ is nilpotent and not diagonalizable
        let h = eval_kp(&Momentum::k3(0.0, 0.0, 0.0), FRAC_PI_2, true);
        match decompose(&h, DEFAULT_DECOMPOSE_TOL) {
            Err(SpectraError::Defective { .. }) => {}
            other => panic!("expected Defective, got {other:?}"),
        }
    }

    #[test]
    fn near_exceptional_matrix_is_defective() {
        // eigenvalues ±√t coalesce as t → 0
        let h = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1e-18, 0.0), c(0.0, 0.0)]];
        assert!(matches!(
            decompose(&h, DEFAULT_DECOMPOSE_TOL),
            Err(SpectraError::Defective { .. })
        ));
        // but a comfortably gapped analogue is fine
        let h = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.1, 0.0), c(0.0, 0.0)]];
        assert!(decompose(&h, DEFAULT_DECOMPOSE_TOL).is_ok());
    }

    #[test]
    fn scalar_matrix_is_not_defective() {
        let h = array![[c(2.0, 1.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 1.0)]];
        let f = decompose(&h, DEFAULT_DECOMPOSE_TOL).unwrap();
        assert_eq!(f.values, vec![c(2.0, 1.0), c(2.0, 1.0)]);
    }

    #[test]
    fn reconstruction_two_band() {
        let h = eval_lattice(&Momentum::k3(1.0, 2.2, 0.7), 1.3, LatticeVariant::Main);
        let f = decompose(&h, DEFAULT_DECOMPOSE_TOL).unwrap();
        // R·diag(λ)·L† must reproduce H
        let mut lam = Array2::from_elem((2, 2), c(0.0, 0.0));
        lam[[0, 0]] = f.values[0];
        lam[[1, 1]] = f.values[1];
        let rebuilt = f.right.dot(&lam).dot(&adjoint(&f.left));
        let err = rebuilt
            .iter()
            .zip(h.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn discriminant_hand_values() {
        let sz = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        assert!((discriminant(&sz) - c(4.0, 0.0)).norm() < 1e-15);
        // the k·p model is exceptional at the origin for every α
        for alpha in [0.0, 0.7, FRAC_PI_2, 2.8] {
            let h = eval_kp(&Momentum::k3(0.0, 0.0, 0.0), alpha, true);
            assert!(discriminant(&h).norm() < 1e-14, "alpha = {alpha}");
        }
    }

    #[test]
    fn discriminant_matches_general_path_on_two_band() {
        let h = eval_lattice(&Momentum::k3(0.9, 0.3, 2.0), 0.25, LatticeVariant::Supp);
        let quick = discriminant(&h);
        let vals = eigenvalues(&h).unwrap();
        let slow = (vals[0] - vals[1]) * (vals[0] - vals[1]);
        assert!((quick - slow).norm() < 1e-12 * quick.norm().max(1.0));
    }

    fn constant_grid_model() -> BlochModel {
        let h = array![[c(1.0, 0.2), c(0.3, 0.0)], [c(0.0, 0.0), c(-1.0, -0.2)]];
        let axes = vec![GridAxis {
            nodes: 6,
            start: 0.0,
            step: TAU / 6.0,
            periodic: true,
        }];
        BlochModel::Grid(GridModel::new(2, axes, vec![h; 6]).unwrap())
    }

    #[test]
    fn constant_path_has_identity_assignments() {
        let model = constant_grid_model();
        let path: Vec<Momentum> = (0..=6)
            .map(|i| Momentum::k1(TAU * (i % 6) as f64 / 6.0))
            .collect();
        let bp = track(&model, &path, DEFAULT_GAP_RATIO).unwrap();
        assert!(bp.assignments.iter().all(|a| a.is_identity()));
        assert!(bp.composite().is_identity());
        assert!(bp.refined.iter().all(|&r| !r));
    }

    #[test]
    fn lattice_kz_loop_swaps_bands() {
        let model = BlochModel::LatticeMain { m: 2.0 };
        let n = 401;
        let path: Vec<Momentum> = (0..=n)
            .map(|i| Momentum::k3(FRAC_PI_2, FRAC_PI_2, TAU * i as f64 / n as f64))
            .collect();
        let bp = track(&model, &path, DEFAULT_GAP_RATIO).unwrap();
        let comp = bp.composite();
        assert_eq!(
            comp.one_based_images(),
            vec![2, 1],
            "k_z loop must swap the two bands"
        );
    }

    #[test]
    fn track_resolution_stability() {
        let model = BlochModel::LatticeMain { m: 2.0 };
        let mut composites = Vec::new();
        for n in [401usize, 4001] {
            let path: Vec<Momentum> = (0..=n)
                .map(|i| Momentum::k3(FRAC_PI_2, FRAC_PI_2, TAU * i as f64 / n as f64))
                .collect();
            composites.push(track(&model, &path, DEFAULT_GAP_RATIO).unwrap().composite());
        }
        assert_eq!(composites[0], composites[1]);
    }

    #[test]
    fn degenerate_path_is_rejected() {
        let model = BlochModel::LatticeMain { m: 2.0 };
        // passes straight through the node at the origin
        let path = vec![
            Momentum::k3(-0.2, 0.0, 0.0),
            Momentum::k3(0.0, 0.0, 0.0),
            Momentum::k3(0.2, 0.0, 0.0),
        ];
        assert!(matches!(
            track(&model, &path, DEFAULT_GAP_RATIO),
            Err(SpectraError::DegenerateOnPath { .. })
        ));
    }
}
