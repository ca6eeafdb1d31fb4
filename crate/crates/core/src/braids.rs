//! Eigenvalue braids along closed momentum loops and their action on the
//! band-charge lattice.
//!
//! Along a gapped closed loop the N complex eigenvalues move in the plane
//! without colliding, tracing an N-strand braid; this is the 1D invariant of
//! the family. The braid word is read off from transversal crossings of the
//! real-part projection:
//!
//! * strands are ranked by Re λ; a crossing of the strands at adjacent ranks
//!   (i, i+1) emits the Artin generator with index i,
//! * the sign is that of Im(λ_{(i+1)} − λ_{(i)}) at the crossing, with (i)
//!   the strand at rank i just before crossing. This orientation makes the
//!   word's exponent sum equal, for two bands, to the half-twist winding
//!   (1/π)·Δarg(λ₁ − λ₂), and it inverts under loop reversal.
//!
//! A generic projection is almost surely transversal; tangential or coincident
//! crossings are handled by re-sampling the loop at doubled resolution a few
//! times before giving up with [`BraidError::ProjectionDegenerate`].

use crate::algebra::{reduced_perm_matrix, IntMatrix, Permutation};
use crate::models::{BlochModel, LoopSpec};
use crate::spectra::{self, SpectraError, DEFAULT_GAP_RATIO};
use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

const MAX_RESAMPLINGS: usize = 6;
const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BraidError {
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(
        "projection stays degenerate after {resamplings} resamplings (final resolution \
         {resolution}): {reason}"
    )]
    ProjectionDegenerate {
        resamplings: usize,
        resolution: usize,
        reason: String,
    },
    #[error("braid generator index {index} out of range for {strands} strands")]
    BadGenerator { index: i64, strands: usize },
}

/// A word in signed Artin generators; entry ±i stands for σ_i^{±1},
/// 1 ≤ i ≤ strands−1. The empty word is the identity braid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BraidWord {
    strands: usize,
    generators: Vec<i64>,
}

impl BraidWord {
    pub fn new(strands: usize, generators: Vec<i64>) -> Result<Self, BraidError> {
        assert!(strands >= 1);
        for &g in &generators {
            let idx = g.unsigned_abs() as usize;
            if g == 0 || idx >= strands {
                return Err(BraidError::BadGenerator { index: g, strands });
            }
        }
        Ok(BraidWord {
            strands,
            generators,
        })
    }

    pub fn identity(strands: usize) -> Self {
        BraidWord {
            strands,
            generators: Vec::new(),
        }
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn generators(&self) -> &[i64] {
        &self.generators
    }

    pub fn exponent_sum(&self) -> i64 {
        self.generators.iter().map(|g| g.signum()).sum()
    }

    /// Serialized form: a JSON array of signed generator indices.
    pub fn to_json(&self) -> serde_json::Value {
        json!(self.generators)
    }
}

/// Projects a braid word to its permutation: the product of the adjacent
/// transpositions (i, i+1) over the word, signs ignored, composed as
/// functions with the rightmost letter acting first (so σ₁σ₂ in B₃ maps
/// 1 ↦ 2 ↦ 3 ↦ 1).
pub fn braid_to_perm(word: &BraidWord) -> Permutation {
    let mut acc = Permutation::identity(word.strands);
    for &g in &word.generators {
        let i = g.unsigned_abs() as usize - 1;
        let tau = Permutation::adjacent_transposition(word.strands, i);
        acc = acc.compose(&tau);
    }
    acc
}

/// Matrix of the word's induced permutation acting on the band-charge lattice
/// Z^{N−1} in the difference basis {e_i − e_{i+1}}. For two strands this is
/// the 1×1 matrix ((−1)^{exponent parity}); concatenating words multiplies
/// the matrices.
pub fn action_on_chern(word: &BraidWord) -> IntMatrix {
    reduced_perm_matrix(&braid_to_perm(word))
}

/// The π₁ data of a loop: braid word, induced permutation, and for two bands
/// the integer half-twist winding of λ₁ − λ₂.
#[derive(Debug, Clone)]
pub struct BraidInvariant {
    pub word: BraidWord,
    pub permutation: Permutation,
    /// Half-twist count (1/π)·Δ unwrapped arg(λ₁ − λ₂); two bands only.
    pub half_twists: Option<i64>,
    pub exponent_sum: i64,
}

impl BraidInvariant {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "word": self.word.generators,
            "strands": self.word.strands,
            "permutation": self.permutation.one_based_images(),
            "half_twists": self.half_twists,
            "exponent_sum": self.exponent_sum,
        })
    }
}

enum Attempt {
    Done(BraidInvariant),
    Retry(String),
}

/// Extracts the braid invariant of the eigenvalues along a closed loop,
/// sampled at `resolution` points (resampled at up to 2⁶× on projection
/// degeneracies).
pub fn braid_along_loop(
    model: &BlochModel,
    loop_spec: &LoopSpec,
    resolution: usize,
) -> Result<BraidInvariant, BraidError> {
    assert!(
        resolution >= 8,
        "braid extraction needs a reasonable resolution"
    );
    let mut reason = String::new();
    for round in 0..=MAX_RESAMPLINGS {
        let res = resolution << round;
        // resampled rounds also shift the basepoint: plain doubling keeps
        // every old sample, so a crossing that sits exactly on one would stay
        // tangential forever (the invariants do not depend on the basepoint)
        let offset = if round == 0 { 0.0 } else { 0.37 };
        match attempt(model, loop_spec, res, offset)? {
            Attempt::Done(inv) => return Ok(inv),
            Attempt::Retry(r) => reason = r,
        }
    }
    Err(BraidError::ProjectionDegenerate {
        resamplings: MAX_RESAMPLINGS,
        resolution: resolution << MAX_RESAMPLINGS,
        reason,
    })
}

fn attempt(
    model: &BlochModel,
    loop_spec: &LoopSpec,
    resolution: usize,
    offset: f64,
) -> Result<Attempt, BraidError> {
    // closed parameterization over [t₀, t₀ + 1]: the final parameter maps to
    // the same momentum as the first, so the final frame closes the loop
    let t0 = offset / resolution as f64;
    let mut ts: Vec<f64> = (0..resolution)
        .map(|i| (i as f64 + offset) / resolution as f64)
        .collect();
    ts.push(t0 + 1.0);
    let point_of = |t: f64| loop_spec.point_at(t);
    let bp = spectra::track_param(model, &point_of, &ts, DEFAULT_GAP_RATIO)?;
    let values = bp.strand_values();
    let n = bp.bands();
    let steps = values.len();
    let scale = values
        .iter()
        .flat_map(|row| row.iter().map(|v| v.norm()))
        .fold(0.0, f64::max)
        .max(1.0);

    // Re-rank strands at every sample; ties are projection degeneracies.
    let mut ranks: Vec<Vec<usize>> = Vec::with_capacity(steps); // rank -> strand
    for row in &values {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| row[a].re.total_cmp(&row[b].re));
        for w in order.windows(2) {
            if (row[w[1]].re - row[w[0]].re).abs() < PROJECTION_TOL * scale {
                return Ok(Attempt::Retry(format!(
                    "strands {} and {} share Re λ within tolerance at a sample",
                    w[0], w[1]
                )));
            }
        }
        ranks.push(order);
    }

    let mut generators: Vec<i64> = Vec::new();
    for t in 0..steps - 1 {
        let before = &ranks[t];
        let after = &ranks[t + 1];
        if before == after {
            continue;
        }
        // position map: rank i at time t goes to rank move_to[i] at t+1
        let mut rank_after = vec![0usize; n];
        for (r, &s) in after.iter().enumerate() {
            rank_after[s] = r;
        }
        let move_to: Vec<usize> = before.iter().map(|&s| rank_after[s]).collect();
        // must be a product of disjoint adjacent swaps, else under-resolved
        let mut swapped_at: Vec<usize> = Vec::new();
        let mut ok = true;
        for i in 0..n {
            match move_to[i] {
                j if j == i => {}
                j if j == i + 1 => {
                    if move_to[i + 1] != i {
                        ok = false;
                        break;
                    }
                    swapped_at.push(i);
                }
                j if j + 1 == i => {} // handled when visiting i−1
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return Ok(Attempt::Retry("multiple rank changes in one step".into()));
        }
        for &i in &swapped_at {
            let a = before[i];
            let b = before[i + 1];
            let g0 = (values[t][b] - values[t][a]).re;
            let g1 = (values[t + 1][b] - values[t + 1][a]).re;
            let denom = g0 - g1;
            if denom.abs() < PROJECTION_TOL * scale {
                return Ok(Attempt::Retry("tangential crossing".into()));
            }
            let tau = (g0 / denom).clamp(0.0, 1.0);
            let im0 = (values[t][b] - values[t][a]).im;
            let im1 = (values[t + 1][b] - values[t + 1][a]).im;
            let im_cross = im0 + tau * (im1 - im0);
            if im_cross.abs() < PROJECTION_TOL * scale {
                return Ok(Attempt::Retry(
                    "Re and Im both vanish at a crossing within tolerance".into(),
                ));
            }
            let sign = if im_cross > 0.0 { 1 } else { -1 };
            generators.push(sign * (i as i64 + 1));
        }
    }

    let word = BraidWord::new(n, generators)?;
    let permutation = braid_to_perm(&word);
    // the word must project onto the tracked strand permutation
    if permutation != bp.composite().inverse() {
        return Ok(Attempt::Retry(
            "braid word and tracked permutation disagree".into(),
        ));
    }

    let half_twists = if n == 2 {
        match half_twist_count(&values) {
            Ok(ht) => {
                if ht != word.exponent_sum() {
                    return Ok(Attempt::Retry(format!(
                        "half twists {ht} disagree with exponent sum {}",
                        word.exponent_sum()
                    )));
                }
                Some(ht)
            }
            Err(reason) => return Ok(Attempt::Retry(reason)),
        }
    } else {
        None
    };

    let exponent_sum = word.exponent_sum();
    Ok(Attempt::Done(BraidInvariant {
        word,
        permutation,
        half_twists,
        exponent_sum,
    }))
}

/// Winding of λ₁ − λ₂ in units of π, by phase unwrapping with a |Δarg| < π/2
/// per-step guard.
fn half_twist_count(values: &[Vec<Complex64>]) -> Result<i64, String> {
    let mut total = 0.0f64;
    let mut prev = values[0][0] - values[0][1];
    for row in &values[1..] {
        let cur = row[0] - row[1];
        let step = (cur / prev).arg();
        if !step.is_finite() || step.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err("phase step exceeds π/2".into());
        }
        total += step;
        prev = cur;
    }
    let turns = total / std::f64::consts::PI;
    let rounded = turns.round();
    if (turns - rounded).abs() > 1e-3 {
        return Err(format!(
            "half-twist winding {turns} too far from an integer"
        ));
    }
    Ok(rounded as i64)
}
