//! Exact integer algebra for the N-band classification group.
//!
//! For an N-band family over the torus, the 2D invariant lattice Z^{N−1}
//! (per-band charges summing to zero, written in the difference basis
//! {e_i − e_{i+1}}) is quotiented by the relations generated by the columns
//! of 1 − σ₁ and 1 − σ₂, where (σ₁, σ₂) are the band permutations induced
//! along the two torus directions. The quotient is computed exactly with
//! arbitrary-precision integers via Smith normal form.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::json;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("permutation images must be a bijection on 1..={size}, got {images:?}")]
    NotABijection { size: usize, images: Vec<usize> },
    #[error("permutation sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("cannot parse cycle notation {input:?}: {reason}")]
    BadCycles { input: String, reason: String },
}

/// A permutation of {1, …, N}, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(size: usize) -> Self {
        Permutation {
            images: (0..size).collect(),
        }
    }

    /// Adjacent transposition (i, i+1), 0-based `i`.
    pub fn adjacent_transposition(size: usize, i: usize) -> Self {
        assert!(i + 1 < size);
        let mut images: Vec<usize> = (0..size).collect();
        images.swap(i, i + 1);
        Permutation { images }
    }

    pub fn from_one_based(images: &[usize]) -> Result<Self, AlgebraError> {
        let size = images.len();
        let mut seen = vec![false; size];
        for &im in images {
            if im == 0 || im > size || seen[im - 1] {
                return Err(AlgebraError::NotABijection {
                    size,
                    images: images.to_vec(),
                });
            }
            seen[im - 1] = true;
        }
        Ok(Permutation {
            images: images.iter().map(|&im| im - 1).collect(),
        })
    }

    pub(crate) fn from_zero_based_unchecked(images: Vec<usize>) -> Self {
        debug_assert!({
            let mut s = images.clone();
            s.sort_unstable();
            s.iter().copied().eq(0..images.len())
        });
        Permutation { images }
    }

    /// Parses cycle notation such as `"(1 2)(3 4 5)"`. The empty string is
    /// the identity; elements not mentioned are fixed.
    pub fn from_cycles(size: usize, input: &str) -> Result<Self, AlgebraError> {
        let bad = |reason: &str| AlgebraError::BadCycles {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let mut images: Vec<usize> = (0..size).collect();
        let mut used = vec![false; size];
        let trimmed = input.trim();
        if trimmed.is_empty() {
            return Ok(Permutation { images });
        }
        let mut rest = trimmed;
        while !rest.is_empty() {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            let Some(stripped) = rest.strip_prefix('(') else {
                return Err(bad("expected '('"));
            };
            let Some(close) = stripped.find(')') else {
                return Err(bad("unbalanced parenthesis"));
            };
            let body = &stripped[..close];
            rest = &stripped[close + 1..];
            let mut cycle = Vec::new();
            for tok in body.split_whitespace() {
                let v: usize = tok.parse().map_err(|_| bad("non-integer element"))?;
                if v == 0 || v > size {
                    return Err(bad(&format!("element {v} outside 1..={size}")));
                }
                if used[v - 1] {
                    return Err(bad(&format!("element {v} appears twice")));
                }
                used[v - 1] = true;
                cycle.push(v - 1);
            }
            if cycle.len() < 2 {
                continue; // 1-cycles are fixed points
            }
            for w in 0..cycle.len() {
                images[cycle[w]] = cycle[(w + 1) % cycle.len()];
            }
        }
        Ok(Permutation { images })
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    /// 0-based application i ↦ σ(i).
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn one_based_images(&self) -> Vec<usize> {
        self.images.iter().map(|&im| im + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &im)| i == im)
    }

    /// Composition: `(a.compose(&b)).apply(i) == a.apply(b.apply(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.size(), other.size());
        Permutation {
            images: other.images.iter().map(|&im| self.images[im]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.size()];
        for (i, &im) in self.images.iter().enumerate() {
            images[im] = i;
        }
        Permutation { images }
    }

    /// +1 for even permutations, −1 for odd.
    pub fn parity(&self) -> i64 {
        let mut seen = vec![false; self.size()];
        let mut sign = 1i64;
        for start in 0..self.size() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.images[cur];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // cycle notation, fixed points omitted
        let mut seen = vec![false; self.size()];
        let mut wrote = false;
        for start in 0..self.size() {
            if seen[start] || self.images[start] == start {
                seen[start] = true;
                continue;
            }
            write!(f, "(")?;
            let mut cur = start;
            let mut first = true;
            while !seen[cur] {
                seen[cur] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}", cur + 1)?;
                first = false;
                cur = self.images[cur];
            }
            write!(f, ")")?;
            wrote = true;
        }
        if !wrote {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// Small dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn sub_from_identity(&self) -> IntMatrix {
        assert_eq!(self.rows, self.cols);
        let mut out = IntMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let id = if i == j { 1 } else { 0 };
                out.set(i, j, id - self.get(i, j));
            }
        }
        out
    }
}

/// Matrix of the permutation action e_i ↦ e_{σ(i)} restricted to the sum-zero
/// sublattice of Z^N, written in the basis f_i = e_i − e_{i+1} (i = 1..N−1).
/// Column j holds the image of f_j.
pub fn reduced_perm_matrix(sigma: &Permutation) -> IntMatrix {
    let n = sigma.size();
    assert!(n >= 2, "need at least two bands");
    let mut m = IntMatrix::zeros(n - 1, n - 1);
    for j in 0..n - 1 {
        // f_j maps to e_{σ(j)} − e_{σ(j+1)} = ±(f_a + … + f_{b−1})
        let a = sigma.apply(j);
        let b = sigma.apply(j + 1);
        if a < b {
            for row in a..b {
                m.set(row, j, m.get(row, j) + 1);
            }
        } else {
            for row in b..a {
                m.set(row, j, m.get(row, j) - 1);
            }
        }
    }
    m
}

/// Arbitrary-precision integer matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl BigMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BigMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_int_matrix(m: &IntMatrix) -> Self {
        let mut out = Self::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(i, j, BigInt::from(m.get(i, j)));
            }
        }
        out
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, BigInt::from(*v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &BigMatrix) -> BigMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = BigMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k).clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = &a * other.get(k, j);
                    let cur = out.get(i, j).clone();
                    out.set(i, j, cur + t);
                }
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[i] += q · row[t]
    fn add_row_multiple(&mut self, i: usize, t: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let add = q * self.get(t, j);
            let cur = self.get(i, j).clone();
            self.set(i, j, cur + add);
        }
    }

    /// col[j] += q · col[t]
    fn add_col_multiple(&mut self, j: usize, t: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let add = q * self.get(i, t);
            let cur = self.get(i, j).clone();
            self.set(i, j, cur + add);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self.get(i, j).clone();
            self.set(i, j, v);
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a.get(k, k).is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a.get(i, k).is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = a.get(k, k) * a.get(i, j) - a.get(i, k) * a.get(k, j);
                    a.set(i, j, num / &prev);
                }
                a.set(i, k, BigInt::zero());
            }
            prev = a.get(k, k).clone();
        }
        sign * a.get(n - 1, n - 1).clone()
    }
}

/// Smith normal form U·M·V = D with unimodular U, V.
#[derive(Debug, Clone)]
pub struct SnfResult {
    pub u: BigMatrix,
    pub d: BigMatrix,
    pub v: BigMatrix,
    /// Nonzero diagonal entries of D, positive, each dividing the next.
    pub divisors: Vec<BigInt>,
}

impl SnfResult {
    pub fn rank(&self) -> usize {
        self.divisors.len()
    }
}

fn rounded_div(a: &BigInt, b: &BigInt) -> BigInt {
    // quotient minimizing |a − q·b|
    let q0 = a / b;
    let r = a - &q0 * b;
    if r.abs() * 2 > b.abs() {
        if (r.is_negative()) == (b.is_negative()) {
            q0 + 1
        } else {
            q0 - 1
        }
    } else {
        q0
    }
}

/// Smith normal form over Z. Pivots on the minimum-magnitude nonzero entry of
/// the remaining submatrix to control coefficient growth.
pub fn snf(m: &BigMatrix) -> SnfResult {
    let rows = m.rows();
    let cols = m.cols();
    let mut d = m.clone();
    let mut u = BigMatrix::identity(rows);
    let mut v = BigMatrix::identity(cols);

    let rmax = rows.min(cols);
    for t in 0..rmax {
        loop {
            // minimum-magnitude nonzero pivot in the trailing submatrix
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    if d.get(i, j).is_zero() {
                        continue;
                    }
                    match pivot {
                        None => pivot = Some((i, j)),
                        Some((pi, pj)) => {
                            if d.get(i, j).abs() < d.get(pi, pj).abs() {
                                pivot = Some((i, j));
                            }
                        }
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                // trailing submatrix is zero; done with the whole matrix
                return finish(d, u, v, t);
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let p = d.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..rows {
                let q = -rounded_div(d.get(i, t), &p);
                d.add_row_multiple(i, t, &q);
                u.add_row_multiple(i, t, &q);
                if !d.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = -rounded_div(d.get(t, j), &p);
                d.add_col_multiple(j, t, &q);
                v.add_col_multiple(j, t, &q);
                if !d.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue; // remainders became new, smaller pivot candidates
            }
            // enforce divisibility of the trailing block by the pivot
            let mut fixed = true;
            'scan: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !(d.get(i, j) % &p).is_zero() {
                        let one = BigInt::one();
                        d.add_row_multiple(t, i, &one);
                        u.add_row_multiple(t, i, &one);
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if fixed {
                if d.get(t, t).is_negative() {
                    d.negate_row(t);
                    u.negate_row(t);
                }
                break;
            }
        }
    }
    finish(d, u, v, rmax)
}

fn finish(mut d: BigMatrix, mut u: BigMatrix, v: BigMatrix, filled: usize) -> SnfResult {
    for t in 0..filled {
        if d.get(t, t).is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    let divisors = (0..filled)
        .map(|t| d.get(t, t).clone())
        .take_while(|x| !x.is_zero())
        .collect();
    SnfResult { u, d, v, divisors }
}

/// Abelian group presented as torsion factors (each ≥ 2, forming a
/// divisibility chain) plus a free rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGroup {
    pub torsion: Vec<u64>,
    pub free_rank: usize,
}

impl ClassGroup {
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "torsion": self.torsion, "free_rank": self.free_rank })
    }
}

impl fmt::Display for ClassGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.torsion.iter().map(|d| format!("Z_{d}")).collect();
        parts.extend(std::iter::repeat_n("Z".to_string(), self.free_rank));
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" x "))
        }
    }
}

/// Classification group Z^{N−1} / ⟨columns of 1−σ₁, 1−σ₂⟩ for two boundary
/// permutations of equal size N ≥ 2.
pub fn classification_group(
    sigma1: &Permutation,
    sigma2: &Permutation,
) -> Result<ClassGroup, AlgebraError> {
    if sigma1.size() != sigma2.size() {
        return Err(AlgebraError::SizeMismatch(sigma1.size(), sigma2.size()));
    }
    let n = sigma1.size() - 1;
    let r1 = reduced_perm_matrix(sigma1).sub_from_identity();
    let r2 = reduced_perm_matrix(sigma2).sub_from_identity();
    let mut rel = BigMatrix::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            rel.set(i, j, BigInt::from(r1.get(i, j)));
            rel.set(i, n + j, BigInt::from(r2.get(i, j)));
        }
    }
    let s = snf(&rel);
    let torsion = s
        .divisors
        .iter()
        .filter(|x| **x > BigInt::one())
        .map(|x| u64::try_from(x).expect("torsion divisor exceeds u64"))
        .collect();
    Ok(ClassGroup {
        torsion,
        free_rank: n - s.rank(),
    })
}
