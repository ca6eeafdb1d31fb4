//! Shared test oracles, deliberately independent of the library's own
//! computational paths: polynomial roots by Durand–Kerner instead of an
//! eigensolver, discriminants through the Sylvester resultant, Smith divisors
//! through gcds of minors, abelian quotients through coset enumeration, and
//! strand continuation through naive dense following.
#![allow(dead_code)] // each test binary uses its own subset of the oracles

use ndarray::Array2;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::prelude::*;

pub type CMat = Array2<Complex64>;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_complex_matrix(r: &mut StdRng, n: usize, scale: f64) -> CMat {
    Array2::from_shape_fn((n, n), |_| {
        Complex64::new(
            scale * (r.random::<f64>() * 2.0 - 1.0),
            scale * (r.random::<f64>() * 2.0 - 1.0),
        )
    })
}

/// Monic characteristic polynomial coefficients by the Faddeev–LeVerrier
/// recursion: returns [1, c_{n−1}, …, c₀] with p(λ) = Σ coeffs[i]·λ^{n−i}.
pub fn char_poly(a: &CMat) -> Vec<Complex64> {
    let n = a.nrows();
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    let mut b: CMat = Array2::eye(n);
    for k in 1..=n {
        let ab = a.dot(&b);
        let trace: Complex64 = (0..n).map(|i| ab[[i, i]]).sum();
        let c = -trace / k as f64;
        coeffs.push(c);
        b = ab;
        for i in 0..n {
            b[[i, i]] += c;
        }
    }
    coeffs
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    assert!(n >= 1);
    assert!(
        (coeffs[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12,
        "polynomial must be monic"
    );
    let eval = |z: Complex64| -> Complex64 {
        coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut shift = 0.0f64;
        for k in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    denom *= roots[k] - roots[j];
                }
            }
            let delta = eval(roots[k]) / denom;
            roots[k] -= delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-14 {
            break;
        }
    }
    roots
}

/// Complex determinant by Gaussian elimination with partial pivoting.
pub fn complex_det(m: &CMat) -> Complex64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[[i, k]].norm().total_cmp(&a[[j, k]].norm()))
            .unwrap();
        if a[[pivot, k]].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != k {
            for j in 0..n {
                let tmp = a[[k, j]];
                a[[k, j]] = a[[pivot, j]];
                a[[pivot, j]] = tmp;
            }
            det = -det;
        }
        det *= a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] / a[[k, k]];
            for j in k..n {
                let sub = f * a[[k, j]];
                a[[i, j]] -= sub;
            }
        }
    }
    det
}

/// Discriminant of a monic polynomial via the Sylvester resultant of (p, p′):
/// Disc = (−1)^{n(n−1)/2} · Res(p, p′).
pub fn poly_discriminant_resultant(coeffs: &[Complex64]) -> Complex64 {
    let n = coeffs.len() - 1;
    let deriv: Vec<Complex64> = (0..n).map(|i| coeffs[i] * (n - i) as f64).collect(); // degree n−1, leading n·1
    let size = 2 * n - 1;
    let mut s = Array2::from_elem((size, size), Complex64::new(0.0, 0.0));
    // n−1 shifted copies of p (degree n), n shifted copies of p' (degree n−1)
    for row in 0..n - 1 {
        for (i, &c) in coeffs.iter().enumerate() {
            s[[row, row + i]] = c;
        }
    }
    for row in 0..n {
        for (i, &c) in deriv.iter().enumerate() {
            s[[n - 1 + row, row + i]] = c;
        }
    }
    let res = complex_det(&s);
    let sign = if (n * (n - 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    sign * res
}

fn bigint_mat(m: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    m.iter()
        .map(|row| row.iter().map(|&v| BigInt::from(v)).collect())
        .collect()
}

/// Exact determinant of a square BigInt matrix (Bareiss).
fn bigint_det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                a[i][j] = num / &prev;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Smith divisors from first principles: d₁⋯d_k equals the gcd of all k×k
/// minors, so d_k = g_k / g_{k−1} up to the rank.
pub fn divisors_from_minors(m: &[Vec<i64>]) -> Vec<BigInt> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let big = bigint_mat(m);
    let mut gcds = vec![BigInt::one()]; // g₀ = 1
    for k in 1..=rows.min(cols) {
        let mut g = BigInt::zero();
        for rsel in subsets(rows, k) {
            for csel in subsets(cols, k) {
                let sub: Vec<Vec<BigInt>> = rsel
                    .iter()
                    .map(|&i| csel.iter().map(|&j| big[i][j].clone()).collect())
                    .collect();
                let d = bigint_det(&sub).abs();
                g = num_integer_gcd(&g, &d);
            }
        }
        if g.is_zero() {
            break;
        }
        gcds.push(g);
    }
    (1..gcds.len()).map(|k| &gcds[k] / &gcds[k - 1]).collect()
}

fn num_integer_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let mut x = a.abs();
    let mut y = b.abs();
    while !y.is_zero() {
        let r = &x % &y;
        x = y;
        y = r;
    }
    x
}

/// Column-echelon basis of the integer lattice spanned by `gens` (columns),
/// by Euclidean column reduction. Returns echelon columns with strictly
/// increasing pivot rows.
fn lattice_echelon(k: usize, gens: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    let mut cols: Vec<Vec<BigInt>> = gens
        .iter()
        .map(|g| g.iter().map(|&v| BigInt::from(v)).collect())
        .filter(|c: &Vec<BigInt>| c.iter().any(|x| !x.is_zero()))
        .collect();
    let mut basis: Vec<Vec<BigInt>> = Vec::new();
    for row in 0..k {
        loop {
            let mut live: Vec<usize> = (0..cols.len())
                .filter(|&c| !cols[c][row].is_zero())
                .collect();
            if live.is_empty() {
                break;
            }
            if live.len() == 1 {
                break;
            }
            // combine the two smallest entries Euclid-style
            live.sort_by(|&a, &b| cols[a][row].abs().cmp(&cols[b][row].abs()));
            let (small, big) = (live[0], live[1]);
            let q = &cols[big][row] / &cols[small][row];
            let scaled: Vec<BigInt> = cols[small].iter().map(|x| &q * x).collect();
            for (dst, sub) in cols[big].iter_mut().zip(scaled) {
                *dst -= sub;
            }
        }
        if let Some(c) = (0..cols.len()).find(|&c| !cols[c][row].is_zero()) {
            let col = cols.remove(c);
            basis.push(col);
        }
        cols.retain(|c| c.iter().any(|x| !x.is_zero()));
    }
    basis
}

fn pivot_row(col: &[BigInt]) -> usize {
    col.iter().position(|x| !x.is_zero()).unwrap()
}

/// Is `v` in the integer lattice spanned by the echelon basis?
fn in_lattice(basis: &[Vec<BigInt>], v: &[BigInt]) -> bool {
    let mut w: Vec<BigInt> = v.to_vec();
    for col in basis {
        let p = pivot_row(col);
        if w[p].is_zero() {
            continue;
        }
        let q = &w[p] / &col[p];
        if (&w[p] - &q * &col[p]).is_zero() {
            for r in 0..w.len() {
                let sub = &q * &col[r];
                w[r] -= sub;
            }
        } else {
            return false;
        }
    }
    w.iter().all(|x| x.is_zero())
}

/// Is `v` in the rational span of the echelon basis?
fn in_rational_span(basis: &[Vec<BigInt>], v: &[BigInt]) -> bool {
    let mut w: Vec<BigRational> = v
        .iter()
        .map(|x| BigRational::from_integer(x.clone()))
        .collect();
    for col in basis {
        let p = pivot_row(col);
        if w[p].is_zero() {
            continue;
        }
        let q = &w[p] / BigRational::from_integer(col[p].clone());
        for r in 0..w.len() {
            let sub = &q * BigRational::from_integer(col[r].clone());
            w[r] -= sub;
        }
    }
    w.iter().all(|x| x.is_zero())
}

/// Brute-force description of Z^k / ⟨gens⟩: the free rank and, for the
/// torsion subgroup, the multiset of element orders (which pins a finite
/// abelian group up to isomorphism). Enumerates torsion coset representatives
/// in a box and checks that growing the box does not change the answer.
pub struct QuotientDescription {
    pub free_rank: usize,
    /// (order, how many torsion elements of that order), ascending.
    pub order_counts: Vec<(u64, usize)>,
}

pub fn quotient_brute_force(k: usize, gens: &[Vec<i64>]) -> QuotientDescription {
    let basis = lattice_echelon(k, gens);
    let rank = basis.len();
    let free_rank = k - rank;
    let small = enumerate_torsion(k, &basis, 4);
    let bigger = enumerate_torsion(k, &basis, 6);
    assert_eq!(
        small, bigger,
        "torsion enumeration not box-stable; enlarge the search box"
    );
    QuotientDescription {
        free_rank,
        order_counts: small,
    }
}

fn enumerate_torsion(k: usize, basis: &[Vec<BigInt>], radius: i64) -> Vec<(u64, usize)> {
    // all integer vectors in the box that lie in the rational span, reduced
    // greedily mod the lattice, then deduplicated into cosets
    let mut reps: Vec<Vec<BigInt>> = Vec::new();
    let mut coords = vec![-radius; k];
    'outer: loop {
        let v: Vec<BigInt> = coords.iter().map(|&c| BigInt::from(c)).collect();
        if in_rational_span(basis, &v) {
            let mut is_new = true;
            for rep in &reps {
                let diff: Vec<BigInt> = v.iter().zip(rep).map(|(a, b)| a - b).collect();
                if in_lattice(basis, &diff) {
                    is_new = false;
                    break;
                }
            }
            if is_new {
                reps.push(v);
            }
        }
        // odometer
        for coord in coords.iter_mut() {
            *coord += 1;
            if *coord <= radius {
                continue 'outer;
            }
            *coord = -radius;
        }
        break;
    }
    // element orders: smallest m ≥ 1 with m·v in the lattice
    let group_order = reps.len() as u64;
    let mut counts: std::collections::BTreeMap<u64, usize> = Default::default();
    for rep in &reps {
        let mut order = 0u64;
        for m in 1..=group_order {
            let scaled: Vec<BigInt> = rep.iter().map(|x| x * BigInt::from(m)).collect();
            if in_lattice(basis, &scaled) {
                order = m;
                break;
            }
        }
        assert!(order > 0, "coset order exceeds the group order bound");
        *counts.entry(order).or_default() += 1;
    }
    counts.into_iter().collect()
}

/// Predicted element-order counts for ⊕ᵢ Z_{dᵢ}: the number of elements with
/// m·x = 0 is ∏ gcd(m, dᵢ).
pub fn order_counts_for(divisors: &[u64]) -> Vec<(u64, usize)> {
    let annihilated = |m: u64| -> u64 { divisors.iter().map(|&d| gcd_u64(m, d)).product() };
    let order: u64 = divisors.iter().product();
    let mut counts: std::collections::BTreeMap<u64, usize> = Default::default();
    for m in 1..=order {
        if !order.is_multiple_of(m) {
            continue;
        }
        // elements of exact order m: inclusion-exclusion over divisors of m
        let exact = divisors_of(m)
            .into_iter()
            .map(|d| {
                let mu = moebius(m / d);
                mu * annihilated(d) as i64
            })
            .sum::<i64>();
        if exact > 0 {
            *counts.entry(m).or_default() += exact as usize;
        }
    }
    counts.into_iter().collect()
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}

fn divisors_of(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

fn moebius(mut n: u64) -> i64 {
    let mut mu = 1i64;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

/// Naive dense strand follower: nearest-value matching step by step, with an
/// assertion that every match is unambiguous by a factor of three. Returns
/// the index permutation from the first to the last sample.
pub fn dense_follow(values: &[Vec<Complex64>]) -> Vec<usize> {
    let n = values[0].len();
    let mut where_now: Vec<usize> = (0..n).collect();
    for step in values.windows(2) {
        let (cur, next) = (&step[0], &step[1]);
        let mut taken = vec![false; n];
        let mut assignment = vec![usize::MAX; n];
        for i in 0..n {
            let mut best = f64::INFINITY;
            let mut second = f64::INFINITY;
            let mut pick = usize::MAX;
            for (j, w) in next.iter().enumerate() {
                let d = (cur[i] - w).norm();
                if d < best {
                    second = best;
                    best = d;
                    pick = j;
                } else if d < second {
                    second = d;
                }
            }
            assert!(
                best * 3.0 < second || second == f64::INFINITY,
                "dense follower ambiguous: {best} vs {second}"
            );
            assert!(!taken[pick], "dense follower collision");
            taken[pick] = true;
            assignment[i] = pick;
        }
        where_now = where_now.iter().map(|&s| assignment[s]).collect();
    }
    where_now
}
