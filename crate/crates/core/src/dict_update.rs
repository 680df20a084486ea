//! Rank-1 factorizations used to refit one atom together with its
//! coefficient row: the leading singular pair (K-SVD) and the reweighted
//! ℓ1 rank-1 fit (ℓ1-K-SVD).

use ndarray::Array2;

use crate::linalg::{self, col};
use crate::sparse_coding::Epsilon;
use crate::{Error, Result};

/// `u vᵀ` with `‖u‖₂ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFactor {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Set when the input carried no usable rank-1 direction (for example
    /// `E = 0`); `u` is then a unit coordinate vector.
    pub degenerate: bool,
}

impl RankOneFactor {
    /// `‖E − u vᵀ‖₁`
    pub fn l1_error(&self, e: &Array2<f64>) -> f64 {
        l1_misfit(e, &self.u, &self.v)
    }

    /// `‖E − u vᵀ‖_F`
    pub fn frobenius_error(&self, e: &Array2<f64>) -> f64 {
        let mut s = 0.0;
        for (n, vn) in self.v.iter().enumerate() {
            s += e.column(n).iter().zip(&self.u).map(|(a, b)| (a - vn * b).powi(2)).sum::<f64>();
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1RankOneParams {
    /// Reweighting passes.
    pub passes: usize,
    pub epsilon: Epsilon,
}

impl Default for L1RankOneParams {
    fn default() -> Self {
        L1RankOneParams { passes: 10, epsilon: Epsilon::default() }
    }
}

/// Leading singular triple `(a, σ, b)` of an `m × M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriple {
    pub left: Vec<f64>,
    pub sigma: f64,
    pub right: Vec<f64>,
    pub degenerate: bool,
}

const POWER_ITERS: usize = 200;
const POWER_TOL: f64 = 1e-12;

fn check_matrix(e: &Array2<f64>) -> Result<Array2<f64>> {
    if e.ncols() == 0 || e.nrows() == 0 {
        return Err(Error::DimensionMismatch("rank-1 fit needs a nonempty matrix".into()));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error matrix"));
    }
    Ok(linalg::to_col_major(e.clone()))
}

/// Leading singular triple by power iteration on `E Eᵀ`.
///
/// Starts from the largest-norm column of `E` blended with a fixed
/// pseudo-random combination of all columns, so the start is never exactly
/// orthogonal to the leading left singular vector in practice.
pub fn top_singular_pair(e: &Array2<f64>) -> Result<SingularTriple> {
    let e = check_matrix(e)?;
    Ok(power_iteration(&e))
}

fn power_iteration(e: &Array2<f64>) -> SingularTriple {
    let (m, cols) = e.dim();
    let norms: Vec<f64> = (0..cols).map(|n| linalg::norm2(col(e, n))).collect();
    let (big, big_norm) = norms.iter().enumerate().fold((0, 0.0), |acc, (n, &v)| if v > acc.1 { (n, v) } else { acc });
    if big_norm == 0.0 {
        let mut left = vec![0.0; m];
        left[0] = 1.0;
        let mut right = vec![0.0; cols];
        right[0] = 1.0;
        return SingularTriple { left, sigma: 0.0, right, degenerate: true };
    }

    let mut a: Vec<f64> = col(e, big).iter().map(|v| v / big_norm).collect();
    let mut mix = vec![0.0; m];
    let mut state = 0x853c_49e6_748f_ea9bu64;
    for n in 0..cols {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let w = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        linalg::axpy(w, col(e, n), &mut mix);
    }
    let mix_norm = linalg::norm2(&mix);
    if mix_norm > 0.0 {
        linalg::axpy(1e-3 / mix_norm, &mix, &mut a);
    }
    let a_norm = linalg::norm2(&a);
    a.iter_mut().for_each(|v| *v /= a_norm);

    let mut b = vec![0.0; cols];
    let mut next = vec![0.0; m];
    for _ in 0..POWER_ITERS {
        for n in 0..cols {
            b[n] = linalg::dot(col(e, n), &a);
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..cols {
            linalg::axpy(b[n], col(e, n), &mut next);
        }
        let norm = linalg::norm2(&next);
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= norm);
        let change = next.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut a, &mut next);
        if change < POWER_TOL {
            break;
        }
    }
    for n in 0..cols {
        b[n] = linalg::dot(col(e, n), &a);
    }
    let sigma = linalg::norm2(&b);
    if sigma > 0.0 {
        b.iter_mut().for_each(|v| *v /= sigma);
    }
    SingularTriple { left: a, sigma, right: b, degenerate: sigma == 0.0 }
}

/// Flip `(u, v)` so the first nonzero entry of `u` is nonnegative.
fn canonicalize(u: &mut [f64], v: &mut [f64]) {
    if let Some(first) = u.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn l1_misfit(e: &Array2<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (n, vn) in v.iter().enumerate() {
        s += e.column(n).iter().zip(u).map(|(a, b)| (a - vn * b).abs()).sum::<f64>();
    }
    s
}

/// Best rank-1 fit in Frobenius norm: `u = a`, `v = σ b`.
pub fn svd_rank_one(e: &Array2<f64>) -> Result<RankOneFactor> {
    let t = top_singular_pair(e)?;
    let mut u = t.left;
    let mut v: Vec<f64> = t.right.iter().map(|b| t.sigma * b).collect();
    canonicalize(&mut u, &mut v);
    Ok(RankOneFactor { u, v, degenerate: t.degenerate })
}

/// Rank-1 fit minimizing `‖E − u vᵀ‖₁` with `‖u‖₂ = 1`, by reweighted least
/// squares started from the leading singular pair.
///
/// Each pass refreshes the per-entry weights `w_n(j) = 1/(|e_n − v_n u|_j + ε)`,
/// then solves for `u` with `v` fixed (the system `Σ v_n² W_n` is diagonal)
/// and for every `v_n` with `u` fixed, using the refreshed weights. The pass
/// with the lowest ℓ1 misfit, the starting point included, is returned.
pub fn l1_rank_one(e: &Array2<f64>, params: &L1RankOneParams) -> Result<RankOneFactor> {
    if params.passes == 0 {
        return Err(Error::InvalidParameter("rank-1 passes must be ≥ 1".into()));
    }
    let e = check_matrix(e)?;
    let (m, cols) = e.dim();
    let eps = params.epsilon.resolve(e.iter().copied());
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }

    let t = power_iteration(&e);
    let mut u = t.left.clone();
    let mut v: Vec<f64> = t.right.iter().map(|b| t.sigma * b).collect();
    if t.degenerate || v.iter().all(|x| *x == 0.0) {
        canonicalize(&mut u, &mut v);
        return Ok(RankOneFactor { u, v, degenerate: true });
    }

    let mut best_err = l1_misfit(&e, &u, &v);
    let mut best = (u.clone(), v.clone());
    let mut degenerate = false;
    let mut weights = vec![0.0; m * cols];
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];

    for _ in 0..params.passes {
        for n in 0..cols {
            let en = col(&e, n);
            let w = &mut weights[n * m..(n + 1) * m];
            for j in 0..m {
                w[j] = 1.0 / ((en[j] - v[n] * u[j]).abs() + eps);
            }
        }

        num.iter_mut().for_each(|x| *x = 0.0);
        den.iter_mut().for_each(|x| *x = 0.0);
        for n in 0..cols {
            let (en, w, vn) = (col(&e, n), &weights[n * m..(n + 1) * m], v[n]);
            for j in 0..m {
                num[j] += vn * w[j] * en[j];
                den[j] += vn * vn * w[j];
            }
        }
        let den_max = den.iter().cloned().fold(0.0, f64::max);
        if den_max == 0.0 {
            degenerate = true;
            break;
        }
        let floor = 1e-12 * den_max;
        for j in 0..m {
            u[j] = num[j] / (den[j] + floor);
        }

        let mut any = false;
        for n in 0..cols {
            let (en, w) = (col(&e, n), &weights[n * m..(n + 1) * m]);
            let (mut p, mut q) = (0.0, 0.0);
            for j in 0..m {
                p += u[j] * w[j] * en[j];
                q += u[j] * u[j] * w[j];
            }
            v[n] = if q > 0.0 { p / q } else { 0.0 };
            any |= v[n] != 0.0;
        }
        if !any || u.iter().all(|x| *x == 0.0) {
            degenerate = true;
            break;
        }

        let err = l1_misfit(&e, &u, &v);
        if err < best_err {
            best_err = err;
            best = (u.clone(), v.clone());
        }
    }

    let (mut u, mut v) = best;
    let scale = linalg::norm2(&u);
    u.iter_mut().for_each(|x| *x /= scale);
    v.iter_mut().for_each(|x| *x *= scale);
    canonicalize(&mut u, &mut v);
    Ok(RankOneFactor { u, v, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::RngSeed;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = RngSeed(seed).rng();
        Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
    }

    fn outer(u: &[f64], v: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j])
    }

    fn unit(seed: u64, n: usize) -> Vec<f64> {
        let g = gaussian(n, 1, seed);
        let norm = linalg::norm2(g.as_slice().unwrap());
        g.iter().map(|x| x / norm).collect()
    }

    #[test]
    fn diagonal_singular_pair() {
        let t = top_singular_pair(&array![[3.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((t.sigma - 3.0).abs() < 1e-12);
        assert!((t.left[0].abs() - 1.0).abs() < 1e-12 && t.left[1].abs() < 1e-12);
        assert!((t.right[0].abs() - 1.0).abs() < 1e-12 && t.right[1].abs() < 1e-12);
    }

    #[test]
    fn start_orthogonal_to_leading_direction() {
        // largest column (2, 0) is orthogonal to the leading left vector e₂
        let e = array![[2.0, 0.0, 0.0], [0.0, 1.9, 1.9]];
        let t = top_singular_pair(&e).unwrap();
        assert!((t.sigma - 1.9 * 2f64.sqrt()).abs() < 1e-9, "{}", t.sigma);
    }

    #[test]
    fn exact_rank_one_singular_pair() {
        let u0 = unit(1, 6);
        let v0: Vec<f64> = unit(2, 9).iter().map(|x| 5.0 * x).collect();
        let e = outer(&u0, &v0);
        let t = top_singular_pair(&e).unwrap();
        assert!((t.sigma - 5.0).abs() < 1e-9);
        let f = svd_rank_one(&e).unwrap();
        assert!(f.frobenius_error(&e) <= 1e-9);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let e = Array2::<f64>::zeros((3, 4));
        let t = top_singular_pair(&e).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.sigma, 0.0);
        assert_eq!(t.left, vec![1.0, 0.0, 0.0]);
        assert_eq!(t.right, vec![1.0, 0.0, 0.0, 0.0]);

        let f = l1_rank_one(&e, &L1RankOneParams::default()).unwrap();
        assert!(f.degenerate);
        assert!(f.v.iter().all(|x| *x == 0.0));
        assert!((linalg::norm2(&f.u) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn svd_rank_one_of_diagonal() {
        let f = svd_rank_one(&array![[3.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((f.u[0] - 1.0).abs() < 1e-12 && f.u[1].abs() < 1e-12);
        assert!((f.v[0] - 3.0).abs() < 1e-12 && f.v[1].abs() < 1e-12);
    }

    #[test]
    fn l1_fit_recovers_exact_rank_one() {
        let u0 = unit(3, 10);
        let v0: Vec<f64> = gaussian(30, 1, 4).iter().cloned().collect();
        let e = outer(&u0, &v0);
        let f = l1_rank_one(&e, &L1RankOneParams::default()).unwrap();
        assert!(f.l1_error(&e) <= 1e-8, "{}", f.l1_error(&e));
        let sign = if linalg::dot(&f.u, &u0) < 0.0 { -1.0 } else { 1.0 };
        for (a, b) in f.u.iter().zip(&u0) {
            assert!((a - sign * b).abs() < 1e-6);
        }
    }

    #[test]
    fn l1_fit_resists_a_spike() {
        let u0 = unit(5, 10);
        let v0: Vec<f64> = gaussian(30, 1, 6).iter().cloned().collect();
        let mut e = outer(&u0, &v0);
        e[[4, 17]] += 10.0;
        let svd = svd_rank_one(&e).unwrap();
        let l1 = l1_rank_one(&e, &L1RankOneParams::default()).unwrap();
        assert!(l1.l1_error(&e) < svd.l1_error(&e), "{} vs {}", l1.l1_error(&e), svd.l1_error(&e));
    }

    #[test]
    fn sign_is_canonical() {
        let e = gaussian(7, 11, 9);
        for f in [svd_rank_one(&e).unwrap(), l1_rank_one(&e, &L1RankOneParams::default()).unwrap()] {
            let first = f.u.iter().find(|x| **x != 0.0).unwrap();
            assert!(*first >= 0.0);
            assert!((linalg::norm2(&f.u) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let e = array![[1.0, f64::INFINITY]];
        assert!(top_singular_pair(&e).is_err());
        assert!(l1_rank_one(&e, &L1RankOneParams::default()).is_err());
        let bad = L1RankOneParams { passes: 0, ..Default::default() };
        assert!(l1_rank_one(&array![[1.0]], &bad).is_err());
    }
}
