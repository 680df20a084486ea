//! Slow, independent reference computations for the integration tests.
//! Nothing here calls into the library's numerical code.
#![allow(dead_code)]

use ndarray::Array2;

/// `‖y − Dx‖₁ + λ‖x‖₁`
pub fn l1_l1_objective(d: &Array2<f64>, y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let mut data = 0.0;
    for i in 0..d.nrows() {
        let mut r = y[i];
        for j in 0..d.ncols() {
            r -= d[[i, j]] * x[j];
        }
        data += r.abs();
    }
    data + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimum of the convex piecewise-linear `t ↦ Σ_i |a_i − b_i t| + c|t|`
/// over `[lo, hi]`, found by evaluating every breakpoint and both ends.
fn min_piecewise_linear(a: &[f64], b: &[f64], c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let f = |t: f64| a.iter().zip(b).map(|(ai, bi)| (ai - bi * t).abs()).sum::<f64>() + c * t.abs();
    let mut cands = vec![lo, hi, 0.0_f64.clamp(lo, hi)];
    for (ai, bi) in a.iter().zip(b) {
        if *bi != 0.0 {
            cands.push((ai / bi).clamp(lo, hi));
        }
    }
    cands.into_iter().map(|t| (f(t), t)).fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

/// Grid search for 2×3 problems: `x1, x2` on a grid of `step` over
/// `[−bound, bound]`, `x3` minimized exactly for each grid point. With
/// `l1_ball = Some(τ)` the search is restricted to `‖x‖₁ ≤ τ` and the
/// penalty is dropped.
pub fn grid_search_2x3(d: &Array2<f64>, y: &[f64], lambda: f64, bound: f64, step: f64, l1_ball: Option<f64>) -> (f64, [f64; 3]) {
    assert_eq!(d.dim(), (2, 3));
    let steps = (2.0 * bound / step).round() as i64;
    let mut best = (f64::INFINITY, [0.0; 3]);
    let b = [d[[0, 2]], d[[1, 2]]];
    for i in 0..=steps {
        let x1 = -bound + i as f64 * step;
        for k in 0..=steps {
            let x2 = -bound + k as f64 * step;
            let a = [y[0] - d[[0, 0]] * x1 - d[[0, 1]] * x2, y[1] - d[[1, 0]] * x1 - d[[1, 1]] * x2];
            let (val, x3) = match l1_ball {
                None => {
                    let (v, t) = min_piecewise_linear(&a, &b, lambda, -bound, bound);
                    (v + lambda * (x1.abs() + x2.abs()), t)
                }
                Some(tau) => {
                    let room = tau - x1.abs() - x2.abs();
                    if room < 0.0 {
                        continue;
                    }
                    min_piecewise_linear(&a, &b, 0.0, -room, room)
                }
            };
            if val < best.0 {
                best = (val, [x1, x2, x3]);
            }
        }
    }
    best
}

/// Least-squares residual norm of `y` on the columns `cols` of `d`, via
/// modified Gram–Schmidt.
pub fn subset_residual(d: &Array2<f64>, y: &[f64], cols: &[usize]) -> f64 {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &c in cols {
        let mut v: Vec<f64> = d.column(c).to_vec();
        for q in &basis {
            let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= p * qi);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n < 1e-12 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= n);
        basis.push(v);
    }
    let mut r = y.to_vec();
    for q in &basis {
        let p: f64 = q.iter().zip(&r).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= p * qi);
    }
    r.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Best `s`-subset by exhaustive search; returns the residual and the subset.
pub fn best_subset(d: &Array2<f64>, y: &[f64], s: usize) -> (f64, Vec<usize>) {
    fn rec(d: &Array2<f64>, y: &[f64], s: usize, start: usize, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if cur.len() == s {
            let r = subset_residual(d, y, cur);
            if r < best.0 {
                *best = (r, cur.clone());
            }
            return;
        }
        for c in start..d.ncols() {
            cur.push(c);
            rec(d, y, s, c + 1, cur, best);
            cur.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(d, y, s, 0, &mut Vec::new(), &mut best);
    best
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn jacobi_singular_values(a: &Array2<f64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[[i, j]]).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// `κ = (1/K) Σ_i min_j (1 − |d_iᵀ d̂_j|)` by direct double loop.
pub fn kappa_naive(truth: &Array2<f64>, est: &Array2<f64>) -> f64 {
    let k = truth.ncols();
    let mut total = 0.0;
    for i in 0..k {
        let mut best = f64::INFINITY;
        for j in 0..est.ncols() {
            let ip: f64 = (0..truth.nrows()).map(|r| truth[[r, i]] * est[[r, j]]).sum();
            best = best.min(1.0 - ip.abs());
        }
        total += best;
    }
    total / k as f64
}

/// SSIM by explicit 11×11 windows with an independently built Gaussian
/// weight table.
pub fn ssim_naive(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    const W: usize = 11;
    let sigma = 1.5;
    let mut w = [[0.0; W]; W];
    let mut total = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let c1 = (0.01 * 255.0_f64).powi(2);
    let c2 = (0.03 * 255.0_f64).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for r0 in 0..=height - W {
        for c0 in 0..=width - W {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..W {
                for j in 0..W {
                    let g = w[i][j] / total;
                    let (x, y) = (a[(r0 + i) * width + c0 + j], b[(r0 + i) * width + c0 + j]);
                    ma += g * x;
                    mb += g * y;
                    saa += g * x * x;
                    sbb += g * y * y;
                    sab += g * x * y;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}
