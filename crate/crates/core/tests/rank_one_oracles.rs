mod oracles;

use l1ksvd::dict_update::{l1_rank_one, svd_rank_one, top_singular_pair, L1RankOneParams};
use l1ksvd::learner::{atom_sweep, SweepMode};
use l1ksvd::linalg::to_col_major;
use l1ksvd::synth::standard_normal_matrix;
use l1ksvd::{CoefficientMatrix, Dictionary, RngSeed, TrainingSet};
use ndarray::Array2;

#[test]
fn top_singular_value_matches_jacobi() {
    for seed in 0..10 {
        let (m, n) = (4 + seed as usize % 5, 3 + seed as usize % 7);
        let e = standard_normal_matrix(m, n, RngSeed(seed));
        let top = top_singular_pair(&e).unwrap();
        let sv = oracles::jacobi_singular_values(&e);
        assert!((top.sigma - sv[0]).abs() <= 1e-8 * sv[0], "seed {seed}: {} vs {}", top.sigma, sv[0]);
    }
}

#[test]
fn svd_rank_one_beats_random_candidates() {
    for seed in 0..5 {
        let e = standard_normal_matrix(8, 12, RngSeed(seed));
        let best = svd_rank_one(&e).unwrap().frobenius_error(&e);
        for c in 0..500 {
            let mut u = standard_normal_matrix(8, 1, RngSeed(10_000 + seed * 1000 + c)).column(0).to_vec();
            let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v /= nu);
            // optimal v for this u is Eᵀu
            let mut err = 0.0;
            for n in 0..12 {
                let vn: f64 = (0..8).map(|i| e[[i, n]] * u[i]).sum();
                err += (0..8).map(|i| (e[[i, n]] - u[i] * vn).powi(2)).sum::<f64>();
            }
            assert!(best <= err.sqrt() + 1e-9);
        }
    }
}

#[test]
fn l1_rank_one_exact_on_rank_one_inputs() {
    for seed in 0..20 {
        let u = standard_normal_matrix(6, 1, RngSeed(seed));
        let v = standard_normal_matrix(1, 9, RngSeed(seed + 100));
        let e = to_col_major(u.dot(&v));
        let fit = l1_rank_one(&e, &L1RankOneParams::default()).unwrap();
        assert!(fit.l1_error(&e) <= 1e-8, "seed {seed}: {}", fit.l1_error(&e));
    }
}

#[test]
fn l1_rank_one_never_worse_than_svd_start() {
    for seed in 0..100 {
        let e = standard_normal_matrix(5 + seed as usize % 4, 4 + seed as usize % 9, RngSeed(seed));
        let start = svd_rank_one(&e).unwrap().l1_error(&e);
        let fit = l1_rank_one(&e, &L1RankOneParams::default()).unwrap().l1_error(&e);
        assert!(fit <= start + 1e-9, "seed {seed}: {fit} > {start}");
    }
}

fn restricted_l1(r_cols: &Array2<f64>, omega: &[usize]) -> f64 {
    omega.iter().map(|&n| r_cols.column(n).iter().map(|v| v.abs()).sum::<f64>()).sum()
}

#[test]
fn l1_sweep_never_increases_any_atoms_restricted_error() {
    let d = Dictionary::new(&standard_normal_matrix(5, 3, RngSeed(1))).unwrap();
    let mut x = CoefficientMatrix::new(standard_normal_matrix(3, 8, RngSeed(2)));
    // sparsify so the supports differ between atoms
    for n in 0..8 {
        x.set(n % 3, n, 0.0);
    }
    let y = TrainingSet::new(standard_normal_matrix(5, 8, RngSeed(3))).unwrap();
    let params = L1RankOneParams::default();

    // apply the sweep's output one atom at a time, recomputing that atom's
    // restricted error before and after
    let (d_new, x_new) = atom_sweep(&d, &x, &y, SweepMode::L1, &params).unwrap();
    let mut d_cur = d.clone();
    let mut x_cur = x.clone();
    for j in 0..3 {
        let omega = x_cur.support(j).indices().to_vec();
        let before = restricted_l1(&y.residual(&d_cur, &x_cur).unwrap(), &omega);
        d_cur.set_atom(j, d_new.atom(j)).unwrap();
        for &n in &omega {
            x_cur.set(j, n, x_new.get(j, n));
        }
        let after = restricted_l1(&y.residual(&d_cur, &x_cur).unwrap(), &omega);
        assert!(after <= before + 1e-9, "atom {j}: {after} > {before}");
    }
    assert_eq!(x_cur, x_new);
}
