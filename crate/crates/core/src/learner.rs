//! Alternating minimization for ℓ1-K-SVD and K-SVD.
//!
//! Every outer iteration sparse-codes all examples with the configured
//! coder, optionally prunes the codes (ℓ1-K-SVD only), then sweeps the atoms
//! in index order, refitting each atom and its coefficient row on the
//! examples that currently use it.

use ndarray::Array2;
use rayon::prelude::*;

use crate::dict_update::{l1_rank_one, svd_rank_one, L1RankOneParams, RankOneFactor};
use crate::linalg::{self, col, col_mut};
use crate::metrics;
use crate::sparse_coding::{irls_sparse_code, irls_sparse_code_constrained, omp, prune, IrlsParams, OmpStop, PruneRule};
use crate::types::{check_dims, CoefficientMatrix, Dictionary, TrainingSet};
use crate::{Error, Result, RngSeed};

#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Shared(f64),
    PerExample(Vec<f64>),
}

impl Lambda {
    fn get(&self, n: usize) -> f64 {
        match self {
            Lambda::Shared(l) => *l,
            Lambda::PerExample(v) => v[n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coder {
    /// `min ‖y − Dx‖₁ + λ‖x‖₁` by IRLS.
    IrlsPenalized(Lambda),
    /// `min ‖y − Dx‖₁ s.t. ‖x‖₁ ≤ τ_n` by λ bisection.
    IrlsConstrained(Vec<f64>),
    OmpSparsity(usize),
    OmpResidual(f64),
}

impl Coder {
    fn is_irls(&self) -> bool {
        matches!(self, Coder::IrlsPenalized(_) | Coder::IrlsConstrained(_))
    }

    fn validate(&self, n_examples: usize) -> Result<()> {
        let per_example = |what: &str, v: &[f64]| {
            if v.len() != n_examples {
                return Err(Error::DimensionMismatch(format!("{} {what} values for {n_examples} examples", v.len())));
            }
            if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("every {what} must be positive")));
            }
            Ok(())
        };
        match self {
            Coder::IrlsPenalized(Lambda::Shared(l)) if *l > 0.0 && l.is_finite() => Ok(()),
            Coder::IrlsPenalized(Lambda::Shared(l)) => Err(Error::InvalidParameter(format!("lambda must be positive, got {l}"))),
            Coder::IrlsPenalized(Lambda::PerExample(v)) => per_example("lambda", v),
            Coder::IrlsConstrained(t) => per_example("tau", t),
            Coder::OmpSparsity(0) => Err(Error::InvalidParameter("sparsity must be ≥ 1".into())),
            Coder::OmpSparsity(_) => Ok(()),
            Coder::OmpResidual(r) if *r >= 0.0 && r.is_finite() => Ok(()),
            Coder::OmpResidual(r) => Err(Error::InvalidParameter(format!("residual bound {r}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    L1Ksvd,
    Ksvd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::L1Ksvd => "l1ksvd",
            Algorithm::Ksvd => "ksvd",
        }
    }

    fn sweep_mode(self) -> SweepMode {
        match self {
            Algorithm::L1Ksvd => SweepMode::L1,
            Algorithm::Ksvd => SweepMode::L2,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "l1ksvd" => Ok(Algorithm::L1Ksvd),
            "ksvd" => Ok(Algorithm::Ksvd),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Rank-1 fit used for each atom in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub n_atoms: usize,
    pub outer_iters: usize,
    pub coder: Coder,
    pub prune_rule: Option<PruneRule>,
    pub irls: IrlsParams,
    pub rank1: L1RankOneParams,
    pub seed: RngSeed,
}

impl LearnConfig {
    fn validate(&self, y: &TrainingSet, algorithm: Algorithm) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::InvalidParameter("outer_iters must be ≥ 1".into()));
        }
        if self.n_atoms == 0 {
            return Err(Error::InvalidParameter("n_atoms must be ≥ 1".into()));
        }
        self.coder.validate(y.len())?;
        match (algorithm, self.coder.is_irls()) {
            (Algorithm::L1Ksvd, false) => return Err(Error::InvalidParameter("l1-K-SVD codes with an IRLS coder".into())),
            (Algorithm::Ksvd, true) => return Err(Error::InvalidParameter("K-SVD codes with an OMP coder".into())),
            _ => {}
        }
        if let Some(rule) = &self.prune_rule {
            rule.validate()?;
        }
        self.irls.validate()
    }
}

/// One completed outer iteration. Errors are per entry of `Y − DX`:
/// `l1_err` is the mean absolute value and `l2_err` the root mean square.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub l1_err: f64,
    pub l2_err: f64,
    /// `l2_err` right after coding (and pruning), before the atom sweep.
    pub l2_err_coded: f64,
    pub adr: Option<f64>,
    pub kappa: Option<f64>,
    /// Constrained codes whose λ bisection did not bracket.
    pub unbracketed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnTrace {
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub dictionary: Dictionary,
    pub codes: CoefficientMatrix,
    pub trace: LearnTrace,
}

/// `K` distinct nonzero training columns, drawn uniformly without
/// replacement and normalized.
pub fn init_from_data(y: &TrainingSet, k: usize, seed: RngSeed) -> Result<Dictionary> {
    let nonzero: Vec<usize> = (0..y.len()).filter(|&n| y.example(n).iter().any(|v| *v != 0.0)).collect();
    if nonzero.len() < k || k == 0 {
        return Err(Error::NotEnoughColumns { needed: k.max(1), found: nonzero.len() });
    }
    let picks = rand::seq::index::sample(&mut seed.rng(), nonzero.len(), k);
    let mut atoms = linalg::zeros_col_major(y.dim(), k);
    for (j, p) in picks.iter().enumerate() {
        col_mut(&mut atoms, j).copy_from_slice(y.example(nonzero[p]));
    }
    Dictionary::new(&atoms)
}

/// Code every example against `dict`. Returns the codes and the number of
/// constrained solves whose bisection failed to bracket.
pub fn sparse_code_all(y: &TrainingSet, dict: &Dictionary, coder: &Coder, irls: &IrlsParams) -> Result<(CoefficientMatrix, usize)> {
    if y.dim() != dict.dim() {
        return Err(Error::DimensionMismatch(format!("examples have {} entries, atoms have {}", y.dim(), dict.dim())));
    }
    coder.validate(y.len())?;
    let columns: Vec<(Vec<f64>, bool)> = (0..y.len())
        .into_par_iter()
        .map(|n| {
            let yn = y.example(n);
            Ok(match coder {
                Coder::IrlsPenalized(l) => (irls_sparse_code(yn, dict, l.get(n), irls, None)?, false),
                Coder::IrlsConstrained(t) => {
                    let c = irls_sparse_code_constrained(yn, dict, t[n], irls)?;
                    (c.x, c.unbracketed)
                }
                Coder::OmpSparsity(s) => (omp(yn, dict, OmpStop::Sparsity(*s))?, false),
                Coder::OmpResidual(r) => (omp(yn, dict, OmpStop::ResidualNorm(*r))?, false),
            })
        })
        .collect::<Result<_>>()?;
    let mut codes = CoefficientMatrix::zeros(dict.n_atoms(), y.len());
    let mut unbracketed = 0;
    for (n, (x, flag)) in columns.into_iter().enumerate() {
        codes.column_mut(n).copy_from_slice(&x);
        unbracketed += usize::from(flag);
    }
    Ok((codes, unbracketed))
}

/// Refit atoms `0..K` in order, each jointly with its coefficient row on the
/// row's current support. Unused atoms are replaced by the normalized
/// training example with the largest residual.
pub fn atom_sweep(
    dict: &Dictionary,
    codes: &CoefficientMatrix,
    y: &TrainingSet,
    mode: SweepMode,
    rank1: &L1RankOneParams,
) -> Result<(Dictionary, CoefficientMatrix)> {
    check_dims(y, dict, codes)?;
    let mut d = dict.clone();
    let mut x = codes.clone();
    let mut r = y.residual(&d, &x)?;
    let m = y.dim();
    let mut taken = vec![false; y.len()];

    for j in 0..d.n_atoms() {
        let omega = x.support(j);
        if omega.is_empty() {
            replace_unused_atom(&mut d, j, y, &r, &mut taken)?;
            continue;
        }
        let mut e = linalg::zeros_col_major(m, omega.len());
        for (c, &n) in omega.indices().iter().enumerate() {
            let xn = x.get(j, n);
            let ec = col_mut(&mut e, c);
            ec.copy_from_slice(col(&r, n));
            linalg::axpy(xn, d.atom(j), ec);
        }
        let fit = match mode {
            SweepMode::L1 => {
                // keep the current pair when the reweighted fit lands worse
                let fit = l1_rank_one(&e, rank1)?;
                let current = RankOneFactor {
                    u: d.atom(j).to_vec(),
                    v: omega.indices().iter().map(|&n| x.get(j, n)).collect(),
                    degenerate: false,
                };
                if current.l1_error(&e) < fit.l1_error(&e) {
                    current
                } else {
                    fit
                }
            }
            SweepMode::L2 => svd_rank_one(&e)?,
        };
        let dead = fit.v.iter().all(|v| *v == 0.0);
        if !dead {
            d.set_atom(j, &fit.u)?;
        }
        for (c, &n) in omega.indices().iter().enumerate() {
            let vn = if dead { 0.0 } else { fit.v[c] };
            x.set(j, n, vn);
            let rn = col_mut(&mut r, n);
            rn.copy_from_slice(col(&e, c));
            linalg::axpy(-vn, d.atom(j), rn);
        }
    }
    Ok((d, x))
}

fn replace_unused_atom(d: &mut Dictionary, j: usize, y: &TrainingSet, r: &Array2<f64>, taken: &mut [bool]) -> Result<()> {
    let mut best: Option<(usize, f64)> = None;
    for n in 0..y.len() {
        if taken[n] || y.example(n).iter().all(|v| *v == 0.0) {
            continue;
        }
        let norm = linalg::norm2(col(r, n));
        if best.map_or(true, |(_, b)| norm > b) {
            best = Some((n, norm));
        }
    }
    // every usable example already seeded an atom this sweep: keep the old atom
    if let Some((n, _)) = best {
        taken[n] = true;
        d.set_atom(j, y.example(n))?;
    }
    Ok(())
}

fn error_summary(r: &Array2<f64>) -> (f64, f64) {
    let count = r.len() as f64;
    (linalg::entrywise_l1(r) / count, linalg::frobenius(r) / count.sqrt())
}

/// Learn a dictionary starting from `K` random training examples.
pub fn learn(y: &TrainingSet, cfg: &LearnConfig, algorithm: Algorithm, ground_truth: Option<&Dictionary>) -> Result<LearnOutput> {
    cfg.validate(y, algorithm)?;
    let init = init_from_data(y, cfg.n_atoms, cfg.seed)?;
    learn_from(y, init, cfg, algorithm, ground_truth)
}

/// Learn a dictionary from an explicit starting dictionary.
pub fn learn_from(
    y: &TrainingSet,
    init: Dictionary,
    cfg: &LearnConfig,
    algorithm: Algorithm,
    ground_truth: Option<&Dictionary>,
) -> Result<LearnOutput> {
    cfg.validate(y, algorithm)?;
    if init.n_atoms() != cfg.n_atoms || init.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial dictionary is {}x{}, expected {}x{}",
            init.dim(),
            init.n_atoms(),
            y.dim(),
            cfg.n_atoms
        )));
    }
    let mut d = init;
    let mut x = CoefficientMatrix::zeros(cfg.n_atoms, y.len());
    let mut trace = LearnTrace::default();
    for iteration in 1..=cfg.outer_iters {
        let (mut coded, unbracketed) = sparse_code_all(y, &d, &cfg.coder, &cfg.irls)?;
        if let (Algorithm::L1Ksvd, Some(rule)) = (algorithm, &cfg.prune_rule) {
            coded = prune(&coded, rule)?;
        }
        if coded.nnz() == 0 {
            return Err(Error::AllSupportsEmpty(iteration));
        }
        let (_, l2_err_coded) = error_summary(&y.residual(&d, &coded)?);
        let (nd, nx) = atom_sweep(&d, &coded, y, algorithm.sweep_mode(), &cfg.rank1)?;
        d = nd;
        x = nx;
        let (l1_err, l2_err) = error_summary(&y.residual(&d, &x)?);
        let (adr, kappa) = match ground_truth {
            Some(gt) => {
                let rep = metrics::recovery_report(gt, &d)?;
                (Some(rep.adr), Some(rep.kappa))
            }
            None => (None, None),
        };
        trace.records.push(IterationRecord { iteration, l1_err, l2_err, l2_err_coded, adr, kappa, unbracketed });
    }
    Ok(LearnOutput { dictionary: d, codes: x, trace })
}
