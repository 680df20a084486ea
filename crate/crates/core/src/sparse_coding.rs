//! Per-example sparse coding: penalized and constrained ℓ1–ℓ1 coding by
//! iteratively reweighted least squares, orthogonal matching pursuit, and
//! the pruning rules applied after coding.

use crate::linalg::{self, cholesky_in_place, cholesky_solve};
use crate::types::{CoefficientMatrix, Dictionary};
use crate::{Error, Result};

/// Floor `ε` added to `|residual|` before inverting it into a weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Fixed(f64),
    /// `max(factor · median|data|, floor)`
    RelativeToMedian { factor: f64, floor: f64 },
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::RelativeToMedian { factor: 1e-6, floor: 1e-10 }
    }
}

impl Epsilon {
    pub fn resolve(&self, data: impl IntoIterator<Item = f64>) -> f64 {
        match *self {
            Epsilon::Fixed(e) => e,
            Epsilon::RelativeToMedian { factor, floor } => (factor * linalg::median_abs(data)).max(floor),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Epsilon::Fixed(e) => e > 0.0 && e.is_finite(),
            Epsilon::RelativeToMedian { factor, floor } => factor >= 0.0 && floor > 0.0 && factor.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("epsilon rule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsParams {
    pub epsilon: Epsilon,
    pub max_inner_iters: usize,
    /// Stop once `‖x_new − x_old‖₂ < rel_tol · (1 + ‖x_new‖₂)`.
    pub rel_tol: f64,
}

impl Default for IrlsParams {
    fn default() -> Self {
        IrlsParams { epsilon: Epsilon::default(), max_inner_iters: 50, rel_tol: 1e-6 }
    }
}

impl IrlsParams {
    pub fn validate(&self) -> Result<()> {
        self.epsilon.validate()?;
        if self.max_inner_iters == 0 {
            return Err(Error::InvalidParameter("max_inner_iters must be ≥ 1".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be ≥ 0".into()));
        }
        Ok(())
    }
}

fn check_inputs(y: &[f64], dict: &Dictionary) -> Result<()> {
    if y.len() != dict.dim() {
        return Err(Error::DimensionMismatch(format!("signal has {} entries, atoms have {}", y.len(), dict.dim())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    Ok(())
}

/// Approximately minimize `‖y − D x‖₁ + λ‖x‖₁` by IRLS.
///
/// Each pass solves `x = (DᵀW₁D + λW₂)⁻¹ DᵀW₁ y` with
/// `W₁(j) = 1/(|(y − Dx)_j| + ε)` and `W₂(j) = 1/(|x_j| + ε)`. With `x0 = None`
/// the first pass uses identity weights; otherwise the weights come from `x0`.
///
/// The pass is evaluated through the equivalent `m × m` system
/// `x = W₂⁻¹Dᵀ(λW₁⁻¹ + D W₂⁻¹ Dᵀ)⁻¹ y`, whose matrix stays well conditioned
/// when entries of `W₂` blow up at sparse iterates.
pub fn irls_sparse_code(y: &[f64], dict: &Dictionary, lambda: f64, params: &IrlsParams, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    check_inputs(y, dict)?;
    params.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let k = dict.n_atoms();
    if let Some(x0) = x0 {
        if x0.len() != k {
            return Err(Error::DimensionMismatch(format!("initial code has {} entries, expected {k}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial code"));
        }
    }
    let eps = params.epsilon.resolve(y.iter().copied());
    let mut solver = IrlsSolver::new(dict, y, lambda, eps);
    match x0 {
        None => solver.identity_weights(),
        Some(x0) => solver.weights_from(x0),
    }
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; k],
    };
    for _ in 0..params.max_inner_iters {
        let x_new = solver.step()?;
        let delta = x_new.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let converged = delta < params.rel_tol * (1.0 + linalg::norm2(&x_new));
        x = x_new;
        if converged {
            break;
        }
        solver.weights_from(&x);
    }
    Ok(x)
}

/// Work buffers for one IRLS problem. Holds the inverse weights
/// `|r| + ε` (length m) and `|x| + ε` (length K).
struct IrlsSolver<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    lambda: f64,
    eps: f64,
    inv_w1: Vec<f64>,
    inv_w2: Vec<f64>,
    gram: Vec<f64>,
    resid: Vec<f64>,
    /// Rows of `D`, contiguous (row-major `m × K`).
    rows: Vec<f64>,
    /// Rows of `D W₂^{-1/2}`.
    scaled: Vec<f64>,
}

impl<'a> IrlsSolver<'a> {
    fn new(dict: &'a Dictionary, y: &'a [f64], lambda: f64, eps: f64) -> Self {
        let (m, k) = (dict.dim(), dict.n_atoms());
        let mut rows = vec![0.0; m * k];
        for j in 0..k {
            for (r, v) in dict.atom(j).iter().enumerate() {
                rows[r * k + j] = *v;
            }
        }
        IrlsSolver {
            dict,
            y,
            lambda,
            eps,
            inv_w1: vec![1.0; m],
            inv_w2: vec![1.0; k],
            gram: vec![0.0; m * m],
            resid: vec![0.0; m],
            scaled: rows.clone(),
            rows,
        }
    }

    fn identity_weights(&mut self) {
        self.inv_w1.iter_mut().for_each(|w| *w = 1.0);
        self.inv_w2.iter_mut().for_each(|w| *w = 1.0);
    }

    fn weights_from(&mut self, x: &[f64]) {
        self.dict.apply(x, &mut self.resid);
        for ((w, yi), ai) in self.inv_w1.iter_mut().zip(self.y).zip(&self.resid) {
            *w = (yi - ai).abs() + self.eps;
        }
        for (w, xi) in self.inv_w2.iter_mut().zip(x) {
            *w = xi.abs() + self.eps;
        }
    }

    fn step(&mut self) -> Result<Vec<f64>> {
        let (m, k) = (self.dict.dim(), self.dict.n_atoms());
        let root: Vec<f64> = self.inv_w2.iter().map(|s| s.sqrt()).collect();
        for (sr, dr) in self.scaled.chunks_exact_mut(k).zip(self.rows.chunks_exact(k)) {
            for ((o, d), w) in sr.iter_mut().zip(dr).zip(&root) {
                *o = d * w;
            }
        }
        let g = &mut self.gram;
        // lower triangle of D W₂⁻¹ Dᵀ
        for r in 0..m {
            let br = &self.scaled[r * k..(r + 1) * k];
            for c in 0..=r {
                g[r * m + c] = linalg::dot(br, &self.scaled[c * k..(c + 1) * k]);
            }
        }
        let mut trace = 0.0;
        for r in 0..m {
            g[r * m + r] += self.lambda * self.inv_w1[r];
            trace += g[r * m + r];
        }
        let ridge = 1e-12 * trace / m as f64;
        for r in 0..m {
            g[r * m + r] += ridge;
        }
        cholesky_in_place(g, m)?;
        let mut z = self.y.to_vec();
        cholesky_solve(g, m, &mut z);
        let x: Vec<f64> = self.inv_w2.iter().enumerate().map(|(j, s)| s * linalg::dot(self.dict.atom(j), &z)).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("IRLS iterate"));
        }
        Ok(x)
    }
}

/// Result of [`irls_sparse_code_constrained`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedCode {
    pub x: Vec<f64>,
    /// The λ bisection never landed in `[0.95τ, τ]`; `x` is then the best
    /// feasible candidate seen.
    pub unbracketed: bool,
}

const LAMBDA_MIN: f64 = 1e-8;
const LAMBDA_MAX: f64 = 1e4;
const MAX_HALVINGS: usize = 60;
/// Bisection stops once the bracket `[λ_lo, λ_hi]` satisfies `λ_hi/λ_lo < 1 + this`.
const BRACKET_COLLAPSE: f64 = 1e-3;

/// Approximately minimize `‖y − D x‖₁` subject to `‖x‖₁ ≤ τ` by bisecting
/// the penalty of [`irls_sparse_code`] (geometrically, over `[1e-8, 1e4]`)
/// until `‖x‖₁ ∈ [0.95τ, τ]`.
///
/// The ℓ1–ℓ1 problem is a linear program, so `‖x(λ)‖₁` is piecewise
/// constant and can jump over the target band. When the bracket collapses
/// onto such a jump, both end iterates solve the penalized problem at the
/// jump and the point between them with `‖x‖₁ = τ` is taken as a candidate.
/// The result is then the feasible candidate with the smallest misfit, and
/// `unbracketed` is set.
pub fn irls_sparse_code_constrained(y: &[f64], dict: &Dictionary, tau: f64, params: &IrlsParams) -> Result<ConstrainedCode> {
    check_inputs(y, dict)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let misfit = |x: &[f64]| {
        let mut approx = vec![0.0; y.len()];
        dict.apply(x, &mut approx);
        y.iter().zip(&approx).map(|(a, b)| (a - b).abs()).sum::<f64>()
    };

    let loose = irls_sparse_code(y, dict, LAMBDA_MIN, params, None)?;
    if linalg::norm1(&loose) <= tau {
        return Ok(ConstrainedCode { x: loose, unbracketed: false });
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |x: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        let obj = misfit(&x);
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            *best = Some((obj, x));
        }
    };

    let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
    let mut over = loose;
    let mut under: Option<Vec<f64>> = None;
    for _ in 0..MAX_HALVINGS {
        if hi - lo < BRACKET_COLLAPSE.ln_1p() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let warm = under.as_deref().unwrap_or(&over);
        let x = irls_sparse_code(y, dict, mid.exp(), params, Some(warm))?;
        let size = linalg::norm1(&x);
        if size > tau {
            lo = mid;
            over = x;
        } else {
            if size >= 0.95 * tau {
                return Ok(ConstrainedCode { x, unbracketed: false });
            }
            consider(x.clone(), &mut best);
            hi = mid;
            under = Some(x);
        }
    }

    match under {
        Some(under) => consider(onto_l1_sphere(&under, &over, tau), &mut best),
        None => {
            // nothing feasible: shrink the most penalized iterate onto the ball
            let size = linalg::norm1(&over);
            consider(over.iter().map(|v| v * tau / size).collect(), &mut best);
        }
    }
    let (_, x) = best.expect("at least one feasible candidate");
    Ok(ConstrainedCode { x, unbracketed: true })
}

/// Point `inside + θ (outside − inside)` with the largest `θ ∈ [0, 1]` that
/// keeps `‖·‖₁ ≤ τ`. `‖inside‖₁ ≤ τ < ‖outside‖₁`, and the norm is convex
/// along the segment, so bisection on `θ` finds the crossing.
fn onto_l1_sphere(inside: &[f64], outside: &[f64], tau: f64) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { inside.iter().zip(outside).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if linalg::norm1(&at(mid)) <= tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpStop {
    /// Select exactly this many atoms (fewer only if the residual vanishes).
    Sparsity(usize),
    /// Select atoms until `‖y − D x‖₂ ≤ r`.
    ResidualNorm(f64),
}

/// Orthogonal matching pursuit.
///
/// Greedily adds the atom most correlated with the residual (lowest index on
/// exact ties) and refits all active coefficients by least squares through an
/// incrementally grown Cholesky factor of the active Gram matrix.
pub fn omp(y: &[f64], dict: &Dictionary, stop: OmpStop) -> Result<Vec<f64>> {
    check_inputs(y, dict)?;
    let (m, k) = (dict.dim(), dict.n_atoms());
    let max_atoms = m.min(k);
    let (limit, target) = match stop {
        OmpStop::Sparsity(s) => {
            if s > max_atoms {
                return Err(Error::InvalidParameter(format!("sparsity {s} exceeds min(m, K) = {max_atoms}")));
            }
            (s, 0.0)
        }
        OmpStop::ResidualNorm(r) => {
            if !(r >= 0.0) {
                return Err(Error::InvalidParameter(format!("residual bound must be ≥ 0, got {r}")));
            }
            (max_atoms, r)
        }
    };

    let mut x = vec![0.0; k];
    let mut resid = y.to_vec();
    let y_norm = linalg::norm2(y);
    let floor = f64::EPSILON * y_norm;
    let mut active: Vec<usize> = Vec::with_capacity(limit);
    // lower-triangular factor of the active Gram matrix, row-major with stride `limit`
    let mut chol = vec![0.0; limit * limit];
    let mut proj: Vec<f64> = Vec::with_capacity(limit);
    let mut coef: Vec<f64> = Vec::with_capacity(limit);

    while active.len() < limit {
        let r_norm = linalg::norm2(&resid);
        if r_norm <= target || r_norm <= floor {
            break;
        }
        let mut best = (usize::MAX, 0.0f64);
        for j in 0..k {
            let c = linalg::dot(dict.atom(j), &resid).abs();
            if c > best.1 {
                best = (j, c);
            }
        }
        let (j, corr) = best;
        if j == usize::MAX || corr <= floor || active.contains(&j) {
            break;
        }

        // grow the Cholesky factor with atom j
        let a = active.len();
        let dj = dict.atom(j);
        let mut w: Vec<f64> = active.iter().map(|&i| linalg::dot(dict.atom(i), dj)).collect();
        for r in 0..a {
            let mut s = w[r];
            for c in 0..r {
                s -= chol[r * limit + c] * w[c];
            }
            w[r] = s / chol[r * limit + r];
        }
        let diag2 = 1.0 - linalg::dot(&w, &w);
        if diag2 <= 1e-14 {
            // atom j lies in the span of the active set
            break;
        }
        chol[a * limit..a * limit + a].copy_from_slice(&w);
        chol[a * limit + a] = diag2.sqrt();
        active.push(j);
        proj.push(linalg::dot(dj, y));

        // solve L Lᵀ c = D_Sᵀ y
        let n = active.len();
        coef.clear();
        coef.extend_from_slice(&proj);
        for r in 0..n {
            let mut s = coef[r];
            for c in 0..r {
                s -= chol[r * limit + c] * coef[c];
            }
            coef[r] = s / chol[r * limit + r];
        }
        for r in (0..n).rev() {
            let mut s = coef[r];
            for c in (r + 1)..n {
                s -= chol[c * limit + r] * coef[c];
            }
            coef[r] = s / chol[r * limit + r];
        }
        resid.copy_from_slice(y);
        for (&i, &c) in active.iter().zip(&coef) {
            linalg::axpy(-c, dict.atom(i), &mut resid);
        }
    }

    for (&i, &c) in active.iter().zip(&coef) {
        x[i] = c;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneRule {
    /// Zero every entry with `|x| < T0`.
    AbsoluteThreshold(f64),
    /// Keep the `⌈n_p · K⌉` largest-magnitude entries of each column.
    KeepFraction(f64),
    /// Zero entries with `|x_jn| < c · ‖x_n‖₂`, column by column.
    ColumnRelative(f64),
}

impl PruneRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PruneRule::AbsoluteThreshold(t) => t >= 0.0 && t.is_finite(),
            PruneRule::KeepFraction(f) => f > 0.0 && f <= 1.0,
            PruneRule::ColumnRelative(c) => c >= 0.0 && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("prune rule {self:?}")))
        }
    }

    /// Entries kept per column by `KeepFraction` for `K` atoms.
    pub fn keep_count(fraction: f64, n_atoms: usize) -> usize {
        // the offset absorbs products like 0.5 · 2 landing just above an integer
        ((fraction * n_atoms as f64 - 1e-9).ceil().max(0.0) as usize).min(n_atoms)
    }
}

pub fn prune(x: &CoefficientMatrix, rule: &PruneRule) -> Result<CoefficientMatrix> {
    rule.validate()?;
    let mut out = x.clone();
    let k = x.n_atoms();
    match *rule {
        PruneRule::AbsoluteThreshold(t0) => {
            for n in 0..out.n_examples() {
                out.column_mut(n).iter_mut().filter(|v| v.abs() < t0).for_each(|v| *v = 0.0);
            }
        }
        PruneRule::ColumnRelative(c) => {
            for n in 0..out.n_examples() {
                let col = out.column_mut(n);
                let t = c * linalg::norm2(col);
                col.iter_mut().filter(|v| v.abs() < t).for_each(|v| *v = 0.0);
            }
        }
        PruneRule::KeepFraction(f) => {
            let keep = PruneRule::keep_count(f, k);
            let mut order: Vec<usize> = (0..k).collect();
            for n in 0..out.n_examples() {
                let col = out.column_mut(n);
                order.sort_by(|&a, &b| col[b].abs().total_cmp(&col[a].abs()).then(a.cmp(&b)));
                for &j in &order[keep..] {
                    col[j] = 0.0;
                }
            }
        }
    }
    Ok(out)
}
