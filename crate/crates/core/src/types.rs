//! Shared numeric domain types.
//!
//! All matrices are stored column-major, so atom `d_j`, example `y_n` and
//! code `x_n` are contiguous slices. A row `xʲ` of the coefficient matrix is
//! a strided view into the same storage.

use ndarray::{Array2, ArrayView1};

use crate::linalg::{self, col, col_mut};
use crate::{Error, Result};

/// Tolerance for the unit-norm atom invariant.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Divide every column by its ℓ2 norm.
pub fn normalize_columns(m: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = linalg::to_col_major(m.clone());
    for j in 0..out.ncols() {
        let c = col_mut(&mut out, j);
        let norm = linalg::norm2(c);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroColumn(j));
        }
        c.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(out)
}

/// `m × K` matrix of unit-ℓ2 atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    /// Build from arbitrary nonzero columns; they are normalized.
    pub fn new(atoms: &Array2<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::DimensionMismatch("dictionary needs m ≥ 1 and K ≥ 1".into()));
        }
        Ok(Dictionary { atoms: normalize_columns(atoms)? })
    }

    /// Wrap columns that must already have unit norm.
    pub fn from_unit_columns(atoms: Array2<f64>) -> Result<Self> {
        let atoms = linalg::to_col_major(atoms);
        for j in 0..atoms.ncols() {
            let n = linalg::norm2(col(&atoms, j));
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!("atom {j} has norm {n}")));
            }
        }
        Ok(Dictionary { atoms })
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.atoms
    }

    /// Signal dimension `m`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count `K`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        col(&self.atoms, j)
    }

    /// Replace atom `j`; `u` is renormalized.
    pub fn set_atom(&mut self, j: usize, u: &[f64]) -> Result<()> {
        let n = linalg::norm2(u);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroColumn(j));
        }
        col_mut(&mut self.atoms, j).iter_mut().zip(u).for_each(|(d, v)| *d = v / n);
        Ok(())
    }

    /// `D x` for one code vector.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                linalg::axpy(xj, self.atom(j), out);
            }
        }
    }
}

/// `K × N` coefficient matrix; column `n` is the code of example `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    coeffs: Array2<f64>,
}

impl CoefficientMatrix {
    pub fn new(coeffs: Array2<f64>) -> Self {
        CoefficientMatrix { coeffs: linalg::to_col_major(coeffs) }
    }

    pub fn zeros(n_atoms: usize, n_examples: usize) -> Self {
        CoefficientMatrix { coeffs: linalg::zeros_col_major(n_atoms, n_examples) }
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.coeffs
    }

    pub fn n_atoms(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n_examples(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Code `x_n`.
    pub fn column(&self, n: usize) -> &[f64] {
        col(&self.coeffs, n)
    }

    pub fn column_mut(&mut self, n: usize) -> &mut [f64] {
        col_mut(&mut self.coeffs, n)
    }

    /// Coefficient row `xʲ` (strided).
    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.coeffs.row(j)
    }

    pub fn get(&self, j: usize, n: usize) -> f64 {
        self.coeffs[[j, n]]
    }

    pub fn set(&mut self, j: usize, n: usize, v: f64) {
        self.coeffs[[j, n]] = v;
    }

    /// Examples whose code uses atom `j`.
    pub fn support(&self, j: usize) -> Support {
        Support {
            indices: self.coeffs.row(j).iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(n, _)| n).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|v| **v != 0.0).count()
    }
}

/// `m × N` matrix of training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    examples: Array2<f64>,
}

impl TrainingSet {
    pub fn new(examples: Array2<f64>) -> Result<Self> {
        if examples.ncols() == 0 || examples.nrows() == 0 {
            return Err(Error::DimensionMismatch("training set needs m ≥ 1 and N ≥ 1".into()));
        }
        Ok(TrainingSet { examples: linalg::to_col_major(examples) })
    }

    pub fn examples(&self) -> &Array2<f64> {
        &self.examples
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.examples
    }

    pub fn dim(&self) -> usize {
        self.examples.nrows()
    }

    pub fn len(&self) -> usize {
        self.examples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.ncols() == 0
    }

    pub fn example(&self, n: usize) -> &[f64] {
        col(&self.examples, n)
    }

    /// `Y − D X`, column-major.
    pub fn residual(&self, dict: &Dictionary, codes: &CoefficientMatrix) -> Result<Array2<f64>> {
        check_dims(self, dict, codes)?;
        let mut r = linalg::to_col_major(self.examples.clone());
        let mut approx = vec![0.0; self.dim()];
        for n in 0..self.len() {
            dict.apply(codes.column(n), &mut approx);
            col_mut(&mut r, n).iter_mut().zip(&approx).for_each(|(ri, a)| *ri -= a);
        }
        Ok(r)
    }
}

pub(crate) fn check_dims(y: &TrainingSet, d: &Dictionary, x: &CoefficientMatrix) -> Result<()> {
    if y.dim() != d.dim() || x.n_atoms() != d.n_atoms() || x.n_examples() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "Y is {}x{}, D is {}x{}, X is {}x{}",
            y.dim(),
            y.len(),
            d.dim(),
            d.n_atoms(),
            x.n_atoms(),
            x.n_examples()
        )));
    }
    Ok(())
}

/// Diagonal of an IRLS weight matrix; every entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    diag: Vec<f64>,
}

impl DiagonalWeights {
    pub fn identity(n: usize) -> Self {
        DiagonalWeights { diag: vec![1.0; n] }
    }

    /// `w(j) = 1 / (|r_j| + ε)`.
    pub fn reweight(values: &[f64], epsilon: f64) -> Self {
        debug_assert!(epsilon > 0.0);
        DiagonalWeights { diag: values.iter().map(|r| 1.0 / (r.abs() + epsilon)).collect() }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Strictly increasing example indices where a coefficient row is nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    /// Sorts and deduplicates; every index must be below `bound`.
    pub fn new(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::InvalidParameter(format!("support index {last} out of range {bound}")));
            }
        }
        Ok(Support { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
