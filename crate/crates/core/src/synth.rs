//! Synthetic ground truth for dictionary-recovery experiments: a random
//! unit-norm dictionary, `s`-sparse Gaussian codes, and additive noise
//! rescaled to an exact signal-to-noise ratio.

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::linalg::{self, col_mut};
use crate::types::{CoefficientMatrix, Dictionary, TrainingSet};
use crate::{Error, Result, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Laplacian,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" | "normal" => Ok(NoiseKind::Gaussian),
            "laplacian" | "laplace" => Ok(NoiseKind::Laplacian),
            other => Err(Error::InvalidParameter(format!("unknown noise kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplacian => "laplacian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub m: usize,
    pub k: usize,
    pub s: usize,
    pub n: usize,
    pub snr_db: f64,
    pub noise: NoiseKind,
    pub seed: RngSeed,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { m: 20, k: 50, s: 3, n: 1500, snr_db: 20.0, noise: NoiseKind::Laplacian, seed: RngSeed(0) }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.s == 0 || self.s > self.m || self.s > self.k {
            return Err(Error::InvalidParameter(format!("need 1 ≤ s ≤ m, K; got m={} K={} s={}", self.m, self.k, self.s)));
        }
        if self.n < self.k {
            return Err(Error::InvalidParameter(format!("N = {} is smaller than K = {}", self.n, self.k)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParameter("snr_db must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub dictionary: Dictionary,
    pub codes: CoefficientMatrix,
    pub clean: TrainingSet,
    pub noisy: TrainingSet,
}

pub fn standard_normal_matrix(rows: usize, cols: usize, seed: RngSeed) -> Array2<f64> {
    let mut rng = seed.rng();
    let mut out = linalg::zeros_col_major(rows, cols);
    out.as_slice_memory_order_mut().unwrap().iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    out
}

/// Laplace(0, b) samples by inverting the CDF of `p ~ U(0, 1)`:
/// `x = −b · sign(p − ½) · ln(1 − 2|p − ½|)`.
pub fn sample_laplacian(rows: usize, cols: usize, scale: f64, seed: RngSeed) -> Result<Array2<f64>> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("Laplace scale must be positive, got {scale}")));
    }
    let mut rng = seed.rng();
    let mut out = linalg::zeros_col_major(rows, cols);
    out.as_slice_memory_order_mut().unwrap().iter_mut().for_each(|v| *v = laplace_quantile(rng.sample(Open01), scale));
    Ok(out)
}

pub fn laplace_quantile(p: f64, scale: f64) -> f64 {
    let c = p - 0.5;
    if c == 0.0 {
        return 0.0;
    }
    -scale * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// Zero-mean noise of the given family with unit standard deviation.
pub fn unit_noise(rows: usize, cols: usize, kind: NoiseKind, seed: RngSeed) -> Array2<f64> {
    match kind {
        NoiseKind::Gaussian => standard_normal_matrix(rows, cols, seed),
        NoiseKind::Laplacian => sample_laplacian(rows, cols, std::f64::consts::FRAC_1_SQRT_2, seed).expect("positive scale"),
    }
}

const STREAM_DICT: u64 = 1;
const STREAM_SUPPORT: u64 = 2;
const STREAM_AMPLITUDE: u64 = 3;
const STREAM_NOISE: u64 = 4;

pub fn generate_instance(spec: &SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let SynthSpec { m, k, s, n, .. } = *spec;
    let dictionary = Dictionary::new(&standard_normal_matrix(m, k, spec.seed.derive(STREAM_DICT)))?;

    let mut codes = CoefficientMatrix::zeros(k, n);
    let mut support_rng = spec.seed.derive(STREAM_SUPPORT).rng();
    let mut amp_rng = spec.seed.derive(STREAM_AMPLITUDE).rng();
    for col in 0..n {
        let mut rows = index::sample(&mut support_rng, k, s).into_vec();
        rows.sort_unstable();
        for j in rows {
            let mut a: f64 = amp_rng.sample(StandardNormal);
            while a == 0.0 {
                a = amp_rng.sample(StandardNormal);
            }
            codes.set(j, col, a);
        }
    }

    let clean = {
        let mut y = linalg::zeros_col_major(m, n);
        for col in 0..n {
            dictionary.apply(codes.column(col), col_mut(&mut y, col));
        }
        TrainingSet::new(y)?
    };

    let mut noise = unit_noise(m, n, spec.noise, spec.seed.derive(STREAM_NOISE));
    let target = linalg::frobenius(clean.examples()) / 10f64.powf(spec.snr_db / 20.0);
    let have = linalg::frobenius(&noise);
    noise.mapv_inplace(|v| v * target / have);
    let noisy = TrainingSet::new(clean.examples() + &noise)?;
    Ok(SynthInstance { dictionary, codes, clean, noisy })
}

/// `10·log10(‖clean‖_F² / ‖noisy − clean‖_F²)`.
pub fn realized_snr_db(clean: &TrainingSet, noisy: &TrainingSet) -> f64 {
    let signal: f64 = clean.examples().iter().map(|v| v * v).sum();
    let noise: f64 = clean.examples().iter().zip(noisy.examples().iter()).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (signal / noise).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_instance_shape() {
        let inst = generate_instance(&SynthSpec { n: 300, ..Default::default() }).unwrap();
        assert_eq!(inst.dictionary.dim(), 20);
        assert_eq!(inst.dictionary.n_atoms(), 50);
        for c in 0..300 {
            assert_eq!(inst.codes.column(c).iter().filter(|v| **v != 0.0).count(), 3);
        }
        for j in 0..50 {
            assert!((linalg::norm2(inst.dictionary.atom(j)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn realized_snr_is_exact() {
        for noise in [NoiseKind::Gaussian, NoiseKind::Laplacian] {
            let spec = SynthSpec { n: 200, noise, snr_db: 17.5, seed: RngSeed(3), ..Default::default() };
            let inst = generate_instance(&spec).unwrap();
            assert!((realized_snr_db(&inst.clean, &inst.noisy) - 17.5).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_snr_is_noise_free() {
        let inst = generate_instance(&SynthSpec { n: 100, snr_db: 300.0, ..Default::default() }).unwrap();
        let diff = linalg::frobenius(&(inst.noisy.examples() - inst.clean.examples()));
        assert!(diff / linalg::frobenius(inst.clean.examples()) <= 1e-14);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec { n: 60, seed: RngSeed(42), ..Default::default() };
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_eq!(a.codes, b.codes);
        let c = generate_instance(&SynthSpec { seed: RngSeed(43), ..spec }).unwrap();
        assert_ne!(a.noisy, c.noisy);
    }

    #[test]
    fn quantile_midpoint_and_symmetry() {
        assert_eq!(laplace_quantile(0.5, 2.0), 0.0);
        assert!((laplace_quantile(0.25, 1.0) + laplace_quantile(0.75, 1.0)).abs() < 1e-15);
        assert!((laplace_quantile(0.75, 1.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_instance(&SynthSpec { s: 21, ..Default::default() }).is_err());
        assert!(generate_instance(&SynthSpec { n: 10, ..Default::default() }).is_err());
        assert!(sample_laplacian(2, 2, 0.0, RngSeed(0)).is_err());
        assert!("uniform".parse::<NoiseKind>().is_err());
    }
}
