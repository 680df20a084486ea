//! Patch-based denoising: learn a dictionary on the overlapping patches of
//! the noisy image, sparse-code every patch with it, and average the coded
//! patches back into an image.

use crate::dict_update::L1RankOneParams;
use crate::learner::{learn, sparse_code_all, Algorithm, Coder, Lambda, LearnConfig, LearnOutput};
use crate::linalg::{self, col, col_mut};
use crate::sparse_coding::{prune, IrlsParams, PruneRule};
use crate::synth::NoiseKind;
use crate::types::{Dictionary, TrainingSet};
use crate::{Error, Result, RngSeed};

pub use crate::image::GrayImage;

/// Residual factor of the K-SVD coding stop `‖y − Dx‖₂ ≤ 1.15·σ·√(patch²)`.
pub const OMP_NOISE_GAIN: f64 = 1.15;

/// Placement of square patches on an image grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub stride: usize,
}

impl PatchGeometry {
    pub fn new(width: usize, height: usize, patch: usize, stride: usize) -> Result<Self> {
        if patch == 0 || stride == 0 || stride > patch {
            return Err(Error::InvalidParameter(format!("need patch ≥ stride ≥ 1, got patch {patch}, stride {stride}")));
        }
        if width < patch || height < patch {
            return Err(Error::ImageTooSmall { width, height, min: patch });
        }
        Ok(PatchGeometry { width, height, patch, stride })
    }

    /// `0, stride, 2·stride, …`, plus `dim − patch` when the grid does not
    /// land there exactly.
    pub fn offsets(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
        let last = dim - patch;
        let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
        if *out.last().unwrap() != last {
            out.push(last);
        }
        out
    }

    /// Top-left corners `(row, col)`, row offsets outermost.
    pub fn corners(&self) -> Vec<(usize, usize)> {
        let rows = Self::offsets(self.height, self.patch, self.stride);
        let cols = Self::offsets(self.width, self.patch, self.stride);
        rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect()
    }

    pub fn patch_len(&self) -> usize {
        self.patch * self.patch
    }
}

/// Every patch as a column, vectorized column-major within the patch.
pub fn extract_patches(img: &GrayImage, geometry: &PatchGeometry) -> Result<TrainingSet> {
    if img.width() != geometry.width || img.height() != geometry.height {
        return Err(Error::DimensionMismatch("image does not match patch geometry".into()));
    }
    let p = geometry.patch;
    let corners = geometry.corners();
    let mut out = linalg::zeros_col_major(geometry.patch_len(), corners.len());
    for (n, &(r0, c0)) in corners.iter().enumerate() {
        let dst = col_mut(&mut out, n);
        for c in 0..p {
            for r in 0..p {
                dst[c * p + r] = img.get(r0 + r, c0 + c);
            }
        }
    }
    TrainingSet::new(out)
}

/// Average overlapping patches back into an image, clamped to `[0, 255]`.
pub fn reconstruct_from_patches(patches: &TrainingSet, geometry: &PatchGeometry) -> Result<GrayImage> {
    Ok(average_patches(patches, geometry)?.clamped())
}

/// Average overlapping patches without clamping. Each pixel's contributions
/// are accumulated in patch order with compensated summation.
pub fn average_patches(patches: &TrainingSet, geometry: &PatchGeometry) -> Result<GrayImage> {
    let corners = geometry.corners();
    if patches.dim() != geometry.patch_len() || patches.len() != corners.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} patches of length {} for a geometry of {} patches of length {}",
            patches.len(),
            patches.dim(),
            corners.len(),
            geometry.patch_len()
        )));
    }
    let (w, h, p) = (geometry.width, geometry.height, geometry.patch);
    let mut sum = vec![0.0; w * h];
    let mut comp = vec![0.0; w * h];
    let mut count = vec![0u32; w * h];
    for (n, &(r0, c0)) in corners.iter().enumerate() {
        let src = patches.example(n);
        for c in 0..p {
            for r in 0..p {
                let i = (r0 + r) * w + c0 + c;
                // Neumaier summation
                let v = src[c * p + r];
                let t = sum[i] + v;
                if sum[i].abs() >= v.abs() {
                    comp[i] += (sum[i] - t) + v;
                } else {
                    comp[i] += (v - t) + sum[i];
                }
                sum[i] = t;
                count[i] += 1;
            }
        }
    }
    let pixels = (0..w * h).map(|i| (sum[i] + comp[i]) / f64::from(count[i])).collect();
    GrayImage::new(w, h, pixels)
}

/// Subtract each column's mean in place; returns the means.
pub fn remove_means(patches: &mut TrainingSet) -> Vec<f64> {
    let mut y = std::mem::replace(patches, TrainingSet::new(ndarray::Array2::zeros((1, 1))).unwrap()).into_inner();
    let mut means = Vec::with_capacity(y.ncols());
    for n in 0..y.ncols() {
        let c = col_mut(&mut y, n);
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        c.iter_mut().for_each(|v| *v -= mean);
        means.push(mean);
    }
    *patches = TrainingSet::new(y).unwrap();
    means
}

pub fn restore_means(patches: &mut TrainingSet, means: &[f64]) {
    let mut y = std::mem::replace(patches, TrainingSet::new(ndarray::Array2::zeros((1, 1))).unwrap()).into_inner();
    for (n, mean) in means.iter().enumerate() {
        col_mut(&mut y, n).iter_mut().for_each(|v| *v += mean);
    }
    *patches = TrainingSet::new(y).unwrap();
}

/// Parameter pairs `(λ, n_p)` tuned for the ℓ1-K-SVD backend.
pub fn l1_preset(noise: NoiseKind, sigma: f64) -> Option<(f64, f64)> {
    let level = sigma.round() as i64;
    if (sigma - level as f64).abs() > 1e-9 {
        return None;
    }
    match (noise, level) {
        (NoiseKind::Laplacian, 15) => Some((1.0, 0.18)),
        (NoiseKind::Laplacian, 25) => Some((1.0, 0.08)),
        (NoiseKind::Laplacian, 35) => Some((8.0, 0.05)),
        (NoiseKind::Gaussian, 15) => Some((1.0, 0.15)),
        (NoiseKind::Gaussian, 25) => Some((1.0, 0.05)),
        (NoiseKind::Gaussian, 35) => Some((8.0, 0.04)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseParams {
    pub patch: usize,
    pub stride: usize,
    pub dict_atoms: usize,
    pub iters: usize,
    /// Noise standard deviation, assumed known.
    pub sigma: f64,
    pub backend: Algorithm,
    pub lambda: f64,
    pub n_p: f64,
    /// Subtract each patch's mean before learning and coding.
    pub remove_mean: bool,
    pub irls: IrlsParams,
    pub rank1: L1RankOneParams,
    pub seed: RngSeed,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        DenoiseParams {
            patch: 8,
            stride: 4,
            dict_atoms: 128,
            iters: 10,
            sigma: 25.0,
            backend: Algorithm::L1Ksvd,
            lambda: 1.0,
            n_p: 0.08,
            remove_mean: true,
            irls: IrlsParams::default(),
            rank1: L1RankOneParams::default(),
            seed: RngSeed(0),
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.stride == 0 || self.stride > self.patch {
            return Err(Error::InvalidParameter(format!("need patch ≥ stride ≥ 1, got {} and {}", self.patch, self.stride)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        if self.backend == Algorithm::L1Ksvd {
            if !(self.lambda > 0.0) || !self.lambda.is_finite() {
                return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
            }
            PruneRule::KeepFraction(self.n_p).validate()?;
        }
        if self.iters == 0 || self.dict_atoms == 0 {
            return Err(Error::InvalidParameter("iters and dict_atoms must be ≥ 1".into()));
        }
        Ok(())
    }

    fn coder(&self) -> Coder {
        match self.backend {
            Algorithm::L1Ksvd => Coder::IrlsPenalized(Lambda::Shared(self.lambda)),
            Algorithm::Ksvd => Coder::OmpResidual(OMP_NOISE_GAIN * self.sigma * ((self.patch * self.patch) as f64).sqrt()),
        }
    }

    fn prune_rule(&self) -> Option<PruneRule> {
        match self.backend {
            Algorithm::L1Ksvd => Some(PruneRule::KeepFraction(self.n_p)),
            Algorithm::Ksvd => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Denoised {
    pub image: GrayImage,
    pub dictionary: Dictionary,
    pub training: LearnOutput,
}

/// Train on the noisy patches, re-code them once with the final dictionary
/// and average the coded patches into the output image.
pub fn denoise_image(noisy: &GrayImage, params: &DenoiseParams) -> Result<Denoised> {
    params.validate()?;
    let geometry = PatchGeometry::new(noisy.width(), noisy.height(), params.patch, params.stride)?;
    let mut patches = extract_patches(noisy, &geometry)?;
    let means = if params.remove_mean { Some(remove_means(&mut patches)) } else { None };

    let cfg = LearnConfig {
        n_atoms: params.dict_atoms,
        outer_iters: params.iters,
        coder: params.coder(),
        prune_rule: params.prune_rule(),
        irls: params.irls,
        rank1: params.rank1,
        seed: params.seed,
    };
    let training = learn(&patches, &cfg, params.backend, None)?;
    let dictionary = training.dictionary.clone();

    let (mut codes, _) = sparse_code_all(&patches, &dictionary, &cfg.coder, &cfg.irls)?;
    if let Some(rule) = cfg.prune_rule {
        codes = prune(&codes, &rule)?;
    }
    let mut estimate = linalg::zeros_col_major(patches.dim(), patches.len());
    for n in 0..patches.len() {
        dictionary.apply(codes.column(n), col_mut(&mut estimate, n));
    }
    let mut estimate = TrainingSet::new(estimate)?;
    if let Some(means) = &means {
        restore_means(&mut estimate, means);
    }
    let image = reconstruct_from_patches(&estimate, &geometry)?;
    Ok(Denoised { image, dictionary, training })
}

/// Tile atoms as `patch × patch` blocks, each stretched to `[0, 255]`, with a
/// one-pixel border between tiles.
pub fn dictionary_mosaic(dict: &Dictionary, patch: usize) -> Result<GrayImage> {
    if dict.dim() != patch * patch {
        return Err(Error::DimensionMismatch(format!("atoms of length {} are not {patch}x{patch} patches", dict.dim())));
    }
    let k = dict.n_atoms();
    let per_row = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(per_row);
    let cell = patch + 1;
    let (w, h) = (per_row * cell + 1, rows * cell + 1);
    let mut pixels = vec![255.0; w * h];
    for j in 0..k {
        let atom = dict.atom(j);
        let lo = atom.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = atom.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (r0, c0) = ((j / per_row) * cell + 1, (j % per_row) * cell + 1);
        for c in 0..patch {
            for r in 0..patch {
                pixels[(r0 + r) * w + c0 + c] = 255.0 * (atom[c * patch + r] - lo) / span;
            }
        }
    }
    GrayImage::new(w, h, pixels)
}

/// `clean + σ·noise` with unit-variance noise of the given family, unclamped.
pub fn add_noise(clean: &GrayImage, sigma: f64, kind: NoiseKind, seed: RngSeed) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let noise = crate::synth::unit_noise(clean.pixels().len(), 1, kind, seed);
    let pixels = clean.pixels().iter().zip(col(&noise, 0)).map(|(p, n)| p + sigma * n);
    GrayImage::new(clean.width(), clean.height(), pixels.collect())
}
