//! Dictionary-recovery metrics (atom detection rate, distance κ) and image
//! quality metrics (PSNR, SSIM).

use crate::image::GrayImage;
use crate::linalg;
use crate::types::Dictionary;
use crate::{Error, Result};

/// An estimated atom recovers a true atom when `|⟨d, d̂⟩|` exceeds this.
pub const RECOVERY_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub adr: f64,
    pub kappa: f64,
    /// `(true index, best estimated index, |inner product|)` per true atom.
    pub matched_pairs: Vec<(usize, usize, f64)>,
}

fn check_pair(truth: &Dictionary, estimate: &Dictionary) -> Result<()> {
    if truth.dim() != estimate.dim() || truth.n_atoms() != estimate.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "true dictionary is {}x{}, estimate is {}x{}",
            truth.dim(),
            truth.n_atoms(),
            estimate.dim(),
            estimate.n_atoms()
        )));
    }
    Ok(())
}

/// Best match among the estimated atoms for every true atom. An estimated
/// atom may serve as the best match of several true atoms.
pub fn recovery_report(truth: &Dictionary, estimate: &Dictionary) -> Result<RecoveryReport> {
    check_pair(truth, estimate)?;
    let k = truth.n_atoms();
    let mut matched_pairs = Vec::with_capacity(k);
    for i in 0..k {
        let (mut best_j, mut best) = (0, f64::NEG_INFINITY);
        for j in 0..estimate.n_atoms() {
            let c = linalg::dot(truth.atom(i), estimate.atom(j)).abs();
            if c > best {
                best = c;
                best_j = j;
            }
        }
        matched_pairs.push((i, best_j, best.min(1.0)));
    }
    let hits = matched_pairs.iter().filter(|p| p.2 > RECOVERY_THRESHOLD).count();
    let kappa = matched_pairs.iter().map(|p| 1.0 - p.2).sum::<f64>() / k as f64;
    Ok(RecoveryReport { adr: hits as f64 / k as f64, kappa, matched_pairs })
}

/// Fraction of true atoms `d_i` with `max_j |d_iᵀ d̂_j| > 0.99`.
pub fn atom_detection_rate(truth: &Dictionary, estimate: &Dictionary) -> Result<f64> {
    Ok(recovery_report(truth, estimate)?.adr)
}

/// `κ = (1/K) Σ_i min_j (1 − |d_iᵀ d̂_j|)`.
pub fn dictionary_distance(truth: &Dictionary, estimate: &Dictionary) -> Result<f64> {
    Ok(recovery_report(truth, estimate)?.kappa)
}

fn check_images(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{} image",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_images(reference, test)?;
    let n = reference.pixels().len() as f64;
    Ok(reference.pixels().iter().zip(test.pixels()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n)
}

/// `10·log10(peak² / MSE)` in dB; identical images give `f64::INFINITY`.
pub fn psnr(reference: &GrayImage, test: &GrayImage, peak: f64) -> Result<f64> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 255.0;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Mean SSIM over every fully-contained 11×11 Gaussian window (σ = 1.5,
/// K₁ = 0.01, K₂ = 0.03, dynamic range 255).
pub fn ssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_images(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { width: w, height: h, min: SSIM_WINDOW });
    }
    let taps = ssim_taps();
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let (x, y) = (reference.pixels(), test.pixels());

    let fields: [Vec<f64>; 5] = [
        x.to_vec(),
        y.to_vec(),
        x.iter().map(|v| v * v).collect(),
        y.iter().map(|v| v * v).collect(),
        x.iter().zip(y).map(|(a, b)| a * b).collect(),
    ];
    let filtered: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| {
            let mut horiz = vec![0.0; h * ow];
            for r in 0..h {
                for c in 0..ow {
                    horiz[r * ow + c] = taps.iter().enumerate().map(|(t, k)| k * f[r * w + c + t]).sum();
                }
            }
            let mut out = vec![0.0; oh * ow];
            for r in 0..oh {
                for c in 0..ow {
                    out[r * ow + c] = taps.iter().enumerate().map(|(t, k)| k * horiz[(r + t) * ow + c]).sum();
                }
            }
            out
        })
        .collect();

    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (mx, my) = (filtered[0][i], filtered[1][i]);
        let vx = filtered[2][i] - mx * mx;
        let vy = filtered[3][i] - my * my;
        let cov = filtered[4][i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / (oh * ow) as f64)
}
