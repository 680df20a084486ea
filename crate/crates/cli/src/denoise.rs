//! `denoise`, `addnoise` and `metrics`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use l1ksvd::denoise::{add_noise, denoise_image, dictionary_mosaic, l1_preset, DenoiseParams, GrayImage};
use l1ksvd::learner::Algorithm;
use l1ksvd::metrics::{psnr, ssim};
use l1ksvd::sparse_coding::IrlsParams;
use l1ksvd::synth::NoiseKind;
use l1ksvd::RngSeed;

use crate::config::Settings;
use crate::CliError;

pub const DEFAULTS: &[(&str, &str)] = &[
    ("input", ""),
    ("noisy", "none"),
    ("sigma", "25"),
    ("noise", "laplacian"),
    ("seed", "0"),
    ("backend", "both"),
    ("lambda", "auto"),
    ("n_p", "auto"),
    ("patch", "8"),
    ("stride", "4"),
    ("atoms", "128"),
    ("iters", "10"),
    ("irls_iters", "10"),
    ("remove_mean", "true"),
    ("clamp_input", "false"),
    ("out_dir", "denoise-out"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    /// Clean reference image.
    pub input: PathBuf,
    /// Already-noisy version of `input`; when absent noise is injected.
    pub noisy: Option<PathBuf>,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub seed: RngSeed,
    pub backends: Vec<Algorithm>,
    pub lambda: f64,
    pub n_p: f64,
    pub patch: usize,
    pub stride: usize,
    pub atoms: usize,
    pub iters: usize,
    pub irls_iters: usize,
    pub remove_mean: bool,
    /// Round the noisy image to 8-bit `[0, 255]` before denoising.
    pub clamp_input: bool,
    pub out_dir: PathBuf,
}

fn existing_file(s: &Settings, key: &str) -> Result<PathBuf, CliError> {
    let p = PathBuf::from(s.raw(key));
    if s.raw(key).is_empty() {
        return Err(CliError::Usage(format!("`{key}` is required")));
    }
    if !p.is_file() {
        return Err(CliError::Usage(format!("`{key}`: no such file {}", p.display())));
    }
    Ok(p)
}

impl DenoiseConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let input = existing_file(s, "input")?;
        let noisy = if s.raw("noisy") == "none" { None } else { Some(existing_file(s, "noisy")?) };
        let sigma: f64 = s.get("sigma")?;
        let noise: NoiseKind = s.get("noise")?;
        let backends = match s.raw("backend") {
            "both" => vec![Algorithm::Ksvd, Algorithm::L1Ksvd],
            _ => vec![s.get::<Algorithm>("backend")?],
        };
        let preset = l1_preset(noise, sigma);
        let (lambda, n_p) = match (s.get_auto::<f64>("lambda")?, s.get_auto::<f64>("n_p")?) {
            (Some(l), Some(n)) => (l, n),
            (l, n) => match preset {
                Some((pl, pn)) => (l.unwrap_or(pl), n.unwrap_or(pn)),
                None if !backends.contains(&Algorithm::L1Ksvd) => (1.0, 1.0),
                None => return Err(CliError::Usage(format!("no preset for {noise} σ = {sigma}; set lambda and n_p"))),
            },
        };
        let cfg = DenoiseConfig {
            input,
            noisy,
            sigma,
            noise,
            seed: RngSeed(s.get("seed")?),
            backends,
            lambda,
            n_p,
            patch: s.get("patch")?,
            stride: s.get("stride")?,
            atoms: s.get("atoms")?,
            iters: s.get("iters")?,
            irls_iters: s.get("irls_iters")?,
            remove_mean: s.get("remove_mean")?,
            clamp_input: s.get("clamp_input")?,
            out_dir: s.get("out_dir")?,
        };
        for &b in &cfg.backends {
            cfg.params(b).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn params(&self, backend: Algorithm) -> DenoiseParams {
        DenoiseParams {
            patch: self.patch,
            stride: self.stride,
            dict_atoms: self.atoms,
            iters: self.iters,
            sigma: self.sigma,
            backend,
            lambda: self.lambda,
            n_p: self.n_p,
            remove_mean: self.remove_mean,
            irls: IrlsParams { max_inner_iters: self.irls_iters, ..Default::default() },
            seed: self.seed.derive(1),
            ..Default::default()
        }
    }
}

/// One `results.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseRow {
    pub backend: Algorithm,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub lambda: f64,
    pub n_p: f64,
    pub input_psnr: f64,
    pub input_ssim: f64,
    pub output_psnr: f64,
    pub output_ssim: f64,
}

pub const RESULTS_HEADER: [&str; 9] = ["backend", "sigma", "noise", "lambda", "n_p", "input_psnr", "input_ssim", "output_psnr", "output_ssim"];

/// Load or synthesize the noisy input, denoise it with each backend and
/// write images, mosaics, `results.csv` and the manifest.
pub fn run(cfg: &DenoiseConfig, settings: &Settings) -> anyhow::Result<Vec<DenoiseRow>> {
    let clean = GrayImage::read(&cfg.input).with_context(|| format!("reading {}", cfg.input.display()))?;
    let mut noisy = match &cfg.noisy {
        Some(p) => GrayImage::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => add_noise(&clean, cfg.sigma, cfg.noise, cfg.seed)?,
    };
    if cfg.clamp_input {
        noisy = noisy.quantized();
    }
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join("manifest.txt"), settings.manifest())?;
    noisy.write(cfg.out_dir.join("noisy.pgm"))?;

    let input_psnr = psnr(&clean, &noisy, 255.0)?;
    let input_ssim = ssim(&clean, &noisy)?;
    let mut rows = Vec::new();
    for &backend in &cfg.backends {
        let out = denoise_image(&noisy, &cfg.params(backend)).with_context(|| format!("denoising with {}", backend.name()))?;
        out.image.write(cfg.out_dir.join(format!("denoised_{}.pgm", backend.name())))?;
        dictionary_mosaic(&out.dictionary, cfg.patch)?.write(cfg.out_dir.join(format!("dictionary_{}.pgm", backend.name())))?;
        rows.push(DenoiseRow {
            backend,
            sigma: cfg.sigma,
            noise: cfg.noise,
            lambda: cfg.lambda,
            n_p: cfg.n_p,
            input_psnr,
            input_ssim,
            output_psnr: psnr(&clean, &out.image, 255.0)?,
            output_ssim: ssim(&clean, &out.image)?,
        });
    }
    write_results(&cfg.out_dir.join("results.csv"), &rows)?;
    Ok(rows)
}

fn write_results(path: &Path, rows: &[DenoiseRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        let uses_l1 = r.backend == Algorithm::L1Ksvd;
        w.write_record([
            r.backend.name().to_string(),
            r.sigma.to_string(),
            r.noise.to_string(),
            if uses_l1 { r.lambda.to_string() } else { String::new() },
            if uses_l1 { r.n_p.to_string() } else { String::new() },
            r.input_psnr.to_string(),
            r.input_ssim.to_string(),
            r.output_psnr.to_string(),
            r.output_ssim.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report(rows: &[DenoiseRow]) -> String {
    let mut out = String::new();
    if let Some(r) = rows.first() {
        out.push_str(&format!("input        PSNR {:>6.2} dB  SSIM {:.4}\n", r.input_psnr, r.input_ssim));
    }
    for r in rows {
        out.push_str(&format!("{:<12} PSNR {:>6.2} dB  SSIM {:.4}\n", r.backend.name(), r.output_psnr, r.output_ssim));
    }
    let find = |b| rows.iter().find(|r| r.backend == b);
    if let (Some(k), Some(l)) = (find(Algorithm::Ksvd), find(Algorithm::L1Ksvd)) {
        out.push_str(&format!("SSIM(l1ksvd) - SSIM(ksvd) = {:+.4}\n", l.output_ssim - k.output_ssim));
    }
    out
}

pub const ADDNOISE_DEFAULTS: &[(&str, &str)] = &[("input", ""), ("output", ""), ("sigma", "25"), ("noise", "gaussian"), ("seed", "0")];

/// Write `input + σ·noise`, clamped to `[0, 255]` and rounded; returns the
/// PSNR of the written image against the input.
pub fn addnoise(s: &Settings) -> Result<f64, CliError> {
    let input = existing_file(s, "input")?;
    let output: PathBuf = s.get("output")?;
    if s.raw("output").is_empty() {
        return Err(CliError::Usage("`output` is required".into()));
    }
    let sigma: f64 = s.get("sigma")?;
    let noise: NoiseKind = s.get("noise")?;
    let seed = RngSeed(s.get("seed")?);
    let clean = GrayImage::read(&input).map_err(runtime)?;
    let noisy = add_noise(&clean, sigma, noise, seed).map_err(|e| CliError::Usage(e.to_string()))?.quantized();
    noisy.write(&output).map_err(runtime)?;
    psnr(&clean, &noisy, 255.0).map_err(runtime)
}

pub const METRICS_DEFAULTS: &[(&str, &str)] = &[("reference", ""), ("test", "")];

/// `(PSNR, SSIM)` of `test` against `reference`.
pub fn metrics(s: &Settings) -> Result<(f64, f64), CliError> {
    let a = GrayImage::read(existing_file(s, "reference")?).map_err(runtime)?;
    let b = GrayImage::read(existing_file(s, "test")?).map_err(runtime)?;
    Ok((psnr(&a, &b, 255.0).map_err(runtime)?, ssim(&a, &b).map_err(runtime)?))
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}
