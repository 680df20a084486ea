//! `synth`: dictionary recovery on generated data, K-SVD vs ℓ1-K-SVD.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use l1ksvd::dict_update::L1RankOneParams;
use l1ksvd::learner::{learn, Algorithm, Coder, IterationRecord, Lambda, LearnConfig};
use l1ksvd::linalg::{frobenius, norm1};
use l1ksvd::sparse_coding::{IrlsParams, PruneRule};
use l1ksvd::synth::{generate_instance, NoiseKind, SynthSpec};
use l1ksvd::RngSeed;
use rayon::prelude::*;

use crate::config::Settings;
use crate::CliError;

pub const DEFAULTS: &[(&str, &str)] = &[
    ("m", "20"),
    ("k", "50"),
    ("s", "3"),
    ("n", "1500"),
    ("snr_db", "20"),
    ("noise", "laplacian"),
    ("iters", "80"),
    ("trials", "5"),
    ("seed", "0"),
    ("algorithms", "ksvd,l1ksvd"),
    ("l1_coder", "constrained"),
    ("lambda", "1"),
    ("prune", "col:0.2"),
    ("irls_iters", "10"),
    ("irls_tol", "1e-6"),
    ("rank1_passes", "10"),
    ("workers", "0"),
    ("out_dir", "synth-out"),
];

/// How the ℓ1 coder's sparsity is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum L1Coder {
    /// `‖x‖₁ ≤ τ_n` with the true `τ_n` of each example.
    Constrained,
    /// Shared penalty.
    Penalized(f64),
}

/// Pruning as written in configs: `none`, `abs:T0`, `fro:f` (`f·‖X‖_F` of
/// the true codes), `col:f` or `keep:n_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneSpec {
    None,
    Absolute(f64),
    FrobeniusFraction(f64),
    ColumnRelative(f64),
    KeepFraction(f64),
}

impl std::str::FromStr for PruneSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(PruneSpec::None);
        }
        let (kind, value) = s.split_once(':').ok_or_else(|| format!("expected none or kind:value, got {s:?}"))?;
        let v: f64 = value.parse().map_err(|e| format!("{value:?}: {e}"))?;
        match kind {
            "abs" => Ok(PruneSpec::Absolute(v)),
            "fro" => Ok(PruneSpec::FrobeniusFraction(v)),
            "col" => Ok(PruneSpec::ColumnRelative(v)),
            "keep" => Ok(PruneSpec::KeepFraction(v)),
            _ => Err(format!("unknown prune kind {kind:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub spec: SynthSpec,
    pub sizes: Vec<usize>,
    pub iters: usize,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub l1_coder: L1Coder,
    pub prune: PruneSpec,
    pub irls: IrlsParams,
    pub rank1: L1RankOneParams,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl SynthConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let spec = SynthSpec {
            m: s.get("m")?,
            k: s.get("k")?,
            s: s.get("s")?,
            n: 0,
            snr_db: s.get("snr_db")?,
            noise: s.get::<NoiseKind>("noise")?,
            seed: RngSeed(s.get("seed")?),
        };
        let sizes: Vec<usize> = s.get_list("n")?;
        for &n in &sizes {
            SynthSpec { n, ..spec }.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let l1_coder = match s.raw("l1_coder") {
            "constrained" => L1Coder::Constrained,
            "penalized" => L1Coder::Penalized(s.get("lambda")?),
            other => return Err(CliError::Usage(format!("l1_coder must be constrained or penalized, got `{other}`"))),
        };
        let irls = IrlsParams { max_inner_iters: s.get("irls_iters")?, rel_tol: s.get("irls_tol")?, ..Default::default() };
        irls.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let cfg = SynthConfig {
            spec,
            sizes,
            iters: s.get("iters")?,
            trials: s.get("trials")?,
            algorithms: s.get_list("algorithms")?,
            l1_coder,
            prune: s.get("prune")?,
            irls,
            rank1: L1RankOneParams { passes: s.get("rank1_passes")?, ..Default::default() },
            workers: s.get("workers")?,
            out_dir: s.get("out_dir")?,
        };
        let rule = match cfg.prune {
            PruneSpec::None => None,
            PruneSpec::Absolute(v) | PruneSpec::FrobeniusFraction(v) => Some(PruneRule::AbsoluteThreshold(v)),
            PruneSpec::ColumnRelative(v) => Some(PruneRule::ColumnRelative(v)),
            PruneSpec::KeepFraction(v) => Some(PruneRule::KeepFraction(v)),
        };
        if let Some(rule) = rule {
            rule.validate().map_err(|e| CliError::Usage(format!("prune: {e}")))?;
        }
        if cfg.iters == 0 || cfg.trials == 0 || cfg.rank1.passes == 0 {
            return Err(CliError::Usage("iters, trials and rank1_passes must be ≥ 1".into()));
        }
        Ok(cfg)
    }

    /// Output directory for one training-set size: `out_dir` itself, or
    /// `out_dir/N{n}` when several sizes are swept.
    pub fn size_dir(&self, n: usize) -> PathBuf {
        if self.sizes.len() > 1 {
            self.out_dir.join(format!("N{n}"))
        } else {
            self.out_dir.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub n: usize,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
}

impl TrialResult {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("at least one iteration")
    }
}

/// Seeds of trial `t`: the instance uses `seed.derive(t)`, the learners'
/// initialization `seed.derive(t).derive(1)`.
pub fn trial_seeds(base: RngSeed, trial: usize) -> (RngSeed, RngSeed) {
    let s = base.derive(trial as u64);
    (s, s.derive(1))
}

pub fn run_trial(cfg: &SynthConfig, n: usize, trial: usize) -> anyhow::Result<Vec<TrialResult>> {
    let (data_seed, learn_seed) = trial_seeds(cfg.spec.seed, trial);
    let spec = SynthSpec { n, seed: data_seed, ..cfg.spec };
    let inst = generate_instance(&spec)?;
    let mut out = Vec::new();
    for &algorithm in &cfg.algorithms {
        let (coder, prune_rule) = match algorithm {
            Algorithm::Ksvd => (Coder::OmpSparsity(spec.s), None),
            Algorithm::L1Ksvd => {
                let coder = match cfg.l1_coder {
                    L1Coder::Constrained => Coder::IrlsConstrained((0..n).map(|c| norm1(inst.codes.column(c))).collect()),
                    L1Coder::Penalized(l) => Coder::IrlsPenalized(Lambda::Shared(l)),
                };
                let rule = match cfg.prune {
                    PruneSpec::None => None,
                    PruneSpec::Absolute(t) => Some(PruneRule::AbsoluteThreshold(t)),
                    PruneSpec::FrobeniusFraction(f) => Some(PruneRule::AbsoluteThreshold(f * frobenius(inst.codes.coeffs()))),
                    PruneSpec::ColumnRelative(f) => Some(PruneRule::ColumnRelative(f)),
                    PruneSpec::KeepFraction(f) => Some(PruneRule::KeepFraction(f)),
                };
                (coder, rule)
            }
        };
        let lc = LearnConfig {
            n_atoms: spec.k,
            outer_iters: cfg.iters,
            coder,
            prune_rule,
            irls: cfg.irls,
            rank1: cfg.rank1,
            seed: learn_seed,
        };
        let learned = learn(&inst.noisy, &lc, algorithm, Some(&inst.dictionary))
            .with_context(|| format!("{} on trial {trial} (N = {n})", algorithm.name()))?;
        out.push(TrialResult { n, trial, algorithm, records: learned.trace.records });
    }
    Ok(out)
}

/// Every trial of every size; trials of one size run concurrently on up to
/// `workers` threads (0 = all cores). Results are ordered by size, trial,
/// then algorithm regardless of scheduling.
pub fn run(cfg: &SynthConfig) -> anyhow::Result<Vec<TrialResult>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let jobs: Vec<(usize, usize)> = cfg.sizes.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let results: anyhow::Result<Vec<Vec<TrialResult>>> = pool.install(|| jobs.par_iter().map(|&(n, t)| run_trial(cfg, n, t)).collect());
    Ok(results?.into_iter().flatten().collect())
}

const TRACE_HEADER: [&str; 5] = ["iteration", "adr", "kappa", "l1_err", "l2_err"];

fn write_trace(path: &Path, rows: impl Iterator<Item = [f64; 5]>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        w.write_record([format!("{}", row[0] as usize), row[1].to_string(), row[2].to_string(), row[3].to_string(), row[4].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn record_row(r: &IterationRecord) -> [f64; 5] {
    [r.iteration as f64, r.adr.unwrap_or(f64::NAN), r.kappa.unwrap_or(f64::NAN), r.l1_err, r.l2_err]
}

/// Per-trial traces, trial-averaged traces, a summary of final values and
/// the manifest, for each size.
pub fn write_outputs(cfg: &SynthConfig, settings: &Settings, results: &[TrialResult]) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    fs::write(cfg.out_dir.join("manifest.txt"), settings.manifest())?;
    for &n in &cfg.sizes {
        let dir = cfg.size_dir(n);
        fs::create_dir_all(&dir)?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
        summary.write_record(["trial", "algorithm", "adr", "kappa", "l1_err", "l2_err", "unbracketed"])?;
        for &alg in &cfg.algorithms {
            let runs: Vec<&TrialResult> = results.iter().filter(|r| r.n == n && r.algorithm == alg).collect();
            for run in &runs {
                write_trace(&dir.join(format!("trial{}_{}.csv", run.trial, alg.name())), run.records.iter().map(record_row))?;
            }
            let mean = (0..cfg.iters).map(|i| {
                let mut acc = [0.0; 5];
                for run in &runs {
                    let row = record_row(&run.records[i]);
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                acc.map(|a| a / runs.len() as f64)
            });
            write_trace(&dir.join(format!("mean_{}.csv", alg.name())), mean)?;
        }
        for t in 0..cfg.trials {
            for &alg in &cfg.algorithms {
                let run = results.iter().find(|r| r.n == n && r.trial == t && r.algorithm == alg).expect("every trial ran");
                let last = run.last();
                summary.write_record([
                    t.to_string(),
                    alg.name().to_string(),
                    last.adr.unwrap_or(f64::NAN).to_string(),
                    last.kappa.unwrap_or(f64::NAN).to_string(),
                    last.l1_err.to_string(),
                    last.l2_err.to_string(),
                    last.unbracketed.to_string(),
                ])?;
            }
        }
        summary.flush()?;
    }
    Ok(())
}

/// Final ADR / κ per trial and their means, as a text table.
pub fn summary_table(cfg: &SynthConfig, results: &[TrialResult]) -> String {
    let mut out = String::new();
    for &n in &cfg.sizes {
        out.push_str(&format!("N = {n}\n{:<8}{:<10}{:>8}{:>10}\n", "trial", "algorithm", "ADR", "kappa"));
        for &alg in &cfg.algorithms {
            let runs: Vec<&TrialResult> = results.iter().filter(|r| r.n == n && r.algorithm == alg).collect();
            for r in &runs {
                out.push_str(&format!("{:<8}{:<10}{:>8.3}{:>10.4}\n", r.trial, alg.name(), r.last().adr.unwrap_or(f64::NAN), r.last().kappa.unwrap_or(f64::NAN)));
            }
            let k = runs.len() as f64;
            let adr = runs.iter().map(|r| r.last().adr.unwrap_or(f64::NAN)).sum::<f64>() / k;
            let kappa = runs.iter().map(|r| r.last().kappa.unwrap_or(f64::NAN)).sum::<f64>() / k;
            out.push_str(&format!("{:<8}{:<10}{:>8.3}{:>10.4}\n", "mean", alg.name(), adr, kappa));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prune_specs() {
        assert_eq!("none".parse::<PruneSpec>().unwrap(), PruneSpec::None);
        assert_eq!("fro:0.03".parse::<PruneSpec>().unwrap(), PruneSpec::FrobeniusFraction(0.03));
        assert_eq!("col:0.1".parse::<PruneSpec>().unwrap(), PruneSpec::ColumnRelative(0.1));
        assert!("col".parse::<PruneSpec>().is_err());
        assert!("max:0.1".parse::<PruneSpec>().is_err());
    }

    #[test]
    fn defaults_resolve() {
        let s = Settings::new("synth", DEFAULTS);
        let cfg = SynthConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.sizes, vec![1500]);
        assert_eq!(cfg.algorithms, vec![Algorithm::Ksvd, Algorithm::L1Ksvd]);
        assert_eq!(cfg.size_dir(1500), PathBuf::from("synth-out"));
    }

    #[test]
    fn sweep_uses_subdirectories() {
        let mut s = Settings::new("synth", DEFAULTS);
        s.set("n", "600,300,200").unwrap();
        let cfg = SynthConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.size_dir(300), PathBuf::from("synth-out/N300"));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for (k, v) in [("n", "10"), ("l1_coder", "lasso"), ("iters", "0"), ("algorithms", "rdl"), ("prune", "keep:2")] {
            let mut s = Settings::new("synth", DEFAULTS);
            s.set(k, v).unwrap();
            assert!(matches!(SynthConfig::from_settings(&s), Err(CliError::Usage(_))), "{k} = {v}");
        }
    }
}
