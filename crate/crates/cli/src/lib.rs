//! Command-line front end for the dictionary-learning experiments.

pub mod config;
pub mod denoise;
pub mod synth;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "l1ksvd", version, about = "ℓ1-K-SVD and K-SVD dictionary learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dictionary recovery on synthetic data, K-SVD vs ℓ1-K-SVD.
    Synth(SynthArgs),
    /// Denoise an image with a dictionary learned on its own patches.
    Denoise(DenoiseArgs),
    /// Write a noisy copy of an image.
    Addnoise(AddnoiseArgs),
    /// PSNR and SSIM between two images.
    Metrics(MetricsArgs),
}

macro_rules! flags {
    ($(#[$meta:meta])* $name:ident { $($field:ident),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Args)]
        pub struct $name {
            /// `key = value` file; flags override it.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                #[arg(long)]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            fn flags(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$((stringify!($field), self.$field.clone())),*]
            }
        }
    };
}

flags!(SynthArgs { m, k, s, n, snr_db, noise, iters, trials, seed, algorithms, l1_coder, lambda, prune, irls_iters, irls_tol, rank1_passes, workers, out_dir });
flags!(DenoiseArgs { input, noisy, sigma, noise, seed, backend, lambda, n_p, patch, stride, atoms, iters, irls_iters, remove_mean, clamp_input, out_dir });
flags!(AddnoiseArgs { input, output, sigma, noise, seed });
flags!(MetricsArgs { reference, test });

fn resolve(command: &'static str, defaults: &[(&'static str, &str)], config: &Option<PathBuf>, flags: Vec<(&str, Option<String>)>) -> Result<Settings, CliError> {
    let mut s = Settings::new(command, defaults);
    if let Some(path) = config {
        s.load_file(path)?;
    }
    s.apply_flags(flags)?;
    Ok(s)
}

pub fn synth_settings(args: &SynthArgs) -> Result<Settings, CliError> {
    resolve("synth", synth::DEFAULTS, &args.config, args.flags())
}

pub fn denoise_settings(args: &DenoiseArgs) -> Result<Settings, CliError> {
    resolve("denoise", denoise::DEFAULTS, &args.config, args.flags())
}

/// Run one parsed command, printing its report to stdout.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => {
            let settings = synth_settings(&args)?;
            let cfg = synth::SynthConfig::from_settings(&settings)?;
            let results = synth::run(&cfg)?;
            synth::write_outputs(&cfg, &settings, &results)?;
            print!("{}", synth::summary_table(&cfg, &results));
        }
        Command::Denoise(args) => {
            let settings = denoise_settings(&args)?;
            let cfg = denoise::DenoiseConfig::from_settings(&settings)?;
            let rows = denoise::run(&cfg, &settings)?;
            print!("{}", denoise::report(&rows));
        }
        Command::Addnoise(args) => {
            let settings = resolve("addnoise", denoise::ADDNOISE_DEFAULTS, &args.config, args.flags())?;
            let p = denoise::addnoise(&settings)?;
            println!("PSNR {p:.2} dB");
        }
        Command::Metrics(args) => {
            let settings = resolve("metrics", denoise::METRICS_DEFAULTS, &args.config, args.flags())?;
            let (p, s) = denoise::metrics(&settings)?;
            println!("PSNR {p:.2} dB  SSIM {s:.4}");
        }
    }
    Ok(())
}

/// Parse and run; returns the process exit code. Help and version requests
/// exit 0, malformed command lines 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
