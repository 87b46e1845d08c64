use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaugesim::cli::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "gaugesim",
    about = "Qudit state-vector simulator for D3 lattice gauge dynamics with \
             gauge-symmetry error mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured ensembles and write per-mode CSV series.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides RAYON_NUM_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Structural self-checks; exits nonzero on any failure.
    Verify,
    /// Monte-Carlo calibration of the unitary noise strength.
    NoiseCalibrate {
        /// Reads gamma and the system size from a run config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gate counts and circuit listings for the compiled step and DPS checks.
    CompileReport {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> gaugesim::Result<()> {
    match out {
        Some(path) => cli::write_atomic(path, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run() -> gaugesim::Result<ExitCode> {
    let args = Cli::parse();
    match args.command {
        Command::Run {
            config,
            threads,
            seed,
            out,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| gaugesim::Error::Config(e.to_string()))?;
            }
            let cfg = ExperimentConfig::load(&config)?;
            let written = cli::cmd_run(&cfg, seed, &out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let ok = cli::cmd_verify(&mut std::io::stdout())?;
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::NoiseCalibrate {
            config,
            gamma,
            samples,
            seed,
            out,
        } => {
            let cfg = config.as_deref().map(ExperimentConfig::load).transpose()?;
            let gamma = gamma
                .or(cfg.as_ref().map(|c| c.noise.gamma))
                .ok_or_else(|| {
                    gaugesim::Error::Config("need --gamma or --config".into())
                })?;
            let dim = cfg
                .as_ref()
                .map(|c| 6usize.pow(2 * c.n_plaquettes as u32))
                .unwrap_or(1296);
            let cal = cli::cmd_noise_calibrate(gamma, dim, samples, seed)?;
            emit(out.as_ref(), &serde_json::to_string_pretty(&cal)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CompileReport { config, out } => {
            let (n, inv_g2, dt) = match config.as_deref().map(ExperimentConfig::load).transpose()? {
                Some(c) => (c.n_plaquettes, c.inv_g2, c.dt),
                None => (2, 0.5, 0.25),
            };
            let rep = cli::cmd_compile_report(n, inv_g2, dt)?;
            emit(out.as_ref(), &serde_json::to_string_pretty(&rep)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
