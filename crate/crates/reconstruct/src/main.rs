//! Command-line front end for the reconstruction pipeline.
//!
//! Exit codes: 0 on success, 1 on a stage failure, 2 on a config error.
//! Set `RUST_LOG=info` (or `debug`) for progress logging.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reconstruct::pipeline::{self, BenchSuite, PipelineConfig, PipelineError};
use reconstruct::pointcloud::{self, NoiseSpec};

#[derive(Parser)]
#[command(name = "reconstruct", version, about = "Surface reconstruction from noisy point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a benchmark suite and write a CSV of per-config metrics.
    Bench {
        /// Suite file: a TOML list of `[[run]]` configs.
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Also run boundary/mesh stages per row (default measures the
        /// network output error only, as the comparison tables do).
        #[arg(long)]
        full: bool,
    },
    /// Generate a synthetic cloud and write it as XYZ text.
    Gen {
        #[arg(long, value_enum)]
        shape: Shape,
        /// Gaussian noise standard deviation (world units).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Shape {
    Torus,
    Scurve,
    Cone,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PipelineError::Config(_) => ExitCode::from(2),
                PipelineError::Stage { .. } => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let artifacts = pipeline::run(&cfg)?;
            let m = &artifacts.metrics;
            println!(
                "{}: {} points, topology {}, mse {:.6}, {:.2}s",
                m.dataset, m.points, m.neurons, m.mse, m.seconds
            );
            if let Some(dir) = &cfg.output_dir {
                println!("artifacts written to {}", dir.display());
            }
            Ok(())
        }
        Command::Bench { suite, csv, full } => {
            let suite = BenchSuite::load(&suite)?;
            if suite.run.is_empty() {
                return Err(PipelineError::Config("suite has no [[run]] entries".into()));
            }
            let rows = pipeline::benchmark(&suite.run, full);
            std::fs::write(&csv, pipeline::benchmark_csv(&rows)).map_err(|e| {
                PipelineError::Stage {
                    stage: "output",
                    message: format!("{}: {e}", csv.display()),
                    hint: "",
                }
            })?;
            print!("{}", pipeline::benchmark_table(&rows));
            if rows.iter().all(|r| r.error.is_some()) {
                return Err(PipelineError::Stage {
                    stage: "bench",
                    message: "every row failed".into(),
                    hint: "see the table above",
                });
            }
            Ok(())
        }
        Command::Gen { shape, noise, out, seed } => {
            let (cloud, _) = match shape {
                Shape::Torus => pointcloud::gen_torus(
                    2.0,
                    1.0,
                    (0.0, std::f64::consts::FRAC_PI_2),
                    (0.0, std::f64::consts::FRAC_PI_2),
                    10,
                    10,
                ),
                Shape::Scurve => pointcloud::gen_scurve(400, seed),
                Shape::Cone => pointcloud::gen_cone(6),
            }
            .map_err(|e| PipelineError::Stage {
                stage: "dataset",
                message: e.to_string(),
                hint: "",
            })?;
            let cloud = if noise > 0.0 {
                pointcloud::add_noise(&cloud, &NoiseSpec { sigma: noise, seed })
            } else {
                cloud
            };
            pointcloud::save_xyz(&cloud, &out).map_err(|e| PipelineError::Stage {
                stage: "output",
                message: format!("{}: {e}", out.display()),
                hint: "",
            })?;
            println!("{} points written to {}", cloud.len(), out.display());
            Ok(())
        }
    }
}
