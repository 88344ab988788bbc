//! Batch driver: load a config and potential, run the pipeline, write
//! reports and sampled fields.

mod commands;
mod config;
mod potential;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{parse_tolerance, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "superdpw", version, about = "Superharmonic maps from holomorphic potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    extent: Option<f64>,
    /// Loop truncation order N.
    #[arg(long)]
    truncation: Option<usize>,
    /// Number of Grassmann generators L.
    #[arg(long)]
    generators: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override, repeatable: `--tol superharmonic=1e-7`.
    #[arg(long = "tol", value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            nx: self.nx,
            ny: self.ny,
            extent: self.extent,
            truncation: self.truncation,
            generators: self.generators,
            seed: self.seed,
            tolerances: self.tolerances.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline and check every residual against its tolerance.
    Run {
        config: PathBuf,
        /// Also write frame.json, frame.csv and (sphere models) target.csv.
        #[arg(long)]
        emit_fields: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        over: OverrideArgs,
    },
    /// Re-run the frame residual checks on a saved frame file.
    Verify {
        frame: PathBuf,
        /// Config supplying tolerances and the boundary margin.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        margin: usize,
        #[arg(long = "tol", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
    },
    /// Truncation (N, 2N) and grid (h, h/2) convergence study.
    Convergence {
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        over: OverrideArgs,
    },
}

fn load(path: &PathBuf, over: &OverrideArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&over.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn exit(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, emit_fields, report, over } => {
            let cfg = load(&config, &over)?;
            let out = commands::cmd_run(&cfg, emit_fields, report)?;
            commands::print_checks(&out.report.checks);
            println!("report: {}", out.report_path.display());
            if !out.report.passed {
                eprintln!("failed: {}", out.report.failed.join(", "));
            }
            Ok(exit(out.report.passed))
        }
        Command::Verify { frame, config, report, margin, tolerances } => {
            let (mut tol, margin) = match config {
                Some(p) => {
                    let cfg = load(&p, &OverrideArgs::default())?;
                    (cfg.tolerance_table(), cfg.margin.max(margin))
                }
                None => (superdpw::verify::default_tolerances(), margin),
            };
            tol.extend(tolerances);
            let rep = commands::cmd_verify(&frame, margin, &tol)?;
            commands::print_checks(&rep.checks);
            if let Some(p) = report {
                commands::save(&p, &rep)?;
            }
            if !rep.passed {
                eprintln!("failed: {}", rep.failed.join(", "));
            }
            Ok(exit(rep.passed))
        }
        Command::Convergence { config, report, over } => {
            let cfg = load(&config, &over)?;
            let out = commands::cmd_convergence(&cfg)?;
            let c = &out.convergence;
            println!("truncation N={} vs {}: drift {:.3e}", c.truncations[0], c.truncations[1], c.truncation_drift);
            println!("grid {} vs {}: residual {:.3e} -> {:.3e}, observed order {:.2}{}", c.grid_sizes[0], c.grid_sizes[1], c.fd_residuals[0], c.fd_residuals[1], c.observed_order, if out.exact { " (exact)" } else { "" });
            let path = report.unwrap_or_else(|| cfg.output_dir.join("convergence.json"));
            commands::save(&path, &out)?;
            Ok(exit(out.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
