use std::path::PathBuf;
use std::process::ExitCode;

use augury_core::config::{self, Overrides};
use augury_core::run::{self, RunSummary};
use augury_core::toy1d;
use augury_core::{ContactLaw, Error, TransferMode};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "augury",
    version,
    about = "Grid-transfer contact for explicit finite element dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario described by a configuration file.
    Run {
        /// Configuration file (same as --config).
        #[arg(value_name = "CONFIG", conflicts_with = "config")]
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TransferMode>,
        #[arg(long, value_parser = parse_law)]
        law: Option<ContactLaw>,
        #[arg(long)]
        mu: Option<f64>,
        /// Augury iterations.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Integrate the two-particle model for each τ and report the rest state.
    Toy1d {
        #[arg(value_parser = parse_mode)]
        mode: TransferMode,
        /// Augury times; defaults to the standard sweep.
        taus: Vec<f64>,
        #[arg(long, default_value_t = toy1d::DEFAULT_END_TIME)]
        end_time: f64,
        /// Write one CSV per τ into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Verify,
}

fn parse_mode(s: &str) -> Result<TransferMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_law(s: &str) -> Result<ContactLaw, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit codes: 0 success, 1 invalid input or I/O, 2 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn run_config(path: PathBuf, overrides: Overrides) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let cfg = config::parse_config_with(&text, &overrides)?;
    log::info!("running {} into {}", cfg.scenario.name(), cfg.output_dir.display());
    match run::execute(&cfg)? {
        RunSummary::Mesh {
            steps,
            first,
            last,
            snapshots,
        } => {
            let e0 = first.energies.total();
            println!("steps: {steps}, snapshots: {snapshots}");
            println!(
                "energy: {:.6e} -> {:.6e} ({:.2}% retained)",
                e0,
                last.energies.total(),
                100.0 * last.energies.total() / e0
            );
            let p = (last.linear_momentum - first.linear_momentum).norm();
            let l = (last.angular_momentum - first.angular_momentum).norm();
            println!("momentum change: linear {p:.3e}, angular {l:.3e}");
            if last.min_gap.is_finite() {
                println!("final gap: {:.6e}", last.min_gap);
            }
        }
        RunSummary::Toy(trajectories) => print_toy(&trajectories),
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn print_toy(trajectories: &[toy1d::ToyTrajectory]) {
    for tr in trajectories {
        let s = tr.last();
        println!(
            "{} tau={}: t={:.4} x={:.6e} v={:.6e} B={:.6e}",
            tr.mode, tr.tau, s.t, s.x, s.v, s.b
        );
    }
}

fn run_toy(mode: TransferMode, taus: Vec<f64>, end_time: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    let taus = if taus.is_empty() {
        toy1d::DEFAULT_TAUS.to_vec()
    } else {
        taus
    };
    let mut failure = None;
    let mut done = Vec::new();
    for tau in taus {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")).into());
        }
        let tr = toy1d::integrate_toy(toy1d::ToyState::approach(tau), mode, end_time, toy1d::default_dt(tau))?;
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(run::toy_file_name(&tr));
            tr.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        }
        if tr.unstable && failure.is_none() {
            failure = Some(tr.clone());
        }
        done.push(tr);
    }
    print_toy(&done);
    if let Some(tr) = failure {
        let s = *tr.last();
        eprintln!(
            "instability: tau={} left the cell at t={:.4} (|x|={:.3e})",
            tr.tau,
            s.t,
            s.x.abs()
        );
        tr.check()?;
    }
    Ok(())
}

fn verify() -> anyhow::Result<bool> {
    let mut all = true;
    for c in augury_core::verify::run_all()? {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // malformed arguments are validation errors like a bad config
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            path,
            config,
            out,
            mode,
            law,
            mu,
            iters,
        } => match path.or(config) {
            Some(path) => run_config(
                path,
                Overrides {
                    mode,
                    law,
                    mu,
                    iterations: iters,
                    output_dir: out,
                },
            ),
            None => Err(anyhow::anyhow!(
                "a configuration file is required (run <CONFIG> or --config <CONFIG>)"
            )),
        },
        Command::Toy1d {
            mode,
            taus,
            end_time,
            out,
        } => run_toy(mode, taus, end_time, out),
        Command::Verify => match verify() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
