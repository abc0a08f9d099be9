use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stressnet::convergence::{self, REQUIRED_ORDER};
use stressnet::io::config::{parse_config, SimulationConfig};
use stressnet::oracle::{self, ORACLE_TOLERANCE};
use stressnet::scenario::{self, Scenario};
use stressnet::stepper::RunOutput;
use stressnet::Error;

/// Two-zone stressed/non-stressed crowd simulator.
#[derive(Parser)]
#[command(name = "stressnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes observables.csv and VTK snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "wc")]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run wc, sc1 and sc2 from the same initial data and compare them.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the solver against the homogeneous ODE on a uniform setup.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Also write oracle.csv and observables.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid self-convergence study, refining by 2 per level.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..=8))]
        levels: u32,
    },
}

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => EXIT_CONFIG,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_FAILED_CHECK,
    }
}

fn load(path: &Path) -> Result<SimulationConfig, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_CONFIG, format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, (u8, String)> {
    let fail = |e: Error| (exit_code(&e), e.to_string());
    match cmd {
        Command::Simulate {
            config,
            scenario,
            out,
        } => {
            let cfg = load(&config)?;
            let run = scenario::run_scenario(&cfg, scenario, Some(&out)).map_err(fail)?;
            println!("scenario {scenario}: {} steps to t={}", run.steps, run.last().t);
            summarize(&run);
            Ok(0)
        }
        Command::Compare { config, out } => {
            let cfg = load(&config)?;
            let cmp = scenario::compare(&cfg, Some(&out)).map_err(fail)?;
            for (s, run) in Scenario::ALL.iter().zip(&cmp.runs) {
                let r = run.last();
                println!("{s}: t={} M_P={:.6e} M_P2={:.6e}", r.t, r.m_p, r.m_p2);
            }
            for v in cmp.verdicts() {
                println!("{v}");
            }
            Ok(0)
        }
        Command::Oracle { config, out } => {
            let cfg = load(&config)?;
            let report = oracle::check(&cfg).map_err(fail)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| {
                    fail(Error::Io {
                        path: dir.clone(),
                        source: e,
                    })
                })?;
                oracle::write_trajectory(&dir.join("oracle.csv"), &report.trajectory).map_err(fail)?;
                stressnet::io::csv::write_observables(&dir.join("observables.csv"), &report.records)
                    .map_err(fail)?;
            }
            let d = report.deviation;
            println!(
                "pde dt {:e}, oracle dt {:e}; max relative deviation {:.3e} ({} at t={})",
                report.pde_dt, report.oracle_dt, d.max_relative, d.quantity, d.t
            );
            if d.passes() {
                println!("PASS: deviation <= {ORACLE_TOLERANCE:e}");
                Ok(0)
            } else {
                println!("FAIL: deviation > {ORACLE_TOLERANCE:e}");
                Ok(EXIT_FAILED_CHECK)
            }
        }
        Command::Convergence { config, levels } => {
            let cfg = load(&config)?;
            let report = convergence::study(&cfg, levels as usize).map_err(fail)?;
            println!(
                "level  grid       dt           M_P1(t_end)             |M_P1 - finest|   L1 diff to next"
            );
            for (k, l) in report.levels.iter().enumerate() {
                let err = report
                    .mass_errors
                    .get(k)
                    .map(|e| format!("{e:.3e}"))
                    .unwrap_or_else(|| "-".into());
                let diff = report
                    .differences
                    .get(k)
                    .map(|e| format!("{e:.3e}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{k:<6} {:<10} {:<12.4e} {:<23.16e} {err:<17} {diff}",
                    format!("{}x{}", l.nx, l.ny),
                    l.dt,
                    l.terminal_m_p1
                );
            }
            for (k, p) in report.orders.iter().enumerate() {
                println!("observed order, levels {k}-{}: {p:.3}", k + 2);
            }
            let p = report.observed_order();
            if p >= REQUIRED_ORDER {
                println!("PASS: order {p:.3} >= {REQUIRED_ORDER}");
                Ok(0)
            } else {
                println!("FAIL: order {p:.3} < {REQUIRED_ORDER}");
                Ok(EXIT_FAILED_CHECK)
            }
        }
    }
}

fn summarize(run: &RunOutput) {
    let r = run.last();
    let drift = run
        .records
        .iter()
        .map(|x| (x.v - run.records[0].v).abs())
        .fold(0.0, f64::max);
    let min = run
        .records
        .iter()
        .map(|x| x.min_val)
        .fold(f64::INFINITY, f64::min);
    println!(
        "M_P1={:.6e} M_N1={:.6e} M_P2={:.6e} M_N2={:.6e} V={:.15}",
        r.m_p1, r.m_n1, r.m_p2, r.m_n2, r.v
    );
    println!("max |V - V0| = {drift:.3e}, min density = {min:.3e}");
    if run.max_total_density > 1.0 {
        println!(
            "note: density reached {:.3} > 1; walking speed was clamped at zero there",
            run.max_total_density
        );
    }
}
