use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use targetpoint::gains::{check_conditions, GainSet};
use targetpoint::lyapunov::{positivity_grid, vdot_check};
use targetpoint::scenario::gains_block;
use targetpoint::{run, synthesize_gains, Error, Scenario, TrajectoryLog};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "targetpoint",
    version,
    about = "Saturated target-point path following: simulation, gain conditions, Lyapunov checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` applied after the file, last one wins.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check or synthesize controller gains.
    #[command(subcommand)]
    Gains(GainsCommand),
    /// Positivity grids and trajectory checks for the Lyapunov function.
    #[command(subcommand)]
    Lyapunov(LyapunovCommand),
}

#[derive(Subcommand)]
enum GainsCommand {
    /// Evaluate every stability condition for the scenario's gains.
    Check {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Build a gain set satisfying the conditions for fixed C0 and C2.
    Synth {
        #[arg(long)]
        d: f64,
        #[arg(long = "kappa-max")]
        kappa_max: f64,
        #[arg(long)]
        c0: f64,
        #[arg(long)]
        c2: f64,
    },
}

#[derive(Subcommand)]
enum LyapunovCommand {
    /// Sweep the decrease bounds A and B over [-Y, Y] x ]-2rho, 2rho[.
    Grid {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long = "y-range", default_value_t = 10.0)]
        y_range: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Check trapping and decrease of V along a logged run.
    Trace {
        #[arg(long)]
        log: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, out, overrides } => simulate(&scenario, &out, &overrides),
        Command::Gains(GainsCommand::Check { scenario }) => gains_check(&scenario),
        Command::Gains(GainsCommand::Synth { d, kappa_max, c0, c2 }) => gains_synth(d, kappa_max, c0, c2),
        Command::Lyapunov(LyapunovCommand::Grid { scenario, points, y_range, tol }) => {
            lyapunov_grid(&scenario, points, y_range, tol)
        }
        Command::Lyapunov(LyapunovCommand::Trace { log }) => lyapunov_trace(&log),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NumericalAbort { .. }) => EXIT_ABORT,
        Some(Error::InvalidParameter(_) | Error::CurvatureBound { .. } | Error::Infeasible(_)) => EXIT_VALIDATION,
        _ => EXIT_USAGE,
    }
}

fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    Scenario::parse_with_overrides(&text, overrides).with_context(|| format!("in {}", path.display()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or("none".to_string(), |v| format!("{v:.3}"))
}

fn simulate(scenario: &Path, out: &Path, overrides: &[String]) -> Result<u8> {
    let sc = load_scenario(scenario, overrides)?;
    let output = run(&sc)?;
    let file = File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = BufWriter::new(file);
    output.log.write_csv(&mut w)?;
    w.flush().with_context(|| format!("cannot write {}", out.display()))?;

    let s = &output.summary;
    println!("t_conv = {} s", opt(s.t_conv));
    println!("t0 = {} s", opt(s.t0));
    println!(
        "gains = {}{}",
        if s.gains_pass { "pass" } else { "fail" },
        if s.gain_failures.is_empty() { String::new() } else { format!(" ({})", s.gain_failures.join(", ")) }
    );
    println!("max |d*omega| = {:.6}", s.max_abs_d_omega);
    for (k, v) in s.lines() {
        println!("{k} = {v}");
    }
    println!("wrote {} ({} rows)", out.display(), output.log.records.len());
    Ok(EXIT_OK)
}

fn gains_check(scenario: &Path) -> Result<u8> {
    let sc = load_scenario(scenario, &[])?;
    let report = check_conditions(&sc.gains)?;
    print!("{report}");
    for line in report.key_value_lines() {
        println!("{line}");
    }
    if report.passed() {
        println!("verdict: pass");
        Ok(EXIT_OK)
    } else {
        let mut failures: Vec<&str> =
            report.entries.iter().filter(|e| !e.pass && !e.informational).map(|e| e.name).collect();
        failures.dedup();
        for e in report.entries.iter().filter(|e| !e.pass && !e.informational) {
            println!("FAIL {}: {} ({:e} vs {:e})", e.name, e.clause, e.lhs, e.rhs);
        }
        println!("verdict: fail ({})", failures.join(", "));
        Ok(EXIT_VALIDATION)
    }
}

fn gains_synth(d: f64, kappa_max: f64, c0: f64, c2: f64) -> Result<u8> {
    let g = synthesize_gains(d, kappa_max, c0, c2)?;
    let report = check_conditions(&g)?;
    println!("# synthesized for vehicle.d = {d}, path.kappa_max = {kappa_max}");
    print!("{}", gains_block(&g));
    println!("# beta_M = {:.6}, Cond4 bound = {:.6e}", report.beta_m, report.cond4_bound);
    Ok(EXIT_OK)
}

fn lyapunov_grid(scenario: &Path, points: usize, y_range: f64, tol: f64) -> Result<u8> {
    let sc = load_scenario(scenario, &[])?;
    let r = positivity_grid(&sc.gains, points, points, y_range, tol)?;
    println!("grid = {}x{} over [-{y_range}, {y_range}] x ]-2rho, 2rho[, tol = {tol:e}", r.points_y, r.points_xi);
    println!("min A = {:.6e} at (y1, xi) = ({:.6}, {:.6})", r.min_a, r.min_a_at.0, r.min_a_at.1);
    println!("min B = {:.6e} at (y2, xi) = ({:.6}, {:.6})", r.min_b, r.min_b_at.0, r.min_b_at.1);
    println!("negative points: A = {}, B = {}", r.negative_a, r.negative_b);
    println!("zero points off the origin: A = {}, B = {}", r.zero_off_origin_a, r.zero_off_origin_b);
    if r.positive_definite() {
        println!("verdict: pass");
        Ok(EXIT_OK)
    } else {
        println!("verdict: fail");
        Ok(EXIT_VALIDATION)
    }
}

fn gains_from_log(log: &TrajectoryLog) -> Result<GainSet> {
    let get = |k: &str| -> Result<f64> {
        let v = log.meta(k).ok_or_else(|| Error::MalformedLog(format!("trailer lacks {k}")))?;
        Ok(v.parse::<f64>().map_err(|_| Error::MalformedLog(format!("{k} = {v} is not a number")))?)
    };
    let g = GainSet {
        c0: get("gains.c0")?,
        c1: get("gains.c1")?,
        c2: get("gains.c2")?,
        m: get("gains.m")?,
        n: get("gains.n")?,
        beta: get("gains.beta")?,
        rho: get("gains.rho")?,
        d: get("vehicle.d")?,
        kappa_max: get("path.kappa_max")?,
    };
    g.validate()?;
    Ok(g)
}

fn lyapunov_trace(path: &Path) -> Result<u8> {
    let file = File::open(path).with_context(|| format!("cannot open log {}", path.display()))?;
    let log = TrajectoryLog::read_csv(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
    let g = gains_from_log(&log)?;
    let r = vdot_check(&log, &g)?;
    println!("t0 = {}", opt(r.t0));
    println!("post-t0 steps = {}", r.post_t0_samples);
    println!("trap violations = {}", r.trap_violations);
    println!("saturated u2 steps after t0 = {}", r.saturation_active);
    println!("V(t0) = {:.6e}, V(end) = {:.6e}, ratio = {:.3e}", r.v_t0, r.v_end, r.decay_ratio());
    println!("V increases = {} (max {:.3e})", r.monotone_violations, r.max_increase);
    println!("Vdot > -A-B steps = {}", r.decrease_violations);
    if let Some(v) = &r.first_decrease_violation {
        println!("first bound violation: {v:?}");
    }
    println!("max |Vdot - centred difference| = {:.3e} over {} steps", r.max_fd_gap, r.fd_samples);
    if r.clean() {
        println!("verdict: pass");
        Ok(EXIT_OK)
    } else {
        println!("verdict: fail");
        Ok(EXIT_VALIDATION)
    }
}
