//! Command-line front end. Exit codes: 0 success, 1 no feasible solution
//! (or a failed self-test), 2 usage, configuration or I/O error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    gen_traffic, load_scenario, render, run_experiment, write_atomic, ExperimentSpec, Metadata,
    DEFAULT_THETA,
};
use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::optimizer::{scheme, SolveResult};
use crate::schedule::{decompose, lasers, max_line_sum, varphi};
use crate::waterfill::TrafficMatrix;

#[derive(Debug, Parser)]
#[command(name = "tsnopt", version, about = "Energy-efficiency optimization for balloon-relayed satellite networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one scenario and print the solution with its energy breakdown.
    Solve(SolveArgs),
    /// Run a parameter sweep and write one row per cell.
    Sweep(SweepArgs),
    /// Print the traffic split and schedule plan of a solution.
    Schedule(SolveArgs),
    /// Check the schedule pipeline against a hand-computed example.
    Selftest,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Comma list of scheme ids (1 joint, 2 fixed alpha, 3 single orbit).
    #[arg(long, default_value = "1")]
    schemes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper end of the uniform traffic entries (bits).
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Spec file with the same keys as the flags; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// n_max, S, theta, beta_max or none.
    #[arg(long)]
    axis: Option<String>,
    /// Comma list of numbers or inclusive ranges such as `1..20`.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(&a, false, out),
        Command::Schedule(a) => solve(&a, true, out),
        Command::Sweep(a) => sweep(&a, out, err),
        Command::Selftest => return selftest(out),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::NotConverged(_) => 1,
        _ => 2,
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn solve(a: &SolveArgs, with_schedule: bool, out: &mut dyn Write) -> Result<()> {
    let sc = match &a.scenario {
        Some(p) => load_scenario(p)?,
        None => Scenario::table_one(),
    };
    let schemes = super::parse_schemes(&a.schemes)?;
    let traffic = gen_traffic(sc.satellites, a.theta, a.seed)?;
    // report every scheme before failing on the first infeasible one
    let mut first_error = None;
    for s in schemes {
        match scheme(&sc, &traffic, s) {
            Ok(r) => {
                let text = if with_schedule {
                    schedule_text(&sc, &r)?
                } else {
                    solution_text(&r)
                };
                out.write_all(text.as_bytes()).map_err(io)?;
            }
            Err(e) => {
                writeln!(out, "scheme {}\nstatus = {e}\n", s.id()).map_err(io)?;
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

/// Text report of a solution, one `key = value` per line.
pub fn solution_text(r: &SolveResult) -> String {
    let mut s = String::new();
    let e = &r.energy;
    let phi: Vec<String> = r.vars.phi_prime.iter().map(|p| p.to_string()).collect();
    let lines = [
        ("efficiency_bits_per_J", r.efficiency.to_string()),
        ("n0", r.vars.n0.to_string()),
        ("m_bar", r.m_bar.to_string()),
        ("alpha", r.vars.alpha.to_string()),
        ("k_star", r.vars.k_star.to_string()),
        ("phi", phi.join(" ")),
        ("t_max", r.t_max.to_string()),
        ("objective_truncated", r.objective.to_string()),
        ("objective_exact", r.exact_objective.to_string()),
        ("energy_caching_J", e.caching.to_string()),
        ("energy_computing_J", e.computing.to_string()),
        ("energy_ground_tx_J", e.ground_tx.to_string()),
        ("energy_balloon_tx_J", e.balloon_tx.to_string()),
        ("energy_satellite_tx_J", e.satellite_tx.to_string()),
        ("energy_laser_static_J", e.laser_static.to_string()),
        ("energy_laser_dynamic_J", e.laser_dynamic.to_string()),
        ("energy_laser_launch_J", e.laser_launch.to_string()),
        ("energy_total_J", e.total.to_string()),
        ("throughput_bits", e.throughput.to_string()),
        ("min_slack", r.constraints.min_slack().to_string()),
    ];
    let _ = writeln!(s, "scheme {}", r.scheme.id());
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push('\n');
    s
}

fn schedule_text(sc: &Scenario, r: &SolveResult) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "scheme {}", r.scheme.id());
    let _ = writeln!(s, "stm-set k_star {}", r.stms.k_star);
    for (v, (m, h)) in r.stms.stms.iter().zip(&r.stms.heights).enumerate() {
        let _ = writeln!(s, "stm {} height {h} total {}", v + 1, m.total());
        for row in m.rows() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "  {}", cells.join(" "));
        }
    }
    s.push_str(&r.plan(sc, true)?.to_text());
    s.push('\n');
    Ok(s)
}

fn sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(p) = &a.scenario {
        spec.scenario = Some(p.clone());
    }
    let flags = [
        ("axis", a.axis.clone()),
        ("values", a.values.clone()),
        ("schemes", a.schemes.clone()),
        ("format", a.format.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            spec.set(k, &v)?;
        }
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.reps {
        spec.reps = v;
    }
    if let Some(v) = a.theta {
        spec.theta = v;
    }
    if let Some(p) = &a.out {
        spec.out = Some(p.clone());
    }
    let rows = run_experiment(&spec)?;
    let bytes = render(spec.format, &Metadata::for_spec(&spec), &rows)?;
    match &spec.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => out.write_all(&bytes).map_err(io)?,
    }
    let failed = rows.iter().filter(|r| !r.feasible).count();
    if failed > 0 {
        let _ = writeln!(err, "{failed} of {} cells have no feasible solution", rows.len());
    }
    Ok(())
}

/// One self-test comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub expected: f64,
    pub got: f64,
    pub pass: bool,
}

fn check(name: &'static str, expected: f64, got: f64) -> Check {
    let pass = (got - expected).abs() <= 1e-12 * expected.abs();
    Check { name, expected, got, pass }
}

/// Four satellites, 4e9 bps lasers, 2 s overhead, 1000 s relay window,
/// seven schedules and a busiest line of 1.8e10 bits.
pub fn selftest_checks() -> Result<Vec<Check>> {
    let a = TrafficMatrix::from_rows(&[
        vec![0.0, 6e9, 4e9, 8e9],
        vec![5e9, 0.0, 9e9, 2e9],
        vec![7e9, 3e9, 0.0, 1e9],
        vec![6e9, 6e9, 3e9, 0.0],
    ])?;
    let bit_time = 1.0 / 4e9;
    let atilde = max_line_sum(&a);
    let coeff = varphi(atilde, 7, 4, 1.0)?;
    let count = lasers(atilde, 7, 4, 1.0, bit_time, 2.0, 1.0, 1000.0)?;
    let mats = decompose(&a, 7, 1.0)?;
    Ok(vec![
        check("busiest line (bits)", 1.8e10, atilde),
        check("bit time (s/bit)", 0.25e-9, bit_time),
        check("schedule payload (bits)", 6e9, coeff),
        check("transmission per schedule (s)", 1.5, bit_time * coeff),
        check("lasers, real", 0.0245, count.real),
        check("lasers, rounded", 1.0, count.count as f64),
        Check {
            name: "configuration matrices <= 7",
            expected: 7.0,
            got: mats.len() as f64,
            pass: mats.len() <= 7,
        },
    ])
}

fn selftest(out: &mut dyn Write) -> i32 {
    let checks = match selftest_checks() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "FAIL selftest: {e}");
            return 1;
        }
    };
    let mut ok = true;
    for c in &checks {
        ok &= c.pass;
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{tag} {}: expected {:e}, got {:e}", c.name, c.expected, c.got);
    }
    if ok {
        0
    } else {
        1
    }
}
