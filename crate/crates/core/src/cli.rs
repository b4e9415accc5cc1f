//! Command-line front end. The binary only forwards to [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::chain::FeasibilityReport;
use crate::error::{Error, Result};
use crate::io::{ResultFile, ScenarioFile};
use crate::outer::{minpic_solve, BisectionConfig, SearchMode, SolveReport};
use crate::reference::{
    brute_force_oracle, oma_total_power, tin_fixed_point, waterfill_total, GridSpec, OmaAccounting,
    TinOutcome,
};
use crate::reproduce::{reproduce_case, BenchCase, CSV_HEADER};
use crate::scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sicpower", version, about = "Minimum-power SIC allocation for interference channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    DualGuided,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exhaustive => SearchMode::Exhaustive,
            ModeArg::DualGuided => SearchMode::DualGuided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Oma,
    Tin,
    Waterfill,
    Grid,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario and print the power table.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: ModeArg,
        /// Overrides the scenario's rate factor.
        #[arg(long)]
        rate_factor: Option<f64>,
        /// Penalty bisection width.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Where to write the result file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute feasibility of a result file from its powers.
    Verify {
        scenario: PathBuf,
        result: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Comparison table of the built-in cases as CSV.
    Reproduce {
        #[arg(long = "case", default_value = "all")]
        case: String,
        #[arg(long, default_value_t = 1.0)]
        rate_factor: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference method output as CSV.
    Baseline {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        rate_factor: Option<f64>,
        #[arg(long, default_value_t = GridSpec::DEFAULT_POINTS)]
        grid_points: usize,
    },
    /// Brute-force grid oracle as CSV.
    Oracle {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "grid")]
        method: MethodArg,
        #[arg(long)]
        rate_factor: Option<f64>,
        #[arg(long, default_value_t = GridSpec::DEFAULT_POINTS)]
        grid_points: usize,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Solver(_) | Error::Numeric(_) | Error::Build(_) => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::Argument(format!("stdout: {e}")))
}

fn load(path: &Path, rate_factor: Option<f64>) -> Result<(Scenario, ScenarioFile)> {
    let file = ScenarioFile::parse(&read(path)?)?;
    let mut s = file.scenario()?;
    if let Some(rho) = rate_factor {
        s = s.with_rate_factor(rho)?;
    }
    Ok((s, file))
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Solve { scenario, mode, rate_factor, epsilon, out: path } => {
            let (s, file) = load(scenario, *rate_factor)?;
            let mut cfg = file.bisection_config()?;
            if let Some(eps) = epsilon {
                cfg.epsilon = *eps;
            }
            let mode = SearchMode::from(*mode);
            let rep = minpic_solve(&s, mode, &cfg)?;
            let result = ResultFile::from_report(&s, &rep, mode)?;
            if let Some(p) = path {
                write_file(p, &result.to_toml()?)?;
            }
            emit(out, &power_table(&s, &rep, &result))?;
            Ok(EXIT_OK)
        }
        Command::Verify { scenario, result, tol } => {
            let (s, _) = load(scenario, None)?;
            let r = ResultFile::parse(&read(result)?)?;
            let rep = r.verify(&s, *tol)?;
            emit(out, &margin_text(&s, &rep, *tol))?;
            Ok(if rep.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
        }
        Command::Reproduce { case, rate_factor, epsilon, out: path } => {
            let cases: Vec<BenchCase> = if case.eq_ignore_ascii_case("all") {
                BenchCase::ALL.to_vec()
            } else {
                vec![case.parse()?]
            };
            let mut cfg = BisectionConfig::default();
            if let Some(eps) = epsilon {
                cfg.epsilon = *eps;
            }
            let mut csv = format!("{CSV_HEADER}\n");
            for c in cases {
                csv.push_str(&reproduce_case(c, *rate_factor, &cfg)?.csv_row());
                csv.push('\n');
            }
            if let Some(p) = path {
                write_file(p, &csv)?;
            }
            emit(out, &csv)?;
            Ok(EXIT_OK)
        }
        Command::Baseline { scenario, method, rate_factor, grid_points }
        | Command::Oracle { scenario, method, rate_factor, grid_points } => {
            let (s, _) = load(scenario, *rate_factor)?;
            emit(out, &baseline_csv(&s, *method, *grid_points)?)?;
            Ok(EXIT_OK)
        }
    }
}

/// CSV of one reference method: per-user powers in long form, then the total.
pub fn baseline_csv(s: &Scenario, method: MethodArg, grid_points: usize) -> Result<String> {
    let mut t = String::new();
    let per_user = |t: &mut String, name: &str, power: &[Vec<f64>], total: f64| {
        t.push_str("method,user,block,power\n");
        for (u, row) in power.iter().enumerate() {
            for (n, p) in row.iter().enumerate() {
                let _ = writeln!(t, "{name},{},{},{p:.6}", u + 1, n + 1);
            }
        }
        let _ = writeln!(t, "{name},total,,{total:.6}");
    };
    match method {
        MethodArg::Oma => {
            let total = oma_total_power(s, OmaAccounting::Average)?;
            let _ = writeln!(t, "method,user,block,power\noma,total,,{total:.6}");
        }
        MethodArg::Tin => match tin_fixed_point(s, 10_000, 1e-12)? {
            TinOutcome::Converged { power, .. } => {
                let total = power.iter().enumerate().map(|(u, p)| s.weight(u) * p.iter().sum::<f64>()).sum();
                per_user(&mut t, "tin", &power, total);
            }
            TinOutcome::Diverged { iterations } => {
                return Err(Error::Infeasible(format!(
                    "interference-as-noise iteration diverged after {iterations} steps"
                )))
            }
        },
        MethodArg::Waterfill => {
            let (total, power) = waterfill_total(s)?;
            per_user(&mut t, "waterfill", &power, total);
        }
        MethodArg::Grid => {
            let grid = GridSpec::for_scenario(s, grid_points)?;
            let o = brute_force_oracle(s, &grid)?;
            t.push_str("method,total,resolution_slack,evaluated,profile\n");
            let _ = writeln!(
                t,
                "grid,{:.6},{:.6},{},\"{}\"",
                o.best_total, o.resolution_slack, o.evaluated, o.best_profile
            );
        }
    }
    Ok(t)
}

/// Power grid per block: one row per user, one column per sub-user.
pub fn power_table(s: &Scenario, rep: &SolveReport, result: &ResultFile) -> String {
    let u = s.users();
    let mut t = String::new();
    let _ = writeln!(t, "Optimal Sub-User Power Allocations for U={u}");
    for n in 0..s.blocks() {
        if s.blocks() > 1 {
            let _ = writeln!(t, "Block {}", n + 1);
        }
        let _ = write!(t, "{:<6}", "User");
        for j in 0..u {
            let _ = write!(t, "{:>10}", format!("j={}", j + 1));
        }
        t.push('\n');
        for i in 0..u {
            let _ = write!(t, "{:<6}", i + 1);
            for j in 0..u {
                let _ = write!(t, "{:>10.2}", result.powers[i][j][n]);
            }
            t.push('\n');
        }
    }
    let rates: Vec<String> = result.rates.iter().map(|r| format!("{r:.3}")).collect();
    let _ = writeln!(t, "Rates: [{}]", rates.join(", "));
    let _ = writeln!(t, "Total: {:.4}", result.total);
    let _ = writeln!(t, "Profile: {}", rep.profile);
    if let Some(l) = rep.lambda {
        let _ = writeln!(t, "Lambda: {l:.6}");
    }
    t
}

fn margin_text(s: &Scenario, rep: &FeasibilityReport, tol: f64) -> String {
    let mut t = String::from("user,achieved,target,margin\n");
    for u in 0..s.users() {
        let _ = writeln!(
            t,
            "{},{:.6},{:.6},{:+.6e}",
            u + 1,
            rep.achieved[u],
            s.rate_min(u),
            rep.margin[u]
        );
    }
    let _ = writeln!(t, "{} at tol {tol:e}", if rep.feasible { "feasible" } else { "INFEASIBLE" });
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("sicpower").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["reproduce", "--case", "Z"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["solve", "/nonexistent/file.toml"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("reproduce"));
    }

    #[test]
    fn error_classes_map_to_codes() {
        assert_eq!(exit_code(&Error::Infeasible("x".into())), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::Solver("x".into())), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_USAGE);
    }
}
