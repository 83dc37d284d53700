//! Command-line front end. `main` only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 verification failure, 2 config or argument
//! error, 3 solver precondition error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use crate::analysis::bound_curves;
use crate::config::{load_instance, parse_json, read};
use crate::efficiency::{solve_gamma_star, EfficiencyKind};
use crate::equilibria::{self, EquilibriumOutcome, OutcomeKind};
use crate::error::Error;
use crate::format::fmt_g;
use crate::game::GameInstance;
use crate::sim::{write_csv, write_trial_csv, Sweep, SweepConfig};
use crate::verify::{run_verify, StackelbergSolver, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "carrier-game", version, about = "Two-user multi-carrier energy-efficiency game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    Nash,
    Stackelberg,
    Social,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Keyvalue,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        mode: SolveMode,
        #[arg(long, value_enum, default_value = "keyvalue")]
        format: Format,
        /// Build the Stackelberg ε-equilibrium with this ε instead.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run a Monte Carlo sweep and write aggregate CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per (trial, mode) to `<out>.trials.csv`.
        #[arg(long)]
        per_trial: bool,
    },
    /// Emit the analytic bound curves as CSV.
    #[command(group(ArgGroup::new("gamma").required(true).args(["m", "gamma_star"])))]
    Bounds {
        /// Block length of the exponential efficiency.
        #[arg(long = "M")]
        m: Option<u32>,
        #[arg(long)]
        gamma_star: Option<f64>,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 64)]
        k_max: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed-form solvers against oracles on sampled instances.
    Verify {
        #[arg(long, default_value_t = 300)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Domain(_) => EXIT_CONFIG,
        Error::Precondition(_) | Error::SolverFailure(_) => EXIT_PRECONDITION,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, out, err, equilibria::stackelberg_solve)
}

/// [`run`] with a replaceable Stackelberg solver for the `verify` command.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, solver: StackelbergSolver) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve { config, mode, format, epsilon } => solve(&config, mode, format, epsilon, out),
        Command::Sweep { config, out: path, per_trial } => sweep(&config, &path, per_trial, err),
        Command::Bounds { m, gamma_star, k_min, k_max, out: path } => bounds(m, gamma_star, k_min, k_max, path, out),
        Command::Verify { trials, seed } => {
            let opts = VerifyOptions { trials, seed, stackelberg: solver };
            run_verify(&opts).map(|report| {
                let _ = out.write_all(report.render().as_bytes());
                if report.all_passed() {
                    EXIT_OK
                } else {
                    EXIT_VERIFY_FAILED
                }
            })
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn solve(config: &Path, mode: SolveMode, format: Format, epsilon: Option<f64>, out: &mut dyn Write) -> crate::Result<i32> {
    let inst = load_instance(config)?;
    let mut outcomes: Vec<(&str, EquilibriumOutcome)> = Vec::new();
    if matches!(mode, SolveMode::Nash | SolveMode::All) {
        outcomes.push(("nash", equilibria::nash_solve(&inst)?));
    }
    if matches!(mode, SolveMode::Stackelberg | SolveMode::All) {
        let s = match epsilon {
            Some(eps) => equilibria::epsilon_equilibrium(&inst, eps)?,
            None => equilibria::stackelberg_solve(&inst)?,
        };
        outcomes.push(("stackelberg", s));
    }
    if matches!(mode, SolveMode::Social | SolveMode::All) {
        outcomes.push(("social", equilibria::social_optimum(&inst)?));
    }
    let text = match format {
        Format::Keyvalue => render_keyvalue(&inst, &outcomes),
        Format::Csv => render_csv(&outcomes),
    };
    out.write_all(text.as_bytes()).map_err(|e| Error::Config(e.to_string()))?;
    Ok(EXIT_OK)
}

fn carrier_label(c: Option<usize>) -> String {
    c.map_or_else(|| "none".into(), |k| (k + 1).to_string())
}

fn render_keyvalue(inst: &GameInstance, outcomes: &[(&str, EquilibriumOutcome)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "gamma_star={}", fmt_g(inst.gamma_star()));
    for (mode, o) in outcomes {
        let _ = writeln!(s, "[{mode}]");
        let _ = writeln!(s, "kind={}", o.kind.name());
        match o.kind {
            OutcomeKind::StackelbergEpsilon { epsilon, alpha } => {
                let _ = writeln!(s, "epsilon={}", fmt_g(epsilon));
                let _ = writeln!(s, "alpha={}", fmt_g(alpha));
            }
            OutcomeKind::NashShared { divergent } => {
                let _ = writeln!(s, "divergent={divergent}");
            }
            _ => {}
        }
        let _ = writeln!(
            s,
            "carriers=({},{})",
            carrier_label(o.users[0].carrier),
            carrier_label(o.users[1].carrier)
        );
        let pair = |f: fn(&crate::UserOutcome) -> f64| format!("({},{})", fmt_g(f(&o.users[0])), fmt_g(f(&o.users[1])));
        let _ = writeln!(s, "powers={}", pair(|u| u.power));
        let _ = writeln!(s, "sinrs={}", pair(|u| u.sinr));
        let _ = writeln!(s, "utilities={}", pair(|u| u.utility));
        let _ = writeln!(s, "welfare={}", fmt_g(o.welfare()));
        let _ = writeln!(s, "orthogonalized={}", o.orthogonalized);
        if let Some(c) = &o.candidates {
            let _ = writeln!(s, "gamma_hat={}", fmt_g(c.gamma_hat));
            let _ = writeln!(s, "beta_star={}", c.beta_star.map_or("none".into(), fmt_g));
            let _ = writeln!(s, "V_B1={}", c.v_b1.map_or("none".into(), fmt_g));
            let _ = writeln!(s, "W_B1={}", fmt_g(c.w_b1));
            let _ = writeln!(s, "U_S1={}", fmt_g(c.u_s1));
            let _ = writeln!(s, "V0_B1={}", fmt_g(c.v0_b1));
            let _ = writeln!(s, "leader_choice={}", c.winner);
        }
        if !o.notes.is_empty() {
            let notes: Vec<String> = o.notes.iter().map(|n| format!("{n:?}")).collect();
            let _ = writeln!(s, "notes={}", notes.join(","));
        }
    }
    s
}

fn render_csv(outcomes: &[(&str, EquilibriumOutcome)]) -> String {
    let mut s = String::from("mode,kind,orthogonalized,carrier1,carrier2,power1,power2,sinr1,sinr2,utility1,utility2,welfare\n");
    for (mode, o) in outcomes {
        let [a, b] = &o.users;
        let _ = writeln!(
            s,
            "{mode},{},{},{},{},{},{},{},{},{},{},{}",
            o.kind.name(),
            o.orthogonalized,
            carrier_label(a.carrier),
            carrier_label(b.carrier),
            fmt_g(a.power),
            fmt_g(b.power),
            fmt_g(a.sinr),
            fmt_g(b.sinr),
            fmt_g(a.utility),
            fmt_g(b.utility),
            fmt_g(o.welfare())
        );
    }
    s
}

/// `results.csv` becomes `results.trials.csv`.
pub fn per_trial_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.trials.csv"))
}

fn sweep(config: &Path, path: &Path, per_trial: bool, err: &mut dyn Write) -> crate::Result<i32> {
    let cfg: SweepConfig = parse_json(&read(config)?)?;
    let sweep = Sweep::new(cfg)?;
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    if per_trial {
        let records = sweep.run_records()?;
        let mut stats = Vec::new();
        for (cell, recs) in &records {
            for mode in sweep.config().modes() {
                stats.push(crate::sim::AggregateStats::from_records(*cell, mode, recs));
            }
        }
        write_csv(file, &stats)?;
        let trial_path = per_trial_path(path);
        let trial_file = std::fs::File::create(&trial_path).map_err(|e| io_error(&trial_path, e))?;
        write_trial_csv(trial_file, &records)?;
        let _ = writeln!(err, "wrote {} rows to {} and per-trial rows to {}", stats.len(), path.display(), trial_path.display());
    } else {
        let stats = sweep.run()?;
        write_csv(file, &stats)?;
        let _ = writeln!(err, "wrote {} rows to {}", stats.len(), path.display());
    }
    Ok(EXIT_OK)
}

fn bounds(
    m: Option<u32>,
    gamma_star: Option<f64>,
    k_min: usize,
    k_max: usize,
    path: Option<PathBuf>,
    out: &mut dyn Write,
) -> crate::Result<i32> {
    let gs = match (m, gamma_star) {
        (_, Some(g)) => g,
        (Some(m), None) => solve_gamma_star(EfficiencyKind::Exponential { m })?,
        (None, None) => unreachable!("clap requires one of --M and --gamma-star"),
    };
    let curves = bound_curves(gs, k_min, k_max)?;
    let mut text = String::from("K,kind,value\n");
    for c in &curves {
        for (k, v) in c.k_values.iter().zip(&c.values) {
            let _ = writeln!(text, "{k},{},{}", c.kind, fmt_g(*v));
        }
    }
    match path {
        Some(p) => std::fs::write(&p, text).map_err(|e| io_error(&p, e))?,
        None => out.write_all(text.as_bytes()).map_err(|e| Error::Config(e.to_string()))?,
    }
    Ok(EXIT_OK)
}
