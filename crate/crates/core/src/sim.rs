//! Seeded Monte Carlo sweeps over carrier count and fading correlation.
//!
//! Every trial draws its channel from the stream `(seed, trial_index)`, runs
//! the requested solvers and records one [`ModeRecord`] per mode. The same
//! trial index maps to the same random stream in every grid cell, so cells
//! are compared on common random numbers.
//!
//! **Spectral efficiency of a trial** is `½ Σ_n log2(1 + SINR_n)`, the mean
//! over the two users. A fully orthogonal outcome therefore scores
//! `log2(1+γ*)`.
//!
//! Conventions:
//! * ε-equilibrium outcomes count as not orthogonalized and contribute their
//!   finite ε-utilities (ε = `1e-6·V⁰`);
//! * shared-carrier Nash points with `γ* ≥ 1` have no finite powers; they
//!   contribute utility 0 and SINR 0 and are flagged `divergent`.
//!
//! Trials run on a rayon pool (size from `CARRIER_GAME_THREADS` when set)
//! and are reduced in index order, so results do not depend on scheduling.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::{best_two_carriers, sample_channel, CorrelationSpec};
use crate::efficiency::{EfficiencyKind, EfficiencyModel};
use crate::equilibria::{self, sharing_condition, EquilibriumOutcome, OutcomeKind};
use crate::error::{Error, Result};
use crate::format::fmt_g;
use crate::game::GameInstance;
use crate::User;

/// Environment variable holding the worker count for sweeps.
pub const THREADS_ENV: &str = "CARRIER_GAME_THREADS";

pub const CSV_HEADER: [&str; 12] = [
    "K",
    "rho",
    "theta",
    "mode",
    "trials",
    "p_no_orth",
    "p_no_orth_se",
    "ee_mean",
    "ee_user1",
    "ee_user2",
    "se_mean",
    "welfare_mean",
];

pub const TRIAL_CSV_HEADER: [&str; 17] = [
    "K",
    "rho",
    "theta",
    "trial",
    "mode",
    "kind",
    "orthogonalized",
    "carrier1",
    "carrier2",
    "power1",
    "power2",
    "sinr1",
    "sinr2",
    "utility1",
    "utility2",
    "welfare",
    "se",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Nash,
    Stackelberg,
    Social,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Nash, Mode::Stackelberg, Mode::Social];

    pub fn solve(self, inst: &GameInstance) -> Result<EquilibriumOutcome> {
        match self {
            Mode::Nash => equilibria::nash_solve(inst),
            Mode::Stackelberg => equilibria::stackelberg_solve(inst),
            Mode::Social => equilibria::social_optimum(inst),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nash => "nash",
            Mode::Stackelberg => "stackelberg",
            Mode::Social => "social",
        })
    }
}

fn default_trials() -> u64 {
    10_000
}

fn default_one() -> f64 {
    1.0
}

fn default_rates() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_efficiency() -> EfficiencyKind {
    EfficiencyKind::Exponential { m: 100 }
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub theta_list: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub sigma2: f64,
    #[serde(default = "default_rates")]
    pub rates: [f64; 2],
    #[serde(default = "default_efficiency")]
    pub efficiency: EfficiencyKind,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_one")]
    pub mean_gain: f64,
}

impl SweepConfig {
    /// i.i.d. unit-mean gains, `M = 100`, unit rates and noise, all modes.
    pub fn iid(k_list: Vec<usize>, trials: u64, seed: u64) -> Self {
        Self {
            k_list,
            rho_list: vec![0.0],
            theta_list: vec![0.0],
            trials,
            seed,
            sigma2: 1.0,
            rates: default_rates(),
            efficiency: default_efficiency(),
            modes: default_modes(),
            mean_gain: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.k_list.is_empty() || self.rho_list.is_empty() || self.theta_list.is_empty() {
            return fail("K_list, rho_list and theta_list must be non-empty".into());
        }
        if let Some(k) = self.k_list.iter().find(|k| **k < 2) {
            return fail(format!("every K must be at least 2, got {k}"));
        }
        if self.modes.is_empty() {
            return fail("modes must be non-empty".into());
        }
        for cell in self.cells() {
            cell.spec.validate()?;
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return fail(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return fail("rates must be positive".into());
        }
        self.efficiency.validate()
    }

    /// Grid cells in output order: K outermost, then ρ, then θ.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &k in &self.k_list {
            for &rho in &self.rho_list {
                for &theta in &self.theta_list {
                    let mut spec = CorrelationSpec::new(rho, theta);
                    spec.mean_gain = self.mean_gain;
                    out.push(Cell { k, spec });
                }
            }
        }
        out
    }

    /// Requested modes, deduplicated, in canonical order.
    pub fn modes(&self) -> Vec<Mode> {
        let mut m = self.modes.clone();
        m.sort();
        m.dedup();
        m
    }
}

/// One `(K, ρ, θ)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub k: usize,
    pub spec: CorrelationSpec,
}

/// Outcome of one solver on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRecord {
    pub mode: Mode,
    pub kind: OutcomeKind,
    pub orthogonalized: bool,
    /// 0-based carriers.
    pub carriers: [Option<usize>; 2],
    pub power: [f64; 2],
    pub sinr: [f64; 2],
    pub utility: [f64; 2],
    pub welfare: f64,
    pub se: f64,
}

impl ModeRecord {
    fn from_outcome(mode: Mode, out: &EquilibriumOutcome) -> Self {
        Self {
            mode,
            kind: out.kind,
            orthogonalized: out.orthogonalized,
            carriers: out.users.map(|u| u.carrier),
            power: out.users.map(|u| u.power),
            sinr: out.users.map(|u| u.sinr),
            utility: out.users.map(|u| u.utility),
            welfare: out.welfare(),
            se: out.spectral_efficiency(),
        }
    }

    pub fn divergent(&self) -> bool {
        matches!(self.kind, OutcomeKind::NashShared { divergent: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    /// Best and second-best carriers `(B_n, S_n)` of each user.
    pub best_two: [(usize, usize); 2],
    /// Gains `g_n^{B_n}` and `g_n^{S_n}`.
    pub key_gains: [(f64, f64); 2],
    /// Whether both users would stay on a common best carrier in the
    /// simultaneous-move game.
    pub sharing_condition: bool,
    pub modes: Vec<ModeRecord>,
}

impl TrialRecord {
    pub fn mode(&self, mode: Mode) -> Option<&ModeRecord> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

fn with_context(e: Error, context: &str) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("{context}: {m}")),
        Error::Config(m) => Error::Config(format!("{context}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{context}: {m}")),
        Error::SolverFailure(m) => Error::SolverFailure(format!("{context}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{context}: {m}")),
    }
}

/// A validated sweep with its efficiency model solved once.
#[derive(Debug, Clone)]
pub struct Sweep {
    config: SweepConfig,
    model: EfficiencyModel,
}

impl Sweep {
    pub fn new(config: SweepConfig) -> Result<Self> {
        config.validate()?;
        let model = EfficiencyModel::new(config.efficiency)?;
        Ok(Self { config, model })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.config
    }

    pub fn model(&self) -> &EfficiencyModel {
        &self.model
    }

    /// Channel and game instance of one trial.
    pub fn instance(&self, cell: &Cell, trial_index: u64) -> Result<GameInstance> {
        let channel = sample_channel(cell.k, &cell.spec, self.config.seed, trial_index)?;
        GameInstance::new(channel, self.config.sigma2, self.config.rates, self.model)
    }

    pub fn run_trial(&self, cell: &Cell, trial_index: u64) -> Result<TrialRecord> {
        let context = || {
            format!(
                "trial {trial_index} (K={}, rho={}, theta={}, seed={})",
                cell.k, cell.spec.rho_carrier, cell.spec.theta_user, self.config.seed
            )
        };
        let inst = self.instance(cell, trial_index).map_err(|e| with_context(e, &context()))?;
        let best_two = User::BOTH.map(|u| best_two_carriers(&inst.channel, u));
        let key_gains = User::BOTH.map(|u| {
            let (b, s) = best_two[u.index()];
            (inst.gain(u, b), inst.gain(u, s))
        });
        let modes = self
            .config
            .modes()
            .into_iter()
            .map(|mode| {
                mode.solve(&inst)
                    .map(|out| ModeRecord::from_outcome(mode, &out))
                    .map_err(|e| with_context(e, &context()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialRecord {
            trial_index,
            best_two,
            key_gains,
            sharing_condition: sharing_condition(&inst),
            modes,
        })
    }

    /// All trials of one cell, in index order.
    pub fn run_cell(&self, cell: &Cell) -> Result<Vec<TrialRecord>> {
        with_pool(|| {
            (0..self.config.trials)
                .into_par_iter()
                .map(|i| self.run_trial(cell, i))
                .collect()
        })
    }

    /// Every cell with its trial records.
    pub fn run_records(&self) -> Result<Vec<(Cell, Vec<TrialRecord>)>> {
        self.config
            .cells()
            .into_iter()
            .map(|cell| Ok((cell, self.run_cell(&cell)?)))
            .collect()
    }

    /// Aggregates for every cell and mode.
    pub fn run(&self) -> Result<Vec<AggregateStats>> {
        let mut out = Vec::new();
        for cell in self.config.cells() {
            let records = self.run_cell(&cell)?;
            for mode in self.config.modes() {
                out.push(AggregateStats::from_records(cell, mode, &records));
            }
        }
        Ok(out)
    }
}

fn with_pool<T: Send>(job: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(job),
        None => job(),
    }
}

/// Runs a whole sweep; see [`Sweep::run`].
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<AggregateStats>> {
    Sweep::new(config.clone())?.run()
}

/// Per-cell, per-mode means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub cell: Cell,
    pub mode: Mode,
    pub trials: u64,
    pub p_no_orth: f64,
    /// Binomial standard error `sqrt(p(1-p)/trials)`.
    pub p_no_orth_se: f64,
    /// Mean per-user energy efficiency.
    pub ee_mean: f64,
    /// Mean utility of user one (the leader).
    pub ee_user1: f64,
    pub ee_user2: f64,
    pub se_mean: f64,
    pub welfare_mean: f64,
}

impl AggregateStats {
    pub fn from_records(cell: Cell, mode: Mode, records: &[TrialRecord]) -> Self {
        let mut shared = 0u64;
        let (mut u1, mut u2, mut se, mut welfare) = (0.0, 0.0, 0.0, 0.0);
        let mut n = 0u64;
        for m in records.iter().filter_map(|r| r.mode(mode)) {
            n += 1;
            shared += u64::from(!m.orthogonalized);
            u1 += m.utility[0];
            u2 += m.utility[1];
            se += m.se;
            welfare += m.welfare;
        }
        let nf = n.max(1) as f64;
        let p = shared as f64 / nf;
        Self {
            cell,
            mode,
            trials: n,
            p_no_orth: p,
            p_no_orth_se: (p * (1.0 - p) / nf).sqrt(),
            ee_mean: (u1 + u2) / (2.0 * nf),
            ee_user1: u1 / nf,
            ee_user2: u2 / nf,
            se_mean: se / nf,
            welfare_mean: welfare / nf,
        }
    }

    fn csv_row(&self) -> Vec<String> {
        vec![
            self.cell.k.to_string(),
            fmt_g(self.cell.spec.rho_carrier),
            fmt_g(self.cell.spec.theta_user),
            self.mode.to_string(),
            self.trials.to_string(),
            fmt_g(self.p_no_orth),
            fmt_g(self.p_no_orth_se),
            fmt_g(self.ee_mean),
            fmt_g(self.ee_user1),
            fmt_g(self.ee_user2),
            fmt_g(self.se_mean),
            fmt_g(self.welfare_mean),
        ]
    }
}

fn csv_error(e: impl fmt::Display) -> Error {
    Error::Validation(format!("cannot write CSV: {e}"))
}

/// Writes the aggregate table.
pub fn write_csv<W: Write>(out: W, stats: &[AggregateStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for s in stats {
        w.write_record(s.csv_row()).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

/// Writes one row per (trial, mode). Carriers are 1-based.
pub fn write_trial_csv<W: Write>(out: W, cells: &[(Cell, Vec<TrialRecord>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_CSV_HEADER).map_err(csv_error)?;
    let carrier = |c: Option<usize>| c.map_or_else(String::new, |k| (k + 1).to_string());
    for (cell, records) in cells {
        for r in records {
            for m in &r.modes {
                w.write_record([
                    cell.k.to_string(),
                    fmt_g(cell.spec.rho_carrier),
                    fmt_g(cell.spec.theta_user),
                    r.trial_index.to_string(),
                    m.mode.to_string(),
                    m.kind.name().to_string(),
                    m.orthogonalized.to_string(),
                    carrier(m.carriers[0]),
                    carrier(m.carriers[1]),
                    fmt_g(m.power[0]),
                    fmt_g(m.power[1]),
                    fmt_g(m.sinr[0]),
                    fmt_g(m.sinr[1]),
                    fmt_g(m.utility[0]),
                    fmt_g(m.utility[1]),
                    fmt_g(m.welfare),
                    fmt_g(m.se),
                ])
                .map_err(csv_error)?;
            }
        }
    }
    w.flush().map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize, theta: f64, trials: u64) -> Sweep {
        let mut c = SweepConfig::iid(vec![k], trials, 7);
        c.theta_list = vec![theta];
        Sweep::new(c).unwrap()
    }

    #[test]
    fn trial_is_deterministic() {
        let s = small(4, 0.0, 10);
        let cell = s.config().cells()[0];
        assert_eq!(s.run_trial(&cell, 3).unwrap(), s.run_trial(&cell, 3).unwrap());
        assert_ne!(s.run_trial(&cell, 3).unwrap(), s.run_trial(&cell, 4).unwrap());
    }

    #[test]
    fn identical_users_share_best_carrier() {
        let s = small(6, 1.0, 50);
        let cell = s.config().cells()[0];
        for r in s.run_cell(&cell).unwrap() {
            assert_eq!(r.best_two[0].0, r.best_two[1].0);
        }
    }

    #[test]
    fn per_trial_invariants() {
        let s = small(3, 0.0, 2000);
        let cell = s.config().cells()[0];
        for r in s.run_cell(&cell).unwrap() {
            let nash = r.mode(Mode::Nash).unwrap();
            let stack = r.mode(Mode::Stackelberg).unwrap();
            let social = r.mode(Mode::Social).unwrap();
            let tol = 1.0 + 1e-12;
            assert!(stack.utility[0] * tol >= nash.utility[0]);
            assert!(social.orthogonalized);
            assert!(social.welfare * tol >= stack.welfare);
            assert!(social.welfare * tol >= nash.welfare);
            if !stack.orthogonalized {
                assert!(r.sharing_condition);
            }
            for m in &r.modes {
                assert!((m.welfare - m.utility[0] - m.utility[1]).abs() < 1e-12 * m.welfare.max(1.0));
            }
        }
    }

    #[test]
    fn aggregates_and_csv() {
        let s = small(2, 0.0, 1);
        let stats = s.run().unwrap();
        assert_eq!(stats.len(), 3);
        for st in &stats {
            assert_eq!(st.p_no_orth_se, 0.0);
            assert!((0.0..=1.0).contains(&st.p_no_orth));
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &stats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("K,rho,theta,mode,trials,p_no_orth,p_no_orth_se,ee_mean,ee_user1,ee_user2,se_mean,welfare_mean\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::iid(vec![2], 10, 1);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = SweepConfig::iid(vec![1], 10, 1);
        assert!(c.validate().is_err());
        c.k_list = vec![2];
        c.rho_list = vec![1.0];
        assert!(c.validate().is_err());
        c.rho_list.clear();
        assert!(c.validate().is_err());

        let text = r#"{"K_list": [2, 4], "rho_list": [0], "theta_list": [0, 1], "trials": 5, "seed": 9}"#;
        let c: SweepConfig = crate::config::parse_json(text).unwrap();
        assert_eq!(c.cells().len(), 4);
        assert_eq!(c.modes(), Mode::ALL.to_vec());
        assert!(crate::config::parse_json::<SweepConfig>(r#"{"K_list": [2], "rho_list": [0], "theta_list": [0], "bogus": 1}"#).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = small(4, 0.5, 300);
        let a = s.run().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| s.run().unwrap());
        assert_eq!(a, b);
    }
}
