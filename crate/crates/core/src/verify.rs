//! Oracle checks of the closed-form solvers on sampled instances.
//!
//! The leader oracle searches every carrier of the leader over a log-spaced
//! power grid, refined by golden-section search, letting the follower answer
//! each probe with its single-carrier best response. The remaining checks are
//! structural: follower fixed point, the sharing-region subset relation,
//! leader gain over Nash, welfare ordering and the leading-versus-following
//! conditions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::{classify_payoff_situation, lead_advantage_conditions, welfare_ratio_bounds, PayoffSituation};
use crate::channel::{sample_channel, CorrelationSpec};
use crate::efficiency::EfficiencyModel;
use crate::equilibria::{
    best_response, check_outcome, follower_best_response, nash_solve, sharing_condition, social_optimum,
    stackelberg_solve, EquilibriumOutcome, OutcomeKind,
};
use crate::error::Result;
use crate::game::{self, brute_force_best_response, GameInstance, PowerAllocation, PowerGrid};
use crate::User;

/// Relative slack for comparisons that hold exactly in real arithmetic.
const EXACT_SLACK: f64 = 1e-12;

/// Signature of a Stackelberg solver under test.
pub type StackelbergSolver = fn(&GameInstance) -> Result<EquilibriumOutcome>;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub stackelberg: StackelbergSolver,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 300,
            seed: 1,
            stackelberg: stackelberg_solve,
        }
    }
}

/// Best leader play found by the oracle on one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierOptimum {
    pub carrier: usize,
    pub power: f64,
    pub utility: f64,
}

/// Leader optima per carrier, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderOracle {
    pub ranked: Vec<CarrierOptimum>,
}

impl LeaderOracle {
    pub fn best(&self) -> CarrierOptimum {
        self.ranked[0]
    }

    /// True when the best carrier beats the runner-up by more than `rel`.
    pub fn decisive(&self, rel: f64) -> bool {
        match self.ranked.get(1) {
            Some(second) => self.ranked[0].utility > second.utility * (1.0 + rel),
            None => true,
        }
    }
}

fn leader_utility(inst: &GameInstance, carrier: usize, power: f64) -> f64 {
    let leader = PowerAllocation::single(inst.carriers(), User::One, carrier, power);
    let alloc = follower_best_response(inst, &leader);
    game::utility(inst, &alloc, User::One)
}

/// Maximizes over a log-spaced grid on `[lo, hi]`, then refines between the
/// neighbours of the best grid point.
pub fn log_grid_maximize<F: Fn(f64) -> f64>(objective: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    let x_at = |i: usize| lo * (ratio * i as f64).exp();
    let mut best = (0, objective(lo));
    for i in 1..points {
        let v = objective(x_at(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = x_at(best.0.saturating_sub(1));
    let b = x_at((best.0 + 1).min(points - 1));
    let span = b - a;
    let (x, v) = game::grid_maximize(|t| objective(a + t), span, 64);
    if v > best.1 {
        (a + x, v)
    } else {
        (x_at(best.0), best.1)
    }
}

/// Searches the leader's best single-carrier play against the follower's
/// best response.
pub fn leader_oracle(inst: &GameInstance, points: usize) -> LeaderOracle {
    let gs = inst.gamma_star();
    let s2 = inst.sigma2;
    let follower_spread = (0..inst.carriers())
        .map(|k| inst.gain(User::Two, k))
        .fold(0.0, f64::max)
        / (0..inst.carriers()).map(|k| inst.gain(User::Two, k)).fold(f64::MAX, f64::min);
    let mut ranked: Vec<CarrierOptimum> = (0..inst.carriers())
        .map(|k| {
            let g = inst.gain(User::One, k);
            let lo = 1e-6 * gs * s2 / g;
            let hi = 10.0 * (1.0 + gs) * gs.max(follower_spread) * s2 / g;
            let (power, utility) = log_grid_maximize(|p| leader_utility(inst, k, p), lo, hi, points);
            CarrierOptimum { carrier: k, power, utility }
        })
        .collect();
    ranked.sort_by(|a, b| b.utility.total_cmp(&a.utility).then(a.carrier.cmp(&b.carrier)));
    LeaderOracle { ranked }
}

/// Compares a Stackelberg outcome with the leader oracle: utility within
/// `1e-6` relative, and the same carrier when the oracle's top two carriers
/// differ by more than `1e-4` relative.
pub fn check_leader_oracle(inst: &GameInstance, out: &EquilibriumOutcome) -> std::result::Result<(), String> {
    let oracle = leader_oracle(inst, 4000);
    let best = oracle.best();
    let u = out.users[0].utility;
    if (u - best.utility).abs() > 1e-6 * best.utility.abs() {
        return Err(format!(
            "leader utility {u} vs oracle {} (carrier {}, power {})",
            best.utility,
            best.carrier + 1,
            best.power
        ));
    }
    if oracle.decisive(1e-4) && out.users[0].carrier != Some(best.carrier) {
        return Err(format!(
            "leader carrier {:?} vs oracle carrier {}",
            out.users[0].carrier.map(|k| k + 1),
            best.carrier + 1
        ));
    }
    Ok(())
}

/// The follower must be exactly at its closed-form best response and agree
/// with the numerical best response.
pub fn check_follower(inst: &GameInstance, out: &EquilibriumOutcome) -> std::result::Result<(), String> {
    let alloc = out.allocation(inst.carriers()).ok_or("non-finite powers")?;
    let response = best_response(inst, alloc.row(User::One), User::Two);
    for (k, (a, b)) in alloc.row(User::Two).iter().zip(&response).enumerate() {
        if (a - b).abs() > EXACT_SLACK * a.abs().max(b.abs()) {
            return Err(format!("follower power {a} on carrier {} but best response is {b}", k + 1));
        }
    }
    let numeric = brute_force_best_response(inst, alloc.row(User::One), User::Two, &PowerGrid::default())
        .map_err(|e| e.to_string())?;
    let k = out.users[1].carrier.ok_or("follower silent")?;
    let (nk, np) = match numeric.active_carrier(User::Two) {
        Some(nk) => (nk, numeric.power(User::Two, nk)),
        None => return Err("numerical best response silent".into()),
    };
    let u_closed = game::utility(inst, &alloc, User::Two);
    let u_numeric = game::utility(inst, &numeric, User::Two);
    if (u_closed - u_numeric).abs() > 1e-6 * u_closed {
        return Err(format!("follower utility {u_closed} vs numerical {u_numeric}"));
    }
    let h = |kk: usize| game::effective_gain(inst, &alloc, User::Two, kk);
    let tied = (h(k) - h(nk)).abs() <= 1e-9 * h(k);
    if nk != k && !tied {
        return Err(format!("follower carrier {} vs numerical {}", k + 1, nk + 1));
    }
    if !tied && (np - out.users[1].power).abs() > 1e-3 * out.users[1].power {
        return Err(format!("follower power {} vs numerical {np}", out.users[1].power));
    }
    Ok(())
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b - EXACT_SLACK * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self { name, ..Self::default() }
    }

    fn record(&mut self, outcome: std::result::Result<(), String>, context: impl FnOnce() -> String) {
        match outcome {
            Ok(()) => self.passed += 1,
            Err(e) => {
                self.failed += 1;
                if self.first_failure.is_none() {
                    self.first_failure = Some(format!("{}: {e}", context()));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub instances: u64,
    pub checks: Vec<CheckResult>,
    pub situations: BTreeMap<String, u64>,
    /// Instances where only condition 6 holds and following pays more.
    pub condition6_counterexamples: u64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verify: {} instances, seed {}", self.instances, self.seed);
        for c in &self.checks {
            let status = if c.failed == 0 { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{status} {:<22} passed={} failed={}", c.name, c.passed, c.failed);
            if let Some(f) = &c.first_failure {
                let _ = writeln!(s, "     first failure: {f}");
            }
        }
        let _ = writeln!(s, "condition 6 counterexamples: {}", self.condition6_counterexamples);
        let _ = writeln!(s, "payoff situations:");
        for (name, count) in &self.situations {
            let _ = writeln!(s, "  {name}: {count}");
        }
        s
    }
}

/// Instance family used by the suite: trial `i` cycles through i.i.d.
/// gains with `M = 100`, user-correlated gains with `M = 100`, and
/// user-correlated gains with `M = 2` (where sharing can win).
pub fn sample_instance(seed: u64, trial: u64) -> Result<GameInstance> {
    let k = 2 + ((trial / 3) % 3) as usize;
    let (m, spec) = match trial % 3 {
        0 => (100, CorrelationSpec::independent()),
        1 => (100, CorrelationSpec::new(0.3, 0.8)),
        _ => (2, CorrelationSpec::new(0.0, 0.95)),
    };
    let channel = sample_channel(k, &spec, seed, trial)?;
    GameInstance::new(channel, 1.0, [1.0, 1.0], EfficiencyModel::exponential(m)?)
}

/// Runs every check on `opts.trials` sampled instances.
pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let names = [
        "outcome_structure",
        "leader_oracle",
        "follower_fixed_point",
        "sharing_subset",
        "leader_vs_nash",
        "welfare_ordering",
        "lead_conditions",
        "payoff_situations",
    ];
    let mut checks: Vec<CheckResult> = names.iter().map(|n| CheckResult::new(n)).collect();
    let mut situations: BTreeMap<String, u64> = BTreeMap::new();
    for name in ["Case1", "Case2", "Case3", "Other"] {
        situations.insert(name.into(), 0);
    }
    let mut condition6_counterexamples = 0;
    let models = [EfficiencyModel::exponential(100)?, EfficiencyModel::exponential(2)?];

    for trial in 0..opts.trials {
        let mut inst = sample_instance(opts.seed, trial)?;
        // reuse solved models instead of re-solving γ* per instance
        inst.efficiency = if trial % 3 == 2 { models[1] } else { models[0] };
        let ctx = || format!("seed {} trial {trial}", opts.seed);
        let stack = (opts.stackelberg)(&inst);
        let nash = nash_solve(&inst)?;
        let social = social_optimum(&inst)?;
        let stack = match stack {
            Ok(s) => s,
            Err(e) => {
                checks[0].record(Err(format!("solver error: {e}")), ctx);
                continue;
            }
        };

        checks[0].record(
            [&stack, &nash, &social]
                .iter()
                .try_for_each(|o| check_outcome(&inst, o))
                .and_then(|_| if social.orthogonalized { Ok(()) } else { Err("social optimum shares a carrier".into()) }),
            ctx,
        );

        if stack.kind == OutcomeKind::StackelbergExact {
            checks[1].record(check_leader_oracle(&inst, &stack), ctx);
            checks[2].record(check_follower(&inst, &stack), ctx);
        }

        checks[3].record(
            if stack.orthogonalized || sharing_condition(&inst) {
                Ok(())
            } else {
                Err("Stackelberg shares a carrier outside the sharing region".into())
            },
            ctx,
        );

        checks[4].record(
            if at_least(stack.users[0].utility, nash.users[0].utility) {
                Ok(())
            } else {
                Err(format!("leader {} < Nash {}", stack.users[0].utility, nash.users[0].utility))
            },
            ctx,
        );

        let (_, vs_opt) = welfare_ratio_bounds(&inst);
        checks[5].record(
            if !at_least(social.welfare(), stack.welfare()) {
                Err(format!("social {} < Stackelberg {}", social.welfare(), stack.welfare()))
            } else if !at_least(social.welfare(), nash.welfare()) {
                Err(format!("social {} < Nash {}", social.welfare(), nash.welfare()))
            } else if !at_least(stack.welfare(), social.welfare() / vs_opt) {
                Err(format!("Stackelberg {} below social/{vs_opt}", stack.welfare()))
            } else {
                Ok(())
            },
            ctx,
        );

        // condition 6 does not imply the ordering, so it is only counted
        let conditions = lead_advantage_conditions(&inst);
        if conditions.any() && stack.kind.is_exact() {
            let gated = conditions.iter().any(|i| i <= 5);
            let result = match (opts.stackelberg)(&inst.swapped()) {
                Ok(follow) if follow.kind.is_exact() => {
                    let following = follow.users[1].utility;
                    if at_least(stack.users[0].utility, following) {
                        Ok(())
                    } else {
                        Err(format!("leading {} < following {following}", stack.users[0].utility))
                    }
                }
                Ok(_) => Ok(()),
                Err(e) => Err(format!("solver error: {e}")),
            };
            if gated {
                checks[6].record(result, ctx);
            } else if result.is_err() {
                condition6_counterexamples += 1;
            }
        }

        match classify_payoff_situation(&inst, &nash, &stack) {
            Ok(sit) => {
                *situations.entry(sit.to_string()).or_default() += 1;
                let (sf, nf) = (stack.users[1].utility, nash.users[1].utility);
                let result = match sit {
                    PayoffSituation::Case1 if (sf - nf).abs() > EXACT_SLACK * sf.max(nf) => {
                        Err(format!("follower {sf} vs {nf} with distinct best carriers"))
                    }
                    PayoffSituation::Case2 if sf <= nf => Err(format!("shared follower {sf} <= Nash {nf}")),
                    PayoffSituation::Case3 if sf >= nf => Err(format!("deterred follower {sf} >= Nash {nf}")),
                    _ => Ok(()),
                };
                checks[7].record(result, ctx);
            }
            Err(e) => checks[7].record(Err(e.to_string()), ctx),
        }
    }

    Ok(VerifyReport {
        seed: opts.seed,
        instances: opts.trials,
        checks,
        situations,
        condition6_counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChannelMatrix;

    fn corrupted(inst: &GameInstance) -> Result<EquilibriumOutcome> {
        let mut out = stackelberg_solve(inst)?;
        out.users[0].power *= 1.5;
        let alloc = out.allocation(inst.carriers()).expect("finite");
        out.users[0].utility = game::utility(inst, &alloc, User::One);
        out.users[0].sinr = out.users[0].carrier.map_or(0.0, |k| game::sinr(inst, &alloc, User::One, k));
        Ok(out)
    }

    #[test]
    fn suite_passes_on_closed_form() {
        let report = run_verify(&VerifyOptions { trials: 60, ..Default::default() }).unwrap();
        assert!(report.all_passed(), "{}", report.render());
        assert_eq!(report.situations.values().sum::<u64>(), 60);
    }

    #[test]
    fn condition_six_alone_does_not_favour_leading() {
        let inst = sample_instance(3, 56).unwrap();
        let conditions = lead_advantage_conditions(&inst);
        assert_eq!(conditions.iter().collect::<Vec<_>>(), vec![6]);
        let swap = crate::equilibria::swap_roles(&inst).unwrap();
        let (lead, follow) = (swap.as_leader.users[0].utility, swap.as_follower.users[0].utility);
        assert!(follow > lead * 1.4, "{lead} {follow}");
    }

    #[test]
    fn suite_catches_corrupted_solver() {
        let report = run_verify(&VerifyOptions {
            trials: 30,
            stackelberg: corrupted,
            ..Default::default()
        })
        .unwrap();
        assert!(!report.all_passed());
        let text = report.render();
        assert!(text.contains("FAIL") && text.contains("seed 1 trial"), "{text}");
    }

    #[test]
    fn oracle_finds_deterrence_power() {
        let inst = GameInstance::new(
            ChannelMatrix::new(vec![8.0, 1.0], vec![8.0, 1.0]).unwrap(),
            1.0,
            [1.0, 1.0],
            EfficiencyModel::exponential(100).unwrap(),
        )
        .unwrap();
        let best = leader_oracle(&inst, 4000).best();
        assert_eq!(best.carrier, 0);
        assert!((best.power - 7.0 / 8.0).abs() < 1e-6);
    }
}
