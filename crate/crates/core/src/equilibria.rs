//! Closed-form equilibria of the two-user game.
//!
//! * [`follower_best_response`]: the follower puts all its power on the
//!   carrier with the best effective gain, at SINR `γ*`.
//! * [`stackelberg_solve`]: the leader (user one) anticipates that response.
//!   Only its two best carriers `B_1, S_1` matter. When both users prefer the
//!   same carrier the leader compares four values: sharing at SINR `β*`
//!   (`V`), transmitting just loud enough at SINR `γ̂` to push the follower
//!   off (`W`), retreating to `S_1` (`U`), and the supremum `V⁰` reached only
//!   as its power vanishes. If `V⁰` alone is largest there is no exact
//!   equilibrium and [`epsilon_equilibrium`] builds an ε-equilibrium.
//! * [`nash_solve`]: the simultaneous-move game, classified by whether both
//!   users keep their common best carrier.
//! * [`social_optimum`]: the welfare-maximizing orthogonal assignment.

use std::fmt;

use crate::channel::best_two_carriers;
use crate::error::{Error, Result};
use crate::game::{self, GameInstance, PowerAllocation};
use crate::User;

/// Relative tolerance under which two effective gains count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;
/// Relative tolerance under which two leader candidate values count as tied.
pub const CANDIDATE_TIE_TOLERANCE: f64 = 1e-12;
/// Default ε of the automatic ε-equilibrium, relative to `V⁰`.
pub const DEFAULT_EPSILON_FRACTION: f64 = 1e-6;

/// Which leader option produced a Stackelberg outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderChoice {
    /// `γ̂ ≤ γ*`: SINR `γ*` on `B_1` already pushes the follower away.
    CriticalOnBest,
    /// Share `B_1` with the follower at SINR `β*` (value `V`).
    Share,
    /// Deter the follower with SINR `γ̂` on `B_1` (value `W`).
    Deter,
    /// Retreat to `S_1` at SINR `γ*` (value `U`).
    Retreat,
    /// Vanishing power on `B_1` (value `V⁰`); only an ε-equilibrium exists.
    Vanish,
}

impl fmt::Display for LeaderChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeaderChoice::CriticalOnBest => "critical",
            LeaderChoice::Share => "V",
            LeaderChoice::Deter => "W",
            LeaderChoice::Retreat => "U",
            LeaderChoice::Vanish => "V0",
        })
    }
}

/// Leader values compared when both users' best carrier coincides.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderCandidates {
    /// `γ̂ = (g_2^{B_2} - g_2^{S_2}) / g_2^{S_2}`.
    pub gamma_hat: f64,
    pub beta_star: Option<f64>,
    /// Sharing value; present iff `β*` exists.
    pub v_b1: Option<f64>,
    pub w_b1: f64,
    pub u_s1: f64,
    pub v0_b1: f64,
    /// Unconstrained value of SINR `γ*` on `B_1`.
    pub u_b1: f64,
    pub winner: LeaderChoice,
}

impl LeaderCandidates {
    /// Best value reachable by an exact equilibrium, with its option.
    ///
    /// Ties resolve by priority `W > U > V`.
    pub fn best_exact(&self) -> (LeaderChoice, f64) {
        let mut best = (LeaderChoice::Deter, self.w_b1);
        for (choice, value) in [(LeaderChoice::Retreat, Some(self.u_s1)), (LeaderChoice::Share, self.v_b1)] {
            if let Some(v) = value {
                if v > best.1 * (1.0 + CANDIDATE_TIE_TOLERANCE) {
                    best = (choice, v);
                }
            }
        }
        best
    }

    fn has_tie(&self) -> bool {
        let mut values = vec![self.w_b1, self.u_s1];
        values.extend(self.v_b1);
        let (_, best) = self.best_exact();
        values
            .iter()
            .filter(|v| (best - **v).abs() <= CANDIDATE_TIE_TOLERANCE * best.abs())
            .count()
            > 1
    }
}

/// Per-user part of an outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome {
    /// 0-based active carrier.
    pub carrier: Option<usize>,
    /// Transmit power (W); infinite for a divergent shared Nash point.
    pub power: f64,
    pub sinr: f64,
    /// Energy efficiency (bits/Joule).
    pub utility: f64,
}

/// What kind of solution an [`EquilibriumOutcome`] is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeKind {
    StackelbergExact,
    /// The leader transmits `alpha` and is within `epsilon` of `V⁰`.
    StackelbergEpsilon { epsilon: f64, alpha: f64 },
    NashExact,
    /// Both users on their common best carrier. For `γ* ≥ 1` the shared fixed
    /// point does not exist (`divergent`): powers are infinite and utilities
    /// and SINRs are reported as 0.
    NashShared { divergent: bool },
    SocialOptimum,
}

impl OutcomeKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::StackelbergExact => "StackelbergExact",
            OutcomeKind::StackelbergEpsilon { .. } => "StackelbergEpsilon",
            OutcomeKind::NashExact => "NashExact",
            OutcomeKind::NashShared { .. } => "NashShared",
            OutcomeKind::SocialOptimum => "SocialOptimum",
        }
    }

    pub fn is_stackelberg(&self) -> bool {
        matches!(self, OutcomeKind::StackelbergExact | OutcomeKind::StackelbergEpsilon { .. })
    }

    pub fn is_nash(&self) -> bool {
        matches!(self, OutcomeKind::NashExact | OutcomeKind::NashShared { .. })
    }

    /// True for outcomes that are exact equilibria with finite powers.
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            OutcomeKind::StackelbergExact
                | OutcomeKind::NashExact
                | OutcomeKind::NashShared { divergent: false }
                | OutcomeKind::SocialOptimum
        )
    }
}

/// Diagnostics attached to an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Note {
    /// Two leader candidate values tied; the fixed priority decided.
    CandidateTie,
    /// `γ̂ > γ*` but `β*` does not exist; only `W`, `U` (and `V⁰`) compared.
    BetaStarAbsent,
    /// `1 - γ*β*` was tiny; the sharing power was evaluated in log space.
    NearSingularShare,
    /// Shared-carrier Nash powers diverge because `γ* ≥ 1`.
    DivergentSharedPowers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    /// Index 0 is user one (the Stackelberg leader).
    pub users: [UserOutcome; 2],
    pub kind: OutcomeKind,
    pub orthogonalized: bool,
    pub candidates: Option<LeaderCandidates>,
    pub notes: Vec<Note>,
}

impl EquilibriumOutcome {
    fn from_allocation(inst: &GameInstance, alloc: &PowerAllocation, kind: OutcomeKind) -> Self {
        let users = User::BOTH.map(|u| {
            let carrier = alloc.active_carrier(u);
            match carrier {
                Some(k) => UserOutcome {
                    carrier,
                    power: alloc.power(u, k),
                    sinr: game::sinr(inst, alloc, u, k),
                    utility: game::utility(inst, alloc, u),
                },
                None => UserOutcome {
                    carrier: None,
                    power: 0.0,
                    sinr: 0.0,
                    utility: 0.0,
                },
            }
        });
        let orthogonalized = match (users[0].carrier, users[1].carrier) {
            (Some(a), Some(b)) => a != b,
            _ => true,
        };
        Self {
            users,
            kind,
            orthogonalized,
            candidates: None,
            notes: Vec::new(),
        }
    }

    pub fn user(&self, user: User) -> &UserOutcome {
        &self.users[user.index()]
    }

    /// Sum of the two utilities.
    pub fn welfare(&self) -> f64 {
        self.users[0].utility + self.users[1].utility
    }

    /// Mean over the users of `log2(1 + SINR)` (bits/s/Hz).
    pub fn spectral_efficiency(&self) -> f64 {
        0.5 * self.users.iter().map(|u| (1.0 + u.sinr).log2()).sum::<f64>()
    }

    /// Rebuilds the power allocation. `None` for divergent outcomes.
    pub fn allocation(&self, carriers: usize) -> Option<PowerAllocation> {
        let mut alloc = PowerAllocation::zeros(carriers);
        for u in User::BOTH {
            let o = self.user(u);
            if let Some(k) = o.carrier {
                if !o.power.is_finite() {
                    return None;
                }
                alloc.set(u, k, o.power);
            }
        }
        Some(alloc)
    }

    fn with_user_order_swapped(mut self) -> Self {
        self.users.swap(0, 1);
        self
    }
}

/// Checks the structural invariants of an outcome against its instance:
/// one active carrier per user, the orthogonalization flag, and utilities
/// that recompute to `1e-9` relative.
pub fn check_outcome(inst: &GameInstance, out: &EquilibriumOutcome) -> std::result::Result<(), String> {
    let k_count = inst.carriers();
    for (i, u) in out.users.iter().enumerate() {
        let k = u.carrier.ok_or_else(|| format!("user {} has no active carrier", i + 1))?;
        if k >= k_count {
            return Err(format!("user {} carrier {} out of range", i + 1, k + 1));
        }
    }
    let distinct = out.users[0].carrier != out.users[1].carrier;
    if distinct != out.orthogonalized {
        return Err(format!(
            "orthogonalized flag {} disagrees with carriers",
            out.orthogonalized
        ));
    }
    if let OutcomeKind::NashShared { divergent: true } = out.kind {
        return Ok(());
    }
    let alloc = out
        .allocation(k_count)
        .ok_or_else(|| "non-finite power in an exact outcome".to_string())?;
    for u in User::BOTH {
        if alloc.active_carrier(u).is_none() {
            return Err(format!("user {} does not use exactly one carrier", u.index() + 1));
        }
        let recomputed = game::utility(inst, &alloc, u);
        let stored = out.user(u).utility;
        if (recomputed - stored).abs() > 1e-9 * recomputed.abs().max(stored.abs()).max(1e-300) {
            return Err(format!(
                "user {} utility {stored} does not recompute ({recomputed})",
                u.index() + 1
            ));
        }
    }
    Ok(())
}

/// Best response of `user` to the opponent's powers: all power on the
/// carrier with the largest effective gain, at SINR `γ*`.
///
/// Effective gains within [`GAIN_TIE_TOLERANCE`] of the best count as tied;
/// a tied carrier the opponent leaves silent is preferred, then the lowest
/// index.
pub fn best_response(inst: &GameInstance, opponent: &[f64], user: User) -> Vec<f64> {
    let other = user.other();
    let k_count = inst.carriers();
    let noise = |k: usize| inst.sigma2 + inst.gain(other, k) * opponent[k];
    let h: Vec<f64> = (0..k_count).map(|k| inst.gain(user, k) / noise(k)).collect();
    let h_max = h.iter().copied().fold(f64::MIN, f64::max);
    let tied = |k: &usize| h[*k] >= h_max * (1.0 - GAIN_TIE_TOLERANCE);
    let carrier = (0..k_count)
        .filter(tied)
        .find(|&k| opponent[k] == 0.0)
        .or_else(|| (0..k_count).find(tied))
        .expect("some carrier attains the maximum");
    let mut row = vec![0.0; k_count];
    row[carrier] = inst.gamma_star() * noise(carrier) / inst.gain(user, carrier);
    row
}

/// Follower's response to the leader's allocation. The leader row of the
/// result is copied from `leader`.
pub fn follower_best_response(inst: &GameInstance, leader: &PowerAllocation) -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(inst.carriers());
    let leader_row = leader.row(User::One).to_vec();
    alloc.set_row(User::Two, best_response(inst, &leader_row, User::Two));
    alloc.set_row(User::One, leader_row);
    alloc
}

fn leader_plays(inst: &GameInstance, carrier: usize, power: f64) -> PowerAllocation {
    let leader = PowerAllocation::single(inst.carriers(), User::One, carrier, power);
    follower_best_response(inst, &leader)
}

/// The four leader values, or `None` unless `B_1 = B_2`.
pub fn leader_candidates(inst: &GameInstance) -> Option<LeaderCandidates> {
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    if b1 != b2 {
        return None;
    }
    let model = &inst.efficiency;
    let gs = model.gamma_star();
    let sigma2 = inst.sigma2;
    let r1 = inst.rate(User::One);
    let (g1b, g1s) = (inst.gain(User::One, b1), inst.gain(User::One, s1));
    let (g2b, g2s) = (inst.gain(User::Two, b2), inst.gain(User::Two, s2));

    let gamma_hat = (g2b - g2s) / g2s;
    let x_max = gamma_hat / (1.0 + gs * (1.0 + gamma_hat));
    let beta_star = if gamma_hat > gs { model.solve_beta_star(x_max) } else { None };
    let v_b1 = beta_star.map(|b| {
        model.f(b) * (1.0 - gs * b) * g1b * r1 / (b * sigma2 * (1.0 + gs))
    });
    let ratio = |x: f64| model.f_over_x(x).expect("non-negative SINR");
    let w_b1 = ratio(gamma_hat) * g1b * r1 / sigma2;
    let u_s1 = ratio(gs) * g1s * r1 / sigma2;
    let u_b1 = ratio(gs) * g1b * r1 / sigma2;
    let v0_b1 = model.slope_at_zero() * g1b * r1 / (sigma2 * (1.0 + gs));

    let mut cands = LeaderCandidates {
        gamma_hat,
        beta_star,
        v_b1,
        w_b1,
        u_s1,
        v0_b1,
        u_b1,
        winner: LeaderChoice::CriticalOnBest,
    };
    if gamma_hat > gs {
        let (choice, best) = cands.best_exact();
        cands.winner = if v0_b1 > best { LeaderChoice::Vanish } else { choice };
    }
    Some(cands)
}

/// Stackelberg equilibrium with user one leading.
///
/// Returns an ε-equilibrium (with ε = `1e-6 · V⁰`) when no exact
/// equilibrium exists.
pub fn stackelberg_solve(inst: &GameInstance) -> Result<EquilibriumOutcome> {
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let gs = inst.gamma_star();
    let sigma2 = inst.sigma2;
    let g1 = |k: usize| inst.gain(User::One, k);

    let Some(cands) = leader_candidates(inst) else {
        let alloc = leader_plays(inst, b1, gs * sigma2 / g1(b1));
        return Ok(EquilibriumOutcome::from_allocation(inst, &alloc, OutcomeKind::StackelbergExact));
    };

    let mut notes = Vec::new();
    let alloc = match cands.winner {
        LeaderChoice::CriticalOnBest => leader_plays(inst, b1, gs * sigma2 / g1(b1)),
        LeaderChoice::Vanish => {
            let eps = DEFAULT_EPSILON_FRACTION * cands.v0_b1;
            return epsilon_equilibrium(inst, eps);
        }
        LeaderChoice::Share => {
            let beta = cands.beta_star.expect("share value implies beta*");
            let one_minus = 1.0 - gs * beta;
            let power = if one_minus < 1e-9 {
                notes.push(Note::NearSingularShare);
                (beta.ln() + gs.ln_1p() + sigma2.ln() - g1(b1).ln() - (-gs * beta).ln_1p()).exp()
            } else {
                beta * (1.0 + gs) * sigma2 / (g1(b1) * one_minus)
            };
            leader_plays(inst, b1, power)
        }
        LeaderChoice::Deter => leader_plays(inst, b1, cands.gamma_hat * sigma2 / g1(b1)),
        LeaderChoice::Retreat => leader_plays(inst, s1, gs * sigma2 / g1(s1)),
    };
    if cands.gamma_hat > gs {
        if cands.beta_star.is_none() {
            notes.push(Note::BetaStarAbsent);
        }
        if cands.has_tie() {
            notes.push(Note::CandidateTie);
        }
    }
    let mut out = EquilibriumOutcome::from_allocation(inst, &alloc, OutcomeKind::StackelbergExact);
    out.candidates = Some(cands);
    out.notes = notes;
    Ok(out)
}

/// ε-equilibrium for games whose leader supremum `V⁰` is not attained.
///
/// The leader power is the largest `α = 2^{-j} γ*σ²/g_1^{B_1}` whose utility
/// is at least `V⁰ - ε`; the follower answers on `B_2`.
pub fn epsilon_equilibrium(inst: &GameInstance, epsilon: f64) -> Result<EquilibriumOutcome> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
    }
    let cands = leader_candidates(inst)
        .filter(|c| c.winner == LeaderChoice::Vanish)
        .ok_or_else(|| {
            Error::Precondition(
                "an exact Stackelberg equilibrium exists (B1 != B2, gamma_hat <= gamma*, or V0 not strictly greatest)"
                    .into(),
            )
        })?;
    let (b1, _) = best_two_carriers(&inst.channel, User::One);
    let base = inst.gamma_star() * inst.sigma2 / inst.gain(User::One, b1);
    let target = cands.v0_b1 - epsilon;
    let mut alpha = base;
    for _ in 0..1100 {
        if alpha == 0.0 {
            break;
        }
        let alloc = leader_plays(inst, b1, alpha);
        if game::utility(inst, &alloc, User::One) >= target {
            let kind = OutcomeKind::StackelbergEpsilon { epsilon, alpha };
            let mut out = EquilibriumOutcome::from_allocation(inst, &alloc, kind);
            if cands.beta_star.is_none() {
                out.notes.push(Note::BetaStarAbsent);
            }
            out.candidates = Some(cands);
            return Ok(out);
        }
        alpha *= 0.5;
    }
    Err(Error::SolverFailure(format!(
        "no leader power within {epsilon} of V0 = {}",
        cands.v0_b1
    )))
}

/// Shared-carrier Nash powers `(p_1, p_2)` on a carrier with gains `g1`,
/// `g2`: the solution of `p_n = γ*(σ² + g_m p_m)/g_n`, i.e.
/// `g_n p_n = γ*σ²/(1 - γ*)`. `None` when `γ* ≥ 1`.
pub fn shared_carrier_powers(gamma_star: f64, sigma2: f64, g1: f64, g2: f64) -> Option<(f64, f64)> {
    if gamma_star >= 1.0 {
        return None;
    }
    let received = gamma_star * sigma2 / (1.0 - gamma_star);
    Some((received / g1, received / g2))
}

/// Whether both users share one best carrier and each finds it at least
/// `1 + γ*` times better than its runner-up.
pub fn sharing_condition(inst: &GameInstance) -> bool {
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    let threshold = 1.0 + inst.gamma_star();
    b1 == b2
        && inst.gain(User::One, b1) >= threshold * inst.gain(User::One, s1)
        && inst.gain(User::Two, b2) >= threshold * inst.gain(User::Two, s2)
}

/// Nash equilibrium of the simultaneous-move game.
///
/// When the best carriers coincide but sharing is not stable, the user whose
/// best-to-second ratio is below `1 + γ*` moves to its second carrier; if
/// both are below, the smaller ratio moves (user two on an exact tie).
pub fn nash_solve(inst: &GameInstance) -> Result<EquilibriumOutcome> {
    let k_count = inst.carriers();
    let gs = inst.gamma_star();
    let sigma2 = inst.sigma2;
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    let g = |u: User, k: usize| inst.gain(u, k);

    let orthogonal = |c1: usize, c2: usize| {
        let mut alloc = PowerAllocation::zeros(k_count);
        alloc.set(User::One, c1, gs * sigma2 / g(User::One, c1));
        alloc.set(User::Two, c2, gs * sigma2 / g(User::Two, c2));
        EquilibriumOutcome::from_allocation(inst, &alloc, OutcomeKind::NashExact)
    };

    if b1 != b2 {
        return Ok(orthogonal(b1, b2));
    }
    if !sharing_condition(inst) {
        let r1 = g(User::One, b1) / g(User::One, s1);
        let r2 = g(User::Two, b2) / g(User::Two, s2);
        let threshold = 1.0 + gs;
        let user_one_yields = match (r1 >= threshold, r2 >= threshold) {
            (true, false) => false,
            (false, true) => true,
            _ => r1 < r2,
        };
        return Ok(if user_one_yields {
            orthogonal(s1, b2)
        } else {
            orthogonal(b1, s2)
        });
    }

    let (g1, g2) = (g(User::One, b1), g(User::Two, b1));
    match shared_carrier_powers(gs, sigma2, g1, g2) {
        Some((p1, p2)) => {
            let mut alloc = PowerAllocation::zeros(k_count);
            alloc.set(User::One, b1, p1);
            alloc.set(User::Two, b1, p2);
            Ok(EquilibriumOutcome::from_allocation(
                inst,
                &alloc,
                OutcomeKind::NashShared { divergent: false },
            ))
        }
        None => {
            let divergent = UserOutcome {
                carrier: Some(b1),
                power: f64::INFINITY,
                sinr: 0.0,
                utility: 0.0,
            };
            Ok(EquilibriumOutcome {
                users: [divergent, divergent],
                kind: OutcomeKind::NashShared { divergent: true },
                orthogonalized: false,
                candidates: None,
                notes: vec![Note::DivergentSharedPowers],
            })
        }
    }
}

/// Welfare-maximizing assignment: distinct carriers, each user at SINR `γ*`.
pub fn social_optimum(inst: &GameInstance) -> Result<EquilibriumOutcome> {
    let k_count = inst.carriers();
    let score = |k1: usize, k2: usize| {
        inst.rate(User::One) * inst.gain(User::One, k1) + inst.rate(User::Two) * inst.gain(User::Two, k2)
    };
    let mut best = (0, 1, score(0, 1));
    for k1 in 0..k_count {
        for k2 in (0..k_count).filter(|&k2| k2 != k1) {
            let s = score(k1, k2);
            if s > best.2 {
                best = (k1, k2, s);
            }
        }
    }
    let gs = inst.gamma_star();
    let mut alloc = PowerAllocation::zeros(k_count);
    alloc.set(User::One, best.0, gs * inst.sigma2 / inst.gain(User::One, best.0));
    alloc.set(User::Two, best.1, gs * inst.sigma2 / inst.gain(User::Two, best.1));
    Ok(EquilibriumOutcome::from_allocation(inst, &alloc, OutcomeKind::SocialOptimum))
}

/// User one's outcome when leading and when following.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleSwap {
    pub as_leader: EquilibriumOutcome,
    /// Solved with the users exchanged; `users[0]` is still user one.
    pub as_follower: EquilibriumOutcome,
}

/// Solves the Stackelberg game in both leader orientations.
pub fn swap_roles(inst: &GameInstance) -> Result<RoleSwap> {
    let as_leader = stackelberg_solve(inst)?;
    let as_follower = stackelberg_solve(&inst.swapped())?.with_user_order_swapped();
    Ok(RoleSwap {
        as_leader,
        as_follower,
    })
}
