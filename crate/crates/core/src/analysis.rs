//! Closed-form bounds and outcome classifiers.
//!
//! The probability bounds are built from `(1+γ*)·B(1+γ*, K)`, evaluated
//! through the product `∏_{j=2}^{K} (j-1)/(j+γ*) = (K-1)!/((2+γ*)⋯(K+γ*))`.
//! Under i.i.d. Rayleigh gains `K` times this quantity is the chance that a
//! user's best carrier is at least `1+γ*` times better than its second one.

use std::fmt;

use crate::channel::best_two_carriers;
use crate::equilibria::{check_outcome, EquilibriumOutcome};
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::User;

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::Validation("K must be at least 1".into()));
    }
    Ok(())
}

fn check_gamma(gamma_star: f64) -> Result<()> {
    if !(gamma_star > 0.0 && gamma_star.is_finite()) {
        return Err(Error::Validation(format!("gamma* must be positive, got {gamma_star}")));
    }
    Ok(())
}

/// `(1+γ*)·B(1+γ*, K)`; equal to 1 for `K = 1`.
pub fn beta_term(gamma_star: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    check_gamma(gamma_star)?;
    Ok((2..=k).fold(1.0, |acc, j| acc * (j as f64 - 1.0) / (j as f64 + gamma_star)))
}

/// `β(K)·[(K-1)/K + β(K)]` with `β(K) = beta_term(γ*, K)`.
pub fn p_no_orth_iid(gamma_star: f64, k: usize) -> Result<f64> {
    let b = beta_term(gamma_star, k)?;
    let kf = k as f64;
    Ok(b * ((kf - 1.0) / kf + b))
}

/// `min(1, K·β(K))`, the bound for users with identical gains.
pub fn p_no_orth_identical(gamma_star: f64, k: usize) -> Result<f64> {
    Ok((k as f64 * beta_term(gamma_star, k)?).min(1.0))
}

/// Probability, under i.i.d. Rayleigh gains for both users, that both
/// users share a best carrier and both best-to-second ratios are at least
/// `1+γ*`: `K·β(K)²`.
pub fn p_shared_region_iid(gamma_star: f64, k: usize) -> Result<f64> {
    let b = beta_term(gamma_star, k)?;
    Ok(k as f64 * b * b)
}

/// Lower bound on the spectral efficiency, `log2(1+γ*)·(1 - p)` with `p`
/// the i.i.d. or identical-users probability.
pub fn se_bound(gamma_star: f64, k: usize, identical_users: bool) -> Result<f64> {
    let p = if identical_users {
        p_no_orth_identical(gamma_star, k)?
    } else {
        p_no_orth_iid(gamma_star, k)?
    };
    Ok((1.0 + gamma_star).log2() * (1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    ProbNoOrthIid,
    ProbNoOrthIdentical,
    SeBoundIid,
    SeBoundIdentical,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [
        BoundKind::ProbNoOrthIid,
        BoundKind::ProbNoOrthIdentical,
        BoundKind::SeBoundIid,
        BoundKind::SeBoundIdentical,
    ];

    pub fn evaluate(self, gamma_star: f64, k: usize) -> Result<f64> {
        match self {
            BoundKind::ProbNoOrthIid => p_no_orth_iid(gamma_star, k),
            BoundKind::ProbNoOrthIdentical => p_no_orth_identical(gamma_star, k),
            BoundKind::SeBoundIid => se_bound(gamma_star, k, false),
            BoundKind::SeBoundIdentical => se_bound(gamma_star, k, true),
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::ProbNoOrthIid => "ProbNoOrthIID",
            BoundKind::ProbNoOrthIdentical => "ProbNoOrthIdentical",
            BoundKind::SeBoundIid => "SEBoundIID",
            BoundKind::SeBoundIdentical => "SEBoundIdentical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub k_values: Vec<usize>,
    pub values: Vec<f64>,
}

impl BoundCurve {
    pub fn new(kind: BoundKind, gamma_star: f64, k_values: Vec<usize>) -> Result<Self> {
        let values = k_values
            .iter()
            .map(|&k| kind.evaluate(gamma_star, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, k_values, values })
    }
}

/// All four curves over `k_min..=k_max`.
pub fn bound_curves(gamma_star: f64, k_min: usize, k_max: usize) -> Result<Vec<BoundCurve>> {
    if k_min < 1 || k_max < k_min {
        return Err(Error::Validation(format!("invalid K range {k_min}..={k_max}")));
    }
    BoundKind::ALL
        .iter()
        .map(|&kind| BoundCurve::new(kind, gamma_star, (k_min..=k_max).collect()))
        .collect()
}

/// Worst-case welfare loss factors of the Stackelberg outcome, against the
/// Nash outcome and against the social optimum. `(1, 1)` when the users'
/// best carriers differ.
pub fn welfare_ratio_bounds(inst: &GameInstance) -> (f64, f64) {
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    if b1 != b2 {
        return (1.0, 1.0);
    }
    let weighted = |u: User, k: usize| inst.rate(u) * inst.gain(u, k);
    let top = weighted(User::One, b1) + weighted(User::Two, b2);
    let vs_nash = top / (weighted(User::One, b1) + weighted(User::Two, s2));
    let vs_optimum = top / (weighted(User::One, s1) + weighted(User::Two, s2));
    (vs_nash, vs_optimum)
}

/// How the Nash and Stackelberg outcomes of one instance relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffSituation {
    /// Distinct best carriers: both games coincide.
    Case1,
    /// Both users on the common best carrier in both games.
    Case2,
    /// Leader on `B_1` and follower on `S_2` in Stackelberg, but leader on
    /// `S_1` and follower on `B_2` in Nash.
    Case3,
    Other,
}

impl fmt::Display for PayoffSituation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Classifies a pair of outcomes computed from `inst`.
pub fn classify_payoff_situation(
    inst: &GameInstance,
    nash: &EquilibriumOutcome,
    stack: &EquilibriumOutcome,
) -> Result<PayoffSituation> {
    if !nash.kind.is_nash() || !stack.kind.is_stackelberg() {
        return Err(Error::Validation("expected a Nash and a Stackelberg outcome".into()));
    }
    for out in [nash, stack] {
        check_outcome(inst, out).map_err(|e| Error::Validation(format!("outcome does not match instance: {e}")))?;
    }
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    if b1 != b2 {
        return Ok(PayoffSituation::Case1);
    }
    let carriers = |o: &EquilibriumOutcome| (o.users[0].carrier, o.users[1].carrier);
    let both_best = (Some(b1), Some(b2));
    if carriers(nash) == both_best && carriers(stack) == both_best {
        return Ok(PayoffSituation::Case2);
    }
    if carriers(stack) == (Some(b1), Some(s2)) && carriers(nash) == (Some(s1), Some(b2)) {
        return Ok(PayoffSituation::Case3);
    }
    Ok(PayoffSituation::Other)
}

/// Set of satisfied leading-versus-following conditions, numbered 1 to 6.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LeadConditions(u8);

impl LeadConditions {
    fn insert(&mut self, i: u8) {
        self.0 |= 1 << i;
    }

    pub fn contains(&self, i: u8) -> bool {
        (1..=6).contains(&i) && self.0 & (1 << i) != 0
    }

    pub fn any(&self) -> bool {
        self.0 != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (1..=6).filter(|i| self.contains(*i))
    }
}

/// Evaluates the six sufficient conditions under which user one earns at
/// least as much leading as following.
///
/// `β*` is the sharing SINR of the orientation with user one leading;
/// conditions that involve it are unsatisfied when it does not exist.
pub fn lead_advantage_conditions(inst: &GameInstance) -> LeadConditions {
    let mut set = LeadConditions::default();
    let (b1, s1) = best_two_carriers(&inst.channel, User::One);
    let (b2, s2) = best_two_carriers(&inst.channel, User::Two);
    if b1 != b2 {
        set.insert(1);
        return set;
    }
    let model = &inst.efficiency;
    let gs = model.gamma_star();
    let r1 = inst.gain(User::One, b1) / inst.gain(User::One, s1);
    let r2 = inst.gain(User::Two, b2) / inst.gain(User::Two, s2);
    if r1.min(r2) <= 1.0 + gs {
        set.insert(2);
    }

    let h = |x: f64| model.f_over_x(x).expect("ratio at least one");
    let deter = [h(r1 - 1.0), h(r2 - 1.0)];
    let retreat = [model.f(gs) / (gs * r1), model.f(gs) / (gs * r2)];

    let x_max = (r2 - 1.0) / (1.0 + gs * r2);
    let Some(beta) = model.solve_beta_star(x_max) else {
        return set;
    };
    let share = model.f(beta) * (1.0 - gs * beta) / (beta * (1.0 + gs));

    if (0..2).all(|i| deter[i] >= retreat[1 - i].max(share)) {
        set.insert(3);
    }
    if share >= retreat[0].max(deter[1]) && deter[0] >= retreat[1].max(share) {
        set.insert(4);
    }
    if retreat[0] >= deter[1].max(share)
        && share >= retreat[1].max(deter[0])
        && r1 <= (1.0 + beta) / (1.0 - gs * beta)
    {
        set.insert(5);
    }
    // This comparison term uses γ* where the others use β*; kept as stated.
    let odd_term = model.f(gs) * (1.0 - gs * beta) / (gs * (1.0 + gs));
    if deter[1] >= retreat[0].max(odd_term) && share >= retreat[1].max(deter[0]) {
        set.insert(6);
    }
    set
}
