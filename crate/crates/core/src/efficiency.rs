//! Sigmoidal efficiency functions and the two critical-SINR root problems.
//!
//! Every equilibrium formula in this crate is driven by two numbers computed
//! here:
//!
//! * `γ*`, the unique positive root of `x f'(x) = f(x)`. It is the SINR that
//!   maximizes `f(x)/x`, i.e. the energy-optimal operating point of a user
//!   that faces no interference.
//! * `β*`, a root of `(x - x²γ*) f'(x) = f(x)` on `(0, x_max]`. It is the SINR
//!   the leader targets when it decides to share its best carrier with the
//!   follower.
//!
//! Both are found with the same derivative-free scheme: scan a uniform grid
//! for sign changes, then bisect each bracket down to a `1e-12` width.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points in the sign-change scan.
pub const SCAN_POINTS: usize = 10_000;
/// Bisection stops once the bracket is this narrow.
pub const BISECTION_WIDTH: f64 = 1e-12;
/// Search bracket for `γ*`.
pub const GAMMA_STAR_BRACKET: (f64, f64) = (1e-9, 50.0);

const SQRT_17: f64 = 4.123_105_625_617_661;
const KNEE: f64 = 0.75;

/// Which sigmoidal efficiency function is in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EfficiencyKind {
    /// `f(x) = (1 - e^{-x})^M`, the packet success rate of an `M`-bit block.
    Exponential {
        #[serde(rename = "M")]
        m: u32,
    },
    /// A piecewise sigmoid with `f'(0) = 1/2` for which the Stackelberg game
    /// can fail to have an exact equilibrium.
    ///
    /// `f(x) = 1/√(1-x) - 1` for `x ≤ 3/4`, and
    /// `f(x) = (7+√17)/4 - (13+3√17)/(32x + 2√17 - 18)` beyond.
    Counterexample,
}

impl fmt::Display for EfficiencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EfficiencyKind::Exponential { m } => write!(f, "exponential(M={m})"),
            EfficiencyKind::Counterexample => f.write_str("counterexample"),
        }
    }
}

impl EfficiencyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EfficiencyKind::Exponential { m } if m < 2 => Err(Error::Validation(format!(
                "exponential efficiency needs block length M > 1, got {m}"
            ))),
            _ => Ok(()),
        }
    }

    fn f(&self, x: f64) -> f64 {
        match *self {
            EfficiencyKind::Exponential { m } => {
                // (1 - e^{-x})^M = exp(M ln(1 - e^{-x}))
                (f64::from(m) * (-(-x).exp()).ln_1p()).exp()
            }
            EfficiencyKind::Counterexample => {
                if x <= KNEE {
                    let s = (1.0 - x).sqrt();
                    x / (s * (1.0 + s))
                } else {
                    (7.0 + SQRT_17) / 4.0 - (13.0 + 3.0 * SQRT_17) / tail_denominator(x)
                }
            }
        }
    }

    fn df(&self, x: f64) -> f64 {
        match *self {
            EfficiencyKind::Exponential { m } => {
                let m = f64::from(m);
                m * (-x + (m - 1.0) * (-(-x).exp()).ln_1p()).exp()
            }
            EfficiencyKind::Counterexample => {
                if x <= KNEE {
                    0.5 / (1.0 - x).powf(1.5)
                } else {
                    let d = tail_denominator(x);
                    32.0 * (13.0 + 3.0 * SQRT_17) / (d * d)
                }
            }
        }
    }

    /// `f(x)/x`, continued by `f'(0)` at the origin.
    fn f_over_x(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.df(0.0);
        }
        match *self {
            EfficiencyKind::Counterexample if x <= KNEE => {
                let s = (1.0 - x).sqrt();
                1.0 / (s * (1.0 + s))
            }
            _ => self.f(x) / x,
        }
    }

    /// A function with the same sign as `x f'(x) - f(x)` on `x > 0`.
    fn critical_residual(&self, x: f64) -> f64 {
        match *self {
            // divide through by f(x)/(e^x - 1) > 0
            EfficiencyKind::Exponential { m } => f64::from(m) * x - x.exp_m1(),
            EfficiencyKind::Counterexample => self.df(x) - self.f_over_x(x),
        }
    }

    /// A function with the same sign as `(x - x²γ*) f'(x) - f(x)` on `x > 0`.
    fn shared_residual(&self, x: f64, gamma_star: f64) -> f64 {
        match *self {
            EfficiencyKind::Exponential { m } => {
                f64::from(m) * (x - x * x * gamma_star) - x.exp_m1()
            }
            EfficiencyKind::Counterexample => {
                (1.0 - x * gamma_star) * self.df(x) - self.f_over_x(x)
            }
        }
    }
}

fn tail_denominator(x: f64) -> f64 {
    32.0 * x + 2.0 * SQRT_17 - 18.0
}

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "efficiency function is defined on x >= 0, got {x}"
        )));
    }
    Ok(())
}

/// A sigmoidal efficiency function together with its critical SINR `γ*`.
///
/// Immutable once built; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyModel {
    kind: EfficiencyKind,
    gamma_star: f64,
}

impl EfficiencyModel {
    /// Builds the model and solves for `γ*`.
    pub fn new(kind: EfficiencyKind) -> Result<Self> {
        let gamma_star = solve_gamma_star(kind)?;
        Ok(Self { kind, gamma_star })
    }

    pub fn exponential(m: u32) -> Result<Self> {
        Self::new(EfficiencyKind::Exponential { m })
    }

    pub fn counterexample() -> Self {
        Self::new(EfficiencyKind::Counterexample).expect("counterexample efficiency has a root")
    }

    pub fn kind(&self) -> EfficiencyKind {
        self.kind
    }

    /// The critical SINR `γ*` maximizing `f(x)/x`.
    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    /// `f(x)`.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        Ok(self.kind.f(x))
    }

    /// `f'(x)`.
    pub fn eval_df(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        Ok(self.kind.df(x))
    }

    /// `f(x)` for arguments already known to be non-negative.
    pub(crate) fn f(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "f evaluated at {x}");
        self.kind.f(x)
    }

    /// `f(x)/x`, with the value `f'(0)` at `x = 0`.
    pub fn f_over_x(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        Ok(self.kind.f_over_x(x))
    }

    /// `f'(0)`, which sets the vanishing-power value `V⁰` of the leader.
    pub fn slope_at_zero(&self) -> f64 {
        self.kind.df(0.0)
    }

    /// Finds `β*` on `(0, x_max]`; see [`solve_beta_star`].
    pub fn solve_beta_star(&self, x_max: f64) -> Option<f64> {
        solve_beta_star(self, x_max)
    }
}

/// Unique positive root of `x f'(x) = f(x)`.
///
/// For the exponential family this is the root of `Mx = e^x - 1`. Should the
/// scan ever report several roots, the one maximizing `f(x)/x` is returned.
pub fn solve_gamma_star(kind: EfficiencyKind) -> Result<f64> {
    kind.validate()?;
    let (lo, hi) = GAMMA_STAR_BRACKET;
    let roots = bracketed_roots(|x| kind.critical_residual(x), lo, hi, SCAN_POINTS);
    roots
        .into_iter()
        .map(|x| (x, kind.f_over_x(x)))
        .fold(None, |best: Option<(f64, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .map(|(x, _)| x)
        .ok_or_else(|| {
            Error::SolverFailure(format!(
                "x f'(x) = f(x) has no sign change on ({lo}, {hi}) for {kind}"
            ))
        })
}

/// Leader's shared-carrier SINR: the non-zero root of
/// `(x - x²γ*) f'(x) = f(x)` on `(0, x_max]` maximizing `f(x)(1 - xγ*)/x`.
///
/// Returns `None` when the only solution in the interval is `x = 0`. Roots
/// whose objective values agree within `1e-12` resolve to the smaller one.
pub fn solve_beta_star(model: &EfficiencyModel, x_max: f64) -> Option<f64> {
    if x_max <= 0.0 || !x_max.is_finite() {
        return None;
    }
    let gs = model.gamma_star;
    let kind = model.kind;
    let step = x_max / SCAN_POINTS as f64;
    let roots = bracketed_roots(|x| kind.shared_residual(x, gs), step, x_max, SCAN_POINTS);
    let objective = |x: f64| kind.f_over_x(x) * (1.0 - x * gs);
    let mut best: Option<(f64, f64)> = None;
    for x in roots {
        if !(x > 0.0 && x * gs < 1.0 && x < gs) {
            continue;
        }
        let value = objective(x);
        best = match best {
            Some((bx, bv)) if bv >= value - 1e-12 * bv.abs().max(1e-300) => Some((bx, bv)),
            _ => Some((x, value)),
        };
    }
    best.map(|(x, _)| x)
}

/// Scans `[lo, hi]` on `n` uniform points and bisects every sign change.
pub(crate) fn bracketed_roots<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let at = |i: usize| {
        if i == n - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut roots = Vec::new();
    let mut x0 = at(0);
    let mut g0 = g(x0);
    if g0 == 0.0 {
        roots.push(x0);
    }
    for i in 1..n {
        let x1 = at(i);
        let g1 = g(x1);
        if g1 == 0.0 {
            roots.push(x1);
        } else if g0 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
            roots.push(bisect(&g, x0, x1, g0));
        }
        x0 = x1;
        g0 = g1;
    }
    roots
}

fn bisect<F: Fn(f64) -> f64>(g: &F, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        if b - a <= BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
