//! Game instances, SINR and energy-efficiency utility, and a brute-force
//! best response used to cross-check the closed-form solvers.

use crate::channel::ChannelMatrix;
use crate::efficiency::EfficiencyModel;
use crate::error::{Error, Result};
use crate::User;

/// Full description of one two-user game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub channel: ChannelMatrix,
    /// Noise variance σ² (W).
    pub sigma2: f64,
    /// Transmission rates `R_1, R_2` (bits/s).
    pub rates: [f64; 2],
    pub efficiency: EfficiencyModel,
}

impl GameInstance {
    pub fn new(
        channel: ChannelMatrix,
        sigma2: f64,
        rates: [f64; 2],
        efficiency: EfficiencyModel,
    ) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Validation(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Validation(format!("rates must be positive, got {r}")));
        }
        Ok(Self {
            channel,
            sigma2,
            rates,
            efficiency,
        })
    }

    pub fn carriers(&self) -> usize {
        self.channel.carriers()
    }

    pub fn gamma_star(&self) -> f64 {
        self.efficiency.gamma_star()
    }

    pub fn gain(&self, user: User, carrier: usize) -> f64 {
        self.channel.gain(user, carrier)
    }

    pub fn rate(&self, user: User) -> f64 {
        self.rates[user.index()]
    }

    /// The same game with the users' roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            channel: self.channel.swapped(),
            sigma2: self.sigma2,
            rates: [self.rates[1], self.rates[0]],
            efficiency: self.efficiency,
        }
    }
}

/// Transmit powers of both users on every carrier (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p: [Vec<f64>; 2],
}

impl PowerAllocation {
    pub fn zeros(carriers: usize) -> Self {
        Self {
            p: [vec![0.0; carriers], vec![0.0; carriers]],
        }
    }

    pub fn new(user1: Vec<f64>, user2: Vec<f64>) -> Result<Self> {
        if user1.len() != user2.len() {
            return Err(Error::Validation("power rows differ in length".into()));
        }
        if let Some(p) = user1
            .iter()
            .chain(&user2)
            .find(|p| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::Validation(format!(
                "powers must be non-negative and finite, got {p}"
            )));
        }
        Ok(Self { p: [user1, user2] })
    }

    /// All of `user`'s power on one carrier; the other user silent.
    pub fn single(carriers: usize, user: User, carrier: usize, power: f64) -> Self {
        let mut a = Self::zeros(carriers);
        a.set(user, carrier, power);
        a
    }

    pub fn carriers(&self) -> usize {
        self.p[0].len()
    }

    pub fn power(&self, user: User, carrier: usize) -> f64 {
        self.p[user.index()][carrier]
    }

    pub fn row(&self, user: User) -> &[f64] {
        &self.p[user.index()]
    }

    pub fn set(&mut self, user: User, carrier: usize, power: f64) {
        self.p[user.index()][carrier] = power;
    }

    pub fn set_row(&mut self, user: User, row: Vec<f64>) {
        assert_eq!(row.len(), self.carriers());
        self.p[user.index()] = row;
    }

    pub fn total_power(&self, user: User) -> f64 {
        self.row(user).iter().sum()
    }

    /// The single carrier `user` transmits on, if exactly one is active.
    pub fn active_carrier(&self, user: User) -> Option<usize> {
        let mut active = self.row(user).iter().enumerate().filter(|(_, p)| **p > 0.0);
        match (active.next(), active.next()) {
            (Some((k, _)), None) => Some(k),
            _ => None,
        }
    }
}

/// Effective channel gain `ĥ_n^k = g_n^k / (σ² + g_m^k p_m^k)`.
pub fn effective_gain(inst: &GameInstance, alloc: &PowerAllocation, user: User, carrier: usize) -> f64 {
    let other = user.other();
    let interference = inst.gain(other, carrier) * alloc.power(other, carrier);
    inst.gain(user, carrier) / (inst.sigma2 + interference)
}

/// SINR `γ_n^k = g_n^k p_n^k / (σ² + g_m^k p_m^k)`.
pub fn sinr(inst: &GameInstance, alloc: &PowerAllocation, user: User, carrier: usize) -> f64 {
    alloc.power(user, carrier) * effective_gain(inst, alloc, user, carrier)
}

/// Energy efficiency `R_n Σ_k f(γ_n^k) / Σ_k p_n^k` in bits/Joule.
///
/// A user that transmits nothing is assigned utility 0.
pub fn utility(inst: &GameInstance, alloc: &PowerAllocation, user: User) -> f64 {
    let total = alloc.total_power(user);
    if total <= 0.0 {
        return 0.0;
    }
    let goodput: f64 = (0..alloc.carriers())
        .filter(|&k| alloc.power(user, k) > 0.0)
        .map(|k| inst.efficiency.f(sinr(inst, alloc, user, k)))
        .sum();
    inst.rate(user) * goodput / total
}

/// Grid for [`brute_force_best_response`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrid {
    /// Uniform points per carrier on `(0, p_hi]`.
    pub points: usize,
    /// Upper power bound; `None` picks one from the instance.
    pub p_hi: Option<f64>,
}

impl Default for PowerGrid {
    fn default() -> Self {
        Self {
            points: 1000,
            p_hi: None,
        }
    }
}

/// Maximizes `objective` over `(0, hi]`: uniform grid, then golden-section
/// search between the neighbours of the best grid point.
///
/// Returns `(argmax, max)` over every point evaluated.
pub fn grid_maximize<F: Fn(f64) -> f64>(objective: F, hi: f64, points: usize) -> (f64, f64) {
    let step = hi / points as f64;
    let mut best = (step, objective(step));
    let mut best_i = 1;
    for i in 2..=points {
        let x = step * i as f64;
        let v = objective(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let lo = step * (best_i as f64 - 1.0);
    let up = (step * (best_i as f64 + 1.0)).min(hi);
    let refined = golden_section_max(&objective, lo, up);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

fn golden_section_max<F: Fn(f64) -> f64>(objective: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..200 {
        if b - a <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Numerical best response of `user` to fixed `opponent` powers.
///
/// Only single-carrier strategies are searched: a ratio of sums never beats
/// its best term, so spreading power cannot help. Each carrier gets its own
/// grid search; the best carrier wins, lower index on ties.
pub fn brute_force_best_response(
    inst: &GameInstance,
    opponent: &[f64],
    user: User,
    grid: &PowerGrid,
) -> Result<PowerAllocation> {
    let k_count = inst.carriers();
    if opponent.len() != k_count {
        return Err(Error::Validation(format!(
            "opponent powers have {} entries for {k_count} carriers",
            opponent.len()
        )));
    }
    if grid.points < 2 {
        return Err(Error::Validation(format!(
            "power grid needs at least 2 points, got {}",
            grid.points
        )));
    }
    if let Some(hi) = grid.p_hi {
        if !(hi.is_finite() && hi > 0.0) {
            return Err(Error::Validation(format!("grid upper bound must be positive, got {hi}")));
        }
    }
    let other = user.other();
    let gs = inst.gamma_star();
    let noise_plus_interference =
        |k: usize| inst.sigma2 + inst.gain(other, k) * opponent[k];
    let p_hi = grid.p_hi.unwrap_or_else(|| {
        (0..k_count)
            .map(|k| 10.0 * gs * noise_plus_interference(k) / inst.gain(user, k))
            .fold(0.0, f64::max)
    });

    let mut best: Option<(usize, f64, f64)> = None;
    for k in 0..k_count {
        let h = inst.gain(user, k) / noise_plus_interference(k);
        let rate = inst.rate(user);
        let objective = |p: f64| rate * inst.efficiency.f(h * p) / p;
        let (p, v) = grid_maximize(objective, p_hi, grid.points);
        match best {
            Some((_, _, bv)) if v <= bv * (1.0 + 1e-12) => {}
            _ => best = Some((k, p, v)),
        }
    }
    let (k, p, _) = best.expect("at least one carrier");
    let mut alloc = PowerAllocation::zeros(k_count);
    alloc.set_row(other, opponent.to_vec());
    alloc.set(user, k, p);
    Ok(alloc)
}
