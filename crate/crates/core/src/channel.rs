//! Channel-gain realizations for the two users over `K` carriers.
//!
//! Random channels follow a correlated Rayleigh model built from complex
//! Gaussians. With `ρ` the carrier correlation and `θ` the user correlation:
//!
//! ```text
//! z_n^k = √θ · u^k + √(1-θ) · v_n^k
//! u^k   = √ρ · w_u + √(1-ρ) · e_u^k
//! v_n^k = √ρ · w_n + √(1-ρ) · e_n^k
//! g_n^k = mean_gain · |z_n^k|²
//! ```
//!
//! where `w_u, w_1, w_2, e_*^k` are independent unit-variance circular
//! complex Gaussians. Two carriers of one user are ρ-correlated, the two users
//! on one carrier are θ-correlated, and `ρ = θ = 0` gives i.i.d. exponential
//! gains with mean `mean_gain`.
//!
//! Each `(seed, trial_index)` pair selects its own ChaCha stream, so a trial
//! can be regenerated in isolation and in any order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::User;

/// Power gains `g_n^k` of both users on every carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    gains: [Vec<f64>; 2],
}

impl ChannelMatrix {
    /// Validates a `2 × K` gain table (`K ≥ 2`, entries positive and finite).
    pub fn new(user1: Vec<f64>, user2: Vec<f64>) -> Result<Self> {
        if user1.len() != user2.len() {
            return Err(Error::Validation(format!(
                "gain rows differ in length: {} vs {}",
                user1.len(),
                user2.len()
            )));
        }
        if user1.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 carriers, got {}",
                user1.len()
            )));
        }
        for (n, row) in [&user1, &user2].into_iter().enumerate() {
            if let Some((k, g)) = row
                .iter()
                .enumerate()
                .find(|(_, g)| !(g.is_finite() && **g > 0.0))
            {
                return Err(Error::Validation(format!(
                    "gain of user {} on carrier {} must be positive and finite, got {g}",
                    n + 1,
                    k + 1
                )));
            }
        }
        Ok(Self {
            gains: [user1, user2],
        })
    }

    /// Builds a matrix from a `[[..], [..]]` table as found in config files.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        match rows {
            [a, b] => Self::new(a.clone(), b.clone()),
            _ => Err(Error::Validation(format!(
                "gains must have exactly 2 rows, got {}",
                rows.len()
            ))),
        }
    }

    pub fn carriers(&self) -> usize {
        self.gains[0].len()
    }

    pub fn gain(&self, user: User, carrier: usize) -> f64 {
        self.gains[user.index()][carrier]
    }

    pub fn row(&self, user: User) -> &[f64] {
        &self.gains[user.index()]
    }

    /// The same channel with the two users' rows exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            gains: [self.gains[1].clone(), self.gains[0].clone()],
        }
    }

    /// Best and second-best carriers `(B, S)` of `user`, 0-based.
    pub fn best_two(&self, user: User) -> (usize, usize) {
        best_two_carriers(self, user)
    }
}

/// `(B, S)`: indices of the largest and second-largest gain of `user`.
///
/// Equal gains resolve to the lower carrier index.
pub fn best_two_carriers(channel: &ChannelMatrix, user: User) -> (usize, usize) {
    let row = channel.row(user);
    let mut best = 0;
    let mut second: Option<usize> = None;
    for k in 1..row.len() {
        if row[k] > row[best] {
            second = Some(best);
            best = k;
        } else if second.is_none_or(|s| row[k] > row[s]) {
            second = Some(k);
        }
    }
    (best, second.expect("at least two carriers"))
}

/// Correlation structure of the fading model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    /// Correlation between two carriers of the same user, in `[0, 1)`.
    pub rho_carrier: f64,
    /// Correlation between the two users on the same carrier, in `[0, 1]`.
    pub theta_user: f64,
    /// Expected power gain.
    #[serde(default = "default_mean_gain")]
    pub mean_gain: f64,
}

fn default_mean_gain() -> f64 {
    1.0
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        Self::independent()
    }
}

impl CorrelationSpec {
    pub fn new(rho_carrier: f64, theta_user: f64) -> Self {
        Self {
            rho_carrier,
            theta_user,
            mean_gain: 1.0,
        }
    }

    /// `ρ = θ = 0`: i.i.d. unit-mean gains.
    pub fn independent() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho_carrier) {
            return Err(Error::Validation(format!(
                "carrier correlation must lie in [0, 1), got {}",
                self.rho_carrier
            )));
        }
        if !(0.0..=1.0).contains(&self.theta_user) {
            return Err(Error::Validation(format!(
                "user correlation must lie in [0, 1], got {}",
                self.theta_user
            )));
        }
        if !(self.mean_gain.is_finite() && self.mean_gain > 0.0) {
            return Err(Error::Validation(format!(
                "mean gain must be positive, got {}",
                self.mean_gain
            )));
        }
        Ok(())
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// RNG for one trial: seeded by `seed`, stream selected by `trial_index`.
pub(crate) fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws one correlated Rayleigh channel realization.
pub fn sample_channel(
    carriers: usize,
    spec: &CorrelationSpec,
    seed: u64,
    trial_index: u64,
) -> Result<ChannelMatrix> {
    if carriers < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 carriers, got {carriers}"
        )));
    }
    spec.validate()?;
    let mut rng = trial_rng(seed, trial_index);

    let (sr, sr_c) = (spec.rho_carrier.sqrt(), (1.0 - spec.rho_carrier).sqrt());
    let (st, st_c) = (spec.theta_user.sqrt(), (1.0 - spec.theta_user).sqrt());

    let w_shared = complex_gaussian(&mut rng);
    let w_user = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];

    let mut rows = [Vec::with_capacity(carriers), Vec::with_capacity(carriers)];
    for _ in 0..carriers {
        let e_shared = complex_gaussian(&mut rng);
        let e_user = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];
        let u = w_shared * sr + e_shared * sr_c;
        for n in 0..2 {
            let v = w_user[n] * sr + e_user[n] * sr_c;
            let z = u * st + v * st_c;
            // an exact zero has probability zero; keep the matrix valid anyway
            let g = (z.norm_sqr() * spec.mean_gain).max(f64::MIN_POSITIVE);
            rows[n].push(g);
        }
    }
    let [a, b] = rows;
    ChannelMatrix::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(a: &[f64]) -> ChannelMatrix {
        ChannelMatrix::new(a.to_vec(), a.to_vec()).unwrap()
    }

    #[test]
    fn best_two_examples() {
        assert_eq!(best_two_carriers(&fixture(&[1.0, 3.0, 2.0]), User::One), (1, 2));
        assert_eq!(best_two_carriers(&fixture(&[5.0, 5.0]), User::One), (0, 1));
        assert_eq!(
            best_two_carriers(&fixture(&[0.2, 0.9, 0.9, 0.1]), User::One),
            (1, 2)
        );
        assert_eq!(best_two_carriers(&fixture(&[4.0, 1.0, 4.0, 4.0]), User::Two), (0, 2));
        assert_eq!(best_two_carriers(&fixture(&[1.0, 1.0, 7.0]), User::One), (2, 0));
    }

    #[test]
    fn matrix_validation() {
        assert!(ChannelMatrix::new(vec![1.0], vec![1.0]).is_err());
        assert!(ChannelMatrix::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(ChannelMatrix::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(ChannelMatrix::new(vec![1.0, f64::NAN], vec![1.0, 1.0]).is_err());
        assert!(ChannelMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(sample_channel(1, &CorrelationSpec::independent(), 1, 0).is_err());
        assert!(sample_channel(3, &CorrelationSpec::new(1.0, 0.0), 1, 0).is_err());
        assert!(sample_channel(3, &CorrelationSpec::new(0.5, 1.1), 1, 0).is_err());
        assert!(sample_channel(3, &CorrelationSpec::new(-0.1, 0.0), 1, 0).is_err());
        assert!(sample_channel(3, &CorrelationSpec::new(0.9, 1.0), 1, 0).is_ok());
    }

    #[test]
    fn full_user_correlation_gives_identical_rows() {
        let spec = CorrelationSpec::new(0.0, 1.0);
        for t in 0..50 {
            let ch = sample_channel(2, &spec, 42, t).unwrap();
            assert_eq!(ch.row(User::One), ch.row(User::Two));
        }
        let ch = sample_channel(6, &CorrelationSpec::new(0.7, 1.0), 9, 3).unwrap();
        assert_eq!(ch.row(User::One), ch.row(User::Two));
    }

    #[test]
    fn deterministic_per_trial() {
        let spec = CorrelationSpec::independent();
        let a = sample_channel(4, &spec, 7, 0).unwrap();
        let b = sample_channel(4, &spec, 7, 0).unwrap();
        assert_eq!(a, b);
        let c = sample_channel(4, &spec, 7, 1).unwrap();
        assert_ne!(a, c);
        // drawing trial 5 first does not change it
        let late = sample_channel(4, &spec, 7, 5).unwrap();
        for t in 0..5 {
            sample_channel(4, &spec, 7, t).unwrap();
        }
        assert_eq!(late, sample_channel(4, &spec, 7, 5).unwrap());
    }

    #[test]
    fn iid_marginal_and_ratio_probability() {
        let spec = CorrelationSpec::independent();
        let n = 100_000u64;
        let mut sums = [0.0f64; 4];
        let mut ratio_hits = 0u64;
        let mut first = Vec::with_capacity(n as usize);
        for t in 0..n {
            let ch = sample_channel(2, &spec, 2024, t).unwrap();
            let (a, b) = (ch.gain(User::One, 0), ch.gain(User::One, 1));
            sums[0] += a;
            sums[1] += b;
            sums[2] += ch.gain(User::Two, 0);
            sums[3] += ch.gain(User::Two, 1);
            if a >= 7.4 * b || b >= 7.4 * a {
                ratio_hits += 1;
            }
            first.push(a);
        }
        for s in sums {
            assert!((s / n as f64 - 1.0).abs() < 0.02, "mean {}", s / n as f64);
        }
        // P(max >= (1+γ*) min) = 2/(2+γ*) for two i.i.d. exponentials
        let p = ratio_hits as f64 / n as f64;
        let expected = 2.0 / 8.4;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((p - expected).abs() < 4.0 * se, "{p} vs {expected}");

        first.sort_by(f64::total_cmp);
        let ks = first
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x).exp();
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn carrier_correlation_shows_up_in_gains() {
        // for Rayleigh power gains the correlation coefficient is ρ²
        let spec = CorrelationSpec::new(0.8, 0.0);
        let n = 40_000u64;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in 0..n {
            let ch = sample_channel(2, &spec, 11, t).unwrap();
            let (x, y) = (ch.gain(User::One, 0), ch.gain(User::One, 1));
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * sy / nf;
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!((corr - 0.64).abs() < 0.03, "{corr}");
    }

    #[test]
    fn mean_gain_scales_samples() {
        let base = sample_channel(3, &CorrelationSpec::new(0.3, 0.4), 5, 2).unwrap();
        let mut spec = CorrelationSpec::new(0.3, 0.4);
        spec.mean_gain = 2.5;
        let scaled = sample_channel(3, &spec, 5, 2).unwrap();
        for k in 0..3 {
            let r = scaled.gain(User::One, k) / base.gain(User::One, k);
            assert!((r - 2.5).abs() < 1e-12);
        }
    }
}
