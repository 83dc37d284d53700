use carrier_game::analysis::{p_no_orth_identical, p_no_orth_iid, p_shared_region_iid};
use carrier_game::sim::{AggregateStats, Mode, Sweep, SweepConfig};

fn run(k_list: Vec<usize>, theta: f64, trials: u64, seed: u64) -> (f64, Vec<AggregateStats>) {
    let mut cfg = SweepConfig::iid(k_list, trials, seed);
    cfg.theta_list = vec![theta];
    cfg.modes = vec![Mode::Nash, Mode::Stackelberg];
    let sweep = Sweep::new(cfg).unwrap();
    (sweep.model().gamma_star(), sweep.run().unwrap())
}

fn get(stats: &[AggregateStats], k: usize, mode: Mode) -> AggregateStats {
    *stats.iter().find(|s| s.cell.k == k && s.mode == mode).unwrap()
}

/// Binomial standard error of the expected frequency.
fn se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn nash_sharing_frequency_matches_exact_region_probability() {
    let n = 40_000;
    let (gs, stats) = run(vec![2, 3], 0.0, n, 41);
    for k in [2, 3] {
        let p = get(&stats, k, Mode::Nash).p_no_orth;
        let exact = p_shared_region_iid(gs, k).unwrap();
        assert!((p - exact).abs() <= 4.0 * se(exact, n), "K={k}: {p} vs {exact}");
    }
}

#[test]
fn stackelberg_frequency_below_closed_form() {
    let n = 10_000;
    let (gs, stats) = run(vec![2, 4, 8], 0.0, n, 42);
    for k in [2, 4, 8] {
        let s = get(&stats, k, Mode::Stackelberg);
        let bound = p_no_orth_iid(gs, k).unwrap();
        assert!(s.p_no_orth <= bound + 3.0 * s.p_no_orth_se, "K={k}");
        assert!(s.p_no_orth <= get(&stats, k, Mode::Nash).p_no_orth);
    }
}

#[test]
fn identical_users_share_with_closed_form_probability() {
    // identical gains: the Nash sharing region is exactly one user's ratio event
    let n = 20_000;
    let (gs, stats) = run(vec![2, 4, 8, 16], 1.0, n, 43);
    let mut prev = (f64::INFINITY, 0.0);
    for k in [2, 4, 8, 16] {
        let nash = get(&stats, k, Mode::Nash);
        let exact = p_no_orth_identical(gs, k).unwrap();
        assert!((nash.p_no_orth - exact).abs() <= 4.0 * se(exact, n), "K={k}: {} vs {exact}", nash.p_no_orth);
        let st = get(&stats, k, Mode::Stackelberg);
        assert!(st.p_no_orth <= exact + 3.0 * se(exact, n));
        // nonincreasing in K within 2σ
        assert!(st.p_no_orth <= prev.0 + 2.0 * (prev.1 + st.p_no_orth_se), "K={k}");
        prev = (st.p_no_orth, st.p_no_orth_se);
    }
}

#[test]
fn user_correlation_raises_sharing() {
    let n = 10_000;
    let (_, iid) = run(vec![2, 4], 0.0, n, 44);
    let (_, same) = run(vec![2, 4], 1.0, n, 44);
    for k in [2, 4] {
        for mode in [Mode::Nash, Mode::Stackelberg] {
            let a = get(&iid, k, mode);
            let b = get(&same, k, mode);
            assert!(b.p_no_orth >= a.p_no_orth - 2.0 * (a.p_no_orth_se + b.p_no_orth_se), "K={k} {mode}");
        }
    }
}

#[test]
fn spectral_efficiency_approaches_orthogonal_limit() {
    let (gs, stats) = run(vec![64], 0.0, 2_000, 45);
    let cap = (1.0 + gs).log2();
    let s = get(&stats, 64, Mode::Stackelberg);
    assert!((s.se_mean - cap).abs() < 0.01);
    assert!(s.se_mean <= cap + 1e-12);
}
