use std::path::Path;
use std::process::{Command, Output};

use carrier_game::cli::{run_with, EXIT_VERIFY_FAILED};
use carrier_game::equilibria::stackelberg_solve;
use carrier_game::game::{self, GameInstance};
use carrier_game::{EfficiencyModel, EquilibriumOutcome, User};

const FIXTURE: &str = r#"{"sigma2": 1.0, "rates": [1, 1], "gains": [[3, 1], [1, 2]],
    "efficiency": {"kind": "exponential", "M": 100}}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carrier-game"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn value<'a>(report: &'a str, section: &str, key: &str) -> &'a str {
    let start = report.find(&format!("[{section}]")).expect("section present");
    report[start..]
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .expect("key present")
}

fn pair(s: &str) -> (f64, f64) {
    let inner = s.trim_matches(|c| c == '(' || c == ')');
    let (a, b) = inner.split_once(',').unwrap();
    (a.parse().unwrap(), b.parse().unwrap())
}

#[test]
fn solve_reports_one_based_carriers_and_powers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("inst.json"), FIXTURE).unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "inst.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    let gs = EfficiencyModel::exponential(100).unwrap().gamma_star();
    assert_eq!(value(&report, "stackelberg", "carriers"), "(1,2)");
    let (p1, p2) = pair(value(&report, "stackelberg", "powers"));
    assert!((p1 - gs / 3.0).abs() < 1e-8 && (p2 - gs / 2.0).abs() < 1e-8);
    // the γ* ≈ 6.4 approximations
    assert!((p1 - 2.1333).abs() < 0.05 && (p2 - 3.2).abs() < 0.05);
    assert_eq!(value(&report, "stackelberg", "orthogonalized"), "true");
    assert_eq!(value(&report, "nash", "kind"), "NashExact");
    assert_eq!(value(&report, "social", "kind"), "SocialOptimum");

    let out = run_in(dir.path(), &["solve", "--config", "inst.json", "--mode", "nash", "--format", "csv"]);
    let csv = text(&out.stdout);
    assert!(csv.starts_with("mode,kind,orthogonalized,carrier1,carrier2"));
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("nash,NashExact,true,1,2,"));
}

#[test]
fn solve_counterexample_prints_epsilon_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cx.json"),
        r#"{"sigma2": 1, "rates": [1, 1], "gains": [[100, 1], [100, 1]], "efficiency": {"kind": "counterexample"}}"#,
    )
    .unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "cx.json", "--mode", "stackelberg"]);
    assert_eq!(out.status.code(), Some(0));
    let report = text(&out.stdout);
    assert_eq!(value(&report, "stackelberg", "kind"), "StackelbergEpsilon");
    let eps: f64 = value(&report, "stackelberg", "epsilon").parse().unwrap();
    let alpha: f64 = value(&report, "stackelberg", "alpha").parse().unwrap();
    assert!((eps - 25e-6).abs() < 1e-12);
    assert!(alpha > 0.0);
    assert_eq!(value(&report, "stackelberg", "V0_B1"), "25");
    assert_eq!(value(&report, "stackelberg", "leader_choice"), "V0");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        "{\"rates\": [1, 1],\n \"gains\": [[3, 1], [1, 2]],\n \"efficiency\": {\"kind\": \"exponential\", \"M\": 100}}",
    )
    .unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("sigma2") && err.contains("line 3"), "{err}");

    std::fs::write(dir.path().join("unknown.json"), FIXTURE.replace("\"rates\"", "\"noise\": 2, \"rates\"")).unwrap();
    assert_eq!(run_in(dir.path(), &["solve", "--config", "unknown.json"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["solve", "--config", "missing.json"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["solve"]).status.code(), Some(2));
}

#[test]
fn precondition_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("inst.json"), FIXTURE).unwrap();
    let out = run_in(dir.path(), &["solve", "--config", "inst.json", "--epsilon", "0.001"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("precondition"));
}

#[test]
fn sweep_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.json"),
        r#"{"K_list": [2, 4], "rho_list": [0], "theta_list": [0, 1], "trials": 300, "seed": 5, "modes": ["stackelberg", "nash"]}"#,
    )
    .unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = run_in(dir.path(), &["sweep", "--config", "sweep.json", "--out", name]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "K,rho,theta,mode,trials,p_no_orth,p_no_orth_se,ee_mean,ee_user1,ee_user2,se_mean,welfare_mean"
    );
    assert_eq!(lines.count(), 8);
    assert!(a.contains("\n2,0,0,nash,300,"));

    let out = run_in(dir.path(), &["sweep", "--config", "sweep.json", "--out", "c.csv", "--per-trial"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("c.csv")).unwrap(), a);
    let trials = std::fs::read_to_string(dir.path().join("c.trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 4 * 300 * 2);
}

#[test]
fn sweep_with_one_trial_reports_zero_stderr() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("one.json"),
        r#"{"K_list": [3], "rho_list": [0.2], "theta_list": [0.5], "trials": 1, "seed": 2}"#,
    )
    .unwrap();
    let out = run_in(dir.path(), &["sweep", "--config", "one.json", "--out", "one.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    for row in csv.lines().skip(1) {
        assert_eq!(row.split(',').nth(6), Some("0"), "{row}");
    }

    std::fs::write(dir.path().join("bad.json"), r#"{"K_list": [], "rho_list": [0], "theta_list": [0]}"#).unwrap();
    let out = run_in(dir.path(), &["sweep", "--config", "bad.json", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

fn bounds_rows(csv: &str) -> Vec<(usize, String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().to_string(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn bounds_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["bounds", "--M", "100", "--k-min", "1", "--k-max", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = text(&out.stdout);
    assert!(csv.starts_with("K,kind,value\n"));
    let rows = bounds_rows(&csv);
    assert_eq!(rows.len(), 4 * 32);
    assert!(rows.contains(&(1, "ProbNoOrthIID".into(), 1.0)));
    let gs = EfficiencyModel::exponential(100).unwrap().gamma_star();
    let se32 = rows.iter().find(|r| r.0 == 32 && r.1 == "SEBoundIID").unwrap().2;
    assert!(se32 < (1.0 + gs).log2());

    // γ* passed directly reproduces the solved curves
    let direct = run_in(dir.path(), &["bounds", "--gamma-star", &gs.to_string(), "--k-max", "32", "--out", "b.csv"]);
    assert_eq!(direct.status.code(), Some(0));
    let direct_rows = bounds_rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    for (a, b) in rows.iter().zip(&direct_rows) {
        assert!((a.2 - b.2).abs() < 1e-3);
    }
    // the rounded value 6.4 only matches the i.i.d. probability curve to 1e-3
    let rounded = bounds_rows(&text(&run_in(dir.path(), &["bounds", "--gamma-star", "6.4", "--k-max", "32"]).stdout));
    for (a, b) in rows.iter().zip(&rounded) {
        if a.1 == "ProbNoOrthIID" {
            assert!((a.2 - b.2).abs() < 1e-3, "{a:?} {b:?}");
        }
    }

    assert_eq!(run_in(dir.path(), &["bounds", "--M", "100", "--k-min", "5", "--k-max", "4"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["bounds", "--k-max", "4"]).status.code(), Some(2));
}

#[test]
fn verify_passes_with_default_solver() {
    let out = bin().args(["verify", "--trials", "120", "--seed", "3"]).output().unwrap();
    let report = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{report}");
    assert!(report.contains("payoff situations:"));
    for case in ["Case1", "Case2", "Case3", "Other"] {
        assert!(report.contains(case));
    }
}

fn corrupted(inst: &GameInstance) -> carrier_game::Result<EquilibriumOutcome> {
    let mut out = stackelberg_solve(inst)?;
    out.users[0].power *= 0.7;
    let alloc = out.allocation(inst.carriers()).expect("finite powers");
    out.users[0].utility = game::utility(inst, &alloc, User::One);
    Ok(out)
}

#[test]
fn verify_fails_with_corrupted_solver() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(["carrier-game", "verify", "--trials", "40", "--seed", "9"], &mut out, &mut err, corrupted);
    assert_eq!(code, EXIT_VERIFY_FAILED);
    let report = text(&out);
    assert!(report.contains("FAIL") && report.contains("seed 9 trial"), "{report}");
}
