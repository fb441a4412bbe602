use std::path::Path;
use std::process::{Command, Output};

fn qdisc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdisc"))
        .args(args)
        .current_dir(dir)
        .env_remove("QDISC_THREADS")
        .output()
        .expect("qdisc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value printed on the `N(q) = v` line.
fn printed_value(out: &str, q: &str) -> f64 {
    let prefix = format!("N({q}) = ");
    out.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no N({q}) line in:\n{out}"))
        .trim()
        .parse()
        .unwrap()
}

const SMALL: &str = r#"
name = "small"
at = [0.5]

[problem]
family = "pure"
x = "pi/4"
epsilon = 0.02

[grid]
points = 201
kind = "log_odds"

[theta]
points = 361

[solver]
tol = 1e-4
max_iter = 100
evaluate_policy = true

[simulation]
seed = 1
trials = 1000
q0 = [0.5]
"#;

fn small_policy(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    let o = qdisc(&["solve", "--config", "small.toml", "--mode", "goal", "--out", "out"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn solve_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    small_policy(dir.path());
    for f in ["small_goal.policy", "small_goal.policy.json", "small_goal_report.json", "small_goal_values.csv"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/small_goal_values.csv")).unwrap();
    assert!(csv.starts_with("# qdisc "));
    assert!(csv.lines().nth(1).unwrap().starts_with("q,value,arm"));
}

#[test]
fn simulation_is_reproducible_and_checked_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_policy(d);
    let sim = |out: &str| {
        qdisc(
            &[
                "simulate",
                "--policy",
                "out/small_goal.policy",
                "--config",
                "small.toml",
                "--q0",
                "0.5",
                "--trials",
                "4000",
                "--seed",
                "3",
                "--trace",
                "5",
                "--out",
                out,
            ],
            d,
        )
    };
    let (a, b) = (sim("a"), sim("b"));
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    for f in ["summary.json", "histogram.csv", "trace.jsonl"] {
        let name = format!("small_goal_q0.5_seed3_{f}");
        let x = std::fs::read(d.join("a").join(&name)).unwrap();
        let y = std::fs::read(d.join("b").join(&name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let trace = std::fs::read_to_string(d.join("a/small_goal_q0.5_seed3_trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 5);

    let threads = qdisc(
        &[
            "--threads",
            "1",
            "simulate",
            "--policy",
            "out/small_goal.policy",
            "--q0",
            "0.5",
            "--trials",
            "4000",
            "--seed",
            "3",
            "--out",
            "c",
        ],
        d,
    );
    assert!(threads.status.success());
    let x = std::fs::read(d.join("a/small_goal_q0.5_seed3_summary.json")).unwrap();
    let y = std::fs::read(d.join("c/small_goal_q0.5_seed3_summary.json")).unwrap();
    assert_eq!(x, y, "thread count changed the summary");

    std::fs::write(d.join("other.toml"), SMALL.replace("epsilon = 0.02", "epsilon = 0.03")).unwrap();
    let o = qdisc(&["simulate", "--policy", "out/small_goal.policy", "--config", "other.toml", "--q0", "0.5"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hash"), "{}", stderr(&o));
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_policy(d);
    let o = qdisc(&["simulate", "--policy", "out/small_goal.policy", "--q0", "0.5", "--trials", "0"], d);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(d.join("bad.toml"), SMALL.replace("points = 361", "pointz = 361")).unwrap();
    let o = qdisc(&["solve", "--config", "bad.toml"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pointz"), "{}", stderr(&o));

    std::fs::write(d.join("range.toml"), SMALL.replace("epsilon = 0.02", "epsilon = 0.7")).unwrap();
    let o = qdisc(&["solve", "--config", "range.toml"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.epsilon"), "{}", stderr(&o));

    assert_eq!(qdisc(&["solve", "--preset", "nope"], d).status.code(), Some(2));
    assert_eq!(qdisc(&["frobnicate"], d).status.code(), Some(2));
}

#[test]
fn infeasible_and_unconverged_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mixed = SMALL
        .replace(
            "family = \"pure\"\nx = \"pi/4\"\nepsilon = 0.02",
            "family = \"mixture\"\ns = 0.1\nangle = \"pi/6\"\nepsilon = 0.0",
        )
        .replace("kind = \"log_odds\"", "kind = \"uniform\"");
    std::fs::write(d.join("mixed.toml"), mixed).unwrap();
    assert_eq!(qdisc(&["solve", "--config", "mixed.toml"], d).status.code(), Some(3));

    std::fs::write(
        d.join("short.toml"),
        SMALL.replace("max_iter = 100\nevaluate_policy = true", "max_iter = 1\nevaluate_policy = false"),
    )
    .unwrap();
    let o = qdisc(&["solve", "--config", "short.toml", "--out", "o"], d);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(d.join("o/small_goal.policy").is_file());
}

#[test]
fn consistency_check_flags_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_policy(d);
    let ok = qdisc(&["check", "--policy", "out/small_goal.policy", "--trials", "20000"], d);
    assert!(ok.status.success(), "{}{}", stdout(&ok), stderr(&ok));
    let bad = qdisc(&["check", "--policy", "out/small_goal.policy", "--trials", "20000", "--slack=-5"], d);
    assert_eq!(bad.status.code(), Some(5));
}

#[test]
fn analytic_matches_the_lower_bound_without_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdisc(&["analytic", "--x", "pi/6", "--eps", "0", "--q", "0.5"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect();
    assert!((row[4] - row[5]).abs() < 1e-8, "{out}");
}

#[test]
fn eta_row_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdisc(&["eta", "--preset", "fig2", "--q", "0.5", "--s", "0.05"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[2] < row[3] && row[3] < row[4], "{out}");
}

#[test]
fn preset_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let list = stdout(&qdisc(&["preset"], d));
    for name in ["fig1", "fig1c", "fig2c", "fig3"] {
        assert!(list.lines().any(|l| l == name));
    }
    let text = stdout(&qdisc(&["preset", "fig3", "--json"], d));
    std::fs::write(d.join("fig3.json"), text).unwrap();
    let o = qdisc(&["baseline", "gofl", "--config", "fig3.json", "--at", "0.5", "--out", "gofl.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("gofl.csv")).unwrap();
    let copies: f64 = csv.lines().nth(2).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((copies - 85.1).abs() / 85.1 <= 0.02, "{csv}");
}

#[test]
fn fig3_goac_headline() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdisc(&["solve", "--preset", "fig3", "--mode", "goac", "--at", "0.5", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = printed_value(&stdout(&o), "0.5");
    assert!((v - 63.8).abs() / 63.8 <= 0.02, "{v}");
}
