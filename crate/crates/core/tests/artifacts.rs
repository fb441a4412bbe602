use qdisc_core::config::preset;
use qdisc_core::export::{read_table, value_rows, write_table, TableMeta, VALUE_HEADER};
use qdisc_core::io::Artifact;
use qdisc_core::simulator::{Runner, SamplingMode};
use qdisc_core::solver::solve_goal;

fn small_fig1c() -> qdisc_core::config::ProblemConfig {
    let mut cfg = preset("fig1c").unwrap();
    cfg.grid.points = 201;
    cfg.theta.points = 361;
    cfg
}

#[test]
fn saved_policy_simulates_like_the_original() {
    let cfg = small_fig1c();
    let problem = cfg.build_problem().unwrap();
    let sol = solve_goal(&problem, cfg.q_grid().unwrap(), cfg.theta_grid().unwrap(), cfg.solver).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("goal.policy");
    let side = dir.path().join("goal.json");
    let art = Artifact::from_solution(&cfg, &sol);
    art.write(&bin).unwrap();
    art.write_sidecar(&side).unwrap();

    let back = Artifact::read(&bin).unwrap();
    back.ensure_config(&cfg).unwrap();
    assert_eq!(back.value, sol.value);
    let run = |policy, value| {
        Runner::new(policy, &problem, SamplingMode::Outcome)
            .unwrap()
            .with_lookahead(value)
            .unwrap()
            .monte_carlo(0.5, 5_000, 9)
            .unwrap()
    };
    assert_eq!(run(&sol.policy, &sol.value), run(&back.policy, &back.value));

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 201);
    assert_eq!(json["header"]["config_hash"], cfg.hash());
}

#[test]
fn value_table_carries_metadata() {
    let cfg = small_fig1c();
    let problem = cfg.build_problem().unwrap();
    let sol = solve_goal(&problem, cfg.q_grid().unwrap(), cfg.theta_grid().unwrap(), cfg.solver).unwrap();
    let mut buf = Vec::new();
    write_table(&mut buf, &TableMeta::for_config(&cfg), &VALUE_HEADER, value_rows(&sol.value, &sol.policy)).unwrap();
    let (meta, header, rows) = read_table(buf.as_slice()).unwrap();
    assert_eq!(meta.config_hash, cfg.hash());
    assert_eq!(meta.grid_points, 201);
    assert_eq!(header, VALUE_HEADER);
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0][2], "stop");
    let mid: f64 = rows[100][1].parse().unwrap();
    assert!((mid - sol.value.values()[100]).abs() == 0.0);
}
