use std::f64::consts::PI;
use std::sync::Arc;

use qdisc_core::analytic::lower_bound;
use qdisc_core::grid::QGrid;
use qdisc_core::povm::ThetaGrid;
use qdisc_core::problem::{mixture_problem, pure_problem, ProblemSpec};
use qdisc_core::simulator::{consumption_consistency, monte_carlo, replay_posteriors, Lookup, Runner, SamplingMode};
use qdisc_core::solver::{solve_goac, solve_goal, GoacArms, SolverSettings};

fn theta() -> Arc<ThetaGrid> {
    Arc::new(ThetaGrid::with_inclusive_points(361).unwrap())
}

#[test]
fn traces_replay_to_the_recorded_posterior_and_stop_on_time() {
    let eps = 0.01;
    let p = pure_problem(PI / 4.0, eps).unwrap();
    let sol = solve_goal(&p, Arc::new(QGrid::log_odds(401, eps).unwrap()), theta(), SolverSettings::default()).unwrap();
    let runner = Runner::new(&sol.policy, &p, SamplingMode::Outcome).unwrap();
    for trial in 0..100 {
        let rec = runner.run_trial(0.4, 99, trial, true).unwrap();
        let trace = rec.trace.as_ref().unwrap();
        let path = replay_posteriors(&sol.policy, &p, 0.4, trace).unwrap();
        assert_eq!(path.len(), trace.len());
        let last = *path.last().unwrap();
        assert!((last - rec.final_posterior).abs() < 1e-9, "{last} vs {}", rec.final_posterior);
        assert!(last.min(1.0 - last) <= eps * (1.0 + 1e-9));
        for q in &path[..path.len() - 1] {
            assert!(q.min(1.0 - q) > eps * (1.0 - 1e-9), "stopped late at {q}");
        }
        let copies: u64 = trace.iter().map(|s| sol.policy.action(s.knot).copy_cost()).sum();
        assert_eq!(copies, rec.copies_used);
    }
}

#[test]
fn solver_value_and_simulated_mean_agree_and_rotation_costs_more() {
    let spec = ProblemSpec::Depolarized { x0: PI / 12.0, x1: -PI / 12.0, d0: 0.01, d1: 0.001, epsilon: 0.01 };
    let p = spec.build().unwrap();
    let sol = solve_goal(&p, Arc::new(QGrid::uniform(801, 0.01).unwrap()), theta(), SolverSettings::default()).unwrap();
    let report =
        consumption_consistency(&sol.policy, &sol.value, &p, &[0.5], 100_000, 5, 0.02, Lookup::Lookahead).unwrap();
    assert!(report.passes(), "{report:?}");

    let rotated = sol.policy.rotated(5f64.to_radians());
    let worse = monte_carlo(&rotated, &p, 0.5, 100_000, 5).unwrap();
    let se = worse.stderr_copies.unwrap();
    assert!(worse.mean_copies > sol.value.eval(0.5) + 3.0 * se, "{} vs {}", worse.mean_copies, sol.value.eval(0.5));
}

#[test]
fn perfect_discrimination_never_errs_and_meets_the_lower_bound() {
    let x = PI / 3.0;
    let p = pure_problem(x, 0.0).unwrap();
    let sol = solve_goal(&p, Arc::new(QGrid::uniform(401, 0.0).unwrap()), theta(), SolverSettings::default()).unwrap();
    let s = Runner::new(&sol.policy, &p, SamplingMode::Outcome).unwrap().monte_carlo(0.5, 200_000, 1).unwrap();
    assert_eq!(s.errors, 0);
    let lb = lower_bound(0.5, x).unwrap();
    let se = s.stderr_copies.unwrap();
    assert!((s.mean_copies - lb).abs() <= 3.0 * se + 1e-3, "{} vs {lb}", s.mean_copies);
}

#[test]
fn component_sampling_matches_outcome_sampling() {
    let p = mixture_problem(0.1, PI / 8.0, 0.01).unwrap();
    let arms = GoacArms::from_degrees(1.0, Some((-5.0, 20.0, 1.0)));
    let sol = solve_goac(&p, Arc::new(QGrid::log_odds(301, 0.01).unwrap()), &arms, SolverSettings::default()).unwrap();
    let a = Runner::new(&sol.policy, &p, SamplingMode::Outcome).unwrap().monte_carlo(0.5, 100_000, 3).unwrap();
    let b = Runner::new(&sol.policy, &p, SamplingMode::Component).unwrap().monte_carlo(0.5, 100_000, 4).unwrap();
    let se = a.stderr_copies.unwrap().hypot(b.stderr_copies.unwrap());
    assert!((a.mean_copies - b.mean_copies).abs() <= 4.0 * se, "{} vs {}", a.mean_copies, b.mean_copies);
    let total: u64 = b.histogram.values().sum();
    assert_eq!(total, 100_000);
    let mean = b.histogram.iter().map(|(c, n)| (*c * *n) as f64).sum::<f64>() / total as f64;
    assert!((mean - b.mean_copies).abs() < 1e-9);
}
