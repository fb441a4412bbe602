use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use qdisc_core::analytic::n_goal_analytic;
use qdisc_core::grid::{QGrid, ValueFunction};
use qdisc_core::policy::{Arm, Strategy};
use qdisc_core::povm::ThetaGrid;
use qdisc_core::problem::{mixture_problem, pure_problem, Problem, ProblemSpec};
use qdisc_core::quantum::QubitState;
use qdisc_core::solver::{bellman_sweep_local, initial_value, solve_goac, solve_goal, GoacArms, SolverSettings};
use qdisc_core::Error;

fn theta(points: usize) -> Arc<ThetaGrid> {
    Arc::new(ThetaGrid::with_inclusive_points(points).unwrap())
}

fn fig1_problem() -> Problem {
    ProblemSpec::Depolarized { x0: PI / 12.0, x1: -PI / 12.0, d0: 0.01, d1: 0.001, epsilon: 0.01 }.build().unwrap()
}

#[test]
fn orthogonal_states_cost_one_copy_under_both_solvers() {
    let p = Problem::new(QubitState::pure(0.0), QubitState::pure(FRAC_PI_2), 0.01).unwrap();
    let grid = Arc::new(QGrid::uniform(101, 0.01).unwrap());
    let goal = solve_goal(&p, grid.clone(), theta(181), SolverSettings::default()).unwrap();
    let goac =
        solve_goac(&p, grid.clone(), &GoacArms::from_degrees(1.0, Some((-5.0, 20.0, 1.0))), SolverSettings::default())
            .unwrap();
    for j in 0..grid.len() {
        let want = if grid.is_decided_knot(j) { 0.0 } else { 1.0 };
        assert!((goal.value.values()[j] - want).abs() < 1e-9);
        assert!((goac.value.values()[j] - want).abs() < 1e-9);
    }
    assert!(goac.policy.actions().iter().all(|a| a.arm() != Some(Arm::Collective)));
}

#[test]
fn first_sweep_improves_on_the_start_and_the_solution_is_a_fixed_point() {
    let p = fig1_problem();
    let grid = Arc::new(QGrid::uniform(201, 0.01).unwrap());
    let th = theta(361);
    let (start, _) = initial_value(&p, grid.clone(), th.step()).unwrap();
    let once = bellman_sweep_local(&start, &p, th.clone()).unwrap();
    assert!(once.eval(0.5) < start.eval(0.5) - 1e-3);
    for (a, b) in once.values().iter().zip(start.values()) {
        assert!(*a <= b + 1e-9);
    }

    let sol = solve_goal(&p, grid, th.clone(), SolverSettings::default()).unwrap();
    assert!(sol.report.converged);
    let again = bellman_sweep_local(&sol.value, &p, th).unwrap();
    assert!(again.sup_distance(&sol.value) < 1e-4);
    assert!(sol.policy.max_elements() <= 3);
    assert!(sol.report.restriction.contains("two copies"));
}

#[test]
fn zero_value_function_is_rejected() {
    let p = fig1_problem();
    let grid = Arc::new(QGrid::uniform(51, 0.01).unwrap());
    let zero = ValueFunction::zeros(grid);
    assert!(matches!(bellman_sweep_local(&zero, &p, theta(181)), Err(Error::Domain(_))));
}

#[test]
fn stop_region_is_exact() {
    let p = pure_problem(PI / 5.0, 0.03).unwrap();
    let grid = Arc::new(QGrid::uniform(201, 0.03).unwrap());
    let sol = solve_goal(&p, grid.clone(), theta(361), SolverSettings::default()).unwrap();
    for (j, (&v, a)) in sol.value.values().iter().zip(sol.policy.actions()).enumerate() {
        let decided = grid.q(j).min(1.0 - grid.q(j)) <= 0.03 * (1.0 + 1e-12);
        assert_eq!(v == 0.0, decided, "knot {j}");
        assert_eq!(a.is_stop(), decided, "knot {j}");
    }
}

#[test]
fn collective_arm_never_hurts_on_the_same_local_grid() {
    let p = mixture_problem(0.05, PI / 12.0, 0.01).unwrap();
    let grid = Arc::new(QGrid::log_odds(301, 0.01).unwrap());
    let settings = SolverSettings::default();
    let local = solve_goac(&p, grid.clone(), &GoacArms::projective_only(0.5), settings).unwrap();
    let both = solve_goac(&p, grid, &GoacArms::from_degrees(0.5, Some((-5.0, 20.0, 0.5))), settings).unwrap();
    assert_eq!(local.policy.strategy, Strategy::ProjectiveAdaptive);
    assert_eq!(both.policy.strategy, Strategy::Goac);
    for (a, b) in both.value.values().iter().zip(local.value.values()) {
        assert!(*a <= b + 1e-6, "{a} > {b}");
    }
    assert!(both.value.eval(0.5) < local.value.eval(0.5));
    for a in both.policy.actions() {
        match a.arm() {
            Some(Arm::Collective) => assert_eq!(a.element_count(), 4),
            Some(Arm::Local) => assert_eq!(a.element_count(), 2),
            None => {}
        }
    }
}

#[test]
fn pure_states_match_the_closed_form() {
    let (x, eps) = (PI / 6.0, 0.05);
    let p = pure_problem(x, eps).unwrap();
    let grid = Arc::new(QGrid::log_odds(801, eps).unwrap());
    let sol = solve_goal(&p, grid, theta(1801), SolverSettings::default()).unwrap();
    for q in [0.1, 0.25, 0.5, 0.7, 0.9] {
        let a = n_goal_analytic(q, x, eps).unwrap();
        assert!((sol.value.eval(q) - a).abs() < 3e-2, "q = {q}: {} vs {a}", sol.value.eval(q));
    }
}

#[test]
fn mixed_states_cannot_be_discriminated_perfectly() {
    let p = mixture_problem(0.05, PI / 12.0, 0.0).unwrap();
    let grid = Arc::new(QGrid::uniform(51, 0.0).unwrap());
    assert!(matches!(solve_goal(&p, grid.clone(), theta(181), SolverSettings::default()), Err(Error::Infeasible(_))));
    assert!(matches!(
        solve_goac(&p, grid, &GoacArms::standard(), SolverSettings::default()),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let p = fig1_problem();
    let grid = Arc::new(QGrid::uniform(201, 0.01).unwrap());
    let settings = SolverSettings { tol: 1e-4, max_iter: 2, evaluate_policy: false };
    let sol = solve_goal(&p, grid, theta(361), settings).unwrap();
    assert!(!sol.report.converged);
    assert_eq!(sol.report.iterations, 2);
    assert!(sol.report.sup_norm_history.iter().all(|&d| d > 0.0));
}
