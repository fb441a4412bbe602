//! WebAssembly bindings for the static page in `www/`.
//!
//! The page offers three operations on a pair of pure qubit states at
//! half-angle `x`: the closed-form locally adaptive curve with its lower
//! bound, a numerical solve on a small grid, and Monte Carlo runs of the
//! solved policy. Every result crosses the boundary as a JSON string.

use std::sync::Arc;

use qdisc_core::analytic::{lower_bound, n_goal_analytic};
use qdisc_core::grid::{logit, QGrid};
use qdisc_core::povm::ThetaGrid;
use qdisc_core::problem::{pure_problem, Problem};
use qdisc_core::simulator::{Runner, SamplingMode};
use qdisc_core::solver::{solve_goal, Solution, SolverSettings};
use qdisc_core::Result;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest grid the page may request; bigger solves stall the tab.
pub const MAX_GRID_POINTS: usize = 801;
const THETA_POINTS: usize = 361;
const MAX_TRIALS: u64 = 200_000;

fn bad(msg: impl Into<String>) -> qdisc_core::Error {
    qdisc_core::Error::Domain(msg.into())
}

/// Closed-form expected copies at `samples` priors spread evenly over
/// `(0, 1)`, next to the error-free collective lower bound.
pub fn analytic_curve(x_deg: f64, eps: f64, samples: usize) -> Result<String> {
    if !(2..=2000).contains(&samples) {
        return Err(bad(format!("samples must lie in 2..=2000, got {samples}")));
    }
    let x = x_deg.to_radians();
    let n = samples as f64 + 1.0;
    let (mut qs, mut goal, mut bound) = (Vec::new(), Vec::new(), Vec::new());
    for i in 1..=samples {
        let q = i as f64 / n;
        qs.push(q);
        goal.push(n_goal_analytic(q, x, eps)?);
        bound.push(lower_bound(q, x)?);
    }
    Ok(json!({ "q": qs, "n_goal": goal, "lower_bound": bound }).to_string())
}

/// A solved locally adaptive policy held on the JS side between calls.
#[wasm_bindgen]
pub struct PureSolve {
    problem: Problem,
    solution: Solution,
}

impl PureSolve {
    pub fn solve(x_deg: f64, eps: f64, grid_points: usize) -> Result<Self> {
        if !(11..=MAX_GRID_POINTS).contains(&grid_points) {
            return Err(bad(format!("grid points must lie in 11..={MAX_GRID_POINTS}, got {grid_points}")));
        }
        let problem = pure_problem(x_deg.to_radians(), eps)?;
        let grid = Arc::new(QGrid::log_odds(grid_points, eps)?);
        let theta = Arc::new(ThetaGrid::with_inclusive_points(THETA_POINTS)?);
        let solution = solve_goal(&problem, grid, theta, SolverSettings::default())?;
        Ok(Self { problem, solution })
    }

    pub fn curve_json(&self) -> String {
        let v = &self.solution.value;
        let r = &self.solution.report;
        json!({
            "q": v.grid().points(),
            "value": v.values(),
            "iterations": r.iterations,
            "converged": r.converged,
        })
        .to_string()
    }

    /// Measurement used at the knot nearest `q`, or `"stop"` when decided.
    pub fn action_json(&self, q: f64) -> Result<String> {
        if !(q > 0.0 && q < 1.0) {
            return Err(bad(format!("prior must lie in (0, 1), got {q}")));
        }
        let policy = &self.solution.policy;
        let action = match policy.grid().nearest_knot(q, logit(q)) {
            Some(j) => serde_json::to_value(policy.action(j)).map_err(|e| bad(e.to_string()))?,
            None => json!("stop"),
        };
        Ok(json!({ "q": q, "expected_copies": self.solution.value.eval(q), "action": action }).to_string())
    }

    pub fn simulate_json(&self, q0: f64, trials: u64, seed: u64) -> Result<String> {
        if !(1..=MAX_TRIALS).contains(&trials) {
            return Err(bad(format!("trials must lie in 1..={MAX_TRIALS}, got {trials}")));
        }
        let summary = Runner::new(&self.solution.policy, &self.problem, SamplingMode::Outcome)?
            .with_lookahead(&self.solution.value)?
            .monte_carlo(q0, trials, seed)?;
        serde_json::to_string(&summary).map_err(|e| bad(e.to_string()))
    }
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = analyticCurve)]
pub fn analytic_curve_js(x_deg: f64, eps: f64, samples: usize) -> std::result::Result<String, JsError> {
    js(analytic_curve(x_deg, eps, samples))
}

#[wasm_bindgen]
impl PureSolve {
    #[wasm_bindgen(constructor)]
    pub fn new(x_deg: f64, eps: f64, grid_points: usize) -> std::result::Result<PureSolve, JsError> {
        Self::solve(x_deg, eps, grid_points).map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = curve)]
    pub fn curve_js(&self) -> String {
        self.curve_json()
    }

    #[wasm_bindgen(js_name = action)]
    pub fn action_js(&self, q: f64) -> std::result::Result<String, JsError> {
        js(self.action_json(q))
    }

    #[wasm_bindgen(js_name = simulate)]
    pub fn simulate_js(&self, q0: f64, trials: u32, seed: u32) -> std::result::Result<String, JsError> {
        js(self.simulate_json(q0, u64::from(trials), u64::from(seed)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn error_free_curve_sits_on_or_above_its_bound() {
        let v: Value = serde_json::from_str(&analytic_curve(30.0, 0.0, 9).unwrap()).unwrap();
        let goal = v["n_goal"].as_array().unwrap();
        let bound = v["lower_bound"].as_array().unwrap();
        assert_eq!(goal.len(), 9);
        for (g, b) in goal.iter().zip(bound) {
            assert!(g.as_f64().unwrap() >= b.as_f64().unwrap() - 1e-9);
        }
        assert!(analytic_curve(30.0, 0.01, 1).is_err());
    }

    #[test]
    fn small_solve_tracks_the_closed_form() {
        let s = PureSolve::solve(30.0, 0.01, 201).unwrap();
        let curve: Value = serde_json::from_str(&s.curve_json()).unwrap();
        assert!(curve["converged"].as_bool().unwrap());
        let n = n_goal_analytic(0.5, 30f64.to_radians(), 0.01).unwrap();
        let numeric = s.solution.value.eval(0.5);
        assert!((numeric - n).abs() / n < 0.05, "{numeric} vs {n}");

        let a: Value = serde_json::from_str(&s.action_json(0.5).unwrap()).unwrap();
        assert!(a["action"].is_object());
        let a: Value = serde_json::from_str(&s.action_json(0.999).unwrap()).unwrap();
        assert_eq!(a["action"], "stop");

        let sim: Value = serde_json::from_str(&s.simulate_json(0.5, 2000, 7).unwrap()).unwrap();
        assert_eq!(sim["trials"], 2000);
        assert!(s.simulate_json(0.5, 0, 7).is_err());
        assert!(PureSolve::solve(30.0, 0.01, 5000).is_err());
    }
}
