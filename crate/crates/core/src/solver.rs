//! Value iteration for the adaptive strategies.
//!
//! Every sweep reads a frozen value function and writes a fresh one, so the
//! result does not depend on how knots are scheduled across threads.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{fixed_value, FixedSettings};
use crate::error::{Error, Result};
use crate::grid::{interpolate, Likelihood, QGrid, ValueFunction};
use crate::markov::{Chain, IterativeSettings};
use crate::policy::{Action, Policy, Strategy};
use crate::povm::{tie_tolerance, AngleLikelihoods, Condition, SupportSearch, ThetaGrid};
use crate::problem::Problem;
use crate::quantum::Measurement;

/// Recorded in every report: the copy count per round is searched over
/// `{1, 2}` only.
pub const ARITY_RESTRICTION: &str =
    "rounds measure one copy locally or two copies collectively; larger blocks are not searched";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Sup-norm change between sweeps that counts as converged, in copies.
    pub tol: f64,
    pub max_iter: usize,
    /// After each sweep, replace the swept values by the exact cost of the
    /// greedy policy it selected (policy iteration). Plain value iteration
    /// crawls when posteriors move in small steps, and its stopping test
    /// then fires long before the values settle.
    pub evaluate_policy: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 1000, evaluate_policy: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub strategy: Strategy,
    pub iterations: usize,
    pub sup_norm_history: Vec<f64>,
    pub converged: bool,
    pub wall_time_secs: f64,
    /// Largest pointwise increase seen across sweeps (zero for a monotone run).
    pub max_increase: f64,
    pub start: Action,
    pub restriction: String,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueFunction,
    pub policy: Policy,
    pub report: SolveReport,
    pub initial: ValueFunction,
}

#[cfg(feature = "parallel")]
fn map_knots<T, S, I, F>(n: usize, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map_init(init, f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_knots<T, S, I, F>(n: usize, init: I, f: F) -> Result<Vec<T>>
where
    I: Fn() -> S,
    F: Fn(&mut S, usize) -> Result<T>,
{
    let mut state = init();
    (0..n).map(|j| f(&mut state, j)).collect()
}

/// Realizable starting curve: repeat one measurement until decided.
///
/// With `ε > 0` this is the equal-prior Helstrom projector, its angle
/// snapped to a multiple of `snap_step` so that the first sweep can only
/// improve on it. With `ε = 0` and non-orthogonal pure states no projective
/// measurement ever decides, so the start is the three-outcome POVM with
/// two exclusion elements and one element on the bisector, which costs
/// `1/(1 − |⟨ψ0|ψ1⟩|)` copies from any prior.
pub fn initial_value(problem: &Problem, grid: Arc<QGrid>, snap_step: f64) -> Result<(ValueFunction, Action)> {
    let snap = |t: f64| (t / snap_step).round() * snap_step;
    let action = if problem.epsilon > 0.0 || orthogonal(problem) {
        Action::Projective { theta: snap(problem.helstrom_angle()) }
    } else if problem.both_pure() {
        exclusion_trine(problem, snap_step)?
    } else {
        return Err(Error::Infeasible("perfect discrimination of mixed states needs unbounded copies".into()));
    };
    let value = fixed_value(problem, &action, grid, FixedSettings::default())?;
    Ok((value, action))
}

fn orthogonal(problem: &Problem) -> bool {
    problem.both_pure() && (problem.rho0.bloch_angle() - problem.rho1.bloch_angle()).cos().abs() < 1e-12
}

fn exclusion_trine(problem: &Problem, step: f64) -> Result<Action> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let (x0, x1) = (problem.rho0.bloch_angle(), problem.rho1.bloch_angle());
    let mut thetas = [x0 + FRAC_PI_2, x1 + FRAC_PI_2, 0.5 * (x0 + x1)].map(|t| t.rem_euclid(PI));
    for t in &thetas {
        let r = t / step;
        if (r - r.round()).abs() > 1e-6 {
            return Err(Error::Infeasible(format!(
                "exclusion angle {t} is not on the measurement grid of step {step}"
            )));
        }
    }
    thetas.sort_by(f64::total_cmp);
    let weights = crate::povm::triple_weights(thetas);
    Measurement::three_element(thetas, weights)?;
    Ok(Action::Povm { thetas, weights })
}

/// Reusable state for exact local sweeps.
pub struct LocalSweeper {
    theta: Arc<ThetaGrid>,
    liks: AngleLikelihoods,
}

impl LocalSweeper {
    pub fn new(problem: &Problem, theta: Arc<ThetaGrid>) -> Self {
        let liks = AngleLikelihoods::new(theta.clone(), &problem.rho0, &problem.rho1);
        Self { theta, liks }
    }

    pub fn sweep(&self, value_fn: &ValueFunction) -> Result<(Vec<f64>, Vec<Action>)> {
        let grid = value_fn.grid();
        let k = self.theta.len();
        let out = map_knots(
            grid.len(),
            || (SupportSearch::new(), vec![0.0; k]),
            |(search, g), j| -> Result<(f64, Action)> {
                if grid.is_decided_knot(j) {
                    return Ok((0.0, Action::Stop));
                }
                let prior = grid.prior(j);
                self.liks.fill_density(&prior, value_fn, g);
                let support = search
                    .search(&self.theta, g, tie_tolerance(g))
                    .map_err(|e| Error::SearchFailureAt { q: prior.q, source: Box::new(e) })?;
                let integral: f64 = support.indices.iter().zip(&support.weights).map(|(&i, w)| w * g[i]).sum();
                let action = match support.condition {
                    Condition::Antipodal => Action::Projective { theta: support.angles[0] },
                    Condition::Triple => Action::Povm {
                        thetas: [support.angles[0], support.angles[1], support.angles[2]],
                        weights: [support.weights[0], support.weights[1], support.weights[2]],
                    },
                };
                Ok((1.0 + integral, action))
            },
        )?;
        Ok(out.into_iter().unzip())
    }
}

/// One exact sweep of the local recursion.
pub fn bellman_sweep_local(
    value_fn: &ValueFunction,
    problem: &Problem,
    theta: Arc<ThetaGrid>,
) -> Result<ValueFunction> {
    value_fn.check_realizable(problem)?;
    let (values, _) = LocalSweeper::new(problem, theta).sweep(value_fn)?;
    ValueFunction::new(value_fn.grid().clone(), values)
}

/// Exact expected consumption of following `actions` knot by knot.
pub fn evaluate_policy(problem: &Problem, grid: Arc<QGrid>, actions: &[Action]) -> Result<ValueFunction> {
    if actions.len() != grid.len() {
        return Err(Error::Domain("one action per knot is required".into()));
    }
    let Some(mut chain) = Chain::new(&grid) else {
        return Ok(ValueFunction::zeros(grid));
    };
    let (lo, hi) = chain.range();
    for (j, action) in actions.iter().enumerate().take(hi + 1).skip(lo) {
        if action.is_stop() {
            return Err(Error::Domain(format!("policy stops at undecided knot {j}")));
        }
        let prior = grid.prior(j);
        let edges = action.likelihoods(problem)?.iter().filter_map(|l| grid.transition(&prior, l)).collect();
        chain.push(action.copy_cost() as f64, edges);
    }
    let values = chain.solve(IterativeSettings::default())?;
    ValueFunction::new(grid, values)
}

// The browser target has no monotonic clock in std, so wall time reads 0 there.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn start_clock() -> impl Fn() -> f64 {
    let t = std::time::Instant::now();
    move || t.elapsed().as_secs_f64()
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn start_clock() -> impl Fn() -> f64 {
    || 0.0
}

fn iterate(
    problem: &Problem,
    strategy: Strategy,
    initial: ValueFunction,
    start: Action,
    settings: SolverSettings,
    mut sweep: impl FnMut(&ValueFunction) -> Result<(Vec<f64>, Vec<Action>)>,
) -> Result<Solution> {
    let elapsed = start_clock();
    let grid = initial.grid().clone();
    let mut current = initial.clone();
    let mut history = Vec::new();
    let mut max_increase = 0.0f64;
    let mut actions = Vec::new();
    let mut converged = false;
    for _ in 0..settings.max_iter {
        let (values, acts) = sweep(&current)?;
        let next = if settings.evaluate_policy {
            evaluate_policy(problem, grid.clone(), &acts)?
        } else {
            ValueFunction::new(grid.clone(), values)?
        };
        let mut change = 0.0f64;
        for (new, old) in next.values().iter().zip(current.values()) {
            change = change.max((new - old).abs());
            max_increase = max_increase.max(new - old);
        }
        history.push(change);
        current = next;
        actions = acts;
        if change < settings.tol {
            converged = true;
            break;
        }
    }
    let policy = Policy::new(strategy, grid, actions)?;
    let report = SolveReport {
        strategy,
        iterations: history.len(),
        sup_norm_history: history,
        converged,
        wall_time_secs: elapsed(),
        max_increase,
        start,
        restriction: ARITY_RESTRICTION.to_string(),
    };
    Ok(Solution { value: current, policy, report, initial })
}

/// Adaptive local strategy by exact support search at every knot.
pub fn solve_goal(
    problem: &Problem,
    grid: Arc<QGrid>,
    theta: Arc<ThetaGrid>,
    settings: SolverSettings,
) -> Result<Solution> {
    let (initial, start) = initial_value(problem, grid, theta.step())?;
    solve_goal_from(problem, initial, start, theta, settings)
}

/// As [`solve_goal`] from a caller-supplied realizable start.
pub fn solve_goal_from(
    problem: &Problem,
    initial: ValueFunction,
    start: Action,
    theta: Arc<ThetaGrid>,
    settings: SolverSettings,
) -> Result<Solution> {
    initial.check_realizable(problem)?;
    let sweeper = LocalSweeper::new(problem, theta);
    iterate(problem, Strategy::Goal, initial, start, settings, |v| sweeper.sweep(v))
}

/// Angle lists for the two arms of the mixed local/collective recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoacArms {
    /// Projective angles; `[0, π/2)` covers every projective measurement.
    pub local: Vec<f64>,
    /// Collective basis angles; empty disables the two-copy arm.
    pub collective: Vec<f64>,
    pub local_step: f64,
}

impl GoacArms {
    pub fn from_degrees(local_step: f64, collective: Option<(f64, f64, f64)>) -> Self {
        let n = (90.0 / local_step).round() as usize;
        let local = (0..n).map(|i| (i as f64 * local_step).to_radians()).collect();
        let collective = match collective {
            Some((lo, hi, step)) => {
                let m = ((hi - lo) / step).round() as usize + 1;
                (0..m).map(|i| (lo + i as f64 * step).to_radians()).collect()
            }
            None => Vec::new(),
        };
        Self { local, collective, local_step: local_step.to_radians() }
    }

    /// `0.1°` projective steps over `[0°, 90°)` and `0.25°` collective steps
    /// over `[−5°, 20°]`.
    pub fn standard() -> Self {
        Self::from_degrees(0.1, Some((-5.0, 20.0, 0.25)))
    }

    pub fn projective_only(local_step_deg: f64) -> Self {
        Self::from_degrees(local_step_deg, None)
    }
}

struct ArmTable {
    angles: Vec<f64>,
    outcomes: usize,
    cost: f64,
    liks: Vec<Likelihood>,
}

impl ArmTable {
    fn new(problem: &Problem, angles: &[f64], make: impl Fn(f64) -> Action) -> Result<Self> {
        let mut liks = Vec::new();
        let mut outcomes = 0;
        let mut cost = 0.0;
        for &t in angles {
            let a = make(t);
            let l = a.likelihoods(problem)?;
            outcomes = l.len();
            cost = a.copy_cost() as f64;
            liks.extend(l);
        }
        Ok(Self { angles: angles.to_vec(), outcomes, cost, liks })
    }

    /// Best `(cost, index)` for this prior; ties go to the smaller angle.
    fn best(&self, grid: &QGrid, values: &[f64], prior: &crate::grid::Prior) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, chunk) in self.liks.chunks(self.outcomes.max(1)).enumerate() {
            let mut c = self.cost;
            for l in chunk {
                if let Some((p, loc)) = grid.transition(prior, l) {
                    c += p * interpolate(values, loc);
                }
            }
            if best.is_none_or(|(bc, _)| c < bc) {
                best = Some((c, i));
            }
        }
        best
    }
}

pub struct GoacSweeper {
    local: ArmTable,
    collective: ArmTable,
}

impl GoacSweeper {
    pub fn new(problem: &Problem, arms: &GoacArms) -> Result<Self> {
        Ok(Self {
            local: ArmTable::new(problem, &arms.local, |theta| Action::Projective { theta })?,
            collective: ArmTable::new(problem, &arms.collective, |theta| Action::Collective { theta })?,
        })
    }

    pub fn sweep(&self, value_fn: &ValueFunction) -> Result<(Vec<f64>, Vec<Action>)> {
        let grid = value_fn.grid();
        let values = value_fn.values();
        let out = map_knots(
            grid.len(),
            || (),
            |_, j| -> Result<(f64, Action)> {
                if grid.is_decided_knot(j) {
                    return Ok((0.0, Action::Stop));
                }
                let prior = grid.prior(j);
                let local = self.local.best(grid, values, &prior);
                let coll = self.collective.best(grid, values, &prior);
                Ok(match (local, coll) {
                    (Some((cl, _)), Some((cc, ic))) if cc < cl - 1e-12 * cl => {
                        (cc, Action::Collective { theta: self.collective.angles[ic] })
                    }
                    (Some((cl, il)), _) => (cl, Action::Projective { theta: self.local.angles[il] }),
                    (None, Some((cc, ic))) => (cc, Action::Collective { theta: self.collective.angles[ic] }),
                    (None, None) => return Err(Error::Domain("no measurement arms configured".into())),
                })
            },
        )?;
        Ok(out.into_iter().unzip())
    }
}

pub fn bellman_sweep_goac(value_fn: &ValueFunction, problem: &Problem, arms: &GoacArms) -> Result<ValueFunction> {
    value_fn.check_realizable(problem)?;
    let (values, _) = GoacSweeper::new(problem, arms)?.sweep(value_fn)?;
    ValueFunction::new(value_fn.grid().clone(), values)
}

/// Adaptive strategy mixing projective one-copy and collective two-copy
/// rounds. With no collective angles this is the projective-only adaptive
/// strategy.
pub fn solve_goac(problem: &Problem, grid: Arc<QGrid>, arms: &GoacArms, settings: SolverSettings) -> Result<Solution> {
    if arms.local.is_empty() {
        return Err(Error::Domain("the local arm needs at least one angle".into()));
    }
    if problem.epsilon == 0.0 && !orthogonal(problem) {
        return Err(Error::Infeasible(
            "no repeated projective measurement decides non-orthogonal states with zero error".into(),
        ));
    }
    let (initial, start) = initial_value(problem, grid, arms.local_step)?;
    let sweeper = GoacSweeper::new(problem, arms)?;
    let strategy = if arms.collective.is_empty() { Strategy::ProjectiveAdaptive } else { Strategy::Goac };
    iterate(problem, strategy, initial, start, settings, |v| sweeper.sweep(v))
}
