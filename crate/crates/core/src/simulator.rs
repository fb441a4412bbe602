//! Monte Carlo runs of a solved policy against a hidden true state.
//!
//! Each trial draws from its own ChaCha stream `(seed, trial)`, and the
//! aggregates are integer sums, so a summary is bit-identical however the
//! trials are split across threads.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate, logistic, logit, Likelihood, Location, Prior, ValueFunction};
use crate::policy::{Action, Policy};
use crate::problem::{Problem, STOP_SLACK};
use crate::quantum::{born_probability, ket, Measurement};

/// Copies after which a trial is abandoned.
pub const COPY_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Rho0,
    Rho1,
}

/// How outcomes of a mixed true state are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One categorical draw from `tr(M_k ρ^{⊗n})`.
    #[default]
    Outcome,
    /// Draw a pure component for every copy, as a source that prepares
    /// mixtures by random pure preparations would, then the outcome.
    Component,
}

/// How the runner picks the action at a posterior between knots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lookup {
    /// Action of the nearest undecided knot.
    Nearest,
    /// Better of the two bracketing knots' actions by one-step cost under
    /// the solved value function. Removes most of the nearest-knot bias on
    /// coarse grids.
    #[default]
    Lookahead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Knot whose action was used.
    pub knot: usize,
    pub outcome: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub true_state: Hypothesis,
    pub copies_used: u64,
    pub decision: Hypothesis,
    pub correct: bool,
    pub final_posterior: f64,
    pub trace: Option<Vec<TraceStep>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub q0: f64,
    pub seed: u64,
    pub mode: SamplingMode,
    pub mean_copies: f64,
    /// `None` for a single trial.
    pub stderr_copies: Option<f64>,
    pub errors: u64,
    pub empirical_error: f64,
    pub histogram: BTreeMap<u64, u64>,
}

impl SimulationSummary {
    /// Binomial standard error of the error rate at the target `ε`.
    pub fn error_stderr(&self, epsilon: f64) -> f64 {
        (epsilon * (1.0 - epsilon) / self.trials as f64).sqrt()
    }

    /// Whether the observed error rate is within `k` binomial standard
    /// errors of the target.
    pub fn error_within(&self, epsilon: f64, k: f64) -> bool {
        self.empirical_error <= epsilon + k * self.error_stderr(epsilon)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    copies: u64,
    copies_sq: u128,
    errors: u64,
}

impl Tally {
    fn add(&mut self, rec: &TrialRecord) {
        self.trials += 1;
        self.copies += rec.copies_used;
        self.copies_sq += u128::from(rec.copies_used) * u128::from(rec.copies_used);
        self.errors += u64::from(!rec.correct);
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.copies += other.copies;
        self.copies_sq += other.copies_sq;
        self.errors += other.errors;
        self
    }
}

struct KnotTable {
    cost: u64,
    liks: Vec<Likelihood>,
    /// Outcome distribution for each tuple of pure components, indexed as
    /// `c_1 + m·c_2` for `m` components per state.
    by_component: [Vec<Vec<f64>>; 2],
}

/// A policy prepared for fast repeated execution.
pub struct Runner<'a> {
    policy: &'a Policy,
    problem: &'a Problem,
    tables: Vec<Option<KnotTable>>,
    stop_logit: f64,
    mode: SamplingMode,
    lookahead: Option<&'a ValueFunction>,
}

fn component_weights(problem: &Problem, truth: Hypothesis) -> &[(f64, f64)] {
    match truth {
        Hypothesis::Rho0 => problem.rho0.components(),
        Hypothesis::Rho1 => problem.rho1.components(),
    }
}

fn product_state(angles: &[f64]) -> DMatrix<f64> {
    let mut v = DMatrix::from_element(1, 1, 1.0);
    for &a in angles {
        let k = ket(a);
        v = v.kronecker(&DMatrix::from_column_slice(2, 1, k.as_slice()));
    }
    &v * v.transpose()
}

fn component_table(problem: &Problem, truth: Hypothesis, m: &Measurement) -> Result<Vec<Vec<f64>>> {
    let comps = component_weights(problem, truth);
    let n = m.copy_cost();
    let count = comps.len().pow(n as u32);
    (0..count)
        .map(|idx| {
            let angles: Vec<f64> = (0..n).map(|c| comps[(idx / comps.len().pow(c as u32)) % comps.len()].1).collect();
            let state = product_state(&angles);
            m.elements().iter().map(|e| born_probability(&e.operator, &state)).collect()
        })
        .collect()
}

impl<'a> Runner<'a> {
    pub fn new(policy: &'a Policy, problem: &'a Problem, mode: SamplingMode) -> Result<Self> {
        let grid = policy.grid();
        if grid.epsilon() != problem.epsilon {
            return Err(Error::Domain("policy grid and problem disagree on epsilon".into()));
        }
        let tables = policy
            .actions()
            .iter()
            .map(|a| -> Result<Option<KnotTable>> {
                let Some(m) = a.measurement()? else {
                    return Ok(None);
                };
                let liks = a.likelihoods(problem)?;
                let by_component = match mode {
                    SamplingMode::Outcome => [Vec::new(), Vec::new()],
                    SamplingMode::Component => [
                        component_table(problem, Hypothesis::Rho0, &m)?,
                        component_table(problem, Hypothesis::Rho1, &m)?,
                    ],
                };
                Ok(Some(KnotTable { cost: a.copy_cost(), liks, by_component }))
            })
            .collect::<Result<Vec<_>>>()?;
        let stop_logit =
            if problem.epsilon > 0.0 { -logit(problem.epsilon * (1.0 + STOP_SLACK)) } else { f64::INFINITY };
        Ok(Self { policy, problem, tables, stop_logit, mode, lookahead: None })
    }

    /// Chooses between the actions of the two knots bracketing the
    /// posterior by their one-step cost under `value_fn`, instead of taking
    /// the nearest knot's action.
    pub fn with_lookahead(mut self, value_fn: &'a ValueFunction) -> Result<Self> {
        if !Arc::ptr_eq(value_fn.grid(), self.policy.grid()) && **value_fn.grid() != **self.policy.grid() {
            return Err(Error::Domain("value function and policy use different grids".into()));
        }
        self.lookahead = Some(value_fn);
        Ok(self)
    }

    fn choose_knot(&self, q: f64, l: f64) -> Result<usize> {
        let grid = self.policy.grid();
        let nearest =
            grid.nearest_knot(q, l).ok_or_else(|| Error::Domain(format!("no undecided knot near prior {q}")))?;
        let Some(value_fn) = self.lookahead else {
            return Ok(nearest);
        };
        let Location::Between(j, _) = grid.locate(q) else {
            return Ok(nearest);
        };
        let prior = Prior { q, logit: l };
        let cost = |knot: usize| -> f64 {
            match &self.tables[knot] {
                None => f64::INFINITY,
                Some(t) => {
                    t.cost as f64
                        + t.liks
                            .iter()
                            .filter_map(|lik| grid.transition(&prior, lik))
                            .map(|(p, loc)| p * interpolate(value_fn.values(), loc))
                            .sum::<f64>()
                }
            }
        };
        let other = if nearest == j { j + 1 } else { j };
        Ok(if cost(other) < cost(nearest) { other } else { nearest })
    }

    fn decided(&self, l: f64) -> bool {
        l.abs() >= self.stop_logit
    }

    fn draw_component(&self, rng: &mut ChaCha8Rng, truth: Hypothesis, copies: u64) -> usize {
        let comps = component_weights(self.problem, truth);
        let mut idx = 0;
        let mut scale = 1;
        for _ in 0..copies {
            idx += scale * pick(rng, comps.iter().map(|c| c.0));
            scale *= comps.len();
        }
        idx
    }

    /// One trial from prior `q0`. `trial` selects the random stream.
    pub fn run_trial(&self, q0: f64, seed: u64, trial: u64, keep_trace: bool) -> Result<TrialRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let truth = if rng.random::<f64>() < q0 { Hypothesis::Rho0 } else { Hypothesis::Rho1 };
        let mut l = logit(q0);
        let mut copies = 0u64;
        let mut trace = keep_trace.then(Vec::new);
        while !self.decided(l) {
            let q = logistic(l);
            let knot = self.choose_knot(q, l)?;
            let table = self.tables[knot]
                .as_ref()
                .ok_or_else(|| Error::Domain(format!("policy stops at undecided knot {knot}")))?;
            let outcome = match self.mode {
                SamplingMode::Outcome => {
                    pick(&mut rng, table.liks.iter().map(|x| if truth == Hypothesis::Rho0 { x.t0 } else { x.t1 }))
                }
                SamplingMode::Component => {
                    let c = self.draw_component(&mut rng, truth, table.cost);
                    let side = usize::from(truth == Hypothesis::Rho1);
                    pick(&mut rng, table.by_component[side][c].iter().copied())
                }
            };
            copies += table.cost;
            let lik = &table.liks[outcome];
            l = if lik.t1 == 0.0 {
                f64::INFINITY
            } else if lik.t0 == 0.0 {
                f64::NEG_INFINITY
            } else {
                l + lik.t0.ln() - lik.t1.ln()
            };
            if let Some(t) = trace.as_mut() {
                t.push(TraceStep { knot, outcome });
            }
            if copies > COPY_CAP {
                return Err(Error::RunawayTrial { cap: COPY_CAP });
            }
        }
        let decision = if l <= -self.stop_logit { Hypothesis::Rho1 } else { Hypothesis::Rho0 };
        Ok(TrialRecord {
            true_state: truth,
            copies_used: copies,
            decision,
            correct: decision == truth,
            final_posterior: logistic(l),
            trace,
        })
    }

    pub fn monte_carlo(&self, q0: f64, trials: u64, seed: u64) -> Result<SimulationSummary> {
        if trials == 0 {
            return Err(Error::Domain("at least one trial is required".into()));
        }
        if !(0.0..=1.0).contains(&q0) {
            return Err(Error::Domain(format!("prior {q0} outside [0, 1]")));
        }
        let (tally, histogram) = self.run_range(q0, seed, trials)?;
        let n = tally.trials as f64;
        let mean = tally.copies as f64 / n;
        let stderr_copies = (tally.trials > 1).then(|| {
            let var = (tally.copies_sq as f64 - n * mean * mean) / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        });
        Ok(SimulationSummary {
            trials,
            q0,
            seed,
            mode: self.mode,
            mean_copies: mean,
            stderr_copies,
            errors: tally.errors,
            empirical_error: tally.errors as f64 / n,
            histogram,
        })
    }

    #[cfg(feature = "parallel")]
    fn run_range(&self, q0: f64, seed: u64, trials: u64) -> Result<(Tally, BTreeMap<u64, u64>)> {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .try_fold(
                || (Tally::default(), BTreeMap::new()),
                |(mut tally, mut hist), t| {
                    let rec = self.run_trial(q0, seed, t, false)?;
                    tally.add(&rec);
                    *hist.entry(rec.copies_used).or_insert(0u64) += 1;
                    Ok((tally, hist))
                },
            )
            .try_reduce(|| (Tally::default(), BTreeMap::new()), |a, b| Ok(merge(a, b)))
    }

    #[cfg(not(feature = "parallel"))]
    fn run_range(&self, q0: f64, seed: u64, trials: u64) -> Result<(Tally, BTreeMap<u64, u64>)> {
        let mut tally = Tally::default();
        let mut hist = BTreeMap::new();
        for t in 0..trials {
            let rec = self.run_trial(q0, seed, t, false)?;
            tally.add(&rec);
            *hist.entry(rec.copies_used).or_insert(0u64) += 1;
        }
        Ok((tally, hist))
    }
}

#[cfg(feature = "parallel")]
fn merge(a: (Tally, BTreeMap<u64, u64>), b: (Tally, BTreeMap<u64, u64>)) -> (Tally, BTreeMap<u64, u64>) {
    let (ta, mut ha) = a;
    let (tb, hb) = b;
    for (k, v) in hb {
        *ha.entry(k).or_insert(0) += v;
    }
    (ta.merge(tb), ha)
}

/// Index drawn with probability proportional to `weights`.
fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn run_trial(policy: &Policy, problem: &Problem, q0: f64, seed: u64, trial: u64) -> Result<TrialRecord> {
    Runner::new(policy, problem, SamplingMode::Outcome)?.run_trial(q0, seed, trial, true)
}

pub fn monte_carlo(policy: &Policy, problem: &Problem, q0: f64, trials: u64, seed: u64) -> Result<SimulationSummary> {
    Runner::new(policy, problem, SamplingMode::Outcome)?.monte_carlo(q0, trials, seed)
}

/// Replays a trace and returns the Bayes posterior after every step,
/// computed from the product of all likelihoods seen so far.
pub fn replay_posteriors(policy: &Policy, problem: &Problem, q0: f64, trace: &[TraceStep]) -> Result<Vec<f64>> {
    let mut num = q0;
    let mut den = 1.0 - q0;
    let mut out = Vec::with_capacity(trace.len());
    for step in trace {
        let liks = policy.action(step.knot).likelihoods(problem)?;
        let lik =
            liks.get(step.outcome).ok_or_else(|| Error::Domain(format!("outcome {} out of range", step.outcome)))?;
        num *= lik.t0;
        den *= lik.t1;
        let scale = num.max(den);
        num /= scale;
        den /= scale;
        out.push(num / (num + den));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub q0: f64,
    pub expected: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub residual: f64,
    pub allowed: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.passes)
    }
}

/// Simulated mean against the solver value at each starting prior. A row
/// passes when the residual is within `3·stderr + slack`.
pub fn consumption_consistency(
    policy: &Policy,
    value_fn: &ValueFunction,
    problem: &Problem,
    q_samples: &[f64],
    trials: u64,
    seed: u64,
    slack: f64,
    lookup: Lookup,
) -> Result<ConsistencyReport> {
    let mut runner = Runner::new(policy, problem, SamplingMode::Outcome)?;
    if lookup == Lookup::Lookahead {
        runner = runner.with_lookahead(value_fn)?;
    }
    let rows = q_samples
        .iter()
        .map(|&q0| {
            let s = runner.monte_carlo(q0, trials, seed)?;
            let expected = value_fn.eval(q0);
            let stderr = s.stderr_copies.unwrap_or(0.0);
            let residual = s.mean_copies - expected;
            let allowed = 3.0 * stderr + slack;
            Ok(ConsistencyRow {
                q0,
                expected,
                simulated: s.mean_copies,
                stderr,
                residual,
                allowed,
                passes: residual.abs() <= allowed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyReport { rows })
}

/// Action actually applied at prior `q`: the one at the nearest undecided knot.
pub fn action_at(policy: &Policy, q: f64) -> Option<&Action> {
    policy.grid().nearest_knot(q, logit(q)).map(|j| policy.action(j))
}
