//! Fixed-measurement baselines and asymptotic efficiency ratios.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{QGrid, ValueFunction};
use crate::markov::Chain;
use crate::policy::Action;
use crate::problem::Problem;
use crate::quantum::{Measurement, QubitState};

pub use crate::markov::{IterativeSettings as FixedSettings, DIVERGENCE_CAP};

/// Expected copies when `action` is repeated until the posterior is decided.
///
/// Solves `N(q) = n + Σ_k P_k N(q_k)` exactly on the grid; `settings` only
/// matters when the transition band is too wide for direct elimination.
pub fn fixed_value(
    problem: &Problem,
    action: &Action,
    grid: Arc<QGrid>,
    settings: FixedSettings,
) -> Result<ValueFunction> {
    if problem.epsilon != grid.epsilon() {
        return Err(Error::Domain("grid and problem disagree on epsilon".into()));
    }
    let liks = action.likelihoods(problem)?;
    if liks.is_empty() {
        return Err(Error::Domain("a fixed strategy needs a measurement".into()));
    }
    if liks.iter().all(|l| (l.t0 - l.t1).abs() <= 1e-12) {
        return Err(Error::Infeasible(format!("{action:?} carries no information")));
    }
    let Some(mut chain) = Chain::new(&grid) else {
        return Ok(ValueFunction::zeros(grid));
    };
    let cost = action.copy_cost() as f64;
    let (lo, hi) = chain.range();
    for j in lo..=hi {
        let prior = grid.prior(j);
        chain.push(cost, liks.iter().filter_map(|l| grid.transition(&prior, l)).collect());
    }
    let values = chain.solve(settings).map_err(|e| match e {
        Error::Infeasible(why) => Error::Infeasible(format!("repeating {action:?}: {why}")),
        other => other,
    })?;
    ValueFunction::new(grid, values)
}

/// Measurement family searched by [`optimize_fixed`] and the rate functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    LocalProjective { angles: Vec<f64> },
    Collective { angles: Vec<f64> },
}

impl Family {
    /// Projective angles over `[0°, 90°)` at the given step in degrees.
    pub fn local_degrees(step_deg: f64) -> Self {
        let n = (90.0 / step_deg).round() as usize;
        Family::LocalProjective { angles: (0..n).map(|i| (i as f64 * step_deg).to_radians()).collect() }
    }

    /// Collective angles over `[min°, max°]` inclusive at the given step.
    pub fn collective_degrees(min_deg: f64, max_deg: f64, step_deg: f64) -> Self {
        let n = ((max_deg - min_deg) / step_deg).round() as usize + 1;
        Family::Collective { angles: (0..n).map(|i| (min_deg + i as f64 * step_deg).to_radians()).collect() }
    }

    pub fn angles(&self) -> &[f64] {
        match self {
            Family::LocalProjective { angles } | Family::Collective { angles } => angles,
        }
    }

    pub fn action(&self, theta: f64) -> Action {
        match self {
            Family::LocalProjective { .. } => Action::Projective { theta },
            Family::Collective { .. } => Action::Collective { theta },
        }
    }

    pub fn measurements(&self) -> Vec<Measurement> {
        self.angles()
            .iter()
            .map(|&t| match self {
                Family::LocalProjective { .. } => Measurement::projective(t),
                Family::Collective { .. } => Measurement::collective(t),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedStrategyResult {
    pub best_theta: f64,
    pub query_q: f64,
    pub consumption: f64,
    pub value_fn: ValueFunction,
    /// `(θ, N_θ(q))` for every scanned angle that reaches the target.
    pub scan: Vec<(f64, f64)>,
}

impl FixedStrategyResult {
    pub fn consumption_at(&self, q: f64) -> f64 {
        self.value_fn.eval(q)
    }
}

/// Best single repeated measurement from `family` for the prior `q`:
/// a scan over the family's angles followed by a golden-section refinement
/// between the neighbours of the best one.
pub fn optimize_fixed(
    problem: &Problem,
    family: &Family,
    grid: Arc<QGrid>,
    q: f64,
    settings: FixedSettings,
) -> Result<FixedStrategyResult> {
    let eval = |theta: f64| -> Result<Option<ValueFunction>> {
        match fixed_value(problem, &family.action(theta), grid.clone(), settings) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let angles = family.angles();
    let mut scan = Vec::new();
    let mut best: Option<(usize, f64, ValueFunction)> = None;
    for (i, &theta) in angles.iter().enumerate() {
        if let Some(v) = eval(theta)? {
            let n = v.eval(q);
            scan.push((theta, n));
            if best.as_ref().is_none_or(|b| n < b.1) {
                best = Some((i, n, v));
            }
        }
    }
    let Some((i, mut best_n, mut best_v)) = best else {
        return Err(Error::Infeasible("no angle in the family reaches the error target".into()));
    };
    let mut best_theta = angles[i];

    if angles.len() > 2 {
        // The projective family is periodic, so it may wrap past its ends;
        // the collective family is a bounded interval and may not.
        let step = angles[1] - angles[0];
        let periodic = matches!(family, Family::LocalProjective { .. });
        let lo = match i {
            0 if periodic => angles[0] - step,
            0 => angles[0],
            _ => angles[i - 1],
        };
        let hi = match angles.get(i + 1) {
            Some(&t) => t,
            None if periodic => angles[i] + step,
            None => angles[i],
        };
        let cost = |t: f64| -> Result<(f64, Option<ValueFunction>)> {
            Ok(match eval(t)? {
                Some(v) => (v.eval(q), Some(v)),
                None => (f64::INFINITY, None),
            })
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut vc) = cost(c)?;
        let (mut fd, mut vd) = cost(d)?;
        for _ in 0..24 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                vd = vc.take();
                c = b - phi * (b - a);
                (fc, vc) = cost(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                vc = vd.take();
                d = a + phi * (b - a);
                (fd, vd) = cost(d)?;
            }
        }
        for (t, f, v) in [(c, fc, vc), (d, fd, vd)] {
            if let Some(v) = v {
                if f < best_n {
                    best_n = f;
                    best_v = v;
                    best_theta = t;
                }
            }
        }
    }
    Ok(FixedStrategyResult { best_theta, query_q: q, consumption: best_n, value_fn: best_v, scan })
}

/// A relative-entropy rate that may be infinite when an outcome excludes
/// one hypothesis outright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rate", content = "value", rename_all = "snake_case")]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn value(self) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRates {
    /// `(1/n) Σ_k t0_k ln(t0_k/t1_k)` in nats per copy.
    pub e0: Rate,
    /// `(1/n) Σ_k t1_k ln(t1_k/t0_k)` in nats per copy.
    pub e1: Rate,
    pub copies: usize,
}

fn relative_entropy(p: &[f64], r: &[f64]) -> Rate {
    let mut sum = 0.0;
    for (&a, &b) in p.iter().zip(r) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Rate::Infinite;
        }
        sum += a * (a / b).ln();
    }
    Rate::Finite(sum.max(0.0))
}

pub fn entropy_rates(rho0: &QubitState, rho1: &QubitState, m: &Measurement) -> Result<EntropyRates> {
    let liks = m.likelihoods(rho0, rho1)?;
    let clean = |t: f64| if t < crate::quantum::ZERO_PROBABILITY { 0.0 } else { t };
    let t0: Vec<f64> = liks.iter().map(|l| clean(l.0)).collect();
    let t1: Vec<f64> = liks.iter().map(|l| clean(l.1)).collect();
    let n = m.copy_cost() as f64;
    let scale = |r: Rate| match r {
        Rate::Finite(v) => Rate::Finite(v / n),
        Rate::Infinite => Rate::Infinite,
    };
    Ok(EntropyRates {
        e0: scale(relative_entropy(&t0, &t1)),
        e1: scale(relative_entropy(&t1, &t0)),
        copies: m.copy_cost(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    /// `q/E0 + (1−q)/E1`; infinite when a rate is zero.
    pub value: f64,
    pub e0: Rate,
    pub e1: Rate,
    /// Index into the family achieving each rate.
    pub argmax_e0: usize,
    pub argmax_e1: usize,
}

fn eta_terms(q: f64, e0: Rate, e1: Rate) -> f64 {
    let term = |w: f64, r: Rate| match r {
        Rate::Infinite => 0.0,
        Rate::Finite(v) if v > 0.0 => w / v,
        Rate::Finite(_) => f64::INFINITY,
    };
    term(q, e0) + term(1.0 - q, e1)
}

/// Adaptive ratio: `E0` and `E1` are maximised independently over `family`.
pub fn eta_ratio(q: f64, rho0: &QubitState, rho1: &QubitState, family: &[Measurement]) -> Result<Eta> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("prior {q} must lie in (0, 1)")));
    }
    if family.is_empty() {
        return Err(Error::Domain("empty measurement family".into()));
    }
    let rates = family.iter().map(|m| entropy_rates(rho0, rho1, m)).collect::<Result<Vec<_>>>()?;
    let argmax = |pick: fn(&EntropyRates) -> Rate| {
        let mut best = 0;
        for (i, r) in rates.iter().enumerate() {
            if pick(r).value() > pick(&rates[best]).value() {
                best = i;
            }
        }
        best
    };
    let i0 = argmax(|r| r.e0);
    let i1 = argmax(|r| r.e1);
    let (e0, e1) = (rates[i0].e0, rates[i1].e1);
    Ok(Eta { value: eta_terms(q, e0, e1), e0, e1, argmax_e0: i0, argmax_e1: i1 })
}

/// Non-adaptive ratio: one measurement from `family` serves both rates.
pub fn eta_fixed(q: f64, rho0: &QubitState, rho1: &QubitState, family: &[Measurement]) -> Result<Eta> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("prior {q} must lie in (0, 1)")));
    }
    let mut best: Option<Eta> = None;
    for (i, m) in family.iter().enumerate() {
        let r = entropy_rates(rho0, rho1, m)?;
        let value = eta_terms(q, r.e0, r.e1);
        if best.is_none_or(|b| value < b.value) {
            best = Some(Eta { value, e0: r.e0, e1: r.e1, argmax_e0: i, argmax_e1: i });
        }
    }
    best.ok_or_else(|| Error::Domain("empty measurement family".into()))
}
