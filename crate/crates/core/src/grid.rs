//! Prior grids and piecewise-linear value functions.
//!
//! Values live on the knots of a [`QGrid`]. Decided knots hold exactly zero
//! and are never used as interpolation anchors: a posterior that lands in the
//! undecided band is interpolated between undecided knots, and beyond the
//! outermost undecided knot the value is held constant up to the stop
//! boundary, where it drops to zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Problem, STOP_SLACK};
use crate::quantum::ZERO_PROBABILITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `q_j = j/(G−1)` over `[0, 1]`.
    Uniform,
    /// Knots uniform in `ln(q/(1−q))` across the undecided band. Requires `ε > 0`.
    LogOdds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    kind: GridKind,
    epsilon: f64,
    points: Vec<f64>,
    coords: Vec<f64>,
    logits: Vec<f64>,
    /// Inclusive range of undecided knots, if any.
    undecided: Option<(usize, usize)>,
    coord_origin: f64,
    coord_step: f64,
    stop_q: f64,
    stop_logit: f64,
}

/// Where a prior falls relative to the knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Stop,
    /// Beyond the outermost undecided knot but still undecided.
    Clamp(usize),
    /// `(1−w)·N[j] + w·N[j+1]`
    Between(usize, f64),
}

/// One outcome's likelihoods `tr(M ρ0)`, `tr(M ρ1)` with cached logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Likelihood {
    pub t0: f64,
    pub t1: f64,
    ln_t0: f64,
    ln_t1: f64,
}

impl Likelihood {
    /// Likelihoods below the zero-probability floor are snapped to zero so
    /// that exclusion outcomes on pure states decide exactly.
    pub fn new(t0: f64, t1: f64) -> Self {
        let clean = |t: f64| if t < ZERO_PROBABILITY { 0.0 } else { t };
        let (t0, t1) = (clean(t0), clean(t1));
        Self { t0, t1, ln_t0: t0.ln(), ln_t1: t1.ln() }
    }

    pub fn is_impossible(&self) -> bool {
        self.t0 == 0.0 && self.t1 == 0.0
    }
}

/// The prior at a knot, in both coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub q: f64,
    pub logit: f64,
}

impl Prior {
    pub fn new(q: f64) -> Self {
        Self { q, logit: logit(q) }
    }
}

pub fn logit(q: f64) -> f64 {
    (q / (1.0 - q)).ln()
}

pub fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

impl QGrid {
    pub fn new(kind: GridKind, points: usize, epsilon: f64) -> Result<Self> {
        if points < 3 {
            return Err(Error::Domain(format!("a q grid needs at least 3 points, got {points}")));
        }
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must lie in [0, 0.5), got {epsilon}")));
        }
        let stop_q = epsilon * (1.0 + STOP_SLACK);
        let stop_logit = if stop_q > 0.0 { logit(1.0 - stop_q) } else { f64::INFINITY };
        let (points_q, coords, origin, step): (Vec<f64>, Vec<f64>, f64, f64) = match kind {
            GridKind::Uniform => {
                let h = 1.0 / (points - 1) as f64;
                let q: Vec<f64> = (0..points).map(|j| j as f64 * h).collect();
                (q.clone(), q, 0.0, h)
            }
            GridKind::LogOdds => {
                if epsilon <= 0.0 {
                    return Err(Error::Domain("a log-odds grid needs epsilon > 0".into()));
                }
                let half = logit(1.0 - epsilon);
                let h = 2.0 * half / points as f64;
                let origin = -half + 0.5 * h;
                let l: Vec<f64> = (0..points).map(|j| origin + j as f64 * h).collect();
                (l.iter().map(|&v| logistic(v)).collect(), l, origin, h)
            }
        };
        let logits = match kind {
            GridKind::Uniform => points_q.iter().map(|&q| logit(q)).collect(),
            GridKind::LogOdds => coords.clone(),
        };
        let is_open = |q: f64| q.min(1.0 - q) > stop_q;
        let first = points_q.iter().position(|&q| is_open(q));
        let last = points_q.iter().rposition(|&q| is_open(q));
        let undecided = first.zip(last);
        Ok(Self {
            kind,
            epsilon,
            points: points_q,
            coords,
            logits,
            undecided,
            coord_origin: origin,
            coord_step: step,
            stop_q,
            stop_logit,
        })
    }

    pub fn uniform(points: usize, epsilon: f64) -> Result<Self> {
        Self::new(GridKind::Uniform, points, epsilon)
    }

    pub fn log_odds(points: usize, epsilon: f64) -> Result<Self> {
        Self::new(GridKind::LogOdds, points, epsilon)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn q(&self, j: usize) -> f64 {
        self.points[j]
    }

    pub fn prior(&self, j: usize) -> Prior {
        Prior { q: self.points[j], logit: self.logits[j] }
    }

    pub fn is_decided_knot(&self, j: usize) -> bool {
        match self.undecided {
            Some((lo, hi)) => j < lo || j > hi,
            None => true,
        }
    }

    pub fn undecided_range(&self) -> Option<(usize, usize)> {
        self.undecided
    }

    pub fn is_decided(&self, q: f64) -> bool {
        q.min(1.0 - q) <= self.stop_q
    }

    fn locate_coord(&self, c: f64) -> Location {
        let Some((lo, hi)) = self.undecided else {
            return Location::Stop;
        };
        if c <= self.coords[lo] {
            return Location::Clamp(lo);
        }
        if c >= self.coords[hi] {
            return Location::Clamp(hi);
        }
        let pos = (c - self.coord_origin) / self.coord_step;
        let j = (pos.floor() as usize).clamp(lo, hi - 1);
        let w = ((c - self.coords[j]) / self.coord_step).clamp(0.0, 1.0);
        Location::Between(j, w)
    }

    /// Location of an arbitrary prior.
    pub fn locate(&self, q: f64) -> Location {
        if self.is_decided(q) {
            return Location::Stop;
        }
        match self.kind {
            GridKind::Uniform => self.locate_coord(q),
            GridKind::LogOdds => self.locate_coord(logit(q)),
        }
    }

    /// Outcome probability and the location of the Bayes posterior.
    ///
    /// Returns `None` for outcomes with probability below the zero floor;
    /// those carry no weight in any expectation.
    pub fn transition(&self, prior: &Prior, lik: &Likelihood) -> Option<(f64, Location)> {
        let p = prior.q * lik.t0 + (1.0 - prior.q) * lik.t1;
        if p < ZERO_PROBABILITY {
            return None;
        }
        let loc = match self.kind {
            GridKind::Uniform => {
                let post = prior.q * lik.t0 / p;
                let comp = (1.0 - prior.q) * lik.t1 / p;
                if post.min(comp) <= self.stop_q {
                    Location::Stop
                } else {
                    self.locate_coord(post)
                }
            }
            GridKind::LogOdds => {
                let l = prior.logit + lik.ln_t0 - lik.ln_t1;
                if l.abs() >= self.stop_logit {
                    Location::Stop
                } else {
                    self.locate_coord(l)
                }
            }
        };
        Some((p, loc))
    }

    /// Knot whose coordinate is nearest to the given prior, restricted to
    /// undecided knots. `None` inside the stop region.
    pub fn nearest_knot(&self, q: f64, logit_q: f64) -> Option<usize> {
        if self.is_decided(q) {
            return None;
        }
        let (lo, hi) = self.undecided?;
        let c = match self.kind {
            GridKind::Uniform => q,
            GridKind::LogOdds => logit_q,
        };
        let pos = ((c - self.coord_origin) / self.coord_step).round();
        Some(if pos <= lo as f64 {
            lo
        } else if pos >= hi as f64 {
            hi
        } else {
            pos as usize
        })
    }

    pub fn stop_logit(&self) -> f64 {
        self.stop_logit
    }
}

pub fn interpolate(values: &[f64], loc: Location) -> f64 {
    match loc {
        Location::Stop => 0.0,
        Location::Clamp(j) => values[j],
        Location::Between(j, w) => {
            if w == 0.0 {
                values[j]
            } else {
                values[j] * (1.0 - w) + values[j + 1] * w
            }
        }
    }
}

/// `N(q)` sampled on a [`QGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    grid: Arc<QGrid>,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(grid: Arc<QGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "value function has {} entries for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<QGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<QGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn eval(&self, q: f64) -> f64 {
        interpolate(&self.values, self.grid.locate(q))
    }

    pub fn epsilon(&self) -> f64 {
        self.grid.epsilon()
    }

    /// `max_j |self_j − other_j|`
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Rejects value functions that are non-negative but zero somewhere in
    /// the undecided band, which cannot be the cost of any strategy.
    pub fn check_realizable(&self, problem: &Problem) -> Result<()> {
        for (j, &v) in self.values.iter().enumerate() {
            let decided = self.grid.is_decided_knot(j);
            if decided && v != 0.0 {
                return Err(Error::Domain(format!("nonzero value {v} at decided knot {j}")));
            }
            if !decided && v < 1.0 {
                return Err(Error::Domain(format!(
                    "value {v} < 1 at undecided q = {} is not realizable",
                    self.grid.q(j)
                )));
            }
        }
        if problem.epsilon != self.grid.epsilon() {
            return Err(Error::Domain("grid and problem disagree on epsilon".into()));
        }
        Ok(())
    }
}
