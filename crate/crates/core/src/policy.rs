use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Likelihood, QGrid};
use crate::problem::Problem;
use crate::quantum::{Measurement, QubitState};

/// What to do at one prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Stop,
    /// One copy, projectors onto `ket(θ)` and its complement.
    Projective {
        theta: f64,
    },
    /// One copy, `Σ w_k |θ_k⟩⟨θ_k|`.
    Povm {
        thetas: [f64; 3],
        weights: [f64; 3],
    },
    /// Two copies, entangled basis at `θ`.
    Collective {
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Local,
    Collective,
}

impl Action {
    pub fn is_stop(&self) -> bool {
        matches!(self, Action::Stop)
    }

    pub fn arm(&self) -> Option<Arm> {
        match self {
            Action::Stop => None,
            Action::Projective { .. } | Action::Povm { .. } => Some(Arm::Local),
            Action::Collective { .. } => Some(Arm::Collective),
        }
    }

    pub fn copy_cost(&self) -> u64 {
        match self {
            Action::Stop => 0,
            Action::Projective { .. } | Action::Povm { .. } => 1,
            Action::Collective { .. } => 2,
        }
    }

    pub fn element_count(&self) -> usize {
        match self {
            Action::Stop => 0,
            Action::Projective { .. } => 2,
            Action::Povm { .. } => 3,
            Action::Collective { .. } => 4,
        }
    }

    pub fn measurement(&self) -> Result<Option<Measurement>> {
        Ok(match *self {
            Action::Stop => None,
            Action::Projective { theta } => Some(Measurement::projective(theta)),
            Action::Povm { thetas, weights } => Some(Measurement::three_element(thetas, weights)?),
            Action::Collective { theta } => Some(Measurement::collective(theta)),
        })
    }

    /// Per-outcome likelihoods under the two hypotheses.
    pub fn likelihoods(&self, problem: &Problem) -> Result<Vec<Likelihood>> {
        self.likelihoods_for(&problem.rho0, &problem.rho1)
    }

    pub fn likelihoods_for(&self, rho0: &QubitState, rho1: &QubitState) -> Result<Vec<Likelihood>> {
        match self.measurement()? {
            None => Ok(Vec::new()),
            Some(m) => Ok(m.likelihoods(rho0, rho1)?.into_iter().map(|(t0, t1)| Likelihood::new(t0, t1)).collect()),
        }
    }

    /// Angle shown in tables: the measurement angle, or the first POVM angle.
    pub fn display_angle(&self) -> Option<f64> {
        match *self {
            Action::Stop => None,
            Action::Projective { theta } | Action::Collective { theta } => Some(theta),
            Action::Povm { thetas, .. } => Some(thetas[0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Goal,
    Goac,
    /// Adaptive over local projective measurements only.
    ProjectiveAdaptive,
    Fixed,
}

/// Per-knot actions from one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub strategy: Strategy,
    grid: Arc<QGrid>,
    actions: Vec<Action>,
}

impl Policy {
    pub fn new(strategy: Strategy, grid: Arc<QGrid>, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != grid.len() {
            return Err(Error::Domain(format!("policy has {} actions for a grid of {}", actions.len(), grid.len())));
        }
        for (j, a) in actions.iter().enumerate() {
            if grid.is_decided_knot(j) != a.is_stop() {
                return Err(Error::Domain(format!("policy stops at the wrong place at knot {j}")));
            }
        }
        Ok(Self { strategy, grid, actions })
    }

    pub fn grid(&self) -> &Arc<QGrid> {
        &self.grid
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, j: usize) -> &Action {
        &self.actions[j]
    }

    /// Priors `q` (midpoints between knots) where the arm changes.
    pub fn arm_transitions(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev: Option<(usize, Arm)> = None;
        for (j, a) in self.actions.iter().enumerate() {
            if let Some(arm) = a.arm() {
                if let Some((pj, parm)) = prev {
                    if parm != arm {
                        out.push(0.5 * (self.grid.q(pj) + self.grid.q(j)));
                    }
                }
                prev = Some((j, arm));
            }
        }
        out
    }

    /// Arm changes with near-tie chatter folded away.
    ///
    /// Raw changes closer than `gap` in log-odds form one cluster. A cluster
    /// with an even number of flips leaves the arm unchanged and is dropped;
    /// an odd cluster is reported at its middle flip.
    pub fn arm_transitions_merged(&self, gap: f64) -> Vec<f64> {
        let raw = self.arm_transitions();
        let mut out = Vec::new();
        let mut cluster: Vec<f64> = Vec::new();
        let mut flush = |cluster: &mut Vec<f64>| {
            if cluster.len() % 2 == 1 {
                out.push(cluster[cluster.len() / 2]);
            }
            cluster.clear();
        };
        for q in raw {
            if let Some(&last) = cluster.last() {
                if crate::grid::logit(q) - crate::grid::logit(last) >= gap {
                    flush(&mut cluster);
                }
            }
            cluster.push(q);
        }
        flush(&mut cluster);
        out
    }

    pub fn max_elements(&self) -> usize {
        self.actions.iter().map(Action::element_count).max().unwrap_or(0)
    }

    /// Same grid and arms with every measurement angle shifted by `delta`.
    pub fn rotated(&self, delta: f64) -> Self {
        let actions = self
            .actions
            .iter()
            .map(|a| match *a {
                Action::Stop => Action::Stop,
                Action::Projective { theta } => Action::Projective { theta: theta + delta },
                Action::Povm { thetas, weights } => Action::Povm { thetas: thetas.map(|t| t + delta), weights },
                Action::Collective { theta } => Action::Collective { theta: theta + delta },
            })
            .collect();
        Self { strategy: self.strategy, grid: self.grid.clone(), actions }
    }
}
