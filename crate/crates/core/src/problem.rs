use std::f64::consts::FRAC_PI_2;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{QubitState, TwoCopyState};

/// Relative slack on the stop rule, so that posteriors landing on `ε` up to
/// rounding count as decided.
pub const STOP_SLACK: f64 = 1e-12;

/// A binary discrimination task: the two candidate states and the error
/// requirement `ε` that a decision must meet.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub rho0: QubitState,
    pub rho1: QubitState,
    pub epsilon: f64,
    rho0_pair: TwoCopyState,
    rho1_pair: TwoCopyState,
}

/// Parameters describing how a [`Problem`] was built, kept for metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `ρ_i = (1−d_i)|x_i⟩⟨x_i| + d_i I/2`
    Depolarized { x0: f64, x1: f64, d0: f64, d1: f64, epsilon: f64 },
    /// `ρ0 = (1−s)|φ0⟩⟨φ0| + s|φ1⟩⟨φ1|` and the swap, with `φ0 = |0⟩` and
    /// `φ1` at `angle`.
    Mixture { s: f64, angle: f64, epsilon: f64 },
    /// Pure states at `±x/2`, overlap `cos x`.
    Pure { x: f64, epsilon: f64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match *self {
            ProblemSpec::Depolarized { x0, x1, d0, d1, epsilon } => {
                Problem::new(QubitState::new(x0, d0)?, QubitState::new(x1, d1)?, epsilon)
            }
            ProblemSpec::Mixture { s, angle, epsilon } => mixture_problem(s, angle, epsilon),
            ProblemSpec::Pure { x, epsilon } => pure_problem(x, epsilon),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            ProblemSpec::Depolarized { epsilon, .. }
            | ProblemSpec::Mixture { epsilon, .. }
            | ProblemSpec::Pure { epsilon, .. } => epsilon,
        }
    }
}

impl Problem {
    pub fn new(rho0: QubitState, rho1: QubitState, epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must lie in [0, 0.5), got {epsilon}")));
        }
        let rho0_pair = TwoCopyState::of(&rho0);
        let rho1_pair = TwoCopyState::of(&rho1);
        Ok(Self { rho0, rho1, epsilon, rho0_pair, rho1_pair })
    }

    pub fn two_copy(&self) -> (&TwoCopyState, &TwoCopyState) {
        (&self.rho0_pair, &self.rho1_pair)
    }

    /// `min(q, 1−q) ≤ ε`, with a `1e-12` relative slack.
    pub fn is_decided(&self, q: f64) -> bool {
        q.min(1.0 - q) <= self.stop_threshold()
    }

    pub fn stop_threshold(&self) -> f64 {
        self.epsilon * (1.0 + STOP_SLACK)
    }

    pub fn both_pure(&self) -> bool {
        self.rho0.is_pure() && self.rho1.is_pure()
    }

    /// Symmetric under `q → 1−q` when a reflection maps `ρ0` onto `ρ1`,
    /// which for real qubit states holds whenever the spectra agree.
    pub fn is_symmetric(&self) -> bool {
        (self.rho0.depolarization() - self.rho1.depolarization()).abs() < 1e-12
    }

    /// Angle of the eigenvector of `ρ0 − ρ1` with the larger eigenvalue.
    ///
    /// Projecting onto it and its complement is the single-shot
    /// minimum-error measurement at equal priors.
    pub fn helstrom_angle(&self) -> f64 {
        let diff = self.rho0.matrix() - self.rho1.matrix();
        let eig = SymmetricEigen::new(diff);
        let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(k);
        let angle = v[1].atan2(v[0]);
        angle.rem_euclid(std::f64::consts::PI)
    }
}

/// Two pure states at `±x/2`.
pub fn pure_problem(x: f64, epsilon: f64) -> Result<Problem> {
    if !(x > 0.0 && x <= FRAC_PI_2) {
        return Err(Error::Domain(format!("x must lie in (0, π/2], got {x}")));
    }
    Problem::new(QubitState::pure(x / 2.0), QubitState::pure(-x / 2.0), epsilon)
}

/// Swapped two-component mixtures of `|0⟩` and `ket(angle)` with weight `s`.
pub fn mixture_problem(s: f64, angle: f64, epsilon: f64) -> Result<Problem> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("mixing weight s must lie in [0, 1], got {s}")));
    }
    let rho0 = QubitState::mixture(&[(1.0 - s, 0.0), (s, angle)])?;
    let rho1 = QubitState::mixture(&[(1.0 - s, angle), (s, 0.0)])?;
    Problem::new(rho0, rho1, epsilon)
}
