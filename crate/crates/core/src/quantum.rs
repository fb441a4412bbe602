//! Real qubit states, measurements and Bayesian updating.
//!
//! Every state and measurement used here lies in the real span of
//! `{I, σx, σz}` (and its two-copy tensor square), so all matrices are real
//! symmetric.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome probabilities below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Tolerance on `‖Σ M_k − I‖∞` for a valid POVM.
pub const COMPLETENESS_TOL: f64 = 1e-10;

const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

/// `cos θ|0⟩ + sin θ|1⟩`
pub fn ket(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.cos(), theta.sin())
}

/// `sin θ|0⟩ − cos θ|1⟩`, the orthogonal partner of [`ket`].
pub fn ket_perp(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.sin(), -theta.cos())
}

pub fn projector(v: &Vector2<f64>) -> Matrix2<f64> {
    v * v.transpose()
}

/// A real qubit density matrix `(1−d)|v⟩⟨v| + (d/2) I` with `|v⟩ = ket(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    bloch_angle: f64,
    depolarization: f64,
    matrix: Matrix2<f64>,
    /// Pure components `(weight, angle)` whose mixture is this state.
    components: Vec<(f64, f64)>,
}

impl QubitState {
    pub fn new(bloch_angle: f64, depolarization: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&depolarization) || !bloch_angle.is_finite() {
            return Err(Error::Domain(format!("depolarization must lie in [0, 1], got {depolarization}")));
        }
        let v = ket(bloch_angle);
        let matrix = projector(&v) * (1.0 - depolarization) + Matrix2::identity() * (depolarization / 2.0);
        let components = if depolarization == 0.0 {
            vec![(1.0, bloch_angle)]
        } else {
            vec![(1.0 - depolarization / 2.0, bloch_angle), (depolarization / 2.0, bloch_angle + FRAC_PI_2)]
        };
        Ok(Self { bloch_angle, depolarization, matrix, components })
    }

    pub fn pure(angle: f64) -> Self {
        Self::new(angle, 0.0).expect("zero depolarization is always valid")
    }

    /// Convex mixture of pure states `Σ w_i |ket(θ_i)⟩⟨ket(θ_i)|`.
    ///
    /// The given decomposition is kept for component-level sampling.
    pub fn mixture(components: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.is_empty()
            || components.iter().any(|c| c.0 < 0.0 || !c.1.is_finite())
            || (total - 1.0).abs() > TRACE_TOL
        {
            return Err(Error::Domain("mixture weights must be non-negative and sum to one".into()));
        }
        let matrix = components.iter().fold(Matrix2::zeros(), |acc, &(w, th)| acc + projector(&ket(th)) * w);
        let mut state = Self::from_matrix(matrix)?;
        state.components = components.to_vec();
        Ok(state)
    }

    /// Recovers the `(angle, depolarization)` parametrisation of a real
    /// density matrix from its spectral decomposition.
    pub fn from_matrix(matrix: Matrix2<f64>) -> Result<Self> {
        let (a, b, c) = (matrix[(0, 0)], matrix[(0, 1)], matrix[(1, 1)]);
        if (matrix[(1, 0)] - b).abs() > TRACE_TOL || ((a + c) - 1.0).abs() > TRACE_TOL {
            return Err(Error::Domain("density matrix must be symmetric with unit trace".into()));
        }
        let r = (((a - c) / 2.0).powi(2) + b * b).sqrt();
        let depolarization = 1.0 - 2.0 * r;
        if depolarization < -PSD_TOL {
            return Err(Error::Domain("density matrix is not positive semidefinite".into()));
        }
        let bloch_angle = 0.5 * (2.0 * b).atan2(a - c);
        let mut state = Self::new(bloch_angle, depolarization.clamp(0.0, 1.0))?;
        state.matrix = matrix;
        Ok(state)
    }

    pub fn bloch_angle(&self) -> f64 {
        self.bloch_angle
    }

    pub fn depolarization(&self) -> f64 {
        self.depolarization
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.matrix
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn is_pure(&self) -> bool {
        self.depolarization < PSD_TOL
    }

    /// `⟨ket(θ)|ρ|ket(θ)⟩`
    pub fn expectation(&self, theta: f64) -> f64 {
        let v = ket(theta);
        (v.transpose() * self.matrix * v)[(0, 0)]
    }

    pub fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, self.matrix.as_slice())
    }
}

/// Free-function form of [`QubitState::new`].
pub fn make_state(bloch_angle: f64, depolarization: f64) -> Result<QubitState> {
    QubitState::new(bloch_angle, depolarization)
}

/// Two copies `ρ ⊗ ρ` of a qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCopyState {
    pub matrix: Matrix4<f64>,
    /// Mixing weight `s` when the factor came from a two-component mixture.
    pub mixture_weight_s: Option<f64>,
}

impl TwoCopyState {
    pub fn of(state: &QubitState) -> Self {
        let matrix = state.matrix.kronecker(&state.matrix);
        let s = match state.components.as_slice() {
            [(w0, _), (w1, _)] => Some(w0.min(*w1)),
            _ => None,
        };
        Self { matrix, mixture_weight_s: s }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(4, 4, self.matrix.as_slice())
    }
}

/// Result of [`tensor_power`].
#[derive(Debug, Clone, PartialEq)]
pub enum TensorPower {
    Single(QubitState),
    Double(TwoCopyState),
}

impl TensorPower {
    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            TensorPower::Single(s) => s.dense(),
            TensorPower::Double(s) => s.dense(),
        }
    }
}

pub fn tensor_power(state: &QubitState, copies: usize) -> Result<TensorPower> {
    match copies {
        1 => Ok(TensorPower::Single(state.clone())),
        2 => Ok(TensorPower::Double(TwoCopyState::of(state))),
        n => Err(Error::UnsupportedArity(n)),
    }
}

/// `tr(M ρ)`, snapped onto `[0, 1]` when it lands within `1e-10` outside.
pub fn born_probability(element: &DMatrix<f64>, state: &DMatrix<f64>) -> Result<f64> {
    if element.nrows() != state.nrows() || !element.is_square() || !state.is_square() {
        return Err(Error::DimensionMismatch { operator: element.nrows(), state: state.nrows() });
    }
    let p = element.component_mul(&state.transpose()).sum();
    Ok(if (-COMPLETENESS_TOL..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p < 1.0 + COMPLETENESS_TOL {
        1.0
    } else {
        p
    })
}

/// The four entangled two-copy basis vectors for angle `θ`:
/// `|θ+θ+⟩`, the symmetric and antisymmetric combinations of `|θ+θ−⟩` and
/// `|θ−θ+⟩`, and `|θ−θ−⟩`.
pub fn collective_bases(theta: f64) -> [Vector4<f64>; 4] {
    let plus = ket(theta);
    let minus = ket_perp(theta);
    let kron = |a: &Vector2<f64>, b: &Vector2<f64>| a.kronecker(b);
    let pm = kron(&plus, &minus);
    let mp = kron(&minus, &plus);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [kron(&plus, &plus), (pm + mp) * r, (pm - mp) * r, kron(&minus, &minus)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasurementKind {
    /// `{|θ⟩⟨θ|, |θ⊥⟩⟨θ⊥|}` on one copy.
    LocalProjective { theta: f64 },
    /// `Σ_k w_k |θ_k⟩⟨θ_k|` with `Σ w_k = 2`.
    ThreeElementPovm { thetas: [f64; 3], weights: [f64; 3] },
    /// Projectors onto [`collective_bases`] on two copies.
    CollectiveEntangled { theta: f64 },
    /// Any other validated POVM.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub operator: DMatrix<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    kind: MeasurementKind,
    elements: Vec<Element>,
    copy_cost: usize,
}

impl Measurement {
    pub fn projective(theta: f64) -> Self {
        let ops = [projector(&ket(theta)), projector(&ket_perp(theta))];
        Self {
            kind: MeasurementKind::LocalProjective { theta },
            elements: ops
                .iter()
                .enumerate()
                .map(|(label, m)| Element { operator: DMatrix::from_column_slice(2, 2, m.as_slice()), label })
                .collect(),
            copy_cost: 1,
        }
    }

    pub fn three_element(thetas: [f64; 3], weights: [f64; 3]) -> Result<Self> {
        if weights.iter().any(|&w| w < -COMPLETENESS_TOL) {
            return Err(Error::InvalidMeasurement(format!("negative POVM weight in {weights:?}")));
        }
        let elements = thetas
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(label, (&th, w))| {
                let m = projector(&ket(th)) * w.max(0.0);
                Element { operator: DMatrix::from_column_slice(2, 2, m.as_slice()), label }
            })
            .collect();
        let m = Self { kind: MeasurementKind::ThreeElementPovm { thetas, weights }, elements, copy_cost: 1 };
        m.validate()?;
        Ok(m)
    }

    pub fn collective(theta: f64) -> Self {
        let elements = collective_bases(theta)
            .iter()
            .enumerate()
            .map(|(label, v)| {
                let m = v * v.transpose();
                Element { operator: DMatrix::from_column_slice(4, 4, m.as_slice()), label }
            })
            .collect();
        Self { kind: MeasurementKind::CollectiveEntangled { theta }, elements, copy_cost: 2 }
    }

    /// Wraps arbitrary operators after checking positivity and completeness.
    pub fn from_operators(operators: Vec<DMatrix<f64>>, copy_cost: usize) -> Result<Self> {
        if !(1..=2).contains(&copy_cost) {
            return Err(Error::UnsupportedArity(copy_cost));
        }
        let m = Self {
            kind: MeasurementKind::Custom,
            elements: operators.into_iter().enumerate().map(|(label, operator)| Element { operator, label }).collect(),
            copy_cost,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn kind(&self) -> &MeasurementKind {
        &self.kind
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn copy_cost(&self) -> usize {
        self.copy_cost
    }

    pub fn dimension(&self) -> usize {
        1 << self.copy_cost
    }

    /// `‖Σ_k M_k − I‖∞` (max absolute entry).
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dimension();
        let sum = self.elements.iter().fold(DMatrix::zeros(d, d), |acc, e| acc + &e.operator);
        (sum - DMatrix::identity(d, d)).amax()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        for e in &self.elements {
            if e.operator.nrows() != d || e.operator.ncols() != d {
                return Err(Error::DimensionMismatch { operator: e.operator.nrows(), state: d });
            }
            if (&e.operator - e.operator.transpose()).amax() > COMPLETENESS_TOL {
                return Err(Error::InvalidMeasurement("element is not symmetric".into()));
            }
            let min_eig = e.operator.clone().symmetric_eigenvalues().min();
            if min_eig < -COMPLETENESS_TOL {
                return Err(Error::InvalidMeasurement(format!("element {} has eigenvalue {min_eig}", e.label)));
            }
        }
        let r = self.completeness_residual();
        if r > COMPLETENESS_TOL {
            return Err(Error::InvalidMeasurement(format!("elements do not sum to identity (residual {r:e})")));
        }
        Ok(())
    }

    /// Per-outcome `(tr(M_k ρ0^{⊗n}), tr(M_k ρ1^{⊗n}))`.
    pub fn likelihoods(&self, rho0: &QubitState, rho1: &QubitState) -> Result<Vec<(f64, f64)>> {
        let s0 = tensor_power(rho0, self.copy_cost)?.dense();
        let s1 = tensor_power(rho1, self.copy_cost)?.dense();
        self.elements
            .iter()
            .map(|e| Ok((born_probability(&e.operator, &s0)?, born_probability(&e.operator, &s1)?)))
            .collect()
    }
}

/// One outcome of a Bayesian update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorUpdate {
    pub label: usize,
    pub prior_q: f64,
    /// `P_k = tr[M_k (q ρ0^{⊗n} + (1−q) ρ1^{⊗n})]`
    pub outcome_probability: f64,
    /// `q_k = q tr(M_k ρ0^{⊗n}) / P_k`
    pub posterior_q: f64,
    /// Set when `P_k < ZERO_PROBABILITY`; such outcomes carry no weight.
    pub zero_probability: bool,
}

/// Bayes update of the prior `q` of `ρ0` for every outcome of `m`.
pub fn posterior(q: f64, rho0: &QubitState, rho1: &QubitState, m: &Measurement) -> Result<Vec<PosteriorUpdate>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("prior {q} outside [0, 1]")));
    }
    Ok(m.likelihoods(rho0, rho1)?.into_iter().enumerate().map(|(label, (t0, t1))| bayes(label, q, t0, t1)).collect())
}

pub(crate) fn bayes(label: usize, q: f64, t0: f64, t1: f64) -> PosteriorUpdate {
    let p = q * t0 + (1.0 - q) * t1;
    let zero_probability = p < ZERO_PROBABILITY;
    let posterior_q = if p > 0.0 {
        (q * t0 / p).clamp(0.0, 1.0)
    } else if t0 + t1 > 0.0 {
        // q sits on a boundary; use the likelihood ratio as the limit.
        t0 / (t0 + t1)
    } else {
        q
    };
    PosteriorUpdate { label, prior_q: q, outcome_probability: p, posterior_q, zero_probability }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn basis_state_and_full_depolarization() {
        let s = make_state(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(*s.matrix(), Matrix2::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
        let s = make_state(FRAC_PI_4, 1.0).unwrap();
        assert_abs_diff_eq!(*s.matrix(), Matrix2::identity() * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fig1_state_has_unit_trace_and_is_psd() {
        let s = make_state(PI / 12.0, 0.01).unwrap();
        assert_abs_diff_eq!(s.matrix().trace(), 1.0, epsilon = 1e-12);
        let ev = s.matrix().symmetric_eigenvalues();
        assert!(ev.min() >= -1e-12);
        assert_abs_diff_eq!(ev.max(), 1.0 - 0.01 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_depolarization() {
        assert!(matches!(make_state(0.1, 1.5), Err(Error::Domain(_))));
        assert!(matches!(make_state(0.1, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn from_matrix_recovers_parameters() {
        let s = make_state(0.3, 0.2).unwrap();
        let t = QubitState::from_matrix(*s.matrix()).unwrap();
        assert_abs_diff_eq!(t.bloch_angle(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(t.depolarization(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn mixture_keeps_components() {
        let s = QubitState::mixture(&[(0.95, 0.0), (0.05, PI / 12.0)]).unwrap();
        assert_eq!(s.components().len(), 2);
        let direct = projector(&ket(0.0)) * 0.95 + projector(&ket(PI / 12.0)) * 0.05;
        assert_abs_diff_eq!(*s.matrix(), direct, epsilon = 1e-15);
        assert!(QubitState::mixture(&[(0.5, 0.0), (0.6, 1.0)]).is_err());
    }

    #[test]
    fn tensor_power_cases() {
        let basis = make_state(0.0, 0.0).unwrap();
        let two = tensor_power(&basis, 2).unwrap().dense();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = 1.0;
        assert_abs_diff_eq!(two, expected, epsilon = 1e-15);

        let mixed = make_state(0.7, 1.0).unwrap();
        let two = tensor_power(&mixed, 2).unwrap().dense();
        assert_abs_diff_eq!(two, DMatrix::identity(4, 4) * 0.25, epsilon = 1e-15);

        assert!(matches!(tensor_power(&basis, 3), Err(Error::UnsupportedArity(3))));
    }

    #[test]
    fn tensor_power_of_pure_state_is_rank_one_projector() {
        let x = PI / 12.0;
        let s = QubitState::pure(x);
        let two = tensor_power(&s, 2).unwrap().dense();
        let v = ket(x).kronecker(&ket(x));
        let outer = DMatrix::from_column_slice(4, 4, (v * v.transpose()).as_slice());
        assert_abs_diff_eq!(two, outer, epsilon = 1e-15);
    }

    #[test]
    fn born_probability_examples() {
        let basis = make_state(0.0, 0.0).unwrap().dense();
        let p0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(born_probability(&p0, &basis).unwrap(), 1.0);

        let half = DMatrix::identity(2, 2) * 0.5;
        let any = make_state(0.4, 0.3).unwrap().dense();
        assert_abs_diff_eq!(born_probability(&half, &any).unwrap(), 0.5, epsilon = 1e-15);

        let theta = PI / 12.0;
        let psi1 = collective_bases(theta)[0];
        let element = DMatrix::from_column_slice(4, 4, (psi1 * psi1.transpose()).as_slice());
        let phi = tensor_power(&QubitState::pure(theta), 2).unwrap().dense();
        assert_abs_diff_eq!(born_probability(&element, &phi).unwrap(), 1.0, epsilon = 1e-14);

        let err = born_probability(&element, &basis);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn posterior_on_orthogonal_states() {
        let r0 = QubitState::pure(0.0);
        let r1 = QubitState::pure(FRAC_PI_2);
        let ups = posterior(0.5, &r0, &r1, &Measurement::projective(0.0)).unwrap();
        assert_abs_diff_eq!(ups[0].posterior_q, 1.0);
        assert_abs_diff_eq!(ups[1].posterior_q, 0.0);
        assert_abs_diff_eq!(ups[0].outcome_probability, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ups[1].outcome_probability, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn posterior_symmetry_fixes_half() {
        let x = PI / 6.0;
        let r0 = QubitState::pure(x / 2.0);
        let r1 = QubitState::pure(-x / 2.0);
        let ups = posterior(0.5, &r0, &r1, &Measurement::projective(0.0)).unwrap();
        assert_abs_diff_eq!(ups[0].posterior_q, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn posterior_matches_scalar_formula() {
        let r0 = make_state(PI / 12.0, 0.01).unwrap();
        let r1 = make_state(-PI / 12.0, 0.001).unwrap();
        let q = 0.3;
        let ups = posterior(q, &r0, &r1, &Measurement::projective(FRAC_PI_4)).unwrap();
        // ⟨θ|ρ|θ⟩ = (1−d)cos²(θ−x) + d/2 for the element at angle θ.
        let scalar = |theta: f64, x: f64, d: f64| (1.0 - d) * (theta - x).cos().powi(2) + d / 2.0;
        for (u, theta) in ups.iter().zip([FRAC_PI_4, 3.0 * FRAC_PI_4]) {
            let t0 = scalar(theta, PI / 12.0, 0.01);
            let t1 = scalar(theta, -PI / 12.0, 0.001);
            let p = q * t0 + (1.0 - q) * t1;
            assert_abs_diff_eq!(u.outcome_probability, p, epsilon = 1e-14);
            assert_abs_diff_eq!(u.posterior_q, q * t0 / p, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_probability_outcomes_are_flagged() {
        let r0 = QubitState::pure(0.0);
        let r1 = QubitState::pure(0.0);
        let ups = posterior(0.5, &r0, &r1, &Measurement::projective(0.0)).unwrap();
        assert!(!ups[0].zero_probability);
        assert!(ups[1].zero_probability);
    }

    #[test]
    fn collective_bases_are_orthonormal() {
        for theta in [0.0, FRAC_PI_4, 0.3, -0.08] {
            let b = collective_bases(theta);
            for i in 0..4 {
                for j in 0..4 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(b[i].dot(&b[j]), expected, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn collective_bases_at_zero_are_computational() {
        let b = collective_bases(0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // |θ−⟩ = −|1⟩ at θ = 0, so signs follow that convention.
        assert_abs_diff_eq!(b[0], Vector4::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], Vector4::new(0.0, -r, -r, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(b[2], Vector4::new(0.0, -r, r, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(b[3], Vector4::new(0.0, 0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn singlet_is_theta_independent() {
        let s0 = collective_bases(0.0)[2];
        for theta in [0.1, 0.7, 1.3, 2.9, -0.4] {
            let s = collective_bases(theta)[2];
            assert_abs_diff_eq!(s.dot(&s0).powi(2), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn measurement_constructors_are_complete() {
        assert!(Measurement::projective(0.37).completeness_residual() < 1e-12);
        assert!(Measurement::collective(0.21).completeness_residual() < 1e-12);
        let w = 2.0 / 3.0;
        let trine = Measurement::three_element([0.0, PI / 3.0, 2.0 * PI / 3.0], [w, w, w]).unwrap();
        assert!(trine.completeness_residual() < 1e-12);
        assert!(Measurement::three_element([0.0, 0.1, 0.2], [w, w, w]).is_err());
    }

    #[test]
    fn from_operators_rejects_incomplete_sets() {
        let half = DMatrix::identity(2, 2) * 0.5;
        assert!(Measurement::from_operators(vec![half.clone(), half.clone()], 1).is_ok());
        assert!(Measurement::from_operators(vec![half], 1).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let pos = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        assert!(Measurement::from_operators(vec![neg, pos], 1).is_err());
    }
}
