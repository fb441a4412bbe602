//! Optimal one-copy POVMs by support search.
//!
//! Minimising `∫ f g` over densities `f ≥ 0` with `∫ f = 2` and vanishing
//! `cos 2θ`, `sin 2θ` moments is a linear program whose dual asks for a tilt
//! `a cos 2θ + b sin 2θ` after which the minimum set of the tilted function
//! supports a feasible `f`. Such an `f` is either a pair of antipodal
//! (orthogonal) points or a triple whose cyclic gaps are all below `π/2`.
//! The search below builds the tilt one step at a time: balance `g(0)` and
//! `g(π/2)`, balance the two half-periods, then repeatedly rotate a cosine
//! tilt around the current pair of minimisers until a new minimiser appears
//! on the far side.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate, Likelihood, Prior, ValueFunction};
use crate::quantum::{Measurement, QubitState};

/// Uniform periodic grid `θ_j = jπ/K`, `j = 0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    angles: Vec<f64>,
    cos2: Vec<f64>,
    sin2: Vec<f64>,
}

impl ThetaGrid {
    /// `distinct` must be even so that `π/2` is a grid point.
    pub fn new(distinct: usize) -> Result<Self> {
        if distinct < 4 || !distinct.is_multiple_of(2) {
            return Err(Error::Domain(format!("theta grid needs an even number of points >= 4, got {distinct}")));
        }
        let angles: Vec<f64> = (0..distinct).map(|j| j as f64 * PI / distinct as f64).collect();
        let cos2 = angles.iter().map(|t| (2.0 * t).cos()).collect();
        let sin2 = angles.iter().map(|t| (2.0 * t).sin()).collect();
        Ok(Self { angles, cos2, sin2 })
    }

    /// Grid over `[0, π]` counting both endpoints, so `1801` means a step of
    /// `0.1°` and `1800` distinct angles.
    pub fn with_inclusive_points(points: usize) -> Result<Self> {
        Self::new(points.saturating_sub(1))
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn step(&self) -> f64 {
        PI / self.len() as f64
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, j: usize) -> f64 {
        self.angles[j]
    }

    /// Index of `theta` (mod π) if it coincides with a grid point.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        let pos = theta.rem_euclid(PI) / self.step();
        let j = pos.round();
        ((pos - j).abs() < 1e-6).then_some(j as usize % self.len())
    }
}

/// `g(θ_j) = P_θ N(q_θ)` on a [`ThetaGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostDensity {
    pub grid: Arc<ThetaGrid>,
    pub values: Vec<f64>,
}

impl CostDensity {
    pub fn new(grid: Arc<ThetaGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("cost density has {} values for {} angles", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("cost density must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<ThetaGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.angles().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    /// Linear interpolation, periodic in `π`.
    pub fn at(&self, theta: f64) -> f64 {
        let k = self.values.len();
        let pos = theta.rem_euclid(PI) / self.grid.step();
        let j = (pos.floor() as usize).min(k - 1);
        let w = pos - j as f64;
        self.values[j] * (1.0 - w) + self.values[(j + 1) % k] * w
    }

    pub fn range(&self) -> f64 {
        value_range(&self.values)
    }
}

fn value_range(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Per-angle likelihoods `⟨θ|ρ_i|θ⟩`, reused across priors.
#[derive(Debug, Clone)]
pub struct AngleLikelihoods {
    pub grid: Arc<ThetaGrid>,
    pub per_angle: Vec<Likelihood>,
}

impl AngleLikelihoods {
    pub fn new(grid: Arc<ThetaGrid>, rho0: &QubitState, rho1: &QubitState) -> Self {
        let per_angle =
            grid.angles().iter().map(|&t| Likelihood::new(rho0.expectation(t), rho1.expectation(t))).collect();
        Self { grid, per_angle }
    }

    /// Fills `out` with `g(θ_j)` for the given prior.
    pub fn fill_density(&self, prior: &Prior, value_fn: &ValueFunction, out: &mut [f64]) {
        let grid = value_fn.grid();
        let values = value_fn.values();
        for (o, lik) in out.iter_mut().zip(&self.per_angle) {
            *o = match grid.transition(prior, lik) {
                Some((p, loc)) => p * interpolate(values, loc),
                None => 0.0,
            };
        }
    }
}

/// `g(θ) = ⟨θ|qρ0 + (1−q)ρ1|θ⟩ · N(q_θ)` on the grid.
pub fn build_cost_density(
    q: f64,
    rho0: &QubitState,
    rho1: &QubitState,
    value_fn: &ValueFunction,
    theta_grid: Arc<ThetaGrid>,
) -> Result<CostDensity> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("prior {q} outside [0, 1]")));
    }
    let liks = AngleLikelihoods::new(theta_grid.clone(), rho0, rho1);
    let mut values = vec![0.0; theta_grid.len()];
    liks.fill_density(&Prior::new(q), value_fn, &mut values);
    CostDensity::new(theta_grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Two orthogonal minimisers.
    Antipodal,
    /// Three minimisers with every cyclic gap below `π/2`.
    Triple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedSupport {
    pub tilt_a: f64,
    pub tilt_b: f64,
    pub condition: Condition,
    /// Grid indices of the support, ascending.
    pub indices: Vec<usize>,
    pub angles: Vec<f64>,
    /// Masses of `f` at the support points, summing to 2.
    pub weights: Vec<f64>,
    /// Minimum of the tilted function.
    pub tilted_min: f64,
    /// Number of cosine tilts applied after the half-period balance.
    pub tilts: usize,
}

impl TiltedSupport {
    /// `Σ w_i cos 2θ_i`, `Σ w_i sin 2θ_i` and `Σ w_i − 2`.
    pub fn moment_residuals(&self) -> [f64; 3] {
        let mut r = [0.0, 0.0, -2.0];
        for (w, t) in self.weights.iter().zip(&self.angles) {
            r[0] += w * (2.0 * t).cos();
            r[1] += w * (2.0 * t).sin();
            r[2] += w;
        }
        r
    }
}

/// Masses for a triple `θ1 < θ2 < θ3` satisfying the gap condition.
pub fn triple_weights(t: [f64; 3]) -> [f64; 3] {
    let s3 = (2.0 * (t[1] - t[0])).sin();
    let s1 = (2.0 * (t[2] - t[1])).sin();
    let s2 = (2.0 * (t[0] - t[2])).sin();
    let total = s1 + s2 + s3;
    [2.0 * s1 / total, 2.0 * s2 / total, 2.0 * s3 / total]
}

/// Tie tolerance used by the solvers: `1e-9` relative to the largest `|g|`.
pub fn tie_tolerance(values: &[f64]) -> f64 {
    1e-9 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)
}

/// Loose tolerance `10·(max g − min g)·Δθ` admitting grid-adjacent minimisers.
pub fn grid_tolerance(g: &CostDensity) -> f64 {
    10.0 * g.range() * g.grid.step()
}

/// Reusable scratch for [`find_optimal_support`].
#[derive(Debug, Default, Clone)]
pub struct SupportSearch {
    tilted: Vec<f64>,
    base: Vec<f64>,
    minimizers: Vec<usize>,
    member: Vec<bool>,
}

const MAX_BRACKET_DOUBLINGS: usize = 2100;
const MAX_ROOT_STEPS: usize = 400;

impl SupportSearch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn search(&mut self, grid: &ThetaGrid, g: &[f64], tol: f64) -> Result<TiltedSupport> {
        let k = grid.len();
        let half = k / 2;
        if g.len() != k {
            return Err(Error::Domain("density length does not match its grid".into()));
        }
        if value_range(g) < 1e-12 {
            return Ok(TiltedSupport {
                tilt_a: 0.0,
                tilt_b: 0.0,
                condition: Condition::Antipodal,
                indices: vec![0, half],
                angles: vec![0.0, grid.angle(half)],
                weights: vec![1.0, 1.0],
                tilted_min: g[0],
                tilts: 0,
            });
        }
        self.tilted.resize(k, 0.0);
        self.base.resize(k, 0.0);
        self.member.clear();
        self.member.resize(k, false);

        // Balance θ = 0 against θ = π/2.
        let mut a = (g[half] - g[0]) / 2.0;
        for j in 0..k {
            self.base[j] = g[j] + a * grid.cos2[j];
        }
        let mut b = self.balance_halves(grid, tol)?;

        let cap = 4 * k;
        for tilts in 0..=cap {
            for j in 0..k {
                self.tilted[j] = g[j] + a * grid.cos2[j] + b * grid.sin2[j];
            }
            let min = self.tilted.iter().copied().fold(f64::INFINITY, f64::min);
            self.minimizers.clear();
            for j in 0..k {
                let on = self.tilted[j] <= min + tol;
                self.member[j] = on;
                if on {
                    self.minimizers.push(j);
                }
            }
            if let Some(found) = self.certificate(half) {
                let (condition, indices, weights) = match found {
                    Found::Pair(i, j) => (Condition::Antipodal, vec![i, j], vec![1.0, 1.0]),
                    Found::Triple(t) => {
                        let angles = t.map(|i| grid.angle(i));
                        (Condition::Triple, t.to_vec(), triple_weights(angles).to_vec())
                    }
                };
                return Ok(TiltedSupport {
                    tilt_a: a,
                    tilt_b: b,
                    condition,
                    angles: indices.iter().map(|&i| grid.angle(i)).collect(),
                    indices,
                    weights,
                    tilted_min: min,
                    tilts,
                });
            }

            let (i1, i2) = self.select_pair(half);
            let (t1, t2) = (grid.angle(i1), grid.angle(i2));
            let mid = 0.5 * (t1 + t2);
            let (cm, sm) = ((2.0 * mid).cos(), (2.0 * mid).sin());
            let cos_gap = (t2 - t1).cos();
            let h1 = self.tilted[i1];
            // cos 2(θ_j − mid) from the cached double-angle tables.
            let rotated = |j: usize| grid.cos2[j] * cm + grid.sin2[j] * sm;
            let mut amp = f64::INFINITY;
            let sign = if i2 - i1 < half {
                // Raise the arc between the pair and lower everything outside it.
                for j in (0..i1).chain(i2 + 1..k) {
                    let den = cos_gap - rotated(j);
                    if den > 1e-15 {
                        amp = amp.min((self.tilted[j] - h1) / den);
                    }
                }
                1.0
            } else {
                // The pair straddles more than π/2: lower the inside instead.
                for j in i1 + 1..i2 {
                    let den = rotated(j) - cos_gap;
                    if den > 1e-15 {
                        amp = amp.min((self.tilted[j] - h1) / den);
                    }
                }
                -1.0
            };
            if !amp.is_finite() || amp < 0.0 {
                return Err(Error::SearchFailure { iterations: tilts, tilt_a: a, tilt_b: b });
            }
            a += sign * amp * cm;
            b += sign * amp * sm;
        }
        Err(Error::SearchFailure { iterations: cap, tilt_a: a, tilt_b: b })
    }

    /// Finds `b` so that the minimum of `base + b·sin 2θ` over `[0, π/2]`
    /// equals the minimum over `[π/2, π]`.
    fn balance_halves(&self, grid: &ThetaGrid, tol: f64) -> Result<f64> {
        let k = grid.len();
        let half = k / 2;
        let eval = |b: f64| -> (f64, usize, usize) {
            let (mut lmin, mut li) = (f64::INFINITY, 0);
            for j in 0..=half {
                let v = self.base[j] + b * grid.sin2[j];
                if v < lmin {
                    lmin = v;
                    li = j;
                }
            }
            let (mut rmin, mut ri) = (self.base[0], 0);
            for j in half..k {
                let v = self.base[j] + b * grid.sin2[j];
                if v < rmin {
                    rmin = v;
                    ri = j;
                }
            }
            (lmin - rmin, li, ri)
        };

        let scale = self.base.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let mut bound = scale;
        let mut doublings = 0;
        while eval(bound).0 < 0.0 || eval(-bound).0 > 0.0 {
            bound *= 2.0;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return Err(Error::SearchFailure { iterations: doublings, tilt_a: 0.0, tilt_b: bound });
            }
        }
        let (mut lo, mut hi) = (-bound, bound);
        let mut b = 0.0f64.clamp(lo, hi);
        for step in 0..MAX_ROOT_STEPS {
            let (d, li, ri) = eval(b);
            if d.abs() <= tol {
                return Ok(b);
            }
            if d < 0.0 {
                lo = b;
            } else {
                hi = b;
            }
            // D is piecewise linear; jump to where the two active lines tie,
            // falling back to bisection when that leaves the bracket.
            let slope = grid.sin2[li] - grid.sin2[ri];
            let newton = if slope > 0.0 { b - d / slope } else { f64::NAN };
            b = if newton > lo && newton < hi && step % 8 != 7 { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * bound {
                return Ok(b);
            }
        }
        Ok(b)
    }

    fn certificate(&self, half: usize) -> Option<Found> {
        let s = &self.minimizers;
        let k = 2 * half;
        for &i in s {
            if i >= half {
                break;
            }
            if self.member[i + half] {
                return Some(Found::Pair(i, i + half));
            }
        }
        // Greedy: from each start take the farthest reachable minimiser, then
        // the farthest from that, and check the wrap-around gap.
        let m = s.len();
        if m < 3 {
            return None;
        }
        let at = |idx: usize| if idx < m { s[idx] } else { s[idx - m] + k };
        for start in 0..m {
            let first = s[start];
            let mut second = None;
            let mut idx = start + 1;
            while idx < start + m && at(idx) - first < half {
                second = Some(idx);
                idx += 1;
            }
            let Some(si) = second else { continue };
            let mut third = None;
            let mut idx = si + 1;
            while idx < start + m && at(idx) - at(si) < half {
                third = Some(idx);
                idx += 1;
            }
            let Some(ti) = third else { continue };
            if first + k - at(ti) < half {
                let mut t = [first, at(si) % k, at(ti) % k];
                t.sort_unstable();
                return Some(Found::Triple(t));
            }
        }
        None
    }

    /// Pair selection: the closest pair further apart than `π/2` if one
    /// exists, otherwise the two extreme minimisers.
    fn select_pair(&self, half: usize) -> (usize, usize) {
        let s = &self.minimizers;
        let mut best: Option<(usize, usize)> = None;
        for (x, &i) in s.iter().enumerate() {
            // First partner more than half away gives the smallest such gap for i.
            if let Some(&j) = s[x + 1..].iter().find(|&&j| j - i > half) {
                if best.is_none_or(|(bi, bj)| j - i < bj - bi) {
                    best = Some((i, j));
                }
            }
        }
        best.unwrap_or((s[0], s[s.len() - 1]))
    }
}

enum Found {
    Pair(usize, usize),
    Triple([usize; 3]),
}

pub fn find_optimal_support(g: &CostDensity, tol: f64) -> Result<TiltedSupport> {
    SupportSearch::new().search(&g.grid, &g.values, tol)
}

pub fn build_povm(support: &TiltedSupport) -> Result<Measurement> {
    if support.weights.iter().any(|&w| w < -1e-10) {
        return Err(Error::InvalidSupport(format!("negative weight in {:?}", support.weights)));
    }
    match (support.condition, support.angles.as_slice()) {
        (Condition::Antipodal, [t, _]) => Ok(Measurement::projective(*t)),
        (Condition::Triple, [t1, t2, t3]) => {
            let w = &support.weights;
            Measurement::three_element([*t1, *t2, *t3], [w[0], w[1], w[2]])
                .map_err(|e| Error::InvalidSupport(e.to_string()))
        }
        _ => {
            Err(Error::InvalidSupport(format!("{:?} support with {} points", support.condition, support.angles.len())))
        }
    }
}

/// `∫ f g` for the density `f` of a one-copy measurement built from
/// rank-one elements `w|θ⟩⟨θ|`.
pub fn integral_value(g: &CostDensity, m: &Measurement) -> Result<f64> {
    if m.copy_cost() != 1 {
        return Err(Error::UnsupportedArity(m.copy_cost()));
    }
    Ok(m.elements()
        .iter()
        .map(|e| {
            let op = &e.operator;
            let weight = op[(0, 0)] + op[(1, 1)];
            let theta = 0.5 * (2.0 * op[(0, 1)]).atan2(op[(0, 0)] - op[(1, 1)]);
            weight * g.at(theta)
        })
        .sum())
}

/// Checks that the tilted function attains its minimum (within `tol`) on
/// every support point.
pub fn certify(g: &CostDensity, support: &TiltedSupport, tol: f64) -> bool {
    let grid = &g.grid;
    let tilted: Vec<f64> =
        (0..grid.len()).map(|j| g.values[j] + support.tilt_a * grid.cos2[j] + support.tilt_b * grid.sin2[j]).collect();
    let min = tilted.iter().copied().fold(f64::INFINITY, f64::min);
    support.indices.iter().all(|&i| tilted[i] <= min + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn grid() -> Arc<ThetaGrid> {
        Arc::new(ThetaGrid::with_inclusive_points(1801).unwrap())
    }

    fn search(f: impl Fn(f64) -> f64) -> (CostDensity, TiltedSupport) {
        let g = CostDensity::from_fn(grid(), f).unwrap();
        let s = find_optimal_support(&g, tie_tolerance(&g.values)).unwrap();
        (g, s)
    }

    #[test]
    fn quadratic_bowl_gives_orthogonal_pair() {
        let (g, s) = search(|t| 24.0 / PI.powi(3) * (t - PI / 2.0).powi(2));
        assert_eq!(s.condition, Condition::Antipodal);
        assert_abs_diff_eq!(s.angles[0], FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(s.angles[1], 3.0 * FRAC_PI_4, epsilon = 1e-12);
        let m = build_povm(&s).unwrap();
        assert_abs_diff_eq!(integral_value(&g, &m).unwrap(), 3.0 / PI, epsilon = 1e-9);
    }

    #[test]
    fn sine_examples_give_triples() {
        let step = grid().step();
        let (_, s) = search(|t| (2.0 + (4.0 * t).sin() - (6.0 * t).sin()) / PI);
        assert_eq!(s.condition, Condition::Triple);
        for (got, want) in s.angles.iter().zip([0.163, 1.236, 2.528]) {
            assert!((got - want).abs() <= 2.0 * step, "{got} vs {want}");
        }
        let (_, s) = search(|t| (2.0 + (4.0 * t).sin() + (6.0 * t).sin()) / PI);
        assert_eq!(s.condition, Condition::Triple);
        for (got, want) in s.angles.iter().zip([0.957, 1.734, 2.807]) {
            assert!((got - want).abs() <= 2.0 * step, "{got} vs {want}");
        }
    }

    #[test]
    fn flat_density_returns_computational_basis() {
        let (_, s) = search(|_| 3.0);
        assert_eq!(s.indices, vec![0, 900]);
    }

    #[test]
    fn weights_satisfy_moments() {
        for f in [
            |t: f64| (2.0 + (4.0 * t).sin() - (6.0 * t).sin()) / PI,
            |t: f64| 1.0 + (2.0 * t + 0.4).cos().powi(3) + 0.3 * (8.0 * t).sin(),
            |t: f64| (t - 1.1).abs(),
        ] {
            let (g, s) = search(f);
            for r in s.moment_residuals() {
                assert!(r.abs() < 1e-9, "{r}");
            }
            assert!(s.weights.iter().all(|&w| w >= 0.0));
            assert!(certify(&g, &s, 1e-9 * 10.0));
        }
    }

    #[test]
    fn equilateral_triple_has_equal_weights() {
        let w = triple_weights([0.0, PI / 3.0, 2.0 * PI / 3.0]);
        for v in w {
            assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
        }
        let s = TiltedSupport {
            tilt_a: 0.0,
            tilt_b: 0.0,
            condition: Condition::Triple,
            indices: vec![0, 600, 1200],
            angles: vec![0.0, PI / 3.0, 2.0 * PI / 3.0],
            weights: w.to_vec(),
            tilted_min: 0.0,
            tilts: 0,
        };
        assert!(build_povm(&s).unwrap().completeness_residual() < 1e-12);
    }

    #[test]
    fn worked_triple_builds_a_complete_povm() {
        let t = [0.163, 1.236, 2.528];
        let w = triple_weights(t);
        let m = Measurement::three_element(t, w).unwrap();
        assert!(m.completeness_residual() < 1e-10);
    }

    #[test]
    fn integral_of_constant_density() {
        let g = CostDensity::from_fn(grid(), |_| 2.5).unwrap();
        let m = Measurement::projective(0.3);
        assert_abs_diff_eq!(integral_value(&g, &m).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn index_of_finds_grid_angles() {
        let g = grid();
        assert_eq!(g.index_of(PI / 12.0), Some(150));
        assert_eq!(g.index_of(-PI / 12.0), Some(1650));
        assert_eq!(g.index_of(0.123456), None);
    }

    #[test]
    fn rejects_odd_grids() {
        assert!(ThetaGrid::new(1801).is_err());
    }
}
