//! Closed-form adaptive local strategy for two pure states `cos(x/2)|0⟩ ± sin(x/2)|1⟩`
//! and the perfect-discrimination lower bound.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::STOP_SLACK;

/// Longest posterior chain followed through the projective region.
pub const MAX_CHAIN: usize = 1_000_000;

const ARCSIN_SLACK: f64 = 1e-12;

/// Which measurement the closed form prescribes for `q ≤ 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCase {
    /// `q = 1/2`: fixed three-element POVM whose middle outcome leaves the prior unchanged.
    Balanced,
    /// Three-element POVM whose middle outcome resets the prior to `1/2`.
    ThreeElement,
    /// Projective pair `θ0`, `θ0 − π/2`; the second outcome raises the posterior.
    Projective,
    /// One projective measurement decides whatever the outcome.
    OneShot,
}

impl GoalCase {
    pub fn number(self) -> u8 {
        match self {
            GoalCase::Balanced => 1,
            GoalCase::ThreeElement => 2,
            GoalCase::Projective => 3,
            GoalCase::OneShot => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalAngles {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// `θ0 − π/2`.
    pub theta4: f64,
    pub case: GoalCase,
    /// True for `q > 1/2`, where angles are the reflection `θ → π − θ` of
    /// those at `1 − q`.
    pub mirrored: bool,
    /// Weight of the `θ2` element.
    pub lambda: f64,
}

impl GoalAngles {
    /// Case label 1–4, or 5 for the mirrored half.
    pub fn case_number(&self) -> u8 {
        if self.mirrored {
            5
        } else {
            self.case.number()
        }
    }
}

fn asin_checked(arg: f64) -> Result<f64> {
    if !arg.is_finite() || arg.abs() > 1.0 + ARCSIN_SLACK {
        return Err(Error::Domain(format!("arcsin argument {arg} outside [-1, 1]")));
    }
    Ok(arg.clamp(-1.0, 1.0).asin())
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x <= FRAC_PI_2) {
        return Err(Error::Domain(format!("x must lie in (0, π/2], got {x}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 0.5), got {eps}")));
    }
    Ok(())
}

/// Upper end of the one-shot region, `(1 − √(1 − 4ε(1−ε)/cos²x))/2`.
/// When the root is imaginary one measurement always suffices and this is `1/2`.
pub fn one_shot_limit(x: f64, eps: f64) -> f64 {
    let c2 = x.cos().powi(2);
    let disc = 1.0 - 4.0 * eps * (1.0 - eps) / c2;
    if disc <= 0.0 || !disc.is_finite() {
        0.5
    } else {
        0.5 * (1.0 - disc.sqrt())
    }
}

/// Prior above which the zero-error strategy switches from projective
/// exclusion to the three-element POVM.
pub fn critical_q(x: f64) -> f64 {
    let c2 = x.cos().powi(2);
    c2 / (1.0 + c2)
}

fn raw_angles(q: f64, x: f64, eps: f64) -> Result<(f64, f64, f64)> {
    let (c2x, s2x) = ((2.0 * x).cos(), (2.0 * x).sin());
    let a0 = c2x * eps * (1.0 - q) - (1.0 - eps) * q;
    let d0 = (a0 * a0 + (eps * (1.0 - q) * s2x).powi(2)).sqrt();
    let theta0 = PI - 0.5 * asin_checked((q - eps) / d0)? - 0.5 * asin_checked(-a0 / d0)? + 0.5 * x;

    let a1 = (1.0 - eps) * (1.0 - q) - eps * q * c2x;
    let d1 = (a1 * a1 + (eps * q * s2x).powi(2)).sqrt();
    let theta1 = -0.5 * x + 0.5 * asin_checked(a1 / d1)? + 0.5 * asin_checked((1.0 - eps - q) / d1)?;

    let c2 = x.cos().powi(2);
    let d2 = (q * q * c2 + 0.25 - q * c2).sqrt();
    let theta2 = 0.5 * asin_checked((0.5 - q) / d2)? + 0.5 * asin_checked((0.5 - q) * x.cos() / d2)?;
    Ok((theta0, theta1, theta2))
}

fn lambda_of(t0: f64, t1: f64, t2: f64) -> f64 {
    let s10 = (2.0 * (t1 - t0)).sin();
    2.0 * s10 / (s10 + (2.0 * (t2 - t1)).sin() + (2.0 * (t0 - t2)).sin())
}

/// Angles and case of the closed-form strategy at an undecided prior.
pub fn goal_angles(q: f64, x: f64, eps: f64) -> Result<GoalAngles> {
    check_x(x)?;
    check_eps(eps)?;
    if !(q > eps && q < 1.0 - eps) {
        return Err(Error::Domain(format!("prior {q} is not inside ({eps}, {})", 1.0 - eps)));
    }
    if q > 0.5 {
        let inner = goal_angles(1.0 - q, x, eps)?;
        let reflect = |t: f64| PI - t;
        return Ok(GoalAngles {
            theta0: reflect(inner.theta0),
            theta1: reflect(inner.theta1),
            theta2: reflect(inner.theta2),
            theta4: reflect(inner.theta4),
            mirrored: true,
            ..inner
        });
    }
    let (theta0, theta1, theta2) = raw_angles(q, x, eps)?;
    let theta4 = theta0 - FRAC_PI_2;
    let case = if q == 0.5 {
        GoalCase::Balanced
    } else if q <= one_shot_limit(x, eps) {
        GoalCase::OneShot
    } else if theta4 > theta2 {
        GoalCase::ThreeElement
    } else {
        GoalCase::Projective
    };
    Ok(GoalAngles { theta0, theta1, theta2, theta4, case, mirrored: false, lambda: lambda_of(theta0, theta1, theta2) })
}

fn overlap2(theta: f64, state_angle: f64) -> f64 {
    (theta - state_angle).cos().powi(2)
}

/// Closed-form `N(1/2)`: the middle element returns the prior to `1/2`,
/// so `N = 1/(1 − P_mid)` with `P_mid = λ·tr[|0⟩⟨0|(ρ0+ρ1)]/2`.
fn balanced_value(x: f64, eps: f64) -> Result<f64> {
    let a = goal_angles(0.5, x, eps)?;
    let trace = 2.0 * (0.5 * x).cos().powi(2);
    Ok(2.0 / (2.0 - a.lambda * trace))
}

/// Expected copies of the closed-form strategy.
pub fn n_goal_analytic(q: f64, x: f64, eps: f64) -> Result<f64> {
    check_x(x)?;
    check_eps(eps)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("prior {q} outside [0, 1]")));
    }
    let decided = |q: f64| q.min(1.0 - q) <= eps * (1.0 + STOP_SLACK);
    let half = x / 2.0;
    let mut total = 0.0;
    let mut reach = 1.0;
    let mut q = q;
    for _ in 0..MAX_CHAIN {
        if decided(q) {
            return Ok(total);
        }
        q = q.min(1.0 - q);
        let a = goal_angles(q, x, eps)?;
        match a.case {
            GoalCase::OneShot => return Ok(total + reach),
            GoalCase::Balanced => return Ok(total + reach * balanced_value(x, eps)?),
            GoalCase::ThreeElement => {
                let p_mid = a.lambda * (q * overlap2(a.theta2, half) + (1.0 - q) * overlap2(a.theta2, -half));
                return Ok(total + reach * (1.0 + p_mid * balanced_value(x, eps)?));
            }
            GoalCase::Projective => {
                let t0 = overlap2(a.theta4, half);
                let p = q * t0 + (1.0 - q) * overlap2(a.theta4, -half);
                total += reach;
                reach *= p;
                if reach == 0.0 {
                    return Ok(total);
                }
                q = q * t0 / p;
            }
        }
    }
    Err(Error::NonProgress(format!("posterior chain exceeded {MAX_CHAIN} steps")))
}

/// Smallest failure probability of perfect discrimination from `n` copies.
pub fn p_n_col(q: f64, x: f64, n: u32) -> f64 {
    let c2n = x.cos().powi(2 * n as i32);
    let qc = c2n / (1.0 + c2n);
    let (lo, hi) = (q.min(1.0 - q), q.max(1.0 - q));
    if lo >= qc {
        2.0 * (q * (1.0 - q)).sqrt() * x.cos().powi(n as i32)
    } else {
        lo + hi * c2n
    }
}

/// `1 + Σ_n P_{n,col}`: no strategy, collective or otherwise, discriminates
/// the two states perfectly with fewer copies on average.
pub fn lower_bound(q: f64, x: f64) -> Result<f64> {
    check_x(x)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("prior {q} outside [0, 1]")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    let c = x.cos();
    let lo = q.min(1.0 - q);
    let mut total = 1.0;
    for n in 1u32.. {
        let c2n = c.powi(2 * n as i32);
        if lo >= c2n / (1.0 + c2n) {
            // From here on every term is 2√(q(1−q))·cⁿ, a geometric series.
            return Ok(total + 2.0 * (q * (1.0 - q)).sqrt() * c.powi(n as i32) / (1.0 - c));
        }
        let term = p_n_col(q, x, n);
        total += term;
        if term < 1e-12 {
            break;
        }
    }
    Ok(total)
}

/// Smaller posterior after `n − 1` failed rounds, as in the product form of `P_{n,col}`.
pub fn failure_posterior(q: f64, x: f64, rounds: u32) -> f64 {
    let (lo, hi) = (q.min(1.0 - q), q.max(1.0 - q));
    let c = x.cos().powi(2 * rounds as i32);
    (lo / (hi * c + lo)).min(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn critical_prior_values() {
        assert_abs_diff_eq!(critical_q(PI / 6.0), 3.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(critical_q(FRAC_PI_2), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(critical_q(1e-9), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn balanced_prior_has_flat_middle_element() {
        for (x, eps) in [(PI / 6.0, 0.05), (PI / 12.0, 0.01), (PI / 4.0, 0.0)] {
            let a = goal_angles(0.5, x, eps).unwrap();
            assert_eq!(a.case, GoalCase::Balanced);
            assert_abs_diff_eq!(a.theta2, 0.0, epsilon = 1e-12);
            assert!((0.0..=2.0).contains(&a.lambda), "{}", a.lambda);
        }
    }

    #[test]
    fn zero_error_angles_are_exclusion_directions() {
        let x = PI / 6.0;
        for q in [0.45, 0.3] {
            let a = goal_angles(q, x, 0.0).unwrap();
            assert_abs_diff_eq!(a.theta0, x / 2.0 + FRAC_PI_2, epsilon = 1e-9);
            assert_abs_diff_eq!(a.theta1, -x / 2.0 + FRAC_PI_2, epsilon = 1e-9);
        }
        assert_eq!(goal_angles(0.45, x, 0.0).unwrap().case, GoalCase::ThreeElement);
        assert_eq!(goal_angles(0.3, x, 0.0).unwrap().case, GoalCase::Projective);
    }

    #[test]
    fn case_boundary_at_zero_error_is_the_critical_prior() {
        let x = PI / 6.0;
        let qc = critical_q(x);
        assert_eq!(goal_angles(qc + 1e-6, x, 0.0).unwrap().case, GoalCase::ThreeElement);
        assert_eq!(goal_angles(qc - 1e-6, x, 0.0).unwrap().case, GoalCase::Projective);
    }

    #[test]
    fn mirrored_half_reflects_angles() {
        let a = goal_angles(0.3, PI / 6.0, 0.05).unwrap();
        let b = goal_angles(0.7, PI / 6.0, 0.05).unwrap();
        assert!(b.mirrored);
        assert_eq!(b.case_number(), 5);
        assert_abs_diff_eq!(a.theta0 + b.theta0, PI, epsilon = 1e-12);
        assert_abs_diff_eq!(a.lambda, b.lambda, epsilon = 1e-12);
    }

    #[test]
    fn one_shot_region_costs_one_copy() {
        let (x, eps) = (PI / 6.0, 0.05);
        let q4 = one_shot_limit(x, eps);
        assert!(q4 > eps);
        assert_eq!(n_goal_analytic(0.5 * (eps + q4), x, eps).unwrap(), 1.0);
        assert_eq!(n_goal_analytic(eps, x, eps).unwrap(), 0.0);
        assert_eq!(n_goal_analytic(1.0 - eps, x, eps).unwrap(), 0.0);
    }

    #[test]
    fn zero_error_balanced_value_matches_lower_bound() {
        for x in [PI / 12.0, PI / 6.0, PI / 4.0] {
            let n = n_goal_analytic(0.5, x, 0.0).unwrap();
            assert_abs_diff_eq!(n, 1.0 / (1.0 - x.cos()), epsilon = 1e-9);
            assert_abs_diff_eq!(n, lower_bound(0.5, x).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_error_closed_form_equals_lower_bound_everywhere() {
        for x in [PI / 12.0, PI / 6.0, PI / 4.0] {
            for k in 1..20 {
                let q = k as f64 * 0.05;
                let n = n_goal_analytic(q, x, 0.0).unwrap();
                let lb = lower_bound(q, x).unwrap();
                assert_abs_diff_eq!(n, lb, epsilon = 1e-8 * lb);
            }
        }
    }

    #[test]
    fn p_n_col_branches() {
        let x = PI / 5.0;
        for n in 1..6 {
            assert_abs_diff_eq!(p_n_col(0.5, x, n), x.cos().powi(n as i32), epsilon = 1e-15);
        }
        assert!(p_n_col(0.3, FRAC_PI_2, 3) < 1e-40);
        assert_abs_diff_eq!(lower_bound(0.3, FRAC_PI_2).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(lower_bound(0.0, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn p_n_col_is_multiplicative() {
        for &(q, x) in &[(0.1, 0.3), (0.45, 1.2), (0.02, 0.7), (0.8, 0.2)] {
            for n in 1..=50u32 {
                let direct = p_n_col(q, x, n);
                let product = if n == 1 {
                    p_n_col(q, x, 1)
                } else {
                    p_n_col(q, x, n - 1) * p_n_col(failure_posterior(q, x, n - 1), x, 1)
                };
                assert_abs_diff_eq!(direct, product, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn arcsin_domain_is_checked() {
        assert!(asin_checked(1.0 + 1e-13).is_ok());
        assert!(asin_checked(1.0 + 1e-9).is_err());
        assert!(goal_angles(0.01, PI / 6.0, 0.05).is_err());
    }
}
