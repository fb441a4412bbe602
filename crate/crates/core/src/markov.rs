//! Expected cost-to-stop of a Markov chain on the prior grid.
//!
//! Every undecided knot carries a per-step cost and a list of weighted
//! transitions to interpolation locations. The expected total cost solves
//! `(I − T) N = c`. Posterior shifts are bounded, so `I − T` is banded and
//! a direct banded elimination is usually the fastest exact route; very wide
//! bands fall back to symmetric Gauss-Seidel.

use crate::error::{Error, Result};
use crate::grid::{interpolate, Location, QGrid};

/// Values above this mean the chain does not reach the stop region in any
/// practical number of copies.
pub const DIVERGENCE_CAP: f64 = 1e7;

/// Elimination work (rows × lower × upper bandwidth) allowed for the direct
/// solver before switching to Gauss-Seidel.
const DIRECT_BUDGET: f64 = 2e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeSettings {
    /// Target bound on the remaining error, relative to `max(1, max N)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for IterativeSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 2_000_000 }
    }
}

/// Transitions out of the undecided knots `lo..=hi` of a grid.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    grid: &'a QGrid,
    lo: usize,
    hi: usize,
    costs: Vec<f64>,
    edges: Vec<Vec<(f64, Location)>>,
}

impl<'a> Chain<'a> {
    /// `None` when the grid has no undecided knot.
    pub fn new(grid: &'a QGrid) -> Option<Self> {
        let (lo, hi) = grid.undecided_range()?;
        Some(Self { grid, lo, hi, costs: Vec::with_capacity(hi - lo + 1), edges: Vec::with_capacity(hi - lo + 1) })
    }

    /// Appends the row for the next knot, in ascending order.
    pub fn push(&mut self, cost: f64, edges: Vec<(f64, Location)>) {
        self.costs.push(cost);
        self.edges.push(edges);
    }

    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    fn columns(&self, loc: Location) -> [(usize, f64); 2] {
        match loc {
            Location::Stop => [(0, 0.0), (0, 0.0)],
            Location::Clamp(j) => [(j - self.lo, 1.0), (0, 0.0)],
            Location::Between(j, w) => [(j - self.lo, 1.0 - w), (j + 1 - self.lo, w)],
        }
    }

    fn bandwidths(&self) -> (usize, usize) {
        let (mut below, mut above) = (0, 0);
        for (i, row) in self.edges.iter().enumerate() {
            for &(_, loc) in row {
                for (c, w) in self.columns(loc) {
                    if w != 0.0 {
                        below = below.max(i.saturating_sub(c));
                        above = above.max(c.saturating_sub(i));
                    }
                }
            }
        }
        (below, above)
    }

    /// Full-grid values, zero on decided knots.
    pub fn solve(&self, settings: IterativeSettings) -> Result<Vec<f64>> {
        assert_eq!(self.costs.len(), self.hi - self.lo + 1, "chain rows incomplete");
        let n = self.costs.len();
        let (kl, ku) = self.bandwidths();
        let inner = if (n as f64) * (kl.max(1) as f64) * (ku.max(1) as f64) <= DIRECT_BUDGET {
            self.solve_banded(kl, ku)?
        } else {
            self.solve_gauss_seidel(settings)?
        };
        let mut values = vec![0.0; self.grid.len()];
        values[self.lo..=self.hi].copy_from_slice(&inner);
        Ok(values)
    }

    fn solve_banded(&self, kl: usize, ku: usize) -> Result<Vec<f64>> {
        let n = self.costs.len();
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        let at = |r: usize, c: usize| r * width + (c + kl - r);
        for (i, row) in self.edges.iter().enumerate() {
            band[at(i, i)] += 1.0;
            for &(p, loc) in row {
                for (c, w) in self.columns(loc) {
                    if w != 0.0 {
                        band[at(i, c)] -= p * w;
                    }
                }
            }
        }
        let mut rhs = self.costs.clone();
        // I − T is diagonally dominant by rows, so elimination without
        // pivoting is stable and creates no fill outside the band.
        for k in 0..n {
            let pivot = band[at(k, k)];
            if pivot.is_nan() || pivot <= 1e-15 {
                return Err(Error::Infeasible("the stopping chain never terminates".into()));
            }
            let last_col = (k + ku).min(n - 1);
            for r in k + 1..=(k + kl).min(n - 1) {
                let factor = band[at(r, k)] / pivot;
                if factor == 0.0 {
                    continue;
                }
                band[at(r, k)] = 0.0;
                for c in k + 1..=last_col {
                    band[at(r, c)] -= factor * band[at(k, c)];
                }
                rhs[r] -= factor * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for c in k + 1..=(k + ku).min(n - 1) {
                s -= band[at(k, c)] * x[c];
            }
            x[k] = s / band[at(k, k)];
        }
        check_finite(&x)?;
        Ok(x)
    }

    fn solve_gauss_seidel(&self, settings: IterativeSettings) -> Result<Vec<f64>> {
        let n = self.costs.len();
        let mut values = vec![0.0; self.grid.len()];
        let mut deltas: Vec<f64> = Vec::new();
        for sweep in 0..settings.max_sweeps {
            let mut delta = 0.0f64;
            let mut update = |i: usize, values: &mut Vec<f64>| {
                let new =
                    self.costs[i] + self.edges[i].iter().map(|&(p, loc)| p * interpolate(values, loc)).sum::<f64>();
                let j = i + self.lo;
                delta = delta.max((new - values[j]).abs());
                values[j] = new;
            };
            if sweep % 2 == 0 {
                (0..n).for_each(|i| update(i, &mut values));
            } else {
                (0..n).rev().for_each(|i| update(i, &mut values));
            }
            let vmax = values.iter().copied().fold(0.0, f64::max);
            if vmax > DIVERGENCE_CAP || !vmax.is_finite() {
                return Err(diverged());
            }
            if delta == 0.0 {
                break;
            }
            deltas.push(delta);
            let m = deltas.len();
            if m >= 3 {
                // Forward sweeps compare with forward sweeps, backward with backward.
                let r = (deltas[m - 1] / deltas[m - 3]).sqrt();
                if r < 1.0 {
                    let tail = delta * r / (1.0 - r);
                    if tail < settings.tol * vmax.max(1.0) {
                        break;
                    }
                    if m > 50 && vmax + tail > DIVERGENCE_CAP {
                        return Err(diverged());
                    }
                }
            }
            if sweep + 1 == settings.max_sweeps {
                return Err(Error::NonProgress(format!(
                    "chain values did not settle within {} sweeps",
                    settings.max_sweeps
                )));
            }
        }
        Ok(values[self.lo..=self.hi].to_vec())
    }
}

fn diverged() -> Error {
    Error::Infeasible(format!("expected cost exceeds {DIVERGENCE_CAP:e} copies"))
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= DIVERGENCE_CAP) {
        Ok(())
    } else {
        Err(diverged())
    }
}
