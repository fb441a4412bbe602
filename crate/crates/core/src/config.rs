//! Run configuration: problem, grids, solver and simulation settings.
//!
//! Configs are written as sectioned `key = value` text (TOML) or as JSON;
//! both map onto the same [`ProblemConfig`]. Angles may be given as numbers
//! in radians or as expressions such as `"pi/12"` or `"15deg"`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::Family;
use crate::error::{Error, Result};
use crate::grid::{GridKind, QGrid};
use crate::povm::ThetaGrid;
use crate::problem::{Problem, ProblemSpec};
use crate::simulator::SamplingMode;
use crate::solver::{GoacArms, SolverSettings};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub kind: GridKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    /// Points over `[0, π]` counting both ends.
    pub points: usize,
}

/// Angle lists for the fixed baselines and the two-arm adaptive solver, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsConfig {
    pub local_step_deg: f64,
    pub collective_min_deg: f64,
    pub collective_max_deg: f64,
    pub collective_step_deg: f64,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        Self { local_step_deg: 0.1, collective_min_deg: -5.0, collective_max_deg: 20.0, collective_step_deg: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub trials: u64,
    pub q0: Vec<f64>,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { seed: 20240501, trials: 100_000, q0: vec![0.5], mode: SamplingMode::Outcome }
    }
}

/// Mixing weights swept by the rate-ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub theta: ThetaConfig,
    #[serde(default)]
    pub arms: ArmsConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Priors at which tables and printouts report values.
    #[serde(default = "default_at")]
    pub at: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_at() -> Vec<f64> {
    vec![0.5]
}

/// Angle expression: a number in radians, `pi`, `a*pi/b`, `api/b`, or `<n>deg`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let bad = || Error::Config(format!("cannot read `{text}` as an angle"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(deg) = t.strip_suffix("deg") {
        return deg.parse::<f64>().map(f64::to_radians).map_err(|_| bad());
    }
    let Some(at) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&t[..at], &t[at + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let div = match tail {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    let v = coef * std::f64::consts::PI / div;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

const ANGLE_KEYS: [&str; 4] = ["x0", "x1", "x", "angle"];

/// Replaces string-valued angle entries under `[problem]` with radians.
fn resolve_angles(problem: Option<&mut toml::Value>) -> Result<()> {
    let Some(toml::Value::Table(t)) = problem else { return Ok(()) };
    for key in ANGLE_KEYS {
        if let Some(v) = t.get_mut(key) {
            match v {
                toml::Value::String(s) => {
                    let a = parse_angle(s).map_err(|e| Error::Config(format!("problem.{key}: {e}")))?;
                    *v = toml::Value::Float(a);
                }
                toml::Value::Integer(i) => *v = toml::Value::Float(*i as f64),
                _ => {}
            }
        }
    }
    Ok(())
}

fn resolve_angles_json(problem: Option<&mut serde_json::Value>) -> Result<()> {
    let Some(serde_json::Value::Object(t)) = problem else { return Ok(()) };
    for key in ANGLE_KEYS {
        if let Some(serde_json::Value::String(s)) = t.get(key) {
            let a = parse_angle(s).map_err(|e| Error::Config(format!("problem.{key}: {e}")))?;
            t.insert(key.to_string(), serde_json::json!(a));
        }
    }
    Ok(())
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        resolve_angles(doc.get_mut("problem"))?;
        let cfg: Self =
            toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        resolve_angles_json(doc.get_mut("problem"))?;
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Picks the reader from the extension: `.json` is JSON, anything else TOML.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: String| Err(Error::Config(format!("{key}: {why}")));
        let finite_in = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo && v <= hi;
        let eps = self.problem.epsilon();
        if !(eps.is_finite() && (0.0..0.5).contains(&eps)) {
            return fail("problem.epsilon", format!("must lie in [0, 0.5), got {eps}"));
        }
        match self.problem {
            ProblemSpec::Depolarized { x0, x1, d0, d1, .. } => {
                for (k, v) in [("problem.x0", x0), ("problem.x1", x1)] {
                    if !v.is_finite() {
                        return fail(k, format!("must be finite, got {v}"));
                    }
                }
                for (k, v) in [("problem.d0", d0), ("problem.d1", d1)] {
                    if !finite_in(v, 0.0, 1.0) {
                        return fail(k, format!("must lie in [0, 1], got {v}"));
                    }
                }
            }
            ProblemSpec::Mixture { s, angle, .. } => {
                if !finite_in(s, 0.0, 1.0) {
                    return fail("problem.s", format!("must lie in [0, 1], got {s}"));
                }
                if !angle.is_finite() {
                    return fail("problem.angle", format!("must be finite, got {angle}"));
                }
            }
            ProblemSpec::Pure { x, .. } => {
                if !(x > 0.0 && x <= std::f64::consts::FRAC_PI_2) {
                    return fail("problem.x", format!("must lie in (0, pi/2], got {x}"));
                }
            }
        }
        if self.grid.points < 3 || self.grid.points > 1_000_000 {
            return fail("grid.points", format!("must lie in [3, 1000000], got {}", self.grid.points));
        }
        if self.grid.kind == GridKind::LogOdds && eps == 0.0 {
            return fail("grid.kind", "log_odds needs epsilon > 0".into());
        }
        if self.theta.points < 5 || self.theta.points > 200_001 {
            return fail("theta.points", format!("must lie in [5, 200001], got {}", self.theta.points));
        }
        let a = &self.arms;
        if !(a.local_step_deg > 0.0 && a.local_step_deg <= 45.0) {
            return fail("arms.local_step_deg", format!("must lie in (0, 45], got {}", a.local_step_deg));
        }
        if !(a.collective_step_deg > 0.0 && a.collective_step_deg.is_finite()) {
            return fail("arms.collective_step_deg", format!("must be positive, got {}", a.collective_step_deg));
        }
        if !(a.collective_min_deg.is_finite() && a.collective_max_deg.is_finite())
            || a.collective_max_deg < a.collective_min_deg
        {
            return fail(
                "arms.collective_max_deg",
                format!("must be at least collective_min_deg ({})", a.collective_min_deg),
            );
        }
        if !(self.solver.tol > 0.0 && self.solver.tol.is_finite()) {
            return fail("solver.tol", format!("must be positive, got {}", self.solver.tol));
        }
        if self.solver.max_iter == 0 {
            return fail("solver.max_iter", "must be at least 1".into());
        }
        if self.simulation.trials == 0 {
            return fail("simulation.trials", "must be at least 1".into());
        }
        for (k, list) in [("simulation.q0", &self.simulation.q0), ("at", &self.at)] {
            if let Some(q) = list.iter().find(|q| !finite_in(**q, 0.0, 1.0)) {
                return fail(k, format!("priors must lie in [0, 1], got {q}"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.s.is_empty() {
                return fail("sweep.s", "must list at least one weight".into());
            }
            if let Some(s) = sweep.s.iter().find(|s| !finite_in(**s, 0.0, 1.0)) {
                return fail("sweep.s", format!("weights must lie in [0, 1], got {s}"));
            }
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem> {
        self.problem.build()
    }

    pub fn q_grid(&self) -> Result<Arc<QGrid>> {
        Ok(Arc::new(QGrid::new(self.grid.kind, self.grid.points, self.problem.epsilon())?))
    }

    pub fn theta_grid(&self) -> Result<Arc<ThetaGrid>> {
        Ok(Arc::new(ThetaGrid::with_inclusive_points(self.theta.points)?))
    }

    pub fn goac_arms(&self) -> GoacArms {
        let a = &self.arms;
        GoacArms::from_degrees(
            a.local_step_deg,
            Some((a.collective_min_deg, a.collective_max_deg, a.collective_step_deg)),
        )
    }

    pub fn local_family(&self) -> Family {
        Family::local_degrees(self.arms.local_step_deg)
    }

    pub fn collective_family(&self) -> Family {
        let a = &self.arms;
        Family::collective_degrees(a.collective_min_deg, a.collective_max_deg, a.collective_step_deg)
    }

    /// The same config with a different mixing weight (mixture family only).
    pub fn with_mixing(&self, s: f64) -> Result<Self> {
        let ProblemSpec::Mixture { angle, epsilon, .. } = self.problem else {
            return Err(Error::Config("problem.family: a mixing sweep needs the mixture family".into()));
        };
        let mut out = self.clone();
        out.problem = ProblemSpec::Mixture { s, angle, epsilon };
        out.validate()?;
        Ok(out)
    }
}

const PRESETS: [(&str, &str); 4] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig1c", include_str!("../presets/fig1c.toml")),
    ("fig2c", include_str!("../presets/fig2c.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Raw text of a shipped preset. `fig2` is accepted for `fig2c`.
pub fn preset_text(name: &str) -> Option<&'static str> {
    let name = if name == "fig2" { "fig2c" } else { name };
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ProblemConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!("unknown preset `{name}` (known: {})", preset_names().collect::<Vec<_>>().join(", ")))
    })?;
    ProblemConfig::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_expressions() {
        assert_eq!(parse_angle("pi/12").unwrap(), PI / 12.0);
        assert_eq!(parse_angle("-pi/12").unwrap(), -PI / 12.0);
        assert_eq!(parse_angle("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle(" PI ").unwrap(), PI);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!((parse_angle("15deg").unwrap() - PI / 12.0).abs() < 1e-15);
        for bad in ["", "pi/", "pie", "x/2", "pi/0"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn every_preset_parses_and_round_trips() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            let toml_back = ProblemConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(cfg, toml_back, "{name} via toml");
            let json_back = ProblemConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap();
            assert_eq!(cfg, json_back, "{name} via json");
            assert_eq!(cfg.hash(), json_back.hash());
            cfg.build_problem().unwrap();
            cfg.q_grid().unwrap();
        }
        assert_eq!(preset("fig2").unwrap(), preset("fig2c").unwrap());
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let base = preset_text("fig3").unwrap();
        let cases = [
            (base.replace("points = 2001", "points = 1"), "grid.points"),
            (base.replace("s = 0.05", "s = 1.5"), "problem.s"),
            (base.replace("tol = 1e-4", "tol = -1.0"), "solver.tol"),
            (base.replace("[grid]", "[grid]\npointz = 3"), "pointz"),
            (base.replace("angle = \"pi/12\"", "angle = \"pi/x\""), "problem.angle"),
        ];
        for (text, key) in cases {
            let err = ProblemConfig::from_toml_str(&text).unwrap_err().to_string();
            assert!(err.contains(key), "{key} missing from: {err}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = preset("fig3").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.grid.points += 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn mixing_sweep_only_for_mixtures() {
        let fig2 = preset("fig2c").unwrap();
        let s = fig2.with_mixing(0.08).unwrap();
        assert!(matches!(s.problem, ProblemSpec::Mixture { s, .. } if s == 0.08));
        assert!(preset("fig1").unwrap().with_mixing(0.1).is_err());
    }
}
