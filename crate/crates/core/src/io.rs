//! Solved value functions and policies on disk.
//!
//! Binary layout, little endian:
//!
//! ```text
//! b"ADPOLICY"  u32 format version  u32 header length  header (JSON)
//! per knot:    f64 q  f64 value  u8 action tag  6 × f64 action parameters
//! 32-byte SHA-256 of everything above
//! ```
//!
//! A JSON sidecar with the same header and one readable record per knot is
//! written next to it for inspection; only the binary file is read back.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ProblemConfig, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::grid::{GridKind, QGrid, ValueFunction};
use crate::policy::{Action, Arm, Policy, Strategy};
use crate::solver::{Solution, SolveReport};

pub const MAGIC: &[u8; 8] = b"ADPOLICY";
pub const FORMAT_VERSION: u32 = 1;

const RECORD_LEN: usize = 8 + 8 + 1 + 6 * 8;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ProblemConfig,
    pub strategy: Strategy,
    pub grid_kind: GridKind,
    pub grid_points: usize,
    pub epsilon: f64,
    pub theta_points: usize,
    pub report: SolveReport,
}

/// A solve as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub header: ArtifactHeader,
    pub value: ValueFunction,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarPoint {
    pub q: f64,
    pub value: f64,
    pub arm: Option<Arm>,
    pub elements: usize,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub header: ArtifactHeader,
    pub points: Vec<SidecarPoint>,
}

fn encode_action(a: &Action) -> (u8, [f64; 6]) {
    match *a {
        Action::Stop => (0, [0.0; 6]),
        Action::Projective { theta } => (1, [theta, 0.0, 0.0, 0.0, 0.0, 0.0]),
        Action::Povm { thetas, weights } => (2, [thetas[0], thetas[1], thetas[2], weights[0], weights[1], weights[2]]),
        Action::Collective { theta } => (3, [theta, 0.0, 0.0, 0.0, 0.0, 0.0]),
    }
}

fn decode_action(tag: u8, p: [f64; 6]) -> Result<Action> {
    Ok(match tag {
        0 => Action::Stop,
        1 => Action::Projective { theta: p[0] },
        2 => Action::Povm { thetas: [p[0], p[1], p[2]], weights: [p[3], p[4], p[5]] },
        3 => Action::Collective { theta: p[0] },
        t => return Err(Error::Format(format!("unknown action tag {t}"))),
    })
}

/// Cursor over a byte slice that reports truncation as a format error.
struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("file is truncated".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Artifact {
    pub fn from_solution(config: &ProblemConfig, solution: &Solution) -> Self {
        let grid = solution.value.grid();
        let header = ArtifactHeader {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            strategy: solution.policy.strategy,
            grid_kind: grid.kind(),
            grid_points: grid.len(),
            epsilon: grid.epsilon(),
            theta_points: config.theta.points,
            report: solution.report.clone(),
        };
        Self { header, value: solution.value.clone(), policy: solution.policy.clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let header_len = u32::try_from(header.len()).map_err(|_| Error::Format("header too large".into()))?;
        let n = self.value.values().len();
        let mut out = Vec::with_capacity(16 + header.len() + n * RECORD_LEN + DIGEST_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        let grid = self.value.grid();
        for (j, (&v, a)) in self.value.values().iter().zip(self.policy.actions()).enumerate() {
            out.extend_from_slice(&grid.q(j).to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
            let (tag, params) = encode_action(a);
            out.push(tag);
            for p in params {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 8 + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("not a policy file (bad magic)".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("checksum mismatch: the file is corrupted".into()));
        }
        let mut r = Reader { bytes: body, at: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = r.u32()? as usize;
        let header: ArtifactHeader =
            serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.config.hash() != header.config_hash {
            return Err(Error::Format("embedded config does not match its recorded hash".into()));
        }
        let grid = Arc::new(QGrid::new(header.grid_kind, header.grid_points, header.epsilon)?);
        let mut values = Vec::with_capacity(grid.len());
        let mut actions = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let q = r.f64()?;
            if (q - grid.q(j)).abs() > 1e-12 {
                return Err(Error::Format(format!("knot {j} is at {q}, expected {}", grid.q(j))));
            }
            values.push(r.f64()?);
            let tag = r.take(1)?[0];
            let mut params = [0.0; 6];
            for p in &mut params {
                *p = r.f64()?;
            }
            actions.push(decode_action(tag, params)?);
        }
        if r.at != body.len() {
            return Err(Error::Format(format!("{} trailing bytes", body.len() - r.at)));
        }
        let value = ValueFunction::new(grid.clone(), values)?;
        let policy = Policy::new(header.strategy, grid, actions)?;
        Ok(Self { header, value, policy })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn sidecar(&self) -> Sidecar {
        let grid = self.value.grid();
        let points = self
            .policy
            .actions()
            .iter()
            .enumerate()
            .map(|(j, a)| SidecarPoint {
                q: grid.q(j),
                value: self.value.values()[j],
                arm: a.arm(),
                elements: a.element_count(),
                action: *a,
            })
            .collect();
        Sidecar { header: self.header.clone(), points }
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, &self.sidecar())?;
        Ok(())
    }

    /// Refuses a config other than the one the policy was solved for.
    pub fn ensure_config(&self, config: &ProblemConfig) -> Result<()> {
        let hash = config.hash();
        if hash == self.header.config_hash {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "config hash {} does not match the policy's {}",
                &hash[..12],
                &self.header.config_hash[..12]
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::policy::Strategy;
    use crate::solver::SolveReport;

    fn toy() -> (ProblemConfig, Solution) {
        let mut cfg = preset("fig1c").unwrap();
        cfg.grid.points = 21;
        let grid = cfg.q_grid().unwrap();
        let actions: Vec<Action> = (0..grid.len())
            .map(|j| match j % 3 {
                _ if grid.is_decided_knot(j) => Action::Stop,
                0 => Action::Projective { theta: 0.3 },
                1 => Action::Povm { thetas: [0.1, 1.2, 2.5], weights: [0.5, 0.7, 0.8] },
                _ => Action::Collective { theta: -0.05 },
            })
            .collect();
        let values = (0..grid.len()).map(|j| if grid.is_decided_knot(j) { 0.0 } else { 1.0 + j as f64 }).collect();
        let value = ValueFunction::new(grid.clone(), values).unwrap();
        let policy = Policy::new(Strategy::Goal, grid, actions).unwrap();
        let report = SolveReport {
            strategy: Strategy::Goal,
            iterations: 3,
            sup_norm_history: vec![1.0, 0.1, 1e-5],
            converged: true,
            wall_time_secs: 0.5,
            max_increase: 0.0,
            start: Action::Projective { theta: 0.7 },
            restriction: "r".into(),
        };
        let solution = Solution { value: value.clone(), policy, report, initial: value };
        (cfg, solution)
    }

    #[test]
    fn binary_round_trip() {
        let (cfg, sol) = toy();
        let art = Artifact::from_solution(&cfg, &sol);
        let back = Artifact::from_bytes(&art.to_bytes().unwrap()).unwrap();
        assert_eq!(art, back);
        back.ensure_config(&cfg).unwrap();
    }

    #[test]
    fn corruption_and_mismatch_are_caught() {
        let (cfg, sol) = toy();
        let art = Artifact::from_solution(&cfg, &sol);
        let mut bytes = art.to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(Artifact::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(Artifact::from_bytes(b"NOTAPOLICYFILE-------------------------------------").is_err());
        let mut other = cfg.clone();
        other.solver.tol = 1e-6;
        assert!(art.ensure_config(&other).is_err());
    }

    #[test]
    fn sidecar_lists_every_knot() {
        let (cfg, sol) = toy();
        let side = Artifact::from_solution(&cfg, &sol).sidecar();
        assert_eq!(side.points.len(), 21);
        assert_eq!(side.points[0].action, Action::Stop);
        assert!(side.points.iter().any(|p| p.elements == 4 && p.arm == Some(Arm::Collective)));
        let json = serde_json::to_string(&side).unwrap();
        let back: Sidecar = serde_json::from_str(&json).unwrap();
        assert_eq!(back, side);
    }
}
