//! Comma-separated tables.
//!
//! Every table opens with one `#` line carrying the tool version, the config
//! hash and the grid sizes, followed by a normal CSV header and rows. Readers
//! that honour `#` comments (including [`read_table`]) skip it.

use std::io::{Read, Write};

use crate::config::{ProblemConfig, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::grid::ValueFunction;
use crate::policy::Policy;
use crate::simulator::SimulationSummary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub grid_points: usize,
    pub theta_points: usize,
}

impl TableMeta {
    pub fn for_config(config: &ProblemConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config.hash(),
            grid_points: config.grid.points,
            theta_points: config.theta.points,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# qdisc {} config_hash={} grid_points={} theta_points={}",
            self.tool_version, self.config_hash, self.grid_points, self.theta_points
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Format(format!("not a table metadata line: {line}"));
        let rest = line.strip_prefix("# qdisc ").ok_or_else(bad)?;
        let mut parts = rest.split_whitespace();
        let tool_version = parts.next().ok_or_else(bad)?.to_string();
        let mut field = |key: &str| -> Result<String> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(key))
                .and_then(|p| p.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(bad)
        };
        let config_hash = field("config_hash")?;
        let grid_points = field("grid_points")?.parse().map_err(|_| bad())?;
        let theta_points = field("theta_points")?.parse().map_err(|_| bad())?;
        Ok(Self { tool_version, config_hash, grid_points, theta_points })
    }
}

pub fn write_table<W: Write>(
    mut out: W,
    meta: &TableMeta,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    writeln!(out, "{}", meta.line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata, column names and rows of a table written by [`write_table`].
pub fn read_table<R: Read>(input: R) -> Result<(TableMeta, Vec<String>, Vec<Vec<String>>)> {
    let mut text = String::new();
    std::io::BufReader::new(input).read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or_default();
    let meta = TableMeta::parse(first)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((meta, header, rows))
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub const VALUE_HEADER: [&str; 7] = ["q", "value", "arm", "elements", "theta0", "theta1", "theta2"];

/// One row per knot: value, arm and measurement angles in radians.
pub fn value_rows(value: &ValueFunction, policy: &Policy) -> Vec<Vec<String>> {
    use crate::policy::Action;
    let grid = value.grid();
    policy
        .actions()
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let arm = match a.arm() {
                None => "stop",
                Some(crate::policy::Arm::Local) => "local",
                Some(crate::policy::Arm::Collective) => "collective",
            };
            let angles: [String; 3] = match *a {
                Action::Stop => Default::default(),
                Action::Projective { theta } | Action::Collective { theta } => {
                    [num(theta), String::new(), String::new()]
                }
                Action::Povm { thetas, .. } => thetas.map(num),
            };
            let [t0, t1, t2] = angles;
            vec![num(grid.q(j)), num(value.values()[j]), arm.into(), a.element_count().to_string(), t0, t1, t2]
        })
        .collect()
}

pub const HISTOGRAM_HEADER: [&str; 2] = ["copies", "count"];

pub fn histogram_rows(summary: &SimulationSummary) -> Vec<Vec<String>> {
    summary.histogram.iter().map(|(c, n)| vec![c.to_string(), n.to_string()]).collect()
}
