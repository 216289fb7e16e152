//! Cartesian sweeps over config axes, run on a worker pool.

use anyhow::Result;
use rayon::prelude::*;

use crate::config::{Config, ConfigError};
use crate::experiments;
use crate::metrics::MetricsReport;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parse `name=v1,v2,...`.
pub fn parse_axis(s: &str) -> Result<Axis, ConfigError> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::new(format!("axis '{s}' must look like name=v1,v2")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::new(format!("axis '{key}' has no values")));
    }
    Ok(Axis {
        key: key.trim().to_string(),
        values,
    })
}

/// All axis assignments in row-major order (first axis outermost).
fn cells(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.values.len());
        for prefix in &out {
            for v in &axis.values {
                let mut cell = prefix.clone();
                cell.push((axis.key.clone(), v.clone()));
                next.push(cell);
            }
        }
        out = next;
    }
    out
}

pub struct SweepOutput {
    pub reports: Vec<MetricsReport>,
    /// (cell label, error message) for cells that failed; not fatal.
    pub failures: Vec<(String, String)>,
}

/// Run every cell of the cartesian product; failures are recorded, not
/// fatal, and the report order follows the deterministic cell order.
pub fn run_sweep(base: &Config, axes: &[Axis], workers: usize) -> Result<SweepOutput> {
    if axes.is_empty() {
        return Err(ConfigError::new("sweep needs at least one axis").into());
    }
    let cells = cells(axes);
    let run_cell = |assignment: &Vec<(String, String)>| {
        let mut cfg = base.clone();
        for (k, v) in assignment {
            cfg.set(k, v);
        }
        let label = assignment
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        (label, experiments::run(&mut cfg))
    };

    let outcomes: Vec<(String, Result<experiments::RunOutput>)> = if workers == 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| anyhow::anyhow!("worker pool: {e}"))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    };

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (label, outcome) in outcomes {
        match outcome {
            Ok(out) => {
                for mut r in out.reports {
                    if r.cell.is_empty() {
                        r.cell = label.clone();
                    }
                    reports.push(r);
                }
            }
            Err(e) => failures.push((label, format!("{e:#}"))),
        }
    }
    Ok(SweepOutput { reports, failures })
}
