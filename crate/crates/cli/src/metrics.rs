//! Quantitative run outcomes and their CSV/manifest serialization.

use std::fmt::Write as _;

/// Coefficient of determination, 1 - SS_res / SS_tot.
///
/// Degenerate target variance yields 1.0 for a perfect predictor and
/// negative infinity otherwise, keeping the invariant r2 <= 1.
pub fn r_squared(predicted: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|&t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Field-recovery error measures: mean absolute and max-norm deviation.
pub fn field_errors(recovered: &[f64], truth: &[f64]) -> (f64, f64, f64) {
    assert_eq!(recovered.len(), truth.len());
    let n = truth.len() as f64;
    let mut mae = 0.0;
    let mut linf = 0.0_f64;
    let mut max_rel = 0.0_f64;
    for (&r, &t) in recovered.iter().zip(truth) {
        let d = (r - t).abs();
        mae += d;
        linf = linf.max(d);
        max_rel = max_rel.max(d / t.abs().max(1e-300));
    }
    (mae / n, linf, max_rel)
}

/// One recovered quantity: a scalar parameter or a field summary.
#[derive(Clone, Debug)]
pub struct ParamStat {
    pub name: String,
    pub true_value: Option<f64>,
    pub mean: f64,
    pub std: f64,
    pub r2: Option<f64>,
}

impl ParamStat {
    pub fn point(name: impl Into<String>, true_value: f64, recovered: f64) -> Self {
        ParamStat {
            name: name.into(),
            true_value: Some(true_value),
            mean: recovered,
            std: 0.0,
            r2: None,
        }
    }
}

/// Quantitative outcome of one run (one sweep cell).
#[derive(Clone, Debug, Default)]
pub struct MetricsReport {
    pub experiment: String,
    /// Axis values identifying the cell, e.g. "nx=640;dt=0.001".
    pub cell: String,
    /// "main" or a labeled extra section such as "out_of_range".
    pub section: String,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
    pub mae_d: Option<f64>,
    pub linf_d: Option<f64>,
    pub max_rel_err_d: Option<f64>,
    pub params: Vec<ParamStat>,
}

impl MetricsReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        MetricsReport {
            experiment: experiment.into(),
            section: "main".into(),
            ..Default::default()
        }
    }
}

pub const CSV_HEADER: &str = "experiment,section,cell,parameter,true_value,recovered_mean,recovered_std,abs_error,rel_error,r2,mae_d,linf_d,final_loss";

fn push_opt(line: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(line, "{v}");
    }
    line.push(',');
}

/// Fixed-schema CSV; one row per (report, parameter), or a single row for a
/// report without parameters. Float formatting is Rust's shortest-roundtrip
/// form, so identical runs serialize identically.
pub fn to_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let mut emit = |param: Option<&ParamStat>| {
            let mut line = String::new();
            let _ = write!(line, "{},{},{},", r.experiment, r.section, r.cell);
            match param {
                Some(p) => {
                    let _ = write!(line, "{},", p.name);
                    push_opt(&mut line, p.true_value);
                    let _ = write!(line, "{},{},", p.mean, p.std);
                    let err = p.true_value.map(|t| (p.mean - t).abs());
                    push_opt(&mut line, err);
                    let rel = p
                        .true_value
                        .and_then(|t| err.map(|e| e / t.abs().max(1e-300)));
                    push_opt(&mut line, rel);
                    push_opt(&mut line, p.r2);
                }
                None => line.push_str(",,,,,,,"),
            }
            push_opt(&mut line, r.mae_d);
            push_opt(&mut line, r.linf_d);
            let _ = write!(line, "{}", r.final_loss);
            out.push_str(&line);
            out.push('\n');
        };
        if r.params.is_empty() {
            emit(None);
        } else {
            for p in &r.params {
                emit(Some(p));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_squared_reference_points() {
        let truth = [1.0, 2.0, 3.0, 4.0];
        // Perfect predictions.
        assert_eq!(r_squared(&truth, &truth), 1.0);
        // Constant predictor at the mean scores zero.
        let mean = [2.5; 4];
        assert!(r_squared(&mean, &truth).abs() < 1e-15);
        // Never above one.
        let noisy = [1.1, 1.9, 3.2, 3.8];
        assert!(r_squared(&noisy, &truth) <= 1.0);
    }

    #[test]
    fn field_error_measures() {
        let (mae, linf, rel) = field_errors(&[1.1, 2.0, 2.7], &[1.0, 2.0, 3.0]);
        assert!((mae - 0.4 / 3.0).abs() < 1e-15);
        assert!((linf - 0.3).abs() < 1e-15);
        assert!((rel - 0.1).abs() < 1e-15);
    }

    #[test]
    fn csv_schema_is_stable() {
        let mut r = MetricsReport::new("demo");
        r.cell = "nx=40".into();
        r.final_loss = 0.5;
        r.params.push(ParamStat::point("nu", 0.01, 0.0125));
        let csv = to_csv(&[r.clone()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("demo,main,nx=40,nu,0.01,0.0125,0,"));
        // Deterministic serialization.
        assert_eq!(csv, to_csv(&[r]));
    }

    #[test]
    fn empty_report_list_is_header_only() {
        let csv = to_csv(&[]);
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }
}
