//! `summary.csv`: one row per run, and the per-cell table built from it.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::config::{Method, NoiseModel};
use crate::experiment::{RunOutput, RunStatus};
use crate::metrics::RunMetrics;
use crate::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub noise_model: NoiseModel,
    pub seed: u64,
    pub ok: bool,
    pub warmup: f64,
    pub metrics: Option<RunMetrics>,
    pub lambda_rate_clean: f64,
    pub detection_rate: f64,
    pub diagnostics: String,
}

impl SummaryRow {
    pub fn new(o: &RunOutput, metrics: Option<RunMetrics>, warmup: f64) -> Self {
        let (clean, det) = o.gate.as_ref().map_or((f64::NAN, f64::NAN), |g| (g.clean_rate(), g.detection_rate()));
        Self {
            method: o.spec.method,
            noise_model: o.spec.noise_model,
            seed: o.spec.seed,
            ok: o.status == RunStatus::Ok && metrics.is_some(),
            warmup,
            metrics,
            lambda_rate_clean: clean,
            detection_rate: det,
            diagnostics: o.diagnostics.join("; "),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

fn header(nv: usize, ns: usize) -> Vec<String> {
    let mut h: Vec<String> = ["method", "noise_model", "seed", "status", "warmup_s", "epochs_used", "rms"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=nv).map(|i| format!("rms_v{i}")));
    h.push("mean_cov_det".into());
    h.push("median_cov_det".into());
    h.extend((1..=ns).map(|j| format!("bias_err_var_{j}")));
    h.extend(["lambda_rate_clean", "detection_rate", "diagnostics"].map(String::from));
    h
}

/// Statistics cover `t ≥ warmup_s`; the warm-up is a column so the file is
/// self-describing.
pub fn write_summary_csv<W: Write>(w: W, nv: usize, ns: usize, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(nv, ns))?;
    for r in rows {
        let mut rec = vec![
            r.method.to_string(),
            r.noise_model.to_string(),
            r.seed.to_string(),
            if r.ok { "ok" } else { "failed" }.to_string(),
            fmt_num(r.warmup),
        ];
        match &r.metrics {
            Some(m) => {
                rec.push(m.epochs_used.to_string());
                rec.push(fmt_num(m.rms));
                rec.extend((0..nv).map(|i| fmt_num(m.rms_per_vehicle.get(i).copied().unwrap_or(f64::NAN))));
                rec.push(fmt_num(m.mean_cov_det));
                rec.push(fmt_num(m.median_cov_det));
                rec.extend((0..ns).map(|j| fmt_num(m.bias_err_var.get(j).copied().unwrap_or(f64::NAN))));
            }
            None => {
                rec.push("0".into());
                rec.extend(std::iter::repeat_n(fmt_num(f64::NAN), 1 + nv + 2 + ns));
            }
        }
        rec.push(fmt_num(r.lambda_rate_clean));
        rec.push(fmt_num(r.detection_rate));
        rec.push(r.diagnostics.clone());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let h = rd.headers()?.clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::Schema(format!("summary.csv lacks column '{name}'")))
    };
    let nv = h.iter().filter(|c| c.starts_with("rms_v")).count();
    let ns = h.iter().filter(|c| c.starts_with("bias_err_var_")).count();
    let expected = header(nv, ns);
    if h.iter().ne(expected.iter().map(String::as_str)) {
        return Err(HarnessError::Schema("summary.csv header does not match the schema".into()));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|e| HarnessError::Schema(format!("bad number '{s}': {e}"))) };
    let rms_col = col("rms")?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f: Vec<&str> = rec.iter().collect();
        let ok = f[3] == "ok";
        let metrics = if ok {
            let at = |k: usize| num(f[k]);
            let v0 = rms_col + 1;
            let c0 = v0 + nv;
            let b0 = c0 + 2;
            Some(RunMetrics {
                epochs_used: f[5].parse().map_err(|e| HarnessError::Schema(format!("bad epochs_used: {e}")))?,
                rms: at(rms_col)?,
                rms_per_vehicle: (v0..c0).map(at).collect::<Result<_>>()?,
                mean_cov_det: at(c0)?,
                median_cov_det: at(c0 + 1)?,
                bias_err_var: (b0..b0 + ns).map(at).collect::<Result<_>>()?,
            })
        } else {
            None
        };
        rows.push(SummaryRow {
            method: f[0].parse().map_err(HarnessError::Schema)?,
            noise_model: f[1].parse().map_err(HarnessError::Schema)?,
            seed: f[2].parse().map_err(|e| HarnessError::Schema(format!("bad seed: {e}")))?,
            ok,
            warmup: num(f[4])?,
            metrics,
            lambda_rate_clean: num(f[col("lambda_rate_clean")?])?,
            detection_rate: num(f[col("detection_rate")?])?,
            diagnostics: f[col("diagnostics")?].to_string(),
        });
    }
    Ok(rows)
}

/// Seed-averaged statistics of one (method, noise model) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    pub noise_model: NoiseModel,
    pub runs: usize,
    pub failed: usize,
    pub mean_rms: f64,
    pub mean_median_cov_det: f64,
    /// Per satellite, averaged over seeds.
    pub mean_bias_err_var: Vec<f64>,
}

pub fn aggregate(rows: &[SummaryRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(Method, NoiseModel), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.method, r.noise_model)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((method, noise_model), rs)| {
            let ok: Vec<&RunMetrics> = rs.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let n = ok.len() as f64;
            let mean = |f: &dyn Fn(&RunMetrics) -> f64| ok.iter().map(|m| f(m)).sum::<f64>() / n;
            let ns = ok.first().map_or(0, |m| m.bias_err_var.len());
            CellSummary {
                method,
                noise_model,
                runs: rs.len(),
                failed: rs.len() - ok.len(),
                mean_rms: mean(&|m| m.rms),
                mean_median_cov_det: mean(&|m| m.median_cov_det),
                mean_bias_err_var: (0..ns).map(|j| mean(&|m| m.bias_err_var[j])).collect(),
            }
        })
        .collect()
}

pub fn write_table_csv<W: Write>(w: W, cells: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let ns = cells.first().map_or(0, |c| c.mean_bias_err_var.len());
    let mut h: Vec<String> = ["method", "noise_model", "runs", "failed", "mean_rms", "mean_median_cov_det"]
        .map(String::from)
        .to_vec();
    h.extend((1..=ns).map(|j| format!("mean_bias_err_var_{j}")));
    out.write_record(&h)?;
    for c in cells {
        let mut rec = vec![
            c.method.to_string(),
            c.noise_model.to_string(),
            c.runs.to_string(),
            c.failed.to_string(),
            fmt_num(c.mean_rms),
            fmt_num(c.mean_median_cov_det),
        ];
        rec.extend(c.mean_bias_err_var.iter().map(|&v| fmt_num(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, seed: u64, rms: f64) -> SummaryRow {
        SummaryRow {
            method,
            noise_model: NoiseModel::CommonWhite,
            seed,
            ok: true,
            warmup: 5.0,
            metrics: Some(RunMetrics {
                epochs_used: 551,
                rms,
                rms_per_vehicle: vec![rms, rms],
                mean_cov_det: 1.0,
                median_cov_det: 0.5,
                bias_err_var: vec![0.1, 0.2, 0.3],
            }),
            lambda_rate_clean: 0.02,
            detection_rate: f64::NAN,
            diagnostics: String::new(),
        }
    }

    #[test]
    fn round_trip_and_aggregate() {
        let mut failed = row(Method::Static, 3, 0.0);
        failed.ok = false;
        failed.metrics = None;
        failed.diagnostics = "failed at epoch 7: degenerate, all weights zero".into();
        let rows = vec![row(Method::Rbpf, 1, 0.4), row(Method::Rbpf, 2, 0.6), row(Method::Static, 1, 2.0), failed];
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, 2, 3, &rows).unwrap();
        let back = read_summary_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[0].metrics, rows[0].metrics);
        assert!(!back[3].ok);
        assert_eq!(back[3].diagnostics, rows[3].diagnostics);

        let cells = aggregate(&back);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].method, Method::Rbpf);
        assert!((cells[0].mean_rms - 0.5).abs() < 1e-12);
        assert_eq!((cells[1].runs, cells[1].failed), (2, 1));
        assert_eq!(cells[1].mean_rms, 2.0);
    }
}
