//! Per-epoch error records, their CSV form, and run-level statistics.

use std::io::{Read, Write};

use crate::{HarnessError, Result};

/// Errors of one vehicle at one epoch. Bias columns repeat for every vehicle
/// of the epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub t: f64,
    /// One-based.
    pub vehicle_id: usize,
    pub err_x: f64,
    pub err_y: f64,
    pub err_norm: f64,
    pub cov_det_xy: f64,
    pub bias_err: Vec<f64>,
    pub bias_std: Vec<f64>,
}

/// `√(mean e²)` over horizontal error norms.
pub fn compute_rms(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(HarnessError::Empty("RMS of an empty error series".into()));
    }
    let ms = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(ms.sqrt())
}

/// Nine significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn epoch_header(ns: usize) -> Vec<String> {
    let mut h: Vec<String> = ["epoch", "t", "vehicle_id", "err_x", "err_y", "err_norm", "cov_det_xy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=ns).map(|j| format!("bias_err_{j}")));
    h.extend((1..=ns).map(|j| format!("bias_std_{j}")));
    h
}

pub fn write_epoch_csv<W: Write>(w: W, ns: usize, records: &[EpochRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(epoch_header(ns))?;
    for r in records {
        if r.bias_err.len() != ns || r.bias_std.len() != ns {
            return Err(HarnessError::Schema(format!(
                "record at epoch {} has {} bias columns, expected {ns}",
                r.epoch,
                r.bias_err.len()
            )));
        }
        let mut row = vec![r.epoch.to_string(), fmt_num(r.t), r.vehicle_id.to_string()];
        row.extend([r.err_x, r.err_y, r.err_norm, r.cov_det_xy].map(fmt_num));
        row.extend(r.bias_err.iter().chain(&r.bias_std).map(|&v| fmt_num(v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_epoch_csv<R: Read>(r: R) -> Result<Vec<EpochRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let width = header.len();
    if width < 7 || (width - 7) % 2 != 0 {
        return Err(HarnessError::Schema(format!("{width} columns is not a valid epoch layout")));
    }
    let ns = (width - 7) / 2;
    let expected = epoch_header(ns);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(HarnessError::Schema("epoch CSV header does not match the schema".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| HarnessError::Schema(format!("bad number '{s}': {e}")))
    };
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f: Vec<&str> = row.iter().collect();
        records.push(EpochRecord {
            epoch: f[0].parse().map_err(|e| HarnessError::Schema(format!("bad epoch '{}': {e}", f[0])))?,
            t: num(f[1])?,
            vehicle_id: f[2].parse().map_err(|e| HarnessError::Schema(format!("bad vehicle id '{}': {e}", f[2])))?,
            err_x: num(f[3])?,
            err_y: num(f[4])?,
            err_norm: num(f[5])?,
            cov_det_xy: num(f[6])?,
            bias_err: f[7..7 + ns].iter().map(|s| num(s)).collect::<Result<_>>()?,
            bias_std: f[7 + ns..].iter().map(|s| num(s)).collect::<Result<_>>()?,
        });
    }
    Ok(records)
}

/// Statistics of one run over the epochs with `t ≥ warmup`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub epochs_used: usize,
    pub rms: f64,
    pub rms_per_vehicle: Vec<f64>,
    pub mean_cov_det: f64,
    pub median_cov_det: f64,
    /// Variance over time of each satellite's bias estimation error.
    pub bias_err_var: Vec<f64>,
}

pub fn run_metrics(records: &[EpochRecord], warmup: f64) -> Result<RunMetrics> {
    let steady: Vec<&EpochRecord> = records.iter().filter(|r| r.t >= warmup - 1e-9).collect();
    let errs: Vec<f64> = steady.iter().map(|r| r.err_norm).collect();
    let rms = compute_rms(&errs)?;
    let nv = steady.iter().map(|r| r.vehicle_id).max().unwrap_or(0);
    let rms_per_vehicle = (1..=nv)
        .map(|v| {
            let e: Vec<f64> = steady.iter().filter(|r| r.vehicle_id == v).map(|r| r.err_norm).collect();
            compute_rms(&e)
        })
        .collect::<Result<_>>()?;
    // degenerate static epochs report no covariance
    let dets: Vec<f64> = steady.iter().map(|r| r.cov_det_xy).filter(|d| d.is_finite()).collect();
    let mean_cov_det = dets.iter().sum::<f64>() / dets.len() as f64;
    let median_cov_det = median(&dets);
    let first: Vec<&EpochRecord> = steady.iter().filter(|r| r.vehicle_id == 1).copied().collect();
    let ns = first.first().map_or(0, |r| r.bias_err.len());
    let bias_err_var = (0..ns)
        .map(|j| variance(&first.iter().map(|r| r.bias_err[j]).collect::<Vec<_>>()))
        .collect();
    Ok(RunMetrics {
        epochs_used: first.len(),
        rms,
        rms_per_vehicle,
        mean_cov_det,
        median_cov_det,
        bias_err_var,
    })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample variance (n − 1 denominator); NaN below two values.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: u64, vehicle_id: usize, err: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            t: epoch as f64 * 0.1,
            vehicle_id,
            err_x: err,
            err_y: 0.0,
            err_norm: err,
            cov_det_xy: 1e-3 * (epoch + 1) as f64,
            bias_err: vec![0.1 * epoch as f64, -0.2],
            bias_std: vec![0.5, 0.25],
        }
    }

    #[test]
    fn rms_examples() {
        assert_eq!(compute_rms(&[1.0; 10]).unwrap(), 1.0);
        assert!((compute_rms(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((compute_rms(&[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(compute_rms(&[0.0; 5]).unwrap(), 0.0);
        assert!(matches!(compute_rms(&[]), Err(HarnessError::Empty(_))));
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let mut recs = vec![record(0, 1, 1.0 / 3.0), record(0, 2, 2.0), record(1, 1, 0.5)];
        recs[0].cov_det_xy = f64::NAN;
        let mut buf = Vec::new();
        write_epoch_csv(&mut buf, 2, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "epoch,t,vehicle_id,err_x,err_y,err_norm,cov_det_xy,bias_err_1,bias_err_2,bias_std_1,bias_std_2\n"
        ));
        assert!(text.contains("3.33333333e-1"));
        let back = read_epoch_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert!((back[0].err_x - 1.0 / 3.0).abs() < 1e-9);
        assert!(back[0].cov_det_xy.is_nan());
        assert_eq!(back[2].bias_std, vec![0.5, 0.25]);
    }

    #[test]
    fn rejects_foreign_header() {
        let text = "epoch,t,vehicle,err_x,err_y,err_norm,cov_det_xy\n";
        assert!(matches!(read_epoch_csv(text.as_bytes()), Err(HarnessError::Schema(_))));
        let mut buf = Vec::new();
        assert!(write_epoch_csv(&mut buf, 3, &[record(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn metrics_skip_warmup() {
        let recs: Vec<_> = (0..20).flat_map(|k| [record(k, 1, if k < 10 { 100.0 } else { 1.0 }), record(k, 2, 1.0)]).collect();
        let m = run_metrics(&recs, 1.0).unwrap();
        assert_eq!(m.epochs_used, 10);
        assert!((m.rms - 1.0).abs() < 1e-15);
        assert_eq!(m.rms_per_vehicle, vec![1.0, 1.0]);
        // bias_err_1 = 0.1 k over k = 10..19
        let expected = variance(&(10..20).map(|k| 0.1 * k as f64).collect::<Vec<_>>());
        assert!((m.bias_err_var[0] - expected).abs() < 1e-12);
        assert!(m.bias_err_var[1].abs() < 1e-30);
        assert!((m.median_cov_det - 0.0155).abs() < 1e-12);
    }

    #[test]
    fn undefined_covariances_are_skipped() {
        let mut recs: Vec<_> = (0..4).map(|k| record(k, 1, 1.0)).collect();
        recs[1].cov_det_xy = f64::NAN;
        let m = run_metrics(&recs, 0.0).unwrap();
        let finite = [recs[0].cov_det_xy, recs[2].cov_det_xy, recs[3].cov_det_xy];
        assert_eq!(m.median_cov_det, median(&finite));
        assert!((m.mean_cov_det - finite.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn median_and_variance() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(variance(&[1.0, 2.0, 3.0, 4.0]), 5.0 / 3.0);
        assert!(variance(&[1.0]).is_nan());
    }
}
