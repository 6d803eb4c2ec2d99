use std::path::{Path, PathBuf};
use std::process::Command;

use cmm_harness::experiment::run_experiment;
use cmm_harness::metrics::{compute_rms, epoch_header, read_epoch_csv};
use cmm_harness::summary::read_summary_csv;
use cmm_harness::{Method, NoiseModel, ScenarioConfig};

fn cmm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmm"))
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let map = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps/intersection.map");
    let path = dir.join("short.conf");
    std::fs::write(
        &path,
        format!("map = {}\nduration = 3\nwarmup = 1\nseed = 1, 2\n{extra}\n", map.display()),
    )
    .unwrap();
    path
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_config_covers_the_whole_table() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/table2.conf");
    let cfg = ScenarioConfig::from_file(&path).unwrap();
    assert_eq!(cfg.methods, Method::ALL.to_vec());
    assert_eq!(cfg.noise_models, NoiseModel::ALL.to_vec());
    assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
    assert_eq!((cfg.dt, cfg.duration, cfg.ns, cfg.nv), (0.1, 60.0, 6, 4));
    assert!(cfg.map.as_ref().unwrap().exists());
    assert_eq!(cfg, ScenarioConfig { map: cfg.map.clone(), seeds: cfg.seeds.clone(), ..ScenarioConfig::default() });
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "method = rbpf, static");
    let out = dir.path().join("out");
    let st = cmm()
        .args(["run", "--config"])
        .arg(&conf)
        .arg("--out")
        .arg(&out)
        .arg("--dump-truth")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let names = csv_names(&out);
    for want in [
        "rbpf_clean_seed1.csv",
        "rbpf_multipath_seed2.csv",
        "static_clean_seed2.csv",
        "summary.csv",
        "truth_vehicles_clean_seed1.csv",
        "truth_biases_multipath_seed2.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    assert!(!names.iter().any(|n| n.starts_with("smoothed-static")));

    let st = cmm().args(["summarize", "--out"]).arg(&out).output().unwrap();
    assert!(st.status.success());
    let text = String::from_utf8(st.stdout).unwrap();
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("rbpf"));
    let table = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.starts_with("method,noise_model,runs,failed,mean_rms,mean_median_cov_det,mean_bias_err_var_1,"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn command_line_narrows_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "");
    let out = dir.path().join("one");
    let st = cmm()
        .args(["run", "--config"])
        .arg(&conf)
        .args(["--seed", "7", "--method", "smoothed-static", "--noise-model", "common+white+multipath", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert_eq!(csv_names(&out), vec!["smoothed-static_multipath_seed7.csv", "summary.csv"]);
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "sigma_typo = 3");
    let st = cmm().args(["run", "--config"]).arg(&conf).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!st.status.success());
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("sigma_typo"), "{err}");
}

#[test]
fn bad_method_on_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "");
    let st = cmm().args(["run", "--config"]).arg(&conf).args(["--method", "kalman"]).output().unwrap();
    assert!(!st.status.success());
    assert!(String::from_utf8_lossy(&st.stderr).contains("kalman"));
}

#[test]
fn summary_rms_matches_epoch_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::from_file(&write_config(dir.path(), "")).unwrap();
    cfg.duration = 4.0;
    let rows = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(rows.len(), 12);
    let summary = read_summary_csv(std::fs::File::open(dir.path().join("summary.csv")).unwrap()).unwrap();
    assert_eq!(summary.len(), 12);
    for row in &summary {
        let name = format!("{}_{}_seed{}.csv", row.method, row.noise_model.file_tag(), row.seed);
        let text = std::fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(text.lines().next().unwrap(), epoch_header(cfg.ns).join(","));
        let recs = read_epoch_csv(text.as_bytes()).unwrap();
        let errs: Vec<f64> = recs.iter().filter(|r| r.t >= cfg.warmup - 1e-9).map(|r| r.err_norm).collect();
        // by hand from the text as well, independent of the reader
        let by_hand: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1].parse::<f64>().unwrap() >= cfg.warmup - 1e-9)
            .map(|f| f[5].parse::<f64>().unwrap())
            .collect();
        assert_eq!(errs, by_hand);
        let rms = compute_rms(&errs).unwrap();
        let m = row.metrics.as_ref().unwrap();
        assert!((m.rms - rms).abs() <= 1e-9, "{name}: {} vs {rms}", m.rms);
        assert_eq!(m.epochs_used, errs.len() / cfg.nv);
    }
}

#[test]
fn epoch_csv_numbers_carry_nine_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::from_file(&write_config(dir.path(), "method = static\nnoise_model = common+white")).unwrap();
    cfg.seeds = vec![3];
    run_experiment(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("static_clean_seed3.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(5).unwrap().split(',').collect();
    assert_eq!(row.len(), 7 + 2 * cfg.ns);
    for field in &row[3..] {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 9, "{field}");
    }
}
