use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use cmm_core::baselines::{
    point_fix, residual_common_biases, static_cmm_step, PointFix, SmoothedStatic, SmootherConfig,
    StaticCmmConfig, StaticCmmOutput,
};
use cmm_core::lanemap::LaneMap;
use cmm_core::rbpf::{initial_belief, RbpfConfig, RbpfState};
use cmm_core::sim::{
    write_bias_truth_csv, write_vehicle_truth_csv, MeasurementEpoch, Scenario,
    ScenarioEpoch,
};
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Method, NoiseModel, ScenarioConfig};
use crate::metrics::{read_epoch_csv, run_metrics, write_epoch_csv, EpochRecord};
use crate::summary::{write_summary_csv, SummaryRow};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub method: Method,
    pub noise_model: NoiseModel,
    pub seed: u64,
}

impl RunSpec {
    pub fn file_name(&self) -> String {
        format!("{}_{}_seed{}.csv", self.method, self.noise_model.file_tag(), self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

/// Multipath-flag tallies after the warm-up window. For the RBPF a flag
/// counts as the fraction of particles raising it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateStats {
    pub clean_flagged: f64,
    pub clean_total: usize,
    pub multipath_flagged: f64,
    pub multipath_total: usize,
}

impl GateStats {
    /// Rate of λ = 1 on ranges that carry no multipath.
    pub fn clean_rate(&self) -> f64 {
        self.clean_flagged / self.clean_total as f64
    }

    /// Rate of λ = 1 on ranges that carry multipath.
    pub fn detection_rate(&self) -> f64 {
        self.multipath_flagged / self.multipath_total as f64
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub records: Vec<EpochRecord>,
    pub gate: Option<GateStats>,
    pub status: RunStatus,
    /// Free-form notes: degenerate epochs, unconverged fixes, failure cause.
    pub diagnostics: Vec<String>,
}

pub fn load_map(cfg: &ScenarioConfig) -> Result<LaneMap<f64>> {
    match &cfg.map {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(LaneMap::parse(&text)?)
        }
        None => Ok(LaneMap::intersection(3.5, 1000.0)),
    }
}

pub fn build_scenario(cfg: &ScenarioConfig, map: &LaneMap<f64>, noise_model: NoiseModel) -> Result<Scenario> {
    let mut sc = Scenario::approach(
        map,
        cfg.nv,
        cfg.speed,
        cfg.approach,
        cfg.constellation(),
        cfg.noise.clone(),
        cfg.dt,
        cfg.duration,
    )?;
    sc.multipath_enabled = noise_model.multipath();
    Ok(sc)
}

/// Per-epoch output shared by all methods.
struct EpochEstimate {
    positions: Vec<Vector2<f64>>,
    cov_det: Vec<f64>,
    bias_mean: Vec<f64>,
    bias_std: Vec<f64>,
}

fn records_for(e: &ScenarioEpoch, est: &EpochEstimate) -> Vec<EpochRecord> {
    let bias_err: Vec<f64> = est
        .bias_mean
        .iter()
        .zip(&e.biases.biases)
        .map(|(m, c)| m - c)
        .collect();
    e.vehicles
        .iter()
        .zip(&est.positions)
        .zip(&est.cov_det)
        .enumerate()
        .map(|(i, ((truth, p), &det))| {
            let d = p - truth.position;
            EpochRecord {
                epoch: e.index,
                t: e.t,
                vehicle_id: i + 1,
                err_x: d.x,
                err_y: d.y,
                err_norm: d.norm(),
                cov_det_xy: det,
                bias_err: bias_err.clone(),
                bias_std: est.bias_std.clone(),
            }
        })
        .collect()
}

/// Least-squares fix per vehicle after subtracting `bias` from each range.
fn point_fixes(m: &MeasurementEpoch, nv: usize, bias: Option<&[f64]>, sigma2_z: f64) -> Result<Vec<PointFix<f64>>> {
    (0..nv)
        .map(|i| {
            let obs: Vec<(Vector3<f64>, f64)> = m
                .for_vehicle(i)
                .into_iter()
                .map(|(j, z)| (m.satellites[j].position, z - bias.map_or(0.0, |b| b[j])))
                .collect();
            Ok(point_fix(&obs, sigma2_z)?)
        })
        .collect()
}

fn static_estimate(e: &ScenarioEpoch, fixes: &[PointFix<f64>], out: &StaticCmmOutput<f64>) -> EpochEstimate {
    let clocks: Vec<f64> = fixes.iter().map(|f| f.clock_bias).collect();
    let biases = residual_common_biases(&e.measurements, &out.corrected, &clocks);
    let det = if out.degenerate { f64::NAN } else { out.correction_cov.determinant() };
    EpochEstimate {
        positions: out.corrected.clone(),
        cov_det: vec![det; fixes.len()],
        bias_mean: biases.iter().map(|b| b.mean).collect(),
        bias_std: biases.iter().map(|b| b.std).collect(),
    }
}

fn method_stream(method: Method) -> u64 {
    match method {
        Method::Rbpf => 2,
        Method::Static => 3,
        Method::SmoothedStatic => 4,
    }
}

/// Runs one grid cell. Configuration problems are errors; a filter that
/// fails mid-run yields a `Failed` status with the records produced so far.
pub fn run_single(cfg: &ScenarioConfig, map: &LaneMap<f64>, spec: RunSpec) -> Result<RunOutput> {
    let scenario = build_scenario(cfg, map, spec.noise_model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(method_stream(spec.method));
    let mut out = RunOutput {
        spec,
        records: Vec::with_capacity((scenario.epochs() + 1) * cfg.nv),
        gate: None,
        status: RunStatus::Ok,
        diagnostics: Vec::new(),
    };
    let scfg = StaticCmmConfig {
        n_particles: cfg.static_particles,
        search_radius: cfg.search_radius,
        blur_sigma: cfg.blur_sigma,
    };
    let headings: Vec<f64> = scenario.vehicles.iter().map(|v| map.lanes()[v.lane].heading()).collect();
    let sigma2_z = cfg.noise.sigma2_z;

    let mut rbpf: Option<RbpfState<f64>> = None;
    let rcfg = RbpfConfig {
        n_particles: cfg.n_particles,
        dt: cfg.dt,
        sigma2_c: cfg.noise.sigma2_c,
        sigma2_z,
        sigma2_n: cfg.noise.sigma2_n,
        gate: cfg.gate()?,
        lane_samples: cfg.n_m,
        resample_ess_fraction: cfg.resample_ess_fraction,
        parallel: cfg.parallel,
        shared_gate_draws: cfg.shared_gate_draws,
    };
    let mut gate = GateStats::default();
    let mut smoothed = SmoothedStatic::new(
        vec![
            SmootherConfig {
                sigma2_ax: cfg.noise.sigma2_ax,
                sigma2_ay: cfg.noise.sigma2_ax,
                initial_velocity_var: cfg.init_velocity_var,
            };
            cfg.nv
        ],
        scfg.clone(),
    );
    let mut degenerate = 0usize;
    let mut unconverged = 0usize;

    for e in scenario.run(spec.seed)? {
        let step: Result<EpochEstimate> = (|| match spec.method {
            Method::Rbpf => {
                let est = match rbpf.as_mut() {
                    None => {
                        let prior = &e.biases.biases;
                        let fixes = point_fixes(&e.measurements, cfg.nv, Some(prior), sigma2_z)?;
                        unconverged += fixes.iter().filter(|f| !f.converged).count();
                        let beliefs = fixes
                            .iter()
                            .map(|f| initial_belief(f, cfg.init_inflation, cfg.init_velocity_var, cfg.init_drift_var))
                            .collect();
                        let noise = headings.iter().map(|&h| cfg.noise.aligned_with(h)).collect();
                        let state = RbpfState::init(&rcfg, prior, beliefs, noise, e.t, &mut rng)?;
                        rbpf.insert(state).estimate()
                    }
                    Some(state) => {
                        let report = state.step(&e.measurements, Some(map), &rcfg, &mut rng)?;
                        if e.t >= cfg.warmup - 1e-9 {
                            for (key, frac) in &report.multipath_fraction {
                                if e.measurements.truth_multipath.get(key).copied().unwrap_or(false) {
                                    gate.multipath_flagged += frac;
                                    gate.multipath_total += 1;
                                } else {
                                    gate.clean_flagged += frac;
                                    gate.clean_total += 1;
                                }
                            }
                        }
                        report.estimate
                    }
                };
                Ok(EpochEstimate {
                    positions: est.vehicles.iter().map(|b| b.position()).collect(),
                    cov_det: est.vehicles.iter().map(|b| b.cov_xy().determinant()).collect(),
                    bias_mean: est.bias_mean.iter().copied().collect(),
                    bias_std: est.bias_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
                })
            }
            Method::Static => {
                let fixes = point_fixes(&e.measurements, cfg.nv, None, sigma2_z)?;
                unconverged += fixes.iter().filter(|f| !f.converged).count();
                let positions: Vec<_> = fixes.iter().map(|f| f.position).collect();
                let cmm = static_cmm_step(&positions, map, &scfg, &mut rng);
                degenerate += cmm.degenerate as usize;
                Ok(static_estimate(&e, &fixes, &cmm))
            }
            Method::SmoothedStatic => {
                let fixes = point_fixes(&e.measurements, cfg.nv, None, sigma2_z)?;
                unconverged += fixes.iter().filter(|f| !f.converged).count();
                let cmm = smoothed.step(&fixes, cfg.dt, map, &mut rng)?;
                degenerate += cmm.degenerate as usize;
                Ok(static_estimate(&e, &fixes, &cmm))
            }
        })();
        match step {
            Ok(est) => out.records.extend(records_for(&e, &est)),
            Err(err) => {
                out.status = RunStatus::Failed(format!("epoch {}: {err}", e.index));
                break;
            }
        }
    }
    if spec.method == Method::Rbpf {
        out.gate = Some(gate);
    }
    if degenerate > 0 {
        out.diagnostics.push(format!("{degenerate} degenerate correction epochs"));
    }
    if unconverged > 0 {
        out.diagnostics.push(format!("{unconverged} unconverged point fixes"));
    }
    if let RunStatus::Failed(why) = &out.status {
        out.diagnostics.push(format!("failed at {why}"));
    }
    Ok(out)
}

/// Every (method, noise model, seed) combination of `cfg`, in that nesting
/// order.
pub fn grid(cfg: &ScenarioConfig) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for &method in &cfg.methods {
        for &noise_model in &cfg.noise_models {
            for &seed in &cfg.seeds {
                specs.push(RunSpec { method, noise_model, seed });
            }
        }
    }
    specs
}

/// Runs the whole grid and writes one epoch CSV per run plus `summary.csv`
/// into `out_dir`. Summary statistics are computed from the CSVs as written.
pub fn run_experiment(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    cfg.validate()?;
    let map = load_map(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let specs = grid(cfg);
    let outputs: Vec<Result<RunOutput>> = specs.par_iter().map(|&s| run_single(cfg, &map, s)).collect();
    let mut rows = Vec::with_capacity(outputs.len());
    for o in outputs {
        let o = o?;
        let path = out_dir.join(o.spec.file_name());
        write_epoch_csv(BufWriter::new(File::create(&path)?), cfg.ns, &o.records)?;
        let parsed = read_epoch_csv(File::open(&path)?)?;
        let metrics = match run_metrics(&parsed, cfg.warmup) {
            Ok(m) => Some(m),
            Err(_) => None,
        };
        rows.push(SummaryRow::new(&o, metrics, cfg.warmup));
    }
    write_summary_csv(BufWriter::new(File::create(out_dir.join("summary.csv"))?), cfg.nv, cfg.ns, &rows)?;
    Ok(rows)
}

/// Writes the ground truth of every noise model and seed of the grid.
pub fn dump_truth(cfg: &ScenarioConfig, out_dir: &Path) -> Result<()> {
    let map = load_map(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    for &nm in &cfg.noise_models {
        let sc = build_scenario(cfg, &map, nm)?;
        for &seed in &cfg.seeds {
            let epochs: Vec<ScenarioEpoch> = sc.run(seed)?.collect();
            let tag = format!("{}_seed{seed}", nm.file_tag());
            write_vehicle_truth_csv(
                BufWriter::new(File::create(out_dir.join(format!("truth_vehicles_{tag}.csv")))?),
                &epochs,
            )?;
            write_bias_truth_csv(
                BufWriter::new(File::create(out_dir.join(format!("truth_biases_{tag}.csv")))?),
                &epochs,
            )?;
        }
    }
    Ok(())
}
