use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::info;
use qdmd_core::aht::{
    fit_fourier_coefficients, fit_fourier_samples, library_features, local_coefficients, monomials,
    AhtModel,
};
use qdmd_core::dmd::{
    assemble_snapshots_with, bidmd_fit, bidmd_predict, control_sequence, dmd_fit, dmd_predict,
    dmdc_fit, dmdc_predict, percent_error_per_step, relative_error, resonance_estimate, BiDmdModel,
    ControlPairing, DmdModel, DmdcModel, ModelKind, ModelRecord, SnapshotSet, Spectrum,
};
use qdmd_core::floquet::{
    floquet_dmd_fit, floquet_predict, quasi_energies, reshape_stroboscopic, write_quasi_energy_csv,
    FloquetModel,
};
use qdmd_core::linalg::{eig, Mat, Vector};
use qdmd_core::num_complex::Complex64;
use qdmd_core::simulator::{
    add_noise, integrate_bilinear, propagator, BlochTrajectory, ControlSignal, NoiseModel,
};
use serde::Serialize;

use crate::config::{AlgorithmSpec, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::report::{write_json, write_text, RunReport, Table, Timer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Trajectory in the JSON output format; `states[m]` is the sample at `times[m]`.
#[derive(Debug, Serialize)]
struct TrajectoryJson<'a> {
    dt: f64,
    sigma: f64,
    seed: Option<u64>,
    period: Option<f64>,
    times: &'a [f64],
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
}

fn columns(m: &Mat) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

pub fn write_trajectory(
    traj: &BlochTrajectory,
    dir: &Path,
    stem: &str,
    format: Format,
) -> CliResult<PathBuf> {
    match format {
        Format::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            write_text(&path, &String::from_utf8(buf).expect("ascii csv"))?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_json(
                &path,
                &TrajectoryJson {
                    dt: traj.dt,
                    sigma: traj.meta.sigma,
                    seed: traj.meta.seed,
                    period: traj.meta.period,
                    times: &traj.times,
                    states: columns(&traj.states),
                    controls: columns(&traj.controls),
                },
            )?;
            Ok(path)
        }
    }
}

pub fn read_trajectory(path: &Path) -> CliResult<BlochTrajectory> {
    let f = File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    BlochTrajectory::read_csv(BufReader::new(f))
        .map_err(|e| CliError::from(e).context(path.display()))
}

/// Simulate the configured system, with measurement noise if requested.
pub fn simulate(cfg: &ExperimentConfig) -> CliResult<BlochTrajectory> {
    let sys = cfg.build_system()?;
    let grid = cfg.sampling.resolve()?;
    let mut traj = integrate_bilinear(
        &sys,
        &cfg.controls,
        &cfg.x0(),
        grid.t0,
        grid.t_end,
        grid.dt,
        grid.substeps,
    )?;
    if grid.period.is_some() {
        traj.meta.period = grid.period;
    }
    let noisy = add_noise(
        &traj,
        &NoiseModel {
            sigma: cfg.noise.sigma,
            seed: cfg.noise.seed,
        },
    )?;
    info!(
        "simulated {} samples of dimension {}",
        noisy.len(),
        noisy.dim()
    );
    Ok(noisy)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, format: Format) -> CliResult<PathBuf> {
    let traj = simulate(cfg)?;
    write_text(&out.join("config.json"), &cfg.to_json())?;
    write_trajectory(&traj, out, "trajectory", format)
}

/// A fitted model of any kind.
pub enum Fitted {
    Dmd(DmdModel),
    Dmdc(DmdcModel),
    Bidmd(BiDmdModel, ControlPairing),
    Floquet(FloquetModel),
    Aht(AhtModel),
}

impl Fitted {
    pub fn record(&self) -> ModelRecord {
        match self {
            Fitted::Dmd(m) => m.into(),
            Fitted::Dmdc(m) => m.into(),
            Fitted::Bidmd(m, p) => {
                let mut r = ModelRecord::from(m);
                r.control_pairing = Some(*p);
                r
            }
            Fitted::Floquet(m) => m.into(),
            Fitted::Aht(m) => m.into(),
        }
    }

    fn spectrum(&self) -> (&[Complex64], f64) {
        match self {
            Fitted::Dmd(m) => (m.eigenvalues(), m.dt()),
            Fitted::Dmdc(m) => (m.eigenvalues(), m.dt()),
            Fitted::Bidmd(m, _) => (m.eigenvalues(), m.dt()),
            Fitted::Floquet(m) => (m.eigenvalues(), m.dt()),
            Fitted::Aht(m) => (m.bidmd.eigenvalues(), m.bidmd.dt()),
        }
    }

    fn resonances(&self) -> Vec<f64> {
        match self {
            Fitted::Dmd(m) => resonance_estimate(m),
            Fitted::Dmdc(m) => resonance_estimate(m),
            Fitted::Bidmd(m, _) => resonance_estimate(m),
            Fitted::Floquet(m) => resonance_estimate(m),
            Fitted::Aht(m) => resonance_estimate(&m.bidmd),
        }
    }
}

fn concat(sets: Vec<SnapshotSet>) -> CliResult<SnapshotSet> {
    if sets.len() == 1 {
        return Ok(sets.into_iter().next().expect("one set"));
    }
    Ok(SnapshotSet::concat(&sets)?)
}

fn check_dimensions(trajs: &[BlochTrajectory]) -> CliResult<()> {
    let first = trajs
        .first()
        .ok_or_else(|| CliError::data("no trajectory files given"))?;
    for (i, t) in trajs.iter().enumerate() {
        if t.dim() != first.dim() || t.n_controls() != first.n_controls() {
            return Err(CliError::data(format!(
                "trajectory {i} has {} states and {} controls, trajectory 0 has {} and {}",
                t.dim(),
                t.n_controls(),
                first.dim(),
                first.n_controls()
            )));
        }
        if (t.dt - first.dt).abs() > 1e-9 * first.dt {
            return Err(CliError::data(format!(
                "trajectory {i} has a different sampling step"
            )));
        }
    }
    Ok(())
}

/// AHT snapshots: global Fourier coefficients from the first control
/// period of each trajectory, re-expanded at every step.
fn aht_snapshots(
    traj: &BlochTrajectory,
    harmonics: usize,
    omega: f64,
    degree: usize,
) -> CliResult<SnapshotSet> {
    if traj.n_controls() != 1 {
        return Err(CliError::data(format!(
            "aht fits need exactly one control channel, trajectory has {}",
            traj.n_controls()
        )));
    }
    let period = 2.0 * PI / omega;
    let per = (period / traj.dt).round() as usize;
    if per == 0 || (per as f64 * traj.dt - period).abs() > 1e-9 * period {
        return Err(CliError::data(format!(
            "control period {period} is not a multiple of the sampling step {}",
            traj.dt
        )));
    }
    if traj.len() < per {
        return Err(CliError::data(
            "trajectory is shorter than one control period",
        ));
    }
    let samples: Vec<f64> = traj.controls.row(0).iter().take(per).copied().collect();
    let uhat = fit_fourier_samples(&samples, traj.times[0], omega, harmonics)?;
    let monos = monomials(2 * harmonics, degree);
    let m = traj.len();
    let mut theta = Mat::zeros(monos.len(), m - 1);
    for j in 0..m - 1 {
        let th = library_features(&local_coefficients(&uhat, omega, traj.times[j]), &monos);
        theta.set_column(j, &Vector::from_vec(th));
    }
    Ok(SnapshotSet::new(
        traj.states.columns(0, m - 1).into_owned(),
        traj.states.columns(1, m - 1).into_owned(),
        Some(theta),
        traj.dt,
    )?)
}

pub fn fit(alg: &AlgorithmSpec, trajs: &[BlochTrajectory]) -> CliResult<Fitted> {
    check_dimensions(trajs)?;
    let pairs = |p: ControlPairing| -> CliResult<SnapshotSet> {
        concat(
            trajs
                .iter()
                .map(|t| assemble_snapshots_with(t, p))
                .collect::<qdmd_core::Result<Vec<_>>>()?,
        )
    };
    Ok(match alg {
        AlgorithmSpec::Dmd { rank } => {
            let mut snap = pairs(ControlPairing::Left)?;
            snap.u = None;
            Fitted::Dmd(dmd_fit(&snap, *rank)?)
        }
        AlgorithmSpec::Dmdc { rank } => {
            Fitted::Dmdc(dmdc_fit(&pairs(ControlPairing::Left)?, *rank)?)
        }
        AlgorithmSpec::Bidmd {
            rank,
            rank_hat,
            pairing,
        } => Fitted::Bidmd(bidmd_fit(&pairs(*pairing)?, *rank, *rank_hat)?, *pairing),
        AlgorithmSpec::Floquet {
            rank,
            samples_per_period,
            period,
        } => {
            let period = period.or(trajs[0].meta.period).ok_or_else(|| {
                CliError::data("floquet fit needs a drive period: set algorithm.period or a '# T=' trajectory header")
            })?;
            let sets = trajs
                .iter()
                .map(|t| reshape_stroboscopic(t, period, *samples_per_period))
                .collect::<qdmd_core::Result<Vec<_>>>()?;
            Fitted::Floquet(floquet_dmd_fit(
                &concat(sets)?,
                period,
                *samples_per_period,
                *rank,
            )?)
        }
        AlgorithmSpec::Aht {
            harmonics,
            omega,
            degree,
            rank,
            rank_hat,
        } => {
            let sets = trajs
                .iter()
                .map(|t| aht_snapshots(t, *harmonics, *omega, *degree))
                .collect::<CliResult<Vec<_>>>()?;
            let bi = bidmd_fit(&concat(sets)?, *rank, *rank_hat)?;
            Fitted::Aht(AhtModel::new(bi, *harmonics, *omega, *degree)?)
        }
    })
}

/// Largest distance from a fitted quasi-energy to the monodromy spectrum of
/// the configured system.
pub fn monodromy_check(
    cfg: &ExperimentConfig,
    model: &FloquetModel,
) -> CliResult<(Vec<Complex64>, f64)> {
    let sys = cfg.build_system()?;
    let phi = propagator(
        &sys,
        &cfg.controls,
        cfg.sampling.t0,
        cfg.sampling.t0 + model.period,
        4096,
    )?;
    let exact = quasi_energies(&eig(&phi)?.values, model.period);
    let err = model
        .quasi_energies
        .iter()
        .map(|e| {
            exact
                .iter()
                .map(|x| (x - e).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok((exact, err))
}

pub struct FitOutput {
    pub model: PathBuf,
    pub report: PathBuf,
}

pub fn cmd_fit(
    cfg: &ExperimentConfig,
    files: &[PathBuf],
    out: &Path,
    timings: bool,
) -> CliResult<FitOutput> {
    let mut timer = Timer::new(timings);
    let alg = cfg
        .algorithm
        .clone()
        .ok_or_else(|| CliError::config("algorithm: required for fit"))?;
    let trajs = files
        .iter()
        .map(|p| read_trajectory(p))
        .collect::<CliResult<Vec<_>>>()?;
    timer.lap("load");
    let fitted = fit(&alg, &trajs)?;
    timer.lap("fit");

    let model_path = out.join("model.json");
    let record = fitted.record();
    write_text(&model_path, &(record.to_json()? + "\n"))?;
    let mut report = RunReport::new("fit", serde_json::to_value(cfg)?);
    report.model_path = Some("model.json".into());
    let (eigs, dt) = fitted.spectrum();
    report.set_eigenvalues(eigs);
    report.metric("dt", dt);
    report.resonance_estimates = fitted.resonances();
    match &fitted {
        Fitted::Floquet(m) => {
            let mut buf = Vec::new();
            write_quasi_energy_csv(m, &mut buf)?;
            write_text(
                &out.join("quasi_energies.csv"),
                &String::from_utf8(buf).expect("ascii"),
            )?;
            if cfg.controls.iter().all(|c| c.period().is_some()) {
                let (_, err) = monodromy_check(cfg, m)?;
                report.metric("quasi_energy_error_vs_monodromy", err);
            }
        }
        Fitted::Aht(m) => {
            write_json(&out.join("features.json"), &m.names)?;
        }
        Fitted::Bidmd(m, _) => {
            report.metric("r_tilde", m.r_tilde as f64);
            report.metric("r_hat", m.r_hat as f64);
        }
        _ => {}
    }
    if let Some(r) = report.resonance_estimates.first() {
        info!("leading resonance estimate {r:.6}");
    }
    timer.lap("write");
    timer.finish(&mut report);
    let report_path = out.join("report.json");
    write_json(&report_path, &report)?;
    Ok(FitOutput {
        model: model_path,
        report: report_path,
    })
}

/// Predicted states (columns) at `times`.
pub struct Prediction {
    pub times: Vec<f64>,
    pub states: Mat,
}

pub fn predict(
    record: &ModelRecord,
    x0: &Vector,
    controls: &[ControlSignal],
    t0: f64,
    steps: usize,
) -> CliResult<Prediction> {
    let need = |want: usize| -> CliResult<()> {
        if x0.len() != want {
            return Err(CliError::data(format!(
                "initial state has length {}, model expects {want}",
                x0.len()
            )));
        }
        Ok(())
    };
    let grid = |dt: f64| (0..=steps).map(|k| t0 + k as f64 * dt).collect::<Vec<_>>();
    let states = match record.kind {
        ModelKind::Dmd => {
            need(record.d)?;
            dmd_predict(&DmdModel::try_from(record)?, x0, steps)?
        }
        ModelKind::Dmdc | ModelKind::Bidmd => {
            need(record.d)?;
            if controls.len() != record.nc {
                return Err(CliError::data(format!(
                    "model has {} control channels, {} control signals given",
                    record.nc,
                    controls.len()
                )));
            }
            let pairing = record.control_pairing.unwrap_or_default();
            let u = control_sequence(controls, t0, record.dt, steps, pairing);
            if record.kind == ModelKind::Dmdc {
                dmdc_predict(&DmdcModel::try_from(record)?, x0, &u)?
            } else {
                bidmd_predict(&BiDmdModel::try_from(record)?, x0, &u)?
            }
        }
        ModelKind::Floquet => {
            let m = FloquetModel::try_from(record)?;
            need(m.d * m.s)?;
            let states = floquet_predict(&m, x0, steps)?;
            return Ok(Prediction {
                times: grid(m.period),
                states,
            });
        }
        ModelKind::Aht => {
            let m = AhtModel::try_from(record)?;
            need(m.bidmd.dim())?;
            if controls.len() != 1 {
                return Err(CliError::data(format!(
                    "aht models take one control signal, {} given",
                    controls.len()
                )));
            }
            let signal = &controls[0];
            let uhat = fit_fourier_coefficients(|t| signal.eval(t), m.omega, m.k, t0)?;
            m.predict(x0, &uhat, t0, steps)?
        }
    };
    Ok(Prediction {
        times: grid(record.dt),
        states,
    })
}

pub struct PredictArgs<'a> {
    pub model: &'a Path,
    pub config: Option<&'a ExperimentConfig>,
    pub x0: Option<Vec<f64>>,
    pub steps: usize,
    pub truth: Option<&'a Path>,
    pub out: &'a Path,
    pub format: Format,
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<(PathBuf, Option<f64>)> {
    let text = std::fs::read_to_string(args.model)
        .map_err(|e| CliError::data(format!("{}: {e}", args.model.display())))?;
    let record = ModelRecord::from_json(&text)
        .map_err(|e| CliError::from(e).context(args.model.display()))?;
    let x0 = match (&args.x0, args.config) {
        (Some(v), _) => Vector::from_vec(v.clone()),
        (None, Some(c)) => c.x0(),
        (None, None) => {
            return Err(CliError::config(
                "an initial state is required (--x0 or --config)",
            ))
        }
    };
    let controls = args.config.map(|c| c.controls.clone()).unwrap_or_default();
    let t0 = args.config.map(|c| c.sampling.t0).unwrap_or(0.0);
    let pred = predict(&record, &x0, &controls, t0, args.steps)?;

    let mut errors = None;
    let mut report = RunReport::new(
        "predict",
        args.config
            .map(serde_json::to_value)
            .transpose()?
            .unwrap_or(serde_json::Value::Null),
    );
    report.model_path = Some(args.model.display().to_string());
    if let Some(path) = args.truth {
        let truth = read_trajectory(path)?;
        let n = pred.states.ncols();
        if truth.dim() != pred.states.nrows() || truth.len() < n {
            return Err(CliError::data(format!(
                "truth trajectory has {} states and {} samples, prediction needs {} and {n}",
                truth.dim(),
                truth.len(),
                pred.states.nrows()
            )));
        }
        let t = truth.states.columns(0, n).into_owned();
        let per_step = percent_error_per_step(&pred.states, &t)?;
        let rel = relative_error(&pred.states, &t)?;
        report.metric("relative_error", rel);
        report.prediction_errors = per_step.clone();
        errors = Some((per_step, rel));
    }

    let d = pred.states.nrows();
    let path = match args.format {
        Format::Csv => {
            let mut cols: Vec<String> = vec!["t".into()];
            cols.extend((1..=d).map(|i| format!("x{i}")));
            if errors.is_some() {
                cols.push("rel_err_pct".into());
            }
            let mut table = Table::new(&cols);
            for (k, &t) in pred.times.iter().enumerate() {
                let mut row = vec![t];
                row.extend(pred.states.column(k).iter());
                if let Some((e, _)) = &errors {
                    row.push(e[k]);
                }
                table.row(&[], &row);
            }
            let path = args.out.join("prediction.csv");
            write_text(&path, &table.render())?;
            path
        }
        Format::Json => {
            #[derive(Serialize)]
            struct PredictionJson<'a> {
                times: &'a [f64],
                states: Vec<Vec<f64>>,
                rel_err_pct: Option<&'a [f64]>,
            }
            let path = args.out.join("prediction.json");
            write_json(
                &path,
                &PredictionJson {
                    times: &pred.times,
                    states: columns(&pred.states),
                    rel_err_pct: errors.as_ref().map(|(e, _)| e.as_slice()),
                },
            )?;
            path
        }
    };
    write_json(&args.out.join("predict_report.json"), &report)?;
    Ok((path, errors.map(|(_, r)| r)))
}
