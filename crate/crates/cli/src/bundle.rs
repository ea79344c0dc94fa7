use std::path::{Path, PathBuf};

use qdmd_core::aht::coefficient_names;
use qdmd_core::dmd::{bidmd_fit, ModelRecord, SnapshotSet};
use qdmd_core::experiments::{
    driven_qubit, Example1, Example2, Example3, Example3Prediction, TestControl,
};
use qdmd_core::floquet::rwa_reference;
use qdmd_core::linalg::{eig, CMat, Mat};
use qdmd_core::num_complex::Complex64;
use qdmd_core::simulator::{propagator, BlochTrajectory, ControlSignal};
use qdmd_core::AhtModel;
use rayon::prelude::*;
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};
use crate::report::{Bundle, RunReport, Table, Timer};

/// Command-line overrides applied on top of an example's parameters.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub rank: Option<usize>,
    pub rank_hat: Option<usize>,
}

/// Amplitudes at which example 3 compares its test controls.
pub const EXAMPLE3_AMPLITUDES: [f64; 3] = [0.5, 1.0, 2.0];

fn load_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn state_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}x{i}")).collect()
}

fn trajectory(
    bundle: &mut Bundle,
    rel: &str,
    description: &str,
    traj: &BlochTrajectory,
) -> CliResult<()> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(state_columns("", traj.dim()));
    cols.extend((1..=traj.n_controls()).map(|i| format!("u{i}")));
    bundle.text(
        rel,
        description,
        &String::from_utf8(buf).expect("ascii csv"),
        cols,
    )
}

fn model(bundle: &mut Bundle, record: &ModelRecord) -> CliResult<()> {
    bundle.text(
        "model.json",
        "fitted model",
        &(record.to_json()? + "\n"),
        vec![],
    )
}

/// Predicted and reference states side by side with the per-step error.
fn comparison_table(times: &[f64], pred: &Mat, truth: &Mat) -> CliResult<Table> {
    let d = pred.nrows();
    let mut cols = vec!["t".to_string()];
    cols.extend(state_columns("pred_", d));
    cols.extend(state_columns("true_", d));
    cols.push("rel_err_pct".into());
    let errors = qdmd_core::dmd::percent_error_per_step(pred, truth)?;
    let mut table = Table::new(&cols);
    for (k, &t) in times.iter().enumerate() {
        let mut row = vec![t];
        row.extend(pred.column(k).iter());
        row.extend(truth.column(k).iter());
        row.push(errors[k]);
        table.row(&[], &row);
    }
    Ok(table)
}

fn eigenvalue_table(eigs: &[Complex64], dt: f64) -> Table {
    let mut table = Table::new(&["re", "im", "modulus", "frequency"]);
    for z in eigs {
        table.row(
            &[],
            &[
                z.re,
                z.im,
                z.norm(),
                z.arg().abs() / (2.0 * std::f64::consts::PI * dt),
            ],
        );
    }
    table
}

pub fn example1(out: &Path, ov: &Overrides, timings: bool) -> CliResult<RunReport> {
    let mut timer = Timer::new(timings);
    let mut p: Example1 = load_params(ov.config.as_deref())?;
    if let Some(s) = ov.seed {
        p.seed = s;
    }
    if let Some(n) = ov.noise {
        p.sigma = n;
    }
    if ov.rank.is_some() {
        p.r_tilde = ov.rank;
    }
    if ov.rank_hat.is_some() {
        p.r_hat = ov.rank_hat;
    }
    let run = p.run()?;
    timer.lap("run");

    let mut bundle = Bundle::new(out)?;
    bundle.json("config.json", "example 1 parameters", &p)?;
    trajectory(
        &mut bundle,
        "trajectory.csv",
        "noisy training trajectory",
        &run.noisy,
    )?;
    trajectory(
        &mut bundle,
        "clean_trajectory.csv",
        "noise-free training trajectory",
        &run.clean,
    )?;
    let mut record = ModelRecord::from(&run.model);
    record.control_pairing = Some(p.pairing);
    model(&mut bundle, &record)?;
    bundle.table(
        "eigenvalues.csv",
        "discrete-time drift eigenvalues; frequency = |arg| / (2π dt) in cycles per unit time",
        &eigenvalue_table(&run.model.eigenvalues, p.dt()),
    )?;
    let times: Vec<f64> = (0..run.prediction.ncols())
        .map(|k| k as f64 * p.dt())
        .collect();
    bundle.table(
        "extrapolation.csv",
        "bilinear model driven at the estimated resonance from the ground state, against simulation",
        &comparison_table(&times, &run.prediction, &run.truth)?,
    )?;

    let mut report = RunReport::new("example 1", serde_json::to_value(&p)?);
    report.model_path = Some("model.json".into());
    report.set_eigenvalues(&run.model.eigenvalues);
    report.resonance_estimates = qdmd_core::dmd::resonance_estimate(&run.model);
    report.prediction_errors = qdmd_core::dmd::percent_error_per_step(&run.prediction, &run.truth)?;
    report.metric("resonance", run.resonance);
    report.metric("resonance_error", (run.resonance - 1.0).abs());
    report.metric("extrapolation_error", run.extrapolation_error);
    report.metric("extrapolation_periods", p.extrapolation_periods as f64);
    report.notes.push(format!(
        "extrapolation horizon: {} periods of {} samples from the ground state",
        p.extrapolation_periods, p.samples_per_period
    ));
    timer.lap("write");
    timer.finish(&mut report);
    bundle.json("report.json", "run report", &report)?;
    bundle.finish()?;
    Ok(report)
}

/// Exact stacked Floquet mode for monodromy eigenvector `v`: `Φ(τ_r, 0) v`
/// at every offset.
fn exact_stacked_modes(p: &Example2, offsets: &[f64], vectors: &CMat) -> CliResult<CMat> {
    let sys = driven_qubit();
    let drive = [ControlSignal::pure_tone(p.drive_frequency, p.amplitude)];
    let d = vectors.nrows();
    let mut out = CMat::zeros(d * offsets.len(), vectors.ncols());
    for (r, &tau) in offsets.iter().enumerate() {
        let phi = if tau == 0.0 {
            Mat::identity(d, d)
        } else {
            propagator(&sys, &drive, 0.0, tau, p.monodromy_steps)?
        };
        let block = qdmd_core::linalg::to_complex(&phi) * vectors;
        out.view_mut((r * d, 0), (d, vectors.ncols()))
            .copy_from(&block);
    }
    Ok(out)
}

pub fn example2(out: &Path, ov: &Overrides, timings: bool) -> CliResult<RunReport> {
    let mut timer = Timer::new(timings);
    let mut p: Example2 = load_params(ov.config.as_deref())?;
    if let Some(s) = ov.seed {
        p.seed = s;
    }
    if let Some(n) = ov.noise {
        p.sigma = n;
    }
    if ov.rank_hat.is_some() {
        return Err(CliError::config("--rank-hat does not apply to example 2"));
    }
    if ov.rank.is_some() {
        p.rank = ov.rank;
    }
    let run = p.run()?;
    timer.lap("run");
    let period = p.period();
    let m = &run.model;

    let mut bundle = Bundle::new(out)?;
    bundle.json("config.json", "example 2 parameters", &p)?;
    trajectory(
        &mut bundle,
        "stroboscopic.csv",
        "stroboscopic samples; the last period is held out of training",
        &run.strobe,
    )?;
    model(&mut bundle, &ModelRecord::from(m))?;

    let rwa = rwa_reference(p.drive_frequency, p.amplitude)?;
    let mut qe = Table::new(&["source", "index", "re", "im"]);
    for (source, list) in [
        ("floquet_dmd", m.quasi_energies.clone()),
        ("monodromy", run.monodromy_quasi_energies.clone()),
        ("rwa", rwa.quasi_energies(period)),
    ] {
        for (j, e) in list.iter().enumerate() {
            qe.row(&[source], &[j as f64, e.re, e.im]);
        }
    }
    bundle.table(
        "quasi_energies.csv",
        "quasi-energies ε = log(λ)/T from the fitted model, the integrated monodromy matrix and the rotating-wave approximation",
        &qe,
    )?;

    // Fitted stacked modes against the exact ones, each aligned by a complex scale.
    let exact_eig = eig(&run.monodromy)?;
    let exact = exact_stacked_modes(&p, &m.offsets, &exact_eig.vectors)?;
    let mut modes = Table::new(&[
        "mode",
        "offset",
        "component",
        "fitted_re",
        "fitted_im",
        "exact_re",
        "exact_im",
    ]);
    let mut worst: f64 = 0.0;
    for j in 0..m.stacked_modes.ncols() {
        let lam = m.eigenvalues[j];
        let k = (0..exact_eig.values.len())
            .min_by(|&a, &b| {
                (exact_eig.values[a] - lam)
                    .norm()
                    .total_cmp(&(exact_eig.values[b] - lam).norm())
            })
            .expect("nonempty spectrum");
        let f = m.stacked_modes.column(j);
        let w = exact.column(k);
        let scale = w.dotc(&f) / w.dotc(&w);
        let aligned = w * scale;
        worst = worst.max((f - &aligned).norm() / f.norm());
        for r in 0..m.s {
            for c in 0..m.d {
                let i = r * m.d + c;
                modes.row(
                    &[],
                    &[
                        j as f64,
                        m.offsets[r],
                        (c + 1) as f64,
                        f[i].re,
                        f[i].im,
                        aligned[i].re,
                        aligned[i].im,
                    ],
                );
            }
        }
    }
    bundle.table(
        "floquet_modes.csv",
        "fitted Floquet modes at each intra-period offset against monodromy eigenvectors propagated to that offset",
        &modes,
    )?;

    let mut ext = Table::new(&["offset", "component", "held_out", "predicted"]);
    for r in 0..m.s {
        for c in 0..m.d {
            let i = r * m.d + c;
            ext.row(
                &[],
                &[
                    m.offsets[r],
                    (c + 1) as f64,
                    run.held_out[i],
                    run.predicted[i],
                ],
            );
        }
    }
    bundle.table(
        "extrapolation.csv",
        "one-period prediction of the held-out final period",
        &ext,
    )?;

    let mut report = RunReport::new("example 2", serde_json::to_value(&p)?);
    report.model_path = Some("model.json".into());
    report.set_eigenvalues(&m.eigenvalues);
    report.resonance_estimates = qdmd_core::dmd::resonance_estimate(m);
    report.metric("period", period);
    report.metric("quasi_energy_error", run.quasi_energy_error);
    report.metric("extrapolation_error", run.extrapolation_error);
    report.metric("mode_error", worst);
    timer.lap("write");
    timer.finish(&mut report);
    bundle.json("report.json", "run report", &report)?;
    bundle.finish()?;
    Ok(report)
}

fn control_table(p: &Example3, control: &TestControl) -> CliResult<Table> {
    let fourier = p.signal(&control.coefficients)?;
    let mut table = Table::new(&["t", "u", "u_fourier"]);
    let period = 2.0 * std::f64::consts::PI / p.omega;
    let n = 256;
    for i in 0..=2 * n {
        let t = i as f64 * period / n as f64;
        table.row(&[], &[t, control.signal.eval(t), fourier.eval(t)]);
    }
    Ok(table)
}

pub fn example3(out: &Path, ov: &Overrides, timings: bool) -> CliResult<RunReport> {
    let mut timer = Timer::new(timings);
    let mut p: Example3 = load_params(ov.config.as_deref())?;
    if let Some(s) = ov.seed {
        p.seed = s;
    }
    if let Some(n) = ov.noise {
        p.sigma = n;
    }
    if ov.rank.is_some() {
        p.r_tilde = ov.rank;
    }
    if ov.rank_hat.is_some() {
        p.r_hat = ov.rank_hat;
    }
    let experiments = p.experiments();
    let data: Vec<(BlochTrajectory, SnapshotSet)> = experiments
        .par_iter()
        .map(|e| p.experiment_snapshots(e))
        .collect::<qdmd_core::Result<_>>()?;
    let sets: Vec<SnapshotSet> = data.iter().map(|(_, s)| s.clone()).collect();
    let snap = SnapshotSet::concat(&sets)?;
    let bi = bidmd_fit(&snap, p.r_tilde, p.r_hat)?;
    let aht = AhtModel::new(bi, p.harmonics, p.omega, p.degree)?;
    timer.lap("train");

    let mut bundle = Bundle::new(out)?;
    bundle.json("config.json", "example 3 parameters", &p)?;
    let mut index = Table::new(
        &[
            vec!["file".to_string()],
            coefficient_names(p.harmonics),
            state_columns("x0_", 3),
        ]
        .concat(),
    );
    for (i, ((traj, _), e)) in data.iter().zip(&experiments).enumerate() {
        let rel = format!("training/experiment_{i:03}.csv");
        trajectory(&mut bundle, &rel, "noisy training trajectory", traj)?;
        index.row(
            &[&rel],
            &[e.coefficients.clone(), e.x0.iter().copied().collect()].concat(),
        );
    }
    bundle.table(
        "training/index.csv",
        "Fourier coefficients and initial state of each training experiment",
        &index,
    )?;
    let record = ModelRecord::from(&aht);
    model(&mut bundle, &record)?;
    bundle.json(
        "features.json",
        "names of the polynomial control features, in model order",
        &aht.names,
    )?;

    let mut sweep = Table::new(&["amplitude", "resonance", "in_span", "sawtooth"]);
    let mut report = RunReport::new("example 3", serde_json::to_value(&p)?);
    let times: Vec<f64> = (0..=(p.predict_time / p.dt).round() as usize)
        .map(|k| k as f64 * p.dt)
        .collect();
    for &amp in &EXAMPLE3_AMPLITUDES {
        let controls = [
            p.resonance_control(amp)?,
            p.in_span_control(amp)?,
            p.sawtooth_control(amp)?,
        ];
        let preds: Vec<Example3Prediction> = controls
            .par_iter()
            .map(|c| p.predict(&aht, c))
            .collect::<qdmd_core::Result<_>>()?;
        let mut row = vec![amp];
        for pr in &preds {
            let tag = format!("{}_amp{}", pr.control.name, amp);
            bundle.table(
                &format!("predictions/{tag}.csv"),
                "model prediction from the ground state against simulation",
                &comparison_table(&times, &pr.prediction, &pr.truth)?,
            )?;
            bundle.table(
                &format!("controls/{tag}.csv"),
                "test control over two periods and its truncated Fourier series as seen by the model",
                &control_table(&p, &pr.control)?,
            )?;
            report.metric(&format!("error_{tag}"), pr.error);
            row.push(pr.error);
        }
        sweep.row(&[], &row);
    }
    bundle.table(
        "amplitude_sweep.csv",
        "relative prediction error of each test control by peak amplitude",
        &sweep,
    )?;

    report.model_path = Some("model.json".into());
    report.set_eigenvalues(&aht.bidmd.eigenvalues);
    report.resonance_estimates = qdmd_core::dmd::resonance_estimate(&aht.bidmd);
    report.metric("experiments", experiments.len() as f64);
    report.metric("snapshot_pairs", snap.len() as f64);
    report.metric("r_tilde", aht.bidmd.r_tilde as f64);
    report.metric("r_hat", aht.bidmd.r_hat as f64);
    timer.lap("write");
    timer.finish(&mut report);
    bundle.json("report.json", "run report", &report)?;
    bundle.finish()?;
    Ok(report)
}

pub fn run_example(n: u32, out: &Path, ov: &Overrides, timings: bool) -> CliResult<RunReport> {
    match n {
        1 => example1(out, ov, timings),
        2 => example2(out, ov, timings),
        3 => example3(out, ov, timings),
        _ => Err(CliError::config(format!(
            "unknown example {n}; expected 1, 2 or 3"
        ))),
    }
}
