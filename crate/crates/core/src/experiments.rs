//! Reference experiments on the driven qubit `H(t) = πσ3 + u(t)σ1`:
//! resonance identification with biDMD, Floquet DMD on stroboscopic data,
//! and AHT-biDMD trained on a Fourier-coefficient sweep.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aht::{
    fit_fourier_coefficients, library_features, local_coefficients, monomials, AhtModel,
};
use crate::bloch::{pauli, vectorize_hamiltonian, HermitianBasis};
use crate::dmd::{
    assemble_snapshots_with, bidmd_fit, bidmd_predict, control_sequence, relative_error,
    resonance_estimate, BiDmdModel, ControlPairing, SnapshotSet,
};
use crate::error::{Error, Result};
use crate::floquet::{
    floquet_dmd_fit, floquet_predict, quasi_energies, reshape_stroboscopic, FloquetModel,
};
use crate::linalg::{eig, Mat, Vector};
use crate::simulator::{
    add_noise, integrate_bilinear, propagator, BilinearSystem, BlochTrajectory, ControlSignal,
    NoiseModel, DEFAULT_SUBSTEPS,
};

/// `H(t) = πσ3 + u(t)σ1` in the standard Pauli basis.
pub fn driven_qubit() -> BilinearSystem {
    let basis = HermitianBasis::qubit();
    let p = pauli();
    let drift = vectorize_hamiltonian(&(&p[2] * Complex64::new(PI, 0.0)), &basis)
        .expect("πσ3 is a valid Hamiltonian");
    let ctrl = vectorize_hamiltonian(&p[0], &basis).expect("σ1 is a valid Hamiltonian");
    BilinearSystem::new(drift, vec![ctrl]).expect("generators share a dimension")
}

/// Independent stream seed for item `i` of a run seeded with `master`.
pub fn derive_seed(master: u64, i: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(i.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniformly random point on the unit sphere in `R^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn ground_state() -> Vector {
    Vector::from_vec(vec![0.0, 0.0, 1.0])
}

/// Resonance identification from a slightly detuned pure-tone drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1 {
    /// Drive frequency in cycles per unit time.
    pub drive_frequency: f64,
    pub amplitude: f64,
    /// Drift period.
    pub period: f64,
    pub samples_per_period: usize,
    pub periods: usize,
    pub sigma: f64,
    pub seed: u64,
    pub pairing: ControlPairing,
    pub r_tilde: Option<usize>,
    pub r_hat: Option<usize>,
    /// Periods predicted with the estimated resonance drive.
    pub extrapolation_periods: usize,
    pub substeps: usize,
}

impl Default for Example1 {
    fn default() -> Self {
        Example1 {
            drive_frequency: 1.1,
            amplitude: 1.0,
            period: 1.0,
            samples_per_period: 16,
            periods: 5,
            sigma: 0.01,
            seed: 1,
            pairing: ControlPairing::Trapezoid,
            r_tilde: None,
            r_hat: Some(3),
            extrapolation_periods: 5,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

/// Outputs of an Example-1 run.
#[derive(Debug, Clone)]
pub struct Example1Run {
    pub clean: BlochTrajectory,
    pub noisy: BlochTrajectory,
    pub model: BiDmdModel,
    pub resonance: f64,
    pub prediction: Mat,
    pub truth: Mat,
    pub extrapolation_error: f64,
}

impl Example1 {
    pub fn dt(&self) -> f64 {
        self.period / self.samples_per_period as f64
    }

    pub fn simulate(&self) -> Result<(BlochTrajectory, BlochTrajectory)> {
        let sys = driven_qubit();
        let clean = integrate_bilinear(
            &sys,
            &[ControlSignal::pure_tone(
                self.drive_frequency,
                self.amplitude,
            )],
            &ground_state(),
            0.0,
            self.periods as f64 * self.period,
            self.dt(),
            self.substeps,
        )?;
        let noisy = add_noise(
            &clean,
            &NoiseModel {
                sigma: self.sigma,
                seed: self.seed,
            },
        )?;
        Ok((clean, noisy))
    }

    pub fn fit(&self, traj: &BlochTrajectory) -> Result<BiDmdModel> {
        let snap = assemble_snapshots_with(traj, self.pairing)?;
        bidmd_fit(&snap, self.r_tilde, self.r_hat)
    }

    /// Leading resonance estimate of a fitted model.
    pub fn leading_resonance(model: &BiDmdModel) -> Result<f64> {
        resonance_estimate(model)
            .first()
            .copied()
            .ok_or_else(|| Error::DegenerateData("fitted drift has a real spectrum".into()))
    }

    /// Drive the model with `cos(2π f t)` from the ground state and compare
    /// with a fresh simulation.
    pub fn extrapolate(&self, model: &BiDmdModel, frequency: f64) -> Result<(Mat, Mat)> {
        let n = self.extrapolation_periods * self.samples_per_period;
        let drive = ControlSignal::pure_tone(frequency, self.amplitude);
        let u = control_sequence(
            std::slice::from_ref(&drive),
            0.0,
            self.dt(),
            n,
            self.pairing,
        );
        let pred = bidmd_predict(model, &ground_state(), &u)?;
        let truth = integrate_bilinear(
            &driven_qubit(),
            &[drive],
            &ground_state(),
            0.0,
            n as f64 * self.dt(),
            self.dt(),
            self.substeps,
        )?;
        Ok((pred, truth.states))
    }

    pub fn run(&self) -> Result<Example1Run> {
        let (clean, noisy) = self.simulate()?;
        let model = self.fit(&noisy)?;
        let resonance = Self::leading_resonance(&model)?;
        let (prediction, truth) = self.extrapolate(&model, resonance)?;
        let extrapolation_error = relative_error(&prediction, &truth)?;
        Ok(Example1Run {
            clean,
            noisy,
            model,
            resonance,
            prediction,
            truth,
            extrapolation_error,
        })
    }
}

/// Floquet DMD of the stroboscopically sampled driven qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2 {
    pub drive_frequency: f64,
    pub amplitude: f64,
    pub samples_per_period: usize,
    /// Periods used for training (`M = s · periods`).
    pub periods: usize,
    pub sigma: f64,
    pub seed: u64,
    pub rank: Option<usize>,
    pub substeps: usize,
    pub monodromy_steps: usize,
}

impl Default for Example2 {
    fn default() -> Self {
        Example2 {
            drive_frequency: 1.1,
            amplitude: 1.0,
            samples_per_period: 4,
            periods: 4,
            sigma: 0.0,
            seed: 1,
            rank: None,
            substeps: 256,
            monodromy_steps: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example2Run {
    /// Stroboscopic samples of the training periods plus one held-out period.
    pub strobe: BlochTrajectory,
    pub training: BlochTrajectory,
    pub model: FloquetModel,
    pub monodromy: Mat,
    pub monodromy_quasi_energies: Vec<Complex64>,
    /// Largest distance from a fitted quasi-energy to its nearest exact one.
    pub quasi_energy_error: f64,
    /// Held-out final period (stacked) and its one-period prediction.
    pub held_out: Vector,
    pub predicted: Vector,
    pub extrapolation_error: f64,
}

impl Example2 {
    pub fn period(&self) -> f64 {
        1.0 / self.drive_frequency
    }

    pub fn run(&self) -> Result<Example2Run> {
        let sys = driven_qubit();
        let period = self.period();
        let s = self.samples_per_period;
        let drive = [ControlSignal::pure_tone(
            self.drive_frequency,
            self.amplitude,
        )];
        let dt = period / s as f64;
        let total = s * (self.periods + 1);
        let clean = integrate_bilinear(
            &sys,
            &drive,
            &ground_state(),
            0.0,
            (total - 1) as f64 * dt,
            dt,
            self.substeps,
        )?;
        let mut strobe = add_noise(
            &clean,
            &NoiseModel {
                sigma: self.sigma,
                seed: self.seed,
            },
        )?;
        strobe.meta.period = Some(period);
        let m = s * self.periods;
        let training = BlochTrajectory::new(
            strobe.times[..m].to_vec(),
            strobe.states.columns(0, m).into_owned(),
            strobe.controls.columns(0, m).into_owned(),
            strobe.meta.clone(),
        )?;
        let snap = reshape_stroboscopic(&training, period, s)?;
        let model = floquet_dmd_fit(&snap, period, s, self.rank)?;

        let monodromy = propagator(&sys, &drive, 0.0, period, self.monodromy_steps)?;
        let exact = quasi_energies(&eig(&monodromy)?.values, period);
        let quasi_energy_error = model
            .quasi_energies
            .iter()
            .map(|e| {
                exact
                    .iter()
                    .map(|x| (x - e).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);

        let full = reshape_stroboscopic(&strobe, period, s)?;
        let last = full.len() - 1;
        let start = full.x.column(last).into_owned();
        let held_out = full.xp.column(last).into_owned();
        let pred = floquet_predict(&model, &start, 1)?;
        let predicted = pred.column(1).into_owned();
        let extrapolation_error = (&predicted - &held_out).norm() / held_out.norm();
        Ok(Example2Run {
            strobe,
            training,
            model,
            monodromy,
            monodromy_quasi_energies: exact,
            quasi_energy_error,
            held_out,
            predicted,
            extrapolation_error,
        })
    }
}

/// One test control for an AHT-biDMD model: global Fourier coefficients
/// that drive the model, and the signal that drives the simulator.
#[derive(Debug, Clone)]
pub struct TestControl {
    pub name: String,
    pub amplitude: f64,
    pub coefficients: Vec<f64>,
    pub signal: ControlSignal,
}

/// AHT-biDMD trained on a one-coefficient-at-a-time amplitude sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example3 {
    pub harmonics: usize,
    /// Base control frequency Ω.
    pub omega: f64,
    pub degree: usize,
    /// Measurement cadence and regression step.
    pub dt: f64,
    /// Length of each training experiment.
    pub train_time: f64,
    /// Length of each prediction.
    pub predict_time: f64,
    /// Amplitudes `0, step, …, max` swept for every coefficient.
    pub amplitude_step: f64,
    pub amplitude_max: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Seed of the random in-span control.
    pub in_span_seed: u64,
    pub r_tilde: Option<usize>,
    pub r_hat: Option<usize>,
    pub substeps: usize,
}

impl Default for Example3 {
    fn default() -> Self {
        Example3 {
            harmonics: 5,
            omega: PI,
            degree: 2,
            dt: 1.0 / 16.0,
            train_time: 5.0,
            predict_time: 10.0,
            amplitude_step: 0.1,
            amplitude_max: 1.0,
            sigma: 0.01,
            seed: 1,
            in_span_seed: 0,
            r_tilde: None,
            r_hat: None,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

/// A training experiment: its coefficient vector and initial state.
#[derive(Debug, Clone)]
pub struct TrainingExperiment {
    pub coefficients: Vec<f64>,
    pub x0: Vector,
    /// Measurement-noise seed, independent of the stream that drew `x0`.
    pub noise_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Example3Run {
    pub experiments: Vec<TrainingExperiment>,
    pub model: AhtModel,
    pub snapshots: usize,
}

/// Prediction of one test control.
#[derive(Debug, Clone)]
pub struct Example3Prediction {
    pub control: TestControl,
    pub prediction: Mat,
    pub truth: Mat,
    pub error: f64,
}

impl Example3 {
    fn steps(&self, time: f64) -> usize {
        (time / self.dt).round() as usize
    }

    /// The sweep: zero control once, then every coefficient at every
    /// nonzero amplitude.
    pub fn sweep(&self) -> Vec<Vec<f64>> {
        let n = 2 * self.harmonics;
        let levels = (self.amplitude_max / self.amplitude_step).round() as usize;
        let mut out = vec![vec![0.0; n]];
        for c in 0..n {
            for l in 1..=levels {
                let mut v = vec![0.0; n];
                v[c] = l as f64 * self.amplitude_step;
                out.push(v);
            }
        }
        out
    }

    pub fn signal(&self, coefficients: &[f64]) -> Result<ControlSignal> {
        let k = self.harmonics;
        ControlSignal::fourier(
            coefficients[..k].to_vec(),
            coefficients[k..].to_vec(),
            self.omega,
        )
    }

    pub fn experiments(&self) -> Vec<TrainingExperiment> {
        self.sweep()
            .into_iter()
            .enumerate()
            .map(|(i, coefficients)| {
                let base = derive_seed(self.seed, i as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, 0));
                TrainingExperiment {
                    coefficients,
                    x0: random_unit_vector(3, &mut rng),
                    noise_seed: derive_seed(base, 1),
                }
            })
            .collect()
    }

    /// Noisy trajectory and snapshot pairs of one experiment, with the
    /// library of local coefficients at each pair's start as controls.
    pub fn experiment_snapshots(
        &self,
        exp: &TrainingExperiment,
    ) -> Result<(BlochTrajectory, SnapshotSet)> {
        let sys = driven_qubit();
        let clean = integrate_bilinear(
            &sys,
            &[self.signal(&exp.coefficients)?],
            &exp.x0,
            0.0,
            self.steps(self.train_time) as f64 * self.dt,
            self.dt,
            self.substeps,
        )?;
        let noisy = add_noise(
            &clean,
            &NoiseModel {
                sigma: self.sigma,
                seed: exp.noise_seed,
            },
        )?;
        let m = noisy.len();
        let monos = monomials(2 * self.harmonics, self.degree);
        let mut theta = Mat::zeros(monos.len(), m - 1);
        for j in 0..m - 1 {
            let loc = local_coefficients(&exp.coefficients, self.omega, noisy.times[j]);
            theta.set_column(j, &Vector::from_vec(library_features(&loc, &monos)));
        }
        let snap = SnapshotSet::new(
            noisy.states.columns(0, m - 1).into_owned(),
            noisy.states.columns(1, m - 1).into_owned(),
            Some(theta),
            self.dt,
        )?;
        Ok((noisy, snap))
    }

    pub fn train(&self) -> Result<Example3Run> {
        let experiments = self.experiments();
        let sets: Vec<SnapshotSet> = experiments
            .par_iter()
            .map(|e| self.experiment_snapshots(e).map(|(_, s)| s))
            .collect::<Result<_>>()?;
        let snap = SnapshotSet::concat(&sets)?;
        let bidmd = bidmd_fit(&snap, self.r_tilde, self.r_hat)?;
        let model = AhtModel::new(bidmd, self.harmonics, self.omega, self.degree)?;
        Ok(Example3Run {
            experiments,
            snapshots: snap.len(),
            model,
        })
    }

    /// `A cos(2π t)`: the second harmonic of Ω = π.
    pub fn resonance_control(&self, amplitude: f64) -> Result<TestControl> {
        let mut c = vec![0.0; 2 * self.harmonics];
        let h = (2.0 * PI / self.omega).round() as usize;
        if h == 0 || h > self.harmonics {
            return Err(Error::InvalidHarmonic(h as i64));
        }
        c[h - 1] = amplitude;
        Ok(TestControl {
            name: "resonance".into(),
            amplitude,
            signal: self.signal(&c)?,
            coefficients: c,
        })
    }

    /// Seeded uniform draw of all coefficients, scaled to peak `amplitude`.
    pub fn in_span_control(&self, amplitude: f64) -> Result<TestControl> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.in_span_seed);
        let raw: Vec<f64> = (0..2 * self.harmonics)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let sig = self.signal(&raw)?;
        let period = 2.0 * PI / self.omega;
        let peak = (0..4096)
            .map(|i| sig.eval(i as f64 * period / 4096.0).abs())
            .fold(0.0, f64::max);
        let c: Vec<f64> = raw.iter().map(|v| v * amplitude / peak).collect();
        Ok(TestControl {
            name: "in_span".into(),
            amplitude,
            signal: self.signal(&c)?,
            coefficients: c,
        })
    }

    /// Sawtooth of period `2π/Ω` and peak `amplitude`; the model sees its
    /// truncated Fourier coefficients.
    pub fn sawtooth_control(&self, amplitude: f64) -> Result<TestControl> {
        let signal = ControlSignal::sawtooth(amplitude, 2.0 * PI / self.omega);
        let coefficients =
            fit_fourier_coefficients(|t| signal.eval(t), self.omega, self.harmonics, 0.0)?;
        Ok(TestControl {
            name: "sawtooth".into(),
            amplitude,
            coefficients,
            signal,
        })
    }

    /// Predict from the ground state and compare with simulation.
    pub fn predict(&self, model: &AhtModel, control: &TestControl) -> Result<Example3Prediction> {
        let n = self.steps(self.predict_time);
        let prediction = model.predict(&ground_state(), &control.coefficients, 0.0, n)?;
        let truth = integrate_bilinear(
            &driven_qubit(),
            std::slice::from_ref(&control.signal),
            &ground_state(),
            0.0,
            n as f64 * self.dt,
            self.dt,
            self.substeps,
        )?
        .states;
        let error = relative_error(&prediction, &truth)?;
        Ok(Example3Prediction {
            control: control.clone(),
            prediction,
            truth,
            error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_size() {
        let e = Example3::default();
        let s = e.sweep();
        assert_eq!(s.len(), 101);
        assert!(s[0].iter().all(|v| *v == 0.0));
        assert_eq!(s[10][0], 1.0);
        assert!((s[11][1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(1, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn resonance_control_is_second_harmonic() {
        let e = Example3::default();
        let c = e.resonance_control(1.0).unwrap();
        assert!((c.signal.eval(0.25) - (2.0 * PI * 0.25).cos()).abs() < 1e-14);
    }

    #[test]
    fn in_span_peak_is_normalized() {
        let e = Example3::default();
        let c = e.in_span_control(1.0).unwrap();
        let peak = (0..4096)
            .map(|i| c.signal.eval(i as f64 * 2.0 / 4096.0).abs())
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
    }
}
