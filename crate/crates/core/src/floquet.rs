//! Floquet DMD on period-stacked stroboscopic snapshots, quasi-energies and
//! the rotating-wave reference model for the driven qubit.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use num_complex::Complex64;

use crate::bloch::{pauli, vectorize_hamiltonian, HermitianBasis};
use crate::dmd::{
    dmd_fit, dmd_predict, normalize_modes, DmdModel, ModelKind, ModelRecord, SnapshotSet, Spectrum,
};
use crate::error::{Error, Result};
use crate::linalg::{eig, to_row_major, CMat, Mat, Vector};
use crate::simulator::{fmt_f64, sample_stroboscopic, BlochTrajectory};

/// Stack stroboscopic samples period by period. Column `n` of `X` holds the
/// `s` samples of period `n`; the same column of `X'` is one period later.
/// Trailing partial periods are dropped.
pub fn reshape_stroboscopic(traj: &BlochTrajectory, period: f64, s: usize) -> Result<SnapshotSet> {
    let strobe = if (traj.dt * s as f64 - period).abs() <= 1e-9 * period {
        traj.clone()
    } else {
        sample_stroboscopic(traj, period, s)?
    };
    let m = strobe.len();
    if m < 2 * s {
        return Err(Error::InsufficientData(format!(
            "need at least {} stroboscopic samples (two periods), got {m}",
            2 * s
        )));
    }
    let d = strobe.dim();
    let cols = m / s - 1;
    let mut x = Mat::zeros(s * d, cols);
    let mut xp = Mat::zeros(s * d, cols);
    for n in 0..cols {
        for r in 0..s {
            x.view_mut((r * d, n), (d, 1))
                .copy_from(&strobe.states.column(n * s + r));
            xp.view_mut((r * d, n), (d, 1))
                .copy_from(&strobe.states.column((n + 1) * s + r));
        }
    }
    SnapshotSet::new(x, xp, None, period)
}

/// Undo the period stacking: a `(s d) × n` matrix becomes `d × (n s)` in
/// time order.
pub fn unstack(stacked: &Mat, d: usize, s: usize) -> Result<Mat> {
    if stacked.nrows() != s * d {
        return Err(Error::Shape(format!(
            "stacked matrix has {} rows, expected {}",
            stacked.nrows(),
            s * d
        )));
    }
    let n = stacked.ncols();
    let mut out = Mat::zeros(d, n * s);
    for c in 0..n {
        for r in 0..s {
            out.set_column(c * s + r, &stacked.view((r * d, c), (d, 1)).column(0));
        }
    }
    Ok(out)
}

/// Floquet modes sampled at the intra-period offsets, with quasi-energies.
#[derive(Debug, Clone)]
pub struct FloquetModel {
    /// `(s d) × r`; block `r` of column `j` is mode `j` at offset `τ_r`.
    pub stacked_modes: CMat,
    /// `ε_j = log(λ_j) / T`, principal branch.
    pub quasi_energies: Vec<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    pub period: f64,
    pub offsets: Vec<f64>,
    pub d: usize,
    pub s: usize,
    /// Stacked one-period DMD fit the modes come from.
    pub dmd: DmdModel,
}

impl Spectrum for FloquetModel {
    fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
    fn dt(&self) -> f64 {
        self.period
    }
}

/// Principal-branch quasi-energies `log(λ) / T`, imaginary parts in
/// `(−π/T, π/T]`.
pub fn quasi_energies(eigs: &[Complex64], period: f64) -> Vec<Complex64> {
    eigs.iter().map(|l| l.ln() / period).collect()
}

/// DMD on stacked snapshots. Zero eigenvalues are dropped together with
/// their modes since their logarithm is undefined.
pub fn floquet_dmd_fit(
    snap: &SnapshotSet,
    period: f64,
    s: usize,
    rank: Option<usize>,
) -> Result<FloquetModel> {
    if s == 0 || !snap.dim().is_multiple_of(s) {
        return Err(Error::Shape(format!(
            "stacked dimension {} is not a multiple of s = {s}",
            snap.dim()
        )));
    }
    if !(period > 0.0) {
        return Err(Error::InvalidStep("period must be positive".into()));
    }
    let dmd = dmd_fit(snap, rank)?;
    let keep: Vec<usize> = (0..dmd.eigenvalues.len())
        .filter(|&j| dmd.eigenvalues[j].norm() > 0.0)
        .collect();
    if keep.len() < dmd.eigenvalues.len() {
        warn!(
            "{} zero eigenvalue(s) excluded from the quasi-energy spectrum",
            dmd.eigenvalues.len() - keep.len()
        );
    }
    let eigenvalues: Vec<Complex64> = keep.iter().map(|&j| dmd.eigenvalues[j]).collect();
    let mut stacked_modes = dmd.modes.select_columns(&keep);
    normalize_modes(&mut stacked_modes);
    let d = snap.dim() / s;
    Ok(FloquetModel {
        stacked_modes,
        quasi_energies: quasi_energies(&eigenvalues, period),
        eigenvalues,
        period,
        offsets: (0..s).map(|r| r as f64 * period / s as f64).collect(),
        d,
        s,
        dmd,
    })
}

/// Propagate a stacked state `n_periods` periods; columns `0..=n_periods`.
pub fn floquet_predict(model: &FloquetModel, stacked_x0: &Vector, n_periods: usize) -> Result<Mat> {
    if stacked_x0.len() != model.s * model.d {
        return Err(Error::Shape(format!(
            "stacked state has length {}, expected {}",
            stacked_x0.len(),
            model.s * model.d
        )));
    }
    if model.dmd.defective {
        return dmd_predict(&model.dmd, stacked_x0, n_periods);
    }
    crate::dmd::modal_propagate(
        &model.stacked_modes,
        &model.eigenvalues,
        stacked_x0,
        n_periods,
    )
}

/// Quasi-energy table: `mode_index, re_eps, im_eps, |lambda|, arg_lambda`.
pub fn write_quasi_energy_csv<W: Write>(model: &FloquetModel, mut w: W) -> Result<()> {
    writeln!(w, "mode_index,re_eps,im_eps,|lambda|,arg_lambda")?;
    for (j, (e, l)) in model
        .quasi_energies
        .iter()
        .zip(&model.eigenvalues)
        .enumerate()
    {
        writeln!(
            w,
            "{j},{},{},{},{}",
            fmt_f64(e.re),
            fmt_f64(e.im),
            fmt_f64(l.norm()),
            fmt_f64(l.arg())
        )?;
    }
    Ok(())
}

impl From<&FloquetModel> for ModelRecord {
    fn from(m: &FloquetModel) -> Self {
        let mut r = ModelRecord::from(&m.dmd);
        r.kind = ModelKind::Floquet;
        r.ranks = vec![m.stacked_modes.ncols()];
        r.a = to_row_major(&m.dmd.a);
        r.eigenvalues = m.eigenvalues.iter().map(|&z| z.into()).collect();
        r.modes = crate::dmd::complex_to_row_major(&m.stacked_modes);
        r.period = Some(m.period);
        r.samples_per_period = Some(m.s);
        r
    }
}

impl TryFrom<&ModelRecord> for FloquetModel {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        let period = r
            .period
            .ok_or_else(|| Error::Parse("Floquet model without period".into()))?;
        let s = r
            .samples_per_period
            .ok_or_else(|| Error::Parse("Floquet model without samples_per_period".into()))?;
        if s == 0 || !r.d.is_multiple_of(s) {
            return Err(Error::Parse("inconsistent stacking".into()));
        }
        let dmd = DmdModel::try_from(r)?;
        let eigenvalues: Vec<Complex64> = r.eigenvalues.iter().map(|&z| z.into()).collect();
        Ok(FloquetModel {
            stacked_modes: dmd.modes.clone(),
            quasi_energies: quasi_energies(&eigenvalues, period),
            eigenvalues,
            period,
            offsets: (0..s).map(|k| k as f64 * period / s as f64).collect(),
            d: r.d / s,
            s,
            dmd,
        })
    }
}

/// Constant rotating-frame model of `H = πσ3 + u0 cos(2πνt) σ1`.
#[derive(Debug, Clone)]
pub struct RwaReference {
    pub nu: f64,
    pub u0: f64,
    /// Coefficient of σ3, `π(1 − ν)`.
    pub detuning: f64,
    /// Coefficient of σ1, `u0 / 2`.
    pub drive: f64,
    /// Bloch generator of the effective Hamiltonian.
    pub generator: Mat,
    pub eigenvalues: Vec<Complex64>,
    pub modes: CMat,
}

impl RwaReference {
    /// Eigenvalues of `exp(generator · T)` mapped to principal-branch
    /// quasi-energies. At `T = 1/ν` the frame rotation is the identity on
    /// Bloch vectors, so these compare directly with lab-frame Floquet
    /// quasi-energies.
    pub fn quasi_energies(&self, period: f64) -> Vec<Complex64> {
        let lambdas: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|l| (l * period).exp())
            .collect();
        quasi_energies(&lambdas, period)
    }
}

/// Rotating-wave approximation of the driven qubit in the frame
/// `U = exp(−iπνt σ3)`: `H̃ ≈ π(1−ν)σ3 + (u0/2)σ1`.
pub fn rwa_reference(nu: f64, u0: f64) -> Result<RwaReference> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "drive frequency must be positive, got {nu}"
        )));
    }
    let basis = HermitianBasis::qubit();
    let p = pauli();
    let detuning = PI * (1.0 - nu);
    let drive = 0.5 * u0;
    let h = &p[2] * Complex64::new(detuning, 0.0) + &p[0] * Complex64::new(drive, 0.0);
    let generator = vectorize_hamiltonian(&h, &basis)?.l;
    let e = eig(&generator)?;
    let mut modes = e.vectors;
    normalize_modes(&mut modes);
    Ok(RwaReference {
        nu,
        u0,
        detuning,
        drive,
        generator,
        eigenvalues: e.values,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::TrajectoryMeta;
    use approx::assert_abs_diff_eq;

    fn strobe(m: usize, d: usize, dt: f64) -> BlochTrajectory {
        BlochTrajectory::new(
            (0..m).map(|i| i as f64 * dt).collect(),
            Mat::from_fn(d, m, |i, j| (100 * j + i) as f64),
            Mat::zeros(0, m),
            TrajectoryMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn stacking_shapes_and_order() {
        let tr = strobe(16, 3, 0.25);
        let snap = reshape_stroboscopic(&tr, 1.0, 4).unwrap();
        assert_eq!(snap.x.shape(), (12, 3));
        assert_eq!(snap.xp.shape(), (12, 3));
        assert_eq!(snap.x[(3, 0)], 100.0);
        assert_eq!(snap.xp[(0, 0)], 400.0);
        let flat = unstack(&snap.x, 3, 4).unwrap();
        assert_eq!(flat, tr.states.columns(0, 12).into_owned());
    }

    #[test]
    fn partial_period_dropped() {
        let snap = reshape_stroboscopic(&strobe(18, 2, 0.25), 1.0, 4).unwrap();
        assert_eq!(snap.len(), 3);
        for n in 0..3 {
            for k in 0..8 {
                assert_eq!(snap.xp[(k, n)] - snap.x[(k, n)], 400.0);
            }
        }
    }

    #[test]
    fn s_one_is_plain_snapshots() {
        let snap = reshape_stroboscopic(&strobe(5, 2, 1.0), 1.0, 1).unwrap();
        assert_eq!(snap.len(), 4);
        assert_eq!(snap.xp.column(0), snap.x.column(1));
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            reshape_stroboscopic(&strobe(7, 2, 0.25), 1.0, 4),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rwa_limits() {
        let r = rwa_reference(1.3, 0.0).unwrap();
        assert_abs_diff_eq!(r.detuning, PI * (1.0 - 1.3), epsilon = 1e-15);
        assert_eq!(r.drive, 0.0);
        let r = rwa_reference(1.0, 1.0).unwrap();
        let mut ims: Vec<f64> = r.eigenvalues.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(ims[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ims[2], 1.0, epsilon = 1e-12);
        assert!(rwa_reference(0.0, 1.0).is_err());
    }

    #[test]
    fn principal_branch() {
        let l = Complex64::from_polar(0.9, 3.0);
        let e = quasi_energies(&[l], 0.5)[0];
        assert!(((e * 0.5).exp() - l).norm() < 1e-14);
        assert!(e.im * 0.5 <= PI && e.im * 0.5 > -PI);
    }
}
