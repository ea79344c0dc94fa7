//! Snapshot regression: exact DMD, DMD with direct actuation (DMDc) and
//! bilinear DMD, plus prediction and resonance estimates.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    complex_pinv, condition_number, eig, from_row_major, hstack, kron_vec, to_complex,
    to_row_major, vstack, CMat, Mat, Svd, Vector,
};
use crate::simulator::{BlochTrajectory, ControlSignal};

/// Default automatic rank cutoff relative to the largest singular value.
pub const AUTO_RANK_TOL: f64 = 1e-10;
/// Eigenvector condition number above which predictions use matrix powers.
pub const DEFECTIVE_COND: f64 = 1e12;

/// How control samples are paired with the snapshot step `x_n → x_{n+1}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlPairing {
    /// `u_n = u(t_n)`.
    #[default]
    Left,
    /// `u_n = (u(t_n) + u(t_{n+1})) / 2`.
    Trapezoid,
}

/// Paired snapshot matrices `X`, `X'` with optional control matrix `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub x: Mat,
    pub xp: Mat,
    pub u: Option<Mat>,
    pub dt: f64,
}

impl SnapshotSet {
    pub fn new(x: Mat, xp: Mat, u: Option<Mat>, dt: f64) -> Result<Self> {
        if x.shape() != xp.shape() {
            return Err(Error::Shape(format!(
                "X is {:?}, X' is {:?}",
                x.shape(),
                xp.shape()
            )));
        }
        if let Some(u) = &u {
            if u.ncols() != x.ncols() {
                return Err(Error::Shape(format!(
                    "U has {} columns, X has {}",
                    u.ncols(),
                    x.ncols()
                )));
            }
        }
        if x.ncols() == 0 {
            return Err(Error::InsufficientData("no snapshot pairs".into()));
        }
        Ok(SnapshotSet { x, xp, u, dt })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn n_controls(&self) -> usize {
        self.u.as_ref().map_or(0, |u| u.nrows())
    }

    /// Horizontal stack of independent experiments. Columns from different
    /// sets are never treated as adjacent in time.
    pub fn concat(sets: &[SnapshotSet]) -> Result<SnapshotSet> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InsufficientData("no snapshot sets to stack".into()))?;
        let has_u = first.u.is_some();
        if sets.iter().any(|s| s.u.is_some() != has_u) {
            return Err(Error::Shape(
                "cannot mix controlled and uncontrolled snapshots".into(),
            ));
        }
        if sets
            .iter()
            .any(|s| (s.dt - first.dt).abs() > 1e-12 * first.dt.abs())
        {
            return Err(Error::SamplingGrid(
                "snapshot sets have different dt".into(),
            ));
        }
        let x = hstack(&sets.iter().map(|s| s.x.clone()).collect::<Vec<_>>())?;
        let xp = hstack(&sets.iter().map(|s| s.xp.clone()).collect::<Vec<_>>())?;
        let u = if has_u {
            Some(hstack(
                &sets
                    .iter()
                    .map(|s| s.u.clone().unwrap())
                    .collect::<Vec<_>>(),
            )?)
        } else {
            None
        };
        SnapshotSet::new(x, xp, u, first.dt)
    }
}

/// `X = x_0..x_{M-2}`, `X' = x_1..x_{M-1}`, `U = u_0..u_{M-2}`.
pub fn assemble_snapshots(traj: &BlochTrajectory) -> Result<SnapshotSet> {
    assemble_snapshots_with(traj, ControlPairing::Left)
}

pub fn assemble_snapshots_with(
    traj: &BlochTrajectory,
    pairing: ControlPairing,
) -> Result<SnapshotSet> {
    let m = traj.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples to form snapshot pairs, got {m}"
        )));
    }
    let x = traj.states.columns(0, m - 1).into_owned();
    let xp = traj.states.columns(1, m - 1).into_owned();
    let u = if traj.n_controls() > 0 {
        let left = traj.controls.columns(0, m - 1).into_owned();
        Some(match pairing {
            ControlPairing::Left => left,
            ControlPairing::Trapezoid => (left + traj.controls.columns(1, m - 1)) * 0.5,
        })
    } else {
        None
    };
    SnapshotSet::new(x, xp, u, traj.dt)
}

/// Control samples for `n` steps starting at `t0`, one column per step.
pub fn control_sequence(
    signals: &[ControlSignal],
    t0: f64,
    dt: f64,
    n: usize,
    pairing: ControlPairing,
) -> Mat {
    Mat::from_fn(signals.len(), n, |j, k| {
        let t = t0 + k as f64 * dt;
        match pairing {
            ControlPairing::Left => signals[j].eval(t),
            ControlPairing::Trapezoid => 0.5 * (signals[j].eval(t) + signals[j].eval(t + dt)),
        }
    })
}

/// Column-wise Kronecker product: column m is `u_m ⊗ x_m`.
pub fn khatri_rao(u: &Mat, x: &Mat) -> Result<Mat> {
    if u.ncols() != x.ncols() {
        return Err(Error::Shape(format!(
            "Khatri-Rao operands have {} and {} columns",
            u.ncols(),
            x.ncols()
        )));
    }
    let (nc, d) = (u.nrows(), x.nrows());
    let mut out = Mat::zeros(nc * d, x.ncols());
    for m in 0..x.ncols() {
        for i in 0..nc {
            let ui = u[(i, m)];
            for j in 0..d {
                out[(i * d + j, m)] = ui * x[(j, m)];
            }
        }
    }
    Ok(out)
}

/// Scale each column to unit norm with its largest-magnitude entry real
/// and positive. Zero columns are left untouched.
pub fn normalize_modes(modes: &mut CMat) {
    for mut col in modes.column_iter_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            continue;
        }
        let mut best = Complex64::new(0.0, 0.0);
        for z in col.iter() {
            if z.norm() > best.norm() * (1.0 + 1e-12) {
                best = *z;
            }
        }
        let phase = best.conj() / best.norm();
        col.scale_mut(1.0 / nrm);
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

/// Eigenvalues and modes shared by the model types.
pub trait Spectrum {
    fn eigenvalues(&self) -> &[Complex64];
    fn dt(&self) -> f64;
}

/// `|arg λ| / (2π dt)` for each conjugate pair, ordered by decreasing `|λ|`.
pub fn resonance_estimate<S: Spectrum + ?Sized>(model: &S) -> Vec<f64> {
    resonance_from_eigenvalues(model.eigenvalues(), model.dt())
}

pub fn resonance_from_eigenvalues(eigs: &[Complex64], dt: f64) -> Vec<f64> {
    let tol = 1e-12
        * eigs
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
    let mut pairs: Vec<Complex64> = eigs.iter().copied().filter(|z| z.im > tol).collect();
    if pairs.is_empty() {
        warn!("spectrum is real; no oscillation frequency available");
        return Vec::new();
    }
    pairs.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pairs
        .iter()
        .map(|z| z.arg().abs() / (2.0 * std::f64::consts::PI * dt))
        .collect()
}

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "{what} contains non-finite values"
        )));
    }
    Ok(())
}

fn resolve_rank(svd: &Svd, requested: Option<usize>, what: &str) -> Result<usize> {
    let numerical = svd.rank_above(crate::linalg::default_rank_tolerance(
        svd.u.nrows(),
        svd.v.nrows(),
    ));
    match requested {
        Some(0) => Err(Error::Rank(format!("{what} rank must be at least 1"))),
        Some(r) if r > numerical => Err(Error::Rank(format!(
            "requested {what} rank {r} exceeds numerical rank {numerical}"
        ))),
        Some(r) => Ok(r),
        None => {
            let r = svd.rank_above(AUTO_RANK_TOL);
            if r == 0 {
                Err(Error::DegenerateData(format!(
                    "{what} has no significant singular values"
                )))
            } else {
                Ok(r)
            }
        }
    }
}

/// Exact-DMD model `x_{n+1} ≈ A x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel {
    /// Full-dimensional propagator `X' pinv_r(X)`.
    pub a: Mat,
    pub modes: CMat,
    pub eigenvalues: Vec<Complex64>,
    pub rank: usize,
    pub dt: f64,
    /// Eigenvector matrix too ill-conditioned for modal prediction.
    pub defective: bool,
}

impl Spectrum for DmdModel {
    fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Rank-`r` exact DMD. `rank = None` keeps singular values above
/// `1e-10 σ_max`.
pub fn dmd_fit(snap: &SnapshotSet, rank: Option<usize>) -> Result<DmdModel> {
    check_finite(&snap.x, "X")?;
    check_finite(&snap.xp, "X'")?;
    if snap.x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateData(
            "snapshot matrix X is identically zero".into(),
        ));
    }
    let svd = Svd::new(&snap.x)?;
    let r = resolve_rank(&svd, rank, "DMD")?;
    let t = svd.truncate(r);
    let xp_v = &snap.xp * t.v_sigma_inv();
    let a = &xp_v * t.u.transpose();
    let a_red = t.u.transpose() * &xp_v;
    let e = eig(&a_red)?;
    let defective = condition_number(&e.vectors) > DEFECTIVE_COND;
    if defective {
        warn!("reduced DMD operator is numerically defective; predictions use matrix powers");
    }
    let mut modes = to_complex(&(xp_v)) * &e.vectors;
    normalize_modes(&mut modes);
    Ok(DmdModel {
        a,
        modes,
        eigenvalues: e.values,
        rank: r,
        dt: snap.dt,
        defective,
    })
}

/// Modal propagation `x_n = Φ Λ^n b`, `b = pinv(Φ) x0`; columns 0..=n.
pub fn modal_propagate(modes: &CMat, eigs: &[Complex64], x0: &Vector, n: usize) -> Result<Mat> {
    let b = complex_pinv(modes)? * to_complex(&Mat::from_column_slice(x0.len(), 1, x0.as_slice()));
    let d = modes.nrows();
    let mut out = Mat::zeros(d, n + 1);
    let mut coeff: Vec<Complex64> = b.column(0).iter().copied().collect();
    let scale = x0.norm().max(1e-300);
    for k in 0..=n {
        let z = modes * CMat::from_column_slice(coeff.len(), 1, &coeff);
        let im = z.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if im > 1e-8 * scale.max(z.iter().map(|c| c.re.abs()).fold(0.0, f64::max)) {
            warn!("modal prediction has imaginary residue {im:.3e} at step {k}");
        }
        for i in 0..d {
            out[(i, k)] = z[(i, 0)].re;
        }
        for (c, l) in coeff.iter_mut().zip(eigs) {
            *c *= l;
        }
    }
    Ok(out)
}

/// Predict `n` steps from `x0`; column 0 is the modal reconstruction of `x0`.
pub fn dmd_predict(model: &DmdModel, x0: &Vector, n: usize) -> Result<Mat> {
    if x0.len() != model.a.nrows() {
        return Err(Error::Shape(format!(
            "initial state has length {}, model dimension is {}",
            x0.len(),
            model.a.nrows()
        )));
    }
    if model.defective {
        let mut out = Mat::zeros(x0.len(), n + 1);
        let mut x = x0.clone();
        out.set_column(0, &x);
        for k in 1..=n {
            x = &model.a * x;
            out.set_column(k, &x);
        }
        return Ok(out);
    }
    modal_propagate(&model.modes, &model.eigenvalues, x0, n)
}

/// Direct-actuation model `x_{n+1} ≈ A x_n + B u_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdcModel {
    pub a: Mat,
    pub b: Mat,
    pub eigenvalues: Vec<Complex64>,
    pub dt: f64,
}

impl Spectrum for DmdcModel {
    fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
    fn dt(&self) -> f64 {
        self.dt
    }
}

/// `[A B] = X' pinv_r([X; U])`; `rank = None` uses the standard
/// pseudo-inverse tolerance.
pub fn dmdc_fit(snap: &SnapshotSet, rank: Option<usize>) -> Result<DmdcModel> {
    let u = snap
        .u
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("DMDc needs a control matrix".into()))?;
    check_finite(&snap.x, "X")?;
    check_finite(u, "U")?;
    let d = snap.dim();
    if u.iter().all(|v| *v == 0.0) {
        let xr = Svd::new(&snap.x)?;
        let r = xr.rank_above(crate::linalg::default_rank_tolerance(d, snap.len()));
        if r < d {
            return Err(Error::Identifiability(format!(
                "controls are identically zero and X has rank {r} < {d}"
            )));
        }
    }
    let omega = vstack(&snap.x, u)?;
    let svd = Svd::new(&omega)?;
    let numerical = svd.rank_above(crate::linalg::default_rank_tolerance(
        omega.nrows(),
        omega.ncols(),
    ));
    let r = match rank {
        Some(0) => return Err(Error::Rank("DMDc rank must be at least 1".into())),
        Some(r) if r > numerical => {
            return Err(Error::Rank(format!(
                "requested rank {r} exceeds numerical rank {numerical}"
            )))
        }
        Some(r) => r,
        None => numerical.max(1),
    };
    let g = &snap.xp * svd.truncate(r).pseudo_inverse();
    let a = g.columns(0, d).into_owned();
    let b = g.columns(d, u.nrows()).into_owned();
    let eigenvalues = eig(&a)?.values;
    Ok(DmdcModel {
        a,
        b,
        eigenvalues,
        dt: snap.dt,
    })
}

pub fn dmdc_predict(model: &DmdcModel, x0: &Vector, u_seq: &Mat) -> Result<Mat> {
    if u_seq.nrows() != model.b.ncols() || x0.len() != model.a.nrows() {
        return Err(Error::Shape("control or state dimension mismatch".into()));
    }
    let n = u_seq.ncols();
    let mut out = Mat::zeros(x0.len(), n + 1);
    let mut x = x0.clone();
    out.set_column(0, &x);
    for k in 0..n {
        x = &model.a * &x + &model.b * u_seq.column(k);
        out.set_column(k + 1, &x);
    }
    Ok(out)
}

/// Bilinear model `x_{n+1} ≈ A x_n + B (u_n ⊗ x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiDmdModel {
    pub a: Mat,
    /// `d × (N_c · d)`, columns ordered `(u_1 x_1..x_d, u_2 x_1.., ...)`.
    pub b: Mat,
    pub modes: CMat,
    pub eigenvalues: Vec<Complex64>,
    pub r_tilde: usize,
    pub r_hat: usize,
    pub n_controls: usize,
    pub dt: f64,
}

impl Spectrum for BiDmdModel {
    fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }
    fn dt(&self) -> f64 {
        self.dt
    }
}

impl BiDmdModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Stacked regression operator `[A B]`.
    pub fn operator(&self) -> Mat {
        hstack(&[self.a.clone(), self.b.clone()]).expect("A and B share a row count")
    }
}

/// `Ξ = [X; U ⊙ X]`.
pub fn bilinear_regressor(snap: &SnapshotSet) -> Result<Mat> {
    let u = snap
        .u
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("biDMD needs a control matrix".into()))?;
    vstack(&snap.x, &khatri_rao(u, &snap.x)?)
}

/// Bilinear DMD. `r_tilde` truncates the SVD of `Ξ`, `r_hat` the SVD of
/// `X'` used for the reduced drift and its modes. `None` keeps singular
/// values above `1e-10 σ_max`.
pub fn bidmd_fit(
    snap: &SnapshotSet,
    r_tilde: Option<usize>,
    r_hat: Option<usize>,
) -> Result<BiDmdModel> {
    let d = snap.dim();
    let nc = snap.n_controls();
    let xi = bilinear_regressor(snap)?;
    check_finite(&xi, "regressor")?;
    check_finite(&snap.xp, "X'")?;
    if snap.x.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateData(
            "snapshot matrix X is identically zero".into(),
        ));
    }
    let svd = Svd::new(&xi)?;
    let mut rt = match r_tilde {
        Some(0) => return Err(Error::Rank("r̃ must be at least 1".into())),
        Some(r) => r.min(svd.rank()),
        None => svd.rank_above(AUTO_RANK_TOL),
    };
    let floor = svd.rank_above(1e-12);
    if rt > floor {
        warn!("r̃ = {rt} includes singular values below 1e-12 σ_max; truncating to {floor}");
        rt = floor;
    }
    if rt == 0 {
        return Err(Error::DegenerateData(
            "regressor has no significant singular values".into(),
        ));
    }
    let t = svd.truncate(rt);
    let xp_v = &snap.xp * t.v_sigma_inv();
    let ua = t.u.rows(0, d);
    let ub = t.u.rows(d, nc * d);
    let a = &xp_v * ua.transpose();
    let b = &xp_v * ub.transpose();

    let xp_svd = Svd::new(&snap.xp)?;
    let rh = match r_hat {
        Some(0) => return Err(Error::Rank("r̂ must be at least 1".into())),
        Some(r) if r > d => {
            return Err(Error::Rank(format!("r̂ = {r} exceeds state dimension {d}")))
        }
        Some(r) => r.min(xp_svd.rank()),
        None => xp_svd.rank_above(AUTO_RANK_TOL).max(1),
    };
    let u_hat = xp_svd.truncate(rh).u;
    let a_hat = u_hat.transpose() * &a * &u_hat;
    let e = eig(&a_hat)?;
    let mut modes = to_complex(&(&a * &u_hat)) * &e.vectors;
    normalize_modes(&mut modes);
    Ok(BiDmdModel {
        a,
        b,
        modes,
        eigenvalues: e.values,
        r_tilde: rt,
        r_hat: rh,
        n_controls: nc,
        dt: snap.dt,
    })
}

/// Iterate `x_{n+1} = A x_n + B (u_n ⊗ x_n)`; columns 0..=n.
pub fn bidmd_predict(model: &BiDmdModel, x0: &Vector, u_seq: &Mat) -> Result<Mat> {
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::Shape(format!(
            "initial state has length {}, model dimension is {d}",
            x0.len()
        )));
    }
    if u_seq.nrows() != model.n_controls {
        return Err(Error::Shape(format!(
            "control sequence has {} rows, model expects {}",
            u_seq.nrows(),
            model.n_controls
        )));
    }
    let n = u_seq.ncols();
    let mut out = Mat::zeros(d, n + 1);
    let mut x = x0.clone();
    out.set_column(0, &x);
    for k in 0..n {
        let uk: Vec<f64> = u_seq.column(k).iter().copied().collect();
        x = &model.a * &x + &model.b * kron_features(&uk, &x);
        out.set_column(k + 1, &x);
    }
    Ok(out)
}

/// `u ⊗ x` as a vector.
pub fn kron_features(u: &[f64], x: &Vector) -> Vector {
    Vector::from_vec(kron_vec(u, x.as_slice()))
}

/// Trajectory-level relative error `‖X̂ − X‖_F / ‖X‖_F`.
pub fn relative_error(pred: &Mat, truth: &Mat) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let den = truth.norm();
    if den == 0.0 {
        return Err(Error::DegenerateData("reference trajectory is zero".into()));
    }
    Ok((pred - truth).norm() / den)
}

/// Per-step error `‖x̂_m − x_m‖ / max_m ‖x_m‖ × 100`.
pub fn percent_error_per_step(pred: &Mat, truth: &Mat) -> Result<Vec<f64>> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape("prediction and truth differ in shape".into()));
    }
    let scale = truth.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateData("reference trajectory is zero".into()));
    }
    Ok((0..truth.ncols())
        .map(|m| (pred.column(m) - truth.column(m)).norm() / scale * 100.0)
        .collect())
}

/// Serialized complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexRecord {
    fn from(z: Complex64) -> Self {
        ComplexRecord { re: z.re, im: z.im }
    }
}

impl From<ComplexRecord> for Complex64 {
    fn from(z: ComplexRecord) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dmd,
    Dmdc,
    Bidmd,
    Floquet,
    Aht,
}

/// JSON model file. Matrices are row-major; `modes` is `d × r` with
/// `r = ranks.last()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub kind: ModelKind,
    pub d: usize,
    #[serde(rename = "Nc")]
    pub nc: usize,
    pub dt: f64,
    pub ranks: Vec<usize>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    pub eigenvalues: Vec<ComplexRecord>,
    pub modes: Vec<ComplexRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_pairing: Option<ControlPairing>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub defective: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
}

pub fn complex_to_row_major(m: &CMat) -> Vec<ComplexRecord> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].into());
        }
    }
    out
}

pub fn complex_from_row_major(rows: usize, cols: usize, data: &[ComplexRecord]) -> Result<CMat> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!(
            "expected {} complex entries for {rows}x{cols}, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| data[i * cols + j].into()))
}

impl ModelRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn base(kind: ModelKind, d: usize, nc: usize, dt: f64) -> Self {
        ModelRecord {
            kind,
            d,
            nc,
            dt,
            ranks: vec![],
            a: vec![],
            b: vec![],
            eigenvalues: vec![],
            modes: vec![],
            control_pairing: None,
            defective: false,
            period: None,
            samples_per_period: None,
            harmonics: None,
            omega: None,
            degree: None,
            features: None,
        }
    }

    fn matrix_a(&self) -> Result<Mat> {
        from_row_major(self.d, self.d, &self.a)
    }

    fn mode_matrix(&self, rows: usize) -> Result<CMat> {
        let r = *self
            .ranks
            .last()
            .ok_or_else(|| Error::Parse("model has no ranks".into()))?;
        complex_from_row_major(rows, r, &self.modes)
    }

    fn eigs(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|&z| z.into()).collect()
    }
}

impl From<&DmdModel> for ModelRecord {
    fn from(m: &DmdModel) -> Self {
        let mut r = ModelRecord::base(ModelKind::Dmd, m.a.nrows(), 0, m.dt);
        r.ranks = vec![m.rank];
        r.a = to_row_major(&m.a);
        r.eigenvalues = m.eigenvalues.iter().map(|&z| z.into()).collect();
        r.modes = complex_to_row_major(&m.modes);
        r.defective = m.defective;
        r
    }
}

impl TryFrom<&ModelRecord> for DmdModel {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        Ok(DmdModel {
            a: r.matrix_a()?,
            modes: r.mode_matrix(r.d)?,
            eigenvalues: r.eigs(),
            rank: r.ranks[0],
            dt: r.dt,
            defective: r.defective,
        })
    }
}

impl From<&DmdcModel> for ModelRecord {
    fn from(m: &DmdcModel) -> Self {
        let mut r = ModelRecord::base(ModelKind::Dmdc, m.a.nrows(), m.b.ncols(), m.dt);
        r.ranks = vec![m.a.nrows()];
        r.a = to_row_major(&m.a);
        r.b = to_row_major(&m.b);
        r.eigenvalues = m.eigenvalues.iter().map(|&z| z.into()).collect();
        r
    }
}

impl TryFrom<&ModelRecord> for DmdcModel {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        Ok(DmdcModel {
            a: r.matrix_a()?,
            b: from_row_major(r.d, r.nc, &r.b)?,
            eigenvalues: r.eigs(),
            dt: r.dt,
        })
    }
}

impl From<&BiDmdModel> for ModelRecord {
    fn from(m: &BiDmdModel) -> Self {
        let mut r = ModelRecord::base(ModelKind::Bidmd, m.dim(), m.n_controls, m.dt);
        r.ranks = vec![m.r_tilde, m.r_hat];
        r.a = to_row_major(&m.a);
        r.b = to_row_major(&m.b);
        r.eigenvalues = m.eigenvalues.iter().map(|&z| z.into()).collect();
        r.modes = complex_to_row_major(&m.modes);
        r
    }
}

impl TryFrom<&ModelRecord> for BiDmdModel {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        if r.ranks.len() != 2 {
            return Err(Error::Parse("bilinear model needs ranks [r̃, r̂]".into()));
        }
        Ok(BiDmdModel {
            a: r.matrix_a()?,
            b: from_row_major(r.d, r.nc * r.d, &r.b)?,
            modes: r.mode_matrix(r.d)?,
            eigenvalues: r.eigs(),
            r_tilde: r.ranks[0],
            r_hat: r.ranks[1],
            n_controls: r.nc,
            dt: r.dt,
        })
    }
}
