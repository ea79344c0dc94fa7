//! Average-Hamiltonian bilinear DMD: Fourier control coefficients,
//! polynomial feature libraries, the feature-bilinear fit, and Magnus
//! expansions of the one-period generator.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dmd::{bidmd_fit, kron_features, BiDmdModel, ModelKind, ModelRecord, SnapshotSet};
use crate::error::{Error, Result};
use crate::linalg::{expm, logm, Mat, Vector};
use crate::quadrature::{periodic_trapezoid, CompositeRule};
use crate::simulator::{fmt_f64, propagator, BilinearSystem, ControlSignal};

/// Points used by the periodic trapezoid projection.
pub const FOURIER_POINTS: usize = 1024;

/// `û = [a_1..a_K, b_1..b_K]` of `u` over one period `[t0, t0 + 2π/Ω)`,
/// with the series written in absolute time.
pub fn fit_fourier_coefficients(
    u: impl Fn(f64) -> f64,
    omega: f64,
    k: usize,
    t0: f64,
) -> Result<Vec<f64>> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "base frequency must be positive, got {omega}"
        )));
    }
    let period = 2.0 * PI / omega;
    let mut out = vec![0.0; 2 * k];
    for h in 1..=k {
        let w = h as f64 * omega;
        out[h - 1] =
            2.0 / period * periodic_trapezoid(t0, period, FOURIER_POINTS, |t| u(t) * (w * t).cos());
        out[k + h - 1] =
            2.0 / period * periodic_trapezoid(t0, period, FOURIER_POINTS, |t| u(t) * (w * t).sin());
    }
    Ok(out)
}

/// Coefficients of a control signal over period `n ≥ 1`, i.e. `[(n−1)T, nT]`.
pub fn period_coefficients(u: &ControlSignal, omega: f64, k: usize, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidHarmonic(0));
    }
    let period = 2.0 * PI / omega;
    fit_fourier_coefficients(|t| u.eval(t), omega, k, (n - 1) as f64 * period)
}

/// Coefficients from `FOURIER_POINTS`-independent equispaced samples that
/// cover exactly one period starting at `t0`.
pub fn fit_fourier_samples(samples: &[f64], t0: f64, omega: f64, k: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no control samples".into()));
    }
    let n = samples.len();
    if n <= 2 * k {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot resolve {k} harmonics"
        )));
    }
    let period = 2.0 * PI / omega;
    let h = period / n as f64;
    let mut out = vec![0.0; 2 * k];
    for harm in 1..=k {
        let w = harm as f64 * omega;
        let (mut ca, mut cb) = (0.0, 0.0);
        for (i, &s) in samples.iter().enumerate() {
            let t = t0 + i as f64 * h;
            ca += s * (w * t).cos();
            cb += s * (w * t).sin();
        }
        out[harm - 1] = 2.0 / n as f64 * ca;
        out[k + harm - 1] = 2.0 / n as f64 * cb;
    }
    Ok(out)
}

/// Re-expand `u(t) = Σ a_k cos(kΩt) + b_k sin(kΩt)` about `t0`, returning
/// the coefficients of `τ ↦ u(t0 + τ)`.
pub fn local_coefficients(uhat: &[f64], omega: f64, t0: f64) -> Vec<f64> {
    let k = uhat.len() / 2;
    let mut out = vec![0.0; 2 * k];
    for h in 0..k {
        let ph = (h + 1) as f64 * omega * t0;
        let (s, c) = ph.sin_cos();
        let (a, b) = (uhat[h], uhat[k + h]);
        out[h] = a * c + b * s;
        out[k + h] = -a * s + b * c;
    }
    out
}

/// Per-period coefficient vectors `û_n` of length `2K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCoefficients {
    pub k: usize,
    pub omega: f64,
    pub periods: Vec<Vec<f64>>,
}

impl ControlCoefficients {
    pub fn new(k: usize, omega: f64, periods: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = periods.iter().find(|p| p.len() != 2 * k) {
            return Err(Error::Shape(format!(
                "coefficient vector has length {}, expected {}",
                bad.len(),
                2 * k
            )));
        }
        Ok(ControlCoefficients { k, omega, periods })
    }

    /// `2K × n` matrix, one column per period.
    pub fn matrix(&self) -> Mat {
        Mat::from_fn(2 * self.k, self.periods.len(), |i, j| self.periods[j][i])
    }

    /// CSV `period_index, a1..aK, b1..bK`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["period_index".to_string()];
        header.extend(coefficient_names(self.k));
        writeln!(w, "{}", header.join(","))?;
        for (n, p) in self.periods.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(p.iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `a1..aK, b1..bK`.
pub fn coefficient_names(k: usize) -> Vec<String> {
    (1..=k)
        .map(|i| format!("a{i}"))
        .chain((1..=k).map(|i| format!("b{i}")))
        .collect()
}

/// Monomials with repetition in `n` variables, degree-major then
/// lexicographic in the variable indices.
pub fn monomials(n: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for p in 1..=degree {
        let mut idx = vec![0usize; p];
        if n == 0 {
            break;
        }
        loop {
            out.push(idx.clone());
            // Next non-decreasing index tuple.
            let mut pos = p;
            while pos > 0 && idx[pos - 1] == n - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            let v = idx[pos - 1];
            for slot in idx.iter_mut().skip(pos) {
                *slot = v;
            }
        }
    }
    out
}

fn monomial_name(m: &[usize], names: &[String]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < m.len() {
        let mut j = i;
        while j < m.len() && m[j] == m[i] {
            j += 1;
        }
        let base = &names[m[i]];
        parts.push(if j - i == 1 {
            base.clone()
        } else {
            format!("{base}^{}", j - i)
        });
        i = j;
    }
    parts.join("*")
}

/// Polynomial feature library `Θ(Û)` without a constant row.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialLibrary {
    pub degree: usize,
    pub n_inputs: usize,
    pub monomials: Vec<Vec<usize>>,
    pub names: Vec<String>,
    pub theta: Mat,
}

impl PolynomialLibrary {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Feature-name manifest as a JSON array.
    pub fn names_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.names)?)
    }
}

/// Evaluate the library on a single coefficient vector.
pub fn library_features(uhat: &[f64], monomials: &[Vec<usize>]) -> Vec<f64> {
    monomials
        .iter()
        .map(|m| m.iter().fold(1.0, |acc, &i| acc * uhat[i]))
        .collect()
}

/// Build `Θ(Û)` for `Û` of shape `2K × n`. Rows are named from the
/// coefficient names `a1..aK, b1..bK`.
pub fn build_library(uhat: &Mat, degree: usize) -> Result<PolynomialLibrary> {
    if degree == 0 {
        return Err(Error::InvalidHarmonic(0));
    }
    if !uhat.nrows().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "coefficient matrix has {} rows, expected 2K",
            uhat.nrows()
        )));
    }
    let base = coefficient_names(uhat.nrows() / 2);
    let monos = monomials(uhat.nrows(), degree);
    let names = monos.iter().map(|m| monomial_name(m, &base)).collect();
    let mut theta = Mat::zeros(monos.len(), uhat.ncols());
    for c in 0..uhat.ncols() {
        let col: Vec<f64> = uhat.column(c).iter().copied().collect();
        for (r, v) in library_features(&col, &monos).into_iter().enumerate() {
            theta[(r, c)] = v;
        }
    }
    Ok(PolynomialLibrary {
        degree,
        n_inputs: uhat.nrows(),
        monomials: monos,
        names,
        theta,
    })
}

/// `X' ≈ A X + B (Θ(Û) ⊙ X)`: bilinear DMD with the library as controls.
pub fn aht_bidmd_fit(
    x: &Mat,
    xp: &Mat,
    library: &PolynomialLibrary,
    dt: f64,
    r_tilde: Option<usize>,
    r_hat: Option<usize>,
) -> Result<BiDmdModel> {
    let snap = SnapshotSet::new(x.clone(), xp.clone(), Some(library.theta.clone()), dt)?;
    bidmd_fit(&snap, r_tilde, r_hat)
}

/// A fitted AHT-biDMD model together with the feature definition needed to
/// drive it from Fourier coefficients.
#[derive(Debug, Clone)]
pub struct AhtModel {
    pub bidmd: BiDmdModel,
    pub k: usize,
    pub omega: f64,
    pub degree: usize,
    pub monomials: Vec<Vec<usize>>,
    pub names: Vec<String>,
}

impl AhtModel {
    pub fn new(bidmd: BiDmdModel, k: usize, omega: f64, degree: usize) -> Result<Self> {
        let monos = monomials(2 * k, degree);
        if monos.len() != bidmd.n_controls {
            return Err(Error::Shape(format!(
                "model has {} control features, library has {}",
                bidmd.n_controls,
                monos.len()
            )));
        }
        let base = coefficient_names(k);
        let names = monos.iter().map(|m| monomial_name(m, &base)).collect();
        Ok(AhtModel {
            bidmd,
            k,
            omega,
            degree,
            monomials: monos,
            names,
        })
    }

    /// Features for the step starting at time `t`, from global coefficients.
    pub fn features_at(&self, uhat: &[f64], t: f64) -> Vec<f64> {
        library_features(&local_coefficients(uhat, self.omega, t), &self.monomials)
    }

    /// Predict `n` steps from `x0` at `t0` under the control with global
    /// coefficients `uhat`; columns `0..=n`.
    pub fn predict(&self, x0: &Vector, uhat: &[f64], t0: f64, n: usize) -> Result<Mat> {
        if uhat.len() != 2 * self.k {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                2 * self.k,
                uhat.len()
            )));
        }
        let d = self.bidmd.dim();
        if x0.len() != d {
            return Err(Error::Shape("initial state dimension mismatch".into()));
        }
        let dt = self.bidmd.dt;
        let mut out = Mat::zeros(d, n + 1);
        let mut x = x0.clone();
        out.set_column(0, &x);
        for m in 0..n {
            let th = self.features_at(uhat, t0 + m as f64 * dt);
            x = &self.bidmd.a * &x + &self.bidmd.b * kron_features(&th, &x);
            out.set_column(m + 1, &x);
        }
        Ok(out)
    }
}

impl From<&AhtModel> for ModelRecord {
    fn from(m: &AhtModel) -> Self {
        let mut r = ModelRecord::from(&m.bidmd);
        r.kind = ModelKind::Aht;
        r.harmonics = Some(m.k);
        r.omega = Some(m.omega);
        r.degree = Some(m.degree);
        r.features = Some(m.names.clone());
        r
    }
}

impl TryFrom<&ModelRecord> for AhtModel {
    type Error = Error;
    fn try_from(r: &ModelRecord) -> Result<Self> {
        let (Some(k), Some(omega), Some(degree)) = (r.harmonics, r.omega, r.degree) else {
            return Err(Error::Parse(
                "AHT model needs harmonics, omega and degree".into(),
            ));
        };
        AhtModel::new(BiDmdModel::try_from(r)?, k, omega, degree)
    }
}

/// Truncated Magnus series for the one-period (Floquet) generator.
/// `terms[j]` is the order-j term, scaling as `Ω^{-j}` for fast drives.
#[derive(Debug, Clone)]
pub struct MagnusExpansion {
    pub terms: Vec<Mat>,
    pub period: f64,
    /// `log(monodromy) / T`, when computed.
    pub exact: Option<Mat>,
    /// One-period propagator, when computed.
    pub monodromy: Option<Mat>,
}

impl MagnusExpansion {
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    /// Sum of the first `j` terms.
    pub fn partial_sum(&self, j: usize) -> Mat {
        let d = self.terms[0].nrows();
        self.terms
            .iter()
            .take(j)
            .fold(Mat::zeros(d, d), |acc, t| acc + t)
    }

    pub fn generator(&self) -> Mat {
        self.partial_sum(self.terms.len())
    }

    /// `exp(T · Σ terms)`.
    pub fn propagator(&self) -> Mat {
        expm(&(self.generator() * self.period))
    }
}

/// Rotation generators with `[L_i, L_j] = ε_ijk L_k`.
pub fn rotation_generators() -> [Mat; 3] {
    [
        Mat::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]),
        Mat::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 0., -1., 0., 0.]),
        Mat::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]),
    ]
}

/// Closed-form Magnus expansion for `H = πσ3 + (u cos kΩt + v sin kΩt) σ1`
/// with period `T = 2π/Ω`, through order `Ω^{-2}`:
///
/// `L_F = 2π L_z + (4πv/kΩ) L_y − (2π(u²+3v²) L_z + 8π²u L_x) / (kΩ)²`,
///
/// where `L_x, L_y, L_z` are the rotation generators of σ1, σ2, σ3 (the
/// Bloch generator of `σ_j` is `2 L_j`).
pub fn magnus_floquet_analytic(u: f64, v: f64, k: i64, omega: f64) -> Result<MagnusExpansion> {
    if k <= 0 {
        return Err(Error::InvalidHarmonic(k));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "base frequency must be positive, got {omega}"
        )));
    }
    let [lx, ly, lz] = rotation_generators();
    let kw = k as f64 * omega;
    let t0 = &lz * (2.0 * PI);
    let t1 = &ly * (4.0 * PI * v / kw);
    let t2 =
        (&lz * (2.0 * PI * (u * u + 3.0 * v * v)) + &lx * (8.0 * PI * PI * u)) * (-1.0 / (kw * kw));
    Ok(MagnusExpansion {
        terms: vec![t0, t1, t2],
        period: 2.0 * PI / omega,
        exact: None,
        monodromy: None,
    })
}

/// Quadrature settings for the numerical Magnus expansion.
#[derive(Debug, Clone, Copy)]
pub struct MagnusOptions {
    /// Total Gauss–Legendre nodes on `[0, T]` (composite, 16 per panel).
    pub nodes: usize,
    /// Relative agreement required between `nodes` and `2 nodes`.
    pub tol: f64,
    /// RK4 steps for the reference monodromy matrix.
    pub monodromy_steps: usize,
}

impl Default for MagnusOptions {
    fn default() -> Self {
        MagnusOptions {
            nodes: 256,
            tol: 1e-8,
            monodromy_steps: 4096,
        }
    }
}

fn comm(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

fn magnus_terms(
    sys: &BilinearSystem,
    u: &[ControlSignal],
    period: f64,
    order: usize,
    nodes: usize,
) -> Vec<Mat> {
    const PANEL: usize = 16;
    let panels = nodes.div_ceil(PANEL).max(1);
    let rule = CompositeRule::new(0.0, period, panels, PANEL);
    let l0 = &sys.drift.l;
    let gen_at = |t: f64| {
        let mut g = l0.clone();
        for (s, lj) in u.iter().zip(&sys.controls) {
            g += &lj.l * s.eval(t);
        }
        g
    };
    // F(t) = ∫_0^t L = t L0 + Σ_j (∫_0^t u_j) L_j, with the scalar
    // integrals accumulated panel by panel.
    let (gx, gw) = crate::quadrature::gauss_legendre(PANEL);
    let h = period / panels as f64;
    let cumulative = |s: &ControlSignal, t: f64| -> f64 {
        let full = (t / h).floor().min(panels as f64 - 1.0).max(0.0) as usize;
        let mut acc = 0.0;
        for p in 0..full {
            let lo = p as f64 * h;
            acc += gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * h * w * s.eval(lo + 0.5 * h * (x + 1.0)))
                .sum::<f64>();
        }
        let lo = full as f64 * h;
        let len = t - lo;
        acc + gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| 0.5 * len * w * s.eval(lo + 0.5 * len * (x + 1.0)))
            .sum::<f64>()
    };
    let f_at = |t: f64| {
        let mut f = l0 * t;
        for (s, lj) in u.iter().zip(&sys.controls) {
            f += &lj.l * cumulative(s, t);
        }
        f
    };

    let d = l0.nrows();
    let mut om1 = Mat::zeros(d, d);
    let mut om2 = Mat::zeros(d, d);
    let mut samples = Vec::with_capacity(rule.len());
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let l = gen_at(t);
        om1 += &l * w;
        let f = if order >= 2 {
            f_at(t)
        } else {
            Mat::zeros(d, d)
        };
        if order >= 2 {
            om2 += comm(&l, &f) * (0.5 * w);
        }
        samples.push((l, f, w));
    }
    let mut terms = vec![om1.clone() / period];
    if order >= 2 {
        terms.push(om2 / period);
    }
    if order >= 3 {
        let mut om3 = Mat::zeros(d, d);
        for (l, f, w) in &samples {
            let r = &om1 - f;
            om3 += (comm(&r, &comm(l, f)) + comm(f, &comm(l, &r))) * (*w / 6.0);
        }
        terms.push(om3 / period);
    }
    terms
}

/// Magnus terms of orders `0..order` (at most 3) by iterated quadrature,
/// with `log(monodromy)/T` as a reference. Fails with an accuracy error if
/// doubling the node count changes any term by more than `opts.tol`
/// relative to the generator scale.
pub fn magnus_floquet_numeric(
    sys: &BilinearSystem,
    u: &[ControlSignal],
    period: f64,
    order: usize,
    opts: &MagnusOptions,
) -> Result<MagnusExpansion> {
    if order == 0 || order > 3 {
        return Err(Error::InvalidHarmonic(order as i64));
    }
    if u.len() != sys.n_controls() {
        return Err(Error::Shape(format!(
            "{} control signals for {} control generators",
            u.len(),
            sys.n_controls()
        )));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "period must be positive, got {period}"
        )));
    }
    let nodes = opts.nodes.max(256);
    let coarse = magnus_terms(sys, u, period, order, nodes);
    let fine = magnus_terms(sys, u, period, order, 2 * nodes);
    let scale = fine[0].norm().max(1.0);
    for (j, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        let diff = (c - f).norm();
        if diff > opts.tol * scale {
            return Err(Error::Accuracy(format!(
                "Magnus term {j} changed by {diff:.3e} when doubling nodes from {nodes}"
            )));
        }
    }
    let monodromy = propagator(sys, u, 0.0, period, opts.monodromy_steps)?;
    let exact = logm(&monodromy).ok().map(|l| l / period);
    Ok(MagnusExpansion {
        terms: fine,
        period,
        exact,
        monodromy: Some(monodromy),
    })
}
