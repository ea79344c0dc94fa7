//! Ground-truth trajectories for bilinear Bloch systems, control signals,
//! measurement noise and stroboscopic resampling.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bloch::VectorizedGenerator;
use crate::error::{Error, Result};
use crate::linalg::{expm, Mat, Vector};
use crate::quadrature::CompositeRule;

/// Default RK4 substeps per output sample.
pub const DEFAULT_SUBSTEPS: usize = 64;

/// Scalar control signal `u(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSignal {
    /// `amplitude · cos(2π · frequency · t)`; `frequency` in cycles per unit time.
    PureTone { frequency: f64, amplitude: f64 },
    /// `Σ_k a_k cos(kΩt) + b_k sin(kΩt)`, `k = 1..K`.
    FourierSeries {
        a: Vec<f64>,
        b: Vec<f64>,
        omega: f64,
    },
    /// Rising sawtooth of period T: `amplitude · 2t/T` on `[-T/2, T/2)`.
    Sawtooth { amplitude: f64, period: f64 },
    /// `values[n]` on `[t0 + n dt, t0 + (n+1) dt)`, held constant outside.
    PiecewiseConstant {
        values: Vec<f64>,
        dt: f64,
        #[serde(default)]
        t0: f64,
    },
}

impl ControlSignal {
    pub fn pure_tone(frequency: f64, amplitude: f64) -> Self {
        ControlSignal::PureTone {
            frequency,
            amplitude,
        }
    }

    pub fn fourier(a: Vec<f64>, b: Vec<f64>, omega: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape(format!(
                "cosine and sine coefficient counts differ ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidStep(format!(
                "base frequency must be positive, got {omega}"
            )));
        }
        Ok(ControlSignal::FourierSeries { a, b, omega })
    }

    pub fn sawtooth(amplitude: f64, period: f64) -> Self {
        ControlSignal::Sawtooth { amplitude, period }
    }

    pub fn piecewise(values: Vec<f64>, dt: f64) -> Self {
        ControlSignal::PiecewiseConstant {
            values,
            dt,
            t0: 0.0,
        }
    }

    pub fn zero() -> Self {
        ControlSignal::PiecewiseConstant {
            values: vec![0.0],
            dt: 1.0,
            t0: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ControlSignal::PureTone {
                frequency,
                amplitude,
            } => amplitude * (2.0 * PI * frequency * t).cos(),
            ControlSignal::FourierSeries { a, b, omega } => {
                let mut acc = 0.0;
                for (k, (ak, bk)) in a.iter().zip(b).enumerate() {
                    let ph = (k + 1) as f64 * omega * t;
                    acc += ak * ph.cos() + bk * ph.sin();
                }
                acc
            }
            ControlSignal::Sawtooth { amplitude, period } => {
                let s = t / period + 0.5;
                amplitude * (2.0 * (s - s.floor()) - 1.0)
            }
            ControlSignal::PiecewiseConstant { values, dt, t0 } => {
                if values.is_empty() {
                    return 0.0;
                }
                let idx = ((t - t0) / dt).floor();
                let idx = if idx < 0.0 { 0 } else { idx as usize };
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// Fundamental period, when the signal is periodic.
    pub fn period(&self) -> Option<f64> {
        match self {
            ControlSignal::PureTone { frequency, .. } if *frequency != 0.0 => {
                Some(1.0 / frequency.abs())
            }
            ControlSignal::FourierSeries { omega, .. } => Some(2.0 * PI / omega),
            ControlSignal::Sawtooth { period, .. } => Some(*period),
            _ => None,
        }
    }
}

/// Drift generator plus one generator per control channel:
/// `ẋ = (L0 + Σ_j u_j(t) L_j) x + c0 + Σ_j u_j(t) c_j`.
#[derive(Debug, Clone)]
pub struct BilinearSystem {
    pub drift: VectorizedGenerator,
    pub controls: Vec<VectorizedGenerator>,
}

impl BilinearSystem {
    pub fn new(drift: VectorizedGenerator, controls: Vec<VectorizedGenerator>) -> Result<Self> {
        let d = drift.dim();
        if drift.l.ncols() != d || drift.c.len() != d {
            return Err(Error::Shape("drift generator is not square".into()));
        }
        for (j, g) in controls.iter().enumerate() {
            if g.dim() != d || g.l.ncols() != d || g.c.len() != d {
                return Err(Error::Shape(format!(
                    "control generator {j} has dimension {}, drift has {d}",
                    g.dim()
                )));
            }
        }
        Ok(BilinearSystem { drift, controls })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Instantaneous generator for control values `u`.
    pub fn generator(&self, u: &[f64]) -> VectorizedGenerator {
        let mut g = self.drift.clone();
        for (uj, lj) in u.iter().zip(&self.controls) {
            g.l += &lj.l * *uj;
            g.c += &lj.c * *uj;
        }
        g
    }

    fn rhs(&self, u: &[f64], x: &Vector) -> Vector {
        let g = self.generator(u);
        g.l * x + g.c
    }

    fn check_controls(&self, u: &[ControlSignal]) -> Result<()> {
        if u.len() != self.controls.len() {
            return Err(Error::Shape(format!(
                "{} control signals for {} control generators",
                u.len(),
                self.controls.len()
            )));
        }
        Ok(())
    }
}

fn eval_all(u: &[ControlSignal], t: f64) -> Vec<f64> {
    u.iter().map(|s| s.eval(t)).collect()
}

/// Provenance attached to a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub sigma: f64,
    pub seed: Option<u64>,
    pub period: Option<f64>,
}

/// Uniformly sampled Bloch trajectory; column m of `states` and `controls`
/// belongs to `times[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub states: Mat,
    pub controls: Mat,
    pub dt: f64,
    pub meta: TrajectoryMeta,
}

impl BlochTrajectory {
    pub fn new(times: Vec<f64>, states: Mat, controls: Mat, meta: TrajectoryMeta) -> Result<Self> {
        let m = times.len();
        if states.ncols() != m || controls.ncols() != m {
            return Err(Error::Shape(format!(
                "{} times, {} state columns, {} control columns",
                m,
                states.ncols(),
                controls.ncols()
            )));
        }
        let dt = if m >= 2 { times[1] - times[0] } else { 0.0 };
        if m >= 2 {
            if dt <= 0.0 {
                return Err(Error::SamplingGrid(
                    "times must be strictly increasing".into(),
                ));
            }
            for (i, w) in times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - dt).abs() > 1e-9 * dt {
                    return Err(Error::SamplingGrid(format!(
                        "non-uniform spacing at sample {}: {step} vs {dt}",
                        i + 1
                    )));
                }
            }
        }
        Ok(BlochTrajectory {
            times,
            states,
            controls,
            dt,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.nrows()
    }

    pub fn state(&self, m: usize) -> Vector {
        self.states.column(m).into_owned()
    }

    /// Trajectory CSV: `#key=value` metadata lines, a header, then one
    /// row per sample with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dt={}", fmt_f64(self.dt))?;
        writeln!(w, "# sigma={}", fmt_f64(self.meta.sigma))?;
        if let Some(seed) = self.meta.seed {
            writeln!(w, "# seed={seed}")?;
        }
        if let Some(t) = self.meta.period {
            writeln!(w, "# T={}", fmt_f64(t))?;
        }
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("x{j}")));
        header.extend((1..=self.n_controls()).map(|j| format!("u{j}")));
        writeln!(w, "{}", header.join(","))?;
        for m in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[m])];
            row.extend(self.states.column(m).iter().map(|v| fmt_f64(*v)));
            row.extend(self.controls.column(m).iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = TrajectoryMeta::default();
        let mut header: Option<(usize, usize)> = None;
        let mut times = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        let mut us: Vec<f64> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    let v = v.trim();
                    let bad = |_| Error::Parse(format!("line {}: bad value for {k}", lineno + 1));
                    match k.trim() {
                        "sigma" => meta.sigma = v.parse().map_err(bad)?,
                        "seed" => {
                            meta.seed = Some(v.parse().map_err(|_| {
                                Error::Parse(format!("line {}: bad seed", lineno + 1))
                            })?)
                        }
                        "T" => meta.period = Some(v.parse().map_err(bad)?),
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            match header {
                None => {
                    if fields.first() != Some(&"t") {
                        return Err(Error::Parse(format!(
                            "line {}: expected header starting with 't'",
                            lineno + 1
                        )));
                    }
                    let d = fields.iter().filter(|f| f.starts_with('x')).count();
                    let nc = fields.iter().filter(|f| f.starts_with('u')).count();
                    if d + nc + 1 != fields.len() {
                        return Err(Error::Parse(format!("line {}: unknown column", lineno + 1)));
                    }
                    header = Some((d, nc));
                }
                Some((d, nc)) => {
                    if fields.len() != d + nc + 1 {
                        return Err(Error::Parse(format!(
                            "line {}: expected {} fields, found {}",
                            lineno + 1,
                            d + nc + 1,
                            fields.len()
                        )));
                    }
                    let mut vals = Vec::with_capacity(fields.len());
                    for f in &fields {
                        vals.push(f.parse::<f64>().map_err(|_| {
                            Error::Parse(format!("line {}: not a number: {f}", lineno + 1))
                        })?);
                    }
                    times.push(vals[0]);
                    xs.extend_from_slice(&vals[1..=d]);
                    us.extend_from_slice(&vals[d + 1..]);
                }
            }
        }
        let Some((d, nc)) = header else {
            return Err(Error::InsufficientData(
                "trajectory file has no header".into(),
            ));
        };
        let m = times.len();
        let states = Mat::from_column_slice(d, m, &xs);
        let controls = Mat::from_column_slice(nc, m, &us);
        BlochTrajectory::new(times, states, controls, meta)
    }
}

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn rk4_step(sys: &BilinearSystem, u: &[ControlSignal], t: f64, h: f64, x: &Vector) -> Vector {
    let u0 = eval_all(u, t);
    let um = eval_all(u, t + 0.5 * h);
    let u1 = eval_all(u, t + h);
    let k1 = sys.rhs(&u0, x);
    let k2 = sys.rhs(&um, &(x + &k1 * (0.5 * h)));
    let k3 = sys.rhs(&um, &(x + &k2 * (0.5 * h)));
    let k4 = sys.rhs(&u1, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Number of output samples on `[t0, t_end]` with spacing `dt_out`.
pub fn grid_len(t0: f64, t_end: f64, dt_out: f64) -> Result<usize> {
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::InvalidStep(format!(
            "output step must be positive, got {dt_out}"
        )));
    }
    if t_end < t0 {
        return Err(Error::InvalidStep("t_end precedes t0".into()));
    }
    let steps = (t_end - t0) / dt_out;
    let n = steps.round();
    if (steps - n).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::SamplingGrid(format!(
            "interval length {} is not a multiple of dt {dt_out}",
            t_end - t0
        )));
    }
    Ok(n as usize + 1)
}

/// Integrate `ẋ = (L0 + Σ u_j(t) L_j) x + c(t)` with classical RK4,
/// `substeps` steps per output sample.
pub fn integrate_bilinear(
    sys: &BilinearSystem,
    u: &[ControlSignal],
    x0: &Vector,
    t0: f64,
    t_end: f64,
    dt_out: f64,
    substeps: usize,
) -> Result<BlochTrajectory> {
    sys.check_controls(u)?;
    if x0.len() != sys.dim() {
        return Err(Error::Shape(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            sys.dim()
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidStep("substeps must be positive".into()));
    }
    let m = grid_len(t0, t_end, dt_out)?;
    let h = dt_out / substeps as f64;
    let times: Vec<f64> = (0..m).map(|i| t0 + i as f64 * dt_out).collect();
    let mut states = Mat::zeros(sys.dim(), m);
    let mut controls = Mat::zeros(u.len(), m);
    let mut x = x0.clone();
    for (i, &t) in times.iter().enumerate() {
        states.set_column(i, &x);
        for (j, s) in u.iter().enumerate() {
            controls[(j, i)] = s.eval(t);
        }
        if i + 1 < m {
            for k in 0..substeps {
                x = rk4_step(sys, u, t + k as f64 * h, h, &x);
            }
        }
    }
    let meta = TrajectoryMeta {
        period: common_period(u),
        ..Default::default()
    };
    BlochTrajectory::new(times, states, controls, meta)
}

fn common_period(u: &[ControlSignal]) -> Option<f64> {
    let mut p = None;
    for s in u {
        match (p, s.period()) {
            (_, None) => return None,
            (None, q) => p = q,
            (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * a => {}
            _ => return None,
        }
    }
    p
}

/// Fundamental matrix `Φ(t1, t0)` of the homogeneous part, by RK4 with
/// `steps` equal steps. Over one control period this is the monodromy matrix.
pub fn propagator(
    sys: &BilinearSystem,
    u: &[ControlSignal],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Mat> {
    sys.check_controls(u)?;
    if steps == 0 {
        return Err(Error::InvalidStep("steps must be positive".into()));
    }
    let d = sys.dim();
    let h = (t1 - t0) / steps as f64;
    let gen = |t: f64| sys.generator(&eval_all(u, t)).l;
    let mut phi = Mat::identity(d, d);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let a0 = gen(t);
        let am = gen(t + 0.5 * h);
        let a1 = gen(t + h);
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(phi)
}

/// Discrete zero-order-hold system `x_{n+1} = e^{L0 dt} x_n + Γ u_n` with
/// `Γ = ∫_0^dt e^{L0 (dt - s)} ds · L_B`.
pub fn zoh_matrices(l0: &Mat, lb: &Mat, dt: f64) -> Result<(Mat, Mat)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidStep(format!("dt must be positive, got {dt}")));
    }
    let d = l0.nrows();
    if l0.ncols() != d || lb.nrows() != d {
        return Err(Error::Shape(format!(
            "L0 is {}x{}, L_B is {}x{}",
            l0.nrows(),
            l0.ncols(),
            lb.nrows(),
            lb.ncols()
        )));
    }
    let a = expm(&(l0 * dt));
    let norm = l0.norm() * dt;
    let panels = 4 + (4.0 * norm).ceil() as usize;
    let rule = CompositeRule::new(0.0, dt, panels, 10);
    let mut integral = Mat::zeros(d, d);
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        integral += expm(&(l0 * (dt - s))) * *w;
    }
    Ok((a, integral * lb))
}

/// Propagate a zero-order-hold direct-actuation system. `u_samples` holds
/// one column per step; the returned trajectory has one more sample than
/// steps and repeats the last control value in its final column.
pub fn zero_order_hold_propagate(
    l0: &Mat,
    lb: &Mat,
    u_samples: &Mat,
    x0: &Vector,
    dt: f64,
) -> Result<BlochTrajectory> {
    let (a, gamma) = zoh_matrices(l0, lb, dt)?;
    if u_samples.nrows() != lb.ncols() {
        return Err(Error::Shape(format!(
            "control samples have {} rows, L_B has {} columns",
            u_samples.nrows(),
            lb.ncols()
        )));
    }
    if x0.len() != l0.nrows() {
        return Err(Error::Shape("initial state dimension mismatch".into()));
    }
    let n = u_samples.ncols();
    let mut states = Mat::zeros(l0.nrows(), n + 1);
    let mut controls = Mat::zeros(lb.ncols(), n + 1);
    let mut x = x0.clone();
    states.set_column(0, &x);
    for k in 0..n {
        let uk = u_samples.column(k);
        x = &a * &x + &gamma * uk;
        states.set_column(k + 1, &x);
        controls.set_column(k, &uk);
    }
    if n > 0 {
        controls.set_column(n, &u_samples.column(n - 1));
    }
    let times = (0..=n).map(|k| k as f64 * dt).collect();
    BlochTrajectory::new(times, states, controls, TrajectoryMeta::default())
}

/// Additive i.i.d. Gaussian measurement noise on every state entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

pub fn add_noise(traj: &BlochTrajectory, noise: &NoiseModel) -> Result<BlochTrajectory> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidState(format!(
            "noise standard deviation must be non-negative, got {}",
            noise.sigma
        )));
    }
    let mut out = traj.clone();
    out.meta.sigma = noise.sigma;
    out.meta.seed = Some(noise.seed);
    if noise.sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for v in out.states.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += noise.sigma * z;
    }
    Ok(out)
}

/// Keep samples at offsets `r T / s`, starting from the first sample.
pub fn sample_stroboscopic(
    traj: &BlochTrajectory,
    period: f64,
    s: usize,
) -> Result<BlochTrajectory> {
    let stride = stroboscopic_stride(traj.dt, period, s)?;
    let idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    let times = idx.iter().map(|&i| traj.times[i]).collect();
    let states = traj.states.select_columns(&idx);
    let controls = traj.controls.select_columns(&idx);
    let mut meta = traj.meta.clone();
    meta.period = Some(period);
    BlochTrajectory::new(times, states, controls, meta)
}

fn stroboscopic_stride(dt: f64, period: f64, s: usize) -> Result<usize> {
    if s == 0 || !(period > 0.0) {
        return Err(Error::SamplingGrid(
            "period and samples-per-period must be positive".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::SamplingGrid(
            "trajectory needs at least two samples".into(),
        ));
    }
    let ratio = period / s as f64 / dt;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::SamplingGrid(format!(
            "T/s = {} is not an integer multiple of dt = {dt}",
            period / s as f64
        )));
    }
    Ok(stride as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{pauli, vectorize_hamiltonian, HermitianBasis};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn example_system() -> BilinearSystem {
        let b = HermitianBasis::qubit();
        let p = pauli();
        let drift = vectorize_hamiltonian(&(&p[2] * Complex64::new(PI, 0.0)), &b).unwrap();
        let ctrl = vectorize_hamiltonian(&p[0], &b).unwrap();
        BilinearSystem::new(drift, vec![ctrl]).unwrap()
    }

    #[test]
    fn control_constructors_evaluate() {
        assert_eq!(ControlSignal::pure_tone(1.1, 1.0).eval(0.0), 1.0);
        let f = ControlSignal::fourier(vec![1., 0., 0., 0., 0.], vec![0.; 5], PI).unwrap();
        assert_abs_diff_eq!(f.eval(1.0), -1.0, epsilon = 1e-15);
        let s = ControlSignal::sawtooth(1.0, 2.0);
        assert_abs_diff_eq!(s.eval(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(-0.5), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval(2.5), 0.5, epsilon = 1e-14);
        let p = ControlSignal::piecewise(vec![1.0, 2.0, 3.0], 0.5);
        assert_eq!(p.eval(0.7), 2.0);
        assert_eq!(p.eval(10.0), 3.0);
    }

    #[test]
    fn fourier_is_periodic() {
        let f = ControlSignal::fourier(vec![0.3, -0.2], vec![0.1, 0.5], 2.0).unwrap();
        let t = f.period().unwrap();
        for i in 0..20 {
            let x = 0.173 * i as f64;
            assert_abs_diff_eq!(f.eval(x + t), f.eval(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn example_grid_has_81_samples() {
        let sys = example_system();
        let tr = integrate_bilinear(
            &sys,
            &[ControlSignal::pure_tone(1.1, 1.0)],
            &Vector::from_vec(vec![0., 0., 1.]),
            0.0,
            5.0,
            1.0 / 16.0,
            DEFAULT_SUBSTEPS,
        )
        .unwrap();
        assert_eq!(tr.len(), 81);
        assert_eq!(tr.controls[(0, 0)], 1.0);
        for m in 0..tr.len() {
            assert_abs_diff_eq!(tr.state(m).norm(), 1.0, epsilon = 1e-9);
        }
        let min_z = tr.states.row(2).min();
        // Detuned Rabi cycle: inversion depth 1/(1 + (2π·0.1)²) ≈ 0.72.
        assert!(min_z < -0.4, "driven qubit should invert, min z = {min_z}");
    }

    #[test]
    fn shape_errors() {
        let sys = example_system();
        let x0 = Vector::from_vec(vec![0., 0., 1.]);
        assert!(matches!(
            integrate_bilinear(&sys, &[], &x0, 0.0, 1.0, 0.1, 8),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            zoh_matrices(&Mat::zeros(2, 2), &Mat::zeros(2, 1), 0.0),
            Err(Error::InvalidStep(_))
        ));
    }

    #[test]
    fn noise_zero_and_determinism() {
        let sys = example_system();
        let tr = integrate_bilinear(
            &sys,
            &[ControlSignal::zero()],
            &Vector::from_vec(vec![1., 0., 0.]),
            0.0,
            1.0,
            0.1,
            8,
        )
        .unwrap();
        let same = add_noise(
            &tr,
            &NoiseModel {
                sigma: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(same.states, tr.states);
        let a = add_noise(
            &tr,
            &NoiseModel {
                sigma: 0.1,
                seed: 7,
            },
        )
        .unwrap();
        let b = add_noise(
            &tr,
            &NoiseModel {
                sigma: 0.1,
                seed: 7,
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.controls, tr.controls);
    }

    #[test]
    fn stroboscopic_grid_checks() {
        let sys = example_system();
        let tr = integrate_bilinear(
            &sys,
            &[ControlSignal::zero()],
            &Vector::from_vec(vec![1., 0., 0.]),
            0.0,
            4.0,
            1.0 / 16.0,
            8,
        )
        .unwrap();
        let s = sample_stroboscopic(&tr, 1.0, 4).unwrap();
        assert_eq!(s.len(), 17);
        assert_abs_diff_eq!(s.dt, 0.25, epsilon = 1e-15);
        assert!(matches!(
            sample_stroboscopic(&tr, 1.0, 3),
            Err(Error::SamplingGrid(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let sys = example_system();
        let tr = integrate_bilinear(
            &sys,
            &[ControlSignal::pure_tone(1.1, 1.0)],
            &Vector::from_vec(vec![0., 0., 1.]),
            0.0,
            1.0,
            1.0 / 16.0,
            16,
        )
        .unwrap();
        let tr = add_noise(
            &tr,
            &NoiseModel {
                sigma: 0.01,
                seed: 3,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = BlochTrajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.states, tr.states);
        assert_eq!(back.controls, tr.controls);
        assert_eq!(back.times, tr.times);
        assert_eq!(back.meta, tr.meta);
    }
}
