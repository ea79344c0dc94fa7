//! Operator bases, structure constants and the real Bloch-vector form of
//! Hamiltonian and GKSL dynamics.
//!
//! With a traceless Hermitian basis `σ_j` satisfying `Tr(σ_j σ_k) = g0 δ_jk`
//! the state is `ρ = 𝟙/N + Σ_j x_j σ_j / g0` with `x_j = Tr(ρ σ_j)`.
//! Everything downstream of this module is real.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, Mat, Vector};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisConvention {
    /// Pauli matrices, `g0 = 2`. Qubits only.
    StandardPauli,
    /// Generalized Gell-Mann matrices scaled to `g0 = 1`.
    Orthonormal,
}

/// The three Pauli matrices `σ1, σ2, σ3`.
pub fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMat::from_row_slice(2, 2, &[z, one, one, z]),
        CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        CMat::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// Generalized Gell-Mann matrices with `Tr(λ_j λ_k) = 2 δ_jk`.
///
/// Ordering: for each column index `k = 1..N-1`, the symmetric and
/// antisymmetric pair for every row `j < k`, then the k-th diagonal
/// element. For `N = 2` this yields `σ1, σ2, σ3`.
fn gell_mann(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n - 1);
    for k in 1..n {
        for j in 0..k {
            let mut s = CMat::zeros(n, n);
            s[(j, k)] = c(1.0, 0.0);
            s[(k, j)] = c(1.0, 0.0);
            out.push(s);
            let mut a = CMat::zeros(n, n);
            a[(j, k)] = c(0.0, -1.0);
            a[(k, j)] = c(0.0, 1.0);
            out.push(a);
        }
        let kf = k as f64;
        let scale = (2.0 / (kf * (kf + 1.0))).sqrt();
        let mut d = CMat::zeros(n, n);
        for m in 0..k {
            d[(m, m)] = c(scale, 0.0);
        }
        d[(k, k)] = c(-kf * scale, 0.0);
        out.push(d);
    }
    out
}

fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
fn trace_prod(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Traceless Hermitian operator basis with `Tr(σ_j σ_k) = g0 δ_jk`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    convention: BasisConvention,
    matrices: Vec<CMat>,
    g0: f64,
}

impl HermitianBasis {
    pub fn new(n: usize, convention: BasisConvention) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(format!(
                "Hilbert-space dimension must be at least 2, got {n}"
            )));
        }
        let (matrices, g0) = match convention {
            BasisConvention::StandardPauli => {
                if n != 2 {
                    return Err(Error::UnsupportedConvention(format!(
                        "standard_pauli needs N = 2, got N = {n}"
                    )));
                }
                (pauli().to_vec(), 2.0)
            }
            BasisConvention::Orthonormal => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                (
                    gell_mann(n).into_iter().map(|m| m * c(s, 0.0)).collect(),
                    1.0,
                )
            }
        };
        Ok(HermitianBasis {
            n,
            convention,
            matrices,
            g0,
        })
    }

    pub fn qubit() -> Self {
        Self::new(2, BasisConvention::StandardPauli).expect("qubit basis")
    }

    /// Hilbert-space dimension N.
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Number of basis elements, N² − 1.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn gram_factor(&self) -> f64 {
        self.g0
    }

    pub fn convention(&self) -> BasisConvention {
        self.convention
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    /// `Σ_j coeffs_j σ_j`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<CMat> {
        if coeffs.len() != self.len() {
            return Err(Error::Shape(format!(
                "expected {} basis coefficients, got {}",
                self.len(),
                coeffs.len()
            )));
        }
        let mut out = CMat::zeros(self.n, self.n);
        for (a, s) in coeffs.iter().zip(&self.matrices) {
            out += s * c(*a, 0.0);
        }
        Ok(out)
    }

    /// Real coordinates `Tr(M σ_j)` of a Hermitian operator.
    pub fn project(&self, m: &CMat) -> Vec<f64> {
        self.matrices.iter().map(|s| trace_prod(m, s).re).collect()
    }

    fn check_square(&self, m: &CMat, what: &str) -> Result<()> {
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(Error::Shape(format!(
                "{what} is {}x{}, basis dimension is {}",
                m.nrows(),
                m.ncols(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Commutator and anticommutator structure constants, stored densely with
/// index order `(j, k, l)`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    d: usize,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl StructureConstants {
    /// `[σ_j, σ_k] = i Σ_l f_jkl σ_l`.
    pub fn f(&self, j: usize, k: usize, l: usize) -> f64 {
        self.f[(j * self.d + k) * self.d + l]
    }

    /// `{σ_j, σ_k} = (2 g0 / N) δ_jk 𝟙 + Σ_l g_jkl σ_l`.
    pub fn g(&self, j: usize, k: usize, l: usize) -> f64 {
        self.g[(j * self.d + k) * self.d + l]
    }

    pub fn len(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }
}

/// Structure constants by trace projection:
/// `f_jkl = Tr([σ_j,σ_k] σ_l) / (i g0)`, `g_jkl = Tr({σ_j,σ_k} σ_l) / g0`.
pub fn structure_constants(basis: &HermitianBasis) -> StructureConstants {
    let d = basis.len();
    let s = basis.matrices();
    let mut f = vec![0.0; d * d * d];
    let mut g = vec![0.0; d * d * d];
    for j in 0..d {
        for k in 0..d {
            let jk = &s[j] * &s[k];
            let kj = &s[k] * &s[j];
            let comm = &jk - &kj;
            let anti = jk + kj;
            for l in 0..d {
                let idx = (j * d + k) * d + l;
                f[idx] = (trace_prod(&comm, &s[l]) / c(0.0, basis.g0)).re;
                g[idx] = trace_prod(&anti, &s[l]).re / basis.g0;
            }
        }
    }
    StructureConstants { d, f, g }
}

/// Real affine Bloch generator: `ẋ = L x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedGenerator {
    pub l: Mat,
    pub c: Vector,
}

impl VectorizedGenerator {
    pub fn zeros(d: usize) -> Self {
        VectorizedGenerator {
            l: Mat::zeros(d, d),
            c: Vector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn sum(&self, other: &VectorizedGenerator) -> Result<VectorizedGenerator> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("generator dimensions differ".into()));
        }
        Ok(VectorizedGenerator {
            l: &self.l + &other.l,
            c: &self.c + &other.c,
        })
    }

    pub fn scaled(&self, s: f64) -> VectorizedGenerator {
        VectorizedGenerator {
            l: &self.l * s,
            c: &self.c * s,
        }
    }
}

/// `(L_H)_jk = Σ_l Tr(H σ_l) f_jlk / g0`, reproducing `ρ̇ = −i[H, ρ]`.
pub fn vectorize_hamiltonian(h: &CMat, basis: &HermitianBasis) -> Result<VectorizedGenerator> {
    let sc = structure_constants(basis);
    vectorize_hamiltonian_with(h, basis, &sc)
}

/// As [`vectorize_hamiltonian`] with precomputed structure constants.
pub fn vectorize_hamiltonian_with(
    h: &CMat,
    basis: &HermitianBasis,
    sc: &StructureConstants,
) -> Result<VectorizedGenerator> {
    basis.check_square(h, "hamiltonian")?;
    let herm = hermitian_defect(h);
    if herm > HERMITIAN_TOL {
        return Err(Error::InvalidHamiltonian(format!(
            "not Hermitian (max |H - H†| = {herm:.3e})"
        )));
    }
    let tr = trace(h).norm();
    if tr > TRACE_TOL {
        return Err(Error::InvalidHamiltonian(format!(
            "not traceless (|Tr H| = {tr:.3e})"
        )));
    }
    let d = basis.len();
    let hl = basis.project(h);
    let mut l = Mat::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let mut acc = 0.0;
            for (idx, &hv) in hl.iter().enumerate() {
                acc += hv * sc.f(j, idx, k);
            }
            l[(j, k)] = acc / basis.g0;
        }
    }
    Ok(VectorizedGenerator {
        l,
        c: Vector::zeros(d),
    })
}

/// Apply the GKSL dissipator
/// `D(ρ) = ½ Σ_mn C_mn ([D_m, ρ D_n†] + [D_m ρ, D_n†])` to an operator.
pub fn apply_dissipator(cm: &CMat, d_ops: &[CMat], rho: &CMat) -> CMat {
    let n = rho.nrows();
    let mut out = CMat::zeros(n, n);
    for (m, dm) in d_ops.iter().enumerate() {
        for (k, dk) in d_ops.iter().enumerate() {
            let w = cm[(m, k)];
            if w.norm() == 0.0 {
                continue;
            }
            let dkd = dk.adjoint();
            let jump = dm * rho * &dkd;
            let anti = &dkd * dm;
            let term = &jump * c(2.0, 0.0) - rho * &anti - &anti * rho;
            out += term * (w * 0.5);
        }
    }
    out
}

/// GKSL dissipator in Bloch form, obtained by projecting `D` onto the basis:
/// `(L_D)_jk = Tr(D(σ_k / g0) σ_j)`, `c_j = Tr(D(𝟙/N) σ_j)`.
pub fn vectorize_dissipator(
    cm: &CMat,
    d_ops: &[CMat],
    basis: &HermitianBasis,
) -> Result<VectorizedGenerator> {
    let d = basis.len();
    let n = basis.dimension();
    if cm.nrows() != d_ops.len() || cm.ncols() != d_ops.len() {
        return Err(Error::Shape(format!(
            "coefficient matrix is {}x{} for {} jump operators",
            cm.nrows(),
            cm.ncols(),
            d_ops.len()
        )));
    }
    for op in d_ops {
        basis.check_square(op, "jump operator")?;
        if trace(op).norm() > TRACE_TOL {
            return Err(Error::InvalidDissipator(
                "jump operators must be traceless".into(),
            ));
        }
    }
    for (a, da) in d_ops.iter().enumerate() {
        for (b, db) in d_ops.iter().enumerate() {
            let ip = trace_prod(&da.adjoint(), db);
            let want = if a == b { 1.0 } else { 0.0 };
            if (ip - c(want, 0.0)).norm() > HERMITIAN_TOL {
                return Err(Error::InvalidDissipator(
                    "jump operators must be orthonormal under Tr(A† B)".into(),
                ));
            }
        }
    }
    if hermitian_defect(cm) > HERMITIAN_TOL {
        return Err(Error::InvalidDissipator(
            "coefficient matrix is not Hermitian".into(),
        ));
    }
    if !d_ops.is_empty() {
        let min_ev = SymmetricEigen::new(cm.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -1e-10 {
            return Err(Error::InvalidDissipator(format!(
                "coefficient matrix is not positive semi-definite (min eigenvalue {min_ev:.3e})"
            )));
        }
    }
    let s = basis.matrices();
    let mut l = Mat::zeros(d, d);
    for k in 0..d {
        let rho = &s[k] * c(1.0 / basis.g0, 0.0);
        let out = apply_dissipator(cm, d_ops, &rho);
        for j in 0..d {
            l[(j, k)] = trace_prod(&out, &s[j]).re;
        }
    }
    let mixed = CMat::identity(n, n) * c(1.0 / n as f64, 0.0);
    let out = apply_dissipator(cm, d_ops, &mixed);
    let cv = Vector::from_iterator(d, s.iter().map(|sj| trace_prod(&out, sj).re));
    Ok(VectorizedGenerator { l, c: cv })
}

/// `x_j = Tr(ρ σ_j)`.
pub fn density_to_bloch(rho: &CMat, basis: &HermitianBasis) -> Result<Vector> {
    basis.check_square(rho, "density matrix")?;
    if hermitian_defect(rho) > HERMITIAN_TOL {
        return Err(Error::InvalidState(
            "density matrix is not Hermitian".into(),
        ));
    }
    let tr = trace(rho);
    if (tr - c(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "density matrix trace is {:.12} (expected 1)",
            tr.re
        )));
    }
    Ok(Vector::from_vec(basis.project(rho)))
}

/// `ρ = 𝟙/N + Σ_j x_j σ_j / g0`.
pub fn bloch_to_density(x: &Vector, basis: &HermitianBasis) -> Result<CMat> {
    if x.len() != basis.len() {
        return Err(Error::Shape(format!(
            "Bloch vector has length {}, basis has {} elements",
            x.len(),
            basis.len()
        )));
    }
    let n = basis.dimension();
    let mut rho = CMat::identity(n, n) * c(1.0 / n as f64, 0.0);
    for (xj, s) in x.iter().zip(basis.matrices()) {
        rho += s * c(xj / basis.g0, 0.0);
    }
    Ok(rho)
}

/// Random full-rank density matrix `G G† / Tr(G G†)` with Gaussian `G`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        c(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let rho = &g * g.adjoint();
    let tr = trace(&rho);
    rho / tr
}

/// Random traceless Hermitian matrix with Gaussian entries.
pub fn random_traceless_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        c(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    let shift = trace(&h) / c(n as f64, 0.0);
    h - CMat::identity(n, n) * shift
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram(b: &HermitianBasis) -> Mat {
        let s = b.matrices();
        Mat::from_fn(s.len(), s.len(), |j, k| trace_prod(&s[j], &s[k]).re)
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            HermitianBasis::new(1, BasisConvention::Orthonormal),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            HermitianBasis::new(3, BasisConvention::StandardPauli),
            Err(Error::UnsupportedConvention(_))
        ));
    }

    #[test]
    fn bases_are_traceless_hermitian_and_orthogonal() {
        for (n, conv) in [
            (2, BasisConvention::StandardPauli),
            (2, BasisConvention::Orthonormal),
            (3, BasisConvention::Orthonormal),
            (4, BasisConvention::Orthonormal),
        ] {
            let b = HermitianBasis::new(n, conv).unwrap();
            assert_eq!(b.len(), n * n - 1);
            for s in b.matrices() {
                assert!(trace(s).norm() <= 1e-12);
                assert!(hermitian_defect(s) <= 1e-12);
            }
            let g = gram(&b);
            let expect = Mat::identity(b.len(), b.len()) * b.gram_factor();
            assert!((g - expect).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn orthonormal_qubit_is_scaled_pauli() {
        let b = HermitianBasis::new(2, BasisConvention::Orthonormal).unwrap();
        let p = pauli();
        for (s, q) in b.matrices().iter().zip(p.iter()) {
            let diff = s - q * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            assert!(diff.iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn pauli_structure_constants() {
        let sc = structure_constants(&HermitianBasis::qubit());
        assert_abs_diff_eq!(sc.f(0, 1, 2), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sc.f(1, 0, 2), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sc.f(1, 2, 0), 2.0, epsilon = 1e-14);
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(sc.f(j, j, k), 0.0);
                for l in 0..3 {
                    // Pauli anticommutators have no traceless part.
                    assert_abs_diff_eq!(sc.g(j, k, l), 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn orthonormal_qubit_f123() {
        let b = HermitianBasis::new(2, BasisConvention::Orthonormal).unwrap();
        let sc = structure_constants(&b);
        assert_abs_diff_eq!(sc.f(0, 1, 2), 2.0_f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn anticommutator_identity_term_scales_with_g0() {
        for (n, conv) in [
            (2, BasisConvention::StandardPauli),
            (3, BasisConvention::Orthonormal),
        ] {
            let b = HermitianBasis::new(n, conv).unwrap();
            let sc = structure_constants(&b);
            let s = b.matrices();
            for j in 0..b.len() {
                for k in 0..b.len() {
                    let anti = &s[j] * &s[k] + &s[k] * &s[j];
                    let mut recon = CMat::zeros(n, n);
                    if j == k {
                        recon += CMat::identity(n, n) * c(2.0 * b.gram_factor() / n as f64, 0.0);
                    }
                    for (l, sl) in s.iter().enumerate() {
                        recon += sl * c(sc.g(j, k, l), 0.0);
                    }
                    assert!((anti - recon).iter().all(|z| z.norm() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn hamiltonian_generators_for_pauli_terms() {
        let b = HermitianBasis::qubit();
        let p = pauli();
        let pi = std::f64::consts::PI;
        let lz = vectorize_hamiltonian(&(&p[2] * c(pi, 0.0)), &b).unwrap();
        let rot_z = Mat::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]);
        assert!((lz.l - rot_z * (2.0 * pi)).abs().max() < 1e-14);
        let lx = vectorize_hamiltonian(&p[0], &b).unwrap();
        let rot_x = Mat::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]);
        assert!((lx.l - rot_x * 2.0).abs().max() < 1e-14);
        let l0 = vectorize_hamiltonian(&CMat::zeros(2, 2), &b).unwrap();
        assert_eq!(l0.l, Mat::zeros(3, 3));
    }

    #[test]
    fn hamiltonian_input_validation() {
        let b = HermitianBasis::qubit();
        let non_herm = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(
            vectorize_hamiltonian(&non_herm, &b),
            Err(Error::InvalidHamiltonian(_))
        ));
        assert!(matches!(
            vectorize_hamiltonian(&CMat::identity(2, 2), &b),
            Err(Error::InvalidHamiltonian(_))
        ));
    }

    #[test]
    fn generator_matches_commutator_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let b = HermitianBasis::new(n, BasisConvention::Orthonormal).unwrap();
            let h = random_traceless_hermitian(n, &mut rng);
            let gen = vectorize_hamiltonian(&h, &b).unwrap();
            let rho = random_density(n, &mut rng);
            let x = density_to_bloch(&rho, &b).unwrap();
            let rhodot = (&h * &rho - &rho * &h) * c(0.0, -1.0);
            let xdot = Vector::from_vec(b.project(&rhodot));
            assert!((&gen.l * x - xdot).norm() < 1e-12);
            assert!((&gen.l + gen.l.transpose()).norm() < 1e-10);
        }
    }

    #[test]
    fn pure_state_bloch_vectors() {
        let b = HermitianBasis::qubit();
        let mut up = CMat::zeros(2, 2);
        up[(0, 0)] = c(1.0, 0.0);
        let x = density_to_bloch(&up, &b).unwrap();
        assert!((x - Vector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-15);
        let mixed = CMat::identity(2, 2) * c(0.5, 0.0);
        assert!(density_to_bloch(&mixed, &b).unwrap().norm() < 1e-15);
        assert!(matches!(
            density_to_bloch(&CMat::identity(2, 2), &b),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn density_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = HermitianBasis::qubit();
        for _ in 0..50 {
            let rho = random_density(2, &mut rng);
            let x = density_to_bloch(&rho, &b).unwrap();
            assert!(x.norm() <= 1.0 + 1e-12);
            let back = bloch_to_density(&x, &b).unwrap();
            assert!((back - rho).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn zero_rates_give_zero_dissipator() {
        let b = HermitianBasis::new(2, BasisConvention::Orthonormal).unwrap();
        let ops = b.matrices().to_vec();
        let gen = vectorize_dissipator(&CMat::zeros(3, 3), &ops, &b).unwrap();
        assert_eq!(gen.l, Mat::zeros(3, 3));
        assert_eq!(gen.c, Vector::zeros(3));
    }

    #[test]
    fn rejects_indefinite_rates() {
        let b = HermitianBasis::new(2, BasisConvention::Orthonormal).unwrap();
        let ops = b.matrices().to_vec();
        let mut cm = CMat::zeros(3, 3);
        cm[(0, 0)] = c(-1.0, 0.0);
        assert!(matches!(
            vectorize_dissipator(&cm, &ops, &b),
            Err(Error::InvalidDissipator(_))
        ));
    }
}
