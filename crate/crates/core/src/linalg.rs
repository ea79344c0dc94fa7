//! Dense linear-algebra helpers shared by the regression and Floquet code.
//!
//! Everything is built on `nalgebra` dynamic matrices. The general complex
//! eigensolver goes through a complex Schur form followed by triangular
//! back-substitution, so eigenvectors are available for non-normal real
//! matrices as well.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type Vector = DVector<f64>;

/// Thin singular value decomposition with singular values sorted in
/// descending order: `m = u * diag(s) * v^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    pub fn new(m: &Mat) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Shape("SVD of an empty matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(
                "SVD input contains non-finite entries".into(),
            ));
        }
        let svd = m.clone().svd(true, true);
        let u = svd
            .u
            .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut uu = Mat::zeros(m.nrows(), k);
        let mut vv = Mat::zeros(m.ncols(), k);
        let mut s = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            s.push(svd.singular_values[src]);
            uu.set_column(dst, &u.column(src));
            vv.set_column(dst, &v_t.row(src).transpose());
        }
        Ok(Svd { u: uu, s, v: vv })
    }

    pub fn max_singular_value(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `rel_tol * s_max`.
    pub fn rank_above(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.max_singular_value();
        self.s.iter().filter(|&&x| x > cut).count()
    }

    pub fn truncate(&self, r: usize) -> Svd {
        let r = r.min(self.s.len());
        Svd {
            u: self.u.columns(0, r).into_owned(),
            s: self.s[..r].to_vec(),
            v: self.v.columns(0, r).into_owned(),
        }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `v * diag(1/s)`.
    pub fn v_sigma_inv(&self) -> Mat {
        let mut out = self.v.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            out.column_mut(j).scale_mut(1.0 / sj);
        }
        out
    }

    pub fn pseudo_inverse(&self) -> Mat {
        self.v_sigma_inv() * self.u.transpose()
    }
}

/// Default numerical-rank tolerance: `max(rows, cols) * eps * s_max`.
pub fn default_rank_tolerance(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Moore-Penrose pseudo-inverse with the standard numerical-rank cutoff.
pub fn pinv(m: &Mat) -> Result<Mat> {
    let svd = Svd::new(m)?;
    let r = svd.rank_above(default_rank_tolerance(m.nrows(), m.ncols()));
    if r == 0 {
        return Ok(Mat::zeros(m.ncols(), m.nrows()));
    }
    Ok(svd.truncate(r).pseudo_inverse())
}

/// Pseudo-inverse of a complex matrix, used for modal coefficients.
pub fn complex_pinv(m: &CMat) -> Result<CMat> {
    let tol = default_rank_tolerance(m.nrows(), m.ncols());
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(tol * smax.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Numerical(e.to_string()))
}

/// 2-norm condition number of a complex matrix (infinite when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let s = m.clone().singular_values();
    let smax = s.max();
    let smin = s.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a general square matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors stored column-wise, in the order of `values`.
    pub vectors: CMat,
}

/// Eigenvalues and eigenvectors of a real square matrix.
pub fn eig(m: &Mat) -> Result<Eigen> {
    eig_complex(&to_complex(m))
}

pub fn eig_complex(m: &CMat) -> Result<Eigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "eig of non-square {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(
            "eig input contains non-finite entries".into(),
        ));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let norm = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let small = norm * f64::EPSILON;

    let mut values = Vec::with_capacity(n);
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        values.push(lambda);
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            y[(j, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.scale_mut(1.0 / nrm);
        }
    }
    Ok(Eigen { values, vectors })
}

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

/// Principal real logarithm of a diagonalizable real matrix with no
/// eigenvalues on the closed negative real axis.
pub fn logm(m: &Mat) -> Result<Mat> {
    let e = eig(m)?;
    let cond = condition_number(&e.vectors);
    if cond > 1e12 {
        return Err(Error::Numerical(format!(
            "logarithm of a (near-)defective matrix, eigenvector condition {cond:.3e}"
        )));
    }
    let mut logs = Vec::with_capacity(e.values.len());
    for &l in &e.values {
        if l.norm() == 0.0 {
            return Err(Error::Numerical("logarithm of a singular matrix".into()));
        }
        logs.push(l.ln());
    }
    let v = &e.vectors;
    let vinv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
    let d = CMat::from_diagonal(&DVector::from_vec(logs));
    let out = v * d * vinv;
    Ok(out.map(|z| z.re))
}

/// Kronecker product of two vectors, `a ⊗ b = [a1 b, a2 b, ...]`.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &ai in a {
        out.extend(b.iter().map(|&bj| ai * bj));
    }
    out
}

/// Stack two matrices with equal column counts vertically.
pub fn vstack(top: &Mat, bottom: &Mat) -> Result<Mat> {
    if top.ncols() != bottom.ncols() {
        return Err(Error::Shape(format!(
            "vstack column mismatch {} vs {}",
            top.ncols(),
            bottom.ncols()
        )));
    }
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    Ok(out)
}

/// Concatenate matrices with equal row counts horizontally.
pub fn hstack(blocks: &[Mat]) -> Result<Mat> {
    let Some(first) = blocks.first() else {
        return Err(Error::InsufficientData("no blocks to concatenate".into()));
    };
    let rows = first.nrows();
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(Error::Shape("hstack row mismatch".into()));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    Ok(out)
}

/// Row-major flattening, the layout used by every serialized matrix.
pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Mat> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!(
            "expected {} entries for {rows}x{cols}, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(Mat::from_row_slice(rows, cols, data))
}
