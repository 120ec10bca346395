//! Dense complex vectors and matrices.
//!
//! Conventions: `^*` is the conjugate transpose, norms are Euclidean
//! (Frobenius for matrices), and [`vec`] flattens column-major.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{NapesError, Result};

pub type C64 = Complex64;

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVector(Vec<C64>);

impl CVector {
    pub fn new(entries: Vec<C64>) -> Self {
        CVector(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        CVector(vec![C64::new(0.0, 0.0); dim])
    }

    pub fn ones(dim: usize) -> Self {
        CVector(vec![C64::new(1.0, 0.0); dim])
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> C64) -> Self {
        CVector((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Inner product `self^* · other`.
    pub fn dot(&self, other: &CVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn conj(&self) -> CVector {
        CVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> CVector {
        CVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn add(&self, other: &CVector) -> CVector {
        debug_assert_eq!(self.dim(), other.dim());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        debug_assert_eq!(self.dim(), other.dim());
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl From<Vec<C64>> for CVector {
    fn from(v: Vec<C64>) -> Self {
        CVector(v)
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

/// Dense complex matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NapesError::shape(
                format!("{} entries for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[CVector]) -> Result<Self> {
        let rows = columns.first().map_or(0, CVector::dim);
        if let Some(bad) = columns.iter().find(|c| c.dim() != rows) {
            return Err(NapesError::shape(rows, bad.dim()));
        }
        Ok(CMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> CVector {
        CVector::from_fn(self.rows, |r| self[(r, c)])
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_shape(other)?;
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_shape(other)?;
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn mul_vec(&self, v: &CVector) -> Result<CVector> {
        if v.dim() != self.cols {
            return Err(NapesError::shape(self.cols, v.dim()));
        }
        Ok(CVector::from_fn(self.rows, |r| {
            self.row(r).iter().zip(v.iter()).map(|(a, b)| a * b).sum()
        }))
    }

    pub fn mul_mat(&self, other: &CMatrix) -> Result<CMatrix> {
        if other.rows != self.cols {
            return Err(NapesError::shape(
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    /// `self · self^*`, Hermitian by construction.
    pub fn gram_rows(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let s: C64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b.conj())
                    .sum();
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        out
    }

    fn check_same_shape(&self, other: &CMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NapesError::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Entrywise product for equally shaped operands.
pub trait Hadamard: Sized {
    fn hadamard(&self, other: &Self) -> Result<Self>;
}

impl Hadamard for CVector {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(NapesError::shape(self.dim(), other.dim()));
        }
        Ok(CVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect(),
        ))
    }
}

impl Hadamard for CMatrix {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }
}

pub fn hadamard<T: Hadamard>(a: &T, b: &T) -> Result<T> {
    a.hadamard(b)
}

/// Kronecker product; entry `p·dim(b) + q` is `a_p · b_q`.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    let mut out = Vec::with_capacity(a.dim() * b.dim());
    for ap in a.iter() {
        out.extend(b.iter().map(|bq| ap * bq));
    }
    CVector(out)
}

/// Column-major flattening.
pub fn vec(m: &CMatrix) -> CVector {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for c in 0..m.cols {
        for r in 0..m.rows {
            out.push(m[(r, c)]);
        }
    }
    CVector(out)
}

/// `u · v^*`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    CMatrix::from_fn(u.dim(), v.dim(), |j, k| u[j] * v[k].conj())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPolicy {
    Error,
    Load,
}

/// Controls how [`hermitian_solve`] treats numerically singular systems.
///
/// With [`SingularPolicy::Load`] a system is first solved as given; only if
/// the factorization fails is `loading · trace(Q)/dim · I` added to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianSolveConfig {
    pub loading: f64,
    pub singular_policy: SingularPolicy,
}

impl Default for HermitianSolveConfig {
    fn default() -> Self {
        HermitianSolveConfig {
            loading: 1e-8,
            singular_policy: SingularPolicy::Load,
        }
    }
}

impl HermitianSolveConfig {
    pub fn new(loading: f64, singular_policy: SingularPolicy) -> Result<Self> {
        if !(loading >= 0.0) || !loading.is_finite() {
            return Err(NapesError::InvalidConfig(format!(
                "diagonal loading must be a finite nonnegative number, got {loading}"
            )));
        }
        Ok(HermitianSolveConfig {
            loading,
            singular_policy,
        })
    }
}

const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest admissible Cholesky pivot relative to the largest diagonal entry.
const PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor `L` with `Q = L L^*`, lower triangle row-major.
struct Cholesky {
    n: usize,
    l: Vec<C64>,
}

impl Cholesky {
    fn factor(q: &CMatrix) -> Option<Cholesky> {
        let n = q.rows();
        let max_diag = (0..n).map(|i| q[(i, i)].re.abs()).fold(0.0, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return None;
        }
        let floor = PIVOT_TOL * max_diag;
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = q[(j, j)].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > floor) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = q[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }

    fn solve(&self, b: &CVector) -> CVector {
        let n = self.n;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i].conj() * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        y
    }
}

/// Symmetrizes `q` as `(Q + Q^*)/2` after checking its asymmetry.
pub fn symmetrize(q: &CMatrix) -> Result<CMatrix> {
    if !q.is_square() {
        return Err(NapesError::shape(
            "square matrix",
            format!("{}x{}", q.rows(), q.cols()),
        ));
    }
    let n = q.rows();
    let scale = q.max_abs();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            asym = asym.max((q[(i, j)] - q[(j, i)].conj()).norm());
        }
    }
    let tolerance = HERMITIAN_TOL * scale;
    if asym > tolerance {
        return Err(NapesError::NonHermitian {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| (q[(i, j)] + q[(j, i)].conj()) * 0.5))
}

/// Solves `Q s = b` for Hermitian positive (semi)definite `Q`.
pub fn hermitian_solve(q: &CMatrix, b: &CVector, cfg: &HermitianSolveConfig) -> Result<CVector> {
    let q = symmetrize(q)?;
    if b.dim() != q.rows() {
        return Err(NapesError::shape(q.rows(), b.dim()));
    }
    if q.rows() == 0 {
        return Ok(CVector::zeros(0));
    }
    if let Some(ch) = Cholesky::factor(&q) {
        return Ok(ch.solve(b));
    }
    if cfg.singular_policy == SingularPolicy::Error || cfg.loading == 0.0 {
        return Err(NapesError::SingularMatrix);
    }
    let n = q.rows();
    let shift = cfg.loading * q.trace().re / n as f64;
    if !(shift > 0.0) {
        return Err(NapesError::SingularMatrix);
    }
    let mut loaded = q;
    for i in 0..n {
        loaded[(i, i)] += shift;
    }
    let ch = Cholesky::factor(&loaded).ok_or(NapesError::SingularMatrix)?;
    // Loaded systems are ill-conditioned by construction; one refinement
    // step recovers the residual lost to rounding.
    let s = ch.solve(b);
    let r = b.sub(&loaded.mul_vec(&s)?);
    Ok(s.add(&ch.solve(&r)))
}
