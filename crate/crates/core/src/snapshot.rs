//! Sliding-window snapshots, data matrices and steering vectors.

use std::f64::consts::TAU;

use crate::error::{NapesError, Result};
use crate::linalg::{kron, CMatrix, CVector, C64};

/// A finite record of complex samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexSignal(Vec<C64>);

impl ComplexSignal {
    pub fn new(samples: Vec<C64>) -> Self {
        ComplexSignal(samples)
    }

    pub fn len(&self) -> usize {
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
}

impl From<Vec<C64>> for ComplexSignal {
    fn from(v: Vec<C64>) -> Self {
        ComplexSignal(v)
    }
}

/// Window geometry: filter length `m`, snapshot count `l`, data length
/// `n = m + l - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotPlan {
    m: usize,
    l: usize,
}

impl SnapshotPlan {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if m == 0 || l == 0 {
            return Err(NapesError::InvalidPlan(format!(
                "filter length and snapshot count must be positive (M={m}, L={l})"
            )));
        }
        Ok(SnapshotPlan { m, l })
    }

    /// Plan for a record of `n` samples filtered with length `m`.
    pub fn for_length(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(NapesError::InvalidPlan(format!(
                "filter length {m} must lie in 1..={n}"
            )));
        }
        SnapshotPlan::new(m, n - m + 1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.m + self.l - 1
    }
}

/// Pair of 1-D plans, one per axis (rows, then columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotPlan2D {
    pub rows: SnapshotPlan,
    pub cols: SnapshotPlan,
}

impl SnapshotPlan2D {
    pub fn new(rows: SnapshotPlan, cols: SnapshotPlan) -> Self {
        SnapshotPlan2D { rows, cols }
    }

    pub fn for_shape(n: usize, n_p: usize, m: usize, m_p: usize) -> Result<Self> {
        Ok(SnapshotPlan2D {
            rows: SnapshotPlan::for_length(n, m)?,
            cols: SnapshotPlan::for_length(n_p, m_p)?,
        })
    }

    /// Length of a vectorized snapshot, `M·M'`.
    pub fn filter_dim(&self) -> usize {
        self.rows.m() * self.cols.m()
    }

    /// Number of snapshots, `L·L'`.
    pub fn snapshot_count(&self) -> usize {
        self.rows.l() * self.cols.l()
    }
}

/// Strictly increasing frequencies in `[0, 2π)`, radians per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(NapesError::InvalidGrid("grid is empty".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(**w >= 0.0 && **w < TAU)) {
            return Err(NapesError::InvalidGrid(format!("{w} is outside [0, 2π)")));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(NapesError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        Ok(FrequencyGrid { omegas })
    }

    /// `ω_k = 2πk/K` for `k = 0..K`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(NapesError::InvalidGrid("grid size must be positive".into()));
        }
        FrequencyGrid::new((0..k).map(|i| TAU * i as f64 / k as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
}

/// `A_K(ω) = (1, e^{iω}, …, e^{i(K-1)ω})^T`.
pub fn steering(omega: f64, k: usize) -> CVector {
    CVector::from_fn(k, |j| C64::from_polar(1.0, j as f64 * omega))
}

/// `A_{P,P'}(ω,ω') = A_{P'}(ω') ⊗ A_P(ω)`; entry `p'·P + p` is `e^{i(pω + p'ω')}`.
pub fn steering2d(omega: f64, omega_p: f64, p: usize, p_p: usize) -> CVector {
    kron(&steering(omega_p, p_p), &steering(omega, p))
}

pub fn snapshot_vector(y: &ComplexSignal, t: usize, m: usize) -> Result<CVector> {
    if m == 0 || t + m > y.len() {
        return Err(NapesError::OutOfRange(format!(
            "window of length {m} at {t} exceeds signal of length {}",
            y.len()
        )));
    }
    Ok(CVector::new(y.as_slice()[t..t + m].to_vec()))
}

/// M×L Hankel matrix whose column `t` is the snapshot starting at `t`.
pub fn data_matrix(y: &ComplexSignal, plan: &SnapshotPlan) -> Result<CMatrix> {
    if y.len() != plan.n() {
        return Err(NapesError::shape(
            format!("signal of length N={}", plan.n()),
            y.len(),
        ));
    }
    let s = y.as_slice();
    Ok(CMatrix::from_fn(plan.m(), plan.l(), |j, t| s[j + t]))
}

/// Column-major vec of the `m × m_p` block of `y` starting at `(t, t_p)`.
pub fn snapshot2d(y: &CMatrix, t: usize, t_p: usize, m: usize, m_p: usize) -> Result<CVector> {
    if m == 0 || m_p == 0 || t + m > y.rows() || t_p + m_p > y.cols() {
        return Err(NapesError::OutOfRange(format!(
            "block {m}x{m_p} at ({t},{t_p}) exceeds {}x{} data",
            y.rows(),
            y.cols()
        )));
    }
    let mut out = Vec::with_capacity(m * m_p);
    for c in t_p..t_p + m_p {
        for r in t..t + m {
            out.push(y[(r, c)]);
        }
    }
    Ok(CVector::new(out))
}
