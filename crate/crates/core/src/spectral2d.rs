//! APES and NAPES estimators for 2-D arrays.
//!
//! The filter is an `M×M'` matrix handled through its column-major vec.
//! Snapshots are vecs of `M×M'` blocks, the steering vector is
//! `A_{M,M'}(ω,ω') = A_{M'}(ω') ⊗ A_M(ω)`, and the reference block
//! `X_{M,M'}` is the vec of the top-left `M×M'` block of `x`.

use rayon::prelude::*;

use crate::error::{NapesError, Result};
use crate::linalg::{hadamard, outer, vec, CMatrix, CVector, HermitianSolveConfig, C64};
use crate::snapshot::{snapshot2d, steering2d, FrequencyGrid, SnapshotPlan2D};
use crate::spectral1d::{constrained_filter, CovarianceBundle};

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReference2D(CMatrix);

impl NoiseReference2D {
    pub fn new(x: CMatrix) -> Self {
        NoiseReference2D(x)
    }

    pub fn constant(rows: usize, cols: usize) -> Self {
        NoiseReference2D(CMatrix::from_fn(rows, cols, |_, _| C64::new(1.0, 0.0)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate2D {
    pub omega: f64,
    pub omega_p: f64,
    /// `vec(H)`, length `M·M'`.
    pub h: CVector,
    pub alpha: C64,
}

/// Estimates over the Cartesian grid, row-major: index `i·K' + j` holds
/// `(grid[i], grid_p[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub grid: FrequencyGrid,
    pub grid_p: FrequencyGrid,
    pub estimates: Vec<Result<FilterEstimate2D>>,
}

impl Spectrum2D {
    pub fn get(&self, i: usize, j: usize) -> &Result<FilterEstimate2D> {
        &self.estimates[i * self.grid_p.len() + j]
    }
}

#[derive(Debug, Clone)]
struct SnapshotSet2D {
    plan: SnapshotPlan2D,
    snapshots: CMatrix,
    anchors: Vec<(usize, usize)>,
    weights: Vec<C64>,
    energy: f64,
    r: CMatrix,
    filter_ref: CVector,
}

impl SnapshotSet2D {
    fn new(data: &CMatrix, x: Option<&NoiseReference2D>, plan: &SnapshotPlan2D) -> Result<Self> {
        let (n, n_p) = (plan.rows.n(), plan.cols.n());
        if data.rows() != n || data.cols() != n_p {
            return Err(NapesError::shape(
                format!("{n}x{n_p} data"),
                format!("{}x{}", data.rows(), data.cols()),
            ));
        }
        if let Some(x) = x {
            let xm = x.matrix();
            if xm.rows() != n || xm.cols() != n_p {
                return Err(NapesError::shape(
                    format!("{n}x{n_p} noise reference"),
                    format!("{}x{}", xm.rows(), xm.cols()),
                ));
            }
        }
        let (m, m_p) = (plan.rows.m(), plan.cols.m());
        let mut columns = Vec::with_capacity(plan.snapshot_count());
        let mut anchors = Vec::with_capacity(plan.snapshot_count());
        let mut weights = Vec::with_capacity(plan.snapshot_count());
        for t_p in 0..plan.cols.l() {
            for t in 0..plan.rows.l() {
                columns.push(snapshot2d(data, t, t_p, m, m_p)?);
                anchors.push((t, t_p));
                weights.push(x.map_or(C64::new(1.0, 0.0), |x| x.matrix()[(t, t_p)]));
            }
        }
        let energy: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        if !(energy > 0.0) {
            return Err(NapesError::ZeroNoiseWindow);
        }
        let snapshots = CMatrix::from_columns(&columns)?;
        let r = snapshots.gram_rows().scale(C64::new(1.0 / energy, 0.0));
        let filter_ref = match x {
            Some(x) => snapshot2d(x.matrix(), 0, 0, m, m_p)?,
            None => CVector::ones(m * m_p),
        };
        Ok(SnapshotSet2D {
            plan: *plan,
            snapshots,
            anchors,
            weights,
            energy,
            r,
            filter_ref,
        })
    }

    fn g(&self, omega: f64, omega_p: f64) -> CVector {
        let d = self.snapshots.rows();
        let mut g = CVector::zeros(d);
        for (s, (&(t, t_p), w)) in self.anchors.iter().zip(&self.weights).enumerate() {
            let phase = -(omega * t as f64 + omega_p * t_p as f64);
            let c = w.conj() * C64::from_polar(1.0 / self.energy, phase);
            for j in 0..d {
                g[j] += c * self.snapshots[(j, s)];
            }
        }
        g
    }

    fn bundle(&self, omega: f64, omega_p: f64) -> Result<CovarianceBundle> {
        let g = self.g(omega, omega_p);
        let q = self.r.sub(&outer(&g, &g))?;
        Ok(CovarianceBundle {
            r: self.r.clone(),
            g,
            q,
        })
    }

    fn estimate(&self, omega: f64, omega_p: f64, cfg: &HermitianSolveConfig) -> Result<FilterEstimate2D> {
        let bundle = self.bundle(omega, omega_p)?;
        let steer = steering2d(omega, omega_p, self.plan.rows.m(), self.plan.cols.m());
        let a = hadamard(&self.filter_ref, &steer)?;
        let (h, alpha) = constrained_filter(&bundle.q, &a, &bundle.g, bundle.r.trace().re, cfg)?;
        Ok(FilterEstimate2D {
            omega,
            omega_p,
            h,
            alpha,
        })
    }
}

/// `G(ω,ω')`; `x = None` selects APES with normalizer `1/(L·L')`.
pub fn g2d(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    omega: f64,
    omega_p: f64,
    plan: &SnapshotPlan2D,
) -> Result<CVector> {
    Ok(SnapshotSet2D::new(data, x, plan)?.g(omega, omega_p))
}

pub fn q2d(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    omega: f64,
    omega_p: f64,
    plan: &SnapshotPlan2D,
) -> Result<CovarianceBundle> {
    SnapshotSet2D::new(data, x, plan)?.bundle(omega, omega_p)
}

pub fn napes2d_point(
    data: &CMatrix,
    x: &NoiseReference2D,
    plan: &SnapshotPlan2D,
    omega: f64,
    omega_p: f64,
    cfg: &HermitianSolveConfig,
) -> Result<FilterEstimate2D> {
    SnapshotSet2D::new(data, Some(x), plan)?.estimate(omega, omega_p, cfg)
}

pub fn apes2d_point(
    data: &CMatrix,
    plan: &SnapshotPlan2D,
    omega: f64,
    omega_p: f64,
    cfg: &HermitianSolveConfig,
) -> Result<FilterEstimate2D> {
    SnapshotSet2D::new(data, None, plan)?.estimate(omega, omega_p, cfg)
}

pub fn spectrum2d(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    plan: &SnapshotPlan2D,
    grid: &FrequencyGrid,
    grid_p: &FrequencyGrid,
    cfg: &HermitianSolveConfig,
) -> Result<Spectrum2D> {
    let set = SnapshotSet2D::new(data, x, plan)?;
    let pairs: Vec<(f64, f64)> = grid
        .omegas()
        .iter()
        .flat_map(|&w| grid_p.omegas().iter().map(move |&wp| (w, wp)))
        .collect();
    let estimates = pairs
        .par_iter()
        .map(|&(w, wp)| set.estimate(w, wp, cfg))
        .collect();
    Ok(Spectrum2D {
        grid: grid.clone(),
        grid_p: grid_p.clone(),
        estimates,
    })
}

/// `Σ_{t,t'} |vec(H)^* Y_{t,t'} − α x(t,t') e^{i(ωt+ω't')}|²`.
pub fn fit_objective_2d(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    plan: &SnapshotPlan2D,
    omega: f64,
    omega_p: f64,
    h: &CVector,
    alpha: C64,
) -> Result<f64> {
    let (m, m_p) = (plan.rows.m(), plan.cols.m());
    let mut total = 0.0;
    for t_p in 0..plan.cols.l() {
        for t in 0..plan.rows.l() {
            let filtered = h.dot(&snapshot2d(data, t, t_p, m, m_p)?);
            let xt = x.map_or(C64::new(1.0, 0.0), |x| x.matrix()[(t, t_p)]);
            let model = alpha * xt * C64::from_polar(1.0, omega * t as f64 + omega_p * t_p as f64);
            total += (filtered - model).norm_sqr();
        }
    }
    Ok(total)
}

/// The reference block `X_{M,M'}` in column-major order.
pub fn reference_block(x: &NoiseReference2D, m: usize, m_p: usize) -> Result<CVector> {
    let xm = x.matrix();
    if m > xm.rows() || m_p > xm.cols() {
        return Err(NapesError::OutOfRange(format!(
            "{m}x{m_p} block of {}x{} reference",
            xm.rows(),
            xm.cols()
        )));
    }
    Ok(vec(&CMatrix::from_fn(m, m_p, |r, c| xm[(r, c)])))
}
