//! APES and NAPES estimators for 1-D records.
//!
//! For a frequency `ω` both estimators solve
//!
//! ```text
//! min_{H, α} Σ_t |H^* Y(t) − α x_t e^{iωt}|²   subject to   H^* (X_M ∘ A_M(ω)) = 1
//! ```
//!
//! with `x_t ≡ 1` for APES. The closed form is `H = Q⁻¹a / (a^* Q⁻¹ a)`,
//! `α = H^* G`, where `G` is the reference-weighted snapshot average and
//! `Q = R − G G^*`.

use rayon::prelude::*;

use crate::error::{NapesError, Result};
use crate::linalg::{
    hadamard, hermitian_solve, outer, symmetrize, CMatrix, CVector, HermitianSolveConfig,
    SingularPolicy, C64,
};
use crate::snapshot::{data_matrix, steering, ComplexSignal, FrequencyGrid, SnapshotPlan};

/// Known complex modulating sequence, aligned sample-for-sample with the data.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReference(Vec<C64>);

impl NoiseReference {
    pub fn new(x: Vec<C64>) -> Self {
        NoiseReference(x)
    }

    /// `x_t ≡ 1`, which turns NAPES into APES.
    pub fn constant(n: usize) -> Self {
        NoiseReference(vec![C64::new(1.0, 0.0); n])
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

    /// `X_K = (x_0, …, x_{K-1})^T`.
    pub fn head(&self, k: usize) -> CVector {
        CVector::new(self.0[..k].to_vec())
    }

    pub fn scale(&self, c: C64) -> NoiseReference {
        NoiseReference(self.0.iter().map(|x| x * c).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBundle {
    pub r: CMatrix,
    pub g: CVector,
    pub q: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    pub omega: f64,
    pub h: CVector,
    pub alpha: C64,
}

/// One estimate (or the failure that replaced it) per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum1D {
    pub grid: FrequencyGrid,
    pub estimates: Vec<Result<FilterEstimate>>,
}

impl Spectrum1D {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Amplitudes, `None` at failed frequencies.
    pub fn alphas(&self) -> Vec<Option<C64>> {
        self.estimates
            .iter()
            .map(|e| e.as_ref().ok().map(|e| e.alpha))
            .collect()
    }

    pub fn failed_count(&self) -> usize {
        self.estimates.iter().filter(|e| e.is_err()).count()
    }
}

/// A set of snapshots together with the model coefficients that weight them.
///
/// Snapshot `s` has absolute anchor `anchors[s]` (its phase reference) and
/// model coefficient `weights[s]` (the `x_t` multiplying the sinusoid).
#[derive(Debug, Clone)]
pub(crate) struct SnapshotSet {
    snapshots: CMatrix,
    anchors: Vec<usize>,
    weights: Vec<C64>,
    energy: f64,
    r: CMatrix,
    filter_ref: CVector,
}

impl SnapshotSet {
    pub(crate) fn new(
        snapshots: CMatrix,
        anchors: Vec<usize>,
        weights: Vec<C64>,
        filter_ref: CVector,
    ) -> Result<Self> {
        debug_assert_eq!(snapshots.cols(), anchors.len());
        debug_assert_eq!(snapshots.cols(), weights.len());
        debug_assert_eq!(snapshots.rows(), filter_ref.dim());
        let energy: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        if !(energy > 0.0) {
            return Err(NapesError::ZeroNoiseWindow);
        }
        let r = snapshots.gram_rows().scale(C64::new(1.0 / energy, 0.0));
        Ok(SnapshotSet {
            snapshots,
            anchors,
            weights,
            energy,
            r,
            filter_ref,
        })
    }

    /// Contiguous snapshots `t = 0..L` of a record, weighted by `x`
    /// (or by ones for APES).
    pub(crate) fn contiguous(
        y: &ComplexSignal,
        x: Option<&NoiseReference>,
        plan: &SnapshotPlan,
    ) -> Result<Self> {
        let yy = data_matrix(y, plan)?;
        let (weights, filter_ref) = match x {
            Some(x) => {
                check_reference(x, y.len())?;
                (x.as_slice()[..plan.l()].to_vec(), x.head(plan.m()))
            }
            None => (vec![C64::new(1.0, 0.0); plan.l()], CVector::ones(plan.m())),
        };
        SnapshotSet::new(yy, (0..plan.l()).collect(), weights, filter_ref)
    }

    pub(crate) fn m(&self) -> usize {
        self.snapshots.rows()
    }

    #[cfg(test)]
    pub(crate) fn r(&self) -> &CMatrix {
        &self.r
    }

    pub(crate) fn g(&self, omega: f64) -> CVector {
        let m = self.m();
        let mut g = CVector::zeros(m);
        for (s, (&t, w)) in self.anchors.iter().zip(&self.weights).enumerate() {
            let c = w.conj() * C64::from_polar(1.0 / self.energy, -omega * t as f64);
            for j in 0..m {
                g[j] += c * self.snapshots[(j, s)];
            }
        }
        g
    }

    pub(crate) fn bundle(&self, omega: f64) -> Result<CovarianceBundle> {
        let g = self.g(omega);
        let q = self.r.sub(&outer(&g, &g))?;
        Ok(CovarianceBundle {
            r: self.r.clone(),
            g,
            q,
        })
    }

    pub(crate) fn estimate(&self, omega: f64, cfg: &HermitianSolveConfig) -> Result<FilterEstimate> {
        let bundle = self.bundle(omega)?;
        let a = hadamard(&self.filter_ref, &steering(omega, self.m()))?;
        let (h, alpha) = constrained_filter(&bundle.q, &a, &bundle.g, self.r.trace().re, cfg)?;
        Ok(FilterEstimate { omega, h, alpha })
    }

    pub(crate) fn sweep(&self, grid: &FrequencyGrid, cfg: &HermitianSolveConfig) -> Spectrum1D {
        let estimates = grid
            .omegas()
            .par_iter()
            .map(|&w| self.estimate(w, cfg))
            .collect();
        Spectrum1D {
            grid: grid.clone(),
            estimates,
        }
    }
}

/// `H = Q⁻¹a / (a^* Q⁻¹ a)` and `α = H^* G`.
///
/// When `Q` is so close to zero that loading relative to its own trace is
/// lost in rounding (a noiseless exponential), the solve is retried with
/// loading relative to `trace(R)`.
pub(crate) fn constrained_filter(
    q: &CMatrix,
    a: &CVector,
    g: &CVector,
    r_trace: f64,
    cfg: &HermitianSolveConfig,
) -> Result<(CVector, C64)> {
    let s = match hermitian_solve(q, a, cfg) {
        Err(NapesError::SingularMatrix)
            if cfg.singular_policy == SingularPolicy::Load && cfg.loading > 0.0 && r_trace > 0.0 =>
        {
            let shift = cfg.loading * r_trace / q.rows() as f64;
            let mut loaded = symmetrize(q)?;
            for i in 0..q.rows() {
                loaded[(i, i)] += shift;
            }
            hermitian_solve(&loaded, a, cfg)?
        }
        other => other?,
    };
    let denom = a.dot(&s);
    if !(denom.norm() > f64::MIN_POSITIVE) || !denom.is_finite() {
        return Err(NapesError::DegenerateDenominator);
    }
    // a^* Q⁻¹ a is real for Hermitian Q; keep the real part so H^* a = 1 exactly.
    let h = s.scale(C64::new(1.0 / denom.re, 0.0));
    let alpha = h.dot(g);
    Ok((h, alpha))
}

pub(crate) fn check_reference(x: &NoiseReference, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(NapesError::shape(
            format!("noise reference of length {n}"),
            x.len(),
        ));
    }
    Ok(())
}

/// `G(ω) = (1/L) · YY · A_L(ω)^C`.
pub fn apes_g(yy: &CMatrix, omega: f64) -> CVector {
    let l = yy.cols();
    let a = steering(omega, l).conj();
    yy.mul_vec(&a)
        .expect("steering length matches column count")
        .scale(C64::new(1.0 / l as f64, 0.0))
}

/// `G(ω) = (1/‖X_L‖²) · YY · (X_L ∘ A_L(ω))^C`.
pub fn napes_g(yy: &CMatrix, x: &NoiseReference, omega: f64) -> Result<CVector> {
    let l = yy.cols();
    if x.len() < l {
        return Err(NapesError::shape(format!("at least {l} noise samples"), x.len()));
    }
    let xl = x.head(l);
    let energy = xl.norm_sqr();
    if !(energy > 0.0) {
        return Err(NapesError::ZeroNoiseWindow);
    }
    let w = hadamard(&xl, &steering(omega, l))?.conj();
    Ok(yy.mul_vec(&w)?.scale(C64::new(1.0 / energy, 0.0)))
}

/// `R`, `G` and `Q = R − G G^*` at `ω`. `x = None` selects the APES normalizer `1/L`.
pub fn covariance_bundle(
    yy: &CMatrix,
    x: Option<&NoiseReference>,
    omega: f64,
) -> Result<CovarianceBundle> {
    let (g, energy) = match x {
        Some(x) => {
            let g = napes_g(yy, x, omega)?;
            (g, x.head(yy.cols()).norm_sqr())
        }
        None => (apes_g(yy, omega), yy.cols() as f64),
    };
    let r = yy.gram_rows().scale(C64::new(1.0 / energy, 0.0));
    let q = r.sub(&outer(&g, &g))?;
    Ok(CovarianceBundle { r, g, q })
}

pub fn apes_point(
    y: &ComplexSignal,
    plan: &SnapshotPlan,
    omega: f64,
    cfg: &HermitianSolveConfig,
) -> Result<FilterEstimate> {
    SnapshotSet::contiguous(y, None, plan)?.estimate(omega, cfg)
}

pub fn napes_point(
    y: &ComplexSignal,
    x: &NoiseReference,
    plan: &SnapshotPlan,
    omega: f64,
    cfg: &HermitianSolveConfig,
) -> Result<FilterEstimate> {
    SnapshotSet::contiguous(y, Some(x), plan)?.estimate(omega, cfg)
}

/// Sweeps the grid. Solve failures are recorded per frequency.
pub fn spectrum(
    y: &ComplexSignal,
    x: Option<&NoiseReference>,
    plan: &SnapshotPlan,
    grid: &FrequencyGrid,
    cfg: &HermitianSolveConfig,
) -> Result<Spectrum1D> {
    Ok(SnapshotSet::contiguous(y, x, plan)?.sweep(grid, cfg))
}

/// Value of the fitting criterion `Σ_t |H^* Y(t) − α x_t e^{iωt}|²`.
pub fn fit_objective(
    yy: &CMatrix,
    x: Option<&NoiseReference>,
    omega: f64,
    h: &CVector,
    alpha: C64,
) -> f64 {
    (0..yy.cols())
        .map(|t| {
            let filtered = h.dot(&yy.column(t));
            let xt = x.map_or(C64::new(1.0, 0.0), |x| x.as_slice()[t]);
            (filtered - alpha * xt * C64::from_polar(1.0, omega * t as f64)).norm_sqr()
        })
        .sum()
}
