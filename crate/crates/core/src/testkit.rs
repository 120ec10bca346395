//! Synthetic signals and brute-force reference solvers.
//!
//! The KKT oracles solve the constrained fitting problem directly as an
//! equality-constrained least-squares system. Conjugating the residuals
//! makes the unknowns `(H, conj(α))` enter linearly:
//!
//! ```text
//! conj(H^* Y(t) − α m_t) = conj(Y(t))^T H − conj(m_t)·conj(α)
//! ```
//!
//! so with `u = (H, conj(α))` the problem is `min ‖A u‖²` subject to
//! `c^* u = 1`, whose stationarity system is
//! `[A^*A  −c; c^*  0] (u, μ) = (0, 1)`. It is solved by dense LU and never
//! forms the closed-form `G` or `Q`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NapesError, Result};
use crate::gapped::SegmentedSignal;
use crate::linalg::{CMatrix, CVector, C64};
use crate::snapshot::{ComplexSignal, SnapshotPlan, SnapshotPlan2D};
use crate::spectral1d::NoiseReference;
use crate::spectral2d::NoiseReference2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidSpec {
    pub amplitude: C64,
    pub omega: f64,
}

impl SinusoidSpec {
    pub fn new(amplitude: C64, omega: f64) -> Self {
        SinusoidSpec { amplitude, omega }
    }
}

/// How the modulating reference `x_t` is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// `x_t ≡ 1`.
    Constant,
    /// `x_t = e^{iφ_t}` with `φ_t` uniform on `[0, 2π)`.
    UnitModulusRandomPhase { seed: u64 },
    /// `x_t = e^{iθt}` with `θ` uniform on `[0, 2π)`. Unlike independent
    /// phases, this reference satisfies `x_{t+j} = x_t x_j`, so a modulated
    /// sinusoid is reproduced exactly by a single filter at every anchor.
    LinearPhase { seed: u64 },
    Given(Vec<C64>),
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::UnitModulusRandomPhase { seed: 0 }
    }
}

impl NoiseModel {
    pub fn reference(&self, n: usize) -> Result<NoiseReference> {
        match self {
            NoiseModel::Constant => Ok(NoiseReference::constant(n)),
            NoiseModel::UnitModulusRandomPhase { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(unit_phase_reference(&mut rng, n))
            }
            NoiseModel::LinearPhase { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let theta = rng.random_range(0.0..TAU);
                Ok(NoiseReference::new(
                    (0..n).map(|t| C64::from_polar(1.0, theta * t as f64)).collect(),
                ))
            }
            NoiseModel::Given(x) => {
                if x.len() != n {
                    return Err(NapesError::shape(n, x.len()));
                }
                Ok(NoiseReference::new(x.clone()))
            }
        }
    }
}

/// Result of an oracle solve, with its optimality diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub h: CVector,
    pub alpha: C64,
    /// `|c^* u − 1|`.
    pub feasibility_residual: f64,
    /// `‖A^*A u − c μ‖ / (‖A^*A‖·‖u‖)`.
    pub stationarity_residual: f64,
}

/// Minimizes `Σ_t |H^* s_t − α m_t|²` subject to `H^* a = 1`, where `s_t`
/// are the columns of `snapshots` and `m_t` the model sequence.
pub fn kkt_solve(snapshots: &CMatrix, model: &[C64], a: &CVector) -> Result<KktSolution> {
    let m = snapshots.rows();
    let l = snapshots.cols();
    let dim = m + 1;
    let design = DMatrix::from_fn(l, dim, |t, j| {
        if j < m {
            snapshots[(j, t)].conj()
        } else {
            -model[t].conj()
        }
    });
    let gram = design.adjoint() * &design;
    let mut kkt = DMatrix::<C64>::zeros(dim + 1, dim + 1);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(&gram);
    for j in 0..m {
        kkt[(j, dim)] = -a[j];
        kkt[(dim, j)] = a[j].conj();
    }
    let mut rhs = DVector::<C64>::zeros(dim + 1);
    rhs[dim] = C64::new(1.0, 0.0);
    let sol = kkt.lu().solve(&rhs).ok_or(NapesError::SingularSystem)?;
    if sol.iter().any(|z| !z.is_finite()) {
        return Err(NapesError::SingularSystem);
    }

    let u = sol.rows(0, dim).into_owned();
    let mu = sol[dim];
    let mut cvec = DVector::<C64>::zeros(dim);
    for j in 0..m {
        cvec[j] = a[j];
    }
    let feasibility = ((cvec.adjoint() * &u)[(0, 0)] - C64::new(1.0, 0.0)).norm();
    let stationarity = (&gram * &u - &cvec * mu).norm() / (gram.norm() * u.norm()).max(f64::MIN_POSITIVE);
    Ok(KktSolution {
        h: CVector::from_fn(m, |j| u[j]),
        alpha: u[m].conj(),
        feasibility_residual: feasibility,
        stationarity_residual: stationarity,
    })
}

/// Oracle for the 1-D problem on the M×L data matrix `yy`; `x = None` is APES.
pub fn kkt_oracle(
    yy: &CMatrix,
    x: Option<&NoiseReference>,
    omega: f64,
    m: usize,
) -> Result<(CVector, C64)> {
    let s = kkt_oracle_full(yy, x, omega, m)?;
    Ok((s.h, s.alpha))
}

pub fn kkt_oracle_full(
    yy: &CMatrix,
    x: Option<&NoiseReference>,
    omega: f64,
    m: usize,
) -> Result<KktSolution> {
    if yy.rows() != m {
        return Err(NapesError::shape(m, yy.rows()));
    }
    let xs = |t: usize| x.map_or(C64::new(1.0, 0.0), |x| x.as_slice()[t]);
    let model: Vec<C64> = (0..yy.cols())
        .map(|t| xs(t) * C64::new(0.0, omega * t as f64).exp())
        .collect();
    let a = CVector::from_fn(m, |j| xs(j) * C64::new(0.0, omega * j as f64).exp());
    kkt_solve(yy, &model, &a)
}

/// Oracle for the 2-D problem; snapshots are extracted here by direct indexing.
pub fn kkt_oracle_2d(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    omega: f64,
    omega_p: f64,
    m: usize,
    m_p: usize,
) -> Result<(CVector, C64)> {
    let s = kkt_oracle_2d_full(data, x, omega, omega_p, m, m_p)?;
    Ok((s.h, s.alpha))
}

pub fn kkt_oracle_2d_full(
    data: &CMatrix,
    x: Option<&NoiseReference2D>,
    omega: f64,
    omega_p: f64,
    m: usize,
    m_p: usize,
) -> Result<KktSolution> {
    if m == 0 || m_p == 0 || m > data.rows() || m_p > data.cols() {
        return Err(NapesError::OutOfRange(format!("{m}x{m_p} filter")));
    }
    let (l, l_p) = (data.rows() - m + 1, data.cols() - m_p + 1);
    let xs = |r: usize, c: usize| x.map_or(C64::new(1.0, 0.0), |x| x.matrix()[(r, c)]);
    let phase = |r: usize, c: usize| C64::new(0.0, omega * r as f64 + omega_p * c as f64).exp();
    let mut snaps = CMatrix::zeros(m * m_p, l * l_p);
    let mut model = Vec::with_capacity(l * l_p);
    let mut col = 0;
    for t in 0..l {
        for t_p in 0..l_p {
            for c in 0..m_p {
                for r in 0..m {
                    snaps[(c * m + r, col)] = data[(t + r, t_p + c)];
                }
            }
            model.push(xs(t, t_p) * phase(t, t_p));
            col += 1;
        }
    }
    let mut a = CVector::zeros(m * m_p);
    for c in 0..m_p {
        for r in 0..m {
            a[c * m + r] = xs(r, c) * phase(r, c);
        }
    }
    kkt_solve(&snaps, &model, &a)
}

pub fn unit_phase_reference<R: Rng + ?Sized>(rng: &mut R, n: usize) -> NoiseReference {
    NoiseReference::new(
        (0..n)
            .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect(),
    )
}

/// `y_t = Σ_j a_j x_t e^{iω_j t} + e_t`, with `e_t` circular complex Gaussian.
///
/// `residual_snr_db` sets the residual power relative to the mean power of
/// the noiseless part; `None` (or a zero noiseless part) adds no residual.
pub fn gen_signal(
    specs: &[SinusoidSpec],
    noise_model: &NoiseModel,
    n: usize,
    residual_snr_db: Option<f64>,
    seed: u64,
) -> Result<(ComplexSignal, NoiseReference)> {
    if n == 0 {
        return Err(NapesError::InvalidConfig("signal length must be positive".into()));
    }
    if let Some(s) = specs
        .iter()
        .find(|s| !s.amplitude.is_finite() || !s.omega.is_finite())
    {
        return Err(NapesError::InvalidConfig(format!("non-finite sinusoid {s:?}")));
    }
    let x = noise_model.reference(n)?;
    let mut y: Vec<C64> = (0..n)
        .map(|t| {
            let sum: C64 = specs
                .iter()
                .map(|s| s.amplitude * C64::from_polar(1.0, s.omega * t as f64))
                .sum();
            sum * x.as_slice()[t]
        })
        .collect();
    let power = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    if let Some(db) = residual_snr_db {
        if !db.is_finite() {
            return Err(NapesError::InvalidConfig(format!("invalid SNR {db}")));
        }
        if power > 0.0 {
            let sigma = (power / 10f64.powf(db / 10.0) / 2.0).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            for z in &mut y {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += C64::new(re * sigma, im * sigma);
            }
        }
    }
    Ok((ComplexSignal::new(y), x))
}

/// Marks the samples covered by `gaps` (pairs of start and length) as missing.
pub fn drop_segments(
    y: &ComplexSignal,
    x: &NoiseReference,
    gaps: &[(usize, usize)],
) -> Result<SegmentedSignal> {
    let n = y.len();
    let mut mask = vec![true; n];
    for &(start, len) in gaps {
        if len == 0 || start + len > n {
            return Err(NapesError::InvalidSegments(format!(
                "gap ({start}, {len}) is empty or exceeds length {n}"
            )));
        }
        for known in &mut mask[start..start + len] {
            if !*known {
                return Err(NapesError::InvalidSegments(format!(
                    "gap ({start}, {len}) overlaps another gap"
                )));
            }
            *known = false;
        }
    }
    SegmentedSignal::from_mask(y, &mask, x.clone())
}

/// Random complex data of length `m + l - 1` with a unit-modulus reference.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    l: usize,
) -> (ComplexSignal, NoiseReference, SnapshotPlan) {
    let n = m + l - 1;
    let y = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let x = unit_phase_reference(rng, n);
    (ComplexSignal::new(y), x, SnapshotPlan::new(m, l).expect("positive sizes"))
}

/// 2-D analogue of [`random_instance`] for filter `(M, M')` and snapshot counts `(L, L')`.
pub fn random_instance_2d<R: Rng + ?Sized>(
    rng: &mut R,
    filter: (usize, usize),
    counts: (usize, usize),
) -> (CMatrix, NoiseReference2D, SnapshotPlan2D) {
    let plan = SnapshotPlan2D::new(
        SnapshotPlan::new(filter.0, counts.0).expect("positive sizes"),
        SnapshotPlan::new(filter.1, counts.1).expect("positive sizes"),
    );
    let (n, n_p) = (plan.rows.n(), plan.cols.n());
    let data = CMatrix::from_fn(n, n_p, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let x = CMatrix::from_fn(n, n_p, |_, _| {
        C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    });
    (data, NoiseReference2D::new(x), plan)
}
