//! NAPES on records with missing samples.
//!
//! A gapped record alternates known and missing runs. The spectrum is first
//! estimated from the known data alone ([`init_step1a`] when enough
//! complete snapshots exist, else [`init_step1b`] on a zero-filled copy).
//! [`cyclic_optimize`] then alternates two exact block minimizations of
//!
//! ```text
//! J = Σ_k Σ_t |H_k^* Y(t) − α_k x_t e^{iω_k t}|²
//! ```
//!
//! over the missing samples ([`estimate_missing`]) and over the per-frequency
//! pairs `(H_k, α_k)` ([`reestimate`]), so `J` never increases.

use rayon::prelude::*;

use crate::error::{NapesError, Result};
use crate::linalg::{hermitian_solve, CMatrix, CVector, HermitianSolveConfig, C64};
use crate::snapshot::{data_matrix, ComplexSignal, FrequencyGrid, SnapshotPlan};
use crate::spectral1d::{
    check_reference, fit_objective, spectrum, NoiseReference, SnapshotSet, Spectrum1D,
};

/// A run of consecutive samples that are all known or all missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub known: bool,
}

/// Known samples `Y_a`, the known-sample mask and the full-length reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedSignal {
    mask: Vec<bool>,
    known: Vec<C64>,
    noise: NoiseReference,
}

impl SegmentedSignal {
    /// Keeps `y` at the positions where `mask` is true; other values are ignored.
    pub fn from_mask(y: &ComplexSignal, mask: &[bool], noise: NoiseReference) -> Result<Self> {
        if mask.len() != y.len() {
            return Err(NapesError::shape(
                format!("mask of length {}", y.len()),
                mask.len(),
            ));
        }
        check_reference(&noise, y.len())?;
        if y.is_empty() {
            return Err(NapesError::InvalidSegments("record is empty".into()));
        }
        let known = y
            .as_slice()
            .iter()
            .zip(mask)
            .filter(|(_, &k)| k)
            .map(|(z, _)| *z)
            .collect();
        Ok(SegmentedSignal {
            mask: mask.to_vec(),
            known,
            noise,
        })
    }

    /// Builds from alternating run lengths `N_1, N_2, …` (first run known)
    /// and the known samples in order.
    pub fn from_segments(lengths: &[usize], known: Vec<C64>, noise: NoiseReference) -> Result<Self> {
        if lengths.contains(&0) {
            return Err(NapesError::InvalidSegments("segment lengths must be positive".into()));
        }
        let mut mask = Vec::new();
        for (i, &len) in lengths.iter().enumerate() {
            mask.extend(std::iter::repeat(i % 2 == 0).take(len));
        }
        let expected = mask.iter().filter(|k| **k).count();
        if known.len() != expected {
            return Err(NapesError::shape(
                format!("{expected} known samples"),
                known.len(),
            ));
        }
        check_reference(&noise, mask.len())?;
        if mask.is_empty() {
            return Err(NapesError::InvalidSegments("record is empty".into()));
        }
        Ok(SegmentedSignal { mask, known, noise })
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn known_values(&self) -> &[C64] {
        &self.known
    }

    pub fn noise(&self) -> &NoiseReference {
        &self.noise
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for (i, &k) in self.mask.iter().enumerate() {
            match out.last_mut() {
                Some(s) if s.known == k => s.len += 1,
                _ => out.push(Segment {
                    start: i,
                    len: 1,
                    known: k,
                }),
            }
        }
        out
    }

    /// `N_1, …, N_P`. A record that starts with a gap gets a leading zero so
    /// odd positions (1-based) stay known.
    pub fn segment_lengths(&self) -> Vec<usize> {
        let segs = self.segments();
        let mut out = Vec::with_capacity(segs.len() + 1);
        if segs.first().is_some_and(|s| !s.known) {
            out.push(0);
        }
        out.extend(segs.iter().map(|s| s.len));
        out
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.mask[i]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|k| !**k).count()
    }

    pub fn zero_filled(&self) -> ComplexSignal {
        self.complete(&CVector::zeros(self.missing_count()))
            .expect("zero vector has the missing count")
    }

    /// The full record with `y_u` written into the missing positions.
    pub fn complete(&self, y_u: &CVector) -> Result<ComplexSignal> {
        if y_u.dim() != self.missing_count() {
            return Err(NapesError::shape(self.missing_count(), y_u.dim()));
        }
        let mut known = self.known.iter();
        let mut unknown = y_u.iter();
        Ok(ComplexSignal::new(
            self.mask
                .iter()
                .map(|&k| if k { *known.next().unwrap() } else { *unknown.next().unwrap() })
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GappedConfig {
    /// Initial filter length; `None` means `⌊N/2⌋`.
    pub m0: Option<usize>,
    /// Filter length for the cycles; `None` reuses the initialization's.
    pub m: Option<usize>,
    pub grid: FrequencyGrid,
    /// Stop once no missing sample and no amplitude moves by more than this.
    pub delta: f64,
    pub max_iter: usize,
    pub solve: HermitianSolveConfig,
}

impl GappedConfig {
    pub fn new(grid: FrequencyGrid) -> Self {
        GappedConfig {
            m0: None,
            m: None,
            grid,
            delta: 1e-6,
            max_iter: 100,
            solve: HermitianSolveConfig::default(),
        }
    }
}

/// Which initialization produced the starting spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStep {
    /// Snapshots taken entirely inside known segments.
    KnownSegments,
    /// Missing samples replaced by zeros, filter length `⌊N/2⌋`.
    ZeroFilled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub missing_indices: Vec<usize>,
    pub y_u: CVector,
    pub spectrum: Spectrum1D,
    /// `J` after each cycle.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub init: InitStep,
    pub filter_length: usize,
}

/// `Σ_{known k} max(0, N_k − M0 + 1) > M0`.
pub fn feasibility(m0: usize, segments: &SegmentedSignal) -> bool {
    let snapshots: usize = segments
        .segments()
        .iter()
        .filter(|s| s.known)
        .map(|s| (s.len + 1).saturating_sub(m0))
        .sum();
    snapshots > m0
}

/// Initial spectrum from snapshots that lie entirely within known segments.
///
/// Snapshot anchors are absolute sample positions, and each snapshot is
/// weighted by the reference sample at its anchor.
pub fn init_step1a(
    segments: &SegmentedSignal,
    m0: usize,
    grid: &FrequencyGrid,
    cfg: &HermitianSolveConfig,
) -> Result<Spectrum1D> {
    if m0 == 0 || m0 > segments.len() {
        return Err(NapesError::InvalidConfig(format!(
            "initial filter length {m0} must lie in 1..={}",
            segments.len()
        )));
    }
    if !feasibility(m0, segments) {
        return Err(NapesError::InvalidConfig(format!(
            "known segments hold too few complete snapshots for M0={m0}"
        )));
    }
    let y = segments.zero_filled();
    let x = segments.noise().as_slice();
    let mut columns = Vec::new();
    let mut anchors = Vec::new();
    let mut weights = Vec::new();
    for seg in segments.segments().iter().filter(|s| s.known && s.len >= m0) {
        for t in seg.start..seg.start + seg.len - m0 + 1 {
            columns.push(CVector::new(y.as_slice()[t..t + m0].to_vec()));
            anchors.push(t);
            weights.push(x[t]);
        }
    }
    let set = SnapshotSet::new(
        CMatrix::from_columns(&columns)?,
        anchors,
        weights,
        segments.noise().head(m0),
    )?;
    Ok(set.sweep(grid, cfg))
}

/// Initial spectrum from the zero-filled record with `M = ⌊N/2⌋`.
pub fn init_step1b(
    segments: &SegmentedSignal,
    grid: &FrequencyGrid,
    cfg: &HermitianSolveConfig,
) -> Result<Spectrum1D> {
    let n = segments.len();
    let plan = SnapshotPlan::for_length(n, (n / 2).max(1))?;
    spectrum(&segments.zero_filled(), Some(segments.noise()), &plan, grid, cfg)
}

/// L×N banded operator whose row `t` applies `H^*` to `Y(t)`.
pub fn filter_operator(h: &CVector, plan: &SnapshotPlan) -> CMatrix {
    let m = plan.m();
    debug_assert_eq!(h.dim(), m);
    let mut op = CMatrix::zeros(plan.l(), plan.n());
    for t in 0..plan.l() {
        for j in 0..m {
            op[(t, t + j)] = h[j].conj();
        }
    }
    op
}

/// `z_k`, entry `t` is `α_k x_t e^{iω_k t}` for `t < L`.
pub fn target_vector(alpha: C64, x: &NoiseReference, omega: f64, l: usize) -> CVector {
    CVector::from_fn(l, |t| alpha * x.as_slice()[t] * C64::from_polar(1.0, omega * t as f64))
}

/// Splits the operator's columns into those acting on known (`A_k`) and
/// missing (`B_k`) samples.
pub fn split_known_unknown(op: &CMatrix, mask: &[bool]) -> Result<(CMatrix, CMatrix)> {
    if mask.len() != op.cols() {
        return Err(NapesError::shape(op.cols(), mask.len()));
    }
    let known: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let unknown: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let pick = |cols: &[usize]| CMatrix::from_fn(op.rows(), cols.len(), |r, c| op[(r, cols[c])]);
    Ok((pick(&known), pick(&unknown)))
}

/// Per-frequency normal-equation terms `B_k^* B_k` and `B_k^* d_k`, built
/// directly from the band structure of the filtering operator.
fn normal_terms(
    h: &CVector,
    target: &CVector,
    y0: &[C64],
    missing: &[usize],
    plan: &SnapshotPlan,
) -> (CMatrix, CVector) {
    let (m, l) = (plan.m(), plan.l());
    // d_k = z_k − A_k Y_a; the zero-filled record makes the operator act on Y_a only.
    let d: Vec<C64> = (0..l)
        .map(|t| {
            let filtered: C64 = (0..m).map(|j| h[j].conj() * y0[t + j]).sum();
            target[t] - filtered
        })
        .collect();
    // Rows of B_k touching missing sample n are t in [n − m + 1, n] ∩ [0, l).
    let rows = |n: usize| n.saturating_sub(m - 1)..(n + 1).min(l);
    let u = missing.len();
    let mut gram = CMatrix::zeros(u, u);
    let mut rhs = CVector::zeros(u);
    for (a, &na) in missing.iter().enumerate() {
        rhs[a] = rows(na).map(|t| h[na - t] * d[t]).sum();
        for (b, &nb) in missing.iter().enumerate().take(a + 1) {
            if na - nb >= m {
                continue;
            }
            let s: C64 = rows(na)
                .filter(|&t| t <= nb)
                .map(|t| h[na - t] * h[nb - t].conj())
                .sum();
            gram[(a, b)] = s;
            gram[(b, a)] = s.conj();
        }
    }
    (gram, rhs)
}

/// `Y_u = (Σ_k B_k^* B_k)⁻¹ (Σ_k B_k^* d_k)` for the spectrum's filters and
/// amplitudes. Failed frequencies contribute nothing.
pub fn estimate_missing(
    spectrum: &Spectrum1D,
    segments: &SegmentedSignal,
    plan: &SnapshotPlan,
    cfg: &HermitianSolveConfig,
) -> Result<CVector> {
    if plan.n() != segments.len() {
        return Err(NapesError::shape(
            format!("plan for N={}", segments.len()),
            plan.n(),
        ));
    }
    let missing = segments.missing_indices();
    if missing.is_empty() {
        return Ok(CVector::zeros(0));
    }
    if let Some(bad) = spectrum
        .estimates
        .iter()
        .flatten()
        .find(|e| e.h.dim() != plan.m())
    {
        return Err(NapesError::shape(plan.m(), bad.h.dim()));
    }
    let y0 = segments.zero_filled();
    let terms: Vec<(CMatrix, CVector)> = spectrum
        .estimates
        .par_iter()
        .flatten()
        .map(|e| {
            let z = target_vector(e.alpha, segments.noise(), e.omega, plan.l());
            normal_terms(&e.h, &z, y0.as_slice(), &missing, plan)
        })
        .collect();
    let u = missing.len();
    let mut gram = CMatrix::zeros(u, u);
    let mut rhs = CVector::zeros(u);
    for (g, r) in &terms {
        gram = gram.add(g)?;
        rhs = rhs.add(r);
    }
    hermitian_solve(&gram, &rhs, cfg)
}

/// Per-frequency NAPES on the completed record.
pub fn reestimate(
    y_full: &ComplexSignal,
    x: &NoiseReference,
    plan: &SnapshotPlan,
    grid: &FrequencyGrid,
    cfg: &HermitianSolveConfig,
) -> Result<Spectrum1D> {
    spectrum(y_full, Some(x), plan, grid, cfg)
}

/// `J = Σ_k Σ_t |H_k^* Y(t) − α_k x_t e^{iω_k t}|²` over successful frequencies.
pub fn objective(
    y_full: &ComplexSignal,
    x: &NoiseReference,
    spectrum: &Spectrum1D,
    plan: &SnapshotPlan,
) -> Result<f64> {
    let yy = data_matrix(y_full, plan)?;
    check_reference(x, y_full.len())?;
    let mut total = 0.0;
    for e in spectrum.estimates.iter().flatten() {
        if e.h.dim() != plan.m() {
            return Err(NapesError::shape(plan.m(), e.h.dim()));
        }
        total += fit_objective(&yy, Some(x), e.omega, &e.h, e.alpha);
    }
    Ok(total)
}

fn max_change(prev: &Spectrum1D, next: &Spectrum1D, prev_u: &CVector, next_u: &CVector) -> f64 {
    let mut change: f64 = prev_u
        .iter()
        .zip(next_u.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    for (a, b) in prev.estimates.iter().zip(&next.estimates) {
        match (a, b) {
            (Ok(a), Ok(b)) => change = change.max((a.alpha - b.alpha).norm()),
            (Err(_), Err(_)) => {}
            _ => return f64::INFINITY,
        }
    }
    change
}

pub fn cyclic_optimize(segments: &SegmentedSignal, config: &GappedConfig) -> Result<ReconstructionResult> {
    let n = segments.len();
    if n < 2 {
        return Err(NapesError::InvalidConfig("record needs at least 2 samples".into()));
    }
    if !(config.delta > 0.0) {
        return Err(NapesError::InvalidConfig(format!("delta must be positive, got {}", config.delta)));
    }
    if config.max_iter == 0 {
        return Err(NapesError::InvalidConfig("max_iter must be positive".into()));
    }
    let m0 = config.m0.unwrap_or(n / 2);
    if m0 == 0 || m0 > n {
        return Err(NapesError::InvalidConfig(format!("M0={m0} must lie in 1..={n}")));
    }

    let (mut spec, init, m_init) = if feasibility(m0, segments) {
        (init_step1a(segments, m0, &config.grid, &config.solve)?, InitStep::KnownSegments, m0)
    } else {
        (init_step1b(segments, &config.grid, &config.solve)?, InitStep::ZeroFilled, n / 2)
    };
    let m = config.m.unwrap_or(m_init);
    if m == 0 || m > n / 2 {
        return Err(NapesError::InvalidConfig(format!("M={m} must lie in 1..={}", n / 2)));
    }
    let plan = SnapshotPlan::for_length(n, m)?;
    let mut step2_plan = SnapshotPlan::for_length(n, m_init)?;

    let mut y_u = CVector::zeros(segments.missing_count());
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter {
        let next_u = estimate_missing(&spec, segments, &step2_plan, &config.solve)?;
        let y_full = segments.complete(&next_u)?;
        let next_spec = reestimate(&y_full, segments.noise(), &plan, &config.grid, &config.solve)?;
        trace.push(objective(&y_full, segments.noise(), &next_spec, &plan)?);
        let change = max_change(&spec, &next_spec, &y_u, &next_u);
        y_u = next_u;
        spec = next_spec;
        step2_plan = plan;
        if change <= config.delta {
            converged = true;
            break;
        }
    }
    Ok(ReconstructionResult {
        missing_indices: segments.missing_indices(),
        y_u,
        spectrum: spec,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        init,
        filter_length: m,
    })
}
