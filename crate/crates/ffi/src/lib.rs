//! C interface to the `napes` estimators.
//!
//! Results are returned through opaque handles that the caller releases with
//! the matching `*_free` function. Every entry point returns a
//! [`NapesStatus`]; on failure a description is available from
//! [`napes_last_error`] on the same thread. Complex arrays are interleaved
//! `{re, im}` pairs. 2-D arrays are row-major, element `(r, c)` at
//! `r * cols + c`. Frequencies are radians per sample.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use napes::gapped::{cyclic_optimize, GappedConfig, ReconstructionResult, SegmentedSignal};
use napes::spectral1d::spectrum;
use napes::spectral2d::spectrum2d;
use napes::{
    CMatrix, ComplexSignal, FrequencyGrid, HermitianSolveConfig, NapesError, NoiseReference,
    NoiseReference2D, SingularPolicy, SnapshotPlan, SnapshotPlan2D, Spectrum1D, Spectrum2D, C64,
};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NapesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    SingularMatrix = 4,
    NonHermitian = 5,
    DegenerateDenominator = 6,
    ZeroNoiseWindow = 7,
    OutOfRange = 8,
    AllPointsFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NapesComplex {
    pub re: f64,
    pub im: f64,
}

impl From<NapesComplex> for C64 {
    fn from(z: NapesComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

impl From<C64> for NapesComplex {
    fn from(z: C64) -> Self {
        NapesComplex { re: z.re, im: z.im }
    }
}

fn status_of(e: &NapesError) -> NapesStatus {
    match e {
        NapesError::ShapeMismatch { .. } => NapesStatus::ShapeMismatch,
        NapesError::SingularMatrix | NapesError::SingularSystem => NapesStatus::SingularMatrix,
        NapesError::NonHermitian { .. } => NapesStatus::NonHermitian,
        NapesError::DegenerateDenominator => NapesStatus::DegenerateDenominator,
        NapesError::ZeroNoiseWindow => NapesStatus::ZeroNoiseWindow,
        NapesError::OutOfRange(_) => NapesStatus::OutOfRange,
        NapesError::InvalidPlan(_)
        | NapesError::InvalidGrid(_)
        | NapesError::InvalidSegments(_)
        | NapesError::InvalidConfig(_) => NapesStatus::InvalidArgument,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(NapesStatus, String);

impl From<NapesError> for Failure {
    fn from(e: NapesError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: NapesStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NapesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NapesStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            NapesStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(NapesStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn complex_vec(z: &[NapesComplex]) -> Vec<C64> {
    z.iter().map(|&v| v.into()).collect()
}

fn solve_config(loading: f64) -> Result<HermitianSolveConfig, Failure> {
    if !loading.is_finite() {
        return Err(fail(NapesStatus::InvalidArgument, "loading must be finite"));
    }
    let policy = if loading > 0.0 {
        SingularPolicy::Load
    } else {
        SingularPolicy::Error
    };
    Ok(HermitianSolveConfig::new(loading, policy)?)
}

fn default_length(n: usize, requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        (n / 2).min(n.saturating_sub(1)).max(1)
    }
}

/// Grid points of a spectrum with their per-point outcome.
pub struct NapesSpectrum {
    points: Vec<SpectrumPoint>,
}

struct SpectrumPoint {
    omega: f64,
    omega_p: f64,
    alpha: Result<C64, NapesStatus>,
}

impl From<&Spectrum1D> for NapesSpectrum {
    fn from(s: &Spectrum1D) -> Self {
        let points = s
            .grid
            .omegas()
            .iter()
            .zip(&s.estimates)
            .map(|(&omega, e)| SpectrumPoint {
                omega,
                omega_p: 0.0,
                alpha: e.as_ref().map(|e| e.alpha).map_err(status_of),
            })
            .collect();
        NapesSpectrum { points }
    }
}

impl From<&Spectrum2D> for NapesSpectrum {
    fn from(s: &Spectrum2D) -> Self {
        let mut points = Vec::with_capacity(s.estimates.len());
        for (i, &omega) in s.grid.omegas().iter().enumerate() {
            for (j, &omega_p) in s.grid_p.omegas().iter().enumerate() {
                points.push(SpectrumPoint {
                    omega,
                    omega_p,
                    alpha: s.get(i, j).as_ref().map(|e| e.alpha).map_err(status_of),
                });
            }
        }
        NapesSpectrum { points }
    }
}

impl NapesSpectrum {
    fn check_any_ok(&self) -> Result<(), Failure> {
        if self.points.iter().any(|p| p.alpha.is_ok()) {
            Ok(())
        } else {
            Err(fail(NapesStatus::AllPointsFailed, "every grid point failed"))
        }
    }
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// 1-D amplitude spectrum on the uniform grid `2πk/grid_size`.
///
/// `x` may be null for plain APES. `filter_length = 0` selects `n/2`.
/// A non-positive `loading` disables diagonal loading.
///
/// # Safety
/// `y` (and `x` when non-null) must point to `n` values; `out` must be a
/// valid pointer. On success `*out` owns a handle for `napes_spectrum_free`.
#[no_mangle]
pub unsafe extern "C" fn napes_spectrum_1d(
    y: *const NapesComplex,
    x: *const NapesComplex,
    n: usize,
    filter_length: usize,
    grid_size: usize,
    loading: f64,
    out: *mut *mut NapesSpectrum,
) -> NapesStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NapesStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let y = ComplexSignal::new(complex_vec(slice(y, n, "y")?));
        let x = if x.is_null() {
            None
        } else {
            Some(NoiseReference::new(complex_vec(slice(x, n, "x")?)))
        };
        let plan = SnapshotPlan::for_length(n, default_length(n, filter_length))?;
        let grid = FrequencyGrid::uniform(grid_size)?;
        let spec = spectrum(&y, x.as_ref(), &plan, &grid, &solve_config(loading)?)?;
        let handle = NapesSpectrum::from(&spec);
        handle.check_any_ok()?;
        store(out, handle);
        Ok(())
    })
}

/// 2-D amplitude spectrum on the grid `(2πk/grid_size, 2πk'/grid_size_p)`,
/// points ordered with the second frequency varying fastest.
///
/// # Safety
/// `y` (and `x` when non-null) must point to `rows * cols` row-major
/// values; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn napes_spectrum_2d(
    y: *const NapesComplex,
    x: *const NapesComplex,
    rows: usize,
    cols: usize,
    filter_rows: usize,
    filter_cols: usize,
    grid_size: usize,
    grid_size_p: usize,
    loading: f64,
    out: *mut *mut NapesSpectrum,
) -> NapesStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NapesStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(NapesStatus::InvalidArgument, "rows * cols overflows"))?;
        let to_matrix = |v: &[NapesComplex]| CMatrix::from_fn(rows, cols, |r, c| v[r * cols + c].into());
        let data = to_matrix(slice(y, total, "y")?);
        let x = if x.is_null() {
            None
        } else {
            Some(NoiseReference2D::new(to_matrix(slice(x, total, "x")?)))
        };
        let plan = SnapshotPlan2D::for_shape(
            rows,
            cols,
            default_length(rows, filter_rows),
            default_length(cols, filter_cols),
        )?;
        let spec = spectrum2d(
            &data,
            x.as_ref(),
            &plan,
            &FrequencyGrid::uniform(grid_size)?,
            &FrequencyGrid::uniform(grid_size_p)?,
            &solve_config(loading)?,
        )?;
        let handle = NapesSpectrum::from(&spec);
        handle.check_any_ok()?;
        store(out, handle);
        Ok(())
    })
}

/// Number of grid points; 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn napes_spectrum_len(spectrum: *const NapesSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.points.len())
}

/// Reads grid point `index`. Returns the point's own status: `Ok` with the
/// amplitude written to `alpha`, or the reason the estimate failed.
/// Any output pointer may be null.
///
/// # Safety
/// `spectrum` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn napes_spectrum_point(
    spectrum: *const NapesSpectrum,
    index: usize,
    omega: *mut f64,
    omega_p: *mut f64,
    alpha: *mut NapesComplex,
) -> NapesStatus {
    let Some(s) = spectrum.as_ref() else {
        set_last_error("spectrum is null".into());
        return NapesStatus::NullPointer;
    };
    let Some(p) = s.points.get(index) else {
        set_last_error(format!("index {index} out of range for {} points", s.points.len()));
        return NapesStatus::OutOfRange;
    };
    if !omega.is_null() {
        *omega = p.omega;
    }
    if !omega_p.is_null() {
        *omega_p = p.omega_p;
    }
    match p.alpha {
        Ok(a) => {
            if !alpha.is_null() {
                *alpha = a.into();
            }
            NapesStatus::Ok
        }
        Err(status) => status,
    }
}

/// # Safety
/// `spectrum` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn napes_spectrum_free(spectrum: *mut NapesSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Outcome of a gapped-record reconstruction.
pub struct NapesReconstruction {
    result: ReconstructionResult,
    spectrum: NapesSpectrum,
}

/// Reconstructs the samples with `known[i] == 0` and estimates the spectrum.
///
/// `m0 = 0` selects `n/2`; `filter_length = 0` reuses the initialization's
/// length. `y` values at unknown positions are ignored.
///
/// # Safety
/// `y`, `x` and `known` must point to `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruct(
    y: *const NapesComplex,
    x: *const NapesComplex,
    known: *const u8,
    n: usize,
    m0: usize,
    filter_length: usize,
    grid_size: usize,
    delta: f64,
    max_iter: usize,
    loading: f64,
    out: *mut *mut NapesReconstruction,
) -> NapesStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NapesStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let y = ComplexSignal::new(complex_vec(slice(y, n, "y")?));
        let x = NoiseReference::new(complex_vec(slice(x, n, "x")?));
        let mask: Vec<bool> = slice(known, n, "known")?.iter().map(|&k| k != 0).collect();
        let segments = SegmentedSignal::from_mask(&y, &mask, x)?;
        let mut config = GappedConfig::new(FrequencyGrid::uniform(grid_size)?);
        config.m0 = (m0 > 0).then_some(m0);
        config.m = (filter_length > 0).then_some(filter_length);
        config.delta = delta;
        config.max_iter = max_iter;
        config.solve = solve_config(loading)?;
        let result = cyclic_optimize(&segments, &config)?;
        let spectrum = NapesSpectrum::from(&result.spectrum);
        spectrum.check_any_ok()?;
        store(out, NapesReconstruction { result, spectrum });
        Ok(())
    })
}

/// Number of reconstructed samples; 0 for a null handle.
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_missing_len(rec: *const NapesReconstruction) -> usize {
    rec.as_ref().map_or(0, |r| r.result.missing_indices.len())
}

/// Reads reconstructed sample `i`: its position in the record and value.
///
/// # Safety
/// `rec` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_missing(
    rec: *const NapesReconstruction,
    i: usize,
    index: *mut usize,
    value: *mut NapesComplex,
) -> NapesStatus {
    let Some(r) = rec.as_ref() else {
        set_last_error("reconstruction is null".into());
        return NapesStatus::NullPointer;
    };
    let Some(&pos) = r.result.missing_indices.get(i) else {
        set_last_error(format!("sample {i} out of range"));
        return NapesStatus::OutOfRange;
    };
    if !index.is_null() {
        *index = pos;
    }
    if !value.is_null() {
        *value = r.result.y_u[i].into();
    }
    NapesStatus::Ok
}

/// Number of cycles run (length of the objective trace).
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_iterations(rec: *const NapesReconstruction) -> usize {
    rec.as_ref().map_or(0, |r| r.result.iterations)
}

/// Objective value after cycle `cycle` (0-based).
///
/// # Safety
/// `rec` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_objective(
    rec: *const NapesReconstruction,
    cycle: usize,
    value: *mut f64,
) -> NapesStatus {
    let (Some(r), false) = (rec.as_ref(), value.is_null()) else {
        set_last_error("null argument".into());
        return NapesStatus::NullPointer;
    };
    match r.result.objective_trace.get(cycle) {
        Some(&j) => {
            *value = j;
            NapesStatus::Ok
        }
        None => {
            set_last_error(format!("cycle {cycle} out of range"));
            NapesStatus::OutOfRange
        }
    }
}

/// Whether the stopping tolerance was reached before the cycle limit.
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_converged(rec: *const NapesReconstruction) -> bool {
    rec.as_ref().is_some_and(|r| r.result.converged)
}

/// Final spectrum, borrowed from `rec` and valid until `rec` is freed.
///
/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_spectrum(
    rec: *const NapesReconstruction,
) -> *const NapesSpectrum {
    rec.as_ref().map_or(ptr::null(), |r| &r.spectrum as *const NapesSpectrum)
}

/// # Safety
/// `rec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn napes_reconstruction_free(rec: *mut NapesReconstruction) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Static description of a status code; unknown codes get a generic text.
#[no_mangle]
pub extern "C" fn napes_status_message(status: i32) -> *const c_char {
    let s: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"null pointer argument\0",
        2 => b"invalid argument\0",
        3 => b"shape mismatch\0",
        4 => b"matrix is numerically singular\0",
        5 => b"matrix is not Hermitian\0",
        6 => b"constraint denominator vanished\0",
        7 => b"noise reference window has zero energy\0",
        8 => b"index out of range\0",
        9 => b"every grid point failed\0",
        10 => b"internal error\0",
        _ => b"unknown status\0",
    };
    s.as_ptr().cast()
}

/// Detail of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn napes_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
