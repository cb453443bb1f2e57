//! C ABI for the `msgod` outlier detector.
//!
//! Every fallible function returns an [`MsgodStatus`]; on failure the
//! message of the last error on the calling thread is available through
//! [`msgod_last_error`]. Datasets and results are opaque handles that must be
//! released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use libc::{c_char, size_t};
use msgod::fusion::Fallback;
use msgod::{Error, MixedDataset, PipelineConfig, PipelineResult, SchemaSource, SmoOptions};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidParameter = 5,
    Computation = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Why the final probabilities equal the fused ones.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgodFallback {
    None = 0,
    EmptyPositive = 1,
    EmptyNegative = 2,
    NotConverged = 3,
    TrainingFailed = 4,
}

/// Pipeline parameters. Obtain sensible defaults from
/// [`msgod_config_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsgodConfig {
    pub delta: f64,
    pub lambda: f64,
    pub contamination: f64,
    pub delta_tw: f64,
    pub c_minus: f64,
    pub smo_tol: f64,
    /// 0 keeps every view.
    pub max_views: size_t,
    pub invert_cost_ratio: bool,
    pub boundary_only: bool,
}

/// Opaque dataset handle.
pub struct MsgodDataset(MixedDataset);

/// Opaque detection result handle.
pub struct MsgodResult(PipelineResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> MsgodStatus {
    match e {
        Error::Io { .. } => MsgodStatus::Io,
        Error::Csv { .. }
        | Error::Arity { .. }
        | Error::Cell { .. }
        | Error::Schema(_)
        | Error::DuplicateLabel { .. } => MsgodStatus::Parse,
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::AttributeOutOfRange { .. }
        | Error::NonFinite(_)
        | Error::NoSamples
        | Error::NoFeatures
        | Error::EmptyInput => MsgodStatus::InvalidParameter,
        _ => MsgodStatus::Computation,
    }
}

struct Failure(MsgodStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MsgodStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsgodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsgodStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MsgodStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map(Path::new).map_err(|_| {
        Failure(
            MsgodStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: size_t) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err(Failure(
            MsgodStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn msgod_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn msgod_config_default() -> MsgodConfig {
    let d = PipelineConfig::default();
    MsgodConfig {
        delta: d.delta,
        lambda: d.lambda,
        contamination: d.contamination,
        delta_tw: d.delta_tw,
        c_minus: d.c_minus,
        smo_tol: d.smo.tol,
        max_views: 0,
        invert_cost_ratio: d.invert_cost_ratio,
        boundary_only: d.rescore_boundary_only,
    }
}

impl From<&MsgodConfig> for PipelineConfig {
    fn from(c: &MsgodConfig) -> Self {
        PipelineConfig {
            delta: c.delta,
            lambda: c.lambda,
            contamination: c.contamination,
            delta_tw: c.delta_tw,
            c_minus: c.c_minus,
            invert_cost_ratio: c.invert_cost_ratio,
            max_views: (c.max_views > 0).then_some(c.max_views),
            rescore_boundary_only: c.boundary_only,
            smo: SmoOptions {
                tol: c.smo_tol,
                ..SmoOptions::default()
            },
            ..PipelineConfig::default()
        }
    }
}

/// Loads a CSV file. `schema_path` may be NULL, in which case column kinds
/// are inferred.
///
/// # Safety
/// `path` and (if non-NULL) `schema_path` must be NUL-terminated strings;
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn msgod_dataset_load(
    path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut MsgodDataset,
) -> MsgodStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let ds = if schema_path.is_null() {
            msgod::load_dataset(path, SchemaSource::Infer)?
        } else {
            let schema = path_arg(schema_path, "schema_path")?;
            msgod::load_dataset(path, SchemaSource::Sidecar(schema))?
        };
        *out = Box::into_raw(Box::new(MsgodDataset(ds)));
        Ok(())
    })
}

/// Builds an all-numerical dataset from a row-major `n_samples × n_features`
/// matrix. `labels` (1 = outlier) may be NULL.
///
/// # Safety
/// `data` must hold `n_samples * n_features` doubles, `labels` (if
/// non-NULL) `n_samples` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgod_dataset_from_rows(
    data: *const f64,
    n_samples: size_t,
    n_features: size_t,
    labels: *const u8,
    out: *mut *mut MsgodDataset,
) -> MsgodStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let total = n_samples.checked_mul(n_features).ok_or_else(|| {
            Failure(
                MsgodStatus::InvalidParameter,
                "matrix size overflows".into(),
            )
        })?;
        let flat = slice_arg(data, total, "data")?;
        let rows: Vec<Vec<f64>> = if n_features == 0 {
            vec![Vec::new(); n_samples]
        } else {
            flat.chunks(n_features).map(<[f64]>::to_vec).collect()
        };
        let labels = if labels.is_null() {
            None
        } else {
            Some(
                slice_arg(labels, n_samples, "labels")?
                    .iter()
                    .map(|&b| b != 0)
                    .collect(),
            )
        };
        let ds = MixedDataset::from_rows(&rows, labels)?;
        *out = Box::into_raw(Box::new(MsgodDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn msgod_dataset_n_samples(ds: *const MsgodDataset) -> size_t {
    ds.as_ref().map_or(0, |d| d.0.n_samples())
}

/// # Safety
/// `ds` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn msgod_dataset_n_features(ds: *const MsgodDataset) -> size_t {
    ds.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `ds` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msgod_dataset_free(ds: *mut MsgodDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs the full detection pipeline. The dataset is normalized internally.
/// `config` may be NULL for defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `config` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msgod_detect(
    ds: *const MsgodDataset,
    config: *const MsgodConfig,
    out: *mut *mut MsgodResult,
) -> MsgodStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config
            .as_ref()
            .map_or_else(PipelineConfig::default, PipelineConfig::from);
        let res = msgod::run_pipeline(&ds.0, &cfg)?;
        *out = Box::into_raw(Box::new(MsgodResult(res)));
        Ok(())
    })
}

/// Number of samples in the result.
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_len(res: *const MsgodResult) -> size_t {
    res.as_ref().map_or(0, |r| r.0.final_probabilities.len())
}

/// Copies the final outlier probabilities into `out` (capacity `len`).
///
/// # Safety
/// `res` must be a live result handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_final(
    res: *const MsgodResult,
    out: *mut f64,
    len: size_t,
) -> MsgodStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.0.final_probabilities, out, len)
    })
}

/// Copies the fused multi-view probabilities into `out` (capacity `len`).
///
/// # Safety
/// `res` must be a live result handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_fused(
    res: *const MsgodResult,
    out: *mut f64,
    len: size_t,
) -> MsgodStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("result"))?;
        copy_out(&r.0.state.fused, out, len)
    })
}

/// Writes each sample's region: 1 positive, 0 boundary, -1 negative.
///
/// # Safety
/// `res` must be a live result handle and `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_regions(
    res: *const MsgodResult,
    out: *mut i8,
    len: size_t,
) -> MsgodStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = r.0.final_probabilities.len();
        if len < n {
            return Err(Failure(
                MsgodStatus::BufferTooSmall,
                format!("buffer holds {len} values, {n} needed"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, n);
        dst.fill(0);
        let regions = &r.0.state.regions;
        for &i in &regions.positive {
            dst[i] = 1;
        }
        for &i in &regions.negative {
            dst[i] = -1;
        }
        Ok(())
    })
}

/// Region thresholds `alpha` (positive) and `beta` (negative).
///
/// # Safety
/// `res` must be a live result handle; `alpha`/`beta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_thresholds(
    res: *const MsgodResult,
    alpha: *mut f64,
    beta: *mut f64,
) -> MsgodStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("result"))?;
        if alpha.is_null() || beta.is_null() {
            return Err(null("alpha/beta"));
        }
        *alpha = r.0.state.alpha;
        *beta = r.0.state.beta;
        Ok(())
    })
}

/// Number of granular views that were fused.
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_view_count(res: *const MsgodResult) -> size_t {
    res.as_ref().map_or(0, |r| r.0.state.per_view.len())
}

/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_fallback(res: *const MsgodResult) -> MsgodFallback {
    use msgod::Region;
    match res.as_ref().and_then(|r| r.0.fallback.as_ref()) {
        None => MsgodFallback::None,
        Some(Fallback::EmptyRegion(Region::Positive)) => MsgodFallback::EmptyPositive,
        Some(Fallback::EmptyRegion(_)) => MsgodFallback::EmptyNegative,
        Some(Fallback::NotConverged) => MsgodFallback::NotConverged,
        Some(Fallback::Training(_)) => MsgodFallback::TrainingFailed,
    }
}

/// # Safety
/// `res` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msgod_result_free(res: *mut MsgodResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Area under the ROC curve of `scores` against `labels` (1 = outlier).
///
/// # Safety
/// `scores` must hold `n` doubles, `labels` `n` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgod_auroc(
    scores: *const f64,
    labels: *const u8,
    n: size_t,
    out: *mut f64,
) -> MsgodStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scores = slice_arg(scores, n, "scores")?;
        let labels: Vec<bool> = slice_arg(labels, n, "labels")?
            .iter()
            .map(|&b| b != 0)
            .collect();
        *out = msgod::auroc(scores, &labels)?;
        Ok(())
    })
}
