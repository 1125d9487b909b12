//! C interface to expressdyn: load trained models, predict loudness for a
//! score, and compute sensitivity graphs.
//!
//! Every fallible call returns an [`EdStatus`]. On failure a description is
//! kept per thread and can be read with [`ed_last_error`]. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use expressdyn::basis::build_basis_matrix;
use expressdyn::beat::to_f64;
use expressdyn::config::load_score;
use expressdyn::loudness::{momentary_loudness, normalize_curve, read_wav};
use expressdyn::models::{Model, ModelKind};
use expressdyn::sensitivity::{sd_graph, sensitivity_graph, write_graph_csv, SensitivityGraph};
use expressdyn::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed file contents or score.
    Input = 4,
    Config = 5,
    /// Training diverged or produced non-finite values.
    Numerical = 6,
    /// The caller's buffer is too short; the needed length was written.
    BufferTooSmall = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdModelKind {
    Lin = 0,
    Ffnn = 1,
    Birnn = 2,
}

/// A trained model.
pub struct EdModel {
    model: Model,
}

/// A sensitivity or sensitivity-difference graph: one row per score onset,
/// one column per basis function.
pub struct EdGraph {
    graph: SensitivityGraph,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => EdStatus::Io,
            Error::Config(_) => EdStatus::Config,
            Error::Divergence { .. } => EdStatus::Numerical,
            _ => EdStatus::Input,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EdStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(EdStatus::NullArgument, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(EdStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn model_arg<'a>(m: *const EdModel, what: &str) -> Result<&'a Model, Failure> {
    m.as_ref().map(|h| &h.model).ok_or_else(|| null(what))
}

/// Copies `values` into `out` if it holds them; always reports the length.
unsafe fn fill(values: &[f64], out: *mut f64, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    if values.len() > capacity {
        return Err(Failure(
            EdStatus::BufferTooSmall,
            format!("{} values do not fit in {capacity}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

fn graph_handle(graph: SensitivityGraph) -> Box<EdGraph> {
    let names = graph
        .columns
        .iter()
        .map(|c| CString::new(c.to_string()).unwrap_or_default())
        .collect();
    Box::new(EdGraph { graph, names })
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file written by `expressdyn train` or `fit`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ed_model_load(path: *const c_char, out: *mut *mut EdModel) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let model = Model::load(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(EdModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ed_model_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ed_model_free(model: *mut EdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ed_model_kind(model: *const EdModel, out: *mut EdModelKind) -> EdStatus {
    guard(|| {
        let m = model_arg(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match m.kind() {
            ModelKind::Lin => EdModelKind::Lin,
            ModelKind::Ffnn => EdModelKind::Ffnn,
            ModelKind::Birnn => EdModelKind::Birnn,
        };
        Ok(())
    })
}

/// Predicted normalized loudness at each onset of the score (MusicXML or
/// text dump). Call with `capacity` 0 to learn the length.
///
/// # Safety
/// `out` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_model_predict(
    model: *const EdModel,
    score_path: *const c_char,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EdStatus {
    guard(|| {
        let m = model_arg(model, "model")?;
        let score = load_score(&path_arg(score_path, "score_path")?)?;
        let matrix = build_basis_matrix(&score, &m.fusion)?;
        let y = m.predict(&matrix)?;
        fill(y.as_slice().expect("contiguous"), out, capacity, out_len)
    })
}

/// Sensitivity graph of `model` on a score.
///
/// # Safety
/// `model`, `score_path` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ed_sensitivity(
    model: *const EdModel,
    score_path: *const c_char,
    out: *mut *mut EdGraph,
) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = model_arg(model, "model")?;
        let score = load_score(&path_arg(score_path, "score_path")?)?;
        let graph = sensitivity_graph(m, &build_basis_matrix(&score, &m.fusion)?)?;
        *out = Box::into_raw(graph_handle(graph));
        Ok(())
    })
}

/// Sensitivity of `a` minus that of `b` on one score; positive values mark
/// features that drive loudness more in `a`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_compare(
    a: *const EdModel,
    b: *const EdModel,
    score_path: *const c_char,
    out: *mut *mut EdGraph,
) -> EdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let (ma, mb) = (model_arg(a, "a")?, model_arg(b, "b")?);
        let score = load_score(&path_arg(score_path, "score_path")?)?;
        let sd = sd_graph(ma, mb, &build_basis_matrix(&score, &ma.fusion)?, "a", "b")?;
        *out = Box::into_raw(graph_handle(sd.graph));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_free(graph: *mut EdGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of onsets (rows); 0 for a null graph.
///
/// # Safety
/// `graph` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_steps(graph: *const EdGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.times.len())
}

/// Number of basis functions (columns); 0 for a null graph.
///
/// # Safety
/// `graph` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_columns(graph: *const EdGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.columns.len())
}

/// Name of column `index` as `instrument.feature`, owned by the graph; null
/// when out of range.
///
/// # Safety
/// `graph` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_column_name(graph: *const EdGraph, index: usize) -> *const c_char {
    graph
        .as_ref()
        .and_then(|g| g.names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Onset times in quarter-note beats.
///
/// # Safety
/// `out` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_times(
    graph: *const EdGraph,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EdStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let times: Vec<f64> = g.graph.times.iter().map(|&b| to_f64(b)).collect();
        fill(&times, out, capacity, out_len)
    })
}

/// All values, row-major (onset by basis function).
///
/// # Safety
/// `out` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_values(
    graph: *const EdGraph,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EdStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let values: Vec<f64> = g.graph.data.iter().copied().collect();
        fill(&values, out, capacity, out_len)
    })
}

/// Values of one column in onset order.
///
/// # Safety
/// `out` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_column(
    graph: *const EdGraph,
    index: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EdStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if index >= g.graph.columns.len() {
            return Err(Failure(
                EdStatus::OutOfRange,
                format!("column {index} of {}", g.graph.columns.len()),
            ));
        }
        let values: Vec<f64> = g.graph.data.column(index).to_vec();
        fill(&values, out, capacity, out_len)
    })
}

/// Writes the graph as CSV (`beat` then one column per basis function).
///
/// # Safety
/// `graph` and `path` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ed_graph_write_csv(graph: *const EdGraph, path: *const c_char) -> EdStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        write_graph_csv(&g.graph, &path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Block-wise K-weighted loudness of a WAV file, in LUFS or z-scores when
/// `normalize` is true.
///
/// # Safety
/// `out` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ed_loudness_wav(
    path: *const c_char,
    block: usize,
    hop: usize,
    normalize: bool,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> EdStatus {
    guard(|| {
        let audio = read_wav(&path_arg(path, "path")?)?;
        let mut curve = momentary_loudness(&audio, block, hop)?;
        if normalize {
            curve = normalize_curve(&curve)?;
        }
        fill(&curve.values, out, capacity, out_len)
    })
}
