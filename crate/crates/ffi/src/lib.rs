//! C ABI over the subsight library.
//!
//! Objects cross the boundary as opaque handles created by `*_read`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`SubsightStatus`]; on failure a message is available from
//! [`subsight_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use subsight::evalstat::pearson_r;
use subsight::gridstore::{read_cube, read_samples, DataCube, SampleTable, N_LAYERS};
use subsight::learn::{read_model, Model};
use subsight::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsightStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Dimension = 5,
    Masked = 6,
    UndefinedCorrelation = 7,
    Failed = 8,
    Panic = 9,
}

/// Masked displacement, groundwater or precipitation cube.
pub struct SubsightCube {
    inner: DataCube,
}

/// Sample table: per-cell feature histories and 10-layer targets.
pub struct SubsightSamples {
    inner: SampleTable,
}

/// Fitted tree, forest or recurrent net.
pub struct SubsightModel {
    inner: Model,
}

/// Number of outputs of every model: coarse-grain percent per layer.
pub const SUBSIGHT_N_LAYERS: usize = 10;
const _: () = assert!(SUBSIGHT_N_LAYERS == N_LAYERS);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SubsightStatus {
    match e {
        Error::Io { .. } => SubsightStatus::Io,
        Error::Parse { .. } => SubsightStatus::Parse,
        Error::Dimension(_) | Error::Geometry(_) => SubsightStatus::Dimension,
        Error::Invalid(_) | Error::Config(_) => SubsightStatus::InvalidArgument,
        Error::Masked(_) => SubsightStatus::Masked,
        Error::UndefinedCorrelation(_) => SubsightStatus::UndefinedCorrelation,
        Error::Context { source, .. } => status_of(source),
        _ => SubsightStatus::Failed,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (SubsightStatus, String)>) -> SubsightStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SubsightStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            SubsightStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SubsightStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SubsightStatus, String) {
    (SubsightStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, (SubsightStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| (SubsightStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
    Ok(Path::new(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SubsightStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SubsightStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn subsight_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn subsight_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a cube file. On success `*out_cube` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_cube` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_cube_read(path: *const c_char, out_cube: *mut *mut SubsightCube) -> SubsightStatus {
    guard(|| {
        let slot = out(out_cube, "out_cube")?;
        *slot = ptr::null_mut();
        let cube = read_cube(path_arg(path)?).map_err(lib)?;
        *slot = Box::into_raw(Box::new(SubsightCube { inner: cube }));
        Ok(())
    })
}

/// Releases a cube handle; null is ignored.
///
/// # Safety
/// `cube` must come from `subsight_cube_read` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn subsight_cube_free(cube: *mut SubsightCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Grid rows, columns and epochs of a cube.
///
/// # Safety
/// `cube` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_cube_dims(
    cube: *const SubsightCube,
    n_rows: *mut usize,
    n_cols: *mut usize,
    n_epochs: *mut usize,
) -> SubsightStatus {
    guard(|| {
        let c = &handle(cube, "cube")?.inner;
        let g = c.geometry();
        *out(n_rows, "n_rows")? = g.n_rows;
        *out(n_cols, "n_cols")? = g.n_cols;
        *out(n_epochs, "n_epochs")? = c.n_epochs();
        Ok(())
    })
}

/// Value at (`cell`, `epoch`); masked entries return `Masked`.
///
/// # Safety
/// `cube` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_cube_value(
    cube: *const SubsightCube,
    cell: usize,
    epoch: usize,
    value: *mut f64,
) -> SubsightStatus {
    guard(|| {
        let c = &handle(cube, "cube")?.inner;
        let v = out(value, "value")?;
        *v = c.get(cell, epoch).map_err(lib)?;
        Ok(())
    })
}

/// Reads a sample table. On success `*out_samples` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_samples` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_samples_read(
    path: *const c_char,
    out_samples: *mut *mut SubsightSamples,
) -> SubsightStatus {
    guard(|| {
        let slot = out(out_samples, "out_samples")?;
        *slot = ptr::null_mut();
        let t = read_samples(path_arg(path)?).map_err(lib)?;
        *slot = Box::into_raw(Box::new(SubsightSamples { inner: t }));
        Ok(())
    })
}

/// Releases a sample-table handle; null is ignored.
///
/// # Safety
/// `samples` must come from `subsight_samples_read` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn subsight_samples_free(samples: *mut SubsightSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Row and feature counts of a sample table.
///
/// # Safety
/// `samples` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_samples_dims(
    samples: *const SubsightSamples,
    n_rows: *mut usize,
    n_features: *mut usize,
) -> SubsightStatus {
    guard(|| {
        let t = &handle(samples, "samples")?.inner;
        *out(n_rows, "n_rows")? = t.len();
        *out(n_features, "n_features")? = t.n_features();
        Ok(())
    })
}

/// Copies row `row`'s features into `features` (length `n_features`) and
/// its 10 targets into `targets`. Either buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn subsight_samples_row(
    samples: *const SubsightSamples,
    row: usize,
    features: *mut f64,
    n_features: usize,
    targets: *mut f64,
) -> SubsightStatus {
    guard(|| {
        let t = &handle(samples, "samples")?.inner;
        let r = t.rows().get(row).ok_or_else(|| {
            (SubsightStatus::InvalidArgument, format!("row {row} out of range ({} rows)", t.len()))
        })?;
        if !features.is_null() {
            if n_features != r.features.len() {
                return Err((
                    SubsightStatus::Dimension,
                    format!("buffer holds {n_features} features, row has {}", r.features.len()),
                ));
            }
            std::slice::from_raw_parts_mut(features, n_features).copy_from_slice(&r.features);
        }
        if !targets.is_null() {
            std::slice::from_raw_parts_mut(targets, N_LAYERS).copy_from_slice(&r.targets);
        }
        Ok(())
    })
}

/// Reads a model file. On success `*out_model` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_model_read(path: *const c_char, out_model: *mut *mut SubsightModel) -> SubsightStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let m = read_model(path_arg(path)?).map_err(lib)?;
        *slot = Box::into_raw(Box::new(SubsightModel { inner: m }));
        Ok(())
    })
}

/// Releases a model handle; null is ignored.
///
/// # Safety
/// `model` must come from `subsight_model_read` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn subsight_model_free(model: *mut SubsightModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature-vector length the model expects.
///
/// # Safety
/// `model` must be a live handle; `n_features` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_model_n_features(model: *const SubsightModel, n_features: *mut usize) -> SubsightStatus {
    guard(|| {
        *out(n_features, "n_features")? = handle(model, "model")?.inner.n_features();
        Ok(())
    })
}

/// Predicts coarse-grain percent for 10 layers from one feature vector.
///
/// # Safety
/// `features` must hold `n_features` doubles and `out_percent` 10.
#[no_mangle]
pub unsafe extern "C" fn subsight_model_predict(
    model: *const SubsightModel,
    features: *const f64,
    n_features: usize,
    out_percent: *mut f64,
) -> SubsightStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        if features.is_null() {
            return Err(null("features"));
        }
        if out_percent.is_null() {
            return Err(null("out_percent"));
        }
        let x = std::slice::from_raw_parts(features, n_features);
        let p = m.predict_percent(x).map_err(lib)?;
        std::slice::from_raw_parts_mut(out_percent, N_LAYERS).copy_from_slice(&p);
        Ok(())
    })
}

/// Sample Pearson correlation of two arrays of length `n`.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `r` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subsight_pearson_r(x: *const f64, y: *const f64, n: usize, r: *mut f64) -> SubsightStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("input array"));
        }
        let (xs, ys) = (std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n));
        *out(r, "r")? = pearson_r(xs, ys).map_err(lib)?;
        Ok(())
    })
}
