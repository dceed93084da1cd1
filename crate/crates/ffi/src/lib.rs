//! C ABI over the kroninfer library.
//!
//! Conventions:
//! - Handles (`KronParams`, `KronSample`, `KronTensor`, `KronResult`) are
//!   opaque; every handle returned by this library must be released with its
//!   matching `*_free` function. `NULL` is returned on failure.
//! - Status-returning functions use [`KronStatus`]; `KRON_STATUS_OK` is zero.
//! - After any failure, `kron_last_error` retrieves a UTF-8 message for the
//!   calling thread.
//! - Fluctuation entries cross the boundary as row-major `mat(X)` values.
//!
//! Safety: pointer arguments must be valid for the stated length (or NULL
//! where documented), handles must originate from this library and must not
//! be used after being freed. Each function's contract is the usual C one
//! implied by its signature; none retain references past the call.
#![allow(clippy::missing_safety_doc)]

use kroninfer::error::KronError;
use kroninfer::graph::{self, InitiatorParams};
use kroninfer::pipeline::{self, InferenceResult};
use kroninfer::solve::SolveConfig;
use kroninfer::tensor::{io as tensor_io, EvenTensor};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result codes for status-returning functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KronStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    CapacityExceeded = 4,
    NumericalFailure = 5,
    IoError = 6,
    Divergence = 7,
    MalformedInput = 8,
    BufferTooSmall = 9,
    InternalPanic = 10,
}

/// Opaque initiator parameters (p, X, m, l, K).
pub struct KronParams(InitiatorParams);
/// Opaque sampled graph.
pub struct KronSample(graph::GraphSample);
/// Opaque dense even-order tensor.
pub struct KronTensor(EvenTensor);
/// Opaque inference result.
pub struct KronResult(InferenceResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn status_of(err: &KronError) -> KronStatus {
    match err {
        KronError::ShapeMismatch { .. } => KronStatus::ShapeMismatch,
        KronError::InvalidParameter(_) => KronStatus::InvalidArgument,
        KronError::CapacityExceeded { .. } => KronStatus::CapacityExceeded,
        KronError::SingularTensor { .. } | KronError::Numerical(_) => KronStatus::NumericalFailure,
        KronError::Divergence { .. } => KronStatus::Divergence,
        KronError::Malformed(_) => KronStatus::MalformedInput,
        KronError::Io(_) => KronStatus::IoError,
    }
}

fn guard_status(body: impl FnOnce() -> KronStatus) -> KronStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            KronStatus::InternalPanic
        }
    }
}

fn guard_ptr<T>(body: impl FnOnce() -> Result<*mut T, KronStatus>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(p)) => p,
        Ok(Err(_)) => ptr::null_mut(),
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

fn fail<T>(err: &KronError) -> Result<T, KronStatus> {
    set_error(&err.to_string());
    Err(status_of(err))
}

fn null_arg<T>(name: &str) -> Result<T, KronStatus> {
    set_error(&format!("null argument: {name}"));
    Err(KronStatus::NullArgument)
}

unsafe fn path_from(ptr: *const c_char) -> Result<&'static Path, KronStatus> {
    if ptr.is_null() {
        return null_arg("path");
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(KronStatus::MalformedInput)
        }
    }
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn kron_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap`). Returns the full message length in
/// bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn kron_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates initiator parameters from row-major `mat(X)` entries
/// (`x_len = (m*l)^2` values). Returns NULL on invalid parameters.
#[no_mangle]
pub unsafe extern "C" fn kron_params_new(
    m: usize,
    l: usize,
    k: u32,
    p: f64,
    x_row_major: *const f64,
    x_len: usize,
) -> *mut KronParams {
    guard_ptr(|| {
        if x_row_major.is_null() {
            return null_arg("x_row_major");
        }
        let q = m * l;
        if x_len != q * q {
            set_error(&format!("x_len must be (m*l)^2 = {}, got {x_len}", q * q));
            return Err(KronStatus::InvalidArgument);
        }
        let values = std::slice::from_raw_parts(x_row_major, x_len);
        let x = match graph::x_from_row_major(m, l, values) {
            Ok(x) => x,
            Err(e) => return fail(&e),
        };
        match InitiatorParams::new(p, x, k) {
            Ok(params) => Ok(Box::into_raw(Box::new(KronParams(params)))),
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn kron_params_free(params: *mut KronParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Flattened graph dimension d = (m*l)^K.
#[no_mangle]
pub unsafe extern "C" fn kron_params_dimension(params: *const KronParams) -> usize {
    if params.is_null() {
        return 0;
    }
    (*params).0.d()
}

/// Samples a graph: Bernoulli draws from the K-th Kronecker power of the
/// initiator, conjugated by a random permutation displacing `permutation_s`
/// labels (0 for the identity).
#[no_mangle]
pub unsafe extern "C" fn kron_sample_generate(
    params: *const KronParams,
    seed: u64,
    permutation_s: usize,
) -> *mut KronSample {
    guard_ptr(|| {
        if params.is_null() {
            return null_arg("params");
        }
        match graph::generate_sample(&(*params).0, seed, permutation_s) {
            Ok(sample) => Ok(Box::into_raw(Box::new(KronSample(sample)))),
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn kron_sample_free(sample: *mut KronSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of sampled edges (nonzero adjacency entries).
#[no_mangle]
pub unsafe extern "C" fn kron_sample_edge_count(sample: *const KronSample) -> u64 {
    if sample.is_null() {
        return 0;
    }
    (*sample)
        .0
        .adjacency
        .data()
        .iter()
        .filter(|&&v| v != 0.0)
        .count() as u64
}

/// Clones the sample's adjacency into a new tensor handle.
#[no_mangle]
pub unsafe extern "C" fn kron_sample_adjacency(sample: *const KronSample) -> *mut KronTensor {
    guard_ptr(|| {
        if sample.is_null() {
            return null_arg("sample");
        }
        Ok(Box::into_raw(Box::new(KronTensor(
            (*sample).0.adjacency.clone(),
        ))))
    })
}

/// Runs the full inference pipeline on a sample. `solver_json` is an
/// optional JSON object with keys method/eta/sparsity/gamma/max_iter/tol;
/// pass NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn kron_infer(
    sample: *const KronSample,
    k: u32,
    solver_json: *const c_char,
) -> *mut KronResult {
    guard_ptr(|| {
        if sample.is_null() {
            return null_arg("sample");
        }
        let config = if solver_json.is_null() {
            SolveConfig::default()
        } else {
            let text = match CStr::from_ptr(solver_json).to_str() {
                Ok(s) => s,
                Err(_) => {
                    set_error("solver_json is not valid UTF-8");
                    return Err(KronStatus::MalformedInput);
                }
            };
            match serde_json::from_str(text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    set_error(&format!("solver_json: {e}"));
                    return Err(KronStatus::MalformedInput);
                }
            }
        };
        match pipeline::infer(&(*sample).0, k, &config, None) {
            Ok(result) => Ok(Box::into_raw(Box::new(KronResult(result)))),
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn kron_result_free(result: *mut KronResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Estimated density parameter p.
#[no_mangle]
pub unsafe extern "C" fn kron_result_p_hat(result: *const KronResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    (*result).0.p_hat
}

/// Copies the row-major entries of `mat(X_hat)` into `out`. Returns the
/// required length; copies only when `cap` is large enough.
#[no_mangle]
pub unsafe extern "C" fn kron_result_x_hat(
    result: *const KronResult,
    out: *mut f64,
    cap: usize,
) -> usize {
    if result.is_null() {
        return 0;
    }
    let r = &(*result).0;
    let q = r.m * r.l;
    let n = q * q;
    if !out.is_null() && cap >= n {
        for b in 0..q {
            for a in 0..q {
                *out.add(a * q + b) = r.x_hat[a + b * q];
            }
        }
    }
    n
}

/// Serializes the result (estimates, diagnostics, metrics) to a JSON string.
/// Free with `kron_string_free`.
#[no_mangle]
pub unsafe extern "C" fn kron_result_json(result: *const KronResult) -> *mut c_char {
    guard_ptr(|| {
        if result.is_null() {
            return null_arg("result");
        }
        let r = &(*result).0;
        let q = r.m * r.l;
        let mut x_row_major = vec![0.0; q * q];
        for b in 0..q {
            for a in 0..q {
                x_row_major[a * q + b] = r.x_hat[a + b * q];
            }
        }
        let value = serde_json::json!({
            "m": r.m,
            "l": r.l,
            "k": r.k,
            "p_hat": r.p_hat,
            "pk_hat": r.denoise.pk_hat,
            "rank_cap": r.denoise.rank_cap,
            "kept": r.denoise.kept,
            "x_hat_row_major": x_row_major,
            "d_hat": r.solve.d_hat,
            "iterations": r.solve.iterations,
            "residual_history": r.solve.residual_history,
            "metrics": r.metrics,
        });
        let text = value.to_string();
        match CString::new(text) {
            Ok(cstr) => Ok(cstr.into_raw()),
            Err(_) => {
                set_error("result JSON contained an interior NUL");
                Err(KronStatus::NumericalFailure)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn kron_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a KTEN1 tensor file.
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_read(path: *const c_char) -> *mut KronTensor {
    guard_ptr(|| {
        let path = path_from(path)?;
        match tensor_io::read_kten1_file(path) {
            Ok(tensor) => Ok(Box::into_raw(Box::new(KronTensor(tensor)))),
            Err(e) => fail(&e),
        }
    })
}

/// Writes a tensor as a KTEN1 file.
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_write(
    tensor: *const KronTensor,
    path: *const c_char,
) -> KronStatus {
    guard_status(|| {
        if tensor.is_null() {
            set_error("null argument: tensor");
            return KronStatus::NullArgument;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match tensor_io::write_kten1_file(path, &(*tensor).0) {
            Ok(()) => KronStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn kron_tensor_free(tensor: *mut KronTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Tensor order (number of modes, row plus column).
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_order(tensor: *const KronTensor) -> usize {
    if tensor.is_null() {
        return 0;
    }
    (*tensor).0.order()
}

/// Copies the mode dimensions (row modes then column modes) into `out`.
/// Returns the required length; copies only when `cap` is large enough.
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_dims(
    tensor: *const KronTensor,
    out: *mut usize,
    cap: usize,
) -> usize {
    if tensor.is_null() {
        return 0;
    }
    let t = &(*tensor).0;
    let dims: Vec<usize> = t
        .row_dims()
        .iter()
        .chain(t.col_dims())
        .copied()
        .collect();
    if !out.is_null() && cap >= dims.len() {
        for (i, d) in dims.iter().enumerate() {
            *out.add(i) = *d;
        }
    }
    dims.len()
}

/// Total entry count.
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_numel(tensor: *const KronTensor) -> usize {
    if tensor.is_null() {
        return 0;
    }
    (*tensor).0.data().len()
}

/// Copies the entries (canonical order) into `out`.
#[no_mangle]
pub unsafe extern "C" fn kron_tensor_copy_data(
    tensor: *const KronTensor,
    out: *mut f64,
    cap: usize,
) -> KronStatus {
    guard_status(|| {
        if tensor.is_null() || out.is_null() {
            set_error("null argument");
            return KronStatus::NullArgument;
        }
        let data = (*tensor).0.data();
        if cap < data.len() {
            set_error(&format!("buffer holds {cap} values, need {}", data.len()));
            return KronStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
        KronStatus::Ok
    })
}
