//! C bindings for predopt. Handles are opaque pointers owned by the
//! caller and released with the matching `_free` function; every fallible
//! call returns a [`PredoptStatus`] and leaves a human-readable message
//! for [`predopt_last_error_message`] on failure. Solutions and
//! predictions are written into caller-provided buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use predopt::knapsack::KnapsackData;
use predopt::model::load_checkpoint;
use predopt::scheduling::parse_instance;
use predopt::{
    regret, Error, LinearModel, OptInstance, OracleHandle, OracleSpec, WarmstartPolicy,
};

/// Result of every fallible call. `PREDOPT_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredoptStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments were structurally invalid (bad instance data, unknown
    /// oracle string, malformed id).
    InvalidArgument = 2,
    /// A buffer length did not match the instance or model dimension.
    DimensionMismatch = 3,
    Infeasible = 4,
    Unbounded = 5,
    /// An iteration or node limit was hit before an answer existed.
    LimitReached = 6,
    /// The oracle cannot solve this problem family.
    Unsupported = 7,
    ParseError = 8,
    IoError = 9,
    /// A panic was caught at the language boundary.
    InternalError = 10,
}

pub struct PredoptInstance(OptInstance);

pub struct PredoptOracle(OracleHandle);

pub struct PredoptModel(LinearModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PredoptStatus {
    match err {
        Error::DimensionMismatch { .. } => PredoptStatus::DimensionMismatch,
        Error::Infeasible => PredoptStatus::Infeasible,
        Error::Unbounded => PredoptStatus::Unbounded,
        Error::IterationLimit(_) | Error::NodeLimit { .. } => PredoptStatus::LimitReached,
        Error::OracleUnsupported { .. } => PredoptStatus::Unsupported,
        Error::Parse { .. } | Error::Checkpoint(_) => PredoptStatus::ParseError,
        Error::Read { .. } | Error::Write { .. } | Error::Io(_) | Error::Csv(_) => {
            PredoptStatus::IoError
        }
        _ => PredoptStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> PredoptStatus {
    let status = status_of(&err);
    remember(&err.to_string());
    status
}

fn fail_null(what: &str) -> PredoptStatus {
    remember(&format!("{what} must not be null"));
    PredoptStatus::NullArgument
}

fn guarded(body: impl FnOnce() -> PredoptStatus) -> PredoptStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            remember("internal panic");
            PredoptStatus::InternalError
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, PredoptStatus> {
    if ptr.is_null() {
        return Err(fail_null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        remember(&format!("{what} is not valid UTF-8"));
        PredoptStatus::InvalidArgument
    })
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; never free
/// it.
#[no_mangle]
pub extern "C" fn predopt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a 0-1 knapsack instance (a maximization) from item weights and a
/// capacity.
///
/// # Safety
/// `weights` must point to `n_items` readable values, `id` must be a valid
/// C string, and `out` must be a writable pointer slot. On success the slot
/// receives a handle to release with [`predopt_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn predopt_knapsack_new(
    weights: *const u32,
    n_items: usize,
    capacity: u32,
    id: *const c_char,
    out: *mut *mut PredoptInstance,
) -> PredoptStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        if weights.is_null() {
            return fail_null("weights");
        }
        let id = match read_str(id, "id") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let weights = std::slice::from_raw_parts(weights, n_items).to_vec();
        match OptInstance::knapsack(id, KnapsackData { weights, capacity }) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(PredoptInstance(instance)));
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Create a scheduling instance (a minimization over per-period energy
/// prices) from the plain-text instance format.
///
/// # Safety
/// `text` and `id` must be valid C strings and `out` a writable pointer
/// slot. On success the slot receives a handle to release with
/// [`predopt_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn predopt_scheduling_new(
    text: *const c_char,
    id: *const c_char,
    out: *mut *mut PredoptInstance,
) -> PredoptStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let text = match read_str(text, "text") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let id = match read_str(id, "id") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let built = parse_instance(text, "scheduling text")
            .and_then(|inst| OptInstance::scheduling(id, inst));
        match built {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(PredoptInstance(instance)));
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Derive an instance with a new id that shares the original's constraint
/// structure, so one oracle's caches serve both.
///
/// # Safety
/// `instance` must be a live handle from this library, `id` a valid C
/// string, and `out` a writable pointer slot. On success the slot receives
/// a handle to release with [`predopt_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn predopt_instance_share(
    instance: *const PredoptInstance,
    id: *const c_char,
    out: *mut *mut PredoptInstance,
) -> PredoptStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let Some(instance) = instance.as_ref() else {
            return fail_null("instance");
        };
        let id = match read_str(id, "id") {
            Ok(s) => s,
            Err(status) => return status,
        };
        *out = Box::into_raw(Box::new(PredoptInstance(instance.0.share(id))));
        PredoptStatus::Ok
    })
}

/// Length of the instance's coefficient vector, or 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn predopt_instance_coeff_len(instance: *const PredoptInstance) -> usize {
    match instance.as_ref() {
        Some(instance) => instance.0.coeff_len(),
        None => 0,
    }
}

/// Release an instance handle. Null is ignored.
///
/// # Safety
/// `instance` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn predopt_instance_free(instance: *mut PredoptInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Create an oracle. `spec` is `exact`, `greedy`, `relax`, or `mip:GAP`
/// (e.g. `mip:0.05`); the three flags enable basis reuse, incumbent
/// seeding, and objective-bound cuts for repeated solves.
///
/// # Safety
/// `spec` must be a valid C string and `out` a writable pointer slot. On
/// success the slot receives a handle to release with
/// [`predopt_oracle_free`].
#[no_mangle]
pub unsafe extern "C" fn predopt_oracle_new(
    spec: *const c_char,
    reuse_basis: bool,
    seed_incumbent: bool,
    bound_cut: bool,
    out: *mut *mut PredoptOracle,
) -> PredoptStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let spec = match read_str(spec, "spec") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match spec.parse::<OracleSpec>() {
            Ok(spec) => {
                let policy = WarmstartPolicy {
                    reuse_basis,
                    seed_incumbent,
                    bound_cut,
                };
                *out = Box::into_raw(Box::new(PredoptOracle(OracleHandle::with_policy(
                    spec, policy,
                ))));
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Solve an instance under the given objective coefficients. Writes the
/// assignment (one value per coefficient) and the native-sense objective.
///
/// # Safety
/// `oracle` and `instance` must be live handles from this library,
/// `coeffs` and `assignment_out` must point to `len` readable and writable
/// values respectively, and `objective_out` must be writable. `len` must
/// equal [`predopt_instance_coeff_len`].
#[no_mangle]
pub unsafe extern "C" fn predopt_oracle_solve(
    oracle: *const PredoptOracle,
    instance: *const PredoptInstance,
    coeffs: *const f64,
    len: usize,
    assignment_out: *mut f64,
    objective_out: *mut f64,
) -> PredoptStatus {
    guarded(|| {
        let Some(oracle) = oracle.as_ref() else {
            return fail_null("oracle");
        };
        let Some(instance) = instance.as_ref() else {
            return fail_null("instance");
        };
        if coeffs.is_null() {
            return fail_null("coeffs");
        }
        if assignment_out.is_null() {
            return fail_null("assignment_out");
        }
        if objective_out.is_null() {
            return fail_null("objective_out");
        }
        let coeffs = std::slice::from_raw_parts(coeffs, len);
        match oracle.0.solve(&instance.0, coeffs) {
            Ok(solution) => {
                let out = std::slice::from_raw_parts_mut(assignment_out, len);
                out.copy_from_slice(&solution.assignment);
                *objective_out = solution.objective;
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Decision regret of acting on `predicted_coeffs` when `true_coeffs` are
/// the real objective, measured by this oracle.
///
/// # Safety
/// `oracle` and `instance` must be live handles from this library,
/// `true_coeffs` and `predicted_coeffs` must point to `len` readable
/// values, and `regret_out` must be writable. `len` must equal
/// [`predopt_instance_coeff_len`].
#[no_mangle]
pub unsafe extern "C" fn predopt_regret(
    oracle: *const PredoptOracle,
    instance: *const PredoptInstance,
    true_coeffs: *const f64,
    predicted_coeffs: *const f64,
    len: usize,
    regret_out: *mut f64,
) -> PredoptStatus {
    guarded(|| {
        let Some(oracle) = oracle.as_ref() else {
            return fail_null("oracle");
        };
        let Some(instance) = instance.as_ref() else {
            return fail_null("instance");
        };
        if true_coeffs.is_null() {
            return fail_null("true_coeffs");
        }
        if predicted_coeffs.is_null() {
            return fail_null("predicted_coeffs");
        }
        if regret_out.is_null() {
            return fail_null("regret_out");
        }
        let truth = std::slice::from_raw_parts(true_coeffs, len);
        let predicted = std::slice::from_raw_parts(predicted_coeffs, len);
        match regret(&instance.0, truth, predicted, &oracle.0) {
            Ok(value) => {
                *regret_out = value;
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release an oracle handle. Null is ignored.
///
/// # Safety
/// `oracle` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn predopt_oracle_free(oracle: *mut PredoptOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Load a linear model from a checkpoint file written by the predopt
/// trainer.
///
/// # Safety
/// `path` must be a valid C string and `out` a writable pointer slot. On
/// success the slot receives a handle to release with
/// [`predopt_model_free`].
#[no_mangle]
pub unsafe extern "C" fn predopt_model_load(
    path: *const c_char,
    out: *mut *mut PredoptModel,
) -> PredoptStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match load_checkpoint(Path::new(path)) {
            Ok((model, _)) => {
                *out = Box::into_raw(Box::new(PredoptModel(model)));
                PredoptStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of features the model expects per slot, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn predopt_model_n_features(model: *const PredoptModel) -> usize {
    match model.as_ref() {
        Some(model) => model.0.n_features(),
        None => 0,
    }
}

/// Predict minimize-sense objective coefficients for `n_slots` rows of
/// `n_features` features, laid out row-major in `features`. Writes
/// `n_slots` values to `out`.
///
/// # Safety
/// `model` must be a live handle from this library, `features` must point
/// to `n_slots * n_features` readable values, and `out` to `n_slots`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn predopt_model_predict(
    model: *const PredoptModel,
    features: *const f64,
    n_slots: usize,
    n_features: usize,
    out: *mut f64,
) -> PredoptStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return fail_null("model");
        };
        if features.is_null() {
            return fail_null("features");
        }
        if out.is_null() {
            return fail_null("out");
        }
        if n_features != model.0.n_features() {
            return fail(Error::DimensionMismatch {
                expected: model.0.n_features(),
                got: n_features,
            });
        }
        let rows = std::slice::from_raw_parts(features, n_slots * n_features);
        let out = std::slice::from_raw_parts_mut(out, n_slots);
        for (slot, target) in out.iter_mut().enumerate() {
            *target = model.0.predict_one(&rows[slot * n_features..(slot + 1) * n_features]);
        }
        PredoptStatus::Ok
    })
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn predopt_model_free(model: *mut PredoptModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
