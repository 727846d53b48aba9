//! C interface to `implicit_vqa`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns an
//! [`IvqaStatus`]; on failure a message is available from
//! [`ivqa_last_error_message`] on the same thread. Panics are caught and
//! reported as [`IvqaStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use implicit_vqa::experiments::{
    run_entanglement, run_hyperopt, run_susceptibility, Emit, EntanglementConfig,
    EntanglementResult, HyperoptConfig, HyperoptResult, OutputFormat, SusceptibilityConfig,
    SusceptibilityResult,
};
use implicit_vqa::observables::{PauliString, PauliSum};
use implicit_vqa::oracle::entanglement_brute;
use implicit_vqa::statevec::{Gate, GateKind, StateVector};
use implicit_vqa::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvqaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergence = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvqaGate {
    Rx = 0,
    Ry = 1,
    Rz = 2,
    Rot = 3,
    Cz = 4,
    Cnot = 5,
    H = 6,
    Swap = 7,
    Cswap = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvqaPipeline {
    Susceptibility = 0,
    Hyperopt = 1,
    Entanglement = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvqaFormat {
    Json = 0,
    Csv = 1,
}

/// Opaque statevector handle.
pub struct IvqaState(StateVector);

/// Opaque pipeline result handle.
pub struct IvqaResult(PipelineResult);

enum PipelineResult {
    Susceptibility(SusceptibilityResult),
    Hyperopt(HyperoptResult),
    Entanglement(EntanglementResult),
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(IvqaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_non_convergence() {
            IvqaStatus::NonConvergence
        } else if matches!(e, Error::Io(_)) {
            IvqaStatus::Io
        } else {
            IvqaStatus::InvalidArgument
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(IvqaStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(IvqaStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IvqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IvqaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IvqaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

fn gate_kind(g: IvqaGate) -> GateKind {
    match g {
        IvqaGate::Rx => GateKind::RX,
        IvqaGate::Ry => GateKind::RY,
        IvqaGate::Rz => GateKind::RZ,
        IvqaGate::Rot => GateKind::Rot,
        IvqaGate::Cz => GateKind::CZ,
        IvqaGate::Cnot => GateKind::CNOT,
        IvqaGate::H => GateKind::H,
        IvqaGate::Swap => GateKind::SWAP,
        IvqaGate::Cswap => GateKind::CSWAP,
    }
}

fn format_of(f: IvqaFormat) -> OutputFormat {
    match f {
        IvqaFormat::Json => OutputFormat::Json,
        IvqaFormat::Csv => OutputFormat::Csv,
    }
}

// Objects in `patch` replace matching keys recursively; other values replace wholesale.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn config_from<C: Serialize + DeserializeOwned + Default>(json: &str) -> Result<C, Failure> {
    let mut base = serde_json::to_value(C::default()).map_err(Error::from)?;
    if !json.trim().is_empty() {
        let patch: Value =
            serde_json::from_str(json).map_err(|e| invalid(format!("config JSON: {e}")))?;
        if !patch.is_object() {
            return Err(invalid("config JSON must be an object"));
        }
        merge(&mut base, patch);
    }
    let known = serde_json::to_value(C::default()).map_err(Error::from)?;
    if let (Value::Object(b), Value::Object(k)) = (&base, &known) {
        if let Some(extra) = b.keys().find(|key| !k.contains_key(*key)) {
            return Err(invalid(format!("unknown config key {extra:?}")));
        }
    }
    serde_json::from_value(base).map_err(|e| invalid(format!("config JSON: {e}")))
}

impl PipelineResult {
    fn render(&self, format: OutputFormat) -> Result<String, Failure> {
        Ok(match self {
            PipelineResult::Susceptibility(r) => r.render(format)?,
            PipelineResult::Hyperopt(r) => r.render(format)?,
            PipelineResult::Entanglement(r) => r.render(format)?,
        })
    }

    fn summary(&self) -> f64 {
        match self {
            PipelineResult::Susceptibility(r) => r.max_deviation(),
            PipelineResult::Hyperopt(r) => {
                r.validation_losses().last().copied().unwrap_or(f64::NAN)
            }
            PipelineResult::Entanglement(r) => r.final_measure(),
        }
    }
}

/// Message of the most recent failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ivqa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates `|0...0>` on `n_qubits` qubits.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_new(n_qubits: usize, out: *mut *mut IvqaState) -> IvqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let state = StateVector::zero(n_qubits)?;
        *out = Box::into_raw(Box::new(IvqaState(state)));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle from [`ivqa_state_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_free(state: *mut IvqaState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Applies one gate in place.
///
/// # Safety
/// `state` must be a live handle; `targets` and `params` must point to
/// `n_targets` and `n_params` readable elements (either may be null when its
/// length is zero).
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_apply(
    state: *mut IvqaState,
    gate: IvqaGate,
    targets: *const usize,
    n_targets: usize,
    params: *const f64,
    n_params: usize,
) -> IvqaStatus {
    guard(|| {
        let state = out_arg(state, "state")?;
        let targets = slice_arg(targets, n_targets, "targets")?;
        let params = slice_arg(params, n_params, "params")?;
        let g = Gate::new(gate_kind(gate), targets.to_vec(), params.to_vec())?;
        state.0 = state.0.apply(&g)?;
        Ok(())
    })
}

/// `<psi| P |psi>` for a Pauli label such as `"ZZI"` (qubit 0 first).
///
/// # Safety
/// `state` must be a live handle, `label` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_expectation(
    state: *const IvqaState,
    label: *const c_char,
    out: *mut f64,
) -> IvqaStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        let label = str_arg(label, "label")?;
        let out = out_arg(out, "out")?;
        let n = state.0.n_qubits();
        let obs = PauliSum::from_terms(n, vec![PauliString::parse(1.0, label)?])?;
        *out = state.0.expectation(&obs)?;
        Ok(())
    })
}

/// Copies the `2^n` amplitudes into `re` and `im`.
///
/// # Safety
/// `re` and `im` must each have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_amplitudes(
    state: *const IvqaState,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> IvqaStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        let amps = state.0.amplitudes();
        if len != amps.len() {
            return Err(invalid(format!(
                "expected {} amplitudes, buffer holds {len}",
                amps.len()
            )));
        }
        if re.is_null() || im.is_null() {
            return Err(null("amplitude buffer"));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for (k, a) in amps.iter().enumerate() {
            re[k] = a.re;
            im[k] = a.im;
        }
        Ok(())
    })
}

/// Geometric entanglement `1 - max |<product|psi>|^2` by multi-start search.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ivqa_state_entanglement(
    state: *const IvqaState,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> IvqaStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        let out = out_arg(out, "out")?;
        *out = entanglement_brute(&state.0, restarts, seed)?.value;
        Ok(())
    })
}

/// Runs a pipeline. `config_json` holds any subset of the pipeline's config
/// keys (nested objects merge key by key); null or empty means all defaults.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ivqa_run(
    pipeline: IvqaPipeline,
    config_json: *const c_char,
    out: *mut *mut IvqaResult,
) -> IvqaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let json = if config_json.is_null() {
            ""
        } else {
            str_arg(config_json, "config_json")?
        };
        let result = match pipeline {
            IvqaPipeline::Susceptibility => {
                PipelineResult::Susceptibility(run_susceptibility(&config_from::<
                    SusceptibilityConfig,
                >(json)?)?)
            }
            IvqaPipeline::Hyperopt => {
                PipelineResult::Hyperopt(run_hyperopt(&config_from::<HyperoptConfig>(json)?)?)
            }
            IvqaPipeline::Entanglement => PipelineResult::Entanglement(run_entanglement(
                &config_from::<EntanglementConfig>(json)?,
            )?),
        };
        *out = Box::into_raw(Box::new(IvqaResult(result)));
        Ok(())
    })
}

/// Headline number of a result: the maximum susceptibility deviation, the
/// final validation loss, or the final entanglement.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ivqa_result_summary(
    result: *const IvqaResult,
    out: *mut f64,
) -> IvqaStatus {
    guard(|| {
        let result = result.as_ref().ok_or_else(|| null("result"))?;
        *out_arg(out, "out")? = result.0.summary();
        Ok(())
    })
}

/// Renders a result; free the string with [`ivqa_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ivqa_result_render(
    result: *const IvqaResult,
    format: IvqaFormat,
    out: *mut *mut c_char,
) -> IvqaStatus {
    guard(|| {
        let result = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out_arg(out, "out")?;
        let text = result.0.render(format_of(format))?;
        *out = CString::new(text)
            .map_err(|_| invalid("rendered output contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Writes a result to `path`.
///
/// # Safety
/// `result` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ivqa_result_write(
    result: *const IvqaResult,
    path: *const c_char,
    format: IvqaFormat,
) -> IvqaStatus {
    guard(|| {
        let result = result.as_ref().ok_or_else(|| null("result"))?;
        let path = str_arg(path, "path")?;
        let text = result.0.render(format_of(format))?;
        std::fs::write(Path::new(path), text).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`ivqa_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ivqa_result_free(result: *mut IvqaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ivqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
