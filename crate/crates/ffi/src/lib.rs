//! C ABI over saved artifacts: load a structure or model file, inspect it,
//! run predictions.
//!
//! Conventions: every fallible function returns [`EffcodeStatus`] and writes
//! results through out-pointers, which are touched only on `Ok`. Handles are
//! opaque and must be released with their matching `_free` (freeing null is
//! a no-op). After a `Failure`, [`effcode_last_error`] returns a
//! NUL-terminated message that stays valid until the next failing call on
//! the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use effcode::dataio::DataMatrix;
use effcode::netprime::{forward, load_model, NetworkModel};
use effcode::structlearn::{load_structure, StructureStack};

/// Result of every fallible API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffcodeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidString = 2,
    /// The operation itself failed; see `effcode_last_error`.
    Failure = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(msg: String) -> EffcodeStatus {
    let msg = CString::new(msg.replace('\0', "?")).expect("NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    EffcodeStatus::Failure
}

/// Message of the most recent failure on this thread; empty string if none.
/// The pointer is invalidated by the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn effcode_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn effcode_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque handle to a learned structure stack.
pub struct EffcodeStructure(StructureStack);

/// Opaque handle to a trained network model.
pub struct EffcodeModel(NetworkModel);

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn effcode_structure_load(
    path: *const c_char,
    out: *mut *mut EffcodeStructure,
) -> EffcodeStatus {
    if path.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return EffcodeStatus::InvalidString;
    };
    match load_structure(path) {
        Ok(stack) => {
            *out = Box::into_raw(Box::new(EffcodeStructure(stack)));
            EffcodeStatus::Ok
        }
        Err(e) => fail(e.to_string()),
    }
}

/// # Safety
/// `s` must come from `effcode_structure_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn effcode_structure_free(s: *mut EffcodeStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_structure_depth(
    s: *const EffcodeStructure,
    out: *mut usize,
) -> EffcodeStatus {
    if s.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    *out = (*s).0.depth();
    EffcodeStatus::Ok
}

/// Multi-information trace entry `layer` (0 is the whitened input, `depth`
/// the last layer's codes), in nats.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_structure_entropy(
    s: *const EffcodeStructure,
    layer: usize,
    out: *mut f64,
) -> EffcodeStatus {
    if s.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    let stack = &(*s).0;
    match stack.entropy_trace.get(layer) {
        Some(est) => {
            *out = est.value;
            EffcodeStatus::Ok
        }
        None => fail(format!(
            "layer {layer} out of range; trace has {} entries",
            stack.entropy_trace.len()
        )),
    }
}

/// Fraction of retained connections in layer `layer` (0-based).
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_structure_mask_density(
    s: *const EffcodeStructure,
    layer: usize,
    out: *mut f64,
) -> EffcodeStatus {
    if s.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    let stack = &(*s).0;
    match stack.layers.get(layer) {
        Some(l) => {
            *out = l.mask.density();
            EffcodeStatus::Ok
        }
        None => fail(format!(
            "layer {layer} out of range; stack has {} layers",
            stack.depth()
        )),
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_load(
    path: *const c_char,
    out: *mut *mut EffcodeModel,
) -> EffcodeStatus {
    if path.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return EffcodeStatus::InvalidString;
    };
    match load_model(path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(EffcodeModel(model)));
            EffcodeStatus::Ok
        }
        Err(e) => fail(e.to_string()),
    }
}

/// # Safety
/// `m` must come from `effcode_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_free(m: *mut EffcodeModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_classes(
    m: *const EffcodeModel,
    out: *mut usize,
) -> EffcodeStatus {
    if m.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    *out = (*m).0.classes;
    EffcodeStatus::Ok
}

/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_depth(
    m: *const EffcodeModel,
    out: *mut usize,
) -> EffcodeStatus {
    if m.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    *out = (*m).0.layers.len();
    EffcodeStatus::Ok
}

/// Number of raw input features one example must provide.
///
/// # Safety
/// `m` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_input_dim(
    m: *const EffcodeModel,
    out: *mut usize,
) -> EffcodeStatus {
    if m.is_null() || out.is_null() {
        return EffcodeStatus::NullArgument;
    }
    *out = (*m).0.whiten.dim();
    EffcodeStatus::Ok
}

/// Classifies `count` examples stored back to back (`features[j*dim + i]`
/// is feature `i` of example `j`) and writes one class id per example.
/// `dim` must equal `effcode_model_input_dim`.
///
/// # Safety
/// `features` must hold `dim * count` doubles and `out_labels` room for
/// `count` u32 values; `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn effcode_model_predict(
    m: *const EffcodeModel,
    features: *const f64,
    dim: usize,
    count: usize,
    out_labels: *mut u32,
) -> EffcodeStatus {
    if m.is_null() || features.is_null() || out_labels.is_null() {
        return EffcodeStatus::NullArgument;
    }
    if count == 0 {
        return EffcodeStatus::Ok;
    }
    let model = &(*m).0;
    let raw = std::slice::from_raw_parts(features, dim * count);
    let examples = match ndarray::Array2::from_shape_vec((count, dim), raw.to_vec()) {
        Ok(a) => a.reversed_axes(),
        Err(e) => return fail(e.to_string()),
    };
    let x = match DataMatrix::new(examples) {
        Ok(x) => x,
        Err(e) => return fail(e.to_string()),
    };
    let (logits, _) = match forward(model, &x) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let logits = logits.array();
    let out = std::slice::from_raw_parts_mut(out_labels, count);
    for (j, slot) in out.iter_mut().enumerate() {
        let col = logits.column(j);
        let mut best = 0usize;
        for (c, &v) in col.iter().enumerate() {
            if v > col[best] {
                best = c;
            }
        }
        *slot = best as u32;
    }
    EffcodeStatus::Ok
}
