//! C ABI over the cephforge library.
//!
//! Objects cross the boundary as opaque handles created by `*_load` /
//! `*_default` functions and released with the matching `*_free`. Every
//! function returns a [`CephStatus`]; on failure a description is available
//! from [`ceph_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cephforge::ait::{rasterize, RasterStyle};
use cephforge::anatomy::{measure_angle, validate_landmark_set, AnatomySchema, LandmarkSet};
use cephforge::metrics::radial_errors;
use cephforge::pdg::{generate_prompts, PromptLexicon};
use cephforge::CephError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CephStatus {
    Ok = 0,
    NullPointer = 1,
    Io = 2,
    Parse = 3,
    Invalid = 4,
    Degenerate = 5,
    BufferTooSmall = 6,
    Config = 7,
    Panic = 99,
}

/// Opaque anatomy schema.
pub struct CephSchema(AnatomySchema);

/// Opaque annotated landmark set.
pub struct CephLandmarkSet(LandmarkSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &CephError) -> CephStatus {
    match err {
        CephError::Io { .. } => CephStatus::Io,
        CephError::Parse { .. } => CephStatus::Parse,
        CephError::Degenerate(_) => CephStatus::Degenerate,
        CephError::Config(_) | CephError::Invariant { .. } | CephError::Infeasible(_) => CephStatus::Config,
        _ => CephStatus::Invalid,
    }
}

fn fail(err: CephError) -> CephStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> CephStatus) -> CephStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            CephStatus::Panic
        }
    }
}

macro_rules! nonnull {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return CephStatus::NullPointer;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CephStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CephStatus::Parse
    })
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ceph_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ceph_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The bundled 38-landmark schema.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ceph_schema_default(out: *mut *mut CephSchema) -> CephStatus {
    guard(|| {
        nonnull!(out);
        *out = Box::into_raw(Box::new(CephSchema(AnatomySchema::default_schema())));
        CephStatus::Ok
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_schema_load(path: *const c_char, out: *mut *mut CephSchema) -> CephStatus {
    guard(|| {
        nonnull!(path, out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match cephforge::anatomy::load_schema(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CephSchema(s)));
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `schema` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ceph_schema_free(schema: *mut CephSchema) {
    if !schema.is_null() {
        drop(Box::from_raw(schema));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_landmarks_load(path: *const c_char, out: *mut *mut CephLandmarkSet) -> CephStatus {
    guard(|| {
        nonnull!(path, out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match LandmarkSet::load(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CephLandmarkSet(s)));
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses an annotation from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_landmarks_from_json(json: *const c_char, out: *mut *mut CephLandmarkSet) -> CephStatus {
    guard(|| {
        nonnull!(json, out);
        let text = match str_arg(json, "json") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match LandmarkSet::from_json_str(text, "json argument") {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CephLandmarkSet(s)));
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `set` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ceph_landmarks_free(set: *mut CephLandmarkSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Coordinates of landmark `index` (1-based).
///
/// # Safety
/// `set` must be a live handle; `x` and `y` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_landmarks_point(set: *const CephLandmarkSet, index: u8, x: *mut f64, y: *mut f64) -> CephStatus {
    guard(|| {
        nonnull!(set, x, y);
        match (*set).0.point(cephforge::LandmarkId(index)) {
            Ok(p) => {
                *x = p.x;
                *y = p.y;
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Validates `set` against `schema`. Writes the number of violations to
/// `violations`; returns `CEPH_STATUS_INVALID` with the report as the error
/// message when there are any.
///
/// # Safety
/// `set` and `schema` must be live handles; `violations` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_landmarks_validate(
    set: *const CephLandmarkSet,
    schema: *const CephSchema,
    violations: *mut usize,
) -> CephStatus {
    guard(|| {
        nonnull!(set, schema, violations);
        let report = validate_landmark_set(&(*set).0, &(*schema).0);
        *violations = report.len();
        if report.is_valid() {
            CephStatus::Ok
        } else {
            set_error(report.to_string());
            CephStatus::Invalid
        }
    })
}

/// Angle in degrees of the named schema constraint.
///
/// # Safety
/// Handles must be live; `name` NUL-terminated; `degrees` writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_measure_angle(
    set: *const CephLandmarkSet,
    schema: *const CephSchema,
    name: *const c_char,
    degrees: *mut f64,
) -> CephStatus {
    guard(|| {
        nonnull!(set, schema, name, degrees);
        let name = match str_arg(name, "name") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let Some(c) = (*schema).0.constraint(name) else {
            set_error(format!("unknown constraint {name:?}"));
            return CephStatus::Config;
        };
        match measure_angle(&(*set).0, c) {
            Ok(v) => {
                *degrees = v;
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Renders the topology image as row-major RGB8 into `buf`
/// (`size * size * 3` bytes). `written` receives the byte count, or the
/// required size when the buffer is too small.
///
/// # Safety
/// Handles must be live; `buf` must hold `buf_len` writable bytes;
/// `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_rasterize(
    set: *const CephLandmarkSet,
    schema: *const CephSchema,
    size: u32,
    buf: *mut u8,
    buf_len: usize,
    written: *mut usize,
) -> CephStatus {
    guard(|| {
        nonnull!(set, schema, written);
        let style = RasterStyle { size, ..RasterStyle::default() };
        let need = size as usize * size as usize * 3;
        *written = need;
        if buf.is_null() || buf_len < need {
            set_error(format!("buffer holds {buf_len} bytes, need {need}"));
            return CephStatus::BufferTooSmall;
        }
        match rasterize(&(*set).0, &(*schema).0, &style) {
            Ok(img) => {
                std::ptr::copy_nonoverlapping(img.pixels.as_ptr(), buf, need);
                CephStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Per-landmark radial errors in millimetres, in landmark order.
///
/// # Safety
/// Handles must be live; `out` must hold `out_len` doubles; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_radial_errors(
    pred: *const CephLandmarkSet,
    gt: *const CephLandmarkSet,
    out: *mut f64,
    out_len: usize,
    count: *mut usize,
) -> CephStatus {
    guard(|| {
        nonnull!(pred, gt, count);
        let errors = match radial_errors(&(*pred).0, &(*gt).0) {
            Ok(e) => e,
            Err(e) => return fail(e),
        };
        *count = errors.len();
        if out.is_null() || out_len < errors.len() {
            set_error(format!("buffer holds {out_len} values, need {}", errors.len()));
            return CephStatus::BufferTooSmall;
        }
        for (i, e) in errors.iter().enumerate() {
            *out.add(i) = e.error_mm;
        }
        CephStatus::Ok
    })
}

/// `count` prompts from the bundled lexicon, newline separated. Release
/// the string with [`ceph_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ceph_generate_prompts(count: usize, seed: u64, out: *mut *mut c_char) -> CephStatus {
    guard(|| {
        nonnull!(out);
        match generate_prompts(&PromptLexicon::default_lexicon(), count, seed) {
            Ok(prompts) => {
                let text: Vec<&str> = prompts.iter().map(|p| p.text.as_str()).collect();
                match CString::new(text.join("\n")) {
                    Ok(s) => {
                        *out = s.into_raw();
                        CephStatus::Ok
                    }
                    Err(_) => {
                        set_error("prompt text contains NUL");
                        CephStatus::Invalid
                    }
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ceph_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
