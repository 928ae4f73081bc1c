//! C ABI over the vuishim normalizer and session.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `_free`. Every fallible call returns a [`VsStatus`]; on failure a message
//! is available from [`vs_last_error`] on the same thread. Strings returned
//! through `out` parameters are UTF-8, NUL-terminated, and must be released
//! with [`vs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use vuishim::config::{ConfigLayer, Settings};
use vuishim::lexicon::Lexicon;
use vuishim::normalizer::{NormalizerBackend, RuleNormalizer, SelectionContext};
use vuishim::session::{to_ndjson, Session, SessionConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was rejected (empty utterance, bad lexicon, bad config).
    InvalidArgument = 3,
    /// A Rust panic was caught at the boundary; the handle may be unusable.
    Panic = 4,
}

/// A configured rule normalizer. Safe to share across threads for reading.
pub struct VsNormalizer {
    inner: Arc<RuleNormalizer>,
}

/// One editing session. Not thread-safe; use from one thread at a time.
pub struct VsSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: VsStatus, message: impl Into<String>) -> VsStatus {
    set_error(message);
    status
}

/// Runs `f`, turning panics into [`VsStatus::Panic`].
fn guard(f: impl FnOnce() -> VsStatus) -> VsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(VsStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `p` is NULL or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, VsStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(VsStatus::InvalidUtf8, "string argument is not valid UTF-8"))
}

/// # Safety
/// As [`opt_str`].
unsafe fn req_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, VsStatus> {
    opt_str(p)?.ok_or_else(|| fail(VsStatus::NullArgument, format!("{name} is NULL")))
}

/// # Safety
/// `out` is NULL or valid for one pointer write.
unsafe fn put_string(out: *mut *mut c_char, text: String) -> VsStatus {
    if out.is_null() {
        return fail(VsStatus::NullArgument, "out is NULL");
    }
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            VsStatus::Ok
        }
        Err(_) => fail(VsStatus::InvalidArgument, "result contains a NUL byte"),
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn vs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn vs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a normalizer. `lexicon_toml` may be NULL for the built-in
/// lexicon; `threshold` above 100 keeps the lexicon's own threshold.
///
/// # Safety
/// `lexicon_toml` is NULL or a valid NUL-terminated string; `out` is valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn vs_normalizer_new(
    lexicon_toml: *const c_char,
    threshold: u32,
    out: *mut *mut VsNormalizer,
) -> VsStatus {
    guard(|| {
        if out.is_null() {
            return fail(VsStatus::NullArgument, "out is NULL");
        }
        let lexicon = match tri!(opt_str(lexicon_toml)) {
            Some(text) => match Lexicon::from_toml_str(text) {
                Ok(l) => l,
                Err(e) => return fail(VsStatus::InvalidArgument, e.to_string()),
            },
            None => Lexicon::default(),
        };
        let mut n = RuleNormalizer::new(lexicon);
        if threshold <= 100 {
            n = n.with_threshold(threshold);
        }
        *out = Box::into_raw(Box::new(VsNormalizer { inner: Arc::new(n) }));
        VsStatus::Ok
    })
}

/// # Safety
/// `normalizer` is NULL or a handle from [`vs_normalizer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vs_normalizer_free(normalizer: *mut VsNormalizer) {
    if !normalizer.is_null() {
        drop(Box::from_raw(normalizer));
    }
}

/// Normalizes one utterance and writes the result as a JSON object.
/// `selection` may be NULL. Free `*out_json` with [`vs_string_free`].
///
/// # Safety
/// `normalizer` is a live handle; string arguments are NULL or valid
/// NUL-terminated strings; `out_json` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn vs_normalize(
    normalizer: *const VsNormalizer,
    utterance: *const c_char,
    selection: *const c_char,
    out_json: *mut *mut c_char,
) -> VsStatus {
    guard(|| {
        let Some(n) = normalizer.as_ref() else {
            return fail(VsStatus::NullArgument, "normalizer is NULL");
        };
        let utterance = tri!(req_str(utterance, "utterance"));
        let selection = tri!(opt_str(selection)).unwrap_or("");
        match n
            .inner
            .normalize(utterance, &SelectionContext::from_text(selection), &[])
        {
            Ok(result) => put_string(
                out_json,
                serde_json::to_string(&result).expect("results serialize"),
            ),
            Err(e) => fail(VsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Opens a session on `initial_text`. `normalizer` may be NULL for the
/// default rules; `config_json` may be NULL for default settings.
///
/// # Safety
/// `normalizer` is NULL or a live handle; string arguments are NULL or valid
/// NUL-terminated strings; `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn vs_session_open(
    normalizer: *const VsNormalizer,
    initial_text: *const c_char,
    config_json: *const c_char,
    out: *mut *mut VsSession,
) -> VsStatus {
    guard(|| {
        if out.is_null() {
            return fail(VsStatus::NullArgument, "out is NULL");
        }
        let text = tri!(opt_str(initial_text)).unwrap_or("");
        let config: SessionConfig = match tri!(opt_str(config_json)) {
            Some(json) => match serde_json::from_str(json) {
                Ok(c) => c,
                Err(e) => return fail(VsStatus::InvalidArgument, format!("config: {e}")),
            },
            None => Settings::resolve(ConfigLayer::default())
                .expect("defaults are valid")
                .session_config(),
        };
        let backend: Arc<dyn NormalizerBackend> = match normalizer.as_ref() {
            Some(n) => n.inner.clone(),
            None => Arc::new(RuleNormalizer::default()),
        };
        match Session::open_with(text, config, backend) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VsSession { inner }));
                VsStatus::Ok
            }
            Err(e) => fail(VsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `session` is NULL or a handle from [`vs_session_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vs_session_free(session: *mut VsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Handles one utterance (or the answer to a pending question) and writes
/// the resulting events as newline-delimited JSON.
///
/// # Safety
/// `session` is a live handle; `text` is a valid NUL-terminated string;
/// `out_ndjson` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn vs_session_utter(
    session: *mut VsSession,
    text: *const c_char,
    out_ndjson: *mut *mut c_char,
) -> VsStatus {
    guard(|| {
        let Some(s) = session.as_mut() else {
            return fail(VsStatus::NullArgument, "session is NULL");
        };
        let text = tri!(req_str(text, "text"));
        match s.inner.utter(text) {
            Ok(events) => put_string(out_ndjson, to_ndjson(&events)),
            Err(e) => fail(VsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Writes the current buffer text.
///
/// # Safety
/// `session` is a live handle; `out_text` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn vs_session_buffer(
    session: *const VsSession,
    out_text: *mut *mut c_char,
) -> VsStatus {
    guard(|| {
        let Some(s) = session.as_ref() else {
            return fail(VsStatus::NullArgument, "session is NULL");
        };
        put_string(out_text, s.inner.buffer_text())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
