//! C ABI for the sequential multinomial test.
//!
//! A test lives behind an opaque `CsTest` handle. Every fallible call
//! returns a `CsStatus`; on anything but `CS_STATUS_OK` the outputs are left
//! untouched and `cs_last_error_message` describes the failure on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use countseq::{
    composite_p, contrast_ci, in_confidence_set, marginal_ci, mark_probability, ContrastSpec,
    CountVector, Error, LinearConstraint, LinearHypothesis, OddsState, Prior, Relation,
    SimplexVector,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutOfRange = 4,
    Infeasible = 5,
    Serialization = 6,
    Panic = 7,
}

/// Direction of a hypothesis constraint, passed as `int32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsRelation {
    /// `coeffs · δ <= rhs`
    Le = 0,
    /// `coeffs · δ >= rhs`
    Ge = 1,
}

/// Opaque handle to one running test.
pub struct CsTest {
    state: OddsState,
}

struct Fail(CsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => CsStatus::DimensionMismatch,
            Error::ArmOutOfRange { .. } => CsStatus::OutOfRange,
            Error::Infeasible(_) => CsStatus::Infeasible,
            _ => CsStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
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
            CsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

/// # Safety
/// `p` must be null or point to a live `CsTest`.
unsafe fn handle<'a>(p: *const CsTest) -> Result<&'a CsTest, Fail> {
    p.as_ref().ok_or_else(|| null("test handle"))
}

/// # Safety
/// `p` must be null or point to a live `CsTest` not aliased elsewhere.
unsafe fn handle_mut<'a>(p: *mut CsTest) -> Result<&'a mut CsTest, Fail> {
    p.as_mut().ok_or_else(|| null("test handle"))
}

/// # Safety
/// `p` must be null or valid for a write of `T`.
unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

fn simplex(values: &[f64]) -> Result<SimplexVector, Fail> {
    Ok(SimplexVector::new(values.to_vec())?)
}

/// Creates a test of `theta0` (`d` probabilities summing to one).
/// `prior_k == 0` selects the uniform prior; `prior_k > 0` the prior
/// concentrated about the null with total mass `prior_k`.
///
/// # Safety
/// `theta0` must point to `d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_new(
    theta0: *const f64,
    d: usize,
    prior_k: f64,
    out: *mut *mut CsTest,
) -> CsStatus {
    guard(|| {
        let theta0 = simplex(slice(theta0, d, "theta0")?)?;
        let prior = if prior_k == 0.0 {
            Prior::Uniform
        } else {
            Prior::Concentrated { k: prior_k }
        };
        let state = OddsState::new(theta0, prior)?;
        write(out, Box::into_raw(Box::new(CsTest { state })), "out")
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `test` must be null or come from `cs_test_new` / `cs_test_from_json`
/// and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_test_free(test: *mut CsTest) {
    if !test.is_null() {
        drop(Box::from_raw(test));
    }
}

/// Records one observation of arm `arm`.
///
/// # Safety
/// `test` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_test_observe(test: *mut CsTest, arm: usize) -> CsStatus {
    guard(|| Ok(handle_mut(test)?.state.observe(arm)?))
}

/// Records a block of counts, one per arm.
///
/// # Safety
/// `test` must be a live handle and `counts` must point to `d` values.
#[no_mangle]
pub unsafe extern "C" fn cs_test_observe_counts(
    test: *mut CsTest,
    counts: *const u64,
    d: usize,
) -> CsStatus {
    guard(|| {
        let t = handle_mut(test)?;
        let counts = CountVector::new(slice(counts, d, "counts")?.to_vec());
        t.state = t.state.update_batch(&counts)?;
        Ok(())
    })
}

/// Number of arms.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_dim(test: *const CsTest, out: *mut usize) -> CsStatus {
    guard(|| write(out, handle(test)?.state.dim(), "out"))
}

/// Observations so far.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_n(test: *const CsTest, out: *mut u64) -> CsStatus {
    guard(|| write(out, handle(test)?.state.n(), "out"))
}

/// Current log posterior odds against the null.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_log_odds(test: *const CsTest, out: *mut f64) -> CsStatus {
    guard(|| write(out, handle(test)?.state.log_odds(), "out"))
}

/// Anytime-valid p-value; never increases.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_p_value(test: *const CsTest, out: *mut f64) -> CsStatus {
    guard(|| write(out, handle(test)?.state.sequential_p(), "out"))
}

/// Whether the null is rejected at level `u`.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_reject(test: *const CsTest, u: f64, out: *mut bool) -> CsStatus {
    guard(|| write(out, handle(test)?.state.should_reject(u)?, "out"))
}

/// Whether `theta` lies in the confidence set at level `u`.
///
/// # Safety
/// `test` must be a live handle, `theta` must point to `d` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_contains(
    test: *const CsTest,
    theta: *const f64,
    d: usize,
    u: f64,
    out: *mut bool,
) -> CsStatus {
    guard(|| {
        let t = handle(test)?;
        let theta = simplex(slice(theta, d, "theta")?)?;
        write(out, in_confidence_set(&theta, &t.state, u)?, "out")
    })
}

/// Confidence interval for the probability of arm `arm`.
///
/// # Safety
/// `test` must be a live handle and `lo`, `hi` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_marginal_ci(
    test: *const CsTest,
    u: f64,
    arm: usize,
    lo: *mut f64,
    hi: *mut f64,
) -> CsStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() {
            return Err(null("lo/hi"));
        }
        let ci = marginal_ci(&handle(test)?.state, u, arm)?;
        lo.write(ci.lo);
        hi.write(ci.hi);
        Ok(())
    })
}

/// Confidence interval for `Σ coeffs[i]·δ[i]` where arm `i` has probability
/// proportional to `rho[i]·exp(δ[i])`. The coefficients must sum to zero.
/// Unbounded ends are reported as infinities.
///
/// # Safety
/// `test` must be a live handle, `rho` and `coeffs` must point to `d`
/// doubles and `lo`, `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_contrast_ci(
    test: *const CsTest,
    rho: *const f64,
    coeffs: *const f64,
    d: usize,
    u: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> CsStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() {
            return Err(null("lo/hi"));
        }
        let t = handle(test)?;
        let rho = simplex(slice(rho, d, "rho")?)?;
        let spec = ContrastSpec::new(slice(coeffs, d, "coeffs")?.to_vec())?;
        let ci = contrast_ci(&t.state, &rho, u, &spec)?;
        lo.write(ci.lo);
        hi.write(ci.hi);
        Ok(())
    })
}

/// p-value of the composite null `{δ : coeffs[j]·δ (relations[j]) rhs[j]}`
/// at the current counts. `coeffs` holds `m` rows of `d` values, row-major;
/// each relation is a `CsRelation` value.
///
/// # Safety
/// `test` must be a live handle, `rho` must point to `d` doubles, `coeffs`
/// to `m·d` doubles, `relations` and `rhs` to `m` values, and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_composite_p(
    test: *const CsTest,
    rho: *const f64,
    d: usize,
    coeffs: *const f64,
    relations: *const i32,
    rhs: *const f64,
    m: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let t = handle(test)?;
        let rho = simplex(slice(rho, d, "rho")?)?;
        let len = m.checked_mul(d).ok_or_else(|| Fail(CsStatus::InvalidArgument, "m·d overflows".into()))?;
        let coeffs = slice(coeffs, len, "coeffs")?;
        let relations = slice(relations, m, "relations")?;
        let rhs = slice(rhs, m, "rhs")?;
        let constraints = (0..m)
            .map(|j| {
                let relation = match relations[j] {
                    r if r == CsRelation::Le as i32 => Relation::Le,
                    r if r == CsRelation::Ge as i32 => Relation::Ge,
                    r => {
                        return Err(Fail(
                            CsStatus::InvalidArgument,
                            format!("constraint {j}: unknown relation {r}"),
                        ))
                    }
                };
                Ok(LinearConstraint::new(coeffs[j * d..(j + 1) * d].to_vec(), relation, rhs[j]))
            })
            .collect::<Result<Vec<_>, Fail>>()?;
        let h0 = LinearHypothesis::new(constraints, d)?;
        write(out, composite_p(&t.state, &rho, &h0)?, "out")
    })
}

/// Writes the `d` mark probabilities `rho[i]·exp(δ[i]) / Σ rho[j]·exp(δ[j])`.
///
/// # Safety
/// `rho` and `delta` must point to `d` doubles and `out` to `d` writable ones.
#[no_mangle]
pub unsafe extern "C" fn cs_mark_probability(
    rho: *const f64,
    delta: *const f64,
    d: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let rho = simplex(slice(rho, d, "rho")?)?;
        let theta = mark_probability(&rho, slice(delta, d, "delta")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(theta.values().as_ptr(), out, d);
        Ok(())
    })
}

/// Serializes the test state to a JSON string owned by the caller; release
/// it with `cs_string_free`.
///
/// # Safety
/// `test` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_to_json(test: *const CsTest, out: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(test)?.state)
            .map_err(|e| Fail(CsStatus::Serialization, e.to_string()))?;
        let s = CString::new(json).map_err(|e| Fail(CsStatus::Serialization, e.to_string()))?;
        write(out, s.into_raw(), "out")
    })
}

/// Restores a test from `cs_test_to_json` output. The state is validated
/// before a handle is returned.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_test_from_json(json: *const c_char, out: *mut *mut CsTest) -> CsStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(CsStatus::Serialization, e.to_string()))?;
        let state: OddsState =
            serde_json::from_str(text).map_err(|e| Fail(CsStatus::Serialization, e.to_string()))?;
        state.validate()?;
        write(out, Box::into_raw(Box::new(CsTest { state })), "out")
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or come from `cs_test_to_json` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns the buffer size needed for the whole
/// message, or 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}
