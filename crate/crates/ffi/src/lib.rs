//! C interface to `clmeasure`.
//!
//! Conventions:
//!
//! - Every fallible function returns a `ClStatus`; `CL_OK` is zero. Results
//!   are written through out-pointers only on success.
//! - After a failure, `cl_last_error` returns a description of the most
//!   recent error on the calling thread.
//! - Objects are opaque handles released with their `_free` function.
//!   Strings returned by the library are released with `cl_string_free`.
//! - Rationals cross the boundary as decimal `num/den` strings.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clmeasure::enclosure::rational_text;
use clmeasure::globalmeasure::MeasureSpace;
use clmeasure::localmeasure::{eta, local_probability};
use clmeasure::sampling::{GroupSampler, SamplerConfig};
use clmeasure::{
    aut_order, Budget, Error, GlobalConfig, Partition, ProbEnclosure, Rational, Target,
    UniformProperty,
};

pub type ClStatus = i32;

pub const CL_OK: ClStatus = 0;
pub const CL_ERR_NULL_POINTER: ClStatus = 1;
pub const CL_ERR_UTF8: ClStatus = 2;
pub const CL_ERR_PARSE: ClStatus = 3;
pub const CL_ERR_NOT_PRIME: ClStatus = 4;
pub const CL_ERR_INVALID_PARTITION: ClStatus = 5;
pub const CL_ERR_INVALID_CONFIG: ClStatus = 6;
pub const CL_ERR_BUDGET: ClStatus = 7;
pub const CL_ERR_IO: ClStatus = 8;
pub const CL_ERR_PANIC: ClStatus = 9;

/// Enumeration and rounding limits for local computations.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ClBudget {
    pub partition_size_cap: u32,
    pub product_depth: u32,
    pub precision_bits: u32,
}

/// A parsed uniform property.
pub struct ClProperty(UniformProperty);

/// A parsed target: a property, an O-set or a D-set.
pub struct ClTarget(Target);

/// A rational interval containing a probability.
pub struct ClEnclosure(ProbEnclosure);

/// A seeded group sampler over a finite set of primes.
pub struct ClSampler(GroupSampler);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ClStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::GroupParse { .. } => CL_ERR_PARSE,
            Error::NotPrime(_) => CL_ERR_NOT_PRIME,
            Error::InvalidPartition(_) => CL_ERR_INVALID_PARTITION,
            Error::InvalidConfig(_) | Error::OverlappingCells { .. } => CL_ERR_INVALID_CONFIG,
            Error::Io(_) => CL_ERR_IO,
            _ => CL_ERR_BUDGET,
        };
        Failure(code, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> ClStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CL_OK,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            CL_ERR_PANIC
        }
    }
}

fn null() -> Failure {
    Failure(CL_ERR_NULL_POINTER, "null pointer argument".into())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(CL_ERR_UTF8, e.to_string()))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

unsafe fn budget_from(b: *const ClBudget) -> Result<Budget, Failure> {
    if b.is_null() {
        return Ok(Budget::default());
    }
    let b = *b;
    Ok(Budget::new(b.partition_size_cap, b.product_depth)?.with_precision(b.precision_bits)?)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The default budget.
#[no_mangle]
pub extern "C" fn cl_budget_default() -> ClBudget {
    let b = Budget::default();
    ClBudget {
        partition_size_cap: b.partition_size_cap,
        product_depth: b.product_depth,
        precision_bits: b.precision_bits,
    }
}

/// Copy of the last error message on this thread, or NULL if there was none.
/// Free with `cl_string_free`.
#[no_mangle]
pub extern "C" fn cl_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |c| c.clone().into_raw())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `#Aut` of the abelian p-group of type `partition` (e.g. "2,1"), as a
/// decimal string.
///
/// # Safety
/// `partition` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_aut_order(
    p: u64,
    partition: *const c_char,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        clmeasure::primes::require_prime(p)?;
        let lam: Partition = read_str(partition)?.parse()?;
        write_out(out, to_c_string(aut_order(p, &lam).to_string()))
    })
}

/// # Safety
/// `expr` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_property_parse(
    expr: *const c_char,
    out: *mut *mut ClProperty,
) -> ClStatus {
    guard(|| {
        let e = UniformProperty::parse(read_str(expr)?)?;
        write_out(out, boxed(ClProperty(e)))
    })
}

/// # Safety
/// `property` must come from `cl_property_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_property_free(property: *mut ClProperty) {
    if !property.is_null() {
        drop(Box::from_raw(property));
    }
}

/// Parses `O(a; b)`, `D(a; b \ c)` or a property.
///
/// # Safety
/// `expr` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_target_parse(expr: *const c_char, out: *mut *mut ClTarget) -> ClStatus {
    guard(|| {
        let t = Target::parse(read_str(expr)?)?;
        write_out(out, boxed(ClTarget(t)))
    })
}

/// # Safety
/// `target` must come from `cl_target_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_target_free(target: *mut ClTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// `eta(p)`. A NULL budget means the default.
///
/// # Safety
/// `budget` is NULL or readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_eta(
    p: u64,
    budget: *const ClBudget,
    out: *mut *mut ClEnclosure,
) -> ClStatus {
    guard(|| {
        clmeasure::primes::require_prime(p)?;
        let b = budget_from(budget)?;
        write_out(out, boxed(ClEnclosure(eta(p, &b))))
    })
}

/// Local probability `P_p` of a property.
///
/// # Safety
/// `property` must be a live handle; `budget` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_local_probability(
    p: u64,
    property: *const ClProperty,
    budget: *const ClBudget,
    out: *mut *mut ClEnclosure,
) -> ClStatus {
    guard(|| {
        let e = property.as_ref().ok_or_else(null)?;
        let b = budget_from(budget)?;
        write_out(out, boxed(ClEnclosure(local_probability(p, &e.0, &b)?)))
    })
}

/// Global measure of a target with every prime up to `prime_cutoff` in the
/// product.
///
/// # Safety
/// `target` must be a live handle; `budget` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_measure(
    target: *const ClTarget,
    prime_cutoff: u64,
    budget: *const ClBudget,
    out: *mut *mut ClEnclosure,
) -> ClStatus {
    guard(|| {
        let t = target.as_ref().ok_or_else(null)?;
        let cfg = GlobalConfig::new(prime_cutoff, budget_from(budget)?)?;
        write_out(
            out,
            boxed(ClEnclosure(MeasureSpace::Global(cfg).measure(&t.0)?)),
        )
    })
}

/// Measure of a target in the finite product over `primes[0..len]`.
///
/// # Safety
/// `target` must be a live handle; `primes` must hold `len` values;
/// `budget` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_measure_truncated(
    target: *const ClTarget,
    primes: *const u64,
    len: usize,
    budget: *const ClBudget,
    out: *mut *mut ClEnclosure,
) -> ClStatus {
    guard(|| {
        let t = target.as_ref().ok_or_else(null)?;
        let primes = slice_or_empty(primes, len)?;
        let space = MeasureSpace::truncated(primes, budget_from(budget)?)?;
        write_out(out, boxed(ClEnclosure(space.measure(&t.0)?)))
    })
}

unsafe fn slice_or_empty<'a>(data: *const u64, len: usize) -> Result<&'a [u64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Floating-point view of an enclosure. Any out-pointer may be NULL.
///
/// # Safety
/// `enclosure` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cl_enclosure_bounds(
    enclosure: *const ClEnclosure,
    lo: *mut f64,
    hi: *mut f64,
    approx: *mut f64,
) -> ClStatus {
    guard(|| {
        let e = &enclosure.as_ref().ok_or_else(null)?.0;
        for (ptr, v) in [(lo, e.lo_f64()), (hi, e.hi_f64()), (approx, e.approx())] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        Ok(())
    })
}

/// Exact ends as `num/den` strings, each freed with `cl_string_free`.
///
/// # Safety
/// `enclosure` must be a live handle; `lo` and `hi` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_enclosure_rationals(
    enclosure: *const ClEnclosure,
    lo: *mut *mut c_char,
    hi: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let e = &enclosure.as_ref().ok_or_else(null)?.0;
        if lo.is_null() || hi.is_null() {
            return Err(null());
        }
        lo.write(to_c_string(rational_text(e.lo())));
        hi.write(to_c_string(rational_text(e.hi())));
        Ok(())
    })
}

/// # Safety
/// `enclosure` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_enclosure_free(enclosure: *mut ClEnclosure) {
    if !enclosure.is_null() {
        drop(Box::from_raw(enclosure));
    }
}

/// Sampler over `primes[0..len]` with total-variation budget
/// `epsilon_num / epsilon_den` and largest tabulated size `partition_cap`.
///
/// # Safety
/// `primes` must hold `len` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_sampler_new(
    primes: *const u64,
    len: usize,
    seed: u64,
    epsilon_num: u64,
    epsilon_den: u64,
    partition_cap: u32,
    out: *mut *mut ClSampler,
) -> ClStatus {
    guard(|| {
        if epsilon_den == 0 {
            return Err(Failure(
                CL_ERR_INVALID_CONFIG,
                "zero epsilon denominator".into(),
            ));
        }
        let set: BTreeSet<u64> = slice_or_empty(primes, len)?.iter().copied().collect();
        let cfg = SamplerConfig {
            seed,
            epsilon: Rational::new(epsilon_num.into(), epsilon_den.into()),
            partition_cap,
        };
        write_out(out, boxed(ClSampler(GroupSampler::new(&set, cfg)?)))
    })
}

/// Next group in group-file notation (`4,2,3`, `1` for trivial); free with
/// `cl_string_free`.
///
/// # Safety
/// `sampler` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cl_sampler_next(
    sampler: *mut ClSampler,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let s = sampler.as_mut().ok_or_else(null)?;
        let g = s.0.sample()?;
        write_out(out, to_c_string(g.to_string()))
    })
}

/// # Safety
/// `sampler` must come from `cl_sampler_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_sampler_free(sampler: *mut ClSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}
