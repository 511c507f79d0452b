//! C ABI over the respen library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible entry point returns a
//! [`RespenStatus`] and writes its result through an out-pointer; the message
//! of the last failure on the calling thread is available from
//! [`respen_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use respen::diagnostics::{delta_ideal, delta_penw_bar};
use respen::penalties::{estimate_sigma2, mallows_penalty, rp_penalty_closed, vfold_penalty, PenaltyKind, PenaltySpec};
use respen::selection::{select_penalized, ModelCollection};
use respen::simbench::seeds::stream_rng;
use respen::weights::einv::{einv_of, OccupancyLaw};
use respen::{CellStats, Dataset, Error, FoldAssignment, Partition, WeightScheme};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RespenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The estimator is undefined on some cell, or a fold cannot be trained.
    UndefinedModel = 3,
    NoAdmissibleModel = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RespenSchemeKind {
    Efron = 0,
    Rademacher = 1,
    Poisson = 2,
    Rho = 3,
    Loo = 4,
}

/// Exchangeable weight scheme. `param` is `m` for Efron, `p` for
/// Rademacher, `mu` for Poisson and `q` for Rho; it is ignored for Loo.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RespenScheme {
    pub kind: RespenSchemeKind,
    pub param: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RespenPenaltyKind {
    /// Closed-form resampling penalty with constant `c_over_cw * C_W`.
    Resampling = 0,
    Mallows = 1,
    /// V-fold penalty with `v` random folds and constant `c_over_cw * (V - 1)`.
    VFold = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RespenPenaltySpec {
    pub kind: RespenPenaltyKind,
    pub scheme: RespenScheme,
    pub v: usize,
    pub c_over_cw: f64,
}

pub struct RespenDataset(Dataset);
pub struct RespenPartition(Partition);
pub struct RespenCollection(ModelCollection);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> RespenStatus {
    match err {
        Error::UndefinedCell { .. } | Error::UntrainableFold { .. } => RespenStatus::UndefinedModel,
        Error::NoAdmissibleModel => RespenStatus::NoAdmissibleModel,
        Error::InvalidPartition(_)
        | Error::InvalidDataset(_)
        | Error::InvalidScheme(_)
        | Error::InvalidArgument(_)
        | Error::NoClosedForm(_) => RespenStatus::InvalidArgument,
        _ => RespenStatus::Internal,
    }
}

enum Failure {
    Null,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RespenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RespenStatus::Ok,
        Ok(Err(Failure::Null)) => {
            set_error("null pointer argument".into());
            RespenStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            RespenStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn count_param(v: f64, what: &str) -> Result<usize, Error> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidScheme(format!("{what} must be a positive integer, got {v}")))
    }
}

fn scheme_of(s: &RespenScheme) -> Result<WeightScheme, Error> {
    Ok(match s.kind {
        RespenSchemeKind::Efron => WeightScheme::Efron { m: count_param(s.param, "m")? },
        RespenSchemeKind::Rademacher => WeightScheme::Rademacher { p: s.param },
        RespenSchemeKind::Poisson => WeightScheme::Poisson { mu: s.param },
        RespenSchemeKind::Rho => WeightScheme::Rho { q: count_param(s.param, "q")? },
        RespenSchemeKind::Loo => WeightScheme::Loo,
    })
}

/// Message of the last failed call on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn respen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut RespenDataset,
) -> RespenStatus {
    guard(|| {
        let d = Dataset::new(slice(x, n)?.to_vec(), slice(y, n)?.to_vec())?;
        write(out, Box::into_raw(Box::new(RespenDataset(d))))
    })
}

/// # Safety
/// `d` must come from [`respen_dataset_new`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn respen_dataset_free(d: *mut RespenDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live dataset handle or null.
#[no_mangle]
pub unsafe extern "C" fn respen_dataset_len(d: *const RespenDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// Partition from `len` breakpoints `0 = b_0 < ... < b_D = 1`.
///
/// # Safety
/// `breaks` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_partition_new(
    breaks: *const f64,
    len: usize,
    out: *mut *mut RespenPartition,
) -> RespenStatus {
    guard(|| {
        let p = Partition::new(slice(breaks, len)?.to_vec())?;
        write(out, Box::into_raw(Box::new(RespenPartition(p))))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_partition_regular(d: usize, out: *mut *mut RespenPartition) -> RespenStatus {
    guard(|| {
        if d == 0 {
            return Err(Error::InvalidPartition("a partition needs at least one cell".into()).into());
        }
        write(out, Box::into_raw(Box::new(RespenPartition(Partition::regular(d)))))
    })
}

/// # Safety
/// `p` must come from a partition constructor and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn respen_partition_free(p: *mut RespenPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live partition handle or null.
#[no_mangle]
pub unsafe extern "C" fn respen_partition_dim(p: *const RespenPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// Collection of `len` models. The partitions are copied; the caller keeps
/// ownership of its handles.
///
/// # Safety
/// `models` must point to `len` live partition handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_collection_new(
    models: *const *const RespenPartition,
    len: usize,
    out: *mut *mut RespenCollection,
) -> RespenStatus {
    guard(|| {
        let handles = slice(models, len)?;
        let mut parts = Vec::with_capacity(len);
        for &h in handles {
            parts.push(deref(h)?.0.clone());
        }
        let c = ModelCollection::from_partitions(parts)?;
        write(out, Box::into_raw(Box::new(RespenCollection(c))))
    })
}

/// # Safety
/// `c` must come from [`respen_collection_new`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn respen_collection_free(c: *mut RespenCollection) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Normalizing constant `C_W` of a scheme at sample size `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_scheme_cw(scheme: RespenScheme, n: usize, out: *mut f64) -> RespenStatus {
    guard(|| {
        let s = scheme_of(&scheme)?;
        s.validate(n)?;
        write(out, s.c_w(n)?)
    })
}

unsafe fn einv_into(law: OccupancyLaw, out: *mut f64) -> RespenStatus {
    guard(|| {
        law.validate()?;
        write(out, einv_of(law))
    })
}

/// `E[Z] E[Z^{-1} | Z > 0]` for `Z ~ Binomial(n, p)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_einv_binomial(n: u64, p: f64, out: *mut f64) -> RespenStatus {
    einv_into(OccupancyLaw::Binomial { n, p }, out)
}

/// `E[Z] E[Z^{-1} | Z > 0]` for the marked count among `q` draws without replacement from `n` items,
/// `r` of them marked.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_einv_hypergeometric(n: u64, r: u64, q: u64, out: *mut f64) -> RespenStatus {
    einv_into(OccupancyLaw::Hypergeometric { n, r, q }, out)
}

/// `E[Z] E[Z^{-1} | Z > 0]` for `Z ~ Poisson(mu)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_einv_poisson(mu: f64, out: *mut f64) -> RespenStatus {
    einv_into(OccupancyLaw::Poisson { mu }, out)
}

/// Closed-form resampling penalty with constant `c`.
///
/// # Safety
/// `d` and `p` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_rp_penalty(
    d: *const RespenDataset,
    p: *const RespenPartition,
    scheme: RespenScheme,
    c: f64,
    out: *mut f64,
) -> RespenStatus {
    guard(|| {
        let stats = CellStats::from_data(&deref(d)?.0, &deref(p)?.0);
        write(out, rp_penalty_closed(&stats, &scheme_of(&scheme)?, c)?)
    })
}

/// Variance estimate from the regular partition with `n / 2` cells.
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_sigma2(d: *const RespenDataset, out: *mut f64) -> RespenStatus {
    guard(|| write(out, estimate_sigma2(&deref(d)?.0)?))
}

/// Mallows penalty `c_ov * 2 sigma2 D / n`.
#[no_mangle]
pub extern "C" fn respen_mallows_penalty(dim: usize, sigma2: f64, n: usize, c_ov: f64) -> f64 {
    mallows_penalty(dim, sigma2, n, c_ov)
}

/// V-fold penalty with constant `c`; `fold_of[i]` in `0..v` is the fold of point `i`.
///
/// # Safety
/// `d` and `p` must be live handles, `fold_of` must point to one entry per
/// data point, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_vfold_penalty(
    d: *const RespenDataset,
    p: *const RespenPartition,
    fold_of: *const usize,
    v: usize,
    c: f64,
    out: *mut f64,
) -> RespenStatus {
    guard(|| {
        let d = &deref(d)?.0;
        let folds = FoldAssignment::new(v, slice(fold_of, d.len())?.to_vec())?;
        write(out, vfold_penalty(d, &deref(p)?.0, &folds, c)?)
    })
}

/// Selects a model by penalized empirical risk. `seed` drives any random
/// fold assignment; the result is deterministic given it.
///
/// # Safety
/// `d` and `c` must be live handles; `selected` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_select(
    d: *const RespenDataset,
    c: *const RespenCollection,
    spec: RespenPenaltySpec,
    seed: u64,
    selected: *mut usize,
) -> RespenStatus {
    guard(|| {
        let kind = match spec.kind {
            RespenPenaltyKind::Resampling => PenaltyKind::RpClosed { scheme: scheme_of(&spec.scheme)? },
            RespenPenaltyKind::Mallows => PenaltyKind::Mallows,
            RespenPenaltyKind::VFold => PenaltyKind::VFoldPen { v: spec.v },
        };
        let mut rng = stream_rng(seed, 0, 0);
        let res = select_penalized(&deref(d)?.0, &deref(c)?.0, &PenaltySpec::new(kind, spec.c_over_cw), &mut rng)?;
        write(selected, res.selected)
    })
}

/// Ideal penalty correction `delta_{n,p}`.
#[no_mangle]
pub extern "C" fn respen_delta_ideal(n: usize, p: f64) -> f64 {
    delta_ideal(n, p)
}

/// Averaged resampling correction for a cell of probability `p`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn respen_delta_penw_bar(scheme: RespenScheme, n: usize, p: f64, out: *mut f64) -> RespenStatus {
    guard(|| {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("cell probability {p} outside (0, 1]")).into());
        }
        let s = scheme_of(&scheme)?;
        s.validate(n)?;
        write(out, delta_penw_bar(&s, n, p)?)
    })
}
