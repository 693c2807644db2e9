//! C ABI over `ottc-core`.
//!
//! Every function returns an [`OttcStatus`]; on failure a message is kept in
//! thread-local storage and can be read with [`ottc_last_error`]. Matrices
//! are dense, row-major `double` arrays. Coupling indices are 1-based.
//! Panics never cross the boundary; they surface as `OTTC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndarray::ArrayView2;
use ottc_core::ot::{self, SimplexWeights, SparseCoupling, StrictSimplexWeights};
use ottc_core::sotd::{self, BetaPolicy, CostKind, VectorSequence};
use ottc_core::{ctc, ottc, Error, LabelSequence};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OttcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotSimplex = 3,
    ZeroTargetWeight = 4,
    ShapeMismatch = 5,
    NonFinite = 6,
    Infeasible = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Cost functions accepted by [`ottc_sotd_oracle`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OttcCost {
    SquaredEuclidean = 0,
    Euclidean = 1,
    CrossEntropy = 2,
}

/// Opaque transport plan.
pub struct OttcCoupling {
    inner: SparseCoupling,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OttcStatus {
    match e {
        Error::NotSimplex(_) | Error::Empty(_) => OttcStatus::NotSimplex,
        Error::ZeroTargetWeight { .. } => OttcStatus::ZeroTargetWeight,
        Error::Shape(_) => OttcStatus::ShapeMismatch,
        Error::NonFinite(_) => OttcStatus::NonFinite,
        Error::Infeasible { .. } => OttcStatus::Infeasible,
        _ => OttcStatus::InvalidArgument,
    }
}

struct Fail(OttcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OttcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OttcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OttcStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(OttcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(OttcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(OttcStatus::NullPointer, format!("{what} is null")))
}

fn matrix<'a>(data: &'a [f64], rows: usize, cols: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    ArrayView2::from_shape((rows, cols), data).map_err(|e| Fail(OttcStatus::ShapeMismatch, e.to_string()))
}

fn labels(tokens: &[u32], vocab_size: usize) -> Result<LabelSequence, Fail> {
    Ok(LabelSequence::new(tokens.iter().map(|&t| t as usize).collect(), vocab_size)?)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ottc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Computes the monotone transport plan between `alpha` (length `n`) and
/// strictly positive `beta` (length `m`). Free the handle with
/// [`ottc_coupling_free`].
///
/// # Safety
/// `alpha` and `beta` must point to `n` and `m` readable doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_compute(
    alpha: *const f64,
    n: usize,
    beta: *const f64,
    m: usize,
    out: *mut *mut OttcCoupling,
) -> OttcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let a = SimplexWeights::new(input(alpha, n, "alpha")?.to_vec())?;
        let b = StrictSimplexWeights::new(input(beta, m, "beta")?.to_vec())?;
        let c = ot::compute_coupling(&a, &b);
        *out = Box::into_raw(Box::new(OttcCoupling { inner: c }));
        Ok(())
    })
}

/// # Safety
/// `coupling` must come from [`ottc_coupling_compute`] and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_free(coupling: *mut OttcCoupling) {
    if !coupling.is_null() {
        drop(Box::from_raw(coupling));
    }
}

/// Number of nonzero entries; 0 for NULL.
///
/// # Safety
/// `coupling` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_len(coupling: *const OttcCoupling) -> usize {
    coupling.as_ref().map_or(0, |c| c.inner.entries.len())
}

/// Copies entries into three parallel arrays of capacity `cap`, sorted by
/// `(i, j)` with 1-based indices.
///
/// # Safety
/// `coupling` must be a live handle; each output must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_entries(
    coupling: *const OttcCoupling,
    i_out: *mut usize,
    j_out: *mut usize,
    mass_out: *mut f64,
    cap: usize,
) -> OttcStatus {
    guard(|| {
        let c = coupling.as_ref().ok_or(Fail(OttcStatus::NullPointer, "coupling is null".into()))?;
        let len = c.inner.entries.len();
        if cap < len {
            return Err(Fail(OttcStatus::BufferTooSmall, format!("need {len} entries, got {cap}")));
        }
        let (is, js, ms) = (output(i_out, len, "i_out")?, output(j_out, len, "j_out")?, output(mass_out, len, "mass_out")?);
        for (k, e) in c.inner.entries.iter().enumerate() {
            is[k] = e.i;
            js[k] = e.j;
            ms[k] = e.mass;
        }
        Ok(())
    })
}

/// `sum gamma_ij (i - j)^2`.
///
/// # Safety
/// `coupling` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_cost(coupling: *const OttcCoupling, out: *mut f64) -> OttcStatus {
    guard(|| {
        let c = coupling.as_ref().ok_or(Fail(OttcStatus::NullPointer, "coupling is null".into()))?;
        *out_ref(out, "out")? = ot::transport_cost(&c.inner);
        Ok(())
    })
}

/// Writes `{"n", "m", "entries": [[i, j, mass], ...]}` plus a terminating
/// nul into `buf`. `needed` receives the required size including the nul;
/// pass `cap = 0` to query it.
///
/// # Safety
/// `coupling` must be a live handle, `buf` must hold `cap` bytes, `needed`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_to_json(
    coupling: *const OttcCoupling,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> OttcStatus {
    guard(|| {
        let c = coupling.as_ref().ok_or(Fail(OttcStatus::NullPointer, "coupling is null".into()))?;
        let text = serde_json::to_string(&c.inner).map_err(|e| Fail(OttcStatus::InvalidArgument, e.to_string()))?;
        let size = text.len() + 1;
        *out_ref(needed, "needed")? = size;
        if cap < size {
            return Err(Fail(OttcStatus::BufferTooSmall, format!("need {size} bytes, got {cap}")));
        }
        let dst = output(buf as *mut u8, size, "buf")?;
        dst[..text.len()].copy_from_slice(text.as_bytes());
        dst[text.len()] = 0;
        Ok(())
    })
}

/// Gradient of `sum gamma(alpha)_ij cost_ij` with respect to `alpha`.
/// `cost` is a dense `n x m` grid; only entries on the support are read.
///
/// # Safety
/// `alpha`, `beta`, `cost` must hold `n`, `m`, `n * m` doubles; `grad_out`
/// must hold `n`.
#[no_mangle]
pub unsafe extern "C" fn ottc_coupling_backward(
    alpha: *const f64,
    n: usize,
    beta: *const f64,
    m: usize,
    cost: *const f64,
    grad_out: *mut f64,
) -> OttcStatus {
    guard(|| {
        let a = SimplexWeights::new(input(alpha, n, "alpha")?.to_vec())?;
        let b = StrictSimplexWeights::new(input(beta, m, "beta")?.to_vec())?;
        let c = input(cost, n * m, "cost")?;
        let g = ot::coupling_backward(&a, &b, |i, j| c[(i - 1) * m + (j - 1)])?;
        output(grad_out, n, "grad_out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Inserts the blank (`vocab_size`) between equal neighbours. `out` must
/// hold `cap` tokens; `out_len` receives the augmented length.
///
/// # Safety
/// `tokens` must hold `m` values, `out` `cap` values; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_augment_blanks(
    tokens: *const u32,
    m: usize,
    vocab_size: usize,
    out: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> OttcStatus {
    guard(|| {
        let y = ottc::augment_blanks(&labels(input(tokens, m, "tokens")?, vocab_size)?)?;
        *out_ref(out_len, "out_len")? = y.len();
        if cap < y.len() {
            return Err(Fail(OttcStatus::BufferTooSmall, format!("need {} tokens, got {cap}", y.len())));
        }
        for (o, &t) in output(out, y.len(), "out")?.iter_mut().zip(y.tokens()) {
            *o = t as u32;
        }
        Ok(())
    })
}

/// OTTC loss for `n x k` log-posteriors, target `tokens` (length `m`,
/// blank already inserted), frame weights `alpha` and target weights `beta`.
///
/// # Safety
/// Pointers must hold `n * k`, `m`, `n`, `m` elements; `loss_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_loss(
    log_post: *const f64,
    n: usize,
    k: usize,
    tokens: *const u32,
    m: usize,
    vocab_size: usize,
    alpha: *const f64,
    beta: *const f64,
    loss_out: *mut f64,
) -> OttcStatus {
    guard(|| {
        let lp = matrix(input(log_post, n * k, "log_post")?, n, k)?;
        let y = labels(input(tokens, m, "tokens")?, vocab_size)?;
        let a = SimplexWeights::new(input(alpha, n, "alpha")?.to_vec())?;
        let b = StrictSimplexWeights::new(input(beta, m, "beta")?.to_vec())?;
        *out_ref(loss_out, "loss_out")? = ottc::ottc_loss_log(lp, &y, &a, &b)?;
        Ok(())
    })
}

/// OTTC loss with `alpha = softmax(scores)` and its gradients with respect
/// to the log-posteriors (`n x k`) and the scores (`n`).
///
/// # Safety
/// Inputs must hold `n * k`, `m`, `n`, `m` elements; gradient outputs
/// `n * k` and `n`; `loss_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_backward(
    log_post: *const f64,
    n: usize,
    k: usize,
    tokens: *const u32,
    m: usize,
    vocab_size: usize,
    scores: *const f64,
    beta: *const f64,
    loss_out: *mut f64,
    grad_log_post: *mut f64,
    grad_scores: *mut f64,
) -> OttcStatus {
    guard(|| {
        let lp = matrix(input(log_post, n * k, "log_post")?, n, k)?;
        let y = labels(input(tokens, m, "tokens")?, vocab_size)?;
        let b = StrictSimplexWeights::new(input(beta, m, "beta")?.to_vec())?;
        let g = ottc::ottc_backward_log(lp, &y, input(scores, n, "scores")?, &b)?;
        *out_ref(loss_out, "loss_out")? = g.loss;
        output(grad_log_post, n * k, "grad_log_post")?
            .copy_from_slice(g.log_posteriors.as_slice().expect("standard layout"));
        output(grad_scores, n, "grad_scores")?.copy_from_slice(&g.scores);
        Ok(())
    })
}

/// CTC loss of `n x k` log-posteriors for a blank-free target. When
/// `grad_log_post` is not NULL it receives the `n x k` gradient.
///
/// # Safety
/// `log_post` must hold `n * k` doubles, `tokens` `m` values, and
/// `grad_log_post` (if not NULL) `n * k` doubles.
#[no_mangle]
pub unsafe extern "C" fn ottc_ctc_loss(
    log_post: *const f64,
    n: usize,
    k: usize,
    tokens: *const u32,
    m: usize,
    vocab_size: usize,
    loss_out: *mut f64,
    grad_log_post: *mut f64,
) -> OttcStatus {
    guard(|| {
        let lp = matrix(input(log_post, n * k, "log_post")?, n, k)?;
        let y = labels(input(tokens, m, "tokens")?, vocab_size)?;
        let (loss, g) = ctc::ctc_loss_and_grad(lp, &y)?;
        *out_ref(loss_out, "loss_out")? = loss;
        if !grad_log_post.is_null() {
            output(grad_log_post, n * k, "grad_log_post")?.copy_from_slice(g.as_slice().expect("standard layout"));
        }
        Ok(())
    })
}

/// Exact sequence transport distance between `x` (`n x d`) and `y`
/// (`m x d`) with uniform weights on the shorter sequence. `cost` is an
/// [`OttcCost`] value.
///
/// # Safety
/// `x` and `y` must hold `n * d` and `m * d` doubles; `distance_out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ottc_sotd_oracle(
    x: *const f64,
    n: usize,
    y: *const f64,
    m: usize,
    d: usize,
    r: u32,
    cost: u32,
    distance_out: *mut f64,
) -> OttcStatus {
    guard(|| {
        if d == 0 || r == 0 {
            return Err(Fail(OttcStatus::InvalidArgument, "dimension and order must be positive".into()));
        }
        let rows = |p: *const f64, len: usize, what: &str| -> Result<VectorSequence, Fail> {
            let flat = input(p, len * d, what)?;
            Ok(VectorSequence::new(flat.chunks(d).map(<[f64]>::to_vec).collect())?)
        };
        let xs = rows(x, n, "x")?;
        let ys = rows(y, m, "y")?;
        let kind = match cost {
            c if c == OttcCost::SquaredEuclidean as u32 => CostKind::SquaredEuclidean,
            c if c == OttcCost::Euclidean as u32 => CostKind::Euclidean,
            c if c == OttcCost::CrossEntropy as u32 => CostKind::CrossEntropy,
            other => return Err(Fail(OttcStatus::InvalidArgument, format!("unknown cost kind {other}"))),
        };
        *out_ref(distance_out, "distance_out")? = sotd::sotd_oracle(&xs, &ys, r, kind, &BetaPolicy::Uniform)?.distance;
        Ok(())
    })
}
