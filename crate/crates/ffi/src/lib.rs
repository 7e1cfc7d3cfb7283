//! C interface to `estim`.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible function returns an
//! [`EstimStatus`]; on failure [`estim_last_error`] describes the problem.
//! Panics are caught at the boundary and reported as
//! [`EstimStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use estim::math::{RngStream, Tensor};
use estim::neural::TrainedNetwork;
use estim::replicate::replicate;
use estim::sequential::{update_bounds, BootstrapSummary, BoundsRule};
use estim::simulators::{sim_ar1, sim_gaussian_iid, sim_svol, SvolParams};
use estim::transforms::Transform;
use estim::{Error, Estimator};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    /// A parameter outside its model or transform domain.
    Domain = 4,
    Io = 5,
    Parse = 6,
    Numeric = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimTransform {
    Identity = 0,
    Log = 1,
    Logit2 = 2,
    Fisher = 3,
    LogShift2 = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimBoundsRule {
    Basic = 0,
    Literal = 1,
}

/// Seeded random stream.
pub struct EstimRng(RngStream);

/// Trained regression network.
pub struct EstimNetwork(TrainedNetwork);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EstimStatus {
    match e.root() {
        Error::ShapeMismatch { .. } | Error::Length { .. } => EstimStatus::ShapeMismatch,
        Error::Domain { .. }
        | Error::SimulatorDomain(_)
        | Error::NonStationary { .. }
        | Error::BadDof { .. }
        | Error::InvalidMoments { .. } => EstimStatus::Domain,
        Error::Io(_) => EstimStatus::Io,
        Error::Json(_) | Error::Config(_) => EstimStatus::Parse,
        Error::NotPositiveDefinite { .. } | Error::NonFiniteLoss { .. } | Error::DegenerateField => {
            EstimStatus::Numeric
        }
        _ => EstimStatus::InvalidArgument,
    }
}

struct Fail(EstimStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EstimStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EstimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EstimStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            EstimStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(EstimStatus::InvalidArgument, format!("{what}: {e}")))
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> Result<(), Fail> {
    if src.len() != dst.len() {
        return Err(Fail(
            EstimStatus::ShapeMismatch,
            format!("output buffer holds {} values, {} produced", dst.len(), src.len()),
        ));
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn transform(t: EstimTransform) -> Transform {
    match t {
        EstimTransform::Identity => Transform::Identity,
        EstimTransform::Log => Transform::Log,
        EstimTransform::Logit2 => Transform::Logit2,
        EstimTransform::Fisher => Transform::Fisher,
        EstimTransform::LogShift2 => Transform::LogShift2,
    }
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn estim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn estim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a random stream for `(seed, stream)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn estim_rng_new(seed: u64, stream: u64, out: *mut *mut EstimRng) -> EstimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EstimRng(RngStream::new(seed, stream))));
        Ok(())
    })
}

/// # Safety
/// `rng` must come from [`estim_rng_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn estim_rng_free(rng: *mut EstimRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Fills `out[0..n]` with standard normal draws.
///
/// # Safety
/// `rng` must be live; `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn estim_rng_normal(rng: *mut EstimRng, out: *mut f64, n: usize) -> EstimStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        for v in slice_mut(out, n, "out")? {
            *v = rng.0.normal();
        }
        Ok(())
    })
}

/// Applies a scalar transform.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn estim_transform_apply(t: EstimTransform, x: f64, out: *mut f64) -> EstimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = transform(t).apply(x)?;
        Ok(())
    })
}

/// Inverts a scalar transform.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn estim_transform_invert(t: EstimTransform, y: f64, out: *mut f64) -> EstimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = transform(t).invert(y)?;
        Ok(())
    })
}

/// `j` i.i.d. draws from `N(mu, exp(log_var))`.
///
/// # Safety
/// `rng` must be live; `out` must hold `j` doubles.
#[no_mangle]
pub unsafe extern "C" fn estim_sim_gaussian(
    mu: f64,
    log_var: f64,
    j: usize,
    rng: *mut EstimRng,
    out: *mut f64,
) -> EstimStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        let x = sim_gaussian_iid(mu, log_var, j, &mut rng.0)?;
        copy_out(x.data(), slice_mut(out, j, "out")?)
    })
}

/// Stationary unit-innovation AR(1) series of length `t`.
///
/// # Safety
/// `rng` must be live; `out` must hold `t` doubles.
#[no_mangle]
pub unsafe extern "C" fn estim_sim_ar1(rho: f64, t: usize, rng: *mut EstimRng, out: *mut f64) -> EstimStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        let x = sim_ar1(rho, t, &mut rng.0)?;
        copy_out(x.data(), slice_mut(out, t, "out")?)
    })
}

/// Stochastic-volatility series of length `t`; `scaled` is 0 or 1.
///
/// # Safety
/// `rng` must be live; `out` must hold `t` doubles.
#[no_mangle]
pub unsafe extern "C" fn estim_sim_svol(
    rho: f64,
    nu: f64,
    sigma: f64,
    scaled: i32,
    t: usize,
    rng: *mut EstimRng,
    out: *mut f64,
) -> EstimStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        let p = SvolParams { rho, nu, sigma };
        let x = sim_svol(&p, t, &mut rng.0, scaled != 0)?;
        copy_out(x.data(), slice_mut(out, t, "out")?)
    })
}

/// Tiles `x[0..t]` up to length `t_k` into `out`; the start of the
/// remainder block is written to `offset` when it is non-null.
///
/// # Safety
/// `x` must hold `t` doubles, `out` `t_k` doubles; `rng` must be live.
#[no_mangle]
pub unsafe extern "C" fn estim_replicate(
    x: *const f64,
    t: usize,
    t_k: usize,
    rng: *mut EstimRng,
    out: *mut f64,
    offset: *mut usize,
) -> EstimStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        let (y, plan) = replicate(slice(x, t, "x")?, t_k, &mut rng.0)?;
        copy_out(&y, slice_mut(out, t_k, "out")?)?;
        if let Some(o) = offset.as_mut() {
            *o = plan.offset;
        }
        Ok(())
    })
}

/// Next sampling box from an estimate and `b x p` row-major bootstrap
/// estimates. Writes `p` values to each of `lower` and `upper`.
///
/// # Safety
/// `theta_hat` must hold `p` doubles, `samples` `b * p`, and both outputs `p`.
#[no_mangle]
pub unsafe extern "C" fn estim_update_bounds(
    theta_hat: *const f64,
    samples: *const f64,
    b: usize,
    p: usize,
    rule: EstimBoundsRule,
    lower: *mut f64,
    upper: *mut f64,
) -> EstimStatus {
    guard(|| {
        let th = slice(theta_hat, p, "theta_hat")?;
        let n = b
            .checked_mul(p)
            .ok_or_else(|| Fail(EstimStatus::InvalidArgument, "b * p overflows".into()))?;
        let samples = Tensor::new(vec![b, p], slice(samples, n, "samples")?.to_vec())?;
        let summary = BootstrapSummary::from_samples(th, samples, 1.0)?;
        let rule = match rule {
            EstimBoundsRule::Basic => BoundsRule::BasicBootstrap,
            EstimBoundsRule::Literal => BoundsRule::PaperLiteral,
        };
        let upd = update_bounds(th, &summary, rule)?;
        copy_out(&upd.bounds.lower, slice_mut(lower, p, "lower")?)?;
        copy_out(&upd.bounds.upper, slice_mut(upper, p, "upper")?)
    })
}

/// Loads a network saved as JSON at `path`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn estim_network_load(path: *const c_char, out: *mut *mut EstimNetwork) -> EstimStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EstimNetwork(TrainedNetwork::load(path)?)));
        Ok(())
    })
}

/// Parses a network from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn estim_network_from_json(json: *const c_char, out: *mut *mut EstimNetwork) -> EstimStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EstimNetwork(TrainedNetwork::from_json(json)?)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from a network constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn estim_network_free(net: *mut EstimNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Values per input sample; 0 for a null handle.
///
/// # Safety
/// `net` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn estim_network_input_len(net: *const EstimNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.spec.input_len())
}

/// Outputs per sample; 0 for a null handle.
///
/// # Safety
/// `net` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn estim_network_output_dim(net: *const EstimNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.output_dim())
}

/// Estimates for `n` samples stored row-major in `x`
/// (`n * input_len` values), written to `out` (`n * output_dim` values).
///
/// # Safety
/// `net` must be live; buffers must have the sizes above.
#[no_mangle]
pub unsafe extern "C" fn estim_network_predict(
    net: *const EstimNetwork,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> EstimStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.0;
        let (d_in, d_out) = (net.spec.input_len(), net.output_dim());
        let overflow = || Fail(EstimStatus::InvalidArgument, "n is too large".into());
        let x = slice(x, n.checked_mul(d_in).ok_or_else(overflow)?, "x")?;
        let out = slice_mut(out, n.checked_mul(d_out).ok_or_else(overflow)?, "out")?;
        if n == 0 {
            return Ok(());
        }
        let mut shape = vec![n];
        shape.extend(&net.spec.input_shape);
        let y = net.forward(&Tensor::new(shape, x.to_vec())?)?;
        copy_out(y.data(), out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::BadDof { nu: 1.0 }), EstimStatus::Domain);
        assert_eq!(status_of(&Error::Length { t: 2, t_k: 1 }), EstimStatus::ShapeMismatch);
        assert_eq!(status_of(&Error::EmptySample), EstimStatus::InvalidArgument);
    }
}
