//! C ABI over the zerovisc study driver, fields and norms.
//!
//! Every function returns a [`ZvStatus`]; on failure the message is kept per
//! thread and read with [`zv_last_error`]. Handles are opaque and owned by
//! the caller, who releases them with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::os::raw::c_int;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use zerovisc::elliptic::HalfSpace;
use zerovisc::field::{SpectralField, Trace};
use zerovisc::grid::{Grid, GridSpec, Stretching};
use zerovisc::norms::{norm_suite, NormKind, NormSpec, WeightConfig};
use zerovisc::study::{fit_rate, run_study, StudyConfig, StudyReport};
use zerovisc::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZvStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    /// A pipeline stage refused (resolution, CFL, support guard, ...).
    Stage = 3,
    /// Grid, shape or numerical precondition violated.
    Numeric = 4,
    Io = 5,
    InvalidUtf8 = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Norm families accepted by [`zv_norm`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZvNormKind {
    Tangential = 0,
    Conormal = 1,
    Outer = 2,
    Layer = 3,
}

pub struct ZvConfig(StudyConfig);
pub struct ZvReport(StudyReport);
pub struct ZvGrid(Arc<Grid>);
pub struct ZvField(SpectralField);

thread_local! {
    static LAST: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last(msg: String) {
    LAST.with(|l| *l.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ZvStatus {
    match e {
        Error::Config(_) => ZvStatus::Config,
        Error::Io(_) => ZvStatus::Io,
        Error::Stage { .. }
        | Error::Cfl { .. }
        | Error::SupportErosion { .. }
        | Error::BlowUp { .. }
        | Error::Resolution { .. }
        | Error::Overflow { .. } => ZvStatus::Stage,
        Error::AxisOutOfRange { .. } | Error::Interpolation(_) => ZvStatus::OutOfRange,
        _ => ZvStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (ZvStatus, String)>) -> ZvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last(String::new());
            ZvStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_last(m);
            s
        }
        Err(_) => {
            set_last("panic inside zerovisc".into());
            ZvStatus::Panic
        }
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, (ZvStatus, String)>;
}

impl<T> Lift<T> for zerovisc::Result<T> {
    fn lift(self) -> Result<T, (ZvStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (ZvStatus, String) {
    (ZvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ZvStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ZvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ZvStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), (ZvStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (ZvStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn zv_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST.with(|l| {
        let m = l.borrow();
        if !buf.is_null() && len > 0 {
            let n = m.len().min(len - 1);
            ptr::copy_nonoverlapping(m.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        m.len()
    })
}

/// Desk configuration.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_config_desk(out: *mut *mut ZvConfig) -> ZvStatus {
    guard(|| put(out, ZvConfig(StudyConfig::desk())))
}

/// Parse and validate a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_config_from_toml(toml: *const c_char, out: *mut *mut ZvConfig) -> ZvStatus {
    guard(|| {
        let t = text(toml, "toml")?;
        put(out, ZvConfig(StudyConfig::from_toml(t).lift()?))
    })
}

/// Replace the eps sweep (must stay distinct and descending).
///
/// # Safety
/// `cfg` must come from this library; `eps` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn zv_config_set_eps(cfg: *mut ZvConfig, eps: *const f64, n: usize) -> ZvStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        let mut next = c.0.clone();
        next.eps = slice(eps, n, "eps")?.to_vec();
        next.validate().lift()?;
        c.0 = next;
        Ok(())
    })
}

/// Set the horizon and time step.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn zv_config_set_time(cfg: *mut ZvConfig, horizon: f64, dt: f64) -> ZvStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        let mut next = c.0.clone();
        next.horizon = horizon;
        next.dt = dt;
        next.validate().lift()?;
        c.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zv_config_free(cfg: *mut ZvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the full study. Long-running (minutes on the desk configuration).
///
/// # Safety
/// `cfg` must come from this library, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_study_run(cfg: *const ZvConfig, out: *mut *mut ZvReport) -> ZvStatus {
    guard(|| {
        let c = borrow(cfg, "config")?;
        put(out, ZvReport(run_study(&c.0).lift()?))
    })
}

/// Number of acceptance criteria evaluated by the study.
///
/// # Safety
/// `r` must come from this library, `n` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_report_criteria_count(r: *const ZvReport, n: *mut usize) -> ZvStatus {
    guard(|| {
        let r = borrow(r, "report")?;
        *n.as_mut().ok_or_else(|| null("n"))? = r.0.criteria.len();
        Ok(())
    })
}

/// Criterion `i`: its number and whether it passed (1) or failed (0).
///
/// # Safety
/// `r` must come from this library; `id` and `pass` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zv_report_criterion(r: *const ZvReport, i: usize, id: *mut u32, pass: *mut c_int) -> ZvStatus {
    guard(|| {
        let r = borrow(r, "report")?;
        let c = r.0.criteria.get(i).ok_or_else(|| (ZvStatus::OutOfRange, format!("no criterion {i}")))?;
        *id.as_mut().ok_or_else(|| null("id"))? = c.id;
        *pass.as_mut().ok_or_else(|| null("pass"))? = c.pass as c_int;
        Ok(())
    })
}

/// Fitted log-log slope of a named quantity (for example `err_l2_u`).
///
/// # Safety
/// `r` must come from this library, `name` NUL-terminated, `slope` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_report_rate(r: *const ZvReport, name: *const c_char, slope: *mut f64) -> ZvStatus {
    guard(|| {
        let r = borrow(r, "report")?;
        let q = text(name, "name")?;
        let f = r.0.rates.iter().find(|f| f.quantity == q).ok_or_else(|| (ZvStatus::OutOfRange, format!("no rate `{q}`")))?;
        *slope.as_mut().ok_or_else(|| null("slope"))? = f.slope;
        Ok(())
    })
}

/// Write the report files and manifest into `dir`.
///
/// # Safety
/// `r` must come from this library, `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zv_report_write(r: *const ZvReport, dir: *const c_char) -> ZvStatus {
    guard(|| {
        let r = borrow(r, "report")?;
        r.0.write(Path::new(text(dir, "dir")?)).lift()?;
        Ok(())
    })
}

/// # Safety
/// `r` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zv_report_free(r: *mut ZvReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Log-log least-squares slope of `values` against `eps` (`n >= 3`).
///
/// # Safety
/// `eps`, `values` valid for `n` doubles; `slope`, `residual` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zv_fit_rate(
    eps: *const f64,
    values: *const f64,
    n: usize,
    slope: *mut f64,
    residual: *mut f64,
) -> ZvStatus {
    guard(|| {
        let e = slice(eps, n, "eps")?;
        let v = slice(values, n, "values")?;
        let pairs: Vec<(f64, f64)> = e.iter().copied().zip(v.iter().copied()).collect();
        let f = fit_rate("rate", &pairs).lift()?;
        *slope.as_mut().ok_or_else(|| null("slope"))? = f.slope;
        *residual.as_mut().ok_or_else(|| null("residual"))? = f.residual;
        Ok(())
    })
}

/// Grid on `T^d x [0, ly]` with `nx` points per tangential direction and a
/// tanh-stretched normal direction (`beta = 0` for uniform).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_grid_new(
    d: usize,
    nx: usize,
    box_len: f64,
    ny: usize,
    ly: f64,
    beta: f64,
    out: *mut *mut ZvGrid,
) -> ZvStatus {
    guard(|| {
        let stretching = if beta == 0.0 { Stretching::Uniform } else { Stretching::Tanh { beta } };
        let g = GridSpec { d, nx, box_len, ny, ly, stretching }.build().lift()?;
        put(out, ZvGrid(g))
    })
}

/// Number of physical values of a field: `nx^d * ny`.
///
/// # Safety
/// `g` must come from this library, `n` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_grid_len(g: *const ZvGrid, n: *mut usize) -> ZvStatus {
    guard(|| {
        let g = borrow(g, "grid")?;
        *n.as_mut().ok_or_else(|| null("n"))? = g.0.nmodes() * g.0.ny();
        Ok(())
    })
}

/// Copy the `ny` wall-normal nodes into `y`.
///
/// # Safety
/// `g` must come from this library, `y` valid for `ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn zv_grid_nodes(g: *const ZvGrid, y: *mut f64, ny: usize) -> ZvStatus {
    guard(|| {
        let g = borrow(g, "grid")?;
        if ny != g.0.ny() || y.is_null() {
            return Err((ZvStatus::OutOfRange, format!("need a buffer of {} doubles", g.0.ny())));
        }
        ptr::copy_nonoverlapping(g.0.y().as_ptr(), y, ny);
        Ok(())
    })
}

/// # Safety
/// `g` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zv_grid_free(g: *mut ZvGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Field from physical values laid out `[p * ny + j]`, `p` the tangential
/// point and `j` the wall-normal node.
///
/// # Safety
/// `g` must come from this library, `values` valid for `n` doubles, `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_field_from_values(
    g: *const ZvGrid,
    values: *const f64,
    n: usize,
    out: *mut *mut ZvField,
) -> ZvStatus {
    guard(|| {
        let g = borrow(g, "grid")?;
        let v = slice(values, n, "values")?;
        put(out, ZvField(SpectralField::from_physical(&g.0, v, "field").lift()?))
    })
}

/// Physical values of a field, layout as in [`zv_field_from_values`].
///
/// # Safety
/// `f` must come from this library, `values` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn zv_field_values(f: *const ZvField, values: *mut f64, n: usize) -> ZvStatus {
    guard(|| {
        let f = borrow(f, "field")?;
        let p = f.0.to_physical();
        if n != p.len() || values.is_null() {
            return Err((ZvStatus::OutOfRange, format!("need a buffer of {} doubles", p.len())));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), values, n);
        Ok(())
    })
}

/// `d^order f / dy^order`, `order` 1 or 2.
///
/// # Safety
/// `f` must come from this library, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_field_dy(f: *const ZvField, order: usize, out: *mut *mut ZvField) -> ZvStatus {
    guard(|| {
        let f = borrow(f, "field")?;
        if !(1..=2).contains(&order) {
            return Err((ZvStatus::OutOfRange, format!("order {order} not in 1..=2")));
        }
        put(out, ZvField(f.0.normal_derivative(order).lift()?))
    })
}

/// `-Δu = rhs` with `u(0) = 0`, decaying at the top.
///
/// # Safety
/// `rhs` must come from this library, `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_solve_dirichlet(rhs: *const ZvField, out: *mut *mut ZvField) -> ZvStatus {
    guard(|| {
        let f = borrow(rhs, "rhs")?;
        let g = f.0.grid();
        let hs = HalfSpace::new(g).lift()?;
        put(out, ZvField(hs.solve_dirichlet(&f.0, &Trace::zeros(g)).lift()?))
    })
}

/// Weighted norm of order `m` at time `t` and viscosity scale `eps`.
///
/// # Safety
/// `f` must come from this library, `value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn zv_norm(
    f: *const ZvField,
    kind: ZvNormKind,
    m: usize,
    delta: f64,
    lambda: f64,
    t: f64,
    eps: f64,
    value: *mut f64,
) -> ZvStatus {
    guard(|| {
        let f = borrow(f, "field")?;
        let kind = match kind {
            ZvNormKind::Tangential => NormKind::Tan,
            ZvNormKind::Conormal => NormKind::Co,
            ZvNormKind::Outer => NormKind::Outer,
            ZvNormKind::Layer => NormKind::Layer,
        };
        let cfg = WeightConfig::new(delta, lambda).lift()?;
        let v = norm_suite(&f.0, &cfg, t, eps, NormSpec::new(kind, m)).lift()?;
        *value.as_mut().ok_or_else(|| null("value"))? = v;
        Ok(())
    })
}

/// # Safety
/// `f` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zv_field_free(f: *mut ZvField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}
