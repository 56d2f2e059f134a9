//! C ABI for the statseg engine.
//!
//! Every entry point returns a [`StatsegStatus`]; results come back through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`statseg_last_error_message`]. Images and masks are opaque handles
//! created and freed on this side. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use statseg::energy::bhattacharyya;
use statseg::eval::fpf_tpf;
use statseg::levelset::{segment, Initialization};
use statseg::synth::calibrate;
use statseg::{Error, EvolveConfig, EvolveStatus, ExpFamily, Family, Mask, ScalarField, SpeedLaw};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Data or parameters outside a family's domain.
    Domain = 3,
    /// A region became empty or degenerate during evolution.
    Degenerate = 4,
    ShapeMismatch = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsegFamily {
    Gaussian = 0,
    Poisson = 1,
    Rayleigh = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsegFunctional {
    GaussianMl = 0,
    PoissonMl = 1,
    RayleighMl = 2,
    RayleighMoments = 3,
    ChanVese = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsegEvolveStatus {
    Converged = 0,
    MaxIter = 1,
    Collapsed = 2,
}

/// Evolution parameters. Obtain defaults from [`statseg_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StatsegConfig {
    pub functional: StatsegFunctional,
    pub lambda: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub reinit_every: usize,
    pub converge_tol: usize,
}

/// Real-valued image, row-major.
pub struct StatsegField(ScalarField);

/// Binary mask, row-major.
pub struct StatsegMask(Mask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> StatsegStatus {
    match e {
        Error::Domain { .. } | Error::Parameter { .. } | Error::Calibration(_) => StatsegStatus::Domain,
        Error::DegenerateRegion(_) | Error::Init(_) | Error::Reinit(_) => StatsegStatus::Degenerate,
        Error::Shape(_) => StatsegStatus::ShapeMismatch,
        Error::Spec(_) | Error::Eval(_) | Error::Format(_) => StatsegStatus::InvalidArgument,
        Error::Io(_) => StatsegStatus::Internal,
    }
}

fn fail(status: StatsegStatus, msg: impl Into<String>) -> StatsegStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), StatsegStatus>) -> StatsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StatsegStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(StatsegStatus::Internal, "panic inside statseg"),
    }
}

fn lib_err(e: Error) -> StatsegStatus {
    fail(status_of(&e), e.to_string())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), StatsegStatus> {
    if p.is_null() {
        Err(fail(StatsegStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

impl From<StatsegFamily> for Family {
    fn from(f: StatsegFamily) -> Self {
        match f {
            StatsegFamily::Gaussian => Family::Gaussian,
            StatsegFamily::Poisson => Family::Poisson,
            StatsegFamily::Rayleigh => Family::Rayleigh,
        }
    }
}

impl From<StatsegFunctional> for SpeedLaw {
    fn from(f: StatsegFunctional) -> Self {
        match f {
            StatsegFunctional::GaussianMl => SpeedLaw::MlLogLikelihood(Family::Gaussian),
            StatsegFunctional::PoissonMl => SpeedLaw::MlLogLikelihood(Family::Poisson),
            StatsegFunctional::RayleighMl => SpeedLaw::MlLogLikelihood(Family::Rayleigh),
            StatsegFunctional::RayleighMoments => SpeedLaw::MomentsRayleigh,
            StatsegFunctional::ChanVese => SpeedLaw::ChanVese,
        }
    }
}

impl From<&StatsegConfig> for EvolveConfig {
    fn from(c: &StatsegConfig) -> Self {
        EvolveConfig {
            lambda: c.lambda,
            dt: c.dt,
            epsilon: c.epsilon,
            max_iter: c.max_iter,
            reinit_every: c.reinit_every,
            converge_tol: c.converge_tol,
            speed_law: c.functional.into(),
        }
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn statseg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn statseg_config_default(functional: StatsegFunctional) -> StatsegConfig {
    let d = EvolveConfig::default();
    StatsegConfig {
        functional,
        lambda: d.lambda,
        dt: d.dt,
        epsilon: d.epsilon,
        max_iter: d.max_iter,
        reinit_every: d.reinit_every,
        converge_tol: d.converge_tol,
    }
}

/// Creates an image from `width * height` row-major samples.
///
/// # Safety
/// `data` must point to `width * height` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_field_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut StatsegField,
) -> StatsegStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0)
            .ok_or_else(|| fail(StatsegStatus::InvalidArgument, "image dimensions must be positive"))?;
        let values = slice::from_raw_parts(data, n).to_vec();
        let field = ScalarField::from_vec(width, height, values).expect("length checked");
        *out = Box::into_raw(Box::new(StatsegField(field)));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle from [`statseg_field_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn statseg_field_free(field: *mut StatsegField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Creates a mask from `width * height` row-major bytes; non-zero is foreground.
///
/// # Safety
/// `data` must point to `width * height` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_mask_new(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut StatsegMask,
) -> StatsegStatus {
    guard(|| {
        non_null(data, "data")?;
        non_null(out, "out")?;
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0)
            .ok_or_else(|| fail(StatsegStatus::InvalidArgument, "mask dimensions must be positive"))?;
        let values = slice::from_raw_parts(data, n).iter().map(|&b| b != 0).collect();
        let mask = Mask::from_vec(width, height, values).expect("length checked");
        *out = Box::into_raw(Box::new(StatsegMask(mask)));
        Ok(())
    })
}

/// Builds the default initialization for `field` (`local_radius == 0` gives
/// the circle lattice, otherwise the local-mean threshold of that radius).
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_initial_mask(
    field: *const StatsegField,
    local_radius: usize,
    out: *mut *mut StatsegMask,
) -> StatsegStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(out, "out")?;
        let init = if local_radius == 0 {
            Initialization::CircleGrid
        } else {
            Initialization::LocalMean { radius: local_radius }
        };
        *out = Box::into_raw(Box::new(StatsegMask(init.build(&(*field).0))));
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a live mask handle.
#[no_mangle]
pub unsafe extern "C" fn statseg_mask_free(mask: *mut StatsegMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Writes the mask dimensions and foreground pixel count. Any out-pointer may be null.
///
/// # Safety
/// `mask` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn statseg_mask_info(
    mask: *const StatsegMask,
    width: *mut usize,
    height: *mut usize,
    count: *mut usize,
) -> StatsegStatus {
    guard(|| {
        non_null(mask, "mask")?;
        let m = &(*mask).0;
        for (p, v) in [(width, m.width()), (height, m.height()), (count, m.count())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the mask as 0/1 bytes into `out`, which must hold `len >= width * height` bytes.
///
/// # Safety
/// `mask` must be a live handle and `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn statseg_mask_copy(mask: *const StatsegMask, out: *mut u8, len: usize) -> StatsegStatus {
    guard(|| {
        non_null(mask, "mask")?;
        non_null(out, "out")?;
        let m = &(*mask).0;
        if len < m.len() {
            return Err(fail(
                StatsegStatus::InvalidArgument,
                format!("buffer holds {len} bytes, mask has {}", m.len()),
            ));
        }
        let dst = slice::from_raw_parts_mut(out, m.len());
        for (d, &b) in dst.iter_mut().zip(m.iter()) {
            *d = b as u8;
        }
        Ok(())
    })
}

unsafe fn params<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], StatsegStatus> {
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

/// Bhattacharyya distance between two members of `family`, given in
/// conventional parameters (Poisson: rate; Rayleigh: scale; Gaussian: mean, variance).
///
/// # Safety
/// `a` and `b` must point to `n_a` and `n_b` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_bhattacharyya(
    family: StatsegFamily,
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut f64,
) -> StatsegStatus {
    guard(|| {
        non_null(out, "out")?;
        let f: Family = family.into();
        let ea = f.natural_from_conventional(params(a, n_a, "a")?).map_err(lib_err)?;
        let eb = f.natural_from_conventional(params(b, n_b, "b")?).map_err(lib_err)?;
        *out = bhattacharyya(f, &ea, &eb).map_err(lib_err)?;
        Ok(())
    })
}

/// Foreground parameters at Bhattacharyya distance `d` from `bg`. Writes
/// `family` dimension values (1 or 2) into `out`, which must hold `out_len` of them.
///
/// # Safety
/// `bg` must point to `n_bg` readable doubles and `out` to `out_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn statseg_calibrate(
    family: StatsegFamily,
    bg: *const f64,
    n_bg: usize,
    d: f64,
    out: *mut f64,
    out_len: usize,
) -> StatsegStatus {
    guard(|| {
        non_null(out, "out")?;
        let bg = params(bg, n_bg, "bg")?;
        let fg = calibrate(family.into(), &statseg::ParamVec::from_slice(bg), d).map_err(lib_err)?;
        if out_len < fg.len() {
            return Err(fail(StatsegStatus::InvalidArgument, format!("out needs {} values", fg.len())));
        }
        slice::from_raw_parts_mut(out, fg.len()).copy_from_slice(&fg);
        Ok(())
    })
}

/// Segments `field` from `init`. The final mask is returned in `out_mask`
/// (free with [`statseg_mask_free`]); `out_status` and `out_iterations` may be null.
///
/// # Safety
/// `field`, `init` and `config` must be valid; `out_mask` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_segment(
    field: *const StatsegField,
    init: *const StatsegMask,
    config: *const StatsegConfig,
    out_mask: *mut *mut StatsegMask,
    out_status: *mut StatsegEvolveStatus,
    out_iterations: *mut usize,
) -> StatsegStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(init, "init")?;
        non_null(config, "config")?;
        non_null(out_mask, "out_mask")?;
        let cfg = EvolveConfig::from(&*config);
        cfg.validate().map_err(lib_err)?;
        let seg = segment(&(*field).0, &(*init).0, &cfg).map_err(lib_err)?;
        if !out_status.is_null() {
            *out_status = match seg.status {
                EvolveStatus::Converged => StatsegEvolveStatus::Converged,
                EvolveStatus::Collapsed => StatsegEvolveStatus::Collapsed,
                _ => StatsegEvolveStatus::MaxIter,
            };
        }
        if !out_iterations.is_null() {
            *out_iterations = seg.iterations;
        }
        *out_mask = Box::into_raw(Box::new(StatsegMask(seg.mask)));
        Ok(())
    })
}

/// False- and true-positive fractions of `seg` against `gt`.
///
/// # Safety
/// Both masks must be live handles; `fpf` and `tpf` must be writable.
#[no_mangle]
pub unsafe extern "C" fn statseg_fpf_tpf(
    seg: *const StatsegMask,
    gt: *const StatsegMask,
    fpf: *mut f64,
    tpf: *mut f64,
) -> StatsegStatus {
    guard(|| {
        non_null(seg, "seg")?;
        non_null(gt, "gt")?;
        non_null(fpf, "fpf")?;
        non_null(tpf, "tpf")?;
        let (f, t) = fpf_tpf(&(*seg).0, &(*gt).0).map_err(lib_err)?;
        *fpf = f;
        *tpf = t;
        Ok(())
    })
}
