//! C interface to the `ibr` library.
//!
//! Every function returns an [`IbrStatus`]; on failure a description is
//! available from [`ibr_last_error_message`] on the same thread. Models are
//! opaque handles created by [`ibr_fit`] or [`ibr_model_load`] and released
//! with [`ibr_model_free`]. Matrices are dense, row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ibr::cli_io::SavedModel;
use ibr::nalgebra::{DMatrix, DVector};
use ibr::{CriterionKind, DesignMatrix, IbrError, KernelKind, SearchMode, SelectionPlan, SmootherConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Calibration = 3,
    Decomposition = 4,
    NonIntegerK = 5,
    Breakdown = 6,
    NoAdmissibleK = 7,
    OutsideSupport = 8,
    Data = 9,
    Model = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbrSmootherKind {
    Kernel = 0,
    ThinPlate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbrCriterion {
    Gcv = 0,
    Aic = 1,
    Aicc = 2,
    Bic = 3,
    Gmdl = 4,
    Rmse = 5,
    Map = 6,
}

/// Fit settings. Obtain defaults from [`ibr_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IbrFitOptions {
    pub smoother: IbrSmootherKind,
    /// Kernel tag: 'g', 't', 'q', 'e' or 'u'.
    pub kernel: c_char,
    /// Per-variable trace (kernel) or null-space multiplier (spline).
    pub df: f64,
    /// Nonzero: `df` is the total trace of the kernel smoother.
    pub df_total: i32,
    /// Spline order; 0 selects the smallest valid one.
    pub tps_order: u32,
    pub criterion: IbrCriterion,
    /// Nonzero: exhaustive integer search.
    pub exhaustive: i32,
    /// Nonzero: use exactly this many iterations.
    pub fixed_iterations: u64,
    pub kmin: f64,
    pub kmax: f64,
    /// Df ceiling; non-positive selects 2n/3.
    pub dfmaxi: f64,
    /// Folds for rmse/map; 0 uses repeated random splits instead.
    pub cv_folds: u32,
    pub seed: u64,
}

/// Fitted model handle.
pub struct IbrModel {
    inner: SavedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &IbrError) -> IbrStatus {
    match err {
        IbrError::InvalidInput(_) => IbrStatus::InvalidArgument,
        IbrError::Calibration(_) => IbrStatus::Calibration,
        IbrError::Decomposition(_) => IbrStatus::Decomposition,
        IbrError::NonIntegerK { .. } => IbrStatus::NonIntegerK,
        IbrError::Breakdown(_) => IbrStatus::Breakdown,
        IbrError::NoAdmissibleK(_) => IbrStatus::NoAdmissibleK,
        IbrError::OutsideSupport(_) => IbrStatus::OutsideSupport,
        IbrError::Fold { source, .. } => status_of(source),
        IbrError::Data(_) | IbrError::Csv(_) => IbrStatus::Data,
        IbrError::Model(_) | IbrError::Json(_) => IbrStatus::Model,
        IbrError::Io(_) => IbrStatus::Io,
    }
}

enum Failure {
    Status(IbrStatus, String),
    Lib(IbrError),
}

impl From<IbrError> for Failure {
    fn from(e: IbrError) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IbrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IbrStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            IbrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(IbrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(IbrStatus::InvalidArgument, msg.into())
}

unsafe fn model_ref<'a>(model: *const IbrModel) -> Result<&'a SavedModel, Failure> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path).to_str().map(Path::new).map_err(|_| invalid("path is not valid UTF-8"))
}

fn criterion(c: IbrCriterion) -> CriterionKind {
    match c {
        IbrCriterion::Gcv => CriterionKind::Gcv,
        IbrCriterion::Aic => CriterionKind::Aic,
        IbrCriterion::Aicc => CriterionKind::Aicc,
        IbrCriterion::Bic => CriterionKind::Bic,
        IbrCriterion::Gmdl => CriterionKind::Gmdl,
        IbrCriterion::Rmse => CriterionKind::Rmse,
        IbrCriterion::Map => CriterionKind::Map,
    }
}

fn translate(opts: &IbrFitOptions) -> Result<(SmootherConfig, SelectionPlan), Failure> {
    let config = match opts.smoother {
        IbrSmootherKind::Kernel => {
            let tag = u8::try_from(opts.kernel).map(char::from).map_err(|_| invalid("bad kernel tag"))?;
            let kind = KernelKind::from_tag(&tag.to_string())?;
            SmootherConfig::Kernel { kind, df: opts.df, total: opts.df_total != 0 }
        }
        IbrSmootherKind::ThinPlate => SmootherConfig::Tps {
            order: (opts.tps_order > 0).then_some(opts.tps_order as usize),
            df: opts.df,
        },
    };
    let mut plan = SelectionPlan::with_criterion(criterion(opts.criterion));
    plan.kmin = opts.kmin;
    plan.kmax = opts.kmax;
    plan.dfmaxi = (opts.dfmaxi > 0.0).then_some(opts.dfmaxi);
    plan.mode = match (opts.fixed_iterations, opts.exhaustive != 0) {
        (0, false) => SearchMode::Numeric,
        (0, true) => SearchMode::Exhaustive,
        (k, false) => SearchMode::Fixed(k),
        (_, true) => return Err(invalid("fixed_iterations and exhaustive are exclusive")),
    };
    if let Some(cv) = plan.cv.as_mut() {
        cv.seed = opts.seed;
        if opts.cv_folds > 0 {
            cv.scheme = ibr::FoldScheme::KFold(Some(opts.cv_folds as usize));
        }
    }
    Ok((config, plan))
}

/// Default settings: Gaussian kernel, df 1.1, GCV, numeric search.
#[no_mangle]
pub extern "C" fn ibr_fit_options_default() -> IbrFitOptions {
    IbrFitOptions {
        smoother: IbrSmootherKind::Kernel,
        kernel: b'g' as c_char,
        df: 1.1,
        df_total: 0,
        tps_order: 0,
        criterion: IbrCriterion::Gcv,
        exhaustive: 0,
        fixed_iterations: 0,
        kmin: 1.0,
        kmax: 1e5,
        dfmaxi: 0.0,
        cv_folds: 0,
        seed: 1,
    }
}

/// Fits a model to `n` observations of `d` covariates (`x` row-major, n*d)
/// and response `y` (length n). On success `*out` owns a new handle.
///
/// # Safety
/// `x` and `y` must point to `n*d` and `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_fit(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    options: *const IbrFitOptions,
    out: *mut *mut IbrModel,
) -> IbrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if x.is_null() || y.is_null() {
            return Err(null("data"));
        }
        if n == 0 || d == 0 {
            return Err(invalid("n and d must be positive"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| ibr_fit_options_default());
        let (config, plan) = translate(&opts)?;
        let xs = std::slice::from_raw_parts(x, n * d);
        let ys = std::slice::from_raw_parts(y, n);
        let names = (1..=d).map(|j| format!("x{j}")).collect();
        let design = DesignMatrix::new(DMatrix::from_row_slice(n, d, xs), names)?;
        let fit = ibr::fit(&design, &DVector::from_column_slice(ys), &config, &plan)?;
        let model = Box::new(IbrModel { inner: SavedModel::from_fit(&fit, "y") });
        *out = Box::into_raw(model);
        Ok(())
    })
}

/// Predicts at `m` new points (`x_new` row-major, m*d) into `out` (length m).
///
/// # Safety
/// Pointers must reference arrays of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_predict(
    model: *const IbrModel,
    x_new: *const f64,
    m: usize,
    d: usize,
    out: *mut f64,
) -> IbrStatus {
    guard(|| {
        let model = model_ref(model)?;
        if m == 0 {
            return Ok(());
        }
        if x_new.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let dim = model.covariates.len();
        if d != dim {
            return Err(invalid(format!("model expects {dim} covariates, got {d}")));
        }
        let x = DMatrix::from_row_slice(m, d, std::slice::from_raw_parts(x_new, m * d));
        let pred = model.predict(&x)?;
        std::slice::from_raw_parts_mut(out, m).copy_from_slice(pred.as_slice());
        Ok(())
    })
}

unsafe fn get<T>(model: *const IbrModel, out: *mut T, f: impl FnOnce(&SavedModel) -> T) -> IbrStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(m);
        Ok(())
    })
}

/// Unrounded optimum of the iteration-count search.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_k(model: *const IbrModel, out: *mut f64) -> IbrStatus {
    get(model, out, |m| m.k_optimum)
}

/// Iteration count used by the fit (the optimum truncated).
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_iterations(model: *const IbrModel, out: *mut u64) -> IbrStatus {
    get(model, out, |m| m.iterations)
}

/// Trace of the base smoother.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_initial_df(model: *const IbrModel, out: *mut f64) -> IbrStatus {
    get(model, out, |m| m.initial_df)
}

/// Trace of the iterated smoother.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_final_df(model: *const IbrModel, out: *mut f64) -> IbrStatus {
    get(model, out, |m| m.final_df)
}

/// Criterion value at the selected `k`; NaN when unavailable.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_criterion_value(model: *const IbrModel, out: *mut f64) -> IbrStatus {
    get(model, out, |m| m.criterion_value.unwrap_or(f64::NAN))
}

/// Number of training observations.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_n(model: *const IbrModel, out: *mut usize) -> IbrStatus {
    get(model, out, |m| m.fitted.len())
}

/// Number of covariates.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_dim(model: *const IbrModel, out: *mut usize) -> IbrStatus {
    get(model, out, |m| m.covariates.len())
}

/// Copies the `n` training fitted values into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_fitted(model: *const IbrModel, out: *mut f64, len: usize) -> IbrStatus {
    guard(|| {
        let model = model_ref(model)?;
        if len != model.fitted.len() {
            return Err(invalid(format!(
                "buffer length {len}, model has {} fitted values",
                model.fitted.len()
            )));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&model.fitted);
        Ok(())
    })
}

/// Writes the model as JSON.
///
/// # Safety
/// `path` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_save(model: *const IbrModel, path: *const c_char) -> IbrStatus {
    guard(|| {
        let model = model_ref(model)?;
        model.save(path_arg(path)?)?;
        Ok(())
    })
}

/// Reads a model written by [`ibr_model_save`] or the command-line tool.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_load(path: *const c_char, out: *mut *mut IbrModel) -> IbrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = SavedModel::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(IbrModel { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ibr_model_free(model: *mut IbrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ibr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ibr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
