//! C interface to `umpr`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`UmprStatus`]; on failure a description is kept per thread and
//! can be read with [`umpr_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use umpr::cli::{experiment_echo, read_dataset, ConfigMap};
use umpr::optimizer::OptimizerConfig;
use umpr::penalties::{PenaltyKind, PenaltySpec};
use umpr::rng::stream;
use umpr::selection::{self, mu_fit};
use umpr::simulation::rgeu_experiment;
use umpr::{empirical_utility, CatalogPreference, Dataset, Error, HierarchySpec, Label, Link, PolynomialClass, Preference, PredictionRule};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UmprStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Empty = 4,
    Parse = 5,
    Config = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for UmprStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => UmprStatus::DimensionMismatch,
            Error::Empty => UmprStatus::Empty,
            Error::Parse { .. } => UmprStatus::Parse,
            Error::Config(_) => UmprStatus::Config,
            Error::Numerical(_) => UmprStatus::Numerical,
            Error::Io(_) => UmprStatus::Io,
            _ => UmprStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(UmprStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(UmprStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(UmprStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> UmprStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UmprStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            UmprStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(UmprStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|_| Fail(UmprStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn umpr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` is null or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn umpr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Annealer settings. [`umpr_optimizer_default`] fills the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UmprOptimizer {
    pub restarts: usize,
    pub iterations: usize,
    pub initial_temperature: f64,
    pub cooling: f64,
    pub step: f64,
}

impl From<UmprOptimizer> for OptimizerConfig {
    fn from(o: UmprOptimizer) -> Self {
        OptimizerConfig {
            restarts: o.restarts,
            iterations: o.iterations,
            initial_temperature: o.initial_temperature,
            cooling: o.cooling,
            step: o.step,
        }
    }
}

#[no_mangle]
pub extern "C" fn umpr_optimizer_default() -> UmprOptimizer {
    let c = OptimizerConfig::default();
    UmprOptimizer { restarts: c.restarts, iterations: c.iterations, initial_temperature: c.initial_temperature, cooling: c.cooling, step: c.step }
}

unsafe fn optimizer(p: *const UmprOptimizer) -> Result<OptimizerConfig, Fail> {
    let cfg: OptimizerConfig = p.as_ref().map_or_else(OptimizerConfig::default, |o| (*o).into());
    cfg.validate()?;
    Ok(cfg)
}

/// Opaque dataset.
pub struct UmprDataset(Dataset);

/// Opaque preference.
pub struct UmprPreference(Preference);

/// Opaque prediction rule.
pub struct UmprRule(PredictionRule);

/// Builds a dataset from `n` labels in {-1, 1} and an `n * d` row-major
/// covariate array.
///
/// # Safety
/// `labels` holds `n` values, `x` holds `n * d` values, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_dataset_new(d: usize, n: usize, labels: *const i32, x: *const f64, out: *mut *mut UmprDataset) -> UmprStatus {
    guard(|| {
        let labels = slice(labels, n, "labels")?;
        let total = n.checked_mul(d).ok_or_else(|| Fail(UmprStatus::InvalidArgument, "n * d overflows".into()))?;
        let x = slice(x, total, "x")?;
        let labels = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| Label::from_i64(y as i64).ok_or_else(|| Fail(UmprStatus::InvalidArgument, format!("label {i} is {y}, not -1 or 1"))))
            .collect::<Result<Vec<_>, _>>()?;
        let data = Dataset::from_parts(d, labels, x.to_vec())?;
        write_out(out, Box::into_raw(Box::new(UmprDataset(data))), "out")
    })
}

/// Reads a `y,x1,...,xd` CSV file.
///
/// # Safety
/// `path` is a NUL-terminated string, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_dataset_read_csv(path: *const c_char, out: *mut *mut UmprDataset) -> UmprStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Fail(UmprStatus::Io, format!("{path}: {e}")))?;
        let data = read_dataset(std::io::BufReader::new(file))?;
        write_out(out, Box::into_raw(Box::new(UmprDataset(data))), "out")
    })
}

/// Number of observations, 0 for a null handle.
///
/// # Safety
/// `data` is null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn umpr_dataset_len(data: *const UmprDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Covariate dimension, 0 for a null handle.
///
/// # Safety
/// `data` is null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn umpr_dataset_dim(data: *const UmprDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `data` is null or a live dataset handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn umpr_dataset_free(data: *mut UmprDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Constant weight `b` and cutoff `c`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_preference_constant(b: f64, c: f64, out: *mut *mut UmprPreference) -> UmprStatus {
    guard(|| {
        let p = Preference::constant(b, c)?;
        write_out(out, Box::into_raw(Box::new(UmprPreference(p))), "out")
    })
}

/// Catalog preference 1 to 4.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_preference_catalog(id: u32, out: *mut *mut UmprPreference) -> UmprStatus {
    guard(|| {
        let entry = CatalogPreference::from_id(id).ok_or_else(|| Fail(UmprStatus::InvalidArgument, format!("no catalog preference {id}")))?;
        write_out(out, Box::into_raw(Box::new(UmprPreference(Preference::catalog(entry)))), "out")
    })
}

/// The utility bound `M` of a preference, NaN for a null handle.
///
/// # Safety
/// `pref` is null or a live preference handle.
#[no_mangle]
pub unsafe extern "C" fn umpr_preference_bound(pref: *const UmprPreference) -> f64 {
    pref.as_ref().map_or(f64::NAN, |p| p.0.bound())
}

/// # Safety
/// `pref` is null or a live preference handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn umpr_preference_free(pref: *mut UmprPreference) {
    if !pref.is_null() {
        drop(Box::from_raw(pref));
    }
}

/// Parses a rule record `d,k,link,coef...`.
///
/// # Safety
/// `record` is a NUL-terminated string, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_rule_from_record(record: *const c_char, out: *mut *mut UmprRule) -> UmprStatus {
    guard(|| {
        let rule = PredictionRule::from_record(as_str(record, "record")?)?;
        write_out(out, Box::into_raw(Box::new(UmprRule(rule))), "out")
    })
}

/// The rule record; release it with [`umpr_string_free`].
///
/// # Safety
/// `rule` is a live rule handle, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_rule_to_record(rule: *const UmprRule, out: *mut *mut c_char) -> UmprStatus {
    guard(|| {
        let s = into_c_string(as_ref(rule, "rule")?.0.to_record())?;
        write_out(out, s, "out")
    })
}

/// `f(x)` for a point of the rule's dimension.
///
/// # Safety
/// `rule` is a live rule handle, `x` holds `d` values, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_rule_evaluate(rule: *const UmprRule, x: *const f64, d: usize, out: *mut f64) -> UmprStatus {
    guard(|| {
        let rule = &as_ref(rule, "rule")?.0;
        if d != rule.class().dim() {
            return Err(Error::DimensionMismatch { expected: rule.class().dim(), got: d }.into());
        }
        let v = rule.evaluate(slice(x, d, "x")?)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `rule` is null or a live rule handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn umpr_rule_free(rule: *mut UmprRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Empirical utility `S_n` of a rule.
///
/// # Safety
/// Handles are live, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_empirical_utility(
    rule: *const UmprRule,
    data: *const UmprDataset,
    pref: *const UmprPreference,
    out: *mut f64,
) -> UmprStatus {
    guard(|| {
        let v = empirical_utility(&as_ref(rule, "rule")?.0, &as_ref(data, "data")?.0, &as_ref(pref, "pref")?.0)?;
        write_out(out, v.get(), "out")
    })
}

/// Maximum utility fit over polynomials of total degree `degree` with the
/// identity link. A null `opt` uses the default annealer.
///
/// # Safety
/// Handles are live, `opt` is null or readable, outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_mu_fit(
    data: *const UmprDataset,
    pref: *const UmprPreference,
    degree: usize,
    opt: *const UmprOptimizer,
    seed: u64,
    out_rule: *mut *mut UmprRule,
    out_utility: *mut f64,
) -> UmprStatus {
    guard(|| {
        let data = &as_ref(data, "data")?.0;
        let pref = &as_ref(pref, "pref")?.0;
        let class = PolynomialClass::new(data.dim(), degree, Link::Identity)?;
        let fit = mu_fit(&class, data, pref, &optimizer(opt)?, &mut stream(seed))?;
        if out_rule.is_null() || out_utility.is_null() {
            return Err(null("output"));
        }
        out_utility.write(fit.utility);
        out_rule.write(Box::into_raw(Box::new(UmprRule(fit.rule))));
        Ok(())
    })
}

/// Penalty kinds for [`umpr_select`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UmprPenalty {
    Vc = 0,
    Md = 1,
    Smd = 2,
    Rc = 3,
    Bc = 4,
}

impl From<UmprPenalty> for PenaltyKind {
    fn from(p: UmprPenalty) -> Self {
        match p {
            UmprPenalty::Vc => PenaltyKind::Vc,
            UmprPenalty::Md => PenaltyKind::Md,
            UmprPenalty::Smd => PenaltyKind::Smd,
            UmprPenalty::Rc => PenaltyKind::Rc,
            UmprPenalty::Bc => PenaltyKind::Bc,
        }
    }
}

/// Penalized selection over polynomial degrees `1..=depth`, using the
/// preference's bound. Writes the chosen degree and rule.
///
/// # Safety
/// Handles are live, `opt` is null or readable, outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_select(
    data: *const UmprDataset,
    pref: *const UmprPreference,
    depth: usize,
    penalty: UmprPenalty,
    alpha: f64,
    m: usize,
    technical_term: bool,
    opt: *const UmprOptimizer,
    seed: u64,
    out_k: *mut usize,
    out_rule: *mut *mut UmprRule,
) -> UmprStatus {
    guard(|| {
        let data = &as_ref(data, "data")?.0;
        let pref = &as_ref(pref, "pref")?.0;
        let hierarchy = HierarchySpec::polynomial(data.dim(), depth, Link::Identity)?;
        let spec = PenaltySpec::new(penalty.into(), alpha, m, technical_term)?;
        let sel = selection::umpr_select(&hierarchy, data, pref, &spec, pref.bound(), &optimizer(opt)?, &mut stream(seed))?;
        if out_k.is_null() || out_rule.is_null() {
            return Err(null("output"));
        }
        out_k.write(sel.chosen_k);
        out_rule.write(Box::into_raw(Box::new(UmprRule(sel.rule))));
        Ok(())
    })
}

/// Runs an experiment described by `key = value` lines, with the same keys
/// as the command line, and returns the TSV report. Release it with
/// [`umpr_string_free`]. The `seed` key is required.
///
/// # Safety
/// `config` is a NUL-terminated string, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn umpr_experiment_tsv(config: *const c_char, out: *mut *mut c_char) -> UmprStatus {
    guard(|| {
        let map = ConfigMap::parse(as_str(config, "config")?)?;
        let cfg = map.experiment()?;
        let report = rgeu_experiment(&cfg)?;
        let s = into_c_string(report.to_tsv(&experiment_echo(&cfg)))?;
        write_out(out, s, "out")
    })
}
