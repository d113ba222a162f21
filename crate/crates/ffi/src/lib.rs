//! C ABI over `species_sampling`.
//!
//! Conventions:
//! * every fallible function returns an [`SsmStatus`] and writes results
//!   through out-pointers, which are left untouched on failure;
//! * the message of the most recent failure on the calling thread is
//!   available from [`ssm_last_error_message`];
//! * handles are opaque, created by the constructor functions and released
//!   by the matching `ssm_*_free`, which accept null;
//! * strings returned to the caller are NUL-terminated UTF-8 and must be
//!   released with [`ssm_string_free`];
//! * compositions are passed as `(sizes, k)` arrays of cluster sizes in
//!   order of appearance.
//!
//! Panics never cross the boundary; they surface as [`SsmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::{Deserialize, Serialize};

use species_sampling::cli::{Likelihood, Preset};
use species_sampling::estimator::estimate_ppf;
use species_sampling::mcmc::{
    grid_data, run_chain, sarcoma_data, summarize, BinomialModelConfig, BinomialObs,
    ConjugateModel, NormalModelConfig, PartitionPriorSpec, PosteriorSummary, DEFAULT_BURN_IN,
};
use species_sampling::weights::WeightModel;
use species_sampling::{
    check_balance, check_label_symmetry, dp_eppf, eppf_from_ppf, Composition, EppfTable, Error,
    PpfFamily, PutativePpf,
};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPpf = 3,
    PathDependent = 4,
    MissingEntry = 5,
    DegenerateWeights = 6,
    BufferTooSmall = 7,
    Parse = 8,
    Method = 9,
    Panic = 10,
}

/// A putative PPF.
pub struct SsmPpf {
    inner: PutativePpf,
}

/// A table of log EPPF values.
pub struct SsmEppfTable {
    inner: EppfTable,
}

/// A prior on weight sequences.
pub struct SsmWeightModel {
    inner: WeightModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: SsmStatus,
    message: String,
}

impl Failure {
    fn new(status: SsmStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(SsmStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidPpf { .. } => SsmStatus::InvalidPpf,
            Error::PathDependent { .. } => SsmStatus::PathDependent,
            Error::MissingEntry(_) | Error::DivisionByZero(_) => SsmStatus::MissingEntry,
            Error::DegenerateWeights { .. } => SsmStatus::DegenerateWeights,
            Error::InvalidParameter(_)
            | Error::InvalidComposition(_)
            | Error::InvalidMembership(_)
            | Error::CompositionTooDeep { .. } => SsmStatus::InvalidArgument,
            Error::Json(_) | Error::Parse(_) | Error::Csv(_) => SsmStatus::Parse,
            _ => SsmStatus::Method,
        };
        Self::new(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::new(SsmStatus::Parse, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> SsmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SsmStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SsmStatus::Panic
        }
    }
}

unsafe fn composition(sizes: *const usize, k: usize) -> Result<Composition, Failure> {
    if sizes.is_null() {
        return Err(Failure::null("sizes"));
    }
    Ok(Composition::new(
        std::slice::from_raw_parts(sizes, k).to_vec(),
    )?)
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure::null("string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure::new(SsmStatus::Parse, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure::new(SsmStatus::Method, e.to_string()))
}

/// Copy of the last error message on this thread, or null if none.
/// Release with [`ssm_string_free`].
#[no_mangle]
pub extern "C" fn ssm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |c| c.clone().into_raw())
    })
}

/// Releases a string returned by this library. Accepts null.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ssm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ssm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn new_ppf(family: PpfFamily, out: *mut *mut SsmPpf) -> Result<(), Failure> {
    let inner = family.build()?;
    unsafe { put(out, Box::into_raw(Box::new(SsmPpf { inner })), "out") }
}

/// Dirichlet process PPF with mass `theta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_dp(theta: f64, out: *mut *mut SsmPpf) -> SsmStatus {
    guard(|| new_ppf(PpfFamily::Dp { theta }, out))
}

/// PPF proportional to `slope·n_j + intercept` for old clusters and `theta`
/// for a new one.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_linear(
    slope: f64,
    intercept: f64,
    theta: f64,
    out: *mut *mut SsmPpf,
) -> SsmStatus {
    guard(|| {
        new_ppf(
            PpfFamily::LinearF {
                slope,
                intercept,
                theta,
            },
            out,
        )
    })
}

/// PPF proportional to the polynomial `Σ_d coefficients[d]·n_j^d` for old
/// clusters and `theta` for a new one.
///
/// # Safety
/// `coefficients` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_polynomial(
    coefficients: *const f64,
    len: usize,
    theta: f64,
    out: *mut *mut SsmPpf,
) -> SsmStatus {
    guard(|| {
        if coefficients.is_null() {
            return Err(Failure::null("coefficients"));
        }
        let coefficients = std::slice::from_raw_parts(coefficients, len).to_vec();
        new_ppf(
            PpfFamily::PolynomialF {
                coefficients,
                theta,
            },
            out,
        )
    })
}

/// PPF from a JSON family description such as
/// `{"family":"dp","theta":1.0}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_from_json(
    json: *const c_char,
    out: *mut *mut SsmPpf,
) -> SsmStatus {
    guard(|| {
        let family: PpfFamily = serde_json::from_str(text(json)?)?;
        new_ppf(family, out)
    })
}

/// # Safety
/// `ppf` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_free(ppf: *mut SsmPpf) {
    if !ppf.is_null() {
        drop(Box::from_raw(ppf));
    }
}

/// Writes the `k + 1` predictive probabilities at a composition into `out`,
/// which must hold at least `out_len ≥ k + 1` doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ssm_ppf_evaluate(
    ppf: *const SsmPpf,
    sizes: *const usize,
    k: usize,
    out: *mut f64,
    out_len: usize,
) -> SsmStatus {
    guard(|| {
        let ppf = handle(ppf, "ppf")?;
        let n = composition(sizes, k)?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        if out_len < k + 1 {
            return Err(Failure::new(
                SsmStatus::BufferTooSmall,
                format!("need {} slots, got {out_len}", k + 1),
            ));
        }
        let p = ppf.inner.evaluate(&n)?;
        std::ptr::copy_nonoverlapping(p.as_ptr(), out, p.len());
        Ok(())
    })
}

unsafe fn report(
    holds: bool,
    json: String,
    holds_out: *mut bool,
    report_out: *mut *mut c_char,
) -> Result<(), Failure> {
    put(holds_out, holds, "holds")?;
    if !report_out.is_null() {
        report_out.write(owned_string(json)?);
    }
    Ok(())
}

/// Checks the balance condition on every composition of total below
/// `bound`. `report` (nullable) receives the JSON report.
///
/// # Safety
/// `ppf` and `holds` must be valid; `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn ssm_check_balance(
    ppf: *const SsmPpf,
    bound: usize,
    holds: *mut bool,
    report: *mut *mut c_char,
) -> SsmStatus {
    guard(|| {
        let r = check_balance(&handle(ppf, "ppf")?.inner, bound)?;
        self::report(r.holds, r.to_json()?, holds, report)
    })
}

/// Checks invariance of the PPF under relabeling of old clusters.
///
/// # Safety
/// `ppf` and `holds` must be valid; `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn ssm_check_label_symmetry(
    ppf: *const SsmPpf,
    bound: usize,
    holds: *mut bool,
    report: *mut *mut c_char,
) -> SsmStatus {
    guard(|| {
        let r = check_label_symmetry(&handle(ppf, "ppf")?.inner, bound)?;
        self::report(r.holds, r.to_json()?, holds, report)
    })
}

fn new_table(inner: EppfTable, out: *mut *mut SsmEppfTable) -> Result<(), Failure> {
    unsafe { put(out, Box::into_raw(Box::new(SsmEppfTable { inner })), "out") }
}

/// EPPF table implied by a PPF on all compositions of total up to `bound`.
/// Fails with `PathDependent` when the PPF is not a valid one.
///
/// # Safety
/// `ppf` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_eppf_from_ppf(
    ppf: *const SsmPpf,
    bound: usize,
    out: *mut *mut SsmEppfTable,
) -> SsmStatus {
    guard(|| new_table(eppf_from_ppf(&handle(ppf, "ppf")?.inner, bound)?, out))
}

/// Closed-form Dirichlet process EPPF table.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_eppf_dp(
    theta: f64,
    a: f64,
    bound: usize,
    out: *mut *mut SsmEppfTable,
) -> SsmStatus {
    guard(|| new_table(EppfTable::dp(theta, a, bound)?, out))
}

/// # Safety
/// `table` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_eppf_free(table: *mut SsmEppfTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of compositions in a table; zero for null.
///
/// # Safety
/// `table` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_eppf_len(table: *const SsmEppfTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.len())
}

/// Natural log of the EPPF at a composition.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ssm_eppf_log_prob(
    table: *const SsmEppfTable,
    sizes: *const usize,
    k: usize,
    out: *mut f64,
) -> SsmStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let n = composition(sizes, k)?;
        put(out, t.inner.log_prob(&n)?, "out")
    })
}

/// Dirichlet process EPPF in closed form.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ssm_dp_eppf(
    sizes: *const usize,
    k: usize,
    theta: f64,
    a: f64,
    out: *mut f64,
) -> SsmStatus {
    guard(|| {
        let n = composition(sizes, k)?;
        put(out, dp_eppf(&n, theta, a)?, "out")
    })
}

fn new_model(inner: WeightModel, out: *mut *mut SsmWeightModel) -> Result<(), Failure> {
    inner.validate()?;
    unsafe {
        put(
            out,
            Box::into_raw(Box::new(SsmWeightModel { inner })),
            "out",
        )
    }
}

/// Weight model from JSON such as
/// `{"kind":"logistic-normal","params":{"a":1,"b":5,"sigma2":1}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_weight_model_from_json(
    json: *const c_char,
    out: *mut *mut SsmWeightModel,
) -> SsmStatus {
    guard(|| new_model(serde_json::from_str(text(json)?)?, out))
}

/// Logistic-normal weights with location `−log(1 + e^{a·h − b})` and
/// log-scale variance `sigma2`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_weight_model_logistic_normal(
    a: f64,
    b: f64,
    sigma2: f64,
    out: *mut *mut SsmWeightModel,
) -> SsmStatus {
    guard(|| new_model(WeightModel::logistic_normal(a, b, sigma2), out))
}

/// Dirichlet process stick-breaking weights with mass `theta`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_weight_model_dp(
    theta: f64,
    out: *mut *mut SsmWeightModel,
) -> SsmStatus {
    guard(|| new_model(WeightModel::dp(theta), out))
}

/// # Safety
/// `model` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_weight_model_free(model: *mut SsmWeightModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Monte Carlo PPF at a composition from `draws` prior weight draws.
/// `probabilities` must hold `out_len ≥ k + 1` doubles; `standard_errors`
/// (same length) and `ess` may be null.
///
/// # Safety
/// Non-null pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ssm_estimate_ppf(
    model: *const SsmWeightModel,
    sizes: *const usize,
    k: usize,
    draws: usize,
    seed: u64,
    probabilities: *mut f64,
    standard_errors: *mut f64,
    out_len: usize,
    ess: *mut f64,
) -> SsmStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let n = composition(sizes, k)?;
        if probabilities.is_null() {
            return Err(Failure::null("probabilities"));
        }
        if out_len < k + 1 {
            return Err(Failure::new(
                SsmStatus::BufferTooSmall,
                format!("need {} slots, got {out_len}", k + 1),
            ));
        }
        let e = estimate_ppf(&m.inner, &n, draws, seed)?;
        ptr::copy_nonoverlapping(e.probabilities.as_ptr(), probabilities, k + 1);
        if !standard_errors.is_null() {
            ptr::copy_nonoverlapping(e.standard_errors.as_ptr(), standard_errors, k + 1);
        }
        if !ess.is_null() {
            ess.write(e.effective_sample_size);
        }
        Ok(())
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRequest {
    preset: Option<Preset>,
    data: Option<serde_json::Value>,
    likelihood: Option<Likelihood>,
    prior: Option<PartitionPriorSpec>,
    iters: Option<usize>,
    burn_in: Option<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct FitResponse {
    states: usize,
    mean_k: f64,
    mode_k: usize,
    mode_nmax: usize,
    k_dist: Vec<f64>,
    nmax_dist: Vec<f64>,
    cocluster: Vec<Vec<f64>>,
}

fn fit_with<M: ConjugateModel>(
    data: &[M::Obs],
    model: &M,
    req: &FitRequest,
) -> Result<(usize, PosteriorSummary), Failure> {
    let prior = req
        .prior
        .clone()
        .unwrap_or(PartitionPriorSpec::Dp { theta: 2.83 });
    let iters = req.iters.unwrap_or(1000);
    let burn_in = req
        .burn_in
        .unwrap_or(DEFAULT_BURN_IN.min(iters.saturating_sub(1)));
    let chain = run_chain(data, model, &prior, iters, burn_in, req.seed)?;
    Ok((chain.len(), summarize(&chain)?))
}

fn fit_request(req: &FitRequest) -> Result<(usize, PosteriorSummary), Failure> {
    let bad = |m: &str| Failure::new(SsmStatus::InvalidArgument, m);
    match (req.preset, &req.data, req.likelihood) {
        (Some(Preset::Grid), None, None) => {
            fit_with(&grid_data(), &NormalModelConfig::default(), req)
        }
        (Some(Preset::Grid), None, Some(Likelihood::Normal(m))) => fit_with(&grid_data(), &m, req),
        (Some(Preset::Sarcoma), None, None) => {
            fit_with(&sarcoma_data(), &BinomialModelConfig::default(), req)
        }
        (Some(Preset::Sarcoma), None, Some(Likelihood::Binomial(m))) => {
            fit_with(&sarcoma_data(), &m, req)
        }
        (None, Some(data), Some(Likelihood::Normal(m))) => {
            m.validate()?;
            let y: Vec<f64> = serde_json::from_value(data.clone())?;
            fit_with(&y, &m, req)
        }
        (None, Some(data), Some(Likelihood::Binomial(m))) => {
            m.validate()?;
            let rows: Vec<BinomialObs> = serde_json::from_value(data.clone())?;
            for r in &rows {
                BinomialObs::new(r.successes, r.trials)?;
            }
            fit_with(&rows, &m, req)
        }
        _ => Err(bad(
            "give a preset (optionally with a matching likelihood) or data with a likelihood",
        )),
    }
}

/// Runs a collapsed Gibbs sampler described by a JSON request and returns
/// the posterior summary as JSON. The request holds either `"preset"`
/// (`"grid"` or `"sarcoma"`) or `"data"` with a `"likelihood"`, plus the
/// optional `"prior"`, `"iters"`, `"burn_in"` and `"seed"`.
///
/// # Safety
/// `request` must be a NUL-terminated string; `result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssm_fit_json(
    request: *const c_char,
    result: *mut *mut c_char,
) -> SsmStatus {
    guard(|| {
        let req: FitRequest = serde_json::from_str(text(request)?)?;
        let (states, s) = fit_request(&req)?;
        let response = FitResponse {
            states,
            mean_k: s.mean_k(),
            mode_k: s.mode_k(),
            mode_nmax: s.mode_nmax(),
            k_dist: s.k_dist,
            nmax_dist: s.nmax_dist,
            cocluster: s.cocluster,
        };
        put(
            result,
            owned_string(serde_json::to_string(&response)?)?,
            "result",
        )
    })
}
