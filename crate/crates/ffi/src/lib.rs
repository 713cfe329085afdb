//! C ABI for the ckrbf toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`/
//! `*_build`/`*_train` functions and released by the matching `*_free`.
//! Every fallible function returns a [`CkrbfStatus`]; on failure
//! [`ckrbf_last_error_message`] describes the error for the calling thread.
//! Matrices are dense row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ckrbf::evaluation::{cross_validate, pf_auc, pf_curve_from_scores, KernelFamily, KernelSpec};
use ckrbf::kernel::GaussianKernel;
use ckrbf::solver::{decision_function, train_svc, SvmModel, SvmProblem};
use ckrbf::{build_kernel, scale_unit_interval, stratified_kfold, Dataset, Error, KernelModel};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkrbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or unusable data (parse errors, single class, shapes).
    Data = 3,
    /// Ill-conditioned covariance or other numerical failure.
    Numeric = 4,
    /// The solver hit its iteration cap; the best iterate is still returned.
    NotConverged = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Opaque dataset handle.
pub struct CkrbfDataset(Dataset);

/// Opaque cluster-kernel handle.
pub struct CkrbfKernel(KernelModel);

/// Opaque trained-SVM handle.
pub struct CkrbfSvm(SvmModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CkrbfStatus {
    match e {
        Error::InvalidArgument(_) => CkrbfStatus::InvalidArgument,
        Error::IllConditioned { .. } | Error::LinAlg(_) | Error::EmptyCluster => CkrbfStatus::Numeric,
        Error::NotConverged { .. } | Error::CvNotConverged { .. } => CkrbfStatus::NotConverged,
        Error::Io(_) => CkrbfStatus::Io,
        _ => CkrbfStatus::Data,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CkrbfStatus, String)>) -> CkrbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkrbfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error (panic)");
            CkrbfStatus::Internal
        }
    }
}

fn lib(e: Error) -> (CkrbfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CkrbfStatus, String) {
    (CkrbfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CkrbfStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (CkrbfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CkrbfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CkrbfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (CkrbfStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (CkrbfStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

fn row_major(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn ckrbf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ckrbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a libsvm (or `.csv`) file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_load(path: *const c_char, out: *mut *mut CkrbfDataset) -> CkrbfStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let ds = ckrbf::dataset::load(path).map_err(lib)?;
        store(out, CkrbfDataset(ds))
    })
}

/// Builds a dataset from `n × d` row-major features and `n` labels in
/// {−1, +1} (any two distinct values are mapped, the smaller to −1).
///
/// # Safety
/// `features` must hold `n*d` doubles, `labels` `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_new(
    features: *const f64,
    labels: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut CkrbfDataset,
) -> CkrbfStatus {
    guard(|| {
        let x = as_slice(features, n.checked_mul(d).ok_or_else(|| lib(Error::NoSamples))?, "features")?;
        let y = as_slice(labels, n, "labels")?;
        let y = ckrbf::dataset::map_labels(y).map_err(lib)?;
        let ds = Dataset::new("ffi", row_major(x, n, d), y).map_err(lib)?;
        store(out, CkrbfDataset(ds))
    })
}

/// Scales every feature of the dataset to [0, 1] in place.
///
/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_scale(ds: *mut CkrbfDataset) -> CkrbfStatus {
    guard(|| {
        let ds = ds.as_mut().ok_or_else(|| null("dataset"))?;
        ds.0 = scale_unit_interval(&ds.0);
        Ok(())
    })
}

/// Number of samples (0 for a null handle).
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_n(ds: *const CkrbfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of features (0 for a null handle).
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_d(ds: *const CkrbfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.d())
}

/// # Safety
/// `ds` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_dataset_free(ds: *mut CkrbfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Clusters the dataset's features with k-means and builds the cluster
/// kernel.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_kernel_build(
    ds: *const CkrbfDataset,
    k: usize,
    gamma: f64,
    eps: f64,
    seed: u64,
    out: *mut *mut CkrbfKernel,
) -> CkrbfStatus {
    guard(|| {
        let ds = as_ref(ds, "dataset")?;
        let model = build_kernel(ds.0.features(), k, gamma, eps, seed).map_err(lib)?;
        store(out, CkrbfKernel(model))
    })
}

/// New handle sharing the clustering and covariances, at another γ.
///
/// # Safety
/// `kernel` must be a live kernel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_kernel_rescale(
    kernel: *const CkrbfKernel,
    gamma: f64,
    out: *mut *mut CkrbfKernel,
) -> CkrbfStatus {
    guard(|| {
        let kernel = as_ref(kernel, "kernel")?;
        let model = kernel.0.rescale_gamma(gamma).map_err(lib)?;
        store(out, CkrbfKernel(model))
    })
}

/// `K(x, y)` for two points of dimension `d`.
///
/// # Safety
/// `x` and `y` must hold `d` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_kernel_eval(
    kernel: *const CkrbfKernel,
    x: *const f64,
    y: *const f64,
    d: usize,
    out: *mut f64,
) -> CkrbfStatus {
    guard(|| {
        let kernel = as_ref(kernel, "kernel")?;
        let v = kernel
            .0
            .eval_kernel(as_slice(x, d, "x")?, as_slice(y, d, "y")?)
            .map_err(lib)?;
        write(out, v)
    })
}

/// Writes the `n × n` Gram matrix of the dataset's points (row-major) into
/// `out`, which must have room for `len >= n*n` doubles.
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_kernel_gram(
    kernel: *const CkrbfKernel,
    ds: *const CkrbfDataset,
    out: *mut f64,
    len: usize,
) -> CkrbfStatus {
    guard(|| {
        let kernel = as_ref(kernel, "kernel")?;
        let ds = as_ref(ds, "dataset")?;
        let n = ds.0.n();
        if len < n * n {
            return Err((CkrbfStatus::InvalidArgument, format!("buffer holds {len}, need {}", n * n)));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let gram = kernel.0.gram(ds.0.features(), ds.0.features()).map_err(lib)?;
        let dst = slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = gram[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_kernel_free(kernel: *mut CkrbfKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Trains a C-SVC on a precomputed `n × n` Gram matrix. On
/// [`CkrbfStatus::NotConverged`] `out` still receives the best iterate.
///
/// # Safety
/// `gram` must hold `n*n` doubles, `labels` `n` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_train(
    gram: *const f64,
    labels: *const f64,
    n: usize,
    c: f64,
    tol: f64,
    out: *mut *mut CkrbfSvm,
) -> CkrbfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let g = as_slice(gram, n * n, "gram")?;
        let y = as_slice(labels, n, "labels")?;
        let problem = SvmProblem::new(row_major(g, n, n), y.to_vec(), c)
            .and_then(|p| p.with_tol(tol))
            .map_err(lib)?;
        match train_svc(&problem) {
            Ok(m) => store(out, CkrbfSvm(m)),
            Err(Error::NotConverged { iterations, violation, best }) => {
                store(out, CkrbfSvm(*best))?;
                Err((
                    CkrbfStatus::NotConverged,
                    format!("stopped after {iterations} iterations, KKT violation {violation:e}"),
                ))
            }
            Err(e) => Err(lib(e)),
        }
    })
}

/// Decision value for one point given its kernel values against the `n`
/// training points.
///
/// # Safety
/// `gram_row` must hold `n` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_decision(
    svm: *const CkrbfSvm,
    gram_row: *const f64,
    n: usize,
    out: *mut f64,
) -> CkrbfStatus {
    guard(|| {
        let svm = as_ref(svm, "svm")?;
        let v = decision_function(&svm.0, as_slice(gram_row, n, "gram_row")?).map_err(lib)?;
        write(out, v)
    })
}

/// Bias term (NaN for a null handle).
///
/// # Safety
/// `svm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_bias(svm: *const CkrbfSvm) -> f64 {
    svm.as_ref().map_or(f64::NAN, |m| m.0.bias)
}

/// Final dual objective (NaN for a null handle).
///
/// # Safety
/// `svm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_objective(svm: *const CkrbfSvm) -> f64 {
    svm.as_ref().map_or(f64::NAN, |m| m.0.objective)
}

/// Number of support vectors (0 for a null handle).
///
/// # Safety
/// `svm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_support_count(svm: *const CkrbfSvm) -> usize {
    svm.as_ref().map_or(0, |m| m.0.support_indices.len())
}

/// # Safety
/// `svm` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_svm_free(svm: *mut CkrbfSvm) {
    if !svm.is_null() {
        drop(Box::from_raw(svm));
    }
}

/// Stratified k-fold cross-validated accuracy. `family` is one of `rbf`,
/// `mrbf`, `ckrbf`, `ckrbf-radial`, `mkrbf`; clustering is transductive.
///
/// # Safety
/// `ds` must be live, `family` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_cross_validate(
    ds: *const CkrbfDataset,
    family: *const c_char,
    k: usize,
    gamma: f64,
    c: f64,
    folds: usize,
    seed: u64,
    out: *mut f64,
) -> CkrbfStatus {
    guard(|| {
        let ds = as_ref(ds, "dataset")?;
        let family = KernelFamily::parse(as_str(family, "family")?, k).map_err(lib)?;
        let plan = stratified_kfold(&ds.0, folds, seed).map_err(lib)?;
        let spec = KernelSpec::new(family).with_seed(seed);
        let acc = cross_validate(&ds.0, &spec, gamma, c, &plan).map_err(lib)?;
        write(out, acc)
    })
}

/// Areas under the P_f curves of `n_curves` score grids. Grid `i` has
/// `lengths[i]` scores, stored back to back in `scores`; `out` receives
/// `n_curves` areas over the shared score interval.
///
/// # Safety
/// `lengths` must hold `n_curves` entries, `scores` their sum, `out`
/// `n_curves` doubles.
#[no_mangle]
pub unsafe extern "C" fn ckrbf_pf_auc(
    scores: *const f64,
    lengths: *const usize,
    n_curves: usize,
    out: *mut f64,
) -> CkrbfStatus {
    guard(|| {
        if lengths.is_null() || out.is_null() {
            return Err(null("lengths/out"));
        }
        let lens = slice::from_raw_parts(lengths, n_curves);
        let total: usize = lens.iter().sum();
        let all = as_slice(scores, total, "scores")?;
        let mut curves = Vec::with_capacity(n_curves);
        let mut at = 0;
        for &l in lens {
            curves.push(pf_curve_from_scores(&all[at..at + l]));
            at += l;
        }
        let aucs = pf_auc(&curves).map_err(lib)?;
        ptr::copy_nonoverlapping(aucs.as_ptr(), out, n_curves);
        Ok(())
    })
}
