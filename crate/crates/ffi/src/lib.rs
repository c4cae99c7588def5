//! C ABI for the `icnn` library.
//!
//! Every fallible function returns an [`IcnnStatus`]. On failure the message
//! is available from [`icnn_last_error_message`] on the same thread until the
//! next failing call. Objects are opaque handles created by `*_new`/`*_fit`
//! style functions and released with the matching `*_free`.
//!
//! Output buffers follow one convention: the caller passes `out`, its
//! capacity `cap` and `out_len`. The required length is always written to
//! `out_len`; when `cap` is too small nothing else is written and
//! `ICNN_STATUS_BUFFER_TOO_SMALL` is returned. Passing a null `out` with
//! `cap == 0` is a length query.
//!
//! Matrices are row-major `f64` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use icnn::audit::{equivariance_error_pairs, estimate_map, EquivarianceMap};
use icnn::classify::{Classifier, ClassifierSpec};
use icnn::data::Image;
use icnn::pipeline::{emit_report, run_pipeline, ExperimentConfig, NoObserver};
use icnn::reduce::{fit_pca, PcaModel};
use icnn::represent::{
    apply_ieneo, build_filter_bank, diagram_distance, persistence_diagram, sample_ieneo, scatter, FilterBank,
    IeneoOperator,
};
use icnn::transform::{apply, GroupTransform};
use icnn::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcnnStatus {
    Ok = 0,
    /// Invalid configuration or parameter.
    Config = 2,
    /// Unreadable, malformed or inconsistent input data.
    Data = 3,
    /// Numerical failure (singular system, non-finite values, sampling).
    Numerical = 4,
    NullPointer = 10,
    BufferTooSmall = 11,
    InvalidUtf8 = 12,
    Panic = 13,
}

pub struct IcnnImage(Image);
pub struct IcnnFilterBank(FilterBank);
pub struct IcnnOperator(IeneoOperator);
pub struct IcnnPca(PcaModel);
pub struct IcnnClassifier(Classifier);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Status(IcnnStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> IcnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcnnStatus::Ok,
        Ok(Err(Failure::Status(status, msg))) => {
            set_last_error(msg);
            status
        }
        Ok(Err(Failure::Core(e))) => {
            let status = match e.exit_code() {
                2 => IcnnStatus::Config,
                3 => IcnnStatus::Data,
                _ => IcnnStatus::Numerical,
            };
            set_last_error(e.to_string());
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            IcnnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(IcnnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn rows(p: *const f64, n: usize, d: usize, what: &str) -> FfiResult<Vec<Vec<f64>>> {
    let len = n.checked_mul(d).ok_or_else(|| Failure::Status(IcnnStatus::Config, format!("{what} is too large")))?;
    Ok(slice(p, len, what)?.chunks(d.max(1)).map(<[f64]>::to_vec).collect())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Status(IcnnStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T: Copy>(values: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> FfiResult<()> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    if cap < values.len() {
        return Err(Failure::Status(
            IcnnStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn icnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn icnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Image from `height * width` row-major intensities in [0, 1].
///
/// # Safety
/// `pixels` must point to `height * width` readable values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_image_new(
    height: usize,
    width: usize,
    pixels: *const f64,
    out: *mut *mut IcnnImage,
) -> IcnnStatus {
    guard(|| {
        let px = slice(pixels, height.saturating_mul(width), "pixels")?;
        put(out, IcnnImage(Image::new(height, width, px.to_vec())?))
    })
}

/// # Safety
/// `image` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icnn_image_free(image: *mut IcnnImage) {
    release(image)
}

/// # Safety
/// `image` must be a valid handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_image_dims(image: *const IcnnImage, height: *mut usize, width: *mut usize) -> IcnnStatus {
    guard(|| {
        let im = &borrow(image, "image")?.0;
        if height.is_null() || width.is_null() {
            return Err(null("height/width"));
        }
        *height = im.height();
        *width = im.width();
        Ok(())
    })
}

/// Copy the pixels out (row-major).
///
/// # Safety
/// See the buffer convention in the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn icnn_image_pixels(
    image: *const IcnnImage,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> IcnnStatus {
    guard(|| write_out(borrow(image, "image")?.0.pixels(), out, cap, out_len))
}

/// Transform an image. `spec` is one of `id`, `t(dx,dy)`, `r(degrees)`,
/// `f(h)` or `f(v)`.
///
/// # Safety
/// `image` must be a valid handle, `spec` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_image_transform(
    image: *const IcnnImage,
    spec: *const c_char,
    out: *mut *mut IcnnImage,
) -> IcnnStatus {
    guard(|| {
        let im = &borrow(image, "image")?.0;
        let t: GroupTransform = string(spec, "spec")?.parse()?;
        put(out, IcnnImage(apply(&t, im)))
    })
}

/// Morlet filter bank for square images of side `side`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_filter_bank_new(
    side: usize,
    scales: u32,
    orientations: u32,
    out: *mut *mut IcnnFilterBank,
) -> IcnnStatus {
    guard(|| put(out, IcnnFilterBank(build_filter_bank(side, scales, orientations)?)))
}

/// # Safety
/// `bank` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icnn_filter_bank_free(bank: *mut IcnnFilterBank) {
    release(bank)
}

/// Length of the scattering vector for `order`, or 0 for a null handle.
///
/// # Safety
/// `bank` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn icnn_filter_bank_output_len(bank: *const IcnnFilterBank, order: u8) -> usize {
    bank.as_ref().map_or(0, |b| b.0.output_len(order))
}

/// Scattering coefficients of `image`.
///
/// # Safety
/// Handles must be valid; see the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn icnn_scatter(
    bank: *const IcnnFilterBank,
    image: *const IcnnImage,
    order: u8,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> IcnnStatus {
    guard(|| {
        let rep = scatter(&borrow(image, "image")?.0, &borrow(bank, "bank")?.0, order)?;
        write_out(&rep.values, out, cap, out_len)
    })
}

/// Random radial operator of the given radius with 1..=`max_bumps` bumps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_ieneo_sample(
    radius: usize,
    max_bumps: usize,
    seed: u64,
    out: *mut *mut IcnnOperator,
) -> IcnnStatus {
    guard(|| put(out, IcnnOperator(sample_ieneo(radius, max_bumps, seed)?)))
}

/// # Safety
/// `op` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icnn_ieneo_free(op: *mut IcnnOperator) {
    release(op)
}

/// Copy the `(2r+1)^2` kernel out (row-major).
///
/// # Safety
/// `op` must be a valid handle; see the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn icnn_ieneo_kernel(
    op: *const IcnnOperator,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> IcnnStatus {
    guard(|| write_out(borrow(op, "op")?.0.kernel(), out, cap, out_len))
}

/// Same-size operator output of `image`.
///
/// # Safety
/// Handles must be valid; see the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn icnn_ieneo_apply(
    op: *const IcnnOperator,
    image: *const IcnnImage,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> IcnnStatus {
    guard(|| {
        let rep = apply_ieneo(&borrow(op, "op")?.0, &borrow(image, "image")?.0)?;
        write_out(&rep.values, out, cap, out_len)
    })
}

/// Distance between the 0-dimensional sublevel persistence diagrams of two
/// images.
///
/// # Safety
/// Handles must be valid and `distance` writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_persistence_distance(
    a: *const IcnnImage,
    b: *const IcnnImage,
    distance: *mut f64,
) -> IcnnStatus {
    guard(|| {
        let (a, b) = (&borrow(a, "a")?.0, &borrow(b, "b")?.0);
        if distance.is_null() {
            return Err(null("distance"));
        }
        *distance = diagram_distance(&persistence_diagram(a), &persistence_diagram(b));
        Ok(())
    })
}

/// PCA on `n` rows of `d` features keeping the smallest number of
/// components whose variance share reaches `retention`.
///
/// # Safety
/// `data` must hold `n * d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_pca_fit(
    data: *const f64,
    n: usize,
    d: usize,
    retention: f64,
    out: *mut *mut IcnnPca,
) -> IcnnStatus {
    guard(|| put(out, IcnnPca(fit_pca(&rows(data, n, d, "data")?, retention)?)))
}

/// # Safety
/// `pca` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icnn_pca_free(pca: *mut IcnnPca) {
    release(pca)
}

/// Number of retained components, or 0 for a null handle.
///
/// # Safety
/// `pca` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn icnn_pca_components(pca: *const IcnnPca) -> usize {
    pca.as_ref().map_or(0, |p| p.0.k())
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `pca` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn icnn_pca_dims(pca: *const IcnnPca) -> usize {
    pca.as_ref().map_or(0, |p| p.0.dims())
}

/// Project one `d`-vector onto the retained components.
///
/// # Safety
/// `x` must hold `d` values; see the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn icnn_pca_project(
    pca: *const IcnnPca,
    x: *const f64,
    d: usize,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> IcnnStatus {
    guard(|| {
        let z = borrow(pca, "pca")?.0.project_values(slice(x, d, "x")?)?;
        write_out(&z, out, cap, out_len)
    })
}

/// Fit a binary classifier on `n` rows of `d` features with labels 0/1.
/// `spec_json` selects the classifier, e.g. `{"kind":"knn","k":11}`; null
/// means the default RBF SVM.
///
/// # Safety
/// `x` must hold `n * d` values, `labels` `n` values; `spec_json` must be
/// null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_classifier_fit(
    spec_json: *const c_char,
    x: *const f64,
    n: usize,
    d: usize,
    labels: *const u8,
    seed: u64,
    out: *mut *mut IcnnClassifier,
) -> IcnnStatus {
    guard(|| {
        let spec: ClassifierSpec = if spec_json.is_null() {
            ClassifierSpec::default()
        } else {
            serde_json::from_str(string(spec_json, "spec_json")?)
                .map_err(|e| Failure::Status(IcnnStatus::Config, format!("classifier spec: {e}")))?
        };
        let model = spec.fit(&rows(x, n, d, "x")?, slice(labels, n, "labels")?, seed)?;
        put(out, IcnnClassifier(model))
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icnn_classifier_free(model: *mut IcnnClassifier) {
    release(model)
}

/// Predict labels for `n` rows of `d` features into `labels_out`.
///
/// # Safety
/// `x` must hold `n * d` values and `labels_out` room for `n` labels.
#[no_mangle]
pub unsafe extern "C" fn icnn_classifier_predict(
    model: *const IcnnClassifier,
    x: *const f64,
    n: usize,
    d: usize,
    labels_out: *mut u8,
) -> IcnnStatus {
    guard(|| {
        let preds = borrow(model, "model")?.0.predict_all(&rows(x, n, d, "x")?)?;
        let mut len = 0;
        write_out(&preds, labels_out, n, &mut len)
    })
}

/// Ridge estimate of the `d x d` map `M` with `M phi_x[i] ~ phi_gx[i]`.
/// Writes `M` row-major to `matrix_out` (`d * d` values) and the mean
/// absolute fit residual to `fit_residual`.
///
/// # Safety
/// Inputs must hold `n * d` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_estimate_map(
    phi_x: *const f64,
    phi_gx: *const f64,
    n: usize,
    d: usize,
    lambda: f64,
    matrix_out: *mut f64,
    fit_residual: *mut f64,
) -> IcnnStatus {
    guard(|| {
        let map = estimate_map(&rows(phi_x, n, d, "phi_x")?, &rows(phi_gx, n, d, "phi_gx")?, lambda)?;
        if matrix_out.is_null() || fit_residual.is_null() {
            return Err(null("matrix_out/fit_residual"));
        }
        let flat: Vec<f64> = map.matrix.concat();
        ptr::copy_nonoverlapping(flat.as_ptr(), matrix_out, flat.len());
        *fit_residual = map.fit_residual;
        Ok(())
    })
}

/// Mean absolute deviation between `phi_x[i]` and `M phi_ginv_x[i]` for a
/// row-major `d x d` matrix `M`.
///
/// # Safety
/// Feature inputs must hold `n * d` values, `matrix` `d * d` values.
#[no_mangle]
pub unsafe extern "C" fn icnn_equivariance_error(
    phi_x: *const f64,
    phi_ginv_x: *const f64,
    n: usize,
    d: usize,
    matrix: *const f64,
    e_q: *mut f64,
) -> IcnnStatus {
    guard(|| {
        let map = EquivarianceMap { matrix: rows(matrix, d, d, "matrix")?, lambda: 0.0, fit_residual: 0.0 };
        let value = equivariance_error_pairs(&rows(phi_x, n, d, "phi_x")?, &rows(phi_ginv_x, n, d, "phi_ginv_x")?, &map)?;
        if e_q.is_null() {
            return Err(null("e_q"));
        }
        *e_q = value;
        Ok(())
    })
}

/// Run the experiment described by the JSON file at `config_path`. When
/// `out_dir` is non-null the report artifacts are written there. Mean
/// accuracies are written to the non-null output pointers.
///
/// # Safety
/// Strings must be NUL-terminated; output pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn icnn_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    parallel: bool,
    mean_pipeline_accuracy: *mut f64,
    mean_baseline_accuracy: *mut f64,
) -> IcnnStatus {
    guard(|| {
        let config = ExperimentConfig::load(string(config_path, "config_path")?)?;
        let out = if out_dir.is_null() { None } else { Some(string(out_dir, "out_dir")?) };
        let report = run_pipeline(&config, parallel, &NoObserver)?;
        if let Some(dir) = out {
            emit_report(&report, Path::new(dir))?;
        }
        if !mean_pipeline_accuracy.is_null() {
            *mean_pipeline_accuracy = report.mean_pipeline_accuracy;
        }
        if !mean_baseline_accuracy.is_null() {
            *mean_baseline_accuracy = report.mean_baseline_accuracy;
        }
        Ok(())
    })
}
