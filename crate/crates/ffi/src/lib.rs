//! C ABI over `hazekit`.
//!
//! Images and classifiers are opaque heap handles created by `hk_*_new` /
//! `hk_*_load` and released with the matching `hk_*_free`. Every fallible
//! call returns an [`HkStatus`]; on failure a message is available from
//! [`hk_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hazekit::attack::{
    attack_hadvhaze, attack_iadvhaze, baseline_fgsm, baseline_ifgsm, baseline_mifgsm, AttackConfig,
    AttackResult, PixelAttackConfig,
};
use hazekit::classifier::{load_weights, Classifier, ReferenceClassifier};
use hazekit::haze::{haze_homogeneous, HazeScalars};
use hazekit::imagecore::{
    load_image, save_image, synthetic_depth, DepthMap, Image, ScalarField, SyntheticDepth, CHANNELS,
};
use hazekit::Error;

/// Status codes. `HK_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkStatus {
    HkOk = 0,
    HkErrNullPointer = 1,
    HkErrInvalidArgument = 2,
    HkErrIo = 3,
    HkErrFormat = 4,
    HkErrShape = 5,
    HkErrRange = 6,
    HkErrAdapter = 7,
    HkErrConfig = 8,
    HkErrPanic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkAttackKind {
    HkHadvhaze = 0,
    HkIadvhaze = 1,
    HkFgsm = 2,
    HkIfgsm = 3,
    HkMifgsm = 4,
}

/// Scalar outcome of one attack.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HkAttackSummary {
    pub true_label: usize,
    pub pred_clean: usize,
    pub pred_adv: usize,
    pub success: bool,
    pub loss_initial: f64,
    pub loss_final: f64,
    pub iterations_run: usize,
}

/// Opaque RGB image, row-major, channel-interleaved, values in `[0, 1]`.
pub struct HkImage(Image);

/// Opaque reference CNN.
pub struct HkClassifier(ReferenceClassifier);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HkStatus {
    match e {
        Error::Io { .. } => HkStatus::HkErrIo,
        Error::Codec { .. } | Error::UnsupportedFormat(_) | Error::Malformed { .. } => HkStatus::HkErrFormat,
        Error::ShapeMismatch { .. } => HkStatus::HkErrShape,
        Error::NonFinite { .. } | Error::OutOfRange { .. } => HkStatus::HkErrRange,
        Error::InvalidArgument(_) => HkStatus::HkErrInvalidArgument,
        Error::Adapter(_) | Error::AdapterTimeout(_) => HkStatus::HkErrAdapter,
        Error::Config(_) => HkStatus::HkErrConfig,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HkStatus::HkOk,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HkStatus::HkErrNullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HkStatus::HkErrPanic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failing call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `height * width * 3` doubles into a new image.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_image_new(
    height: usize,
    width: usize,
    data: *const f64,
    out: *mut *mut HkImage,
) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(CHANNELS))
            .ok_or_else(|| Error::InvalidArgument("image size overflows".into()))?;
        let data = slice_arg(data, n, "data")?;
        *out = boxed(HkImage(Image::new(height, width, data.to_vec())?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_image_load_png(path: *const c_char, out: *mut *mut HkImage) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(HkImage(load_image(path_arg(path)?)?));
        Ok(())
    })
}

/// Writes an 8-bit PNG.
///
/// # Safety
/// `img` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hk_image_save_png(img: *const HkImage, path: *const c_char) -> HkStatus {
    guard(|| {
        let img = deref(img, "img")?;
        save_image(&img.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle; `height` and `width` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_image_dims(
    img: *const HkImage,
    height: *mut usize,
    width: *mut usize,
) -> HkStatus {
    guard(|| {
        let img = deref(img, "img")?;
        let (h, w) = img.0.dims();
        *out_ptr(height, "height")? = h;
        *out_ptr(width, "width")? = w;
        Ok(())
    })
}

/// Pixel data (`height * width * 3` doubles), borrowed from the handle.
/// NULL for a NULL handle.
///
/// # Safety
/// `img` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_image_data(img: *const HkImage) -> *const f64 {
    img.as_ref().map_or(std::ptr::null(), |i| i.0.data().as_ptr())
}

/// # Safety
/// `img` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn hk_image_free(img: *mut HkImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Loads a reference CNN weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_classifier_load(path: *const c_char, out: *mut *mut HkClassifier) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let w = load_weights(path_arg(path)?)?;
        *out = boxed(HkClassifier(ReferenceClassifier::new(w)?));
        Ok(())
    })
}

/// # Safety
/// `clf` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn hk_classifier_free(clf: *mut HkClassifier) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}

/// Number of classes, or 0 for a NULL handle.
///
/// # Safety
/// `clf` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_classifier_num_classes(clf: *const HkClassifier) -> usize {
    clf.as_ref().map_or(0, |c| c.0.num_classes())
}

/// Writes the logits into `out[0..len]`; `len` must equal the class count.
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hk_classifier_logits(
    clf: *const HkClassifier,
    img: *const HkImage,
    out: *mut f64,
    len: usize,
) -> HkStatus {
    guard(|| {
        let clf = deref(clf, "clf")?;
        let img = deref(img, "img")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let n = clf.0.num_classes();
        if len != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} logits"),
                actual: format!("buffer of {len}"),
            }
            .into());
        }
        let logits = clf.0.logits(&img.0)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(logits.values());
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `label` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_classifier_predict(
    clf: *const HkClassifier,
    img: *const HkImage,
    label: *mut usize,
) -> HkStatus {
    guard(|| {
        let clf = deref(clf, "clf")?;
        let img = deref(img, "img")?;
        *out_ptr(label, "label")? = clf.0.predict(&img.0)?;
        Ok(())
    })
}

unsafe fn depth_arg(img: &Image, depth: *const f64) -> Result<DepthMap, Fail> {
    let (h, w) = img.dims();
    if depth.is_null() {
        return Ok(synthetic_depth(SyntheticDepth::VRamp, h, w)?);
    }
    let data = std::slice::from_raw_parts(depth, h * w).to_vec();
    Ok(DepthMap::new(ScalarField::new(h, w, data)?)?)
}

/// Renders homogeneous haze with atmospheric light `a` and density `beta`.
/// `depth` holds `height * width` values in `[0, 1]`, or is NULL for a
/// top-to-bottom ramp.
///
/// # Safety
/// `img` must be live; `depth` NULL or sized as described; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hk_haze_homogeneous(
    img: *const HkImage,
    depth: *const f64,
    a: f64,
    beta: f64,
    out: *mut *mut HkImage,
) -> HkStatus {
    guard(|| {
        let img = deref(img, "img")?;
        let out = out_ptr(out, "out")?;
        let d = depth_arg(&img.0, depth)?;
        *out = boxed(HkImage(haze_homogeneous(&img.0, &d, HazeScalars::new(a, beta)?)?));
        Ok(())
    })
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> Result<T, Error> {
    match json {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| Error::Config(e.to_string())),
    }
}

fn run(
    kind: HkAttackKind,
    clf: &ReferenceClassifier,
    img: &Image,
    depth: Option<DepthMap>,
    label: usize,
    config: Option<&str>,
) -> Result<AttackResult, Error> {
    let haze_depth = || depth.ok_or_else(|| Error::InvalidArgument("missing depth".into()));
    match kind {
        HkAttackKind::HkHadvhaze => attack_hadvhaze(
            img,
            &haze_depth()?,
            clf,
            label,
            &parse_config::<AttackConfig>(config)?,
        ),
        HkAttackKind::HkIadvhaze => attack_iadvhaze(
            img,
            &haze_depth()?,
            clf,
            label,
            &parse_config::<AttackConfig>(config)?,
        ),
        HkAttackKind::HkFgsm => {
            baseline_fgsm(img, clf, label, parse_config::<PixelAttackConfig>(config)?.eps)
        }
        HkAttackKind::HkIfgsm => baseline_ifgsm(img, clf, label, &parse_config(config)?),
        HkAttackKind::HkMifgsm => baseline_mifgsm(img, clf, label, &parse_config(config)?),
    }
}

/// Runs one untargeted attack against `label`.
///
/// `config_json` is NULL for defaults, or a JSON object with the fields of
/// the attack's configuration (`eps_a`, `eps_b`, `a0`, `b0`, `alpha_a`,
/// `alpha_b`, `n`, `mu`, `sigma_a`, `sigma_b`, `early_stop` for haze attacks;
/// `eps`, `n`, `mu` for pixel attacks). `depth` is as in
/// [`hk_haze_homogeneous`] and ignored by pixel attacks. `summary` may be
/// NULL.
///
/// # Safety
/// Handles must be live; pointers NULL or valid as described.
#[no_mangle]
pub unsafe extern "C" fn hk_attack(
    clf: *const HkClassifier,
    img: *const HkImage,
    depth: *const f64,
    label: usize,
    kind: HkAttackKind,
    config_json: *const c_char,
    adversarial: *mut *mut HkImage,
    summary: *mut HkAttackSummary,
) -> HkStatus {
    guard(|| {
        let clf = deref(clf, "clf")?;
        let img = deref(img, "img")?;
        let adversarial = out_ptr(adversarial, "adversarial")?;
        let config = if config_json.is_null() {
            None
        } else {
            Some(
                CStr::from_ptr(config_json)
                    .to_str()
                    .map_err(|_| Error::Config("config is not valid UTF-8".into()))?,
            )
        };
        let depth = match kind {
            HkAttackKind::HkHadvhaze | HkAttackKind::HkIadvhaze => Some(depth_arg(&img.0, depth)?),
            _ => None,
        };
        let r = run(kind, &clf.0, &img.0, depth, label, config)?;
        if let Some(s) = summary.as_mut() {
            *s = HkAttackSummary {
                true_label: r.true_label,
                pred_clean: r.pred_clean,
                pred_adv: r.pred_adv,
                success: r.success,
                loss_initial: r.loss_trace[0],
                loss_final: *r.loss_trace.last().expect("trace has n + 1 entries"),
                iterations_run: r.iterations_run,
            };
        }
        *adversarial = boxed(HkImage(r.adversarial));
        Ok(())
    })
}
