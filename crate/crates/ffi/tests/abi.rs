use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hazekit::classifier::{save_weights, Classifier, ReferenceClassifier, ReferenceCnnWeights};
use hazekit::imagecore::Image;
use hazekit_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights_file(dir: &Path) -> (CString, ReferenceCnnWeights) {
    let w = ReferenceCnnWeights::init(32, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let p = dir.join("w.bin");
    save_weights(&w, &p).unwrap();
    // The file stores f32; reload so the in-process model matches it.
    let w = hazekit::classifier::load_weights(&p).unwrap();
    (CString::new(p.to_str().unwrap()).unwrap(), w)
}

fn pixels(h: usize, w: usize) -> Vec<f64> {
    (0..h * w * 3).map(|k| ((k * 37) % 101) as f64 / 100.0).collect()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hk_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn image_round_trip() {
    let data = pixels(5, 7);
    let mut img = ptr::null_mut();
    unsafe {
        assert_eq!(hk_image_new(5, 7, data.as_ptr(), &mut img), HkStatus::HkOk);
        let (mut h, mut w) = (0, 0);
        assert_eq!(hk_image_dims(img, &mut h, &mut w), HkStatus::HkOk);
        assert_eq!((h, w), (5, 7));
        assert_eq!(std::slice::from_raw_parts(hk_image_data(img), 105), &data[..]);
        hk_image_free(img);
    }
}

#[test]
fn error_codes_and_messages() {
    let mut img = ptr::null_mut();
    unsafe {
        assert_eq!(
            hk_image_new(2, 2, ptr::null(), &mut img),
            HkStatus::HkErrNullPointer
        );
        assert!(last_error().contains("data"));
        let bad = [2.0; 12];
        assert_eq!(hk_image_new(2, 2, bad.as_ptr(), &mut img), HkStatus::HkErrRange);
        assert!(img.is_null());
        let missing = CString::new("/nonexistent/w.bin").unwrap();
        let mut clf = ptr::null_mut();
        assert_eq!(hk_classifier_load(missing.as_ptr(), &mut clf), HkStatus::HkErrIo);
        assert!(last_error().contains("/nonexistent/w.bin"));
        assert_eq!(hk_classifier_num_classes(ptr::null()), 0);
        assert!(hk_image_data(ptr::null()).is_null());
        hk_image_free(ptr::null_mut());
        hk_classifier_free(ptr::null_mut());
    }
}

#[test]
fn logits_match_in_process_model() {
    let dir = tempfile::tempdir().unwrap();
    let (path, w) = weights_file(dir.path());
    let data = pixels(20, 24);
    let expected = ReferenceClassifier::new(w)
        .unwrap()
        .logits(&Image::new(20, 24, data.clone()).unwrap())
        .unwrap();
    unsafe {
        let mut clf = ptr::null_mut();
        assert_eq!(hk_classifier_load(path.as_ptr(), &mut clf), HkStatus::HkOk);
        assert_eq!(hk_classifier_num_classes(clf), 10);
        let mut img = ptr::null_mut();
        assert_eq!(hk_image_new(20, 24, data.as_ptr(), &mut img), HkStatus::HkOk);
        let mut out = [0.0; 10];
        assert_eq!(
            hk_classifier_logits(clf, img, out.as_mut_ptr(), 10),
            HkStatus::HkOk
        );
        assert_eq!(&out[..], expected.values());
        assert_eq!(
            hk_classifier_logits(clf, img, out.as_mut_ptr(), 9),
            HkStatus::HkErrShape
        );
        let mut label = usize::MAX;
        assert_eq!(hk_classifier_predict(clf, img, &mut label), HkStatus::HkOk);
        assert_eq!(label, expected.argmax());
        hk_image_free(img);
        hk_classifier_free(clf);
    }
}

#[test]
fn haze_and_attacks() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = weights_file(dir.path());
    let data = pixels(16, 16);
    unsafe {
        let mut clf = ptr::null_mut();
        assert_eq!(hk_classifier_load(path.as_ptr(), &mut clf), HkStatus::HkOk);
        let mut img = ptr::null_mut();
        assert_eq!(hk_image_new(16, 16, data.as_ptr(), &mut img), HkStatus::HkOk);

        let zeros = vec![0.0; 256];
        let mut hazy = ptr::null_mut();
        assert_eq!(
            hk_haze_homogeneous(img, zeros.as_ptr(), 0.9, 0.2, &mut hazy),
            HkStatus::HkOk
        );
        assert_eq!(std::slice::from_raw_parts(hk_image_data(hazy), 768), &data[..]);
        hk_image_free(hazy);
        assert_eq!(
            hk_haze_homogeneous(img, ptr::null(), 1.5, 0.1, &mut hazy),
            HkStatus::HkErrInvalidArgument
        );

        for kind in [
            HkAttackKind::HkHadvhaze,
            HkAttackKind::HkIadvhaze,
            HkAttackKind::HkFgsm,
            HkAttackKind::HkIfgsm,
            HkAttackKind::HkMifgsm,
        ] {
            let mut adv = ptr::null_mut();
            let mut s = HkAttackSummary::default();
            let cfg = CString::new(r#"{"n": 3}"#).unwrap();
            let cfg_ptr = if kind == HkAttackKind::HkFgsm {
                ptr::null()
            } else {
                cfg.as_ptr()
            };
            assert_eq!(
                hk_attack(clf, img, ptr::null(), 4, kind, cfg_ptr, &mut adv, &mut s),
                HkStatus::HkOk,
                "{kind:?}: {}",
                last_error()
            );
            assert_eq!(s.true_label, 4);
            assert_eq!(s.success, s.pred_adv != 4);
            let expected_iters = if kind == HkAttackKind::HkFgsm { 1 } else { 3 };
            assert_eq!(s.iterations_run, expected_iters, "{kind:?}");
            let out = std::slice::from_raw_parts(hk_image_data(adv), 768);
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
            hk_image_free(adv);
        }

        let mut adv = ptr::null_mut();
        let bad = CString::new(r#"{"bogus": 1}"#).unwrap();
        let st = hk_attack(
            clf,
            img,
            ptr::null(),
            0,
            HkAttackKind::HkIadvhaze,
            bad.as_ptr(),
            &mut adv,
            ptr::null_mut(),
        );
        assert_eq!(st, HkStatus::HkErrConfig);
        assert!(adv.is_null());
        let st = hk_attack(
            clf,
            img,
            ptr::null(),
            99,
            HkAttackKind::HkFgsm,
            ptr::null(),
            &mut adv,
            ptr::null_mut(),
        );
        assert_eq!(st, HkStatus::HkErrInvalidArgument, "{}", last_error());

        hk_image_free(img);
        hk_classifier_free(clf);
    }
}

#[test]
fn png_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let p = CString::new(dir.path().join("x.png").to_str().unwrap()).unwrap();
    let data: Vec<f64> = (0..48).map(|k| (k * 5) as f64 / 255.0).collect();
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(hk_image_new(4, 4, data.as_ptr(), &mut img), HkStatus::HkOk);
        assert_eq!(hk_image_save_png(img, p.as_ptr()), HkStatus::HkOk);
        let mut back = ptr::null_mut();
        assert_eq!(hk_image_load_png(p.as_ptr(), &mut back), HkStatus::HkOk);
        let got = std::slice::from_raw_parts(hk_image_data(back), 48);
        assert!(got.iter().zip(&data).all(|(a, b)| (a - b).abs() < 1e-12));
        hk_image_free(img);
        hk_image_free(back);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "hazekit.h"

int main(int argc, char **argv) {
    double px[4 * 4 * 3];
    for (int k = 0; k < 48; k++) px[k] = (k % 11) / 10.0;
    HkImage *img = NULL;
    if (hk_image_new(4, 4, px, &img) != HK_OK) return 1;
    HkImage *hazy = NULL;
    if (hk_haze_homogeneous(img, NULL, 0.9, 0.1, &hazy) != HK_OK) return 2;
    HkClassifier *clf = NULL;
    if (hk_classifier_load(argv[1], &clf) != HK_OK) return 3;
    HkImage *adv = NULL;
    HkAttackSummary s;
    if (hk_attack(clf, img, NULL, 1, HK_IADVHAZE, "{\"n\": 2}", &adv, &s) != HK_OK) return 4;
    if (hk_classifier_load("/nonexistent", &clf) != HK_ERR_IO) return 5;
    printf("%zu %zu %s\n", s.iterations_run, hk_classifier_num_classes(clf), hk_last_error() ? "err" : "none");
    hk_image_free(adv);
    hk_image_free(hazy);
    hk_image_free(img);
    hk_classifier_free(clf);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static
/// library. Skipped when no C compiler is on PATH.
#[test]
fn header_compiles_and_links_from_c() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libhazekit_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (path, _) = weights_file(dir.path());
    let run = Command::new(&bin).arg(path.to_str().unwrap()).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "2 10 err");
}
