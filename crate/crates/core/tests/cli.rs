mod common;

use std::process::Command;

use hazekit::classifier::{Classifier, ReferenceClassifier};
use hazekit::harness::{read_summary, Corpus};
use hazekit::imagecore::{load_image, save_image};

fn hazekit(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_hazekit"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "hazekit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn classify_prints_in_process_logits() {
    let dir = tempfile::tempdir().unwrap();
    let (w, weights) = common::weights(dir.path(), 4);
    let img = &common::examples(&[0], 20, 30, 1)[0].image;
    let p = dir.path().join("x.png");
    save_image(img, &p).unwrap();
    let printed: Vec<f64> = serde_json::from_str(&hazekit(&[
        "classify",
        "--weights",
        w.to_str().unwrap(),
        p.to_str().unwrap(),
    ]))
    .unwrap();
    let expected = ReferenceClassifier::new(weights)
        .unwrap()
        .logits(&load_image(&p).unwrap())
        .unwrap();
    assert_eq!(printed, expected.values());
}

#[test]
fn desk_corpus_train_eval_attack_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let desk = d.join("desk");
    hazekit(&[
        "desk-corpus",
        "--out",
        desk.to_str().unwrap(),
        "--side",
        "32",
        "--train-size",
        "40",
        "--test-size",
        "10",
    ]);
    assert_eq!(Corpus::open(desk.join("train")).unwrap().len(), 40);
    assert_eq!(Corpus::open(desk.join("test")).unwrap().len(), 10);

    let w = d.join("w.bin");
    let report: serde_json::Value = serde_json::from_str(&hazekit(&[
        "train-ref",
        "--corpus",
        desk.join("train").to_str().unwrap(),
        "--out",
        w.to_str().unwrap(),
        "--epochs",
        "2",
        "--test-corpus",
        desk.join("test").to_str().unwrap(),
    ]))
    .unwrap();
    assert!(report["test_accuracy"].as_f64().is_some());
    assert_eq!(report["epoch_loss"].as_array().unwrap().len(), 2);

    let eval: serde_json::Value = serde_json::from_str(&hazekit(&[
        "eval",
        "--corpus",
        desk.join("test").to_str().unwrap(),
        "--weights",
        w.to_str().unwrap(),
    ]))
    .unwrap();
    assert_eq!(eval["accuracy"], report["test_accuracy"]);

    // Config file with flag overrides.
    let cfg = d.join("run.json");
    std::fs::write(
        &cfg,
        common::run_config(
            &desk.join("test"),
            &w,
            &d.join("ignored"),
            "hadvhaze",
            r#", "attack_params": {"n": 7}"#,
        ),
    )
    .unwrap();
    let out = d.join("run");
    hazekit(&[
        "attack",
        "--config",
        cfg.to_str().unwrap(),
        "--attack",
        "iadvhaze",
        "--output-dir",
        out.to_str().unwrap(),
        "--n",
        "2",
        "--limit",
        "4",
    ]);
    let s = read_summary(&out).unwrap();
    assert_eq!(s.attack, "iadvhaze");
    assert_eq!(s.attempted, 4);
    assert_eq!(s.config.attack_params.n, 2);
    assert!(!d.join("ignored").exists());
}

#[test]
fn grid_writes_contact_sheet() {
    let dir = tempfile::tempdir().unwrap();
    let img = &common::examples(&[0], 24, 24, 2)[0].image;
    let p = dir.path().join("x.png");
    save_image(img, &p).unwrap();
    let out = dir.path().join("grid.png");
    hazekit(&[
        "grid",
        "--image",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let sheet = load_image(&out).unwrap();
    assert!(sheet.height() > 3 * 24 && sheet.width() > 4 * 24);
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_hazekit"))
        .args(["attack", "--attack", "iadvhaze"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
