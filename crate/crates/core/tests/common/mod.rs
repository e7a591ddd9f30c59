#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hazekit::classifier::{load_weights, save_weights, LabeledExample, ReferenceCnnWeights};
use hazekit::harness::write_corpus;
use hazekit::imagecore::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random-init reference CNN saved to `dir/w.bin`; returns the path and the
/// weights as stored (f32-rounded).
pub fn weights(dir: &Path, seed: u64) -> (PathBuf, ReferenceCnnWeights) {
    let w = ReferenceCnnWeights::init(32, 10, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let p = dir.join("w.bin");
    save_weights(&w, &p).unwrap();
    (p.clone(), load_weights(&p).unwrap())
}

/// Quantized random images with the given labels.
pub fn examples(labels: &[usize], h: usize, w: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|&label| {
            let data = (0..h * w * 3)
                .map(|_| rng.gen_range(0..=255u8) as f64 / 255.0)
                .collect();
            LabeledExample {
                image: Image::new(h, w, data).unwrap(),
                label,
            }
        })
        .collect()
}

pub fn corpus(dir: &Path, labels: &[usize], h: usize, w: usize) -> PathBuf {
    let d = dir.join("corpus");
    write_corpus(&d, "img", &examples(labels, h, w, 11)).unwrap();
    d
}

pub fn run_config(corpus: &Path, weights: &Path, out: &Path, attack: &str, extra: &str) -> String {
    format!(
        r#"{{"corpus_dir": {c:?}, "attack": "{attack}",
            "classifier": {{"name": "ref", "model": {{"reference": {{"weights": {w:?}}}}}}},
            "output_dir": {o:?} {extra}}}"#,
        c = corpus,
        w = weights,
        o = out,
    )
}
