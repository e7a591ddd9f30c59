use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cnn::ReferenceCnnWeights;
use super::loss::{softmax_cross_entropy, Logits};
use super::{Classifier, ReferenceClassifier};
use crate::error::{Error, Result};
use crate::imagecore::{Bilinear, Image, CHANNELS};

#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub input_side: usize,
    pub num_classes: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            input_side: 32,
            num_classes: 10,
            seed: 0,
            epochs: 40,
            lr: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured during the epoch.
    pub epoch_loss: Vec<f64>,
    pub train_accuracy: f64,
}

/// Plain per-example SGD on softmax cross-entropy. The weight init and the
/// per-epoch shuffles come from one seeded stream, so the result depends only
/// on `(dataset, cfg)`.
pub fn train_reference(
    dataset: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<(ReferenceCnnWeights, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(Error::invalid(format!(
            "learning rate must be >= 0, got {}",
            cfg.lr
        )));
    }
    let s = cfg.input_side;
    let dims = dataset[0].image.dims();
    let resize = Bilinear::new(dims, (s, s), CHANNELS);
    let mut inputs = Vec::with_capacity(dataset.len());
    for ex in dataset {
        if ex.image.dims() != dims {
            return Err(Error::shape(
                format!("{}x{} images", dims.0, dims.1),
                format!("{}x{}", ex.image.height(), ex.image.width()),
            ));
        }
        if ex.label >= cfg.num_classes {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                ex.label, cfg.num_classes
            )));
        }
        inputs.push(resize.apply(ex.image.data()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = ReferenceCnnWeights::init(s, cfg.num_classes, &mut rng)?;
    let mut grads = ReferenceCnnWeights::zeros(s, cfg.num_classes)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let trace = weights.forward_trace(&inputs[idx])?;
            let logits = Logits::new(trace.logits.clone())?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, dataset[idx].label)?;
            total += loss;
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|v| *v = 0.0);
            }
            weights.backward(&trace, &dlogits, Some(&mut grads), false);
            for (w, g) in weights.tensors_mut().into_iter().zip(grads.tensors()) {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= cfg.lr * gi;
                }
            }
        }
        let mean = total / dataset.len() as f64;
        log::info!("epoch {}: mean loss {mean:.4}", epoch + 1);
        epoch_loss.push(mean);
    }

    let train_accuracy = accuracy(&ReferenceClassifier::new(weights.clone())?, dataset)?;
    Ok((
        weights,
        TrainReport {
            epoch_loss,
            train_accuracy,
        },
    ))
}

pub fn accuracy(clf: &dyn Classifier, dataset: &[LabeledExample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let mut correct = 0usize;
    for ex in dataset {
        if clf.predict(&ex.image)? == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_color_set() -> Vec<LabeledExample> {
        (0..20)
            .map(|i| {
                let label = i % 2;
                let shade = 0.05 * (i / 2) as f64;
                let image = Image::from_fn(8, 8, |_, _, c| match (label, c) {
                    (0, 0) => 0.8 - shade * 0.3,
                    (1, 2) => 0.8 - shade * 0.3,
                    _ => 0.1 + shade * 0.2,
                })
                .unwrap();
                LabeledExample { image, label }
            })
            .collect()
    }

    fn cfg(epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            input_side: 8,
            num_classes: 2,
            seed: 7,
            epochs,
            lr,
        }
    }

    #[test]
    fn separable_colors_are_learned_quickly() {
        let data = two_color_set();
        let (_, report) = train_reference(&data, &cfg(5, 0.05)).unwrap();
        assert_eq!(report.train_accuracy, 1.0);
    }

    #[test]
    fn same_seed_same_weights() {
        let data = two_color_set();
        let (a, _) = train_reference(&data, &cfg(2, 0.05)).unwrap();
        let (b, _) = train_reference(&data, &cfg(2, 0.05)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let data = two_color_set();
        let (w, _) = train_reference(&data, &cfg(2, 0.0)).unwrap();
        let init = ReferenceCnnWeights::init(8, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(w, init);
    }

    #[test]
    fn empty_and_inconsistent_sets_rejected() {
        assert!(train_reference(&[], &cfg(1, 0.1)).is_err());
        let mut data = two_color_set();
        data.push(LabeledExample {
            image: Image::filled(4, 4, 0.0).unwrap(),
            label: 0,
        });
        assert!(train_reference(&data, &cfg(1, 0.1)).is_err());
    }
}
