//! Target classifiers: the trainable reference CNN with exact input
//! gradients, the cross-entropy loss, a finite-difference gradient oracle, and
//! a forward-only adapter for externally hosted models.

mod cnn;
mod external;
mod loss;
mod train;
mod weights_file;

pub use cnn::{ReferenceCnnWeights, CONV1_OUT, CONV2_OUT};
pub use external::{ExternalClassifier, ExternalSpec};
pub use loss::{softmax_cross_entropy, Logits};
pub use train::{accuracy, train_reference, LabeledExample, TrainConfig, TrainReport};
pub use weights_file::{decode_weights, encode_weights, load_weights, save_weights};

use crate::error::{Error, Result};
use crate::imagecore::{Bilinear, Image, ImageGrad, CHANNELS};

/// Forward-only classifier.
pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    fn logits(&self, img: &Image) -> Result<Logits>;

    fn predict(&self, img: &Image) -> Result<usize> {
        Ok(self.logits(img)?.argmax())
    }
}

/// Cross-entropy loss, logits and `dJ/dimage` from one forward/backward pass.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub logits: Logits,
    pub grad: ImageGrad,
}

/// Classifier with exact gradients of the cross-entropy loss with respect to
/// its input pixels.
pub trait DifferentiableClassifier: Classifier {
    fn loss_and_grad(&self, img: &Image, label: usize) -> Result<LossGrad>;
}

/// The reference CNN applied to images of any size: inputs are bilinearly
/// resized to the network's side length first, and gradients are carried
/// back through that resize.
#[derive(Debug, Clone)]
pub struct ReferenceClassifier {
    weights: ReferenceCnnWeights,
}

impl ReferenceClassifier {
    pub fn new(weights: ReferenceCnnWeights) -> Result<Self> {
        weights.validate()?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &ReferenceCnnWeights {
        &self.weights
    }

    pub fn input_side(&self) -> usize {
        self.weights.input_side
    }

    fn resizer(&self, dims: (usize, usize)) -> Bilinear {
        let s = self.weights.input_side;
        Bilinear::new(dims, (s, s), CHANNELS)
    }

    /// Logits for an arbitrary image-shaped array. Values are not required to
    /// lie in `[0, 1]`, which the finite-difference oracle relies on.
    pub fn logits_raw(&self, height: usize, width: usize, data: &[f64]) -> Result<Logits> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::shape(height * width * CHANNELS, data.len()));
        }
        let x = self.resizer((height, width)).apply(data);
        Logits::new(self.weights.forward(&x)?)
    }
}

impl Classifier for ReferenceClassifier {
    fn num_classes(&self) -> usize {
        self.weights.num_classes
    }

    fn logits(&self, img: &Image) -> Result<Logits> {
        self.logits_raw(img.height(), img.width(), img.data())
    }
}

impl DifferentiableClassifier for ReferenceClassifier {
    fn loss_and_grad(&self, img: &Image, label: usize) -> Result<LossGrad> {
        let resize = self.resizer(img.dims());
        let x = resize.apply(img.data());
        let trace = self.weights.forward_trace(&x)?;
        let logits = Logits::new(trace.logits.clone())?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, label)?;
        let dx = self
            .weights
            .backward(&trace, &dlogits, None, true)
            .expect("input gradient requested");
        let (h, w) = img.dims();
        let grad = ImageGrad::new(h, w, resize.adjoint(&dx))?;
        Ok(LossGrad { loss, logits, grad })
    }
}

/// Exact `dJ/dimg` of the cross-entropy at `label` for the reference CNN.
pub fn input_gradient(weights: &ReferenceCnnWeights, img: &Image, label: usize) -> Result<ImageGrad> {
    Ok(ReferenceClassifier::new(weights.clone())?
        .loss_and_grad(img, label)?
        .grad)
}

/// Central-difference estimate of `dJ/dimg` for any forward function mapping
/// an image-shaped array to logits. Costs two forward calls per component.
pub fn numeric_input_gradient<F>(
    forward: F,
    height: usize,
    width: usize,
    data: &[f64],
    label: usize,
    step: f64,
) -> Result<ImageGrad>
where
    F: Fn(&[f64]) -> Result<Logits>,
{
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::invalid(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    if data.len() != height * width * CHANNELS {
        return Err(Error::shape(height * width * CHANNELS, data.len()));
    }
    let mut x = data.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + step;
        let (plus, _) = softmax_cross_entropy(&forward(&x)?, label)?;
        x[k] = orig - step;
        let (minus, _) = softmax_cross_entropy(&forward(&x)?, label)?;
        x[k] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    ImageGrad::new(height, width, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        num / den.max(1e-30)
    }

    fn random_setup(seed: u64, side: usize, native: usize) -> (ReferenceClassifier, Image, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = ReferenceCnnWeights::init(side, 5, &mut rng).unwrap();
        for b in w.conv1_b.iter_mut().chain(w.conv2_b.iter_mut()) {
            *b = rng.gen_range(-0.1..0.1);
        }
        let img = Image::from_fn(native, native, |_, _, _| rng.gen_range(0.0..=1.0)).unwrap();
        let label = rng.gen_range(0..5);
        (ReferenceClassifier::new(w).unwrap(), img, label)
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for seed in 0..4 {
            let (clf, img, y) = random_setup(seed, 16, 16);
            let an = clf.loss_and_grad(&img, y).unwrap().grad;
            let fd =
                numeric_input_gradient(|x| clf.logits_raw(16, 16, x), 16, 16, img.data(), y, 1e-5).unwrap();
            let e = rel_err(an.data(), fd.data());
            assert!(e < 1e-5, "seed {seed}: rel err {e}");
        }
    }

    #[test]
    fn gradient_flows_through_resize() {
        let (clf, img, y) = random_setup(9, 8, 13);
        let an = clf.loss_and_grad(&img, y).unwrap().grad;
        let fd = numeric_input_gradient(|x| clf.logits_raw(13, 13, x), 13, 13, img.data(), y, 1e-5).unwrap();
        assert!(rel_err(an.data(), fd.data()) < 1e-5);
    }

    #[test]
    fn gradient_is_linear_in_the_softmax_residual() {
        // The input gradient is J^T r for the network Jacobian J and residual
        // r = softmax - onehot, so combining residuals combines gradients.
        let (clf, img, _) = random_setup(3, 8, 8);
        let w = clf.weights();
        let trace = w.forward_trace(img.data()).unwrap();
        let r1 = [0.2, -0.5, 0.1, 0.1, 0.1];
        let r2 = [-0.3, 0.0, 0.6, -0.2, -0.1];
        let g1 = w.backward(&trace, &r1, None, true).unwrap();
        let g2 = w.backward(&trace, &r2, None, true).unwrap();
        let mix: Vec<f64> = r1.iter().zip(r2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let gm = w.backward(&trace, &mix, None, true).unwrap();
        for k in 0..gm.len() {
            assert!((gm[k] - (2.0 * g1[k] - 0.5 * g2[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_softmax_gives_near_zero_gradient() {
        let mut w = ReferenceCnnWeights::zeros(8, 3).unwrap();
        w.fc_b[1] = 200.0;
        let clf = ReferenceClassifier::new(w).unwrap();
        let img = Image::filled(8, 8, 0.4).unwrap();
        let g = clf.loss_and_grad(&img, 1).unwrap();
        assert!(g.loss < 1e-12);
        assert!(g.grad.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn numeric_gradient_of_linear_model_is_exact() {
        let (h, w) = (2, 2);
        let n = h * w * 3;
        let weights: Vec<Vec<f64>> = (0..3)
            .map(|k| (0..n).map(|i| ((i * 7 + k * 3) % 5) as f64 * 0.1 - 0.2).collect())
            .collect();
        let f = |x: &[f64]| {
            Logits::new(
                weights
                    .iter()
                    .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect(),
            )
        };
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y = 2;
        let g = numeric_input_gradient(f, h, w, &x, y, 1e-4).unwrap();
        let logits = f(&x).unwrap();
        let (_, r) = softmax_cross_entropy(&logits, y).unwrap();
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            let want: f64 = (0..3).map(|c| r[c] * weights[c][k]).sum();
            assert!((g.data()[k] - want).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_step_rejected() {
        let f = |_: &[f64]| Logits::new(vec![0.0, 1.0]);
        assert!(numeric_input_gradient(f, 1, 1, &[0.0; 3], 0, 0.0).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let (clf, img, _) = random_setup(5, 16, 16);
        let a = clf.logits(&img).unwrap();
        let b = clf.logits(&img).unwrap();
        assert_eq!(
            a.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.len(), 5);
    }
}
