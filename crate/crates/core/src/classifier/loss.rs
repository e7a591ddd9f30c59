use crate::error::{Error, Result};

/// Unnormalized class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Vec<f64>);

impl Logits {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn softmax(&self) -> Vec<f64> {
        let m = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.0.iter().map(|&v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }
}

/// Cross-entropy of the softmax against a one-hot label, and its gradient
/// with respect to the logits (`softmax - onehot`).
pub fn softmax_cross_entropy(logits: &Logits, label: usize) -> Result<(f64, Vec<f64>)> {
    let n = logits.len();
    if label >= n {
        return Err(Error::invalid(format!(
            "label {label} out of range for {n} classes"
        )));
    }
    let v = logits.values();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    let log_z = m + z.ln();
    let loss = (log_z - v[label]).max(0.0);
    let mut grad: Vec<f64> = v.iter().map(|&x| (x - log_z).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}
