//! Success rates, attack-overlap IoU, transfer tables and image-quality
//! measures.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::AttackResult;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::imagecore::{ensure_same_dims, Image, CHANNELS};

/// The three labels a success rate needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub true_label: usize,
    pub pred_clean: usize,
    pub pred_adv: usize,
}

impl From<&AttackResult> for Outcome {
    fn from(r: &AttackResult) -> Self {
        Self {
            true_label: r.true_label,
            pred_clean: r.pred_clean,
            pred_adv: r.pred_adv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessMode {
    /// Misclassified after the attack, over all images.
    Overall,
    /// Misclassified after the attack, over images the model got right before.
    InitiallyCorrect,
}

pub fn success_rate(outcomes: &[Outcome], mode: SuccessMode) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::invalid("success rate of an empty result list"));
    }
    let pool: Vec<&Outcome> = match mode {
        SuccessMode::Overall => outcomes.iter().collect(),
        SuccessMode::InitiallyCorrect => outcomes.iter().filter(|o| o.pred_clean == o.true_label).collect(),
    };
    if pool.is_empty() {
        return Err(Error::invalid("no initially-correct images"));
    }
    let fooled = pool.iter().filter(|o| o.pred_adv != o.true_label).count();
    Ok(fooled as f64 / pool.len() as f64)
}

/// Images of a corpus of `corpus_size` that one attack fooled on one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessSet {
    pub attack_id: String,
    pub model_id: String,
    pub corpus_size: usize,
    pub indices: BTreeSet<usize>,
}

impl SuccessSet {
    pub fn new(
        attack_id: impl Into<String>,
        model_id: impl Into<String>,
        corpus_size: usize,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= corpus_size) {
            return Err(Error::invalid(format!(
                "index {bad} outside a corpus of {corpus_size}"
            )));
        }
        Ok(Self {
            attack_id: attack_id.into(),
            model_id: model_id.into(),
            corpus_size,
            indices,
        })
    }
}

/// Pairwise `|S_i & S_j| / |S_i | S_j|`. Two empty sets score 1.
pub fn iou_correlation(sets: &[SuccessSet]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = sets.first() {
        if let Some(other) = sets.iter().find(|s| s.corpus_size != first.corpus_size) {
            return Err(Error::invalid(format!(
                "corpus mismatch: {} has {} images, {} has {}",
                first.attack_id, first.corpus_size, other.attack_id, other.corpus_size
            )));
        }
    }
    Ok(sets
        .iter()
        .map(|a| {
            sets.iter()
                .map(|b| {
                    let inter = a.indices.intersection(&b.indices).count();
                    let union = a.indices.len() + b.indices.len() - inter;
                    if union == 0 {
                        1.0
                    } else {
                        inter as f64 / union as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// Square matrix as CSV with `labels` as header row and first column.
pub fn matrix_csv(labels: &[String], m: &[Vec<f64>]) -> String {
    let mut out = String::from("");
    for l in labels {
        write!(out, ",{}", csv_field(l)).unwrap();
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(m) {
        out.push_str(&csv_field(l));
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn linf(a: &Image, b: &Image) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Euclidean norm of the difference over all pixels and channels.
pub fn l2(a: &Image, b: &Image) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak signal-to-noise ratio for a peak value of 1, capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

pub const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Integral image with a zero border: `s[(r) * (w + 1) + c]` is the sum of
/// `f` over rows `< r` and columns `< c`.
fn integral(f: impl Fn(usize, usize) -> f64, h: usize, w: usize) -> Vec<f64> {
    let mut s = vec![0.0; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += f(r, c);
            s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + row;
        }
    }
    s
}

fn box_sum(s: &[f64], w: usize, r: usize, c: usize, wh: usize, ww: usize) -> f64 {
    let at = |rr: usize, cc: usize| s[rr * (w + 1) + cc];
    at(r + wh, c + ww) - at(r, c + ww) - at(r + wh, c) + at(r, c)
}

/// Mean SSIM over all 8x8 windows (stride 1) and channels, using population
/// statistics in each window. Images smaller than 8 pixels along a side use
/// the full extent along that side.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let (h, w) = a.dims();
    let (wh, ww) = (SSIM_WINDOW.min(h), SSIM_WINDOW.min(w));
    let n = (wh * ww) as f64;
    let (ad, bd) = (a.data(), b.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..CHANNELS {
        let x = |r: usize, c: usize| ad[(r * w + c) * CHANNELS + ch];
        let y = |r: usize, c: usize| bd[(r * w + c) * CHANNELS + ch];
        let sx = integral(x, h, w);
        let sy = integral(y, h, w);
        let sxx = integral(|r, c| x(r, c) * x(r, c), h, w);
        let syy = integral(|r, c| y(r, c) * y(r, c), h, w);
        let sxy = integral(|r, c| x(r, c) * y(r, c), h, w);
        for r in 0..=h - wh {
            for c in 0..=w - ww {
                let mx = box_sum(&sx, w, r, c, wh, ww) / n;
                let my = box_sum(&sy, w, r, c, wh, ww) / n;
                let vx = (box_sum(&sxx, w, r, c, wh, ww) / n - mx * mx).max(0.0);
                let vy = (box_sum(&syy, w, r, c, wh, ww) / n - my * my).max(0.0);
                let cov = box_sum(&sxy, w, r, c, wh, ww) / n - mx * my;
                total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Quality of `adv` against `clean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub linf: f64,
    pub l2: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn quality(clean: &Image, adv: &Image) -> Result<QualityMetrics> {
    Ok(QualityMetrics {
        linf: linf(clean, adv)?,
        l2: l2(clean, adv)?,
        psnr: psnr(clean, adv)?,
        ssim: ssim(clean, adv)?,
    })
}

/// Adversarial images crafted by one attack against one source model.
#[derive(Debug, Clone)]
pub struct AdversarialSet {
    pub attack: String,
    pub source_model: String,
    /// `(adversarial image, true label)` pairs.
    pub images: Vec<(Image, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TransferCell {
    Rate {
        value: f64,
    },
    /// Destination equals the source model.
    Excluded,
    /// The destination model failed; the message is the first error.
    Absent {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub attack: String,
    pub source_model: String,
    pub cells: Vec<TransferCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTable {
    pub destinations: Vec<String>,
    pub rows: Vec<TransferRow>,
}

impl TransferTable {
    /// Header row lists destination models; excluded cells are `-` and
    /// absent cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attack,source");
        for d in &self.destinations {
            write!(out, ",{}", csv_field(d)).unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{},{}", csv_field(&row.attack), csv_field(&row.source_model)).unwrap();
            for cell in &row.cells {
                match cell {
                    TransferCell::Rate { value } => write!(out, ",{value}").unwrap(),
                    TransferCell::Excluded => out.push_str(",-"),
                    TransferCell::Absent { .. } => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Overall success rate of every adversarial set on every other model.
pub fn transfer_eval(sets: &[AdversarialSet], models: &[(String, &dyn Classifier)]) -> Result<TransferTable> {
    for s in sets {
        if let Some((_, &l)) = s
            .images
            .iter()
            .map(|(_, l)| l)
            .enumerate()
            .find(|(_, &l)| models.iter().any(|(_, m)| l >= m.num_classes()))
        {
            return Err(Error::invalid(format!(
                "{}/{}: label {l} out of range for a destination model",
                s.attack, s.source_model
            )));
        }
    }
    let rows = sets
        .iter()
        .map(|s| {
            let cells = models
                .par_iter()
                .map(|(name, model)| {
                    if *name == s.source_model {
                        return TransferCell::Excluded;
                    }
                    let mut outcomes = Vec::with_capacity(s.images.len());
                    for (img, label) in &s.images {
                        match model.predict(img) {
                            Ok(pred) => outcomes.push(Outcome {
                                true_label: *label,
                                pred_clean: *label,
                                pred_adv: pred,
                            }),
                            Err(e) => return TransferCell::Absent { error: e.to_string() },
                        }
                    }
                    match success_rate(&outcomes, SuccessMode::Overall) {
                        Ok(value) => TransferCell::Rate { value },
                        Err(e) => TransferCell::Absent { error: e.to_string() },
                    }
                })
                .collect();
            TransferRow {
                attack: s.attack.clone(),
                source_model: s.source_model.clone(),
                cells,
            }
        })
        .collect();
    Ok(TransferTable {
        destinations: models.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    })
}
