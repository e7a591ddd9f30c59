use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AttackKind, RunConfig};
use super::corpus::{Corpus, CorpusEntry};
use crate::attack::{
    attack_hadvhaze, attack_iadvhaze, baseline_fgsm, baseline_ifgsm, baseline_mifgsm, AttackParams,
    AttackResult,
};
use crate::classifier::{load_weights, ReferenceClassifier};
use crate::error::{Error, Result};
use crate::imagecore::{load_depth, save_image, synthetic_depth, DepthMap};
use crate::metrics::{quality, success_rate, Outcome, SuccessMode};

pub const RECORD_SCHEMA: &str = "hazekit.run-record/1";
pub const SUMMARY_SCHEMA: &str = "hazekit.run-summary/1";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ADV_DIR: &str = "adv";

/// Record fields that vary between otherwise identical runs.
pub const WALL_TIME_FIELDS: &[&str] = &["wall_time_ms"];

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub index: usize,
    pub image_id: String,
    pub true_label: usize,
    pub pred_clean: usize,
    pub pred_adv: usize,
    pub success: bool,
    pub loss_initial: f64,
    pub loss_final: f64,
    pub iterations_run: usize,
    pub linf: f64,
    pub l2: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// `file` or `synthetic:<kind>`.
    pub depth: String,
    pub depth_synthetic: bool,
    /// Final homogeneous parameters, for the homogeneous attack only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haze_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haze_beta: Option<f64>,
    /// Path of the adversarial PNG relative to the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adv_image: Option<String>,
    pub wall_time_ms: f64,
}

impl RunRecord {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            true_label: self.true_label,
            pred_clean: self.pred_clean,
            pred_adv: self.pred_adv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub index: usize,
    pub image_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub attack: String,
    pub model: String,
    pub corpus_size: usize,
    pub attempted: usize,
    pub records: usize,
    pub failures: Vec<RunFailure>,
    pub clean_accuracy: Option<f64>,
    pub success_rate_overall: Option<f64>,
    pub success_rate_initially_correct: Option<f64>,
    pub mean_linf: Option<f64>,
    pub mean_l2: Option<f64>,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub synthetic_depth_images: usize,
    pub seed: u64,
    pub config: RunConfig,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl RunSummary {
    pub fn from_records(
        cfg: &RunConfig,
        corpus_size: usize,
        attempted: usize,
        records: &[RunRecord],
        failures: Vec<RunFailure>,
    ) -> Self {
        let outcomes: Vec<Outcome> = records.iter().map(RunRecord::outcome).collect();
        Self {
            schema: SUMMARY_SCHEMA.into(),
            attack: cfg.attack.name().into(),
            model: cfg.classifier.name.clone(),
            corpus_size,
            attempted,
            records: records.len(),
            failures,
            clean_accuracy: mean(
                records
                    .iter()
                    .map(|r| f64::from(u8::from(r.pred_clean == r.true_label))),
            ),
            success_rate_overall: success_rate(&outcomes, SuccessMode::Overall).ok(),
            success_rate_initially_correct: success_rate(&outcomes, SuccessMode::InitiallyCorrect).ok(),
            mean_linf: mean(records.iter().map(|r| r.linf)),
            mean_l2: mean(records.iter().map(|r| r.l2)),
            mean_psnr: mean(records.iter().map(|r| r.psnr)),
            mean_ssim: mean(records.iter().map(|r| r.ssim)),
            synthetic_depth_images: records.iter().filter(|r| r.depth_synthetic).count(),
            seed: cfg.seed,
            config: cfg.clone(),
        }
    }
}

fn obtain_depth(
    cfg: &RunConfig,
    entry: &CorpusEntry,
    dims: (usize, usize),
) -> Result<(DepthMap, String, bool)> {
    if let Some(dir) = &cfg.depth_dir {
        let path = dir.join(format!("{}.pfm", entry.id()));
        if path.is_file() {
            let field = load_depth(&path)?;
            if field.dims() != dims {
                return Err(Error::shape(
                    format!("{}x{} depth", dims.0, dims.1),
                    format!("{}x{} in {}", field.height(), field.width(), path.display()),
                ));
            }
            return Ok((DepthMap::new(field)?, "file".into(), false));
        }
    }
    let kind = cfg.synthetic_depth;
    Ok((
        synthetic_depth(kind, dims.0, dims.1)?,
        format!("synthetic:{kind}"),
        true,
    ))
}

pub(crate) fn run_attack(
    kind: AttackKind,
    cfg: &RunConfig,
    clf: &ReferenceClassifier,
    img: &crate::imagecore::Image,
    depth: &DepthMap,
    label: usize,
) -> Result<AttackResult> {
    match kind {
        AttackKind::Hadvhaze => attack_hadvhaze(img, depth, clf, label, &cfg.attack_params),
        AttackKind::Iadvhaze => attack_iadvhaze(img, depth, clf, label, &cfg.attack_params),
        AttackKind::Fgsm => baseline_fgsm(img, clf, label, cfg.pixel_params.eps),
        AttackKind::Ifgsm => baseline_ifgsm(img, clf, label, &cfg.pixel_params),
        AttackKind::Mifgsm => baseline_mifgsm(img, clf, label, &cfg.pixel_params),
    }
}

fn attack_one(
    cfg: &RunConfig,
    clf: &ReferenceClassifier,
    corpus: &Corpus,
    index: usize,
    entry: &CorpusEntry,
) -> Result<RunRecord> {
    let start = Instant::now();
    let img = corpus.load(entry)?;
    let (depth, depth_source, depth_synthetic) = obtain_depth(cfg, entry, img.dims())?;
    let r = run_attack(cfg.attack, cfg, clf, &img, &depth, entry.label)?;
    let q = quality(&img, &r.adversarial)?;
    let adv_image = if cfg.save_images {
        let rel = format!("{ADV_DIR}/{}.png", entry.id());
        save_image(&r.adversarial, cfg.output_dir.join(&rel))?;
        Some(rel)
    } else {
        None
    };
    let (haze_a, haze_beta) = match r.params {
        AttackParams::Homogeneous(s) => (Some(s.a), Some(s.beta)),
        _ => (None, None),
    };
    Ok(RunRecord {
        schema: RECORD_SCHEMA.into(),
        index,
        image_id: entry.id(),
        true_label: r.true_label,
        pred_clean: r.pred_clean,
        pred_adv: r.pred_adv,
        success: r.success,
        loss_initial: r.loss_trace[0],
        loss_final: *r.loss_trace.last().expect("trace is never empty"),
        iterations_run: r.iterations_run,
        linf: q.linf,
        l2: q.l2,
        psnr: q.psnr,
        ssim: q.ssim,
        depth: depth_source,
        depth_synthetic,
        haze_a,
        haze_beta,
        adv_image,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Attacks every corpus image and writes `results.jsonl`, `summary.json` and
/// `adv/<id>.png` under the output directory. Per-image failures are listed
/// in the summary; the run itself fails only on configuration errors.
pub fn run_attack_batch(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let corpus = Corpus::open(&cfg.corpus_dir)?;
    if corpus.is_empty() {
        return Err(Error::Config(format!(
            "corpus {} is empty",
            cfg.corpus_dir.display()
        )));
    }
    let weights = match &cfg.classifier.model {
        super::config::ModelKind::Reference { weights } => load_weights(weights)?,
        super::config::ModelKind::External(_) => unreachable!("rejected by validate"),
    };
    let clf = ReferenceClassifier::new(weights)?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out.join(ADV_DIR)).map_err(|e| Error::io(out, e))?;

    let n = cfg.limit.unwrap_or(usize::MAX).min(corpus.len());
    let entries = &corpus.entries[..n];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let results_path = out.join(RESULTS_FILE);
    let file = std::fs::File::create(&results_path).map_err(|e| Error::io(&results_path, e))?;
    let mut writer = BufWriter::new(file);
    let mut records = Vec::with_capacity(n);
    let mut failures = Vec::new();

    let (tx, rx) = std::sync::mpsc::channel::<(usize, Result<RunRecord>)>();
    std::thread::scope(|s| -> Result<()> {
        let clf = &clf;
        let corpus = &corpus;
        s.spawn(move || {
            pool.install(|| {
                entries.par_iter().enumerate().for_each_with(tx, |tx, (i, e)| {
                    let _ = tx.send((i, attack_one(cfg, clf, corpus, i, e)));
                })
            })
        });
        // Results arrive in any order; write them in corpus order.
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                match r {
                    Ok(rec) => {
                        let line = serde_json::to_string(&rec).expect("record serializes");
                        writeln!(writer, "{line}").map_err(|e| Error::io(&results_path, e))?;
                        writer.flush().map_err(|e| Error::io(&results_path, e))?;
                        records.push(rec);
                    }
                    Err(e) => {
                        log::warn!("{}: {e}", entries[next].file);
                        failures.push(RunFailure {
                            index: next,
                            image_id: entries[next].id(),
                            error: e.to_string(),
                        });
                    }
                }
                next += 1;
            }
        }
        Ok(())
    })?;

    let summary = RunSummary::from_records(cfg, corpus.len(), n, &records, failures);
    write_summary(out, &summary)?;
    Ok(summary)
}

pub fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_summary(dir: impl AsRef<Path>) -> Result<RunSummary> {
    let path = dir.as_ref().join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        kind: "run summary",
        reason: format!("{}: {e}", path.display()),
    })
}

pub fn read_records(dir: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path: PathBuf = dir.as_ref().join(RESULTS_FILE);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (k, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            kind: "run record",
            reason: format!("{}:{}: {e}", path.display(), k + 1),
        })?);
    }
    Ok(out)
}

/// A `results.jsonl` line with the [`WALL_TIME_FIELDS`] removed, for
/// comparing runs.
pub fn strip_wall_time(line: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Malformed {
        kind: "run record",
        reason: e.to_string(),
    })?;
    if let Some(obj) = v.as_object_mut() {
        for f in WALL_TIME_FIELDS {
            obj.remove(*f);
        }
    }
    Ok(v.to_string())
}
