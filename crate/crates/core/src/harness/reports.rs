use std::path::{Path, PathBuf};

use super::config::ModelSpec;
use super::grid::heatmap;
use super::run::{read_records, read_summary, RunRecord};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::imagecore::{load_image, save_image};
use crate::metrics::{iou_correlation, matrix_csv, transfer_eval, AdversarialSet, SuccessSet, TransferTable};

pub const CORRELATION_CSV: &str = "correlation.csv";
pub const CORRELATION_PNG: &str = "correlation.png";
pub const TRANSFER_CSV: &str = "transfer.csv";
pub const TRANSFER_JSON: &str = "transfer.json";

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Success sets over the attempted images of each run. All runs must share
/// image ids, order and target model.
pub fn success_sets(run_dirs: &[PathBuf]) -> Result<Vec<SuccessSet>> {
    let mut ids: Option<(Vec<String>, String, PathBuf)> = None;
    let mut sets = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let summary = read_summary(dir)?;
        let records = read_records(dir)?;
        let mut run_ids = vec![String::new(); summary.attempted];
        for r in &records {
            *run_ids.get_mut(r.index).ok_or_else(|| {
                Error::invalid(format!(
                    "{}: record index {} out of range",
                    dir.display(),
                    r.index
                ))
            })? = r.image_id.clone();
        }
        for f in &summary.failures {
            if let Some(slot) = run_ids.get_mut(f.index) {
                *slot = f.image_id.clone();
            }
        }
        match &ids {
            None => ids = Some((run_ids, summary.model.clone(), dir.clone())),
            Some((first, model, first_dir)) => {
                if *first != run_ids {
                    return Err(Error::invalid(format!(
                        "corpus mismatch between {} and {}",
                        first_dir.display(),
                        dir.display()
                    )));
                }
                if *model != summary.model {
                    return Err(Error::invalid(format!(
                        "model mismatch: {} attacked {model}, {} attacked {}",
                        first_dir.display(),
                        dir.display(),
                        summary.model
                    )));
                }
            }
        }
        sets.push(SuccessSet::new(
            run_label(dir),
            summary.model,
            summary.attempted,
            records.iter().filter(|r| r.success).map(|r| r.index),
        )?);
    }
    Ok(sets)
}

/// Writes `correlation.csv` and `correlation.png` to `out` and returns the
/// matrix.
pub fn correlation_report(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<Vec<f64>>> {
    let sets = success_sets(run_dirs)?;
    let m = iou_correlation(&sets)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let labels: Vec<String> = sets.iter().map(|s| s.attack_id.clone()).collect();
    let csv = out.join(CORRELATION_CSV);
    std::fs::write(&csv, matrix_csv(&labels, &m)).map_err(|e| Error::io(&csv, e))?;
    save_image(&heatmap(&m, 40)?, out.join(CORRELATION_PNG))?;
    Ok(m)
}

fn adversarial_set(dir: &Path) -> Result<AdversarialSet> {
    let summary = read_summary(dir)?;
    let records: Vec<RunRecord> = read_records(dir)?;
    let mut images = Vec::with_capacity(records.len());
    for r in &records {
        let rel = r
            .adv_image
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{}: run saved no adversarial images", dir.display())))?;
        images.push((load_image(dir.join(rel))?, r.true_label));
    }
    Ok(AdversarialSet {
        attack: summary.attack,
        source_model: summary.model,
        images,
    })
}

/// Classifies the saved adversarial images of each run with every model and
/// writes `transfer.csv` and `transfer.json` to `out`.
pub fn transfer_report(run_dirs: &[PathBuf], models: &[ModelSpec], out: &Path) -> Result<TransferTable> {
    let sets = run_dirs
        .iter()
        .map(|d| adversarial_set(d))
        .collect::<Result<Vec<_>>>()?;
    let loaded = models
        .iter()
        .map(|m| Ok((m.name.clone(), m.load()?)))
        .collect::<Result<Vec<(String, Box<dyn Classifier>)>>>()?;
    let refs: Vec<(String, &dyn Classifier)> = loaded.iter().map(|(n, m)| (n.clone(), m.as_ref())).collect();
    let table = transfer_eval(&sets, &refs)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join(TRANSFER_CSV);
    std::fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let json = out.join(TRANSFER_JSON);
    let text = serde_json::to_string_pretty(&table).expect("table serializes");
    std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(table)
}
