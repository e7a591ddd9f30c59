//! Labelled image directories.
//!
//! A corpus directory holds RGB PNGs and a `labels.csv` with header
//! `file,label`, one row per image, paths relative to the directory. The
//! image id is the file stem.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::LabeledExample;
use crate::error::{Error, Result};
use crate::imagecore::{load_image, save_image, Image};

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub file: String,
    pub label: usize,
}

impl CorpusEntry {
    pub fn id(&self) -> String {
        Path::new(&self.file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.file.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let labels = dir.join(LABELS_FILE);
        let mut reader = csv::Reader::from_path(&labels).map_err(|e| csv_error(&labels, e))?;
        let mut entries = Vec::new();
        for row in reader.deserialize::<CorpusEntry>() {
            entries.push(row.map_err(|e| csv_error(&labels, e))?);
        }
        let mut ids: Vec<String> = entries.iter().map(CorpusEntry::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "duplicate image id {:?} in {}",
                w[0],
                labels.display()
            )));
        }
        Ok(Self { dir, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self, entry: &CorpusEntry) -> PathBuf {
        self.dir.join(&entry.file)
    }

    pub fn load(&self, entry: &CorpusEntry) -> Result<Image> {
        load_image(self.path(entry))
    }

    pub fn load_all(&self) -> Result<Vec<LabeledExample>> {
        self.entries
            .iter()
            .map(|e| {
                Ok(LabeledExample {
                    image: self.load(e)?,
                    label: e.label,
                })
            })
            .collect()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Malformed {
        kind: "labels.csv",
        reason: format!("{}: {e}", path.display()),
    }
}

/// Writes `examples` as `<prefix><index>.png` plus `labels.csv`.
pub fn write_corpus(dir: impl AsRef<Path>, prefix: &str, examples: &[LabeledExample]) -> Result<Corpus> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = examples.len().saturating_sub(1).to_string().len();
    let mut entries = Vec::with_capacity(examples.len());
    for (k, ex) in examples.iter().enumerate() {
        let file = format!("{prefix}{k:0width$}.png");
        save_image(&ex.image, dir.join(&file))?;
        entries.push(CorpusEntry {
            file,
            label: ex.label,
        });
    }
    let labels = dir.join(LABELS_FILE);
    let mut w = csv::Writer::from_path(&labels).map_err(|e| csv_error(&labels, e))?;
    for e in &entries {
        w.serialize(e).map_err(|e| csv_error(&labels, e))?;
    }
    w.flush().map_err(|e| Error::io(&labels, e))?;
    Ok(Corpus {
        dir: dir.to_path_buf(),
        entries,
    })
}
