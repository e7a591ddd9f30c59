use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, PixelAttackConfig};
use crate::classifier::{load_weights, Classifier, ExternalClassifier, ExternalSpec, ReferenceClassifier};
use crate::error::{Error, Result};
use crate::imagecore::SyntheticDepth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Hadvhaze,
    Iadvhaze,
    Fgsm,
    Ifgsm,
    Mifgsm,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Hadvhaze => "hadvhaze",
            AttackKind::Iadvhaze => "iadvhaze",
            AttackKind::Fgsm => "fgsm",
            AttackKind::Ifgsm => "ifgsm",
            AttackKind::Mifgsm => "mifgsm",
        }
    }

    pub fn is_haze(self) -> bool {
        matches!(self, AttackKind::Hadvhaze | AttackKind::Iadvhaze)
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::Config(format!("unknown attack {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelKind {
    /// Reference CNN weight file.
    Reference {
        weights: PathBuf,
    },
    External(ExternalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub model: ModelKind,
}

impl ModelSpec {
    pub fn reference(name: impl Into<String>, weights: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            model: ModelKind::Reference {
                weights: weights.into(),
            },
        }
    }

    pub fn load(&self) -> Result<Box<dyn Classifier>> {
        Ok(match &self.model {
            ModelKind::Reference { weights } => Box::new(ReferenceClassifier::new(load_weights(weights)?)?),
            ModelKind::External(spec) => Box::new(ExternalClassifier::new(spec.clone())?),
        })
    }
}

fn default_parallelism() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One batch attack run. Read from a single JSON document; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    /// Directory of `<image-stem>.pfm` depth maps. Images without one fall
    /// back to `synthetic_depth`.
    #[serde(default)]
    pub depth_dir: Option<PathBuf>,
    #[serde(default)]
    pub synthetic_depth: SyntheticDepth,
    pub attack: AttackKind,
    #[serde(default)]
    pub attack_params: AttackConfig,
    #[serde(default)]
    pub pixel_params: PixelAttackConfig,
    pub classifier: ModelSpec,
    pub output_dir: PathBuf,
    /// Recorded with the run. Attacks draw no random numbers, so it does not
    /// change any output.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Only attack the first `limit` corpus entries.
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default = "default_true")]
    pub save_images: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before touching any image.
    pub fn validate(&self) -> Result<()> {
        if !self.corpus_dir.is_dir() {
            return Err(Error::Config(format!(
                "corpus directory {} does not exist",
                self.corpus_dir.display()
            )));
        }
        if let Some(d) = &self.depth_dir {
            if !d.is_dir() {
                return Err(Error::Config(format!(
                    "depth directory {} does not exist",
                    d.display()
                )));
            }
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        match &self.classifier.model {
            ModelKind::Reference { weights } if !weights.is_file() => {
                return Err(Error::Config(format!(
                    "weight file {} does not exist",
                    weights.display()
                )))
            }
            ModelKind::Reference { .. } => {}
            ModelKind::External(_) => {
                return Err(Error::Config(
                    "attacks need gradients; use a reference classifier".into(),
                ))
            }
        }
        if self.attack.is_haze() {
            self.attack_params.validate()
        } else {
            self.pixel_params.validate()
        }
    }
}
