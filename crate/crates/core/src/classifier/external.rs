use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::loss::Logits;
use super::Classifier;
use crate::error::{Error, Result};
use crate::imagecore::{encode_png, Image};

fn default_timeout_ms() -> u64 {
    30_000
}

/// How to reach an out-of-process model: `command[0] command[1..] <png-path>`
/// must print a JSON array of `num_classes` numbers on stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: Vec<String>,
    pub num_classes: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ExternalClassifier {
    spec: ExternalSpec,
}

impl ExternalClassifier {
    pub fn new(spec: ExternalSpec) -> Result<Self> {
        if spec.command.is_empty() {
            return Err(Error::Config("external classifier command is empty".into()));
        }
        if spec.num_classes < 2 {
            return Err(Error::Config(format!(
                "external classifier needs at least 2 classes, got {}",
                spec.num_classes
            )));
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &ExternalSpec {
        &self.spec
    }

    fn run(&self, png: &[u8]) -> Result<String> {
        let mut file = tempfile::Builder::new()
            .prefix("hazekit-")
            .suffix(".png")
            .tempfile()
            .map_err(|e| Error::Adapter(format!("temp file: {e}")))?;
        std::io::Write::write_all(&mut file, png).map_err(|e| Error::io(file.path(), e))?;

        let mut child = Command::new(&self.spec.command[0])
            .args(&self.spec.command[1..])
            .arg(file.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Adapter(format!("spawn {:?}: {e}", self.spec.command[0])))?;

        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let timeout = Duration::from_millis(self.spec.timeout_ms);
        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() >= timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::AdapterTimeout(timeout));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(Error::Adapter(format!("wait: {e}"))),
            }
        };
        let stdout = out_reader
            .join()
            .expect("stdout reader panicked")
            .map_err(|e| Error::Adapter(format!("reading stdout: {e}")))?;
        let stderr = err_reader.join().expect("stderr reader panicked");
        if !status.success() {
            return Err(Error::Adapter(format!("{status}: {}", stderr.trim())));
        }
        Ok(stdout)
    }
}

/// Accepts a JSON array or whitespace-separated numbers.
pub(crate) fn parse_scores(text: &str, expected: usize) -> Result<Logits> {
    let text = text.trim();
    let values: Vec<f64> = if text.starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Adapter(format!("malformed response: {e}")))?
    } else {
        text.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Adapter(format!("malformed response token {tok:?}")))
            })
            .collect::<Result<_>>()?
    };
    if values.len() != expected {
        return Err(Error::Adapter(format!(
            "expected {expected} scores, got {}",
            values.len()
        )));
    }
    Logits::new(values).map_err(|e| Error::Adapter(format!("malformed response: {e}")))
}

impl Classifier for ExternalClassifier {
    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn logits(&self, img: &Image) -> Result<Logits> {
        let png = encode_png(img)?;
        parse_scores(&self.run(&png)?, self.spec.num_classes)
    }
}
