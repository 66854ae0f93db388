use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::train::{LossMode, Model};
use crate::error::{Error, Result};
use crate::losses::{AgeHead, AngularClassifier, AngularMarginConfig, MultiTaskConfig};
use crate::numerics::{Matrix, RandomState};

pub const FORMAT_VERSION: i64 = 1;

/// Everything needed to rebuild a trained model, stored as JSON.
///
/// Floats are written in shortest round-trip form, so a reload restores
/// every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: i64,
    pub encoder: Encoder,
    pub classifier: Matrix,
    pub age_head: AgeHead,
    pub loss_mode: LossMode,
    pub margin: AngularMarginConfig,
    pub multi_task: MultiTaskConfig,
    pub step: u64,
    pub rng: RandomState,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        self.encoder.validate()?;
        if self.classifier.cols() != self.encoder.spec.output_dim() {
            return Err(Error::Shape(format!(
                "classifier has {} columns but the encoder emits {}",
                self.classifier.cols(),
                self.encoder.spec.output_dim()
            )));
        }
        Ok(Model {
            encoder: self.encoder.clone(),
            classifier: AngularClassifier::unconstrained(self.classifier.clone()),
            head: self.age_head,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(text, source_name, &e))?;
        let version = value.get("format_version").and_then(|v| v.as_i64());
        match version {
            Some(FORMAT_VERSION) => {}
            Some(found) => {
                return Err(Error::UnsupportedVersion {
                    found,
                    expected: FORMAT_VERSION,
                })
            }
            None => {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    location: "byte 0".into(),
                    message: "missing integer format_version".into(),
                })
            }
        }
        // re-parse from text so errors carry positions
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| parse_error(text, source_name, &e))?;
        ckpt.model()?;
        Ok(ckpt)
    }
}

fn parse_error(text: &str, source_name: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        location: format!("byte {}", byte_offset(text, e.line(), e.column())),
        message: e.to_string(),
    }
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, ckpt.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text, &path.display().to_string())
}
