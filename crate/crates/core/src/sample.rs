//! The sample record and the canonical `manifest.jsonl` format.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;
use crate::error::{Error, Result};
use crate::pools::{ColorMode, Precision, SignMode};
use crate::qaformat::OptionArrangement;
use crate::rules::{PuzzleRule, Segmentation};
use crate::seed::TaskId;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum GroundTruth {
    Count(u32),
    Sum(Decimal),
    YesNo(bool),
    TileId(usize),
}

impl GroundTruth {
    /// Canonical display text, as used for option entries.
    pub fn display(&self) -> String {
        match self {
            GroundTruth::Count(m) => m.to_string(),
            GroundTruth::Sum(s) => s.to_string(),
            GroundTruth::YesNo(true) => "Yes".into(),
            GroundTruth::YesNo(false) => "No".into(),
            GroundTruth::TileId(t) => format!("tile {t}"),
        }
    }

    /// Numeric value for count and sum answers.
    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            GroundTruth::Count(m) => Some(Decimal::from_int(*m as i64)),
            GroundTruth::Sum(s) => Some(*s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<u32>,
    pub resolution: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_px: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<Segmentation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_mode: Option<SignMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_mode: Option<ColorMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleSample {
    pub id: String,
    pub task: TaskId,
    /// Paths relative to the dataset root, in prompt attachment order.
    pub image_refs: Vec<String>,
    pub question: String,
    pub options: Option<OptionArrangement>,
    pub ground_truth: GroundTruth,
    pub rule: PuzzleRule,
    pub difficulty: Difficulty,
    pub seed_index: u64,
}

pub fn sample_id(task: TaskId, seed_index: u64) -> String {
    format!("{task}-{seed_index:06}")
}

impl PuzzleSample {
    /// One manifest line: keys sorted alphabetically at every level.
    pub fn to_canonical_json(&self) -> Result<String> {
        // serde_json::Value maps are ordered by key, so a round trip through
        // Value canonicalizes field order.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }
}

pub fn sort_canonical(samples: &mut [PuzzleSample]) {
    samples.sort_by_key(|s| (s.task, s.seed_index));
}

pub fn write_manifest(path: &Path, samples: &[PuzzleSample]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in samples {
        let line = s.to_canonical_json()?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<PuzzleSample>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str(&line).map_err(|e| Error::MalformedEntry {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_zero_padded() {
        assert_eq!(sample_id(TaskId::GridSum, 42), "GridSum-000042");
    }

    #[test]
    fn ground_truth_serializes_with_kind_and_value() {
        let v = serde_json::to_string(&GroundTruth::Sum(Decimal::new(-1250, 2))).unwrap();
        assert_eq!(v, r#"{"kind":"Sum","value":"-12.50"}"#);
        let back: GroundTruth = serde_json::from_str(&v).unwrap();
        assert_eq!(back, GroundTruth::Sum(Decimal::new(-1250, 2)));
    }
}
