//! Study-level metadata, pair enumeration, label collapsing, subject splits
//! and image preprocessing.
//!
//! The pipeline turns study records (one row per image in the manifest) into
//! leakage-free train/val/test collections of frontal-lateral pairs with
//! collapsed binary labels and standardized image tensors.

mod image;
mod manifest;
mod split;

pub use image::{
    load_grayscale, preprocess_image, ImageTensor, Interpolation, PreprocessConfig, RawGray,
};
pub use manifest::{load_manifest, save_manifest, load_pairs, save_pairs, ManifestRow};
pub use split::{split_subjects, Split, SplitAssignment};

use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of diagnostic labels carried by every study.
pub const LABEL_COUNT: usize = 14;

/// Projection family of a radiograph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    Pa,
    Ap,
    Ll,
    Lateral,
}

impl Projection {
    pub fn is_frontal(&self) -> bool {
        matches!(self, Projection::Pa | Projection::Ap)
    }
}

impl FromStr for Projection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "PA" => Ok(Projection::Pa),
            "AP" => Ok(Projection::Ap),
            "LL" => Ok(Projection::Ll),
            "Lateral" => Ok(Projection::Lateral),
            other => Err(format!("unknown projection token {other:?}")),
        }
    }
}

/// Raw per-label annotation state before collapsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelState {
    Positive,
    Negative,
    NotMentioned,
    Uncertain,
}

impl LabelState {
    pub fn token(&self) -> &'static str {
        match self {
            LabelState::Positive => "positive",
            LabelState::Negative => "negative",
            LabelState::NotMentioned => "not-mentioned",
            LabelState::Uncertain => "uncertain",
        }
    }
}

impl FromStr for LabelState {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "positive" => Ok(LabelState::Positive),
            "negative" => Ok(LabelState::Negative),
            "not-mentioned" => Ok(LabelState::NotMentioned),
            "uncertain" => Ok(LabelState::Uncertain),
            other => Err(format!("unknown label state token {other:?}")),
        }
    }
}

/// One imaging study: all projections sharing a report and one label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub study_id: String,
    pub subject_id: String,
    pub frontal_refs: Vec<String>,
    pub lateral_refs: Vec<String>,
    pub raw_labels: Vec<LabelState>,
}

/// One frontal-lateral combination from one study, with the study's
/// collapsed binary labels. There are no per-image labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPair {
    pub study_id: String,
    pub subject_id: String,
    pub frontal_ref: String,
    pub lateral_ref: String,
    pub labels: Vec<u8>,
}

/// Collapse raw label states to binary: positive -> 1, everything else -> 0.
pub fn collapse_labels(raw: &[LabelState]) -> Result<Vec<u8>> {
    if raw.len() != LABEL_COUNT {
        return Err(Error::Contract(format!(
            "expected {LABEL_COUNT} label states, got {}",
            raw.len()
        )));
    }
    Ok(raw
        .iter()
        .map(|s| u8::from(*s == LabelState::Positive))
        .collect())
}

/// Enumerate every frontal-lateral combination of every study, in input
/// order (study, then frontal index, then lateral index). Studies missing
/// either projection family contribute no pairs.
pub fn enumerate_pairs(studies: &[StudyRecord]) -> Result<Vec<ViewPair>> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut pairs = Vec::new();
    for study in studies {
        let labels = collapse_labels(&study.raw_labels)?;
        for f in &study.frontal_refs {
            for l in &study.lateral_refs {
                if !seen.insert((f.as_str(), l.as_str())) {
                    return Err(Error::MalformedMetadata(format!(
                        "duplicate pair ({f}, {l}) in study {}",
                        study.study_id
                    )));
                }
                pairs.push(ViewPair {
                    study_id: study.study_id.clone(),
                    subject_id: study.subject_id.clone(),
                    frontal_ref: f.clone(),
                    lateral_ref: l.clone(),
                    labels: labels.clone(),
                });
            }
        }
    }
    Ok(pairs)
}
