//! Line-delimited manifest and pair-list files.
//!
//! A manifest carries one row per image: subject, study, path, projection
//! and the 14 raw label states. Rows of one study must agree on the label
//! vector. Files open with a version header line so schema changes stay
//! detectable.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{LabelState, Projection, StudyRecord, ViewPair, LABEL_COUNT};

pub const MANIFEST_HEADER: &str = "#biview-manifest v1";
pub const PAIRS_HEADER: &str = "#biview-pairs v1";

/// One parsed manifest row (one image).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub subject_id: String,
    pub study_id: String,
    pub image_path: String,
    pub projection: Projection,
    pub raw_labels: Vec<LabelState>,
}

fn parse_row(line: &str, row: usize) -> Result<ManifestRow> {
    let cols: Vec<&str> = line.split('\t').collect();
    let expected = 4 + LABEL_COUNT;
    if cols.len() != expected {
        return Err(Error::schema(
            row,
            format!("expected {expected} tab-separated columns, got {}", cols.len()),
        ));
    }
    let projection: Projection = cols[3]
        .parse()
        .map_err(|e: String| Error::schema(row, e))?;
    let raw_labels = cols[4..]
        .iter()
        .map(|t| t.parse::<LabelState>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::schema(row, e))?;
    Ok(ManifestRow {
        subject_id: cols[0].to_string(),
        study_id: cols[1].to_string(),
        image_path: cols[2].to_string(),
        projection,
        raw_labels,
    })
}

/// Load and validate a manifest, grouping rows into study records in
/// first-appearance order. Row indices in errors are 1-based file lines.
pub fn load_manifest(path: &Path) -> Result<Vec<StudyRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::schema(1, "missing version header".to_string())),
    };
    if header.trim() != MANIFEST_HEADER {
        return Err(Error::schema(
            1,
            format!("unrecognized manifest version line {header:?}"),
        ));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_study: HashMap<String, StudyRecord> = HashMap::new();
    for (i, line) in lines.enumerate() {
        let row_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = parse_row(&line, row_no)?;
        let entry = by_study.entry(row.study_id.clone()).or_insert_with(|| {
            order.push(row.study_id.clone());
            StudyRecord {
                study_id: row.study_id.clone(),
                subject_id: row.subject_id.clone(),
                frontal_refs: vec![],
                lateral_refs: vec![],
                raw_labels: row.raw_labels.clone(),
            }
        });
        if entry.subject_id != row.subject_id {
            return Err(Error::schema(
                row_no,
                format!(
                    "study {} appears under subjects {} and {}",
                    row.study_id, entry.subject_id, row.subject_id
                ),
            ));
        }
        if entry.raw_labels != row.raw_labels {
            return Err(Error::schema(
                row_no,
                format!("study {} has inconsistent label vectors", row.study_id),
            ));
        }
        if entry.frontal_refs.contains(&row.image_path) || entry.lateral_refs.contains(&row.image_path)
        {
            return Err(Error::schema(
                row_no,
                format!("image {} listed twice in study {}", row.image_path, row.study_id),
            ));
        }
        if row.projection.is_frontal() {
            entry.frontal_refs.push(row.image_path);
        } else {
            entry.lateral_refs.push(row.image_path);
        }
    }
    Ok(order
        .into_iter()
        .map(|id| by_study.remove(&id).expect("study recorded in order"))
        .collect())
}

/// Write studies back out in manifest format (one row per image).
pub fn save_manifest(path: &Path, studies: &[StudyRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{MANIFEST_HEADER}")?;
    for s in studies {
        let labels: Vec<&str> = s.raw_labels.iter().map(|l| l.token()).collect();
        let labels = labels.join("\t");
        for (refs, proj) in [(&s.frontal_refs, "PA"), (&s.lateral_refs, "LL")] {
            for r in refs {
                writeln!(f, "{}\t{}\t{}\t{}\t{}", s.subject_id, s.study_id, r, proj, labels)?;
            }
        }
    }
    Ok(())
}

/// Write enumerated pairs with their collapsed labels.
pub fn save_pairs(path: &Path, pairs: &[ViewPair]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{PAIRS_HEADER}")?;
    for p in pairs {
        let labels: Vec<String> = p.labels.iter().map(|l| l.to_string()).collect();
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            p.subject_id,
            p.study_id,
            p.frontal_ref,
            p.lateral_ref,
            labels.join("\t")
        )?;
    }
    Ok(())
}

/// Read a pair list produced by [`save_pairs`].
pub fn load_pairs(path: &Path) -> Result<Vec<ViewPair>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::schema(1, "missing version header".to_string())),
    };
    if header.trim() != PAIRS_HEADER {
        return Err(Error::schema(
            1,
            format!("unrecognized pairs version line {header:?}"),
        ));
    }
    let mut pairs = Vec::new();
    for (i, line) in lines.enumerate() {
        let row_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let expected = 4 + LABEL_COUNT;
        if cols.len() != expected {
            return Err(Error::schema(
                row_no,
                format!("expected {expected} columns, got {}", cols.len()),
            ));
        }
        let labels = cols[4..]
            .iter()
            .map(|t| match *t {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::schema(row_no, format!("bad binary label {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        pairs.push(ViewPair {
            subject_id: cols[0].to_string(),
            study_id: cols[1].to_string(),
            frontal_ref: cols[2].to_string(),
            lateral_ref: cols[3].to_string(),
            labels,
        });
    }
    Ok(pairs)
}
