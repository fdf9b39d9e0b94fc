//! Subject-level train/val/test partitioning.
//!
//! Splitting happens at the subject level so that all studies and pairs of
//! one patient land in one split. Counts follow largest-remainder rounding
//! of the requested ratios.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// A full partition of subjects into the three splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
    pub seed: u64,
    pub ratios: (f64, f64, f64),
}

impl SplitAssignment {
    pub fn split_of(&self, subject_id: &str) -> Option<Split> {
        self.assignment.get(subject_id).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }

    /// Export as a two-column text file (subject_id, split).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for (subject, split) in &self.assignment {
            writeln!(f, "{subject}\t{}", split.name())?;
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items into the three ratios.
/// Ties in the fractional parts are broken by split order (train, val, test).
pub fn largest_remainder_counts(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let r = [ratios.0, ratios.1, ratios.2];
    let exact: Vec<f64> = r.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    // sort by descending fractional part, stable in split order
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap()
    });
    for i in 0..(n - assigned) {
        counts[order[i % 3]] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Deterministically partition subjects. The input is canonicalized by
/// sorting before the seeded shuffle, so the result does not depend on the
/// caller's iteration order.
pub fn split_subjects<I, S>(subject_ids: I, ratios: (f64, f64, f64), seed: u64) -> Result<SplitAssignment>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    if ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(Error::Config("split ratios must be non-negative".into()));
    }
    let mut ids: Vec<String> = subject_ids.into_iter().map(Into::into).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 subjects to split, got {}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let counts = largest_remainder_counts(ids.len(), ratios);
    let mut assignment = BTreeMap::new();
    let mut at = 0usize;
    for (split, &count) in Split::ALL.iter().zip(counts.iter()) {
        for id in &ids[at..at + count] {
            assignment.insert(id.clone(), *split);
        }
        at += count;
    }
    Ok(SplitAssignment {
        assignment,
        seed,
        ratios,
    })
}
