//! Dataset ingestion, bundle export, splits and manifest checks.

mod bundle;
pub mod fixtures;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::anatomy::{validate_landmark_set, AnatomySchema, LandmarkSet};
use crate::error::{CephError, Result};
use crate::rng::{slot_rng, DOMAIN_SPLIT};

pub use bundle::{build_bundles, read_manifest, verify_manifest, BundleConfig, BundleRecord};
pub use fixtures::{render_stub_xray, synthetic_pool, template_set, GrayImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub sets: Vec<LandmarkSet>,
    pub rejected: Vec<Rejected>,
}

/// Sorted `*.json` files directly under `dir`.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CephError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CephError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every annotation file in `dir` (sorted by name). Files that fail
/// to parse or validate are listed in `rejected` and skipped. Sets without
/// an `id` take their file stem.
pub fn ingest(dir: &Path, schema: &AnatomySchema) -> Result<Ingested> {
    let mut sets = Vec::new();
    let mut rejected = Vec::new();
    for path in json_files(dir)? {
        let mut set = match LandmarkSet::load(&path) {
            Ok(s) => s,
            Err(e) => {
                rejected.push(Rejected { path, reason: e.to_string() });
                continue;
            }
        };
        let report = validate_landmark_set(&set, schema);
        if !report.is_valid() {
            rejected.push(Rejected { path, reason: report.to_string() });
            continue;
        }
        if set.id.is_none() {
            set.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        sets.push(set);
    }
    if sets.is_empty() {
        let reasons: Vec<String> = rejected
            .iter()
            .map(|r| format!("{}: {}", r.path.display(), r.reason))
            .collect();
        return Err(CephError::Validation(format!(
            "no valid annotation files in {} ({} rejected){}{}",
            dir.display(),
            rejected.len(),
            if reasons.is_empty() { "" } else { "; " },
            reasons.join("; ")
        )));
    }
    Ok(Ingested { sets, rejected })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded shuffle of `ids` cut into `(train, val, test)` parts, each sorted.
pub fn split_dataset(ids: &[String], sizes: (usize, usize, usize), seed: u64) -> Result<DatasetSplit> {
    let (a, b, c) = sizes;
    if a + b + c != ids.len() {
        return Err(CephError::Config(format!(
            "split sizes {a}+{b}+{c} do not sum to {} records",
            ids.len()
        )));
    }
    let mut unique = ids.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != ids.len() {
        return Err(CephError::Validation("duplicate record ids".into()));
    }
    let mut shuffled = unique;
    shuffled.shuffle(&mut slot_rng(seed, DOMAIN_SPLIT, 0));
    let part = |range: std::ops::Range<usize>| {
        let mut v = shuffled[range].to_vec();
        v.sort();
        v
    };
    Ok(DatasetSplit {
        train: part(0..a),
        val: part(a..a + b),
        test: part(a + b..a + b + c),
    })
}
