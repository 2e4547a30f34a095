use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Split, TaskDataset};
use crate::{Error, Result};

/// Column order of the tab-separated manifest.
pub const MANIFEST_COLUMNS: [&str; 6] = ["path", "word", "speaker", "split", "category", "subset"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub word: String,
    pub speaker: String,
    pub split: String,
    pub category: String,
    pub subset: String,
}

pub fn manifest_rows(ds: &TaskDataset) -> Vec<ManifestRow> {
    Split::ALL
        .iter()
        .flat_map(|&s| {
            ds.split(s).iter().map(move |e| ManifestRow {
                path: e.source.key(&ds.background),
                word: e.word.clone(),
                speaker: e.speaker_id.clone().unwrap_or_else(|| "-".into()),
                split: s.as_str().into(),
                category: e.category.clone(),
                subset: e.subset.as_str().into(),
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, ds: &TaskDataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(Error::from)?;
    for row in manifest_rows(ds) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
