use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use ndarray_npy::{ReadNpyExt, WriteNpyExt};
use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;

use super::config::ModelConfig;
use super::network::Model;
use crate::features::FeatureStats;
use crate::labels::{LabelScheme, Vocabulary};
use crate::nn::ParamStore;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "kws-checkpoint-1";

/// Free-form provenance stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
    pub extra: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: ModelConfig,
    scheme: LabelScheme,
    vocab: Vec<String>,
    categories: Vec<String>,
    stats: FeatureStats,
    meta: CheckpointMeta,
    params: Vec<(String, [usize; 2])>,
}

/// Everything needed to run a trained model on new audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab: Vocabulary,
    /// Classification categories the model was trained for.
    pub categories: Vec<String>,
    pub stats: FeatureStats,
    pub meta: CheckpointMeta,
}

fn ck(e: impl std::fmt::Display) -> Error {
    Error::Checkpoint(e.to_string())
}

impl Checkpoint {
    /// Zip archive with `manifest.json` and one `.npy` per parameter.
    pub fn save(&self, path: &Path) -> Result<()> {
        let params = self.model.params();
        let manifest = Manifest {
            format: CHECKPOINT_FORMAT.into(),
            config: self.model.config().clone(),
            scheme: self.vocab.scheme(),
            vocab: self.vocab.tokens().to_vec(),
            categories: self.categories.clone(),
            stats: self.stats.clone(),
            meta: self.meta.clone(),
            params: params.iter().map(|(_, n, v)| (n.to_string(), [v.nrows(), v.ncols()])).collect(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut zip = zip::ZipWriter::new(file);
        let opts = SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
        zip.start_file("manifest.json", opts).map_err(ck)?;
        let json = serde_json::to_vec_pretty(&manifest).map_err(ck)?;
        zip.write_all(&json).map_err(|e| Error::io(path, e))?;
        for (_, name, value) in params.iter() {
            let mut buf = Vec::new();
            value.write_npy(&mut buf).map_err(ck)?;
            zip.start_file(format!("params/{name}.npy"), opts).map_err(ck)?;
            zip.write_all(&buf).map_err(|e| Error::io(path, e))?;
        }
        zip.finish().map_err(ck)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut zip = zip::ZipArchive::new(file).map_err(ck)?;
        let manifest: Manifest = {
            let mut entry = zip.by_name("manifest.json").map_err(ck)?;
            let mut text = String::new();
            entry.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(ck)?
        };
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {:?}", manifest.format)));
        }
        let mut params = ParamStore::new();
        for (name, shape) in &manifest.params {
            let mut entry = zip.by_name(&format!("params/{name}.npy")).map_err(ck)?;
            let mut buf = Vec::new();
            entry.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
            let value = Array2::<f64>::read_npy(&buf[..]).map_err(ck)?;
            if value.dim() != (shape[0], shape[1]) {
                return Err(Error::Checkpoint(format!("parameter {name} has an unexpected shape")));
            }
            params.add(name, value);
        }
        let model = Model::from_params(manifest.config, params)?;
        let vocab = Vocabulary::from_tokens(manifest.scheme, &manifest.vocab)?;
        if vocab.len() != model.config().vocab_size {
            return Err(Error::Checkpoint("vocabulary size does not match the model".into()));
        }
        Ok(Self {
            model,
            vocab,
            categories: manifest.categories,
            stats: manifest.stats,
            meta: manifest.meta,
        })
    }
}
