//! Checkpoints: `manifest.json` (config plus name, shape and offset per
//! tensor) and `params.bin` (little-endian f32 values in manifest order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::model::Model;
use crate::params::{Layout, ParamStore};
use crate::tensor::Tensor;
use crate::NeuralError;

pub const MANIFEST: &str = "manifest.json";
pub const BLOB: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub shape: [usize; 2],
    /// Offset in values, not bytes.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub params: Vec<Entry>,
    pub total: usize,
}

pub fn save_checkpoint(model: &Model<f32>, dir: &Path) -> Result<(), NeuralError> {
    fs::create_dir_all(dir)?;
    let mut params = Vec::with_capacity(model.params.len());
    let mut blob = Vec::with_capacity(model.params.count() * 4);
    let mut offset = 0;
    for (name, t) in model.params.names.iter().zip(&model.params.tensors) {
        params.push(Entry {
            name: name.clone(),
            shape: [t.rows, t.cols],
            offset,
        });
        offset += t.data.len();
        for x in &t.data {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest = Manifest {
        config: model.cfg.clone(),
        params,
        total: offset,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(dir.join(BLOB), blob)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Model<f32>, NeuralError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let blob = fs::read(dir.join(BLOB))?;
    let corrupt = |m: String| Err(NeuralError::Corrupt(m));
    manifest.config.validate()?;
    if blob.len() != manifest.total * 4 {
        return corrupt(format!("blob holds {} bytes, manifest needs {}", blob.len(), manifest.total * 4));
    }
    let (layout, shapes) = Layout::build(&manifest.config);
    if shapes.len() != manifest.params.len() {
        return corrupt(format!("{} tensors listed, config needs {}", manifest.params.len(), shapes.len()));
    }
    let mut store = ParamStore {
        names: Vec::with_capacity(shapes.len()),
        tensors: Vec::with_capacity(shapes.len()),
    };
    for ((name, r, c, _), e) in shapes.iter().zip(&manifest.params) {
        if *name != e.name || [*r, *c] != e.shape {
            return corrupt(format!("entry `{}` {:?} does not match `{name}` [{r}, {c}]", e.name, e.shape));
        }
        let end = e.offset + r * c;
        if end > manifest.total {
            return corrupt(format!("entry `{name}` runs past the blob"));
        }
        let data = blob[e.offset * 4..end * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        store.names.push(name.clone());
        store.tensors.push(Tensor::from_vec(*r, *c, data));
    }
    if !store.all_finite() {
        return corrupt("non-finite parameter values".into());
    }
    Ok(Model {
        cfg: manifest.config,
        layout,
        params: store,
    })
}

/// Load and require a specific configuration.
pub fn load_checkpoint_for(dir: &Path, expected: &ModelConfig) -> Result<Model<f32>, NeuralError> {
    let m = load_checkpoint(dir)?;
    if m.cfg != *expected {
        return Err(NeuralError::Config("checkpoint was saved with a different configuration".into()));
    }
    Ok(m)
}
