//! JSON artifacts: model checkpoints, fitted parameters, metrics, reports,
//! split manifests, and the per-command run manifest with content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use hvacopt_core::dataset::Scaler;
use hvacopt_core::rc::RcParams;
use hvacopt_core::rnn::RnnModel;
use hvacopt_core::schema::FeatureSchema;

use crate::error::{PipelineError, PipelineResult};

pub const CHECKPOINT_FORMAT: &str = "hvacopt-rnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing model container: architecture, training seed, the scaler
/// the model expects, the feature layout, and the flat parameter array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub head_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(
        model: &RnnModel,
        seed: u64,
        schema: &FeatureSchema,
        scaler: &Scaler,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: model.input_dim,
            hidden_dim: model.hidden_dim,
            head_widths: model.head_widths(),
            dropout_rate: model.dropout_rate,
            seed,
            feature_names: schema.prefixed_names(),
            scaler: scaler.clone(),
            params: model.to_flat(),
        }
    }

    pub fn to_model(&self) -> PipelineResult<RnnModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(PipelineError::data(format!(
                "not a model checkpoint (format `{}`)",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(PipelineError::data(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        RnnModel::from_flat(
            self.input_dim,
            self.hidden_dim,
            &self.head_widths,
            self.dropout_rate,
            &self.params,
        )
        .map_err(PipelineError::from)
    }

    pub fn schema(&self) -> PipelineResult<FeatureSchema> {
        let names: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        FeatureSchema::from_prefixed_names(&names).map_err(PipelineError::from)
    }
}

/// Split manifest: which window origins went to which side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub train_origins: Vec<usize>,
    pub test_origins: Vec<usize>,
}

/// RcParams JSON wrapper with a format tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RcParamsFile {
    pub format: String,
    pub params: RcParams,
}

pub const RC_FORMAT: &str = "hvacopt-rc-params";

impl RcParamsFile {
    pub fn new(params: RcParams) -> Self {
        RcParamsFile {
            format: RC_FORMAT.into(),
            params,
        }
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> PipelineResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::data(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> PipelineResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::data(format!("parse {}: {e}", path.display())))
}

/// FNV-1a 64-bit content hash, hex encoded. Not cryptographic; it flags
/// changed inputs between pipeline stages.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn hash_file(path: &Path) -> PipelineResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::data(format!("cannot hash {}: {e}", path.display())))?;
    Ok(fnv1a_hex(&bytes))
}

/// Per-command record of consumed and produced files with content hashes,
/// plus the seeds in play. Written as `<command>_manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        RunManifest {
            command: command.into(),
            config_hash,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.into(), value);
        self
    }

    pub fn input(&mut self, path: &Path) -> PipelineResult<&mut Self> {
        self.inputs
            .insert(rel_name(path), hash_file(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> PipelineResult<&mut Self> {
        self.outputs
            .insert(rel_name(path), hash_file(path)?);
        Ok(self)
    }

    pub fn write(&self, workspace: &Path) -> PipelineResult<PathBuf> {
        let path = workspace.join(format!("{}_manifest.json", self.command.replace('-', "_")));
        save_json(&path, self)?;
        Ok(path)
    }
}

fn rel_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_hash_is_stable_and_input_sensitive() {
        let a = fnv1a_hex(b"hello");
        assert_eq!(a, fnv1a_hex(b"hello"));
        assert_ne!(a, fnv1a_hex(b"hellp"));
        // Known FNV-1a vector.
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = RnnModel::init(3, 4, &[2], 0.1, 9).unwrap();
        let scaler = Scaler {
            shift: vec![0.0; 3],
            scale: vec![1.0; 3],
            power_shift: 0.0,
            power_scale: 1.0,
        };
        let schema = FeatureSchema::from_prefixed_names(&["uc:temp_0", "c:set_0", "phy:outdoor"])
            .unwrap();
        let ckpt = Checkpoint::from_model(&model, 9, &schema, &scaler);
        let text = serde_json::to_string(&ckpt).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_model().unwrap();
        assert_eq!(rebuilt, model);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let model = RnnModel::init(2, 2, &[], 0.0, 1).unwrap();
        let scaler = Scaler {
            shift: vec![0.0; 2],
            scale: vec![1.0; 2],
            power_shift: 0.0,
            power_scale: 1.0,
        };
        let schema = FeatureSchema::from_prefixed_names(&["c:set_0", "phy:outdoor"]).unwrap();
        let mut ckpt = Checkpoint::from_model(&model, 1, &schema, &scaler);
        ckpt.format = "something-else".into();
        assert!(ckpt.to_model().is_err());
    }
}
