//! Model and strategy-state files. Parameters are stored as base64 of
//! little-endian f64 so reloads are bit-exact.

use std::fs;
use std::path::Path;

use authcil_core::features::{HASH_NAME, HASH_SEED};
use authcil_core::{
    ExemplarStore, Featurizer, FeaturizerConfig, ImportanceMap, ModelState, ParamSnapshot,
    StrategyConfig, StrategyState,
};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;
pub const STATE_VERSION: u32 = 1;

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Data(format!("bad parameter blob: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Data(format!(
            "parameter blob of {} bytes is not a whole number of f64",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Identifies the featurizer a model was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerHeader {
    pub hash: String,
    pub hash_seed: u64,
    pub config: FeaturizerConfig,
    pub vocabulary: Vec<String>,
}

impl FeaturizerHeader {
    pub fn new(f: &Featurizer) -> Self {
        Self {
            hash: HASH_NAME.to_string(),
            hash_seed: HASH_SEED,
            config: f.config.clone(),
            vocabulary: f.vocabulary.clone(),
        }
    }

    /// Rejects headers written by a different hash function or seed.
    pub fn featurizer(&self) -> Result<Featurizer> {
        if self.hash != HASH_NAME || self.hash_seed != HASH_SEED {
            return Err(Error::FeaturizerMismatch(format!(
                "model hashed with {} seed {:#x}, this build uses {HASH_NAME} seed {HASH_SEED:#x}",
                self.hash, self.hash_seed
            )));
        }
        let mut f = Featurizer::new(self.config.clone())?;
        f.vocabulary = self.vocabulary.clone();
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBlob {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub head_classes: Vec<usize>,
    pub class_offsets: Vec<usize>,
    pub fingerprint: String,
    pub params: String,
}

impl ModelBlob {
    pub fn new(m: &ModelState) -> Self {
        Self {
            feature_dim: m.feature_dim(),
            hidden_dim: m.hidden_dim(),
            head_classes: m.head_classes(),
            class_offsets: m.class_offsets(),
            fingerprint: format!("{:016x}", m.fingerprint()),
            params: encode_f64s(m.params()),
        }
    }

    pub fn model(&self) -> Result<ModelState> {
        let m = ModelState::from_parts(
            self.feature_dim,
            self.hidden_dim,
            &self.head_classes,
            decode_f64s(&self.params)?,
        )?;
        if m.class_offsets() != self.class_offsets {
            return Err(Error::Data("class offsets disagree with head sizes".into()));
        }
        let fp = format!("{:016x}", m.fingerprint());
        if fp != self.fingerprint {
            return Err(Error::Checksum {
                expected: self.fingerprint.clone(),
                found: fp,
            });
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub config_hash: String,
    /// Last session trained.
    pub session: usize,
    pub featurizer: FeaturizerHeader,
    /// Author of each global class, indexed by iid.
    pub authors: Vec<String>,
    pub model: ModelBlob,
}

/// A model file after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: ModelState,
    pub featurizer: Featurizer,
    pub authors: Vec<String>,
    pub session: usize,
    pub config_hash: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn save_model(
    path: &Path,
    model: &ModelState,
    featurizer: &Featurizer,
    authors: &[String],
    session: usize,
    config_hash: &str,
) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        config_hash: config_hash.to_string(),
        session,
        featurizer: FeaturizerHeader::new(featurizer),
        authors: authors[..model.num_classes().min(authors.len())].to_vec(),
        model: ModelBlob::new(model),
    };
    write_json(path, &file)
}

/// Loads a model; with `expected` set, refuses a different featurizer.
pub fn load_model(path: &Path, expected: Option<&Featurizer>) -> Result<LoadedModel> {
    let file: ModelFile = read_json(path)?;
    if file.version != MODEL_VERSION {
        return Err(Error::Version {
            what: "model",
            found: file.version,
            expected: MODEL_VERSION,
        });
    }
    let featurizer = file.featurizer.featurizer()?;
    if let Some(want) = expected {
        if want != &featurizer {
            return Err(Error::FeaturizerMismatch(
                "featurizer config or vocabulary differs from the model header".into(),
            ));
        }
    }
    let model = file.model.model()?;
    if model.feature_dim() != featurizer.output_dim() {
        return Err(Error::FeaturizerMismatch(format!(
            "model expects {} features, featurizer yields {}",
            model.feature_dim(),
            featurizer.output_dim()
        )));
    }
    Ok(LoadedModel {
        model,
        featurizer,
        authors: file.authors,
        session: file.session,
        config_hash: file.config_hash,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotBlob {
    pub session: usize,
    pub model: ModelBlob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceBlob {
    pub session: usize,
    pub samples: usize,
    pub values: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub version: u32,
    pub config_hash: String,
    pub strategy: StrategyConfig,
    pub sessions_trained: usize,
    pub previous: Option<SnapshotBlob>,
    pub importance: Option<ImportanceBlob>,
    pub exemplars: ExemplarStore,
}

pub fn save_state(
    path: &Path,
    state: &StrategyState,
    strategy: &StrategyConfig,
    config_hash: &str,
) -> Result<()> {
    let file = StateFile {
        version: STATE_VERSION,
        config_hash: config_hash.to_string(),
        strategy: strategy.clone(),
        sessions_trained: state.sessions_trained,
        previous: state.previous.as_ref().map(|s| SnapshotBlob {
            session: s.session(),
            model: ModelBlob::new(s.model()),
        }),
        importance: state.importance.as_ref().map(|o| ImportanceBlob {
            session: o.session,
            samples: o.samples,
            values: encode_f64s(&o.values),
        }),
        exemplars: state.exemplars.clone(),
    };
    write_json(path, &file)
}

pub fn load_state(path: &Path) -> Result<(StrategyState, StateFile)> {
    let file: StateFile = read_json(path)?;
    if file.version != STATE_VERSION {
        return Err(Error::Version {
            what: "strategy state",
            found: file.version,
            expected: STATE_VERSION,
        });
    }
    let previous = match &file.previous {
        Some(s) => Some(ParamSnapshot::new(s.session, s.model.model()?)),
        None => None,
    };
    let importance = match &file.importance {
        Some(o) => Some(ImportanceMap {
            values: decode_f64s(&o.values)?,
            session: o.session,
            samples: o.samples,
        }),
        None => None,
    };
    let state = StrategyState {
        sessions_trained: file.sessions_trained,
        previous,
        importance,
        exemplars: file.exemplars.clone(),
    };
    Ok((state, file))
}
