//! Versioned JSON checkpoints of named parameter tensors.
//!
//! Floats are written in shortest round-trip form, so save -> load -> save
//! reproduces the same bytes and the same bit patterns.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::ecc::{EccConfig, EccNet};
use crate::encdec::{EncDec, EncDecConfig};
use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::train::Model;

pub const CHECKPOINT_FORMAT: &str = "walkplan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Model family, e.g. `encdec` or `ecc`.
    pub kind: String,
    pub config: serde_json::Value,
    pub params: Vec<NamedArray>,
    #[serde(default)]
    pub buffers: Vec<NamedArray>,
}

fn named(
    it: impl Iterator<Item = (impl AsRef<str>, impl std::ops::Deref<Target = Array>)>,
) -> Vec<NamedArray> {
    it.map(|(name, a)| NamedArray {
        name: name.as_ref().to_string(),
        shape: a.shape().to_vec(),
        data: a.data().to_vec(),
    })
    .collect()
}

impl Checkpoint {
    pub fn new(kind: &str, config: &impl Serialize, store: &ParamStore) -> Result<Self> {
        Ok(Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind: kind.to_string(),
            config: serde_json::to_value(config)?,
            params: named(store.params()),
            buffers: named(store.buffers()),
        })
    }

    pub fn store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for p in &self.params {
            store.insert(p.name.clone(), Array::from_vec(&p.shape, p.data.clone())?);
        }
        for b in &self.buffers {
            store.insert_buffer(b.name.clone(), Array::from_vec(&b.shape, b.data.clone())?);
        }
        Ok(store)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!(
                "unknown format `{}`",
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(NnError::Checkpoint(format!(
                "expected a `{kind}` checkpoint, found `{}`",
                self.kind
            )))
        }
    }
}

impl EncDec {
    pub const KIND: &'static str = "encdec";

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Checkpoint::new(Self::KIND, self.config(), self.params())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(Self::KIND)?;
        let config: EncDecConfig = serde_json::from_value(ckpt.config.clone())?;
        Self::from_params(config, ckpt.store()?)
    }
}

impl EccNet {
    pub const KIND: &'static str = "ecc";

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Checkpoint::new(Self::KIND, self.config(), self.params())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(Self::KIND)?;
        let config: EccConfig = serde_json::from_value(ckpt.config.clone())?;
        Self::from_params(config, ckpt.store()?)
    }
}
