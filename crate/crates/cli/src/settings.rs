//! Flag values from an optional TOML file. Command-line flags win; keys
//! may be spelled with dashes or underscores.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use walkplan_core::{Error, Result};

#[derive(Default)]
pub struct Settings {
    table: toml::Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { table })
    }

    fn lookup(&self, key: &str) -> Option<&toml::Value> {
        self.table
            .get(key)
            .or_else(|| self.table.get(&key.replace('-', "_")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.lookup(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key {key}: {e}"))),
        }
    }

    /// The flag value if given, else the config value.
    pub fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.opt(flag, key)?
            .ok_or_else(|| Error::Config(format!("--{key} is required (flag or config key)")))
    }

    /// Stochastic commands refuse to run without an explicit seed.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        self.opt(flag, "seed")?.ok_or_else(|| {
            Error::Config("--seed is required for this command (flag or config key)".into())
        })
    }

    /// A table section deserialized into a config struct.
    pub fn section<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
    }
}
