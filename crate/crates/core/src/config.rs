//! JSON run configuration with `key=value` overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{ApeParams, ChainTopology, RgsParams, TrappedIonParams};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub topology: ChainTopology,
    pub trapped_ion: TrappedIonParams,
    pub ape: ApeParams,
    pub rgs: RgsParams,
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Config = serde_path_to_error::deserialize(v).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.trapped_ion.validate()?;
        self.ape.validate()?;
        self.rgs.validate()
    }

    /// Applies `section.key=value` overrides. Values parse as JSON, falling
    /// back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut v = serde_json::to_value(self)?;
        for o in overrides {
            apply_override(&mut v, o.as_ref())?;
        }
        Self::from_value(v)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn manifest_sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Config {
        path: spec.to_string(),
        message: "expected key=value".into(),
    })?;
    let key = key.trim();
    let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    let mut parts = key.split('.').peekable();
    let mut cur = root;
    while let Some(part) = parts.next() {
        let obj = cur.as_object_mut().ok_or_else(|| Error::Config {
            path: key.to_string(),
            message: format!("`{part}` is not inside an object"),
        })?;
        if parts.peek().is_none() {
            // Topology stores both attenuation forms; setting one drops the other.
            if part == "attenuation_length_km" {
                obj.remove("attenuation_db_per_km");
            } else if part == "attenuation_db_per_km" {
                obj.remove("attenuation_length_km");
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.get_mut(part).ok_or_else(|| Error::Config {
            path: key.to_string(),
            message: format!("unknown section `{part}`"),
        })?;
    }
    Err(Error::Config {
        path: key.to_string(),
        message: "empty key".into(),
    })
}
