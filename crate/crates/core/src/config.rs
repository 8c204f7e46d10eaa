//! Run configuration: a strict JSON schema plus dotted-path overrides.

pub mod presets;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algorithms::{IqlConfig, LbSacConfig, NetworkConfig, RebracConfig};
use crate::categorical::ExpandKind;
use crate::envs::EnvKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rebrac,
    Iql,
    Lbsac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rebrac => "rebrac",
            Algorithm::Iql => "iql",
            Algorithm::Lbsac => "lbsac",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Mse,
    Ce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassificationConfig {
    /// Number of bins.
    pub m: usize,
    pub sigma_zeta_ratio: f64,
    pub v_expand: f64,
    pub expand_strategy: ExpandKind,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            m: 101,
            sigma_zeta_ratio: 0.75,
            v_expand: 0.0,
            expand_strategy: ExpandKind::Both,
        }
    }
}

impl ClassificationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("classification.m must be >= 2, got {}", self.m)));
        }
        if !(self.sigma_zeta_ratio > 0.0 && self.sigma_zeta_ratio.is_finite()) {
            return Err(Error::Config("classification.sigma_zeta_ratio must be > 0".into()));
        }
        if !self.v_expand.is_finite() {
            return Err(Error::Config("classification.v_expand must be finite".into()));
        }
        Ok(())
    }
}

fn default_eval_every() -> u64 {
    5000
}

fn default_eval_episodes() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub head: HeadKind,
    /// Required by the `ce` head, ignored by `mse`.
    #[serde(default)]
    pub classification: Option<ClassificationConfig>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub rebrac: RebracConfig,
    #[serde(default)]
    pub iql: IqlConfig,
    #[serde(default)]
    pub lbsac: LbSacConfig,
    /// Environment used for evaluation rollouts.
    pub env: EnvKind,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub n_steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Free-text label; not part of the hyperparameter identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, head: HeadKind, env: EnvKind, n_steps: u64) -> Self {
        Self {
            algorithm,
            head,
            classification: (head == HeadKind::Ce).then(ClassificationConfig::default),
            network: NetworkConfig::default(),
            rebrac: RebracConfig::default(),
            iql: IqlConfig::default(),
            lbsac: LbSacConfig::default(),
            env,
            dataset: None,
            seed: 0,
            n_steps,
            eval_every: default_eval_every(),
            eval_episodes: default_eval_episodes(),
            out_dir: None,
            note: None,
        }
    }

    /// Checks every block; returns warnings for settings that are ignored.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.network.validate()?;
        match self.algorithm {
            Algorithm::Rebrac => self.rebrac.validate()?,
            Algorithm::Iql => self.iql.validate()?,
            Algorithm::Lbsac => self.lbsac.validate()?,
        }
        match (self.head, &self.classification) {
            (HeadKind::Ce, None) => {
                return Err(Error::Config("head \"ce\" requires a classification block".into()))
            }
            (HeadKind::Ce, Some(c)) => c.validate()?,
            (HeadKind::Mse, Some(_)) => {
                warnings.push("classification block is ignored by the mse head".into())
            }
            (HeadKind::Mse, None) => {}
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        Ok(warnings)
    }

    pub fn gamma(&self) -> f64 {
        match self.algorithm {
            Algorithm::Rebrac => self.rebrac.gamma,
            Algorithm::Iql => self.iql.gamma,
            Algorithm::Lbsac => self.lbsac.gamma,
        }
    }

    pub fn batch_size(&self) -> usize {
        match self.algorithm {
            Algorithm::Rebrac => self.rebrac.batch_size,
            Algorithm::Iql => self.iql.batch_size,
            Algorithm::Lbsac => self.lbsac.batch_size,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies `path = value` overrides; values parse as JSON, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[(S, S)]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for (path, raw) in overrides {
            let value = serde_json::from_str(raw.as_ref())
                .unwrap_or_else(|_| Value::String(raw.as_ref().to_string()));
            set_path(&mut doc, path.as_ref(), value)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }

    /// Stable identity of the hyperparameters: everything except the seed,
    /// dataset location, output directory and note.
    pub fn hyperparameters(&self) -> Result<Value> {
        let mut doc = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut doc {
            map.remove("seed");
            map.remove("out_dir");
            map.remove("dataset");
            map.remove("note");
        }
        Ok(doc)
    }
}

/// Sets a dotted path inside a JSON document, creating objects for
/// missing or null intermediate keys.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Config("empty override path".into()));
    }
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {path:?}: {key:?} is not inside an object")))?;
        if parts.peek().is_none() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last segment")
}
