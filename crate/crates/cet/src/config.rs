//! `key = value` training configuration files.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use cet_core::train::LossChoice;
use cet_core::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error(transparent)]
    Model(#[from] cet_core::Error),
}

/// Ordered key/value entries as read from disk. Later duplicates win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Applies every entry on top of `config`.
    pub fn apply(&self, config: &mut TrainConfig) -> Result<(), ConfigError> {
        for (k, v) in &self.entries {
            set(config, k, v)?;
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: value.to_string() })
}

pub fn parse_loss(value: &str) -> Option<LossChoice> {
    match value.to_ascii_lowercase().as_str() {
        "bce" => Some(LossChoice::Bce),
        "fna" => Some(LossChoice::Fna),
        _ => None,
    }
}

pub fn loss_name(loss: LossChoice) -> &'static str {
    match loss {
        LossChoice::Bce => "bce",
        LossChoice::Fna => "fna",
    }
}

/// Sets one field by its key name.
pub fn set(config: &mut TrainConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "dim" => config.dim = parse(key, value)?,
        "alpha" => config.alpha = parse(key, value)?,
        "beta" => config.beta = parse(key, value)?,
        "lr" => config.lr = parse(key, value)?,
        "batch_size" => config.batch_size = parse(key, value)?,
        "sample_size" => config.sample_size = parse(key, value)?,
        "max_epochs" => config.max_epochs = parse(key, value)?,
        "eval_every" => config.eval_every = parse(key, value)?,
        "loss" => {
            config.loss = parse_loss(value)
                .ok_or_else(|| ConfigError::BadValue { key: key.to_string(), value: value.to_string() })?
        }
        "use_agg2t" => config.use_agg2t = parse(key, value)?,
        "use_tan" => config.use_tan = parse(key, value)?,
        "mask_mode" => config.mask_mode = parse(key, value)?,
        "use_activation" => config.use_activation = parse(key, value)?,
        "separate_heads" => config.separate_heads = parse(key, value)?,
        "seed" => config.seed = parse(key, value)?,
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

/// Every field, in declaration order.
pub fn to_entries(config: &TrainConfig) -> Vec<(String, String)> {
    let pairs: [(&str, String); 15] = [
        ("dim", config.dim.to_string()),
        ("alpha", config.alpha.to_string()),
        ("beta", config.beta.to_string()),
        ("lr", config.lr.to_string()),
        ("batch_size", config.batch_size.to_string()),
        ("sample_size", config.sample_size.to_string()),
        ("max_epochs", config.max_epochs.to_string()),
        ("eval_every", config.eval_every.to_string()),
        ("loss", loss_name(config.loss).to_string()),
        ("use_agg2t", config.use_agg2t.to_string()),
        ("use_tan", config.use_tan.to_string()),
        ("mask_mode", config.mask_mode.to_string()),
        ("use_activation", config.use_activation.to_string()),
        ("separate_heads", config.separate_heads.to_string()),
        ("seed", config.seed.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn from_entries(entries: &[(String, String)]) -> Result<TrainConfig, ConfigError> {
    let mut config = TrainConfig::default();
    ConfigFile { entries: entries.to_vec() }.apply(&mut config)?;
    Ok(config)
}

pub fn render(config: &TrainConfig) -> String {
    to_entries(config).iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
