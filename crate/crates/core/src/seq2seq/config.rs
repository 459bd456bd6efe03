use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown config key {key:?} on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("invalid value {value:?} for {key} on line {line}: {reason}")]
    BadValue {
        key: String,
        value: String,
        line: usize,
        reason: String,
    },
    #[error("line {line}: expected key=value")]
    BadLine { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Additive (Bahdanau) scoring with input feeding.
    Standard,
    None,
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionKind::Standard => "standard",
            AttentionKind::None => "none",
        })
    }
}

impl FromStr for AttentionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" | "bahdanau" => Ok(AttentionKind::Standard),
            "none" => Ok(AttentionKind::None),
            _ => Err(format!("expected standard or none, got {s:?}")),
        }
    }
}

/// Network shape and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_units: usize,
    /// Stack depth of both encoder and decoder.
    pub num_layers: usize,
    pub attention: AttentionKind,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    /// Dropout keep probability on LSTM inputs during training.
    pub keep_prob: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub steps_per_epoch: usize,
    /// The learning rate halves at every epoch after this one.
    pub decay_after_epoch: usize,
    pub max_decode_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_units: 128,
            num_layers: 4,
            attention: AttentionKind::Standard,
            src_vocab_size: 0,
            tgt_vocab_size: 0,
            keep_prob: 0.8,
            learning_rate: 1.0,
            clip_norm: 5.0,
            max_epochs: 10,
            steps_per_epoch: 1000,
            decay_after_epoch: 5,
            max_decode_len: 50,
            seed: 1,
        }
    }
}

/// Keys accepted by [`ModelConfig::apply`], in file order.
pub const CONFIG_KEYS: [&str; 13] = [
    "num_units",
    "num_layers",
    "attention",
    "src_vocab_size",
    "tgt_vocab_size",
    "keep_prob",
    "learning_rate",
    "clip_norm",
    "max_epochs",
    "steps_per_epoch",
    "decay_after_epoch",
    "max_decode_len",
    "seed",
];

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.num_units == 0 {
            return fail("num_units must be positive");
        }
        if !(1..=4).contains(&self.num_layers) {
            return fail("num_layers must be in 1..=4");
        }
        if self.src_vocab_size < 5 || self.tgt_vocab_size < 5 {
            return fail("vocabulary sizes must be at least 5 (4 reserved + 1 content token)");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return fail("keep_prob must be in (0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and nonnegative");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return fail("clip_norm must be positive");
        }
        if self.max_epochs == 0 || self.steps_per_epoch == 0 {
            return fail("max_epochs and steps_per_epoch must be positive");
        }
        if self.max_decode_len == 0 {
            return fail("max_decode_len must be positive");
        }
        Ok(())
    }

    /// Learning rate in effect during 1-based `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let halvings = epoch.saturating_sub(self.decay_after_epoch);
        self.learning_rate * 0.5f64.powi(halvings as i32)
    }

    /// Set one key from its text form. `line` is used in diagnostics only.
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                line,
                reason: e.to_string(),
            })
        }
        match key {
            "num_units" => self.num_units = parse(key, value, line)?,
            "num_layers" => self.num_layers = parse(key, value, line)?,
            "attention" => self.attention = parse(key, value, line)?,
            "src_vocab_size" => self.src_vocab_size = parse(key, value, line)?,
            "tgt_vocab_size" => self.tgt_vocab_size = parse(key, value, line)?,
            "keep_prob" => self.keep_prob = parse(key, value, line)?,
            "learning_rate" => self.learning_rate = parse(key, value, line)?,
            "clip_norm" => self.clip_norm = parse(key, value, line)?,
            "max_epochs" => self.max_epochs = parse(key, value, line)?,
            "steps_per_epoch" => self.steps_per_epoch = parse(key, value, line)?,
            "decay_after_epoch" => self.decay_after_epoch = parse(key, value, line)?,
            "max_decode_len" => self.max_decode_len = parse(key, value, line)?,
            "seed" => self.seed = parse(key, value, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Apply a flat `key=value` text. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine { line: i + 1 })?;
            self.apply(k.trim(), v.trim(), i + 1)?;
        }
        Ok(())
    }

    pub fn to_kv_text(&self) -> String {
        let values: [String; 13] = [
            self.num_units.to_string(),
            self.num_layers.to_string(),
            self.attention.to_string(),
            self.src_vocab_size.to_string(),
            self.tgt_vocab_size.to_string(),
            self.keep_prob.to_string(),
            self.learning_rate.to_string(),
            self.clip_norm.to_string(),
            self.max_epochs.to_string(),
            self.steps_per_epoch.to_string(),
            self.decay_after_epoch.to_string(),
            self.max_decode_len.to_string(),
            self.seed.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
