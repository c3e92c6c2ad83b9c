//! Engine configuration and its line-oriented `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::textual::NegativeInit;
use crate::threshold::MarginForm;

/// Which halves of the co-evolution step are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Ablation {
    /// Textual negatives and visual exemplars both evolve.
    #[default]
    Full,
    /// Negatives are mined and mirrored into the visual cache; no exemplars are cached.
    TextualOnly,
    /// Exemplars are cached; the negative queues stay fixed.
    VisualOnly,
    /// Nothing evolves.
    Static,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::TextualOnly,
        Ablation::VisualOnly,
        Ablation::Static,
    ];

    pub fn evolves_text(self) -> bool {
        matches!(self, Ablation::Full | Ablation::TextualOnly)
    }

    pub fn evolves_visual(self) -> bool {
        matches!(self, Ablation::Full | Ablation::VisualOnly)
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Ablation::Full),
            "textual-only" => Ok(Ablation::TextualOnly),
            "visual-only" => Ok(Ablation::VisualOnly),
            "static" => Ok(Ablation::Static),
            other => Err(format!(
                "unknown ablation `{other}` (full | textual-only | visual-only | static)"
            )),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Full => "full",
            Ablation::TextualOnly => "textual-only",
            Ablation::VisualOnly => "visual-only",
            Ablation::Static => "static",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Softmax temperature of both ratio scores.
    pub tau: f64,
    /// Weight of the textual score before evolution (and of the visual score after).
    pub lambda: f64,
    /// Attention sharpness inside a visual queue.
    pub beta: f64,
    /// Slots per visual queue.
    pub queue_len: usize,
    /// Negatives mined per confident sample.
    pub top_n: usize,
    /// Confidence margin around the adaptive threshold.
    pub gamma: f64,
    /// Sliding-window length for the threshold.
    pub window: usize,
    /// Histogram bins for the threshold.
    pub bins: usize,
    pub ablation: Ablation,
    pub margin_form: MarginForm,
    /// Size of the initial negative text queue.
    pub negatives: usize,
    pub neg_init: NegativeInit,
    /// Cap on the negative text queue length; `None` means unbounded.
    pub max_negatives: Option<usize>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tau: 0.01,
            lambda: 0.8,
            beta: 5.5,
            queue_len: 10,
            top_n: 5,
            gamma: 0.2,
            window: 2048,
            bins: 256,
            ablation: Ablation::Full,
            margin_form: MarginForm::Alg1,
            negatives: 100,
            neg_init: NegativeInit::Farthest,
            max_negatives: None,
            seed: 0,
        }
    }
}

/// Every recognised key, in the order [`EngineConfig::to_config_string`] writes them.
pub const CONFIG_KEYS: [&str; 14] = [
    "tau",
    "lambda",
    "beta",
    "queue_len",
    "top_n",
    "gamma",
    "window",
    "bins",
    "ablation",
    "lower_margin_form",
    "negatives",
    "neg_init",
    "max_negatives",
    "seed",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| config_err(key, format!("cannot parse `{value}`: {e}")))
}

impl EngineConfig {
    /// Sets one field from its textual form. Range checks happen in [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "tau" => self.tau = parse_value(key, value)?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "queue_len" => self.queue_len = parse_value(key, value)?,
            "top_n" => self.top_n = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "bins" => self.bins = parse_value(key, value)?,
            "ablation" => self.ablation = parse_value(key, value)?,
            "lower_margin_form" => self.margin_form = parse_value(key, value)?,
            "negatives" => self.negatives = parse_value(key, value)?,
            "neg_init" => self.neg_init = parse_value(key, value)?,
            "max_negatives" => {
                self.max_negatives = match value {
                    "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "seed" => self.seed = parse_value(key, value)?,
            other => return Err(config_err(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        let mut config = EngineConfig::default();
        config.apply_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text)
    }

    /// Defaults, then the file (if any), then `overrides` in order; the last writer wins.
    pub fn resolve(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self> {
        let mut config = EngineConfig::default();
        if let Some(path) = path {
            config.apply_file(path)?;
        }
        for (key, value) in overrides {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        positive("beta", self.beta)?;
        if !(0.5..1.0).contains(&self.lambda) {
            return Err(config_err("lambda", format!("must lie in [0.5, 1), got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(config_err("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        for (key, v) in [
            ("queue_len", self.queue_len),
            ("top_n", self.top_n),
            ("window", self.window),
        ] {
            if v == 0 {
                return Err(config_err(key, "must be at least 1"));
            }
        }
        if self.bins < 2 {
            return Err(config_err("bins", "must be at least 2"));
        }
        if let Some(cap) = self.max_negatives {
            if cap < self.negatives {
                return Err(config_err(
                    "max_negatives",
                    format!("cap {cap} is below the initial queue size {}", self.negatives),
                ));
            }
        }
        Ok(())
    }

    /// Serializes every key; parsing the result yields an equal config.
    pub fn to_config_string(&self) -> String {
        let max_negatives = self
            .max_negatives
            .map_or_else(|| "none".to_string(), |v| v.to_string());
        let values = [
            self.tau.to_string(),
            self.lambda.to_string(),
            self.beta.to_string(),
            self.queue_len.to_string(),
            self.top_n.to_string(),
            self.gamma.to_string(),
            self.window.to_string(),
            self.bins.to_string(),
            self.ablation.to_string(),
            self.margin_form.to_string(),
            self.negatives.to_string(),
            self.neg_init.to_string(),
            max_negatives,
            self.seed.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// One-line `key=value` echo for logs and summaries.
    pub fn echo(&self) -> String {
        self.to_config_string()
            .lines()
            .map(|l| l.replace(" = ", "="))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
