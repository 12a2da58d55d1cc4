//! Flat `key = value` run configuration. Lines starting with `#` are
//! comments, unknown keys are errors, and every key has a default.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{BuildConfig, Task};
use crate::error::{Error, Result};
use crate::losses::AdversarialMode;
use crate::qgen::DecodeRule;
use crate::trainer::{NetInit, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub label: u8,
    pub train: TrainConfig,
    pub data: BuildConfig,
    /// Apply row clearing to saved outputs and reports.
    pub post: bool,
    pub mnist: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Write a comparison grid every this many epochs (0 disables).
    pub sample_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::ImageDenoising,
            label: 0,
            train: TrainConfig::default(),
            data: BuildConfig::default(),
            post: true,
            mnist: None,
            data_dir: None,
            out_dir: None,
            sample_every: 1,
        }
    }
}

pub const KEYS: [&str; 32] = [
    "task",
    "label",
    "seed",
    "epochs",
    "batch_size",
    "nc",
    "lr_gen",
    "lr_critic",
    "beta1",
    "beta2",
    "lambda",
    "eps",
    "eta",
    "rho",
    "decode",
    "adv_sign",
    "train_acnn",
    "blocks",
    "gen_init_low",
    "gen_init_high",
    "critic_init",
    "train_size",
    "test_size",
    "noise_sigma",
    "canny_sigma",
    "canny_low_percentile",
    "canny_high_percentile",
    "post",
    "mnist",
    "data_dir",
    "out_dir",
    "sample_every",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

pub fn parse_decode(value: &str) -> Result<DecodeRule> {
    match value {
        "max" => Ok(DecodeRule::MaxNorm),
        "sum" => Ok(DecodeRule::SumNorm),
        _ => Err(Error::Config(format!("decode must be 'max' or 'sum', got '{value}'"))),
    }
}

pub fn parse_adv_sign(value: &str) -> Result<AdversarialMode> {
    match value {
        "standard" => Ok(AdversarialMode::Standard),
        "literal" => Ok(AdversarialMode::Literal),
        _ => Err(Error::Config(format!(
            "adv_sign must be 'standard' or 'literal', got '{value}'"
        ))),
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key.trim() {
            "task" => self.task = v.parse()?,
            "label" => self.label = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "nc" => t.n_critic = parse(key, v)?,
            "lr_gen" => t.lr_gen = parse(key, v)?,
            "lr_critic" => t.lr_critic = parse(key, v)?,
            "beta1" => t.beta1 = parse(key, v)?,
            "beta2" => t.beta2 = parse(key, v)?,
            "lambda" => t.weights.lambda = parse(key, v)?,
            "eps" => t.weights.epsilon = parse(key, v)?,
            "eta" => t.weights.eta = parse(key, v)?,
            "rho" => t.weights.rho = parse(key, v)?,
            "decode" => t.decode = parse_decode(v)?,
            "adv_sign" => t.adversarial = parse_adv_sign(v)?,
            "train_acnn" => t.train_acnn = parse_bool(key, v)?,
            "blocks" => t.blocks = parse(key, v)?,
            "gen_init_low" => t.gen_init_low = parse(key, v)?,
            "gen_init_high" => t.gen_init_high = parse(key, v)?,
            "critic_init" => {
                t.critic_init = match v {
                    "uniform" => NetInit::Uniform,
                    "zero" => NetInit::Zero,
                    _ => return Err(Error::Config(format!("critic_init must be 'uniform' or 'zero', got '{v}'"))),
                }
            }
            "train_size" => self.data.train = parse(key, v)?,
            "test_size" => self.data.test = parse(key, v)?,
            "noise_sigma" => self.data.noise_sigma = parse(key, v)?,
            "canny_sigma" => self.data.canny.sigma = parse(key, v)?,
            "canny_low_percentile" => self.data.canny.low_percentile = parse(key, v)?,
            "canny_high_percentile" => self.data.canny.high_percentile = parse(key, v)?,
            "post" => self.post = parse_bool(key, v)?,
            "mnist" => self.mnist = opt_path(v),
            "data_dir" => self.data_dir = opt_path(v),
            "out_dir" => self.out_dir = opt_path(v),
            "sample_every" => self.sample_every = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "task" => self.task.name().to_string(),
            "label" => self.label.to_string(),
            "seed" => t.seed.to_string(),
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "nc" => t.n_critic.to_string(),
            "lr_gen" => t.lr_gen.to_string(),
            "lr_critic" => t.lr_critic.to_string(),
            "beta1" => t.beta1.to_string(),
            "beta2" => t.beta2.to_string(),
            "lambda" => t.weights.lambda.to_string(),
            "eps" => t.weights.epsilon.to_string(),
            "eta" => t.weights.eta.to_string(),
            "rho" => t.weights.rho.to_string(),
            "decode" => match t.decode {
                DecodeRule::MaxNorm => "max",
                DecodeRule::SumNorm => "sum",
            }
            .to_string(),
            "adv_sign" => match t.adversarial {
                AdversarialMode::Standard => "standard",
                AdversarialMode::Literal => "literal",
            }
            .to_string(),
            "train_acnn" => t.train_acnn.to_string(),
            "blocks" => t.blocks.to_string(),
            "gen_init_low" => t.gen_init_low.to_string(),
            "gen_init_high" => t.gen_init_high.to_string(),
            "critic_init" => match t.critic_init {
                NetInit::Uniform => "uniform",
                NetInit::Zero => "zero",
            }
            .to_string(),
            "train_size" => self.data.train.to_string(),
            "test_size" => self.data.test.to_string(),
            "noise_sigma" => self.data.noise_sigma.to_string(),
            "canny_sigma" => self.data.canny.sigma.to_string(),
            "canny_low_percentile" => self.data.canny.low_percentile.to_string(),
            "canny_high_percentile" => self.data.canny.high_percentile.to_string(),
            "post" => self.post.to_string(),
            "mnist" => path_text(&self.mnist),
            "data_dir" => path_text(&self.data_dir),
            "out_dir" => path_text(&self.out_dir),
            "sample_every" => self.sample_every.to_string(),
            _ => return None,
        })
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Every key with its effective value, one per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.task.check_label(self.label)?;
        self.train.validate()?;
        self.validate_data()
    }

    pub fn validate_data(&self) -> Result<()> {
        if !(self.data.noise_sigma.is_finite() && self.data.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be ≥ 0".into()));
        }
        if self.data.train == 0 || self.data.test == 0 {
            return Err(Error::Config("train_size and test_size must be positive".into()));
        }
        Ok(())
    }
}
