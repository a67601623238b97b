use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, UnknownThreshold};

/// Pipeline components that can be switched off or swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ablation {
    NoSeparation,
    NoAdaptation,
    NoNegativeLambda,
    MlpClassifier,
    NoSelfTraining,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoSeparation,
        Ablation::NoAdaptation,
        Ablation::NoNegativeLambda,
        Ablation::MlpClassifier,
        Ablation::NoSelfTraining,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoSeparation => "no_separation",
            Ablation::NoAdaptation => "no_adaptation",
            Ablation::NoNegativeLambda => "no_negative_lambda",
            Ablation::MlpClassifier => "mlp_classifier",
            Ablation::NoSelfTraining => "no_self_training",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Known class count `K`.
    pub known: usize,
    pub mu: f64,
    pub beta: f64,
    /// Size of the pseudo-unknown set.
    pub r: usize,
    pub batch: usize,
    pub lr: f64,
    pub epochs_sep: usize,
    pub epochs_adapt: usize,
    pub encoder_heads: usize,
    pub classifier_heads: usize,
    pub head_dim: usize,
    pub disc_hidden: Vec<usize>,
    pub seed: u64,
    /// Sorted, without duplicates.
    pub ablations: Vec<Ablation>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            known: 5,
            mu: 0.5,
            beta: 0.1,
            r: 2000,
            batch: 2048,
            lr: 1e-3,
            epochs_sep: 30,
            epochs_adapt: 200,
            encoder_heads: 8,
            classifier_heads: 2,
            head_dim: 32,
            disc_hidden: vec![128, 128],
            seed: 0,
            ablations: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}={value}: {e}")))
}

fn comma_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

impl TrainConfig {
    pub fn has(&self, ablation: Ablation) -> bool {
        self.ablations.contains(&ablation)
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablations.push(ablation);
        self.ablations.sort();
        self.ablations.dedup();
        self
    }

    /// `"full"` or the ablation names joined with `+`.
    pub fn variant_name(&self) -> String {
        if self.ablations.is_empty() {
            "full".into()
        } else {
            let names: Vec<_> = self.ablations.iter().map(|a| a.name()).collect();
            names.join("+")
        }
    }

    pub fn unknown_threshold(&self) -> Result<UnknownThreshold> {
        UnknownThreshold::new(self.mu)
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            known: self.known,
            encoder_heads: self.encoder_heads,
            head_dim: self.head_dim,
            classifier_heads: self.classifier_heads,
            discriminator_hidden: self.disc_hidden.clone(),
            mlp_classifier: self.has(Ablation::MlpClassifier),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.known < 2 {
            return fail("known class count must be at least 2");
        }
        self.unknown_threshold()?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail("beta must be finite and nonnegative");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.r == 0 || self.batch == 0 {
            return fail("r and batch must be at least 1");
        }
        if self.encoder_heads == 0 || self.classifier_heads == 0 || self.head_dim == 0 {
            return fail("head counts and head dimension must be positive");
        }
        if self.disc_hidden.contains(&0) {
            return fail("discriminator widths must be positive");
        }
        Ok(())
    }

    /// `key=value` lines, readable by [`TrainConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let hidden: Vec<String> = self.disc_hidden.iter().map(|w| w.to_string()).collect();
        let ablations: Vec<&str> = self.ablations.iter().map(|a| a.name()).collect();
        let _ = writeln!(out, "known={}", self.known);
        let _ = writeln!(out, "mu={}", self.mu);
        let _ = writeln!(out, "beta={}", self.beta);
        let _ = writeln!(out, "r={}", self.r);
        let _ = writeln!(out, "batch={}", self.batch);
        let _ = writeln!(out, "lr={}", self.lr);
        let _ = writeln!(out, "epochs_sep={}", self.epochs_sep);
        let _ = writeln!(out, "epochs_adapt={}", self.epochs_adapt);
        let _ = writeln!(out, "encoder_heads={}", self.encoder_heads);
        let _ = writeln!(out, "classifier_heads={}", self.classifier_heads);
        let _ = writeln!(out, "head_dim={}", self.head_dim);
        let _ = writeln!(out, "disc_hidden={}", hidden.join(","));
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(
            out,
            "ablation={}",
            if ablations.is_empty() { "none".into() } else { ablations.join(",") }
        );
        out
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "known" => self.known = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "r" => self.r = parse_num(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "epochs_sep" => self.epochs_sep = parse_num(key, value)?,
            "epochs_adapt" => self.epochs_adapt = parse_num(key, value)?,
            "encoder_heads" => self.encoder_heads = parse_num(key, value)?,
            "classifier_heads" => self.classifier_heads = parse_num(key, value)?,
            "head_dim" => self.head_dim = parse_num(key, value)?,
            "disc_hidden" => self.disc_hidden = comma_list(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "ablation" => {
                self.ablations.clear();
                for a in comma_list::<Ablation>(key, value)? {
                    *self = std::mem::take(self).with_ablation(a);
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Starts from the defaults; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }
}
