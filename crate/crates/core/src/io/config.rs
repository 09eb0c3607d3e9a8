//! Experiment configuration (TOML) and its command-line overrides.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::combine::{GwScope, Method, MethodConfig};
use crate::covariance::{CovConfig, PdRepair, Shrinkage, ZeroPattern, DEFAULT_FLOOR_RATIO};
use crate::error::{Error, Result};
use crate::eval::Loss;
use crate::naive::DRW_EXPERT;
use crate::series::Hierarchy;

use super::csv::{ColumnMapping, TimezonePolicy, PROVIDER_EXPERT};
use super::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// A long-format CSV; needs a `[hierarchy]` section.
    Csv {
        path: PathBuf,
        #[serde(default)]
        mapping: ColumnMapping,
        #[serde(default)]
        timezone: TimezonePolicy,
    },
    /// A directory written by `ingest` or `synth`.
    Dataset {
        dir: PathBuf,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub total: String,
    pub bottoms: Vec<String>,
}

impl HierarchySpec {
    pub fn build(&self) -> Result<Hierarchy> {
        Hierarchy::new(self.total.clone(), self.bottoms.clone())
    }
}

impl From<&Hierarchy> for HierarchySpec {
    fn from(h: &Hierarchy) -> Self {
        Self {
            total: h.total_id().to_string(),
            bottoms: h.bottom_ids().to_vec(),
        }
    }
}

/// What to do when an origin has less than `window_days` of history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryPolicy {
    /// Use the available days if there are at least `min_window_days`.
    #[default]
    AutoShrink,
    Strict,
}

fn default_experts() -> Vec<String> {
    vec![PROVIDER_EXPERT.into(), DRW_EXPERT.into()]
}
fn default_benchmark() -> String {
    PROVIDER_EXPERT.into()
}
fn default_window() -> usize {
    28
}
fn default_min_window() -> usize {
    7
}
fn default_alpha() -> f64 {
    0.05
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR_RATIO
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub hierarchy: Option<HierarchySpec>,
    /// Experts combined, in stacking order; `drw` is derived from actuals.
    #[serde(default = "default_experts")]
    pub experts: Vec<String>,
    #[serde(default = "default_benchmark")]
    pub benchmark: String,
    #[serde(default = "default_window")]
    pub window_days: usize,
    #[serde(default = "default_min_window")]
    pub min_window_days: usize,
    #[serde(default)]
    pub history: HistoryPolicy,
    #[serde(default)]
    pub eval_start: Option<NaiveDate>,
    #[serde(default)]
    pub eval_end: Option<NaiveDate>,
    #[serde(default)]
    pub lambda: Shrinkage,
    #[serde(default)]
    pub zero_pattern: ZeroPattern,
    #[serde(default)]
    pub center: bool,
    #[serde(default = "default_floor")]
    pub floor_ratio: f64,
    #[serde(default)]
    pub pd_repair: PdRepair,
    #[serde(default)]
    pub clamp_lw_cov: bool,
    #[serde(default)]
    pub gw_scope: GwScope,
    #[serde(default = "default_alpha")]
    pub dm_alpha: f64,
    #[serde(default)]
    pub dm_loss: Loss,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Overrides the synthetic scenario's seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// A configuration with defaults around the given data source.
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            hierarchy: None,
            experts: default_experts(),
            benchmark: default_benchmark(),
            window_days: default_window(),
            min_window_days: default_min_window(),
            history: HistoryPolicy::default(),
            eval_start: None,
            eval_end: None,
            lambda: Shrinkage::Auto,
            zero_pattern: ZeroPattern::default(),
            center: false,
            floor_ratio: DEFAULT_FLOOR_RATIO,
            pd_repair: PdRepair::default(),
            clamp_lw_cov: false,
            gw_scope: GwScope::WithTotal,
            dm_alpha: default_alpha(),
            dm_loss: Loss::Absolute,
            output_dir: default_output(),
            seed: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.data {
            DataSource::Csv { path, .. } => resolve(path),
            DataSource::Dataset { dir } => resolve(dir),
            DataSource::Synth(_) => {}
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_days < 7 {
            return bad(format!(
                "window_days must be >= 7, got {}",
                self.window_days
            ));
        }
        if self.min_window_days == 0 || self.min_window_days > self.window_days {
            return bad(format!(
                "min_window_days must lie in 1..={}, got {}",
                self.window_days, self.min_window_days
            ));
        }
        if self.experts.len() < 2 {
            return bad("at least two experts are required".into());
        }
        if !self.experts.iter().any(|e| e == DRW_EXPERT) {
            return bad(format!("experts must include {DRW_EXPERT:?}"));
        }
        let is_method = self.benchmark.parse::<Method>().is_ok();
        if !is_method && !self.experts.contains(&self.benchmark) {
            return bad(format!(
                "benchmark {:?} is neither an expert nor a method",
                self.benchmark
            ));
        }
        if !(self.dm_alpha > 0.0 && self.dm_alpha < 1.0) {
            return bad(format!(
                "dm_alpha must lie in (0, 1), got {}",
                self.dm_alpha
            ));
        }
        if !(self.floor_ratio > 0.0) {
            return bad(format!(
                "floor_ratio must be positive, got {}",
                self.floor_ratio
            ));
        }
        if let (Some(a), Some(b)) = (self.eval_start, self.eval_end) {
            if b < a {
                return bad(format!("eval_end {b} precedes eval_start {a}"));
            }
        }
        if matches!(self.data, DataSource::Csv { .. }) && self.hierarchy.is_none() {
            return bad("a csv data source needs a [hierarchy] section".into());
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(w) = o.window_days {
            self.window_days = w;
            self.min_window_days = self.min_window_days.min(w);
        }
        if let Some(p) = o.zero_pattern {
            self.zero_pattern = p;
        }
        if let Some(l) = o.lambda {
            self.lambda = l;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        self.validate()
    }

    pub fn method_config(&self) -> MethodConfig {
        MethodConfig {
            window_days: self.window_days,
            min_window_days: match self.history {
                HistoryPolicy::AutoShrink => self.min_window_days,
                HistoryPolicy::Strict => self.window_days,
            },
            cov: CovConfig {
                center: self.center,
                shrinkage: self.lambda,
                pattern: self.zero_pattern,
                floor_ratio: self.floor_ratio,
                repair: self.pd_repair,
            },
            drw_expert: DRW_EXPERT.into(),
            clamp_lw_cov: self.clamp_lw_cov,
            gw_scope: self.gw_scope,
        }
    }

    /// Seed in effect for synthetic data, if any.
    pub fn effective_seed(&self) -> Option<u64> {
        match &self.data {
            DataSource::Synth(s) => Some(self.seed.unwrap_or(s.seed)),
            _ => self.seed,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub window_days: Option<usize>,
    pub zero_pattern: Option<ZeroPattern>,
    pub lambda: Option<Shrinkage>,
    pub output_dir: Option<PathBuf>,
}
