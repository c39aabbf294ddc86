//! TOML run configuration.
//!
//! Every field is optional; unset training fields take the preset for the
//! chosen pipeline and case. `DISPATCH_SEED` and `DISPATCH_OUT` override
//! `seed` and `out`.
//!
//! ```toml
//! pipeline = "ilo"              # ilo | slo
//! case = "ed-1h"                # ed-1h | ed-24h | dcopf
//! seed = 42
//! penalties = "table1-settings2"
//! epochs = 100
//! load_learning_rate = 5e-3
//! impedance_learning_rate = 4e-3
//! mu_train = 1e-9
//! mu_eval = 1e-9
//! hidden = [25, 25, 25]
//! out = "runs/ed1h-ilo"
//!
//! [data]
//! csv = "data/hourly.csv"       # omit for synthetic data
//! days = 7                      # synthetic days
//! load_scale = 0.0723
//! offset = 0
//! train = 120
//! test = 48
//!
//! [grid]
//! file = "fixtures/ieee14.grid" # omit for the bundled system of the case
//! regularization = 1.0
//! ```

use std::path::{Path, PathBuf};

use dispatchlearn_core::regret::PenaltyFamily;
use dispatchlearn_core::{CaseKind, PenaltySetting, Pipeline, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::bench::{self, CaseLayout};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "DISPATCH_SEED";
pub const OUT_ENV: &str = "DISPATCH_OUT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Either a preset name such as `table1-settings2` or explicit factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PenaltySpec {
    Preset(String),
    Explicit(PenaltySetting),
}

impl PenaltySpec {
    pub fn resolve(&self, gens: usize) -> Result<PenaltySetting, ConfigError> {
        match self {
            PenaltySpec::Preset(name) => {
                let (family, k) = parse_preset(name)?;
                PenaltySetting::preset(family, k, gens).ok_or_else(|| {
                    ConfigError::Invalid(format!("preset {name} does not fit a fleet of {gens} units"))
                })
            }
            PenaltySpec::Explicit(p) => {
                if p.phi_up.len() != gens || p.phi_down.len() != gens {
                    return Err(ConfigError::Invalid(format!("penalties must list {gens} units")));
                }
                Ok(p.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            PenaltySpec::Preset(name) => name.clone(),
            PenaltySpec::Explicit(_) => "custom".into(),
        }
    }
}

pub fn family_name(family: PenaltyFamily) -> &'static str {
    match family {
        PenaltyFamily::Table1 => "table1",
        PenaltyFamily::Case2 => "case2",
    }
}

pub fn parse_family(name: &str) -> Result<PenaltyFamily, ConfigError> {
    match name {
        "table1" => Ok(PenaltyFamily::Table1),
        "case2" => Ok(PenaltyFamily::Case2),
        other => Err(ConfigError::Invalid(format!("unknown penalty family {other:?}"))),
    }
}

pub fn preset_name(family: PenaltyFamily, k: usize) -> String {
    format!("{}-settings{k}", family_name(family))
}

/// `table1-settings3` → (Table1, 3).
pub fn parse_preset(name: &str) -> Result<(PenaltyFamily, usize), ConfigError> {
    let bad = || ConfigError::Invalid(format!("unknown penalty preset {name:?}"));
    let (family, k) = name.split_once("-settings").ok_or_else(bad)?;
    let k: usize = k.parse().map_err(|_| bad())?;
    if !(1..=5).contains(&k) {
        return Err(bad());
    }
    Ok((parse_family(family)?, k))
}

pub fn parse_pipeline(s: &str) -> Result<Pipeline, ConfigError> {
    match s {
        "ilo" => Ok(Pipeline::Ilo),
        "slo" => Ok(Pipeline::Slo),
        other => Err(ConfigError::Invalid(format!("unknown pipeline {other:?}"))),
    }
}

pub fn parse_case(s: &str) -> Result<CaseKind, ConfigError> {
    match s {
        "ed-1h" => Ok(CaseKind::Ed1h),
        "ed-24h" => Ok(CaseKind::Ed24h),
        "dcopf" => Ok(CaseKind::Dcopf),
        other => Err(ConfigError::Invalid(format!("unknown case {other:?}"))),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub days: Option<usize>,
    pub load_scale: Option<f64>,
    pub offset: Option<usize>,
    pub train: Option<usize>,
    pub test: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub file: Option<PathBuf>,
    pub regularization: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Option<Pipeline>,
    pub case: Option<CaseKind>,
    pub seed: Option<u64>,
    pub penalties: Option<PenaltySpec>,
    pub epochs: Option<usize>,
    pub load_learning_rate: Option<f64>,
    pub impedance_learning_rate: Option<f64>,
    pub mu_train: Option<f64>,
    pub mu_eval: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

/// Framing and split of the data a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub csv: Option<PathBuf>,
    pub days: usize,
    pub load_scale: f64,
    pub offset: usize,
    pub train: usize,
    pub test: usize,
}

/// A configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub training: TrainingConfig,
    pub penalty_label: String,
    pub data: DataSpec,
    pub grid_file: Option<PathBuf>,
    pub regularization: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        // Relative data and grid paths are taken from the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.data.csv, &mut config.grid.file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Applies `DISPATCH_SEED` and `DISPATCH_OUT` from `env`.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(seed) = env(SEED_ENV) {
            self.seed = Some(
                seed.trim()
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={seed:?} is not an integer")))?,
            );
        }
        if let Some(out) = env(OUT_ENV) {
            self.out = Some(PathBuf::from(out));
        }
        Ok(())
    }

    pub fn resolve(&self, gens: usize) -> Result<ResolvedConfig, ConfigError> {
        let pipeline = self
            .pipeline
            .ok_or_else(|| ConfigError::Invalid("pipeline is not set".into()))?;
        let case = self.case.ok_or_else(|| ConfigError::Invalid("case is not set".into()))?;
        let spec = self.penalties.clone().unwrap_or_else(|| {
            PenaltySpec::Preset(preset_name(bench::penalty_family(case), 1))
        });
        let penalties = spec.resolve(gens)?;
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let mut training = TrainingConfig::preset(pipeline, case, penalties, seed);
        if let Some(v) = self.epochs {
            training.epochs = v;
        }
        if let Some(v) = self.load_learning_rate {
            training.load_learning_rate = v;
        }
        if let Some(v) = self.impedance_learning_rate {
            training.impedance_learning_rate = v;
        }
        if let Some(v) = self.mu_train {
            training.mu_train = v;
        }
        if let Some(v) = self.mu_eval {
            training.mu_eval = v;
        }
        if let Some(v) = &self.hidden {
            training.hidden = v.clone();
        }
        training
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let layout = CaseLayout::standard(case);
        let data = DataSpec {
            csv: self.data.csv.clone(),
            days: self.data.days.unwrap_or(layout.days),
            load_scale: self.data.load_scale.unwrap_or_else(|| bench::load_scale(case)),
            offset: self.data.offset.unwrap_or(layout.offset),
            train: self.data.train.unwrap_or(layout.train),
            test: self.data.test.unwrap_or(layout.test),
        };
        if data.days == 0 || data.train == 0 || data.test == 0 {
            return Err(ConfigError::Invalid("days, train and test must be at least 1".into()));
        }
        if !(data.load_scale > 0.0) {
            return Err(ConfigError::Invalid("load_scale must be positive".into()));
        }
        Ok(ResolvedConfig {
            training,
            penalty_label: spec.label(),
            data,
            grid_file: self.grid.file.clone(),
            regularization: self.grid.regularization.unwrap_or(bench::NETWORK_REGULARIZATION),
            out: self.out.clone(),
        })
    }
}

impl ResolvedConfig {
    /// `key = value` lines describing the run, for report headers.
    pub fn header_lines(&self) -> Vec<String> {
        let t = &self.training;
        let mut lines = vec![
            format!("pipeline = {}", pipeline_name(t.pipeline)),
            format!("case = {}", t.case.name()),
            format!("seed = {}", t.seed),
            format!("penalties = {}", self.penalty_label),
            format!("epochs = {}", t.epochs),
            format!("load_learning_rate = {:e}", t.load_learning_rate),
        ];
        if t.case == CaseKind::Dcopf {
            lines.push(format!("impedance_learning_rate = {:e}", t.impedance_learning_rate));
            lines.push(format!("regularization = {}", self.regularization));
        }
        lines.push(format!("mu_train = {:e}", t.mu_train));
        lines.push(format!("mu_eval = {:e}", t.mu_eval));
        lines.push(format!("hidden = {:?}", t.hidden));
        let d = &self.data;
        match &d.csv {
            Some(p) => lines.push(format!("data = {}", file_label(p))),
            None => lines.push(format!("data = synthetic, {} days", d.days)),
        }
        lines.push(format!(
            "split = offset {}, train {}, test {}, load_scale {}",
            d.offset, d.train, d.test, d.load_scale
        ));
        if let Some(g) = &self.grid_file {
            lines.push(format!("grid = {}", file_label(g)));
        }
        lines
    }
}

/// File name only, so headers do not depend on where a run was started.
fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::Ilo => "ilo",
        Pipeline::Slo => "slo",
    }
}
