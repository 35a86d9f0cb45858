//! Run configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults. Command-line
//! flags are applied on top of the file by the caller.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::forest::{ForestParams, RowSampling};
use crate::structural::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub trees: usize,
    pub features_per_node: usize,
    pub max_depth: usize,
    pub firm_fraction: f64,
    pub date_fraction: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::default(),
            trees: 50,
            features_per_node: 15,
            max_depth: 15,
            firm_fraction: 0.2,
            date_fraction: 0.2,
            seed: 0,
            input: None,
            out_dir: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 12] = [
    "recovery",
    "global_recovery",
    "lambda",
    "maturity",
    "trees",
    "features_per_node",
    "max_depth",
    "firm_fraction",
    "date_fraction",
    "seed",
    "input",
    "out_dir",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::domain(format!("invalid value `{v}` for `{key}`")))
        }
        match key {
            "recovery" => self.model.recovery = p(key, value)?,
            "global_recovery" => self.model.global_recovery = p(key, value)?,
            "lambda" => self.model.recovery_std = p(key, value)?,
            "maturity" => self.model.maturity = p(key, value)?,
            "trees" => self.trees = p(key, value)?,
            "features_per_node" => self.features_per_node = p(key, value)?,
            "max_depth" => self.max_depth = p(key, value)?,
            "firm_fraction" => self.firm_fraction = p(key, value)?,
            "date_fraction" => self.date_fraction = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(Error::domain(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.trees == 0 || self.features_per_node == 0 {
            return Err(Error::domain("trees and features_per_node must be positive"));
        }
        for f in [self.firm_fraction, self.date_fraction] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::domain(format!("split fraction {f} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.trees,
            features_per_node: self.features_per_node,
            max_depth: self.max_depth,
            seed: self.seed,
            sampling: RowSampling::Bootstrap,
        }
    }

    /// The configuration in the same format [`RunConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "recovery = {}", m.recovery);
        let _ = writeln!(s, "global_recovery = {}", m.global_recovery);
        let _ = writeln!(s, "lambda = {}", m.recovery_std);
        let _ = writeln!(s, "maturity = {}", m.maturity);
        let _ = writeln!(s, "trees = {}", self.trees);
        let _ = writeln!(s, "features_per_node = {}", self.features_per_node);
        let _ = writeln!(s, "max_depth = {}", self.max_depth);
        let _ = writeln!(s, "firm_fraction = {}", self.firm_fraction);
        let _ = writeln!(s, "date_fraction = {}", self.date_fraction);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(p) = &self.input {
            let _ = writeln!(s, "input = {}", p.display());
        }
        if let Some(p) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {}", p.display());
        }
        s
    }

    /// `to_text` with every line prefixed by `# `, for CSV headers.
    pub fn as_comment(&self) -> String {
        self.to_text().lines().map(|l| format!("# {l}\n")).collect()
    }
}
