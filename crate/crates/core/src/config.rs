//! Run configuration for the command-line front end: JSON in, validated and
//! fully resolved parameters out, with the provenance of every applied
//! default recorded for the reproducibility headers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Family, FilterBank};
use crate::hermite::Filter;
use crate::mc::McConfig;
use crate::spectra::{FStar, MemoryModel};

/// Short-memory factor selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FStarChoice {
    /// "farima": constant normalized so that r(0) = 1.
    Named(String),
    /// Explicit constant value.
    Const { value: f64 },
}

impl Default for FStarChoice {
    fn default() -> Self {
        FStarChoice::Named("farima".into())
    }
}

/// Nonlinear filter selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterChoice {
    /// "identity", "cube" or "centered-exp".
    Named(String),
    /// Hermite polynomial of the given order.
    Hermite { hermite: usize },
}

impl Default for FilterChoice {
    fn default() -> Self {
        FilterChoice::Named("identity".into())
    }
}

fn default_replicates() -> u64 {
    100
}
fn default_family() -> String {
    "db2".into()
}
fn default_levels() -> u32 {
    8
}
fn default_j_range() -> (u32, u32) {
    (3, 7)
}

/// JSON-facing run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Memory parameter, 0 <= d < 1/2.
    pub d: f64,
    #[serde(default)]
    pub fstar: FStarChoice,
    #[serde(rename = "G", default)]
    pub g: FilterChoice,
    #[serde(rename = "K", default)]
    pub k: u32,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "default_j_range")]
    pub j_range: (u32, u32),
}

impl RunConfig {
    /// Parse and validate a config file; collects every violated invariant.
    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parse and validate config text. Returns the resolved config and the
    /// provenance notes of applied defaults.
    pub fn parse(text: &str) -> Result<(Self, Vec<String>)> {
        if text.trim().is_empty() {
            return Err(Error::Config(vec!["configuration file is empty".into()]));
        }
        let raw: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
        let cfg: RunConfig = serde_json::from_value(raw.clone())
            .map_err(|e| Error::Config(vec![format!("invalid configuration: {e}")]))?;
        cfg.validate()?;
        let mut provenance = Vec::new();
        let obj = raw.as_object();
        let has = |k: &str| obj.map(|o| o.contains_key(k)).unwrap_or(false);
        if !has("fstar") {
            provenance.push("fstar: default 'farima' (normalized constant)".into());
        }
        if !has("G") {
            provenance.push("G: default 'identity'".into());
        }
        if !has("K") {
            provenance.push("K: default 0".into());
        }
        if !has("replicates") {
            provenance.push("replicates: default 100".into());
        }
        if !has("family") {
            provenance.push("family: default 'db2'".into());
        }
        if !has("levels") {
            provenance.push("levels: default 8".into());
        }
        if !has("j_range") {
            provenance.push("j_range: default [3, 7]".into());
        }
        Ok((cfg, provenance))
    }

    /// Check every module precondition, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(0.0..0.5).contains(&self.d) {
            errors.push(format!(
                "d = {} violates the model invariant 0 < d < 1/2",
                self.d
            ));
        }
        if let FStarChoice::Named(name) = &self.fstar {
            if name != "farima" {
                errors.push(format!(
                    "unknown fstar '{name}' (expected 'farima' or {{\"value\": c}})"
                ));
            }
        }
        if let FStarChoice::Const { value } = &self.fstar {
            if !value.is_finite() || *value <= 0.0 {
                errors.push(format!(
                    "fstar constant {value} violates positivity at the origin"
                ));
            }
        }
        match &self.g {
            FilterChoice::Named(name) => {
                if !["identity", "cube", "centered-exp"].contains(&name.as_str()) {
                    errors.push(format!(
                        "unknown filter G '{name}' (expected identity, cube, centered-exp or {{\"hermite\": q}})"
                    ));
                }
            }
            FilterChoice::Hermite { hermite } => {
                if *hermite < 1 {
                    errors.push("hermite order must be >= 1".into());
                }
            }
        }
        if self.n < 2 {
            errors.push(format!("n = {} violates n >= 2", self.n));
        }
        match Family::parse(&self.family) {
            Err(e) => errors.push(e.to_string()),
            Ok(family) => {
                // M >= K is the factorization precondition
                let m = match family {
                    Family::Haar => 1,
                    Family::Db2 => 2,
                    Family::Db4 => 4,
                };
                if self.k > m {
                    errors.push(format!(
                        "K = {} with {} (M = {m}) violates the factorization precondition M >= K",
                        self.k,
                        family.name()
                    ));
                }
            }
        }
        if self.levels < 1 || self.levels > 20 {
            errors.push(format!("levels = {} outside 1..=20", self.levels));
        }
        if self.j_range.0 < 1 || self.j_range.0 > self.j_range.1 || self.j_range.1 > self.levels {
            errors.push(format!(
                "j_range = {:?} must satisfy 1 <= j1 <= j2 <= levels = {}",
                self.j_range, self.levels
            ));
        }
        if self.replicates == 0 {
            errors.push("replicates must be >= 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn model(&self) -> Result<MemoryModel> {
        match &self.fstar {
            FStarChoice::Named(_) => MemoryModel::farima(self.d),
            FStarChoice::Const { value } => MemoryModel::new(
                self.d,
                FStar::Const(*value),
                crate::spectra::DEFAULT_GRID,
            ),
        }
    }

    pub fn filter(&self) -> Result<Filter> {
        match &self.g {
            FilterChoice::Named(name) => match name.as_str() {
                "identity" => Ok(Filter::Identity),
                "cube" => Ok(Filter::Cube),
                "centered-exp" => Ok(Filter::CenteredExp),
                other => Err(Error::Config(vec![format!("unknown filter '{other}'")])),
            },
            FilterChoice::Hermite { hermite } => Ok(Filter::Hermite(*hermite)),
        }
    }

    pub fn bank(&self) -> Result<FilterBank> {
        FilterBank::builtin(Family::parse(&self.family)?, self.levels)?.with_k(self.k)
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        Ok(McConfig {
            model: self.model()?,
            filter: self.filter()?,
            k: self.k,
            n: self.n,
            seed: self.seed,
            replicates: self.replicates,
        })
    }

    /// Compact JSON of the resolved configuration for reproducibility headers.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
