// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use lskin::ensemble::SinaiConfig;
use lskin::hatano_nelson::{DiagonalConvention, PhaseEnsemble};
use lskin::lattice::{Disorder, ModelConfig};
use lskin::ode::Tolerance;
use lskin::transport::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    #[serde(rename = "N_total")]
    pub n_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HatanoNelsonConfig {
    pub kappa: f64,
    #[serde(default)]
    pub convention: DiagonalConvention,
}

/// Fully resolved experiment parameters. This is what the summary echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J")]
    pub hopping: f64,
    #[serde(rename = "Q")]
    pub rate: f64,
    pub seed: u64,
    pub realizations: usize,
    pub disorder: Disorder,
    pub grid: TimeGrid,
    pub tolerance: ToleranceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meanfield: Option<MeanFieldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hatano_nelson: Option<HatanoNelsonConfig>,
}

impl ExperimentConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig { sites: self.sites, hopping: self.hopping, rate: self.rate, disorder: self.disorder, seed: self.seed }
    }

    pub fn tolerance(&self) -> Result<Tolerance> {
        Ok(Tolerance::new(self.tolerance.rtol, self.tolerance.atol)?)
    }

    pub fn sinai(&self) -> Result<SinaiConfig> {
        let h = match self.disorder {
            Disorder::Bernoulli { h, p } if p == 0.5 => h,
            d => bail!("the Sinai ensemble needs bernoulli disorder with p = 0.5, got {d:?}"),
        };
        Ok(SinaiConfig { sites: self.sites, rate: self.rate, h, realizations: self.realizations, seed: self.seed, grid: self.grid })
    }

    pub fn phase_ensemble(&self) -> Result<PhaseEnsemble> {
        let hn = self.hatano_nelson.context("missing [hatano_nelson] table")?;
        let p = match self.disorder {
            Disorder::Bernoulli { p, .. } => p,
            Disorder::Zero | Disorder::Uniform { .. } => 1.0,
        };
        Ok(PhaseEnsemble { sites: self.sites, hopping: self.hopping, kappa: hn.kappa, p, convention: hn.convention, seed: self.seed })
    }
}

/// Overlay `over` on `base`. Tables are merged key by key, except tagged
/// tables (`kind = ...`) which replace the base wholesale.
fn overlay(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) if !o.contains_key("kind") => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults of `base` overridden by the TOML file at `path`.
pub fn load(base: &ExperimentConfig, path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(base.clone());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let over: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(name) = over.get("experiment").and_then(|v| v.as_str()) {
        if name != base.experiment {
            bail!("config file is for experiment '{name}', not '{}'", base.experiment);
        }
    }
    let mut merged = toml::Value::try_from(base)?;
    overlay(&mut merged, over);
    let cfg: ExperimentConfig = merged.try_into().with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}
