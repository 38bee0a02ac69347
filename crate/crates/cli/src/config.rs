//! Contract description file.
//!
//! ```toml
//! s0 = 100.0
//!
//! [market]
//! r = 0.05
//! sigma = 0.15
//! delta = 0.01
//!
//! [loan]
//! q = 100.0
//! gamma = 0.07
//! a = 50.0
//! L = 240.0   # optional cap
//! k = 0.5     # optional margin
//!
//! [mc]        # optional
//! n_paths = 100000
//! dt = 0.0005
//! horizon = 200.0
//! seed = 42
//! ```
//!
//! Dotted keys (`market.r = 0.05`) are equivalent to the sections above.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stockloan::{LoanTerms, MarketParams, SimConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    pub s0: f64,
    pub market: MarketSection,
    pub loan: LoanSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub sigma: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoanSection {
    pub q: f64,
    pub gamma: f64,
    pub a: f64,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge_correction: Option<bool>,
}

impl ContractSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid contract file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("contract spec serializes")
    }

    pub fn market(&self) -> Result<MarketParams, CliError> {
        Ok(MarketParams::new(self.market.r, self.market.sigma, self.market.delta)?)
    }

    pub fn terms(&self) -> Result<LoanTerms, CliError> {
        let l = &self.loan;
        let mut terms = LoanTerms::new(l.q, l.gamma, l.a)?;
        if let Some(k) = l.k {
            terms = terms.with_margin(k)?;
        }
        if let Some(cap) = l.cap {
            terms = terms.with_cap(cap)?;
        }
        Ok(terms)
    }
}

/// Command-line overrides for the simulation settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub env_seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
}

/// Simulation settings: flag, then `STOCKLOAN_SEED` (seed only), then the
/// file, then library defaults.
pub fn sim_config(spec: &ContractSpec, overrides: &SimOverrides) -> Result<SimConfig, CliError> {
    let file = spec.mc.clone().unwrap_or_default();
    let defaults = SimConfig::default();
    let cfg = SimConfig {
        n_paths: overrides.paths.or(file.n_paths).unwrap_or(defaults.n_paths),
        dt: overrides.dt.or(file.dt).unwrap_or(defaults.dt),
        horizon: file.horizon.unwrap_or(defaults.horizon),
        seed: overrides.seed.or(overrides.env_seed).or(file.seed).unwrap_or(defaults.seed),
        bridge_correction: file.bridge_correction.unwrap_or(defaults.bridge_correction),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}
