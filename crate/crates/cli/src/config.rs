//! TOML run configuration and `--set` overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};
use specnorm::harness::SweepParam;
use specnorm::reconstruction::ScoreMode;
use specnorm::simulator::SimParams;

/// Everything a config file may set. Command-line flags win over it.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub blur: Option<f64>,
    pub score_mode: Option<ScoreMode>,
    /// Simulation parameter overrides, keyed like the `params.json` sidecar.
    pub sim: Map<String, Value>,
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub param: Option<SweepParam>,
    pub values: Option<Vec<f64>>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `base`, then the `[sim]` table, then `KEY=VALUE` pairs.
    pub fn sim_params(&self, base: SimParams, sets: &[String]) -> Result<SimParams> {
        let mut fields = match serde_json::to_value(base)? {
            Value::Object(m) => m,
            _ => unreachable!("SimParams serializes to an object"),
        };
        for (k, v) in &self.sim {
            fields.insert(k.clone(), v.clone());
        }
        for pair in sets {
            let Some((k, v)) = pair.split_once('=') else { bail!("--set expects KEY=VALUE, got {pair:?}") };
            let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string()));
            fields.insert(k.trim().to_string(), value);
        }
        let params: SimParams = serde_json::from_value(Value::Object(fields)).context("simulation parameters")?;
        params.validate()?;
        Ok(params)
    }
}
