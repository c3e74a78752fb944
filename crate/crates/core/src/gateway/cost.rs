use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Completion;
use crate::error::{Error, Result};

/// Per-token prices of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRates {
    pub input_per_token: f64,
    pub output_per_token: f64,
}

/// Pricing table loaded from TOML:
///
/// ```toml
/// [models."gpt-4o"]
/// input_per_token = 2.5e-6
/// output_per_token = 1.0e-5
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pricing {
    #[serde(default)]
    pub models: BTreeMap<String, ModelRates>,
}

impl Pricing {
    pub fn load(path: &Path) -> Result<Pricing> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest {
            file: path.to_path_buf(),
            field: e
                .span()
                .map(|s| text[s].to_string())
                .unwrap_or_else(|| "?".into()),
            message: e.message().to_string(),
        })
    }

    pub fn with_model(mut self, model: &str, input_per_token: f64, output_per_token: f64) -> Self {
        self.models.insert(
            model.to_string(),
            ModelRates {
                input_per_token,
                output_per_token,
            },
        );
        self
    }
}

/// Σ prompt_tokens·in_rate + completion_tokens·out_rate.
pub fn cost_of(completions: &[Completion], pricing: &Pricing) -> Result<f64> {
    completions.iter().try_fold(0.0, |acc, c| {
        let rates = pricing
            .models
            .get(&c.model_id)
            .ok_or_else(|| Error::Config(format!("no pricing for model `{}`", c.model_id)))?;
        Ok(acc
            + c.prompt_tokens as f64 * rates.input_per_token
            + c.completion_tokens as f64 * rates.output_per_token)
    })
}
