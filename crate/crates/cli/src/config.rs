use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// Settings read from `--config`; any flag given on the command line wins.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,

    pub f0_hz: Option<f64>,
    pub cycles: Option<u32>,
    pub sample_rate_hz: Option<f64>,
    pub amplitude: Option<f64>,
    pub len: Option<usize>,

    pub d_min_m: Option<f64>,
    pub d_max_m: Option<f64>,
    pub d_step_m: Option<f64>,
    pub modes: Option<String>,
    pub a0_form: Option<String>,

    pub method: Option<String>,
    pub tol_pct: Option<f64>,
    pub max_terms: Option<usize>,
    pub n_funcs: Option<usize>,
    pub ridge_lambda: Option<f64>,
    pub grid_min_s: Option<f64>,
    pub grid_max_s: Option<f64>,

    pub snr_db: Option<f64>,
    pub reflection_coeff: Option<f64>,
    pub n_test: Option<usize>,

    pub m: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
