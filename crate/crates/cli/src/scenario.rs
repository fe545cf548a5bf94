//! Scenario documents: a mixture plus horizon, guidance grid and times.

use std::path::Path;

use maskcfg::corpus::{builtin, BUILTIN_NAMES};
use maskcfg::mixture::MixtureSpec;
use maskcfg::MixtureModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Prefix selecting a built-in scenario instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub mixture: MixtureSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub w: Vec<f64>,
    pub times: Vec<f64>,
    pub guided_class: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mixture: MixtureModel,
    pub horizon: f64,
    pub ws: Vec<f64>,
    pub times: Vec<f64>,
    pub guided_label: String,
    pub guided_index: usize,
}

pub const DEFAULT_HORIZON: f64 = 1.5;
pub const DEFAULT_WS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Eleven equally spaced times on `[0, T]`.
pub fn default_times(horizon: f64) -> Vec<f64> {
    (0..=10).map(|k| horizon * k as f64 / 10.0).collect()
}

impl Scenario {
    pub fn from_file(file: ScenarioFile, name: &str) -> CliResult<Self> {
        let mixture = MixtureModel::from_spec(&file.mixture).map_err(|e| CliError::Config(e.to_string()))?;
        Self::build(name, mixture, file.horizon, file.w, file.times, file.guided_class)
    }

    fn build(
        name: &str,
        mixture: MixtureModel,
        horizon: f64,
        ws: Vec<f64>,
        times: Vec<f64>,
        guided_label: String,
    ) -> CliResult<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(CliError::Config(format!("T = {horizon} must be positive and finite")));
        }
        if ws.is_empty() {
            return Err(CliError::Config("w list is empty".into()));
        }
        if let Some(w) = ws.iter().find(|&&w| !(w >= -1.0) || !w.is_finite()) {
            return Err(CliError::Config(format!("w = {w} must be >= -1")));
        }
        if times.is_empty() {
            return Err(CliError::Config("time grid is empty".into()));
        }
        if let Some(t) = times.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
            return Err(CliError::Config(format!("time {t} outside [0, {horizon}]")));
        }
        if times.windows(2).any(|p| p[1] < p[0]) {
            return Err(CliError::Config("times must be nondecreasing".into()));
        }
        let guided_index = mixture
            .class_index(&guided_label)
            .map_err(|_| CliError::Config(format!("unknown guided class {guided_label:?}")))?;
        Ok(Self {
            name: name.to_string(),
            mixture,
            horizon,
            ws,
            times,
            guided_label,
            guided_index,
        })
    }

    /// Loads `builtin:<name>` or a JSON file.
    pub fn load(config: &str) -> CliResult<Self> {
        if let Some(name) = config.strip_prefix(BUILTIN_PREFIX) {
            let mixture = builtin(name)
                .ok_or_else(|| {
                    CliError::Config(format!("unknown built-in {name:?}; expected one of {}", BUILTIN_NAMES.join(", ")))
                })?
                .map_err(|e| CliError::Config(e.to_string()))?;
            return Self::build(
                name,
                mixture,
                DEFAULT_HORIZON,
                DEFAULT_WS.to_vec(),
                default_times(DEFAULT_HORIZON),
                "z1".into(),
            );
        }
        let path = Path::new(config);
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::from_file(file, name)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            mixture: self.mixture.to_spec(),
            horizon: self.horizon,
            w: self.ws.clone(),
            times: self.times.clone(),
            guided_class: self.guided_label.clone(),
        }
    }

    pub fn dims(&self) -> usize {
        self.mixture.space().dims()
    }
}
