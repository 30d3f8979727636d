//! Run configuration: JSON file, `--set` overrides, paper-default values.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zzest::model::{FeedbackChannels, SystemParams};

use crate::CliError;

/// Experiment identifiers accepted by `reproduce`.
pub const EXPERIMENTS: &[&str] = &[
    "fig1", "fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b",
    "fig7a", "fig7b", "fig9", "table1", "custom",
];

/// All tunable inputs with their default values. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<String>,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: f64,
    pub g_true: f64,
    pub lambda: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "M")]
    pub segments: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub clip: Option<f64>,
    #[serde(rename = "N")]
    pub batches: usize,
    #[serde(rename = "R")]
    pub copies: usize,
    pub seed: Option<u64>,
    pub scheme: String,
    pub sample_kind: String,
    pub feedback_channels: String,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            omega1: 1.0,
            omega2: 1.0,
            gamma: 0.05,
            g_true: 0.1,
            lambda: FRAC_PI_2,
            eta: 1.0,
            t_final: 80.0,
            segments: 100,
            epsilon: 0.01,
            iterations: 500,
            clip: Some(0.2),
            batches: 20,
            copies: 100,
            seed: None,
            scheme: "none".into(),
            sample_kind: "perfect".into(),
            feedback_channels: "first".into(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Apply one `key=value` override.
    pub fn apply_set(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{spec}' is not key=value")))?;
        let bad = |e: String| CliError::Config(format!("override '{key}': {e}"));
        match key {
            "omega1" => self.omega1 = parse_f64(value).map_err(bad)?,
            "omega2" => self.omega2 = parse_f64(value).map_err(bad)?,
            "gamma" => self.gamma = parse_f64(value).map_err(bad)?,
            "g_true" => self.g_true = parse_f64(value).map_err(bad)?,
            "lambda" => self.lambda = parse_f64(value).map_err(bad)?,
            "eta" => self.eta = parse_f64(value).map_err(bad)?,
            "T" => self.t_final = parse_f64(value).map_err(bad)?,
            "M" => self.segments = parse_usize(value).map_err(bad)?,
            "epsilon" => self.epsilon = parse_f64(value).map_err(bad)?,
            "iterations" => self.iterations = parse_usize(value).map_err(bad)?,
            "clip" => {
                self.clip = if value == "none" {
                    None
                } else {
                    Some(parse_f64(value).map_err(bad)?)
                }
            }
            "N" => self.batches = parse_usize(value).map_err(bad)?,
            "R" => self.copies = parse_usize(value).map_err(bad)?,
            "seed" => self.seed = Some(parse_u64(value).map_err(bad)?),
            "scheme" => self.scheme = value.to_string(),
            "sample_kind" => self.sample_kind = value.to_string(),
            "feedback_channels" => self.feedback_channels = value.to_string(),
            "out_dir" => self.out_dir = Some(value.to_string()),
            other => return Err(CliError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.gamma < 0.0 {
            return Err(CliError::Config("gamma must be nonnegative".into()));
        }
        if !(self.t_final > 0.0) || self.segments == 0 {
            return Err(CliError::Config("need T > 0 and M >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(CliError::Config("eta must lie in [0, 1]".into()));
        }
        if !(0.0..=2.0 * std::f64::consts::PI).contains(&self.lambda) {
            return Err(CliError::Config("lambda must lie in [0, 2pi]".into()));
        }
        if self.batches == 0 || self.copies == 0 {
            return Err(CliError::Config("need N >= 1 and R >= 1".into()));
        }
        self.channels()?;
        self.scheme_kind()?;
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        SystemParams::new(self.omega1, self.omega2, self.g_true, self.gamma, self.gamma)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn channels(&self) -> Result<FeedbackChannels, CliError> {
        match self.feedback_channels.as_str() {
            "first" => Ok(FeedbackChannels::First),
            "both" => Ok(FeedbackChannels::Both),
            other => Err(CliError::Config(format!(
                "feedback_channels must be 'first' or 'both', got '{other}'"
            ))),
        }
    }

    pub fn scheme_kind(&self) -> Result<(zzest::bayes::Scheme, zzest::bayes::SampleKind), CliError> {
        let scheme = match self.scheme.as_str() {
            "none" => zzest::bayes::Scheme::None,
            "feedback" => zzest::bayes::Scheme::Feedback,
            "hybrid" => zzest::bayes::Scheme::Hybrid,
            other => {
                return Err(CliError::Config(format!(
                    "scheme must be none|feedback|hybrid, got '{other}'"
                )))
            }
        };
        let kind = match self.sample_kind.as_str() {
            "perfect" => zzest::bayes::SampleKind::Perfect,
            "imperfect" => zzest::bayes::SampleKind::Imperfect,
            other => {
                return Err(CliError::Config(format!(
                    "sample_kind must be perfect|imperfect, got '{other}'"
                )))
            }
        };
        Ok((scheme, kind))
    }
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_usize(value: &str) -> Result<usize, String> {
    value.parse::<usize>().map_err(|e| e.to_string())
}

fn parse_u64(value: &str) -> Result<u64, String> {
    value.parse::<u64>().map_err(|e| e.to_string())
}
