//! Configuration file loading and flag overrides.

use std::path::Path;

use serde::Deserialize;
use storyground::metrics::MatchConfig;
use storyground::preference::DEFAULT_MIN_MARGIN;
use storyground::RewardConfig;

use crate::args::RewardFlags;
use crate::CliError;

pub const CONFIG_ENV: &str = "GROUND_REWARD_CONFIG";

/// Contents of the optional JSON file named by `GROUND_REWARD_CONFIG`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub reward: RewardConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub min_margin: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn from_env() -> Result<Self, CliError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => Self::load(Path::new(&path)),
            _ => Ok(Self::default()),
        }
    }
}

/// Applies flag overrides. When only one weight of a pair that must sum to
/// one is given, its partner becomes the complement.
pub fn apply_reward_flags(
    mut cfg: RewardConfig,
    flags: &RewardFlags,
) -> Result<RewardConfig, CliError> {
    fn pair(a: &mut f64, b: &mut f64, fa: Option<f64>, fb: Option<f64>) {
        match (fa, fb) {
            (Some(x), Some(y)) => (*a, *b) = (x, y),
            (Some(x), None) => (*a, *b) = (x, 1.0 - x),
            (None, Some(y)) => (*a, *b) = (1.0 - y, y),
            (None, None) => {}
        }
    }
    pair(
        &mut cfg.alpha,
        &mut cfg.beta_reid,
        flags.alpha,
        flags.beta_reid,
    );
    pair(&mut cfg.gamma, &mut cfg.delta, flags.gamma, flags.delta);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn match_config(file: &FileConfig, iou: Option<f64>) -> Result<MatchConfig, CliError> {
    let mut cfg = file.matching;
    if let Some(t) = iou {
        cfg.iou_threshold = t;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn min_margin(file: &FileConfig, flag: Option<f64>) -> Result<f64, CliError> {
    let m = flag.or(file.min_margin).unwrap_or(DEFAULT_MIN_MARGIN);
    if m.is_finite() && m >= 0.0 {
        Ok(m)
    } else {
        Err(CliError::Usage(format!(
            "min margin {m} must be a non-negative number"
        )))
    }
}
