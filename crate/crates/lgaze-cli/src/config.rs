//! Run configuration: a JSON file merged with command-line overrides and
//! the `LGAZE_DATA_ROOT` environment variable.

use anyhow::{Context, Result};
use lgaze::data::{SplitSpec, SynthConfig};
use lgaze::features::HeadAnchorMode;
use lgaze::gbt::GbtConfig;
use lgaze::geometry::NormalizedCamera;
use lgaze::pnp::PnpConfig;
use lgaze::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Name of the environment variable pointing at the dataset root.
pub const DATA_ROOT_ENV: &str = "LGAZE_DATA_ROOT";

/// Fully resolved run configuration; echoed into every output artifact.
/// Unknown keys in the file are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub norm_camera: NormalizedCamera,
    pub head_anchor_mode: HeadAnchorMode,
    pub pnp: PnpConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub train_holistic: Option<TrainConfig>,
    pub gbt: GbtConfig,
    pub split: Option<SplitSpec>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        if cfg.threads == 0 {
            cfg.threads = 1;
        }
        Ok(cfg)
    }

    /// Training config for a model kind (the holistic override carries the
    /// higher initial learning rate unless the file pins one).
    pub fn train_for(&self, kind: lgaze::model::ModelKind) -> TrainConfig {
        match kind {
            lgaze::model::ModelKind::Holistic => {
                self.train_holistic.unwrap_or(TrainConfig { lr0: 1e-1, ..self.train })
            }
            _ => self.train,
        }
    }
}

/// Resolve a data path against `LGAZE_DATA_ROOT` when it is relative and
/// does not exist as given.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}
