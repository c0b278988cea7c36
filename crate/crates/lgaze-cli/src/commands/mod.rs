pub mod cross;
pub mod eval;
pub mod gradcheck;
pub mod normalize;
pub mod pfi;
pub mod synth;
pub mod train;

use crate::config::RunConfig;
use crate::{data_err, CliError};
use lgaze::data::{load_records, split, DatasetSplit, GazeRecord, SplitSpec};
use std::path::Path;

/// Load a normalized dataset, resolving against the data root.
pub fn load_dataset(path: &Path) -> Result<Vec<GazeRecord>, CliError> {
    let resolved = crate::config::resolve_data_path(path);
    load_records(&resolved).map_err(data_err)
}

/// Split with the configured spec, defaulting to a random 80/10/10 subject
/// split derived from the run seed.
pub fn split_dataset(records: Vec<GazeRecord>, cfg: &RunConfig) -> Result<DatasetSplit, CliError> {
    let spec = cfg.split.clone().unwrap_or(SplitSpec::RandomBySubject {
        train_frac: 0.8,
        val_frac: 0.1,
        seed: cfg.seed,
    });
    split(records, &spec).map_err(data_err)
}

/// Dataset tag of a record batch (they share one by construction).
pub fn dataset_tag(records: &[GazeRecord]) -> String {
    records.first().map(|r| r.dataset.clone()).unwrap_or_else(|| "unknown".into())
}

/// Write a JSON artifact with the resolved configuration embedded.
pub fn write_artifact<T: serde::Serialize>(
    path: &Path,
    payload: &T,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    #[derive(serde::Serialize)]
    struct Artifact<'a, T> {
        config: &'a RunConfig,
        #[serde(flatten)]
        payload: T,
    }
    let text = serde_json::to_string_pretty(&Artifact { config: cfg, payload })
        .map_err(|e| data_err(anyhow::anyhow!(e)))?;
    std::fs::write(path, text).map_err(data_err)?;
    Ok(())
}
