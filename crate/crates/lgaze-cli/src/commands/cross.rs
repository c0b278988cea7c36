use crate::config::RunConfig;
use crate::{data_err, numerical_err, CliError};
use lgaze::evaluation::{cross_domain_matrix, DatasetEval};
use lgaze::model::GazeEstimator;
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// Trained model checkpoints (one per training dataset).
    #[arg(long, required = true, num_args = 1..)]
    model_files: Vec<PathBuf>,
    /// Datasets as `tag=path.jsonl` pairs; the tag must match the records.
    #[arg(long, required = true, num_args = 1..)]
    datasets: Vec<String>,
    /// Output directory for the grid artifacts.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let mut models = Vec::with_capacity(args.model_files.len());
    for p in &args.model_files {
        models.push(GazeEstimator::load(p).map_err(data_err)?);
    }

    let mut datasets = Vec::with_capacity(args.datasets.len());
    for spec in &args.datasets {
        let (tag, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--datasets entry '{spec}' is not tag=path")))?;
        let records = super::load_dataset(&PathBuf::from(path))?;
        let ds = super::split_dataset(records.clone(), cfg)?;
        datasets.push(DatasetEval { tag: tag.to_string(), full: records, test: ds.test });
    }

    let grid = cross_domain_matrix(&models, &datasets).map_err(|e| match e {
        lgaze::evaluation::EvalError::MissingModel(_) | lgaze::evaluation::EvalError::EmptySet => data_err(e),
        other => numerical_err(other),
    })?;

    print!("{grid}");
    std::fs::create_dir_all(&args.out_dir).map_err(data_err)?;
    let kinds: Vec<String> = models.iter().map(|m| m.kind().to_string()).collect();
    let stem = format!("cross_{}_seed{}", kinds.join("-"), cfg.seed);
    let json_path = args.out_dir.join(format!("{stem}.json"));
    super::write_artifact(&json_path, &grid, cfg)?;
    let table_path = args.out_dir.join(format!("{stem}.txt"));
    std::fs::write(&table_path, grid.to_string()).map_err(data_err)?;
    println!("grid -> {} and {}", json_path.display(), table_path.display());
    Ok(())
}
