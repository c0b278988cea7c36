use crate::config::RunConfig;
use crate::{data_err, numerical_err, CliError};
use lgaze::evaluation::evaluate;
use lgaze::model::GazeEstimator;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitRole {
    /// The held-out test split of the configured split spec.
    Test,
    /// The validation split.
    Val,
    /// Every record in the file.
    Full,
}

#[derive(clap::Args)]
pub struct Args {
    /// Trained model checkpoint.
    #[arg(long)]
    model_file: PathBuf,
    /// Normalized dataset JSONL.
    #[arg(long)]
    data: PathBuf,
    /// Which part of the dataset to evaluate on.
    #[arg(long, value_enum, default_value_t = SplitRole::Test)]
    split_role: SplitRole,
    /// Report JSON path (defaults into the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let model = GazeEstimator::load(&args.model_file).map_err(data_err)?;
    let records = super::load_dataset(&args.data)?;
    let tag = super::dataset_tag(&records);
    let subset = match args.split_role {
        SplitRole::Full => records,
        role => {
            let ds = super::split_dataset(records, cfg)?;
            match role {
                SplitRole::Test => ds.test,
                SplitRole::Val => ds.val,
                SplitRole::Full => unreachable!(),
            }
        }
    };

    let report = evaluate(&model, &subset, &tag).map_err(numerical_err)?;
    println!(
        "{} (trained on {}) vs {} [{:?}]: MAE {:.3} deg (SD {:.3}) over {} samples",
        report.model, report.train_dataset, report.test_dataset, args.split_role, report.mae_deg,
        report.sd_deg, report.n
    );

    let out = args.out.unwrap_or_else(|| {
        PathBuf::from(format!("eval_{}_{}_on_{}_seed{}.json", report.model, report.train_dataset, tag, cfg.seed))
    });
    super::write_artifact(&out, &report, cfg)?;
    println!("report -> {}", out.display());
    Ok(())
}
