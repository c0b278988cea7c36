use crate::config::RunConfig;
use crate::{data_err, numerical_err, CliError};
use lgaze::evaluation::{
    feature_groups, importance_with_permutation, per_sample_errors_deg, permutation_importance,
    GroupImportance, ImportanceReport,
};
use lgaze::model::GazeEstimator;
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// Trained model checkpoint.
    #[arg(long)]
    model_file: PathBuf,
    /// Normalized dataset JSONL; the validation split is used.
    #[arg(long)]
    data: PathBuf,
    /// Permutation repeats per feature group.
    #[arg(long, default_value_t = 1000)]
    repeats: usize,
    /// Self-check mode: force the identity permutation (all importances
    /// must come out exactly zero).
    #[arg(long)]
    identity: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let model = GazeEstimator::load(&args.model_file).map_err(data_err)?;
    let records = super::load_dataset(&args.data)?;
    let tag = super::dataset_tag(&records);
    let val = super::split_dataset(records, cfg)?.val;
    let groups = feature_groups(model.kind());

    let report = if args.identity {
        // Identity permutations leave the features untouched; any nonzero
        // importance is a defect, reported as a numerical failure.
        let x = model.featurize(&val);
        let targets: Vec<lgaze::geometry::Vec3> = val.iter().map(|r| r.gaze_norm).collect();
        let preds = model.predict_features(x.view()).map_err(numerical_err)?;
        let errors = per_sample_errors_deg(&preds, &targets).map_err(numerical_err)?;
        let baseline = errors.iter().sum::<f64>() / errors.len() as f64;
        let identity: Vec<usize> = (0..val.len()).collect();
        let mut out = Vec::new();
        for g in &groups {
            let repeats: Vec<f64> = (0..args.repeats.max(1))
                .map(|_| importance_with_permutation(&model, x.view(), &targets, baseline, g, &identity))
                .collect::<Result<_, _>>()
                .map_err(numerical_err)?;
            if repeats.iter().any(|&v| v != 0.0) {
                return Err(numerical_err(anyhow::anyhow!(
                    "identity permutation produced nonzero importance for group '{}'",
                    g.name
                )));
            }
            out.push(GroupImportance { name: g.name.clone(), side: g.side, mean_deg: 0.0, sd_deg: 0.0, repeats });
        }
        ImportanceReport { baseline_mae_deg: baseline, n_repeats: args.repeats.max(1), groups: out }
    } else {
        permutation_importance(&model, &val, &groups, args.repeats, cfg.seed).map_err(numerical_err)?
    };

    println!("baseline MAE {:.3} deg over {} validation samples", report.baseline_mae_deg, val.len());
    for g in &report.groups {
        let label = match g.side {
            Some(lgaze::landmarks::Eye::Left) => format!("{} (L)", g.name),
            Some(lgaze::landmarks::Eye::Right) => format!("{} (R)", g.name),
            None => g.name.clone(),
        };
        println!("  {label:<22} I_f = {:+.4} deg (SD {:.4})", g.mean_deg, g.sd_deg);
    }

    std::fs::create_dir_all(&args.out_dir).map_err(data_err)?;
    let stem = format!("pfi_{}_{}_seed{}", model.kind(), tag, cfg.seed);
    let json_path = args.out_dir.join(format!("{stem}.json"));
    super::write_artifact(&json_path, &report, cfg)?;
    let csv_path = args.out_dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, report.to_csv()).map_err(data_err)?;
    println!("report -> {} and {}", json_path.display(), csv_path.display());
    Ok(())
}
