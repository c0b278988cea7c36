use crate::config::RunConfig;
use crate::{data_err, numerical_err, CliError};
use lgaze::evaluation::evaluate;
use lgaze::gbt::fit_multi_threaded;
use lgaze::model::{featurize_records, gaze_targets, GazeEstimator, ModelBody, ModelKind, ModelMeta};
use lgaze::neural::{HolisticMlp, MlpArch, SiameseMlp};
use lgaze::training::{train, validation_mae_deg, TrainError};
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// Normalized dataset JSONL.
    #[arg(long)]
    data: PathBuf,
    /// Model kind: holistic | siamese | gbt.
    #[arg(long)]
    model: ModelKindArg,
    /// Output directory for the checkpoint and the training report.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone)]
pub struct ModelKindArg(pub ModelKind);

impl std::str::FromStr for ModelKindArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(ModelKindArg)
    }
}

#[derive(serde::Serialize)]
struct GbtSummary {
    train_mae_deg: f64,
    val_mae_deg: f64,
    wall_time_s: f64,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let kind = args.model.0;
    let records = super::load_dataset(&args.data)?;
    let tag = super::dataset_tag(&records);
    let ds = super::split_dataset(records, cfg)?;
    std::fs::create_dir_all(&args.out_dir).map_err(data_err)?;

    let meta = ModelMeta {
        kind,
        train_dataset: tag.clone(),
        seed: cfg.seed,
        head_anchor_mode: cfg.head_anchor_mode,
        normalized_width: cfg.norm_camera.width,
    };
    let stem = format!("{kind}_{tag}_seed{}", cfg.seed);

    let x_train = featurize_records(kind, &ds.train, cfg.head_anchor_mode, cfg.norm_camera.width);
    let t_train = gaze_targets(&ds.train);
    let x_val = featurize_records(kind, &ds.val, cfg.head_anchor_mode, cfg.norm_camera.width);
    let t_val = gaze_targets(&ds.val);

    let model_path = args.out_dir.join(format!("model_{stem}.json"));
    let report_path = args.out_dir.join(format!("train_{stem}.json"));

    match kind {
        ModelKind::Gbt => {
            let started = std::time::Instant::now();
            let targets: Vec<lgaze::geometry::Vec3> = ds.train.iter().map(|r| r.gaze_norm).collect();
            let gbt = fit_multi_threaded(x_train.view(), &targets, &cfg.gbt, cfg.threads)
                .map_err(numerical_err)?;
            let estimator = GazeEstimator { meta, body: ModelBody::Gbt(gbt) };
            let train_eval = evaluate(&estimator, &ds.train, &tag).map_err(numerical_err)?;
            let val_eval = evaluate(&estimator, &ds.val, &tag).map_err(numerical_err)?;
            estimator.save(&model_path).map_err(data_err)?;
            super::write_artifact(
                &report_path,
                &GbtSummary {
                    train_mae_deg: train_eval.mae_deg,
                    val_mae_deg: val_eval.mae_deg,
                    wall_time_s: started.elapsed().as_secs_f64(),
                },
                cfg,
            )?;
            println!(
                "gbt[{tag}]: {} trees x3, train MAE {:.3} deg, val MAE {:.3} deg",
                cfg.gbt.n_trees, train_eval.mae_deg, val_eval.mae_deg
            );
        }
        ModelKind::Holistic | ModelKind::Siamese => {
            let train_cfg = {
                let mut c = cfg.train_for(kind);
                c.seed = cfg.seed;
                c
            };
            let map_train_err = |e: TrainError| match e {
                TrainError::DivergedLoss { .. } | TrainError::Neural(_) => numerical_err(e),
                other => data_err(other),
            };
            let (report, body) = match kind {
                ModelKind::Holistic => {
                    let mut m = HolisticMlp::init(&MlpArch::holistic_default(), cfg.seed);
                    let r = train(&mut m, x_train.view(), t_train.view(), x_val.view(), t_val.view(), &train_cfg)
                        .map_err(map_train_err)?;
                    (r, ModelBody::Holistic(m))
                }
                _ => {
                    let mut m = SiameseMlp::init(&MlpArch::siamese_default(), cfg.seed);
                    let r = train(&mut m, x_train.view(), t_train.view(), x_val.view(), t_val.view(), &train_cfg)
                        .map_err(map_train_err)?;
                    (r, ModelBody::Siamese(m))
                }
            };
            let estimator = GazeEstimator { meta, body };
            estimator.save(&model_path).map_err(data_err)?;
            super::write_artifact(&report_path, &report, cfg)?;
            // Sanity: the restored checkpoint reproduces the reported best.
            let check = match &estimator.body {
                ModelBody::Holistic(m) => validation_mae_deg(m, x_val.view(), t_val.view()),
                ModelBody::Siamese(m) => validation_mae_deg(m, x_val.view(), t_val.view()),
                ModelBody::Gbt(_) => unreachable!(),
            }
            .map_err(numerical_err)?;
            println!(
                "{kind}[{tag}]: {} epochs, best val MAE {:.3} deg at epoch {} (checkpoint {:.3})",
                report.epochs_run, report.best_val_mae_deg, report.best_epoch, check
            );
        }
    }
    println!("model -> {}", model_path.display());
    println!("report -> {}", report_path.display());
    Ok(())
}
