use crate::config::RunConfig;
use crate::{data_err, CliError};
use lgaze::data::{generate_synthetic, save_records};
use std::path::PathBuf;

#[derive(clap::Args)]
pub struct Args {
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Number of samples (overrides the config).
    #[arg(long)]
    n: Option<usize>,
    /// Number of synthetic subjects.
    #[arg(long)]
    subjects: Option<usize>,
    /// Pixel noise sigma (px).
    #[arg(long)]
    noise: Option<f64>,
    /// Per-subject shape jitter (mm).
    #[arg(long)]
    jitter: Option<f64>,
    /// Dataset tag stored in every record.
    #[arg(long)]
    tag: Option<String>,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let mut synth = cfg.synth.clone();
    synth.norm_camera = cfg.norm_camera;
    if let Some(n) = args.n {
        synth.n_samples = n;
    }
    if let Some(s) = args.subjects {
        synth.n_subjects = s;
    }
    if let Some(noise) = args.noise {
        synth.pixel_noise = noise;
    }
    if let Some(j) = args.jitter {
        synth.shape_jitter_mm = j;
    }
    if let Some(tag) = args.tag {
        synth.dataset_tag = tag;
    }

    let records = generate_synthetic(&synth).map_err(data_err)?;
    save_records(&args.out, &records).map_err(data_err)?;

    #[derive(serde::Serialize)]
    struct Summary {
        records: usize,
        subjects: usize,
        dataset: String,
        output: String,
    }
    let summary_path = args.out.with_extension("summary.json");
    let mut echo = cfg.clone();
    echo.synth = synth.clone();
    super::write_artifact(
        &summary_path,
        &Summary {
            records: records.len(),
            subjects: synth.n_subjects,
            dataset: synth.dataset_tag.clone(),
            output: args.out.display().to_string(),
        },
        &echo,
    )?;
    println!(
        "wrote {} records ({} subjects, tag '{}') to {}",
        records.len(),
        synth.n_subjects,
        synth.dataset_tag,
        args.out.display()
    );
    Ok(())
}
