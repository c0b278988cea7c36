use crate::config::RunConfig;
use crate::{data_err, CliError};
use lgaze::data::{
    load_raw_records, load_records, normalize_record, save_records, PoseSource,
};
use lgaze::pnp::CanonicalFaceModel;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Solve the head pose from scratch.
    Solve,
    /// Trust the dataset-provided pose.
    Provided,
    /// Refine the provided pose by reprojection.
    ProvidedAsInit,
    /// Records are already normalized; validate and pass through.
    Prenormalized,
}

#[derive(clap::Args)]
pub struct Args {
    /// Input JSONL (raw schema, or records schema for --mode prenormalized).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output JSONL of normalized records.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON path (defaults next to the output).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Canonical 3D face model JSON; defaults to the built-in model.
    #[arg(long)]
    face_model: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct Summary {
    records_in: usize,
    records_out: usize,
    pose_failures: usize,
    retention_rate: f64,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    let input = crate::config::resolve_data_path(&args.input);
    let model = match &args.face_model {
        Some(p) => CanonicalFaceModel::load_json(p).map_err(data_err)?,
        None => CanonicalFaceModel::anthropometric(),
    };

    let (records_in, out_records, failures) = match args.mode {
        Mode::Prenormalized => {
            let records = load_records(&input).map_err(data_err)?;
            let n = records.len();
            (n, records, 0usize)
        }
        _ => {
            let source = match args.mode {
                Mode::Solve => PoseSource::Solve,
                Mode::Provided => PoseSource::Provided,
                Mode::ProvidedAsInit => PoseSource::ProvidedAsInit,
                Mode::Prenormalized => unreachable!(),
            };
            let raw = load_raw_records(&input).map_err(data_err)?;
            let n = raw.len();
            let mut ok = Vec::with_capacity(n);
            let mut failures = 0usize;
            for r in &raw {
                match normalize_record(r, source, &cfg.norm_camera, &model, &cfg.pnp) {
                    Ok(rec) => ok.push(rec),
                    Err(e) => {
                        log::warn!("{}/{} frame {}: {e}", r.dataset, r.subject, r.frame);
                        failures += 1;
                    }
                }
            }
            (n, ok, failures)
        }
    };

    save_records(&args.out, &out_records).map_err(data_err)?;
    let retention = if records_in == 0 { 0.0 } else { out_records.len() as f64 / records_in as f64 };
    let summary = Summary {
        records_in,
        records_out: out_records.len(),
        pose_failures: failures,
        retention_rate: retention,
    };
    let summary_path = args.summary.unwrap_or_else(|| args.out.with_extension("summary.json"));
    super::write_artifact(&summary_path, &summary, cfg)?;
    println!(
        "normalized {}/{} records ({:.2}% retention, {} pose failures) -> {}",
        out_records.len(),
        records_in,
        retention * 100.0,
        failures,
        args.out.display()
    );
    Ok(())
}
