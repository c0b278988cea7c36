use crate::config::RunConfig;
use crate::{numerical_err, CliError};
use lgaze::features::{GLOBAL_DIM, SIAMESE_DIM};
use lgaze::neural::{angular_loss_and_grad, GazeMlp, HolisticMlp, MlpArch, SiameseMlp};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(clap::Args)]
pub struct Args {
    /// Randomly sampled parameters to probe per architecture.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Relative-error threshold for failure.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

/// Worst relative error between the analytic gradient and central finite
/// differences of the angular loss, over randomly probed parameters.
fn max_relative_error<M: GazeMlp>(
    model: &mut M,
    batch: usize,
    samples: usize,
    seed: u64,
) -> Result<f64, lgaze::neural::NeuralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((batch, model.input_dim()), |_| rng.gen_range(-0.5..0.5));
    let t = {
        let mut t = Array2::<f64>::zeros((batch, 3));
        for i in 0..batch {
            let v = lgaze::geometry::Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..=-0.2),
            )
            .normalize();
            t[[i, 0]] = v.x;
            t[[i, 1]] = v.y;
            t[[i, 2]] = v.z;
        }
        t
    };

    let (out, tape) = model.forward_eval_taped(x.view())?;
    let (_, d_pred) = angular_loss_and_grad(&out, &t)?;
    model.zero_grads();
    model.backward(&tape, &d_pred)?;
    let analytic = model.flat_grads();

    let mut params = model.flat_params();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let idx = rng.gen_range(0..params.len());
        let orig = params[idx];
        params[idx] = orig + eps;
        model.set_flat_params(&params)?;
        let (lp, _) = angular_loss_and_grad(&model.forward_eval(x.view())?, &t)?;
        params[idx] = orig - eps;
        model.set_flat_params(&params)?;
        let (lm, _) = angular_loss_and_grad(&model.forward_eval(x.view())?, &t)?;
        params[idx] = orig;
        let fd = (lp - lm) / (2.0 * eps);
        let scale = fd.abs().max(analytic[idx].abs()).max(1e-7);
        worst = worst.max((fd - analytic[idx]).abs() / scale);
    }
    model.set_flat_params(&params)?;
    Ok(worst)
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<(), CliError> {
    debug_assert!(GLOBAL_DIM == 40 && SIAMESE_DIM == 42);
    let mut failures = Vec::new();

    let mut holistic = HolisticMlp::init(&MlpArch::holistic_default(), cfg.seed);
    let err = max_relative_error(&mut holistic, 16, args.samples, cfg.seed ^ 0x1)
        .map_err(numerical_err)?;
    println!(
        "holistic: max relative gradient error {err:.3e} over {} sampled parameters -> {}",
        args.samples,
        if err < args.tolerance { "PASS" } else { "FAIL" }
    );
    if err >= args.tolerance {
        failures.push(("holistic", err));
    }

    let mut siamese = SiameseMlp::init(&MlpArch::siamese_default(), cfg.seed);
    let err = max_relative_error(&mut siamese, 16, args.samples, cfg.seed ^ 0x2)
        .map_err(numerical_err)?;
    println!(
        "siamese: max relative gradient error {err:.3e} over {} sampled parameters -> {}",
        args.samples,
        if err < args.tolerance { "PASS" } else { "FAIL" }
    );
    if err >= args.tolerance {
        failures.push(("siamese", err));
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(numerical_err(anyhow::anyhow!(
            "gradient check failed: {}",
            failures
                .iter()
                .map(|(a, e)| format!("{a} ({e:.3e})"))
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }
}
