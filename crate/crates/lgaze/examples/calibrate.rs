// Scratch measurement harness for sizing the acceptance thresholds.
// Run: cargo run --release -p lgaze --example calibrate -- [stage]

use lgaze::data::{generate_synthetic, split, SplitSpec, SynthConfig};
use lgaze::gbt::{fit_multi_threaded, GbtConfig};
use lgaze::model::{featurize_records, gaze_targets, ModelKind};
use lgaze::neural::{HolisticMlp, MlpArch, SiameseMlp};
use lgaze::training::{train, validation_mae_deg, TrainConfig};
use std::time::Instant;

fn main() {
    let stage = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if stage == "pnp" || stage == "all" {
        pnp_noise();
    }
    if stage == "learn" || stage == "all" {
        learnability();
    }
    if stage == "noisy" || stage == "all" {
        noisy_ordering(1);
    }
}

fn pnp_noise() {
    use lgaze::geometry::{CameraIntrinsics, HeadPose, Vec2, Vec3};
    use lgaze::landmarks::{LandmarkSet, LANDMARK_COUNT};
    use lgaze::pnp::{estimate_head_pose, project_points, CanonicalFaceModel, PnpConfig};
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    let model = CanonicalFaceModel::anthropometric();
    let k = CameraIntrinsics::new(1100.0, 1100.0, 640.0, 480.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut errors = Vec::new();
    let t0 = Instant::now();
    for _ in 0..500 {
        let axis = loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 {
                break v.normalize();
            }
        };
        let angle: f64 = rng.gen_range(0.0..40f64.to_radians());
        let rotation = UnitQuaternion::from_scaled_axis(axis * angle).to_rotation_matrix().into_inner();
        let translation = Vec3::new(rng.gen_range(-80.0..80.0), rng.gen_range(-60.0..60.0), rng.gen_range(350.0..650.0));
        let pose = HeadPose { rotation, translation };
        let projected = project_points(&model, &pose, &k).unwrap();
        let mut pts = [Vec2::zeros(); LANDMARK_COUNT];
        for (&(slot, _), uv) in model.points().iter().zip(projected.iter()) {
            pts[slot] = *uv + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        let lm = LandmarkSet::new(pts);
        let res = estimate_head_pose(&lm, &model, &k, &PnpConfig::default(), None).unwrap();
        let rel = res.pose.rotation.transpose() * pose.rotation;
        let ang = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees();
        errors.push(ang);
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "pnp sigma=1px: median rot err {:.4} deg, p90 {:.4}, max {:.4}  ({:.2?})",
        errors[250],
        errors[450],
        errors[499],
        t0.elapsed()
    );
}

fn datasets(noise: f64, seed: u64, n: usize, subjects: usize) -> lgaze::data::DatasetSplit {
    let cfg = SynthConfig {
        n_samples: n,
        n_subjects: subjects,
        pixel_noise: noise,
        seed,
        ..SynthConfig::default()
    };
    let t0 = Instant::now();
    let records = generate_synthetic(&cfg).unwrap();
    println!("generated {} records in {:.2?}", records.len(), t0.elapsed());
    // subjects s0000.. round robin; 40/4/8 split by numeric id
    let spec = SplitSpec::SubjectRanges {
        train: (0, (subjects - 13) as u32),
        val: ((subjects - 12) as u32, (subjects - 9) as u32),
        test: ((subjects - 8) as u32, (subjects - 1) as u32),
    };
    split(records, &spec).unwrap()
}

fn learnability() {
    let ds = datasets(0.0, 7, 65_000, 52);
    println!("split sizes: train {} val {} test {}", ds.train.len(), ds.val.len(), ds.test.len());

    // Siamese
    let t0 = Instant::now();
    let x_tr = featurize_records(ModelKind::Siamese, &ds.train, Default::default(), 448.0);
    let t_tr = gaze_targets(&ds.train);
    let x_val = featurize_records(ModelKind::Siamese, &ds.val, Default::default(), 448.0);
    let t_val = gaze_targets(&ds.val);
    let x_te = featurize_records(ModelKind::Siamese, &ds.test, Default::default(), 448.0);
    let t_te = gaze_targets(&ds.test);
    println!("featurize {:.2?}", t0.elapsed());

    let mut model = SiameseMlp::init(&MlpArch::siamese_default(), 1);
    let cfg = TrainConfig { max_epochs: 25, seed: 1, ..TrainConfig::siamese_default() };
    let t0 = Instant::now();
    let report = train(&mut model, x_tr.view(), t_tr.view(), x_val.view(), t_val.view(), &cfg).unwrap();
    let test_mae = validation_mae_deg(&model, x_te.view(), t_te.view()).unwrap();
    println!(
        "siamese: {} epochs in {:.1?} ({:.2?}/epoch), best val {:.3}, TEST {:.3} deg",
        report.epochs_run,
        t0.elapsed(),
        t0.elapsed() / report.epochs_run as u32,
        report.best_val_mae_deg,
        test_mae
    );
    println!("  val trace: {:?}", &report.val_mae_deg);

    // Holistic
    let x_tr = featurize_records(ModelKind::Holistic, &ds.train, Default::default(), 448.0);
    let x_val = featurize_records(ModelKind::Holistic, &ds.val, Default::default(), 448.0);
    let x_te = featurize_records(ModelKind::Holistic, &ds.test, Default::default(), 448.0);
    let mut model = HolisticMlp::init(&MlpArch::holistic_default(), 1);
    let cfg = TrainConfig { max_epochs: 60, seed: 1, ..TrainConfig::holistic_default() };
    let t0 = Instant::now();
    match train(&mut model, x_tr.view(), t_tr.view(), x_val.view(), t_val.view(), &cfg) {
        Ok(report) => {
            let test_mae = validation_mae_deg(&model, x_te.view(), t_te.view()).unwrap();
            println!(
                "holistic: {} epochs in {:.1?} ({:.2?}/epoch), best val {:.3}, TEST {:.3} deg",
                report.epochs_run,
                t0.elapsed(),
                t0.elapsed() / report.epochs_run as u32,
                report.best_val_mae_deg,
                test_mae
            );
            println!("  val trace: {:?}", &report.val_mae_deg);
            println!("  lr trace: {:?}", &report.lr_trace);
        }
        Err(e) => println!("holistic FAILED: {e}"),
    }

    // GBT 300 trees
    let targets: Vec<lgaze::geometry::Vec3> = ds.train.iter().map(|r| r.gaze_norm).collect();
    let cfg = GbtConfig { n_trees: 300, seed: 1, ..GbtConfig::default() };
    let t0 = Instant::now();
    let gbt = fit_multi_threaded(x_tr.view(), &targets, &cfg, 2).unwrap();
    println!("gbt fit 300x3 trees in {:.1?}", t0.elapsed());
    let mut errs = Vec::new();
    let mut base_errs = Vec::new();
    let mean: lgaze::geometry::Vec3 = targets.iter().sum::<lgaze::geometry::Vec3>() / targets.len() as f64;
    for (i, r) in ds.test.iter().enumerate() {
        let row: Vec<f64> = x_te.row(i).to_vec();
        let p = gbt.predict(&row).unwrap();
        errs.push(lgaze::geometry::angular_error_deg(&p, &r.gaze_norm).unwrap());
        base_errs.push(lgaze::geometry::angular_error_deg(&mean, &r.gaze_norm).unwrap());
    }
    let mae = errs.iter().sum::<f64>() / errs.len() as f64;
    let base_mae = base_errs.iter().sum::<f64>() / base_errs.len() as f64;
    println!("gbt TEST {:.3} deg, mean-predictor baseline {:.3} deg", mae, base_mae);
}

fn noisy_ordering(seeds: u64) {
    let ds = datasets(1.0, 11, 16_000, 16);
    for seed in 0..seeds {
        let x_tr_g = featurize_records(ModelKind::Holistic, &ds.train, Default::default(), 448.0);
        let x_val_g = featurize_records(ModelKind::Holistic, &ds.val, Default::default(), 448.0);
        let x_te_g = featurize_records(ModelKind::Holistic, &ds.test, Default::default(), 448.0);
        let x_tr_s = featurize_records(ModelKind::Siamese, &ds.train, Default::default(), 448.0);
        let x_val_s = featurize_records(ModelKind::Siamese, &ds.val, Default::default(), 448.0);
        let x_te_s = featurize_records(ModelKind::Siamese, &ds.test, Default::default(), 448.0);
        let t_tr = gaze_targets(&ds.train);
        let t_val = gaze_targets(&ds.val);
        let t_te = gaze_targets(&ds.test);

        let mut siamese = SiameseMlp::init(&MlpArch::siamese_default(), seed);
        let cfg = TrainConfig { max_epochs: 40, seed, ..TrainConfig::siamese_default() };
        let t0 = Instant::now();
        let rep = train(&mut siamese, x_tr_s.view(), t_tr.view(), x_val_s.view(), t_val.view(), &cfg).unwrap();
        let s_mae = validation_mae_deg(&siamese, x_te_s.view(), t_te.view()).unwrap();
        println!("seed {seed} siamese: {:.3} deg ({} ep, {:.1?})", s_mae, rep.epochs_run, t0.elapsed());

        let mut holistic = HolisticMlp::init(&MlpArch::holistic_default(), seed);
        let cfg = TrainConfig { max_epochs: 25, seed, ..TrainConfig::holistic_default() };
        let t0 = Instant::now();
        let rep = train(&mut holistic, x_tr_g.view(), t_tr.view(), x_val_g.view(), t_val.view(), &cfg).unwrap();
        let h_mae = validation_mae_deg(&holistic, x_te_g.view(), t_te.view()).unwrap();
        println!("seed {seed} holistic: {:.3} deg ({} ep, {:.1?})", h_mae, rep.epochs_run, t0.elapsed());

        let targets: Vec<lgaze::geometry::Vec3> = ds.train.iter().map(|r| r.gaze_norm).collect();
        let cfg = GbtConfig { n_trees: 300, seed, ..GbtConfig::default() };
        let t0 = Instant::now();
        let gbt = fit_multi_threaded(x_tr_g.view(), &targets, &cfg, 2).unwrap();
        let mut total = 0.0;
        for (i, r) in ds.test.iter().enumerate() {
            let row: Vec<f64> = x_te_g.row(i).to_vec();
            let p = gbt.predict(&row).unwrap();
            total += lgaze::geometry::angular_error_deg(&p, &r.gaze_norm).unwrap();
        }
        println!("seed {seed} gbt: {:.3} deg ({:.1?})", total / ds.test.len() as f64, t0.elapsed());
    }
}
