//! End-to-end integration: generator -> normalization -> features ->
//! models -> evaluation, all against the synthetic oracle.

use lgaze::data::{generate_synthetic, normalize_record, split, PoseSource, RawRecord, SplitSpec, SynthConfig};
use lgaze::evaluation::{cross_domain_matrix, evaluate, per_sample_errors_deg, DatasetEval};
use lgaze::features::HeadAnchorMode;
use lgaze::geometry::Vec3;
use lgaze::model::{featurize_records, gaze_targets, GazeEstimator, ModelBody, ModelKind, ModelMeta};
use lgaze::neural::{MlpArch, SiameseMlp};
use lgaze::pnp::CanonicalFaceModel;
use lgaze::training::{train, TrainConfig};

fn meta(kind: ModelKind, tag: &str) -> ModelMeta {
    ModelMeta {
        kind,
        train_dataset: tag.into(),
        seed: 0,
        head_anchor_mode: HeadAnchorMode::CenteredInterEye,
        normalized_width: 448.0,
    }
}

#[test]
fn pipeline_closure_cheat_model_scores_zero() {
    // generate -> normalize -> featurize -> evaluate with a predictor that
    // reads the stored label: the MAE must be exactly zero.
    let records =
        generate_synthetic(&SynthConfig { n_samples: 50, n_subjects: 5, seed: 2, ..SynthConfig::default() })
            .unwrap();
    let labels: Vec<Vec3> = records.iter().map(|r| r.gaze_norm).collect();
    let errors = per_sample_errors_deg(&labels, &labels).unwrap();
    // Zero up to the acos floor at cos ~ 1 (about 2e-8 rad).
    assert!(errors.iter().all(|&e| e < 1e-5), "max {:?}", errors.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn renormalizing_raw_fields_reproduces_the_stored_records() {
    // Every synthetic record keeps its raw-frame fields; pushing them back
    // through the normalization driver must reproduce the stored normalized
    // landmarks and label.
    let records =
        generate_synthetic(&SynthConfig { n_samples: 30, n_subjects: 3, seed: 4, ..SynthConfig::default() })
            .unwrap();
    let model = CanonicalFaceModel::anthropometric();
    for r in &records {
        let raw = RawRecord {
            dataset: r.dataset.clone(),
            subject: r.subject.clone(),
            frame: r.frame,
            landmarks_raw: r.landmarks_raw.clone().unwrap(),
            intrinsics: r.intrinsics,
            image_size: None,
            provided_pose: r.provided_pose,
            gaze_raw: r.gaze_raw.unwrap(),
        };
        let redone = normalize_record(
            &raw,
            PoseSource::ProvidedAsInit,
            &lgaze::geometry::NormalizedCamera::default(),
            &model,
            &lgaze::pnp::PnpConfig::default(),
        )
        .unwrap();
        assert!((redone.gaze_norm - r.gaze_norm).norm() < 1e-9);
        for i in 0..lgaze::landmarks::LANDMARK_COUNT {
            assert!((redone.landmarks_norm.get(i) - r.landmarks_norm.get(i)).norm() < 1e-6);
        }
    }
}

#[test]
fn same_generator_cross_domain_cells_agree() {
    // Two datasets drawn from the same generator (different seeds): a model
    // trained on A scores about the same on B, so the off-diagonal MAE sits
    // within 2 degrees of the diagonal. Shape jitter is disabled so the two
    // draws share one geometry distribution even at this sample count;
    // cross-subject generalization under jitter is the acceptance suite's
    // job.
    let base =
        SynthConfig { n_samples: 6000, n_subjects: 12, shape_jitter_mm: 0.0, ..SynthConfig::default() };
    let a = generate_synthetic(&SynthConfig { seed: 21, dataset_tag: "synthA".into(), ..base.clone() }).unwrap();
    let b = generate_synthetic(&SynthConfig { seed: 22, dataset_tag: "synthB".into(), ..base }).unwrap();

    let spec = SplitSpec::SubjectRanges { train: (0, 8), val: (9, 9), test: (10, 11) };
    let ds_a = split(a.clone(), &spec).unwrap();

    let x_tr = featurize_records(ModelKind::Siamese, &ds_a.train, HeadAnchorMode::CenteredInterEye, 448.0);
    let t_tr = gaze_targets(&ds_a.train);
    let x_val = featurize_records(ModelKind::Siamese, &ds_a.val, HeadAnchorMode::CenteredInterEye, 448.0);
    let t_val = gaze_targets(&ds_a.val);

    let mut mlp = SiameseMlp::init(&MlpArch::siamese_default(), 3);
    let cfg = TrainConfig { max_epochs: 30, seed: 3, ..TrainConfig::siamese_default() };
    train(&mut mlp, x_tr.view(), t_tr.view(), x_val.view(), t_val.view(), &cfg).unwrap();

    let estimator = GazeEstimator { meta: meta(ModelKind::Siamese, "synthA"), body: ModelBody::Siamese(mlp) };
    let datasets = vec![
        DatasetEval { tag: "synthA".into(), full: a, test: ds_a.test },
        DatasetEval { tag: "synthB".into(), full: b, test: Vec::new() },
    ];
    let grid = cross_domain_matrix(std::slice::from_ref(&estimator), &datasets).unwrap();
    let diag = grid.cells[0][0].as_ref().unwrap().mae_deg;
    let off = grid.cells[0][1].as_ref().unwrap().mae_deg;
    assert!(
        (diag - off).abs() < 2.0,
        "same-distribution gap too large: diagonal {diag:.3} vs foreign {off:.3}"
    );
    // Grid cells are independent of evaluation order.
    let grid_again = cross_domain_matrix(std::slice::from_ref(&estimator), &datasets).unwrap();
    assert_eq!(grid.cells[0][0], grid_again.cells[0][0]);
}

#[test]
fn trained_model_checkpoint_survives_disk() {
    let records = generate_synthetic(&SynthConfig {
        n_samples: 600,
        n_subjects: 6,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let spec = SplitSpec::SubjectRanges { train: (0, 3), val: (4, 4), test: (5, 5) };
    let ds = split(records, &spec).unwrap();
    let x_tr = featurize_records(ModelKind::Siamese, &ds.train, HeadAnchorMode::CenteredInterEye, 448.0);
    let t_tr = gaze_targets(&ds.train);
    let x_val = featurize_records(ModelKind::Siamese, &ds.val, HeadAnchorMode::CenteredInterEye, 448.0);
    let t_val = gaze_targets(&ds.val);
    let mut mlp = SiameseMlp::init(&MlpArch::siamese_default(), 5);
    let cfg = TrainConfig { max_epochs: 4, seed: 5, ..TrainConfig::siamese_default() };
    train(&mut mlp, x_tr.view(), t_tr.view(), x_val.view(), t_val.view(), &cfg).unwrap();

    let estimator = GazeEstimator { meta: meta(ModelKind::Siamese, "synth"), body: ModelBody::Siamese(mlp) };
    let before = evaluate(&estimator, &ds.test, "synth").unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    estimator.save(&path).unwrap();
    let loaded = GazeEstimator::load(&path).unwrap();
    let after = evaluate(&loaded, &ds.test, "synth").unwrap();
    assert_eq!(before.mae_deg.to_bits(), after.mae_deg.to_bits());
    assert_eq!(before.sd_deg.to_bits(), after.sd_deg.to_bits());
}
