//! Within/cross-domain accuracy reports and grouped permutation feature
//! importance.

use crate::data::GazeRecord;
use crate::geometry::{angular_error_deg, GeometryError, Vec3};
use crate::landmarks::Eye;
use crate::model::{GazeEstimator, ModelError, ModelKind};
use ndarray::ArrayView2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty evaluation set")]
    EmptySet,
    #[error("no model trained on dataset '{0}'")]
    MissingModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Accuracy of one model on one sample set: mean angular error and the
/// population standard deviation across samples, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub train_dataset: String,
    pub test_dataset: String,
    pub n: usize,
    pub mae_deg: f64,
    pub sd_deg: f64,
}

/// Mean and population standard deviation of per-sample errors.
fn mean_sd(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-sample angular errors (degrees) of raw predictions against targets.
pub fn per_sample_errors_deg(predictions: &[Vec3], targets: &[Vec3]) -> Result<Vec<f64>, EvalError> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(EvalError::EmptySet);
    }
    predictions
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| angular_error_deg(p, t).map_err(EvalError::from))
        .collect()
}

/// Eval-mode accuracy of a model on a record set.
pub fn evaluate(model: &GazeEstimator, records: &[GazeRecord], test_tag: &str) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let x = model.featurize(records);
    let preds = model.predict_features(x.view())?;
    let targets: Vec<Vec3> = records.iter().map(|r| r.gaze_norm).collect();
    let errors = per_sample_errors_deg(&preds, &targets)?;
    let (mae_deg, sd_deg) = mean_sd(&errors);
    Ok(EvalReport {
        model: model.kind().to_string(),
        train_dataset: model.meta.train_dataset.clone(),
        test_dataset: test_tag.to_string(),
        n: records.len(),
        mae_deg,
        sd_deg,
    })
}

// ---------------------------------------------------------------------------
// Cross-domain grid
// ---------------------------------------------------------------------------

/// One evaluation dataset: its held-out test split (for the within-domain
/// diagonal) and the entire record set (for foreign models).
pub struct DatasetEval {
    pub tag: String,
    pub full: Vec<GazeRecord>,
    pub test: Vec<GazeRecord>,
}

/// Train-dataset x test-dataset accuracy grid. The diagonal evaluates on
/// the test split only; off-diagonal cells evaluate on the entire foreign
/// dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossDomainGrid {
    pub model: String,
    pub train_tags: Vec<String>,
    pub test_tags: Vec<String>,
    pub cells: Vec<Vec<Option<EvalReport>>>,
}

pub fn cross_domain_matrix(
    models: &[GazeEstimator],
    datasets: &[DatasetEval],
) -> Result<CrossDomainGrid, EvalError> {
    let test_tags: Vec<String> = datasets.iter().map(|d| d.tag.clone()).collect();
    let mut train_tags = Vec::with_capacity(models.len());
    let mut cells = Vec::with_capacity(models.len());
    for model in models {
        let train_tag = model.meta.train_dataset.clone();
        let mut row = Vec::with_capacity(datasets.len());
        for ds in datasets {
            if ds.tag == train_tag {
                row.push(Some(evaluate(model, &ds.test, &ds.tag)?));
            } else {
                row.push(Some(evaluate(model, &ds.full, &ds.tag)?));
            }
        }
        train_tags.push(train_tag);
        cells.push(row);
    }
    Ok(CrossDomainGrid {
        model: models.first().map(|m| m.kind().to_string()).unwrap_or_default(),
        train_tags,
        test_tags,
        cells,
    })
}

impl std::fmt::Display for CrossDomainGrid {
    /// Aligned text table, train datasets as rows, test datasets as columns,
    /// cells as `MAE (SD)` in degrees.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec![format!("{} train\\test", self.model)];
        header.extend(self.test_tags.iter().cloned());
        rows.push(header);
        for (tag, row) in self.train_tags.iter().zip(self.cells.iter()) {
            let mut line = vec![tag.clone()];
            for cell in row {
                line.push(match cell {
                    Some(r) => format!("{:.2} ({:.2})", r.mae_deg, r.sd_deg),
                    None => "-".to_string(),
                });
            }
            rows.push(line);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        for row in rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                let _ = write!(line, "{:<width$}  ", cell, width = widths[c]);
            }
            writeln!(f, "{}", line.trim_end())?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Permutation feature importance
// ---------------------------------------------------------------------------

/// A named group of input-feature columns permuted jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub side: Option<Eye>,
    pub indices: Vec<usize>,
}

impl FeatureGroup {
    fn new(name: &str, side: Option<Eye>, indices: std::ops::Range<usize>) -> Self {
        Self { name: name.into(), side, indices: indices.collect() }
    }

    pub fn label(&self) -> String {
        match self.side {
            Some(Eye::Left) => format!("{} (L)", self.name),
            Some(Eye::Right) => format!("{} (R)", self.name),
            None => self.name.clone(),
        }
    }
}

/// Frozen group table for a model's input layout. Groups are disjoint and
/// cover every input feature.
///
/// Global layout (40): per-slot (x, y) pairs in slot order, so iris slots
/// 0-4 of each eye occupy 10 features, contour slots 5-8 occupy 8.
/// Siamese layout (42): `[f_L(18), f_R(18), delta_c(2), f_H(4)]` with the
/// same per-eye role order.
pub fn feature_groups(kind: ModelKind) -> Vec<FeatureGroup> {
    match kind {
        ModelKind::Holistic | ModelKind::Gbt => vec![
            FeatureGroup::new("iris", Some(Eye::Left), 0..10),
            FeatureGroup::new("eye contour", Some(Eye::Left), 10..18),
            FeatureGroup::new("iris", Some(Eye::Right), 18..28),
            FeatureGroup::new("eye contour", Some(Eye::Right), 28..36),
            FeatureGroup::new("head anchors", None, 36..40),
        ],
        ModelKind::Siamese => vec![
            FeatureGroup::new("iris", Some(Eye::Left), 0..10),
            FeatureGroup::new("eye contour", Some(Eye::Left), 10..18),
            FeatureGroup::new("iris", Some(Eye::Right), 18..28),
            FeatureGroup::new("eye contour", Some(Eye::Right), 28..36),
            FeatureGroup::new("relative position", None, 36..38),
            FeatureGroup::new("head anchors", None, 38..42),
        ],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupImportance {
    pub name: String,
    pub side: Option<Eye>,
    /// Mean MAE increase over repeats, degrees.
    pub mean_deg: f64,
    /// Standard deviation across repeats, degrees.
    pub sd_deg: f64,
    /// Raw per-repeat importance values (may be negative; never clamped).
    pub repeats: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_mae_deg: f64,
    pub n_repeats: usize,
    pub groups: Vec<GroupImportance>,
}

/// MAE increase when one group's columns are permuted by `perm` (applied
/// jointly to all columns of the group, labels and other features fixed).
pub fn importance_with_permutation(
    model: &GazeEstimator,
    x: ArrayView2<f64>,
    targets: &[Vec3],
    baseline_mae_deg: f64,
    group: &FeatureGroup,
    perm: &[usize],
) -> Result<f64, EvalError> {
    let mut permuted = x.to_owned();
    for &col in &group.indices {
        for (dst_row, &src_row) in perm.iter().enumerate() {
            permuted[[dst_row, col]] = x[[src_row, col]];
        }
    }
    let preds = model.predict_features(permuted.view())?;
    let errors = per_sample_errors_deg(&preds, targets)?;
    let (mae, _) = mean_sd(&errors);
    Ok(mae - baseline_mae_deg)
}

/// Grouped permutation feature importance on a validation set.
///
/// For each repeat and group, one shared permutation reorders the group's
/// columns across samples; the importance is the resulting MAE increase
/// over the baseline (computed once). Deterministic for a given seed.
pub fn permutation_importance(
    model: &GazeEstimator,
    records: &[GazeRecord],
    groups: &[FeatureGroup],
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, EvalError> {
    if records.len() < 2 {
        return Err(EvalError::EmptySet);
    }
    let x = model.featurize(records);
    let targets: Vec<Vec3> = records.iter().map(|r| r.gaze_norm).collect();
    let baseline_preds = model.predict_features(x.view())?;
    let (baseline_mae, _) = mean_sd(&per_sample_errors_deg(&baseline_preds, &targets)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(groups.len());
    let mut perm: Vec<usize> = (0..records.len()).collect();
    for group in groups {
        let mut repeats = Vec::with_capacity(n_repeats);
        for _ in 0..n_repeats {
            perm.shuffle(&mut rng);
            repeats.push(importance_with_permutation(model, x.view(), &targets, baseline_mae, group, &perm)?);
        }
        let (mean_deg, sd_deg) = mean_sd(&repeats);
        out.push(GroupImportance { name: group.name.clone(), side: group.side, mean_deg, sd_deg, repeats });
    }
    Ok(ImportanceReport { baseline_mae_deg: baseline_mae, n_repeats, groups: out })
}

impl ImportanceReport {
    /// Per-repeat values as CSV (one column per group) for external plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = self.groups.iter().map(GroupImportance::label_for_csv).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for r in 0..self.n_repeats {
            let row: Vec<String> = self.groups.iter().map(|g| format!("{}", g.repeats[r])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

impl GroupImportance {
    fn label_for_csv(&self) -> String {
        match self.side {
            Some(Eye::Left) => format!("{} (L)", self.name),
            Some(Eye::Right) => format!("{} (R)", self.name),
            None => self.name.clone(),
        }
    }
}
