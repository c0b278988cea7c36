//! Histogram-based gradient-boosted regression trees.
//!
//! Squared-error boosting: each tree fits the residuals of the current
//! prediction over quantile-binned features, and its leaf values (shrunk by
//! the learning rate and an L2 term) are added to the ensemble. Three
//! independent ensembles cover the three gaze components. This is a faithful
//! re-implementation of the baseline behavior, not a bit-compatible clone of
//! any external boosting library.

use crate::geometry::Vec3;
use ndarray::ArrayView2;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GbtError {
    #[error("need at least 2 training rows, got {0}")]
    EmptyData(usize),
    #[error("feature matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature row has wrong length: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target contains a non-finite value at row {0}")]
    NonFiniteTarget(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub row_subsample: f64,
    pub feature_subsample: f64,
    /// Histogram bin budget per feature.
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    pub lambda_l2: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    /// 1000 trees of depth 6, learning rate 0.05, 80% row and feature
    /// subsampling; bins/regularization are standard histogram-GBT defaults.
    fn default() -> Self {
        Self {
            n_trees: 1000,
            max_depth: 6,
            learning_rate: 0.05,
            row_subsample: 0.8,
            feature_subsample: 0.8,
            n_bins: 256,
            min_samples_leaf: 20,
            lambda_l2: 1.0,
            seed: 0,
        }
    }
}

/// A binary regression tree stored as a flat node array (root at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Real-valued threshold: `x[feature] <= threshold` goes left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// One boosted ensemble predicting a single scalar component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    /// Target mean; trees correct residuals around it.
    pub base: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Set when no split was ever possible (constant feature matrix); the
    /// ensemble then predicts only the base value.
    pub degenerate: bool,
}

impl TreeEnsemble {
    pub fn predict(&self, row: &[f64]) -> Result<f64, GbtError> {
        if row.len() != self.n_features {
            return Err(GbtError::DimensionMismatch { expected: self.n_features, got: row.len() });
        }
        let mut acc = self.base;
        for tree in &self.trees {
            acc += tree.predict(row);
        }
        Ok(acc)
    }
}

/// Three independent component ensembles assembling a gaze vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub config: GbtConfig,
    pub components: [TreeEnsemble; 3],
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.components[0].n_features
    }

    /// Raw (unnormalized) component-wise prediction; angular evaluation is
    /// scale-invariant, and the inference surface normalizes.
    pub fn predict(&self, row: &[f64]) -> Result<Vec3, GbtError> {
        Ok(Vec3::new(
            self.components[0].predict(row)?,
            self.components[1].predict(row)?,
            self.components[2].predict(row)?,
        ))
    }
}

// ---------------------------------------------------------------------------
// Histogram construction
// ---------------------------------------------------------------------------

/// Per-feature quantile bin edges, computed once per fit.
///
/// A value's bin index is the number of edges strictly below it, so the
/// split "bin <= b" is exactly the real-valued test `x <= edges[b]`.
struct Binning {
    /// Edges per feature, ascending, deduplicated.
    edges: Vec<Vec<f64>>,
}

impl Binning {
    fn build(x: ArrayView2<f64>, n_bins: usize) -> Self {
        let n = x.nrows();
        let edges = (0..x.ncols())
            .map(|f| {
                let mut col: Vec<f64> = x.column(f).to_vec();
                col.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                let mut e = Vec::new();
                // Candidate cuts at interior quantile positions.
                for k in 1..n_bins {
                    let pos = k * n / n_bins;
                    if pos == 0 || pos >= n {
                        continue;
                    }
                    let cut = col[pos - 1];
                    if col[pos] > cut && e.last().map_or(true, |&last| cut > last) {
                        e.push(cut);
                    }
                }
                e
            })
            .collect();
        Self { edges }
    }

    fn bin_index(&self, feature: usize, value: f64) -> u16 {
        self.edges[feature].partition_point(|&e| e < value) as u16
    }

    fn bin_count(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }
}

/// Column-major pre-binned feature matrix.
struct BinnedMatrix {
    bins: Vec<u16>,
    n_rows: usize,
}

impl BinnedMatrix {
    fn build(x: ArrayView2<f64>, binning: &Binning) -> Self {
        let (n_rows, n_feats) = x.dim();
        let mut bins = vec![0u16; n_rows * n_feats];
        for f in 0..n_feats {
            let col = &mut bins[f * n_rows..(f + 1) * n_rows];
            for (r, dst) in col.iter_mut().enumerate() {
                *dst = binning.bin_index(f, x[[r, f]]);
            }
        }
        Self { bins, n_rows }
    }

    #[inline]
    fn get(&self, row: usize, feature: usize) -> u16 {
        self.bins[feature * self.n_rows + row]
    }
}

// ---------------------------------------------------------------------------
// Tree growing
// ---------------------------------------------------------------------------

struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: u16,
}

/// XGBoost-style score with unit hessians: `G^2 / (n + lambda)`.
fn leaf_score(grad_sum: f64, count: f64, lambda: f64) -> f64 {
    grad_sum * grad_sum / (count + lambda)
}

fn leaf_value(grad_sum: f64, count: f64, lambda: f64, learning_rate: f64) -> f64 {
    learning_rate * grad_sum / (count + lambda)
}

struct TreeGrower<'a> {
    binned: &'a BinnedMatrix,
    binning: &'a Binning,
    residuals: &'a [f64],
    features: &'a [usize],
    cfg: &'a GbtConfig,
}

impl TreeGrower<'_> {
    /// Depth-wise growth over an explicit node stack; each node owns its row
    /// index set.
    fn grow(&self, rows: Vec<usize>) -> Tree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, rows, 0usize)]; // (node index, rows, depth)

        while let Some((node_idx, rows, depth)) = stack.pop() {
            let grad_sum: f64 = rows.iter().map(|&r| self.residuals[r]).sum();
            let count = rows.len() as f64;

            let candidate = if depth < self.cfg.max_depth && rows.len() >= 2 * self.cfg.min_samples_leaf {
                self.best_split(&rows, grad_sum, count)
            } else {
                None
            };

            match candidate {
                Some(c) => {
                    let threshold = self.binning.edges[c.feature][c.bin as usize];
                    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                        rows.into_iter().partition(|&r| self.binned.get(r, c.feature) <= c.bin);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node_idx] = Node::Split { feature: c.feature, threshold, left, right };
                    stack.push((left, left_rows, depth + 1));
                    stack.push((right, right_rows, depth + 1));
                }
                None => {
                    nodes[node_idx] = Node::Leaf {
                        value: leaf_value(grad_sum, count, self.cfg.lambda_l2, self.cfg.learning_rate),
                    };
                }
            }
        }
        Tree { nodes }
    }

    /// Best variance-reduction split over the selected features. Ties break
    /// toward the lowest feature index, then the lowest bin, by strict
    /// comparison in ascending scan order.
    fn best_split(&self, rows: &[usize], grad_sum: f64, count: f64) -> Option<SplitCandidate> {
        let lambda = self.cfg.lambda_l2;
        let parent_score = leaf_score(grad_sum, count, lambda);
        let min_leaf = self.cfg.min_samples_leaf as f64;
        let mut best: Option<SplitCandidate> = None;

        for &f in self.features {
            let n_bins = self.binning.bin_count(f);
            if n_bins < 2 {
                continue;
            }
            let mut hist_grad = vec![0.0f64; n_bins];
            let mut hist_count = vec![0.0f64; n_bins];
            for &r in rows {
                let b = self.binned.get(r, f) as usize;
                hist_grad[b] += self.residuals[r];
                hist_count[b] += 1.0;
            }

            let mut left_grad = 0.0;
            let mut left_count = 0.0;
            // Split candidates sit between bin b and b+1, i.e. at edges[b].
            for b in 0..n_bins - 1 {
                left_grad += hist_grad[b];
                left_count += hist_count[b];
                let right_grad = grad_sum - left_grad;
                let right_count = count - left_count;
                if left_count < min_leaf || right_count < min_leaf {
                    continue;
                }
                let gain = leaf_score(left_grad, left_count, lambda)
                    + leaf_score(right_grad, right_count, lambda)
                    - parent_score;
                if gain > 1e-12 && best.as_ref().map_or(true, |c| gain > c.gain) {
                    best = Some(SplitCandidate { gain, feature: f, bin: b as u16 });
                }
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

fn validate(x: ArrayView2<f64>, targets: &[f64]) -> Result<(), GbtError> {
    if x.nrows() < 2 {
        return Err(GbtError::EmptyData(x.nrows()));
    }
    if targets.len() != x.nrows() {
        return Err(GbtError::DimensionMismatch { expected: x.nrows(), got: targets.len() });
    }
    for ((r, c), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(GbtError::NonFinite { row: r, col: c });
        }
    }
    if let Some(r) = targets.iter().position(|t| !t.is_finite()) {
        return Err(GbtError::NonFiniteTarget(r));
    }
    Ok(())
}

/// Fit one boosted ensemble against a scalar target.
pub fn fit_component(x: ArrayView2<f64>, targets: &[f64], cfg: &GbtConfig) -> Result<TreeEnsemble, GbtError> {
    validate(x, targets)?;
    let n = x.nrows();
    let n_feats = x.ncols();

    let base = targets.iter().sum::<f64>() / n as f64;
    let binning = Binning::build(x, cfg.n_bins.max(2));
    let binned = BinnedMatrix::build(x, &binning);

    let splittable = (0..n_feats).any(|f| binning.bin_count(f) > 1);
    if !splittable {
        log::warn!("gbt: constant feature matrix, ensemble reduces to the base prediction");
        return Ok(TreeEnsemble { base, trees: Vec::new(), n_features: n_feats, degenerate: true });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut predictions = vec![base; n];
    let mut residuals = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let all_rows: Vec<usize> = (0..n).collect();
    let all_feats: Vec<usize> = (0..n_feats).collect();
    let mut row_buf = vec![0.0f64; n_feats];

    for _ in 0..cfg.n_trees {
        for i in 0..n {
            residuals[i] = targets[i] - predictions[i];
        }

        let rows = if cfg.row_subsample < 1.0 {
            let keep = ((n as f64) * cfg.row_subsample).round().max(2.0) as usize;
            let mut idx = all_rows.clone();
            idx.partial_shuffle(&mut rng, keep);
            let mut sampled = idx[..keep].to_vec();
            sampled.sort_unstable();
            sampled
        } else {
            all_rows.clone()
        };
        let feats = if cfg.feature_subsample < 1.0 {
            let keep = ((n_feats as f64) * cfg.feature_subsample).round().max(1.0) as usize;
            let mut idx = all_feats.clone();
            idx.partial_shuffle(&mut rng, keep);
            let mut sampled = idx[..keep].to_vec();
            sampled.sort_unstable();
            sampled
        } else {
            all_feats.clone()
        };

        let grower = TreeGrower {
            binned: &binned,
            binning: &binning,
            residuals: &residuals,
            features: &feats,
            cfg,
        };
        let tree = if cfg.max_depth == 0 {
            let grad_sum: f64 = rows.iter().map(|&r| residuals[r]).sum();
            Tree::leaf(leaf_value(grad_sum, rows.len() as f64, cfg.lambda_l2, cfg.learning_rate))
        } else {
            grower.grow(rows)
        };

        for i in 0..n {
            for (f, dst) in row_buf.iter_mut().enumerate() {
                *dst = x[[i, f]];
            }
            predictions[i] += tree.predict(&row_buf);
        }
        trees.push(tree);
    }

    Ok(TreeEnsemble { base, trees, n_features: n_feats, degenerate: false })
}

/// Derive a distinct per-component seed from the root seed.
fn component_seed(seed: u64, component: usize) -> u64 {
    seed.wrapping_add((component as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Fit three independent component ensembles against gaze-vector targets.
pub fn fit_multi(x: ArrayView2<f64>, targets: &[Vec3], cfg: &GbtConfig) -> Result<GbtModel, GbtError> {
    fit_multi_threaded(x, targets, cfg, 1)
}

/// [`fit_multi`] with up to `threads` component fits running concurrently.
/// The result is identical regardless of the thread count: the components
/// are independent and their seeds derived, not shared.
pub fn fit_multi_threaded(
    x: ArrayView2<f64>,
    targets: &[Vec3],
    cfg: &GbtConfig,
    threads: usize,
) -> Result<GbtModel, GbtError> {
    if targets.len() != x.nrows() {
        return Err(GbtError::DimensionMismatch { expected: x.nrows(), got: targets.len() });
    }
    let per_component: Vec<Vec<f64>> = (0..3).map(|c| targets.iter().map(|g| g[c]).collect()).collect();
    let configs: Vec<GbtConfig> =
        (0..3).map(|c| GbtConfig { seed: component_seed(cfg.seed, c), ..*cfg }).collect();

    let mut fitted: Vec<Option<Result<TreeEnsemble, GbtError>>> = vec![None, None, None];
    if threads > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = per_component
                .iter()
                .zip(configs.iter())
                .map(|(t, c)| scope.spawn(move || fit_component(x, t, c)))
                .collect();
            for (slot, h) in fitted.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("component fit panicked"));
            }
        });
    } else {
        for (slot, (t, c)) in fitted.iter_mut().zip(per_component.iter().zip(configs.iter())) {
            *slot = Some(fit_component(x, t, c));
        }
    }

    let mut out = Vec::with_capacity(3);
    for slot in fitted {
        out.push(slot.expect("component fitted")?);
    }
    let components: [TreeEnsemble; 3] = out.try_into().expect("three components");
    Ok(GbtModel { config: *cfg, components })
}

/// Training mean squared error of an ensemble against a scalar target.
pub fn training_mse(ensemble: &TreeEnsemble, x: ArrayView2<f64>, targets: &[f64]) -> Result<f64, GbtError> {
    let mut total = 0.0;
    for (i, t) in targets.iter().enumerate() {
        let row: Vec<f64> = x.row(i).to_vec();
        let p = ensemble.predict(&row)?;
        total += (p - t) * (p - t);
    }
    Ok(total / targets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_data(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[[i, 0]] - 0.5 * x[[i, 2]] + 0.1).collect();
        (x, y)
    }

    fn small_cfg() -> GbtConfig {
        GbtConfig {
            n_trees: 40,
            max_depth: 3,
            learning_rate: 0.2,
            row_subsample: 1.0,
            feature_subsample: 1.0,
            n_bins: 64,
            min_samples_leaf: 2,
            lambda_l2: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn depth_zero_single_tree_is_the_target_mean() {
        let (x, y) = toy_data(64, 0);
        let cfg = GbtConfig { n_trees: 1, max_depth: 0, ..small_cfg() };
        let model = fit_component(x.view(), &y, &cfg).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        // The single tree fits residuals around the mean, whose sum is zero,
        // so the prediction is exactly the mean.
        let row: Vec<f64> = x.row(0).to_vec();
        assert_eq!(model.predict(&row).unwrap(), mean);
    }

    #[test]
    fn overfits_a_tiny_distinct_dataset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((8, 3), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..8).map(|i| x[[i, 0]] * 3.0 + x[[i, 1]]).collect();
        let cfg = GbtConfig {
            n_trees: 60,
            max_depth: 8,
            learning_rate: 1.0,
            row_subsample: 1.0,
            feature_subsample: 1.0,
            min_samples_leaf: 1,
            lambda_l2: 0.0,
            n_bins: 256,
            seed: 0,
        };
        let model = fit_component(x.view(), &y, &cfg).unwrap();
        let mse = training_mse(&model, x.view(), &y).unwrap();
        assert!(mse < 1e-9, "training mse {mse}");
    }

    #[test]
    fn training_mse_non_increasing_at_full_subsample() {
        let (x, y) = toy_data(256, 2);
        let cfg = GbtConfig { n_trees: 30, ..small_cfg() };
        let model = fit_component(x.view(), &y, &cfg).unwrap();

        // Replay the ensemble tree by tree.
        let mut preds = vec![model.base; y.len()];
        let mut prev = f64::INFINITY;
        for tree in &model.trees {
            for (i, p) in preds.iter_mut().enumerate() {
                let row: Vec<f64> = x.row(i).to_vec();
                *p += tree.predict(&row);
            }
            let mse = preds.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64;
            assert!(mse <= prev + 1e-12, "round MSE increased: {prev} -> {mse}");
            prev = mse;
        }
    }

    #[test]
    fn constant_features_reduce_to_base() {
        let x = Array2::from_elem((32, 4), 1.5);
        let y: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let model = fit_component(x.view(), &y, &small_cfg()).unwrap();
        assert!(model.degenerate);
        assert!(model.trees.is_empty());
        assert_relative_eq!(model.predict(&[1.5; 4]).unwrap(), 15.5);
    }

    #[test]
    fn deterministic_given_seed_and_config() {
        let (x, y) = toy_data(128, 3);
        let cfg = GbtConfig { row_subsample: 0.8, feature_subsample: 0.8, ..small_cfg() };
        let a = fit_component(x.view(), &y, &cfg).unwrap();
        let b = fit_component(x.view(), &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit_component(x.view(), &y, &GbtConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn row_order_invariance_at_full_subsample() {
        // Integer-valued data keeps histogram sums exact, so reordering
        // rows cannot perturb split decisions.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((120, 4), |_| rng.gen_range(-20..20) as f64);
        let y: Vec<f64> = (0..120).map(|i| x[[i, 0]] + 2.0 * x[[i, 3]]).collect();
        let cfg = small_cfg();
        let model = fit_component(x.view(), &y, &cfg).unwrap();

        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..120).collect();
            p.shuffle(&mut rng);
            p
        };
        let x2 = Array2::from_shape_fn((120, 4), |(r, c)| x[[perm[r], c]]);
        let y2: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let model2 = fit_component(x2.view(), &y2, &cfg).unwrap();

        let probe: Vec<f64> = x.row(7).to_vec();
        assert_eq!(model.predict(&probe).unwrap(), model2.predict(&probe).unwrap());
    }

    #[test]
    fn multi_output_assembles_componentwise() {
        let (x, _) = toy_data(96, 4);
        let targets: Vec<Vec3> =
            (0..96).map(|i| Vec3::new(x[[i, 0]], -x[[i, 1]], 0.5 * x[[i, 2]] - 1.0)).collect();
        let cfg = small_cfg();
        let model = fit_multi(x.view(), &targets, &cfg).unwrap();
        let row: Vec<f64> = x.row(0).to_vec();
        let v = model.predict(&row).unwrap();
        for c in 0..3 {
            assert_eq!(v[c], model.components[c].predict(&row).unwrap());
        }
        // Identical targets + forced identical seeds -> identical ensembles.
        let same: Vec<f64> = (0..96).map(|i| x[[i, 0]]).collect();
        let e1 = fit_component(x.view(), &same, &cfg).unwrap();
        let e2 = fit_component(x.view(), &same, &cfg).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn threaded_fit_matches_sequential() {
        let (x, _) = toy_data(96, 6);
        let targets: Vec<Vec3> = (0..96).map(|i| Vec3::new(x[[i, 0]], x[[i, 1]], x[[i, 2]])).collect();
        let cfg = GbtConfig { row_subsample: 0.8, ..small_cfg() };
        let seq = fit_multi_threaded(x.view(), &targets, &cfg, 1).unwrap();
        let par = fit_multi_threaded(x.view(), &targets, &cfg, 3).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn serialization_round_trip_is_bit_exact() {
        let (x, y) = toy_data(64, 7);
        let model = fit_component(x.view(), &y, &small_cfg()).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: TreeEnsemble = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        let probe: Vec<f64> = x.row(3).to_vec();
        assert_eq!(model.predict(&probe).unwrap().to_bits(), back.predict(&probe).unwrap().to_bits());
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let x = Array2::<f64>::zeros((1, 4));
        assert_eq!(fit_component(x.view(), &[1.0], &small_cfg()), Err(GbtError::EmptyData(1)));
        let (x, y) = toy_data(16, 1);
        let model = fit_component(x.view(), &y, &small_cfg()).unwrap();
        assert!(matches!(model.predict(&[0.0; 7]), Err(GbtError::DimensionMismatch { .. })));
    }
}
