//! Angular (arccos cosine-similarity) loss over unnormalized predictions.

use super::NeuralError;
use ndarray::Array2;

/// Predictions with a smaller norm are rejected as numerically dead.
pub const MIN_PREDICTION_NORM: f64 = 1e-12;

/// Margin keeping the arccos derivative finite near |cos| = 1.
const GRAD_COS_CLAMP: f64 = 1.0 - 1e-7;

/// Mean angular error (radians) of a prediction batch against unit targets,
/// and its analytic gradient with respect to the unnormalized predictions.
///
/// The loss value clamps the cosine to `[-1, 1]`, so a prediction parallel
/// to its target contributes exactly zero. The gradient factor
/// `1/sqrt(1 - c^2)` uses a cosine clamped to `1 - 1e-7` so it stays finite;
/// at the aligned fixed point the projection term vanishes and the gradient
/// is exactly zero.
pub fn angular_loss_and_grad(
    pred: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<(f64, Array2<f64>), NeuralError> {
    if pred.dim() != target.dim() {
        return Err(NeuralError::DimensionMismatch { expected: target.len(), got: pred.len() });
    }
    let n = pred.nrows();
    if n == 0 {
        return Err(NeuralError::BatchTooSmall(0));
    }

    let mut grad = Array2::<f64>::zeros(pred.raw_dim());
    let mut total = 0.0;
    for i in 0..n {
        let p = pred.row(i);
        let t = target.row(i);
        let np = p.dot(&p).sqrt();
        let nt = t.dot(&t).sqrt();
        if np <= MIN_PREDICTION_NORM || nt <= MIN_PREDICTION_NORM {
            return Err(NeuralError::ZeroPrediction(i));
        }
        let cos = p.dot(&t) / (np * nt);
        total += cos.clamp(-1.0, 1.0).acos();

        // dE/dp = -1/sqrt(1 - c^2) * (t/(|p||t|) - c p/|p|^2)
        let c_clamped = cos.clamp(-GRAD_COS_CLAMP, GRAD_COS_CLAMP);
        let factor = -1.0 / (1.0 - c_clamped * c_clamped).sqrt();
        let mut g = grad.row_mut(i);
        for k in 0..p.len() {
            g[k] = factor * (t[k] / (np * nt) - cos * p[k] / (np * np)) / n as f64;
        }
    }

    Ok((total / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aligned_prediction_has_zero_loss_and_gradient() {
        let t = array![[0.0, 0.0, -1.0]];
        let (loss, grad) = angular_loss_and_grad(&t.clone(), &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));

        // Scale invariance: 5x the target is still a perfect prediction.
        let p = &t * 5.0;
        let (loss, _) = angular_loss_and_grad(&p, &t).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn zero_prediction_is_rejected() {
        let p = array![[0.0, 0.0, 0.0]];
        let t = array![[0.0, 0.0, -1.0]];
        assert_eq!(angular_loss_and_grad(&p, &t), Err(NeuralError::ZeroPrediction(0)));
    }

    #[test]
    fn loss_is_the_mean_over_the_batch() {
        let p = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let t = array![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let (loss, _) = angular_loss_and_grad(&p, &t).unwrap();
        assert_relative_eq!(loss, std::f64::consts::FRAC_PI_2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mut p = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
            // Keep predictions away from zero norm and from the targets.
            for mut row in p.rows_mut() {
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n < 0.3 {
                    row[0] += 0.5;
                }
            }
            let t = {
                let mut t = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
                for mut row in t.rows_mut() {
                    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
                    row.mapv_inplace(|v| v / n);
                }
                t
            };
            let (_, grad) = angular_loss_and_grad(&p, &t).unwrap();
            let eps = 1e-6;
            for i in 0..p.nrows() {
                for k in 0..3 {
                    let mut pp = p.clone();
                    pp[[i, k]] += eps;
                    let (lp, _) = angular_loss_and_grad(&pp, &t).unwrap();
                    pp[[i, k]] -= 2.0 * eps;
                    let (lm, _) = angular_loss_and_grad(&pp, &t).unwrap();
                    let fd = (lp - lm) / (2.0 * eps);
                    let scale = fd.abs().max(grad[[i, k]].abs()).max(1e-6);
                    assert!(
                        (fd - grad[[i, k]]).abs() / scale < 1e-6,
                        "grad[{i},{k}] analytic {} vs fd {}",
                        grad[[i, k]],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn loss_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = Array2::from_shape_fn((1, 3), |_| rng.gen_range(-2.0..2.0));
            let t = array![[0.0, 0.0, -1.0]];
            if let Ok((loss, _)) = angular_loss_and_grad(&p, &t) {
                assert!((0.0..=std::f64::consts::PI).contains(&loss));
            }
        }
    }
}
