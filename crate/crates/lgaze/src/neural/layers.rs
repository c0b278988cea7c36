//! Primitive layers: affine, batch normalization, exact GELU, and inverted
//! dropout. Each trainable layer owns its gradient accumulators.

use super::{Cursor, NeuralError};
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Forward-pass mode. Eval is deterministic: dropout is the identity and
/// batch norm uses running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

/// Affine layer `y = x W^T + b` with `W` stored as (out x in).
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub grad_w: Array2<f64>,
    pub grad_b: Array1<f64>,
}

impl Linear {
    /// Scaled-uniform fan-in initialization: `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn fan_in(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self::uniform(in_dim, out_dim, bound, rng)
    }

    pub fn uniform(in_dim: usize, out_dim: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound));
        let b = Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..bound));
        Self { grad_w: Array2::zeros(w.raw_dim()), grad_b: Array1::zeros(b.raw_dim()), w, b }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates gradients and returns the input gradient.
    pub fn backward(&mut self, x: ArrayView2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.grad_w += &dy.t().dot(&x);
        self.grad_b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }

    pub fn zero_grads(&mut self) {
        self.grad_w.fill(0.0);
        self.grad_b.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend(self.w.iter());
        out.extend(self.b.iter());
    }

    pub fn append_grads(&self, out: &mut Vec<f64>) {
        out.extend(self.grad_w.iter());
        out.extend(self.grad_b.iter());
    }

    pub fn read_params(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        let w = cur.take(self.w.len())?;
        for (dst, src) in self.w.iter_mut().zip(w) {
            *dst = *src;
        }
        let b = cur.take(self.b.len())?;
        for (dst, src) in self.b.iter_mut().zip(b) {
            *dst = *src;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Per-feature batch normalization.
///
/// Train mode normalizes with biased batch statistics and folds them into
/// the running estimates as `r <- (1 - m) r + m stat` (biased variance, so
/// freezing `momentum = 1` makes a following eval pass reproduce the train
/// pass exactly).
#[derive(Debug, Clone)]
pub(crate) struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub grad_gamma: Array1<f64>,
    pub grad_beta: Array1<f64>,
}

pub(crate) struct BnTape {
    /// Normalized activations, needed for the gamma gradient in both modes.
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub train: bool,
}

impl BatchNorm {
    pub fn new(dim: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum,
            eps,
            grad_gamma: Array1::zeros(dim),
            grad_beta: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Train-mode pass: normalize with biased batch statistics and update
    /// the running estimates.
    pub fn forward_train(&mut self, x: &Array2<f64>) -> (Array2<f64>, BnTape) {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let mut var = Array1::<f64>::zeros(self.dim());
        for row in x.rows() {
            Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &xi, &m| {
                *v += (xi - m) * (xi - m);
            });
        }
        var.mapv_inplace(|v| v / n);

        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut xhat = x.clone();
        for mut row in xhat.rows_mut() {
            Zip::from(&mut row).and(&mean).and(&inv_std).for_each(|h, &m, &s| {
                *h = (*h - m) * s;
            });
        }
        let y = self.affine(&xhat);

        let m = self.momentum;
        Zip::from(&mut self.running_mean).and(&mean).for_each(|r, &b| *r = (1.0 - m) * *r + m * b);
        Zip::from(&mut self.running_var).and(&var).for_each(|r, &b| *r = (1.0 - m) * *r + m * b);

        (y, BnTape { xhat, inv_std, train: true })
    }

    /// Eval-mode pass: normalize with the running statistics, no state change.
    pub fn forward_eval(&self, x: &Array2<f64>) -> (Array2<f64>, BnTape) {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut xhat = x.clone();
        for mut row in xhat.rows_mut() {
            Zip::from(&mut row).and(&self.running_mean).and(&inv_std).for_each(|h, &m, &s| {
                *h = (*h - m) * s;
            });
        }
        let y = self.affine(&xhat);
        (y, BnTape { xhat, inv_std, train: false })
    }

    fn affine(&self, xhat: &Array2<f64>) -> Array2<f64> {
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            Zip::from(&mut row).and(&self.gamma).and(&self.beta).for_each(|v, &g, &b| {
                *v = *v * g + b;
            });
        }
        y
    }

    /// Accumulates gamma/beta gradients and returns the input gradient. In
    /// train mode the gradient flows through the batch statistics.
    pub fn backward(&mut self, tape: &BnTape, dy: &Array2<f64>) -> Array2<f64> {
        let sum_dy = dy.sum_axis(Axis(0));
        let mut sum_dy_xhat = Array1::<f64>::zeros(self.dim());
        Zip::from(dy.rows()).and(tape.xhat.rows()).for_each(|dyr, xr| {
            Zip::from(&mut sum_dy_xhat).and(&dyr).and(&xr).for_each(|acc, &d, &h| *acc += d * h);
        });
        self.grad_gamma += &sum_dy_xhat;
        self.grad_beta += &sum_dy;

        if tape.train {
            // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
            let n = dy.nrows() as f64;
            let mut dx = dy.clone();
            for (mut dxr, xr) in dx.rows_mut().into_iter().zip(tape.xhat.rows()) {
                Zip::from(&mut dxr)
                    .and(&xr)
                    .and(&self.gamma)
                    .and(&tape.inv_std)
                    .and(&sum_dy)
                    .and(&sum_dy_xhat)
                    .for_each(|d, &h, &g, &s, &sd, &sdx| {
                        *d = g * s * (*d - sd / n - h * sdx / n);
                    });
            }
            dx
        } else {
            let mut dx = dy.clone();
            for mut row in dx.rows_mut() {
                Zip::from(&mut row).and(&self.gamma).and(&tape.inv_std).for_each(|d, &g, &s| {
                    *d *= g * s;
                });
            }
            dx
        }
    }

    pub fn zero_grads(&mut self) {
        self.grad_gamma.fill(0.0);
        self.grad_beta.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
    }

    pub fn append_grads(&self, out: &mut Vec<f64>) {
        out.extend(self.grad_gamma.iter());
        out.extend(self.grad_beta.iter());
    }

    pub fn read_params(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        let n = self.gamma.len();
        for (dst, src) in self.gamma.iter_mut().zip(cur.take(n)?) {
            *dst = *src;
        }
        for (dst, src) in self.beta.iter_mut().zip(cur.take(n)?) {
            *dst = *src;
        }
        Ok(())
    }

    pub fn append_buffers(&self, out: &mut Vec<f64>) {
        out.extend(self.running_mean.iter());
        out.extend(self.running_var.iter());
    }

    pub fn read_buffers(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        let n = self.running_mean.len();
        for (dst, src) in self.running_mean.iter_mut().zip(cur.take(n)?) {
            *dst = *src;
        }
        for (dst, src) in self.running_var.iter_mut().zip(cur.take(n)?) {
            *dst = *src;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// GELU (exact Gaussian-CDF form)
// ---------------------------------------------------------------------------

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

fn gelu_scalar(x: f64) -> f64 {
    x * 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad_scalar(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
    cdf + x * pdf
}

pub(crate) fn gelu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(gelu_scalar)
}

/// `dy * gelu'(x)` where `x` is the pre-activation input.
pub(crate) fn gelu_backward(x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(x).for_each(|d, &xi| *d *= gelu_grad_scalar(xi));
    dx
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling)
// ---------------------------------------------------------------------------

/// `None` means the pass was an identity (eval mode or `p = 0`).
pub(crate) struct DropoutMask(pub(crate) Option<Array2<f64>>);

impl DropoutMask {
    pub(crate) fn identity() -> Self {
        DropoutMask(None)
    }
}

/// Train-mode inverted dropout; eval passes skip this entirely.
pub(crate) fn dropout_train(x: &Array2<f64>, p: f64, rng: &mut ChaCha8Rng) -> (Array2<f64>, DropoutMask) {
    if p == 0.0 {
        return (x.clone(), DropoutMask(None));
    }
    let keep = 1.0 - p;
    let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
        if rng.gen::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    });
    (x * &mask, DropoutMask(Some(mask)))
}

pub(crate) fn dropout_backward(mask: &DropoutMask, dy: &Array2<f64>) -> Array2<f64> {
    match &mask.0 {
        Some(m) => dy * m,
        None => dy.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn linear_forward_matches_manual() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lin = Linear::fan_in(2, 3, &mut rng);
        lin.w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        lin.b = array![0.5, -0.5, 0.0];
        let x = array![[1.0, 1.0], [2.0, 0.0]];
        let y = lin.forward(x.view());
        assert_relative_eq!(y[[0, 0]], 3.5);
        assert_relative_eq!(y[[0, 2]], 11.0);
        assert_relative_eq!(y[[1, 1]], 5.5);
    }

    #[test]
    fn batchnorm_train_normalizes_batch() {
        let mut bn = BatchNorm::new(2, 0.1, 1e-5);
        let x = array![[1.0, 10.0], [3.0, 30.0], [5.0, 50.0], [7.0, 70.0]];
        let (y, tape) = bn.forward_train(&x);
        // Column means of the output are ~0 and variances ~1 (gamma=1, beta=0).
        for c in 0..2 {
            let col = y.column(c);
            let mean: f64 = col.mean().unwrap();
            assert_relative_eq!(mean, 0.0, epsilon = 1e-12);
        }
        assert!(tape.train);
        // Biased batch stats folded into running estimates with momentum 0.1.
        assert_relative_eq!(bn.running_mean[0], 0.1 * 4.0, epsilon = 1e-12);
        assert_relative_eq!(bn.running_var[0], 0.9 * 1.0 + 0.1 * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn gelu_known_values() {
        assert_relative_eq!(gelu_scalar(0.0), 0.0);
        // gelu(x) -> x for large x, -> 0 for very negative x.
        assert_relative_eq!(gelu_scalar(10.0), 10.0, epsilon = 1e-9);
        assert!(gelu_scalar(-10.0).abs() < 1e-9);
        // Midpoint value: gelu(1) = 1 * Phi(1) = 0.841344746...
        assert_relative_eq!(gelu_scalar(1.0), 0.8413447460685429, epsilon = 1e-12);
    }

    #[test]
    fn gelu_gradient_matches_finite_difference() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let eps = 1e-6;
            let fd = (gelu_scalar(x + eps) - gelu_scalar(x - eps)) / (2.0 * eps);
            assert_relative_eq!(gelu_grad_scalar(x), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn dropout_train_preserves_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = Array2::ones((64, 32));
        let (y, mask) = dropout_train(&x, 0.0, &mut rng);
        assert_eq!(y, x);
        assert!(mask.0.is_none());
        let (y, mask) = dropout_train(&x, 0.5, &mut rng);
        assert!(mask.0.is_some());
        // Inverted scaling keeps the expected activation near 1.
        let mean = y.mean().unwrap();
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
        assert!(y.iter().all(|&v| v == 0.0 || (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn cursor_round_trip_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lin = Linear::fan_in(4, 3, &mut rng);
        let mut flat = Vec::new();
        lin.append_params(&mut flat);
        assert_eq!(flat.len(), lin.param_count());
        let mut copy = Linear::fan_in(4, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let mut cur = Cursor::new(&flat);
        copy.read_params(&mut cur).unwrap();
        cur.finish().unwrap();
        assert_eq!(copy.w, lin.w);
        assert_eq!(copy.b, lin.b);
    }
}
