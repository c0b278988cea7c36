//! The holistic and siamese gaze regressors.
//!
//! Both are built from a shared trunk: an input projection
//! (Linear -> BatchNorm -> GELU) followed by `K` residual blocks
//! `y = h + F(h)` with
//! `F = Linear -> BatchNorm -> GELU -> Dropout -> Linear -> BatchNorm -> GELU -> Dropout`.
//! The holistic model adds a two-layer regression head; the siamese model
//! runs two independent trunks over the per-eye features and fuses their
//! latents with the binocular geometry terms.
//!
//! Flat parameter order (also the checkpoint tensor order): for every layer
//! in graph order, `Linear` contributes `W` (row-major) then `b`, and
//! `BatchNorm` contributes `gamma` then `beta`. The flat *state* vector is
//! the parameters followed by every batch-norm's `running_mean` and
//! `running_var` in the same graph order.

use super::layers::{
    dropout_backward, dropout_train, gelu, gelu_backward, BatchNorm, BnTape, DropoutMask, Linear, Mode,
};
use super::{Cursor, NeuralError};
use crate::features::{EYE_DIM, GLOBAL_DIM, SIAMESE_DIM};
use ndarray::{s, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Output dimension: the 3D gaze vector.
pub const GAZE_DIM: usize = 3;

/// Architecture hyperparameters shared by both MLPs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpArch {
    /// Hidden width `D`.
    pub hidden: usize,
    /// Number of residual blocks `K`.
    pub blocks: usize,
    /// Dropout probability `p` inside residual blocks.
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for MlpArch {
    fn default() -> Self {
        Self { hidden: 256, blocks: 3, dropout: 0.1, bn_momentum: 0.1, bn_eps: 1e-5 }
    }
}

impl MlpArch {
    /// Holistic defaults: `D = 256, K = 3, p = 0.1`.
    pub fn holistic_default() -> Self {
        Self::default()
    }

    /// Siamese defaults: `D = 64` per branch, `K = 3, p = 0.1`.
    pub fn siamese_default() -> Self {
        Self { hidden: 64, ..Self::default() }
    }
}

/// Magnitude of the final layer's uniform init; small so fresh predictions
/// are nonzero but near the origin.
const FINAL_LAYER_SCALE: f64 = 1e-2;

// ---------------------------------------------------------------------------
// Residual block
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct ResidualBlock {
    lin1: Linear,
    bn1: BatchNorm,
    lin2: Linear,
    bn2: BatchNorm,
    dropout_p: f64,
}

struct BlockTape {
    input: Array2<f64>,
    bn1: BnTape,
    act1_in: Array2<f64>,
    mask1: DropoutMask,
    lin2_in: Array2<f64>,
    bn2: BnTape,
    act2_in: Array2<f64>,
    mask2: DropoutMask,
}

impl ResidualBlock {
    fn new(arch: &MlpArch, rng: &mut ChaCha8Rng) -> Self {
        let d = arch.hidden;
        Self {
            lin1: Linear::fan_in(d, d, rng),
            bn1: BatchNorm::new(d, arch.bn_momentum, arch.bn_eps),
            lin2: Linear::fan_in(d, d, rng),
            bn2: BatchNorm::new(d, arch.bn_momentum, arch.bn_eps),
            dropout_p: arch.dropout,
        }
    }

    fn forward_train(&mut self, h: &Array2<f64>, rng: &mut ChaCha8Rng) -> (Array2<f64>, BlockTape) {
        let a1 = self.lin1.forward(h.view());
        let (b1, bn1) = self.bn1.forward_train(&a1);
        let g1 = gelu(&b1);
        let (d1, mask1) = dropout_train(&g1, self.dropout_p, rng);
        let a2 = self.lin2.forward(d1.view());
        let (b2, bn2) = self.bn2.forward_train(&a2);
        let g2 = gelu(&b2);
        let (d2, mask2) = dropout_train(&g2, self.dropout_p, rng);
        let out = h + &d2;
        let tape =
            BlockTape { input: h.clone(), bn1, act1_in: b1, mask1, lin2_in: d1, bn2, act2_in: b2, mask2 };
        (out, tape)
    }

    fn forward_eval(&self, h: &Array2<f64>) -> (Array2<f64>, BlockTape) {
        let a1 = self.lin1.forward(h.view());
        let (b1, bn1) = self.bn1.forward_eval(&a1);
        let g1 = gelu(&b1);
        let a2 = self.lin2.forward(g1.view());
        let (b2, bn2) = self.bn2.forward_eval(&a2);
        let g2 = gelu(&b2);
        let out = h + &g2;
        let tape = BlockTape {
            input: h.clone(),
            bn1,
            act1_in: b1,
            mask1: DropoutMask::identity(),
            lin2_in: g1,
            bn2,
            act2_in: b2,
            mask2: DropoutMask::identity(),
        };
        (out, tape)
    }

    fn backward(&mut self, tape: &BlockTape, dy: &Array2<f64>) -> Array2<f64> {
        let d_g2 = dropout_backward(&tape.mask2, dy);
        let d_b2 = gelu_backward(&tape.act2_in, &d_g2);
        let d_a2 = self.bn2.backward(&tape.bn2, &d_b2);
        let d_d1 = self.lin2.backward(tape.lin2_in.view(), &d_a2);
        let d_g1 = dropout_backward(&tape.mask1, &d_d1);
        let d_b1 = gelu_backward(&tape.act1_in, &d_g1);
        let d_a1 = self.bn1.backward(&tape.bn1, &d_b1);
        let d_input = self.lin1.backward(tape.input.view(), &d_a1);
        // Residual skip: gradient flows both through F and around it.
        d_input + dy
    }

    fn zero_grads(&mut self) {
        self.lin1.zero_grads();
        self.bn1.zero_grads();
        self.lin2.zero_grads();
        self.bn2.zero_grads();
    }

    fn param_count(&self) -> usize {
        self.lin1.param_count() + self.bn1.param_count() + self.lin2.param_count() + self.bn2.param_count()
    }

    fn append_params(&self, out: &mut Vec<f64>) {
        self.lin1.append_params(out);
        self.bn1.append_params(out);
        self.lin2.append_params(out);
        self.bn2.append_params(out);
    }

    fn append_grads(&self, out: &mut Vec<f64>) {
        self.lin1.append_grads(out);
        self.bn1.append_grads(out);
        self.lin2.append_grads(out);
        self.bn2.append_grads(out);
    }

    fn read_params(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        self.lin1.read_params(cur)?;
        self.bn1.read_params(cur)?;
        self.lin2.read_params(cur)?;
        self.bn2.read_params(cur)
    }

    fn append_buffers(&self, out: &mut Vec<f64>) {
        self.bn1.append_buffers(out);
        self.bn2.append_buffers(out);
    }

    fn read_buffers(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        self.bn1.read_buffers(cur)?;
        self.bn2.read_buffers(cur)
    }

    #[cfg(test)]
    fn disable_residual_function(&mut self) {
        self.lin2.w.fill(0.0);
        self.lin2.b.fill(0.0);
        self.bn2.beta.fill(0.0);
    }
}

// ---------------------------------------------------------------------------
// Trunk: input projection + residual stack
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Trunk {
    proj: Linear,
    proj_bn: BatchNorm,
    blocks: Vec<ResidualBlock>,
}

struct TrunkTape {
    input: Array2<f64>,
    proj_bn: BnTape,
    act_in: Array2<f64>,
    blocks: Vec<BlockTape>,
}

impl Trunk {
    fn new(in_dim: usize, arch: &MlpArch, rng: &mut ChaCha8Rng) -> Self {
        Self {
            proj: Linear::fan_in(in_dim, arch.hidden, rng),
            proj_bn: BatchNorm::new(arch.hidden, arch.bn_momentum, arch.bn_eps),
            blocks: (0..arch.blocks).map(|_| ResidualBlock::new(arch, rng)).collect(),
        }
    }

    fn forward_train(&mut self, x: ArrayView2<f64>, rng: &mut ChaCha8Rng) -> (Array2<f64>, TrunkTape) {
        let a = self.proj.forward(x);
        let (b, proj_bn) = self.proj_bn.forward_train(&a);
        let mut h = gelu(&b);
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for block in self.blocks.iter_mut() {
            let (next, tape) = block.forward_train(&h, rng);
            tapes.push(tape);
            h = next;
        }
        (h, TrunkTape { input: x.to_owned(), proj_bn, act_in: b, blocks: tapes })
    }

    fn forward_eval(&self, x: ArrayView2<f64>) -> (Array2<f64>, TrunkTape) {
        let a = self.proj.forward(x);
        let (b, proj_bn) = self.proj_bn.forward_eval(&a);
        let mut h = gelu(&b);
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for block in self.blocks.iter() {
            let (next, tape) = block.forward_eval(&h);
            tapes.push(tape);
            h = next;
        }
        (h, TrunkTape { input: x.to_owned(), proj_bn, act_in: b, blocks: tapes })
    }

    fn backward(&mut self, tape: &TrunkTape, dy: &Array2<f64>) -> Array2<f64> {
        let mut d = dy.clone();
        for (block, t) in self.blocks.iter_mut().rev().zip(tape.blocks.iter().rev()) {
            d = block.backward(t, &d);
        }
        let d_b = gelu_backward(&tape.act_in, &d);
        let d_a = self.proj_bn.backward(&tape.proj_bn, &d_b);
        self.proj.backward(tape.input.view(), &d_a)
    }

    fn zero_grads(&mut self) {
        self.proj.zero_grads();
        self.proj_bn.zero_grads();
        self.blocks.iter_mut().for_each(ResidualBlock::zero_grads);
    }

    fn param_count(&self) -> usize {
        self.proj.param_count()
            + self.proj_bn.param_count()
            + self.blocks.iter().map(ResidualBlock::param_count).sum::<usize>()
    }

    fn append_params(&self, out: &mut Vec<f64>) {
        self.proj.append_params(out);
        self.proj_bn.append_params(out);
        self.blocks.iter().for_each(|b| b.append_params(out));
    }

    fn append_grads(&self, out: &mut Vec<f64>) {
        self.proj.append_grads(out);
        self.proj_bn.append_grads(out);
        self.blocks.iter().for_each(|b| b.append_grads(out));
    }

    fn read_params(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        self.proj.read_params(cur)?;
        self.proj_bn.read_params(cur)?;
        for b in self.blocks.iter_mut() {
            b.read_params(cur)?;
        }
        Ok(())
    }

    fn append_buffers(&self, out: &mut Vec<f64>) {
        self.proj_bn.append_buffers(out);
        self.blocks.iter().for_each(|b| b.append_buffers(out));
    }

    fn read_buffers(&mut self, cur: &mut Cursor) -> Result<(), NeuralError> {
        self.proj_bn.read_buffers(cur)?;
        for b in self.blocks.iter_mut() {
            b.read_buffers(cur)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Shared model interface
// ---------------------------------------------------------------------------

/// Uniform surface over the two MLP architectures: forward/backward passes,
/// flat parameter access for the optimizer, and flat state (parameters plus
/// batch-norm buffers) for checkpointing.
pub trait GazeMlp {
    type Tape;

    fn input_dim(&self) -> usize;
    fn arch(&self) -> &MlpArch;

    /// Train-mode forward: batch statistics, dropout, running-stat updates.
    fn forward_train(
        &mut self,
        x: ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, Self::Tape), NeuralError>;

    /// Deterministic eval-mode forward.
    fn forward_eval(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.forward_eval_taped(x).map(|(out, _)| out)
    }

    /// Eval-mode forward that also returns a tape; the resulting backward
    /// pass differentiates the smooth eval-mode function (running
    /// statistics, no dropout).
    fn forward_eval_taped(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Self::Tape), NeuralError>;

    /// Accumulate parameter gradients from an upstream prediction gradient.
    fn backward(&mut self, tape: &Self::Tape, d_pred: &Array2<f64>) -> Result<(), NeuralError>;

    fn zero_grads(&mut self);
    fn param_count(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NeuralError>;
    fn flat_grads(&self) -> Vec<f64>;
    /// Parameters followed by batch-norm running statistics.
    fn flat_state(&self) -> Vec<f64>;
    fn set_flat_state(&mut self, state: &[f64]) -> Result<(), NeuralError>;
}

fn check_input(x: &ArrayView2<f64>, expected: usize, mode: Mode) -> Result<(), NeuralError> {
    if x.ncols() != expected {
        return Err(NeuralError::DimensionMismatch { expected, got: x.ncols() });
    }
    let min = match mode {
        Mode::Train => 2,
        Mode::Eval => 1,
    };
    if x.nrows() < min {
        return Err(NeuralError::BatchTooSmall(x.nrows()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Holistic MLP
// ---------------------------------------------------------------------------

/// Single-trunk regressor over the 40-dimensional global features.
#[derive(Debug, Clone)]
pub struct HolisticMlp {
    arch: MlpArch,
    trunk: Trunk,
    head1: Linear,
    head2: Linear,
}

pub struct HolisticTape {
    trunk: TrunkTape,
    head_in: Array2<f64>,
    head_act_in: Array2<f64>,
    head2_in: Array2<f64>,
    batch: usize,
}

impl HolisticMlp {
    /// Deterministic initialization from a seed. The regression head ends in
    /// a small-scale layer so fresh predictions are nonzero but tiny.
    pub fn init(arch: &MlpArch, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = Trunk::new(GLOBAL_DIM, arch, &mut rng);
        let head1 = Linear::fan_in(arch.hidden, arch.hidden / 2, &mut rng);
        let head2 = Linear::uniform(arch.hidden / 2, GAZE_DIM, FINAL_LAYER_SCALE, &mut rng);
        Self { arch: *arch, trunk, head1, head2 }
    }

    fn head(&self, h: Array2<f64>, trunk: TrunkTape, batch: usize) -> (Array2<f64>, HolisticTape) {
        let p1 = self.head1.forward(h.view());
        let g = gelu(&p1);
        let out = self.head2.forward(g.view());
        (out, HolisticTape { trunk, head_in: h, head_act_in: p1, head2_in: g, batch })
    }
}

impl GazeMlp for HolisticMlp {
    type Tape = HolisticTape;

    fn input_dim(&self) -> usize {
        GLOBAL_DIM
    }

    fn arch(&self) -> &MlpArch {
        &self.arch
    }

    fn forward_train(
        &mut self,
        x: ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, Self::Tape), NeuralError> {
        check_input(&x, GLOBAL_DIM, Mode::Train)?;
        let (h, trunk) = self.trunk.forward_train(x, rng);
        Ok(self.head(h, trunk, x.nrows()))
    }

    fn forward_eval_taped(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Self::Tape), NeuralError> {
        check_input(&x, GLOBAL_DIM, Mode::Eval)?;
        let (h, trunk) = self.trunk.forward_eval(x);
        Ok(self.head(h, trunk, x.nrows()))
    }

    fn backward(&mut self, tape: &Self::Tape, d_pred: &Array2<f64>) -> Result<(), NeuralError> {
        if d_pred.nrows() != tape.batch
            || d_pred.ncols() != GAZE_DIM
            || tape.head_in.ncols() != self.arch.hidden
        {
            return Err(NeuralError::StaleTape);
        }
        let d_g = self.head2.backward(tape.head2_in.view(), d_pred);
        let d_p1 = gelu_backward(&tape.head_act_in, &d_g);
        let d_h = self.head1.backward(tape.head_in.view(), &d_p1);
        self.trunk.backward(&tape.trunk, &d_h);
        Ok(())
    }

    fn zero_grads(&mut self) {
        self.trunk.zero_grads();
        self.head1.zero_grads();
        self.head2.zero_grads();
    }

    fn param_count(&self) -> usize {
        self.trunk.param_count() + self.head1.param_count() + self.head2.param_count()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.trunk.append_params(&mut out);
        self.head1.append_params(&mut out);
        self.head2.append_params(&mut out);
        out
    }

    fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        let mut cur = Cursor::new(params);
        self.trunk.read_params(&mut cur)?;
        self.head1.read_params(&mut cur)?;
        self.head2.read_params(&mut cur)?;
        cur.finish()
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.trunk.append_grads(&mut out);
        self.head1.append_grads(&mut out);
        self.head2.append_grads(&mut out);
        out
    }

    fn flat_state(&self) -> Vec<f64> {
        let mut out = self.flat_params();
        self.trunk.append_buffers(&mut out);
        out
    }

    fn set_flat_state(&mut self, state: &[f64]) -> Result<(), NeuralError> {
        let n = self.param_count();
        if state.len() < n {
            return Err(NeuralError::BadFlatLength { expected: n, got: state.len() });
        }
        self.set_flat_params(&state[..n])?;
        let mut cur = Cursor::new(&state[n..]);
        self.trunk.read_buffers(&mut cur)?;
        cur.finish()
    }
}

// ---------------------------------------------------------------------------
// Siamese MLP
// ---------------------------------------------------------------------------

/// Two-branch regressor: independent eye encoders over `f_L` and `f_R`
/// (not weight-tied), fused with the binocular geometry terms
/// `[latent_L, latent_R, delta_c, f_H]` by a Linear -> GELU -> Linear head.
#[derive(Debug, Clone)]
pub struct SiameseMlp {
    arch: MlpArch,
    left: Trunk,
    right: Trunk,
    fusion1: Linear,
    fusion2: Linear,
}

pub struct SiameseTape {
    left: TrunkTape,
    right: TrunkTape,
    fused_in: Array2<f64>,
    fusion_act_in: Array2<f64>,
    fusion2_in: Array2<f64>,
    batch: usize,
}

/// Width of the geometry tail appended to the two latents (delta_c + f_H).
const GEO_DIM: usize = SIAMESE_DIM - 2 * EYE_DIM;

impl SiameseMlp {
    pub fn init(arch: &MlpArch, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let left = Trunk::new(EYE_DIM, arch, &mut rng);
        let right = Trunk::new(EYE_DIM, arch, &mut rng);
        let fusion_in = 2 * arch.hidden + GEO_DIM;
        let fusion1 = Linear::fan_in(fusion_in, arch.hidden, &mut rng);
        let fusion2 = Linear::uniform(arch.hidden, GAZE_DIM, FINAL_LAYER_SCALE, &mut rng);
        Self { arch: *arch, left, right, fusion1, fusion2 }
    }

    fn fuse(
        &self,
        x: ArrayView2<f64>,
        zl: Array2<f64>,
        zr: Array2<f64>,
        left: TrunkTape,
        right: TrunkTape,
    ) -> (Array2<f64>, SiameseTape) {
        let d = self.arch.hidden;
        let geo = x.slice(s![.., 2 * EYE_DIM..]);
        let mut fused = Array2::<f64>::zeros((x.nrows(), 2 * d + GEO_DIM));
        fused.slice_mut(s![.., 0..d]).assign(&zl);
        fused.slice_mut(s![.., d..2 * d]).assign(&zr);
        fused.slice_mut(s![.., 2 * d..]).assign(&geo);

        let f1 = self.fusion1.forward(fused.view());
        let g = gelu(&f1);
        let out = self.fusion2.forward(g.view());
        let tape = SiameseTape {
            left,
            right,
            fused_in: fused,
            fusion_act_in: f1,
            fusion2_in: g,
            batch: x.nrows(),
        };
        (out, tape)
    }
}

impl GazeMlp for SiameseMlp {
    type Tape = SiameseTape;

    fn input_dim(&self) -> usize {
        SIAMESE_DIM
    }

    fn arch(&self) -> &MlpArch {
        &self.arch
    }

    fn forward_train(
        &mut self,
        x: ArrayView2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, Self::Tape), NeuralError> {
        check_input(&x, SIAMESE_DIM, Mode::Train)?;
        let (zl, lt) = self.left.forward_train(x.slice(s![.., 0..EYE_DIM]), rng);
        let (zr, rt) = self.right.forward_train(x.slice(s![.., EYE_DIM..2 * EYE_DIM]), rng);
        Ok(self.fuse(x, zl, zr, lt, rt))
    }

    fn forward_eval_taped(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Self::Tape), NeuralError> {
        check_input(&x, SIAMESE_DIM, Mode::Eval)?;
        let (zl, lt) = self.left.forward_eval(x.slice(s![.., 0..EYE_DIM]));
        let (zr, rt) = self.right.forward_eval(x.slice(s![.., EYE_DIM..2 * EYE_DIM]));
        Ok(self.fuse(x, zl, zr, lt, rt))
    }

    fn backward(&mut self, tape: &Self::Tape, d_pred: &Array2<f64>) -> Result<(), NeuralError> {
        let d = self.arch.hidden;
        if d_pred.nrows() != tape.batch
            || d_pred.ncols() != GAZE_DIM
            || tape.fused_in.ncols() != 2 * d + GEO_DIM
        {
            return Err(NeuralError::StaleTape);
        }
        let d_g = self.fusion2.backward(tape.fusion2_in.view(), d_pred);
        let d_f1 = gelu_backward(&tape.fusion_act_in, &d_g);
        let d_fused = self.fusion1.backward(tape.fused_in.view(), &d_f1);

        let d_zl = d_fused.slice_axis(Axis(1), (0..d).into()).to_owned();
        let d_zr = d_fused.slice_axis(Axis(1), (d..2 * d).into()).to_owned();
        self.left.backward(&tape.left, &d_zl);
        self.right.backward(&tape.right, &d_zr);
        Ok(())
    }

    fn zero_grads(&mut self) {
        self.left.zero_grads();
        self.right.zero_grads();
        self.fusion1.zero_grads();
        self.fusion2.zero_grads();
    }

    fn param_count(&self) -> usize {
        self.left.param_count()
            + self.right.param_count()
            + self.fusion1.param_count()
            + self.fusion2.param_count()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.left.append_params(&mut out);
        self.right.append_params(&mut out);
        self.fusion1.append_params(&mut out);
        self.fusion2.append_params(&mut out);
        out
    }

    fn set_flat_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        let mut cur = Cursor::new(params);
        self.left.read_params(&mut cur)?;
        self.right.read_params(&mut cur)?;
        self.fusion1.read_params(&mut cur)?;
        self.fusion2.read_params(&mut cur)?;
        cur.finish()
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.left.append_grads(&mut out);
        self.right.append_grads(&mut out);
        self.fusion1.append_grads(&mut out);
        self.fusion2.append_grads(&mut out);
        out
    }

    fn flat_state(&self) -> Vec<f64> {
        let mut out = self.flat_params();
        self.left.append_buffers(&mut out);
        self.right.append_buffers(&mut out);
        out
    }

    fn set_flat_state(&mut self, state: &[f64]) -> Result<(), NeuralError> {
        let n = self.param_count();
        if state.len() < n {
            return Err(NeuralError::BadFlatLength { expected: n, got: state.len() });
        }
        self.set_flat_params(&state[..n])?;
        let mut cur = Cursor::new(&state[n..]);
        self.left.read_buffers(&mut cur)?;
        self.right.read_buffers(&mut cur)?;
        cur.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::loss::angular_loss_and_grad;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    /// Frozen parameter counts; any wiring change must update these on
    /// purpose.
    ///
    /// Holistic (D=256, K=3): proj 40*256+256 + bn 512, three blocks of
    /// 2*(256*256+256+512), head 256*128+128 + 128*3+3 = 442115.
    /// Siamese (D=64, K=3): two encoders of (18*64+64+128 + 3*2*(64*64+64+128))
    /// plus fusion 134*64+64 + 64*3+3 = 62979.
    const HOLISTIC_PARAMS: usize = 442_115;
    const SIAMESE_PARAMS: usize = 62_979;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-0.5..0.5))
    }

    fn unit_targets(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let mut t = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        for mut row in t.rows_mut() {
            row[2] -= 1.0; // bias away from zero norm
            let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.mapv_inplace(|v| v / nrm);
        }
        t
    }

    #[test]
    fn parameter_counts_are_frozen() {
        let h = HolisticMlp::init(&MlpArch::holistic_default(), 0);
        assert_eq!(h.param_count(), HOLISTIC_PARAMS);
        assert_eq!(h.flat_params().len(), HOLISTIC_PARAMS);
        let s = SiameseMlp::init(&MlpArch::siamese_default(), 0);
        assert_eq!(s.param_count(), SIAMESE_PARAMS);
        assert_eq!(s.flat_params().len(), SIAMESE_PARAMS);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = HolisticMlp::init(&MlpArch::holistic_default(), 7);
        let b = HolisticMlp::init(&MlpArch::holistic_default(), 7);
        assert_eq!(a.flat_params(), b.flat_params());
        let c = HolisticMlp::init(&MlpArch::holistic_default(), 8);
        assert_ne!(a.flat_params(), c.flat_params());
    }

    #[test]
    fn fresh_predictions_are_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..1000 {
            let model = SiameseMlp::init(&MlpArch::siamese_default(), seed);
            let x = random_batch(&mut rng, 1, SIAMESE_DIM);
            let y = model.forward_eval(x.view()).unwrap();
            let norm = y.row(0).dot(&y.row(0)).sqrt();
            assert!(norm > 1e-6, "seed {seed} produced norm {norm}");
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = SiameseMlp::init(&MlpArch::siamese_default(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_batch(&mut rng, 5, SIAMESE_DIM);
        let a = model.forward_eval(x.view()).unwrap();
        let b = model.forward_eval(x.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_and_batch_checks() {
        let mut model = HolisticMlp::init(&MlpArch::holistic_default(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = random_batch(&mut rng, 4, 10);
        assert!(matches!(
            model.forward_train(bad.view(), &mut rng),
            Err(NeuralError::DimensionMismatch { .. })
        ));
        let single = random_batch(&mut rng, 1, GLOBAL_DIM);
        assert_eq!(
            model.forward_train(single.view(), &mut rng).err(),
            Some(NeuralError::BatchTooSmall(1))
        );
        // Eval accepts a single sample.
        assert!(model.forward_eval(single.view()).is_ok());
    }

    #[test]
    fn residual_block_with_disabled_f_is_identity() {
        let arch = MlpArch { hidden: 16, blocks: 1, dropout: 0.0, ..MlpArch::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut block = ResidualBlock::new(&arch, &mut rng);
        block.disable_residual_function();
        let h = random_batch(&mut rng, 6, 16);
        let (out, _) = block.forward_eval(&h);
        assert_eq!(out, h);
    }

    #[test]
    fn train_and_eval_agree_with_frozen_statistics() {
        // momentum = 1 makes running statistics equal the (biased) batch
        // statistics of the last train pass; with dropout 0 the two modes
        // then compute the same function.
        let arch = MlpArch { hidden: 32, blocks: 2, dropout: 0.0, bn_momentum: 1.0, ..MlpArch::default() };
        let mut model = SiameseMlp::init(&arch, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_batch(&mut rng, 16, SIAMESE_DIM);
        let (train_out, _) = model.forward_train(x.view(), &mut rng).unwrap();
        let eval_out = model.forward_eval(x.view()).unwrap();
        for (a, b) in train_out.iter().zip(eval_out.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn flat_param_round_trip() {
        let mut a = SiameseMlp::init(&MlpArch::siamese_default(), 1);
        let b = SiameseMlp::init(&MlpArch::siamese_default(), 2);
        a.set_flat_params(&b.flat_params()).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        let mut st = a.flat_state();
        st[0] += 1.0;
        a.set_flat_state(&st).unwrap();
        assert_eq!(a.flat_state(), st);
        assert!(a.set_flat_params(&st).is_err()); // wrong length
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let mut model = HolisticMlp::init(&MlpArch::holistic_default(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_batch(&mut rng, 8, GLOBAL_DIM);
        let (out, tape) = model.forward_train(x.view(), &mut rng).unwrap();
        model.zero_grads();
        let zero = Array2::zeros(out.raw_dim());
        model.backward(&tape, &zero).unwrap();
        assert!(model.flat_grads().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_sample_doubles_its_gradient_contribution() {
        // A batch [a, a] must produce exactly twice the parameter gradient
        // of [a] for a fixed (per-sample) upstream gradient.
        let arch = MlpArch { hidden: 16, blocks: 1, dropout: 0.0, ..MlpArch::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_batch(&mut rng, 1, SIAMESE_DIM);
        let mut two = Array2::zeros((2, SIAMESE_DIM));
        two.row_mut(0).assign(&a.row(0));
        two.row_mut(1).assign(&a.row(0));

        let mut model = SiameseMlp::init(&arch, 11);
        let (_, tape) = model.forward_eval_taped(two.view()).unwrap();
        model.zero_grads();
        let up = Array2::from_shape_fn((2, 3), |(_, j)| (j as f64 + 1.0) * 0.1);
        model.backward(&tape, &up).unwrap();
        let g2 = model.flat_grads();

        let mut model1 = SiameseMlp::init(&arch, 11);
        let (_, tape1) = model1.forward_eval_taped(a.view()).unwrap();
        model1.zero_grads();
        let up1 = Array2::from_shape_fn((1, 3), |(_, j)| (j as f64 + 1.0) * 0.1);
        model1.backward(&tape1, &up1).unwrap();
        let g1 = model1.flat_grads();

        for (x2, x1) in g2.iter().zip(g1.iter()) {
            assert_relative_eq!(*x2, 2.0 * x1, epsilon = 1e-12, max_relative = 1e-9);
        }
    }

    fn gradient_check<M: GazeMlp>(model: &mut M, x: &Array2<f64>, t: &Array2<f64>, samples: usize, seed: u64) {
        let (out, tape) = model.forward_eval_taped(x.view()).unwrap();
        let (_, d_pred) = angular_loss_and_grad(&out, t).unwrap();
        model.zero_grads();
        model.backward(&tape, &d_pred).unwrap();
        let analytic = model.flat_grads();

        let mut params = model.flat_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = 1e-5;
        for _ in 0..samples {
            let idx = rng.gen_range(0..params.len());
            let orig = params[idx];
            params[idx] = orig + eps;
            model.set_flat_params(&params).unwrap();
            let (lp, _) = angular_loss_and_grad(&model.forward_eval(x.view()).unwrap(), t).unwrap();
            params[idx] = orig - eps;
            model.set_flat_params(&params).unwrap();
            let (lm, _) = angular_loss_and_grad(&model.forward_eval(x.view()).unwrap(), t).unwrap();
            params[idx] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            let scale = fd.abs().max(analytic[idx].abs()).max(1e-7);
            assert!(
                (fd - analytic[idx]).abs() / scale < 1e-4,
                "param {idx}: analytic {} vs fd {}",
                analytic[idx],
                fd
            );
        }
        model.set_flat_params(&params).unwrap();
    }

    #[test]
    fn holistic_gradient_check() {
        let arch = MlpArch { hidden: 32, blocks: 2, dropout: 0.0, ..MlpArch::default() };
        let mut model = HolisticMlp::init(&arch, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = random_batch(&mut rng, 8, GLOBAL_DIM);
        let t = unit_targets(&mut rng, 8);
        gradient_check(&mut model, &x, &t, 150, 23);
    }

    #[test]
    fn siamese_gradient_check() {
        let arch = MlpArch { hidden: 16, blocks: 2, dropout: 0.0, ..MlpArch::default() };
        let mut model = SiameseMlp::init(&arch, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_batch(&mut rng, 8, SIAMESE_DIM);
        let t = unit_targets(&mut rng, 8);
        gradient_check(&mut model, &x, &t, 150, 33);
    }
}
