use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::{glorot_uniform, Activation};
use crate::tape::{Tape, Var};
use crate::{Error, Result, Tensor};

/// Fully-connected layer: activation(W x + b).
#[derive(Clone, Debug)]
pub struct DenseLayer {
    /// `[out, in]` weight matrix.
    pub w: Tensor,
    /// `[out]` bias.
    pub b: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(w: Tensor, b: Tensor, activation: Activation) -> Result<Self> {
        if w.shape().len() != 2 || b.shape() != [w.shape()[0]] {
            return Err(Error::invalid("dense layer weight/bias shapes disagree"));
        }
        Ok(DenseLayer { w, b, activation })
    }

    pub fn glorot(input: usize, output: usize, activation: Activation, rng: &mut dyn RngCore) -> Self {
        let w = Tensor::new(vec![output, input], glorot_uniform(input, output, rng, output * input))
            .expect("weight shape");
        DenseLayer {
            w,
            b: Tensor::zeros(vec![output]),
            activation,
        }
    }

    fn forward(&self, tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
        let wx = tape.matmul(w, x)?;
        let z = tape.add(wx, b)?;
        self.activation.apply(tape, z)
    }
}

/// 1D cross-correlation with 'valid' padding over `[in_ch, len]` input.
#[derive(Clone, Debug)]
pub struct Conv1dLayer {
    /// `[out_ch, in_ch, k]` kernels.
    pub kernels: Tensor,
    /// `[out_ch]` bias.
    pub bias: Tensor,
    pub activation: Activation,
}

impl Conv1dLayer {
    pub fn glorot(
        in_ch: usize,
        out_ch: usize,
        k: usize,
        activation: Activation,
        rng: &mut dyn RngCore,
    ) -> Self {
        let fan_in = in_ch * k;
        let fan_out = out_ch * k;
        let kernels = Tensor::new(
            vec![out_ch, in_ch, k],
            glorot_uniform(fan_in, fan_out, rng, out_ch * in_ch * k),
        )
        .expect("kernel shape");
        Conv1dLayer {
            kernels,
            bias: Tensor::zeros(vec![out_ch]),
            activation,
        }
    }

    fn forward(&self, tape: &mut Tape, x: Var, kv: Var, bv: Var) -> Result<Var> {
        let (out_ch, in_ch, k) = (
            self.kernels.shape()[0],
            self.kernels.shape()[1],
            self.kernels.shape()[2],
        );
        let xs = tape.shape(x).to_vec();
        let len = match xs[..] {
            [c, len] if c == in_ch => len,
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "conv1d",
                    lhs: vec![in_ch, 0],
                    rhs: xs,
                })
            }
        };
        if len < k {
            return Err(Error::invalid("conv1d input shorter than kernel"));
        }
        let l_out = len - k + 1;
        // Unrolled patches: row ci*k + dk, column p reads x[ci, p + dk].
        let mut idx = Vec::with_capacity(in_ch * k * l_out);
        for ci in 0..in_ch {
            for dk in 0..k {
                for p in 0..l_out {
                    idx.push(ci * len + p + dk);
                }
            }
        }
        let col = tape.gather_shaped(x, idx, vec![in_ch * k, l_out])?;
        let k2 = tape.reshape(kv, vec![out_ch, in_ch * k])?;
        let y = tape.matmul(k2, col)?;
        let bcol = tape.reshape(bv, vec![out_ch, 1])?;
        let ones = tape.constant(Tensor::filled(vec![1, l_out], 1.0));
        let bmat = tape.matmul(bcol, ones)?;
        let y = tape.add(y, bmat)?;
        self.activation.apply(tape, y)
    }
}

/// 2D cross-correlation with 'valid' padding over `[in_ch, h, w]` input.
#[derive(Clone, Debug)]
pub struct Conv2dLayer {
    /// `[out_ch, in_ch, k, k]` kernels.
    pub kernels: Tensor,
    /// `[out_ch]` bias.
    pub bias: Tensor,
    pub activation: Activation,
}

impl Conv2dLayer {
    pub fn glorot(
        in_ch: usize,
        out_ch: usize,
        k: usize,
        activation: Activation,
        rng: &mut dyn RngCore,
    ) -> Self {
        let fan_in = in_ch * k * k;
        let fan_out = out_ch * k * k;
        let kernels = Tensor::new(
            vec![out_ch, in_ch, k, k],
            glorot_uniform(fan_in, fan_out, rng, out_ch * in_ch * k * k),
        )
        .expect("kernel shape");
        Conv2dLayer {
            kernels,
            bias: Tensor::zeros(vec![out_ch]),
            activation,
        }
    }

    fn forward(&self, tape: &mut Tape, x: Var, kv: Var, bv: Var) -> Result<Var> {
        let (out_ch, in_ch, k) = (
            self.kernels.shape()[0],
            self.kernels.shape()[1],
            self.kernels.shape()[2],
        );
        let xs = tape.shape(x).to_vec();
        let (h, w) = match xs[..] {
            [c, h, w] if c == in_ch => (h, w),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "conv2d",
                    lhs: vec![in_ch, 0, 0],
                    rhs: xs,
                })
            }
        };
        if h < k || w < k {
            return Err(Error::invalid("conv2d input smaller than kernel"));
        }
        let (ho, wo) = (h - k + 1, w - k + 1);
        let mut idx = Vec::with_capacity(in_ch * k * k * ho * wo);
        for ci in 0..in_ch {
            for di in 0..k {
                for dj in 0..k {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            idx.push(ci * h * w + (oy + di) * w + (ox + dj));
                        }
                    }
                }
            }
        }
        let col = tape.gather_shaped(x, idx, vec![in_ch * k * k, ho * wo])?;
        let k2 = tape.reshape(kv, vec![out_ch, in_ch * k * k])?;
        let y = tape.matmul(k2, col)?;
        let bcol = tape.reshape(bv, vec![out_ch, 1])?;
        let ones = tape.constant(Tensor::filled(vec![1, ho * wo], 1.0));
        let bmat = tape.matmul(bcol, ones)?;
        let y = tape.add(y, bmat)?;
        let y = self.activation.apply(tape, y)?;
        tape.reshape(y, vec![out_ch, ho, wo])
    }
}

/// One stage of an encoder stack.
#[derive(Clone, Debug)]
pub enum Layer {
    Dense(DenseLayer),
    Conv1d(Conv1dLayer),
    Conv2d(Conv2dLayer),
    MaxPool1d { pool: usize },
    MaxPool2d { pool: usize },
    AvgPool1d { pool: usize },
    AvgPool2d { pool: usize },
    /// Inverted dropout: in training, zero with probability `rate` and scale
    /// survivors by 1/(1-rate); identity in inference.
    Dropout { rate: f64 },
    Flatten,
}

impl Layer {
    pub(crate) fn param_tensors(&self) -> usize {
        match self {
            Layer::Dense(_) | Layer::Conv1d(_) | Layer::Conv2d(_) => 2,
            _ => 0,
        }
    }

    pub(crate) fn collect_params<'a>(&'a self, out: &mut Vec<&'a Tensor>) {
        match self {
            Layer::Dense(l) => {
                out.push(&l.w);
                out.push(&l.b);
            }
            Layer::Conv1d(l) => {
                out.push(&l.kernels);
                out.push(&l.bias);
            }
            Layer::Conv2d(l) => {
                out.push(&l.kernels);
                out.push(&l.bias);
            }
            _ => {}
        }
    }

    pub(crate) fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        match self {
            Layer::Dense(l) => {
                out.push(&mut l.w);
                out.push(&mut l.b);
            }
            Layer::Conv1d(l) => {
                out.push(&mut l.kernels);
                out.push(&mut l.bias);
            }
            Layer::Conv2d(l) => {
                out.push(&mut l.kernels);
                out.push(&mut l.bias);
            }
            _ => {}
        }
    }

    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        vars: &[Var],
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        match self {
            Layer::Dense(l) => l.forward(tape, x, vars[0], vars[1]),
            Layer::Conv1d(l) => l.forward(tape, x, vars[0], vars[1]),
            Layer::Conv2d(l) => l.forward(tape, x, vars[0], vars[1]),
            Layer::MaxPool1d { pool } => max_pool_1d(tape, x, *pool),
            Layer::MaxPool2d { pool } => max_pool_2d(tape, x, *pool),
            Layer::AvgPool1d { pool } => avg_pool_1d(tape, x, *pool),
            Layer::AvgPool2d { pool } => avg_pool_2d(tape, x, *pool),
            Layer::Dropout { rate } => dropout(tape, x, *rate, rng),
            Layer::Flatten => {
                let n = tape.values(x).len();
                tape.reshape(x, vec![n])
            }
        }
    }
}

/// Max pooling over non-overlapping windows of a `[ch, len]` input.
///
/// The backward pass routes the gradient to the window argmax; ties go to
/// the first (lowest-index) maximal entry.
pub fn max_pool_1d(tape: &mut Tape, x: Var, pool: usize) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let (ch, len) = match xs[..] {
        [ch, len] => (ch, len),
        _ => return Err(Error::invalid("max_pool_1d expects a [ch, len] input")),
    };
    if pool == 0 || pool > len {
        return Err(Error::invalid("pool size larger than input"));
    }
    let lo = len / pool;
    let xv = tape.values(x);
    let mut idx = Vec::with_capacity(ch * lo);
    for c in 0..ch {
        for t in 0..lo {
            let base = c * len + t * pool;
            let mut best = base;
            for d in 1..pool {
                if xv[base + d] > xv[best] {
                    best = base + d;
                }
            }
            idx.push(best);
        }
    }
    tape.gather_shaped(x, idx, vec![ch, lo])
}

/// Max pooling over non-overlapping `pool x pool` windows of `[ch, h, w]`.
pub fn max_pool_2d(tape: &mut Tape, x: Var, pool: usize) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let (ch, h, w) = match xs[..] {
        [ch, h, w] => (ch, h, w),
        _ => return Err(Error::invalid("max_pool_2d expects a [ch, h, w] input")),
    };
    if pool == 0 || pool > h || pool > w {
        return Err(Error::invalid("pool size larger than input"));
    }
    let (ho, wo) = (h / pool, w / pool);
    let xv = tape.values(x);
    let mut idx = Vec::with_capacity(ch * ho * wo);
    for c in 0..ch {
        for ty in 0..ho {
            for tx in 0..wo {
                let mut best = c * h * w + (ty * pool) * w + tx * pool;
                for dy in 0..pool {
                    for dx in 0..pool {
                        let p = c * h * w + (ty * pool + dy) * w + (tx * pool + dx);
                        if xv[p] > xv[best] {
                            best = p;
                        }
                    }
                }
                idx.push(best);
            }
        }
    }
    tape.gather_shaped(x, idx, vec![ch, ho, wo])
}

/// Average pooling over non-overlapping windows of a `[ch, len]` input.
pub fn avg_pool_1d(tape: &mut Tape, x: Var, pool: usize) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let (ch, len) = match xs[..] {
        [ch, len] => (ch, len),
        _ => return Err(Error::invalid("avg_pool_1d expects a [ch, len] input")),
    };
    if pool == 0 || pool > len {
        return Err(Error::invalid("pool size larger than input"));
    }
    let lo = len / pool;
    let mut acc: Option<Var> = None;
    for d in 0..pool {
        let mut idx = Vec::with_capacity(ch * lo);
        for c in 0..ch {
            for t in 0..lo {
                idx.push(c * len + t * pool + d);
            }
        }
        let part = tape.gather_shaped(x, idx, vec![ch, lo])?;
        acc = Some(match acc {
            Some(a) => tape.add(a, part)?,
            None => part,
        });
    }
    tape.scale(acc.expect("pool >= 1"), 1.0 / pool as f64)
}

/// Average pooling over non-overlapping `pool x pool` windows of `[ch, h, w]`.
pub fn avg_pool_2d(tape: &mut Tape, x: Var, pool: usize) -> Result<Var> {
    let xs = tape.shape(x).to_vec();
    let (ch, h, w) = match xs[..] {
        [ch, h, w] => (ch, h, w),
        _ => return Err(Error::invalid("avg_pool_2d expects a [ch, h, w] input")),
    };
    if pool == 0 || pool > h || pool > w {
        return Err(Error::invalid("pool size larger than input"));
    }
    let (ho, wo) = (h / pool, w / pool);
    let mut acc: Option<Var> = None;
    for dy in 0..pool {
        for dx in 0..pool {
            let mut idx = Vec::with_capacity(ch * ho * wo);
            for c in 0..ch {
                for ty in 0..ho {
                    for tx in 0..wo {
                        idx.push(c * h * w + (ty * pool + dy) * w + (tx * pool + dx));
                    }
                }
            }
            let part = tape.gather_shaped(x, idx, vec![ch, ho, wo])?;
            acc = Some(match acc {
                Some(a) => tape.add(a, part)?,
                None => part,
            });
        }
    }
    tape.scale(acc.expect("pool >= 1"), 1.0 / (pool * pool) as f64)
}

/// Inverted dropout. Training mode needs an RNG; inference is the identity.
pub fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: Option<&mut dyn RngCore>) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid("dropout rate must be in [0, 1)"));
    }
    let rng = match rng {
        Some(rng) if rate > 0.0 => rng,
        _ => return Ok(x),
    };
    let keep = 1.0 - rate;
    let n = tape.values(x).len();
    let mask: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect();
    let shape = tape.shape(x).to_vec();
    let mask = tape.constant(Tensor::new(shape, mask).expect("mask shape"));
    tape.mul(x, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Model};
    use crate::tape::GradCheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_identity_and_bias_cases() {
        let mut t = Tape::new();
        let l = DenseLayer::new(
            Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(vec![2]),
            Activation::Identity,
        )
        .unwrap();
        let x = t.constant(Tensor::vector(vec![0.3, -0.7]));
        let w = t.constant(l.w.clone());
        let b = t.constant(l.b.clone());
        let y = l.forward(&mut t, x, w, b).unwrap();
        assert_eq!(t.values(y), &[0.3, -0.7]);

        // Zero weights with relu bias: relu(c).
        let l = DenseLayer::new(
            Tensor::matrix(2, 2, vec![0.0; 4]).unwrap(),
            Tensor::vector(vec![1.5, -2.0]),
            Activation::Relu,
        )
        .unwrap();
        let w = t.constant(l.w.clone());
        let b = t.constant(l.b.clone());
        let y = l.forward(&mut t, x, w, b).unwrap();
        assert_eq!(t.values(y), &[1.5, 0.0]);
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = DenseLayer::glorot(4, 3, Activation::Tanh, &mut rng);
        let x0 = Tensor::vector(vec![0.25, -0.5, 0.75, 0.1]);
        let gc = GradCheck::new(1e-5);
        let err = gc
            .run(
                |t, vs| {
                    let y = layer.forward(t, vs[0], vs[1], vs[2])?;
                    t.sum(y)
                },
                &[x0, layer.w.clone(), layer.b.clone()],
            )
            .unwrap();
        assert!(err <= 1e-6, "dense grad rel err {err}");
    }

    #[test]
    fn conv1d_zero_kernels_broadcast_bias() {
        let mut t = Tape::new();
        let layer = Conv1dLayer {
            kernels: Tensor::new(vec![2, 1, 3], vec![0.0; 6]).unwrap(),
            bias: Tensor::vector(vec![1.0, -2.0]),
            activation: Activation::Identity,
        };
        let x = t.constant(Tensor::new(vec![1, 5], vec![9.0, 8.0, 7.0, 6.0, 5.0]).unwrap());
        let kv = t.constant(layer.kernels.clone());
        let bv = t.constant(layer.bias.clone());
        let y = layer.forward(&mut t, x, kv, bv).unwrap();
        assert_eq!(t.shape(y), &[2, 3]);
        assert_eq!(t.values(y), &[1.0, 1.0, 1.0, -2.0, -2.0, -2.0]);
    }

    #[test]
    fn conv1d_moving_sum_kernel() {
        let mut t = Tape::new();
        let layer = Conv1dLayer {
            kernels: Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap(),
            bias: Tensor::zeros(vec![1]),
            activation: Activation::Identity,
        };
        let x = t.constant(Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let kv = t.constant(layer.kernels.clone());
        let bv = t.constant(layer.bias.clone());
        let y = layer.forward(&mut t, x, kv, bv).unwrap();
        assert_eq!(t.values(y), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c1 = Conv1dLayer::glorot(2, 3, 3, Activation::Tanh, &mut rng);
        let x0 = Tensor::new(vec![2, 6], (0..12).map(|i| 0.1 * i as f64 - 0.5).collect()).unwrap();
        let gc = GradCheck::new(1e-5);
        let err = gc
            .run(
                |t, vs| {
                    let y = c1.forward(t, vs[0], vs[1], vs[2])?;
                    t.sum(y)
                },
                &[x0, c1.kernels.clone(), c1.bias.clone()],
            )
            .unwrap();
        assert!(err <= 1e-6, "conv1d grad rel err {err}");

        let c2 = Conv2dLayer::glorot(1, 2, 2, Activation::Sigmoid, &mut rng);
        let x0 = Tensor::new(vec![1, 4, 4], (0..16).map(|i| 0.07 * i as f64 - 0.4).collect())
            .unwrap();
        let err = gc
            .run(
                |t, vs| {
                    let y = c2.forward(t, vs[0], vs[1], vs[2])?;
                    t.sum(y)
                },
                &[x0, c2.kernels.clone(), c2.bias.clone()],
            )
            .unwrap();
        assert!(err <= 1e-6, "conv2d grad rel err {err}");
    }

    #[test]
    fn max_pool_basics_and_tie_break() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = max_pool_2d(&mut t, x, 2).unwrap();
        assert_eq!(t.values(y), &[4.0]);

        // All-equal window: gradient routes to the first (row-major) entry.
        let x = t.param(Tensor::new(vec![1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap());
        let y = max_pool_2d(&mut t, x, 2).unwrap();
        let loss = t.sum(y).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.of(x).values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn avg_pool_means_windows() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![1, 4], vec![1.0, 3.0, 5.0, 9.0]).unwrap());
        let y = avg_pool_1d(&mut t, x, 2).unwrap();
        assert_eq!(t.values(y), &[2.0, 7.0]);
        let x = t.constant(Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = avg_pool_2d(&mut t, x, 2).unwrap();
        assert_eq!(t.values(y), &[2.5]);
    }

    #[test]
    fn pool_larger_than_input_is_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        assert!(max_pool_1d(&mut t, x, 4).is_err());
        assert!(avg_pool_1d(&mut t, x, 4).is_err());
    }

    #[test]
    fn dropout_inference_is_exact_identity() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![0.4, -0.2, 1.1]));
        let y = dropout(&mut t, x, 0.2, None).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn dropout_preserves_expectation_within_one_percent() {
        let mut t = Tape::new();
        let n = 100_000;
        let x = t.constant(Tensor::filled(vec![n], 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y = dropout(&mut t, x, 0.2, Some(&mut rng)).unwrap();
        let mean: f64 = t.values(y).iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "dropout mean {mean}");
    }

    #[test]
    fn stacked_model_runs_conv_pool_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::new(vec![
            Layer::Conv1d(Conv1dLayer::glorot(1, 4, 3, Activation::Tanh, &mut rng)),
            Layer::AvgPool1d { pool: 2 },
            Layer::Flatten,
            Layer::Dense(DenseLayer::glorot(12, 2, Activation::Sigmoid, &mut rng)),
        ]);
        let x = Tensor::new(vec![1, 8], (0..8).map(|i| i as f64 * 0.1).collect()).unwrap();
        let y = model.infer(&x).unwrap();
        assert_eq!(y.shape(), &[2]);
        assert!(y.values().iter().all(|v| (0.0..1.0).contains(v)));
    }
}
