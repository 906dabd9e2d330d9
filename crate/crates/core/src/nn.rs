//! One-hidden-layer ReLU perceptron with hand-written backward pass, SGD with
//! momentum and decoupled-from-bias weight decay, and a half-cosine schedule.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pre-softmax scores, one row per sample.
pub type LogitMatrix = Matrix;
/// Row-stochastic matrix of class probabilities.
pub type ProbMatrix = Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSizes {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// Per-parameter tensors of the network. Used for weights, gradients and
/// momentum buffers alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensors {
    /// `hidden × input`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `classes × hidden`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

pub type Gradients = Tensors;

impl Tensors {
    pub fn zeros(sizes: LayerSizes) -> Self {
        Tensors {
            w1: Matrix::zeros(sizes.hidden, sizes.input),
            b1: vec![0.0; sizes.hidden],
            w2: Matrix::zeros(sizes.classes, sizes.hidden),
            b2: vec![0.0; sizes.classes],
        }
    }

    /// Named flat views in a fixed order: w1, b1, w2, b2.
    pub fn views(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("w1", self.w1.as_slice()),
            ("b1", &self.b1),
            ("w2", self.w2.as_slice()),
            ("b2", &self.b2),
        ]
    }

    pub fn views_mut(&mut self) -> [(&'static str, &mut [f64]); 4] {
        [
            ("w1", self.w1.as_mut_slice()),
            ("b1", &mut self.b1),
            ("w2", self.w2.as_mut_slice()),
            ("b2", &mut self.b2),
        ]
    }

    /// All entries concatenated in `views` order.
    pub fn flatten(&self) -> Vec<f64> {
        self.views().iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.views().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }

    fn same_shape(&self, other: &Tensors) -> bool {
        self.w1.shape() == other.w1.shape()
            && self.b1.len() == other.b1.len()
            && self.w2.shape() == other.w2.shape()
            && self.b2.len() == other.b2.len()
    }
}

/// Network weights plus the optimizer's momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub sizes: LayerSizes,
    pub weights: Tensors,
    pub momentum: Tensors,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, zero momentum.
    pub fn init<R: Rng + ?Sized>(sizes: LayerSizes, rng: &mut R) -> Self {
        let mut weights = Tensors::zeros(sizes);
        glorot_fill(&mut weights.w1, rng);
        glorot_fill(&mut weights.w2, rng);
        ModelParams {
            sizes,
            weights,
            momentum: Tensors::zeros(sizes),
        }
    }

    pub fn zeros(sizes: LayerSizes) -> Self {
        ModelParams {
            sizes,
            weights: Tensors::zeros(sizes),
            momentum: Tensors::zeros(sizes),
        }
    }

    /// Squared L2 norm of the weight matrices and biases.
    pub fn weight_norm_sq(&self) -> f64 {
        self.weights.flatten().iter().map(|x| x * x).sum()
    }
}

fn glorot_fill<R: Rng + ?Sized>(m: &mut Matrix, rng: &mut R) {
    let (fan_out, fan_in) = m.shape();
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in m.as_mut_slice() {
        *x = rng.random_range(-a..=a);
    }
}

/// Intermediate values kept from [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre_activation: Matrix,
    hidden: Matrix,
}

pub fn forward(params: &ModelParams, batch: &Matrix) -> Result<(LogitMatrix, ForwardCache)> {
    let sizes = params.sizes;
    if batch.cols() != sizes.input {
        return Err(Error::Argument(format!(
            "batch has {} features, network expects {}",
            batch.cols(),
            sizes.input
        )));
    }
    let w = &params.weights;
    let n = batch.rows();
    let mut pre = Matrix::zeros(n, sizes.hidden);
    let mut hidden = Matrix::zeros(n, sizes.hidden);
    let mut logits = Matrix::zeros(n, sizes.classes);
    for b in 0..n {
        let x = batch.row(b);
        for j in 0..sizes.hidden {
            let z = w.b1[j] + dot(w.w1.row(j), x);
            pre.set(b, j, z);
            hidden.set(b, j, z.max(0.0));
        }
        let h = hidden.row(b);
        for k in 0..sizes.classes {
            logits.set(b, k, w.b2[k] + dot(w.w2.row(k), h));
        }
    }
    Ok((
        logits,
        ForwardCache {
            input: batch.clone(),
            pre_activation: pre,
            hidden,
        },
    ))
}

pub fn backward(params: &ModelParams, cache: &ForwardCache, grad_logits: &LogitMatrix) -> Result<Gradients> {
    let sizes = params.sizes;
    let n = cache.input.rows();
    if grad_logits.shape() != (n, sizes.classes) {
        return Err(Error::Argument(format!(
            "logit gradient has shape {:?}, expected ({n}, {})",
            grad_logits.shape(),
            sizes.classes
        )));
    }
    let w = &params.weights;
    let mut g = Tensors::zeros(sizes);
    let mut d_hidden = vec![0.0; sizes.hidden];
    for b in 0..n {
        let dz = grad_logits.row(b);
        let h = cache.hidden.row(b);
        d_hidden.iter_mut().for_each(|x| *x = 0.0);
        for (k, &gk) in dz.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            g.b2[k] += gk;
            axpy(g.w2.row_mut(k), gk, h);
            axpy(&mut d_hidden, gk, w.w2.row(k));
        }
        let pre = cache.pre_activation.row(b);
        let x = cache.input.row(b);
        for j in 0..sizes.hidden {
            if pre[j] <= 0.0 {
                continue;
            }
            let da = d_hidden[j];
            g.b1[j] += da;
            axpy(g.w1.row_mut(j), da, x);
        }
    }
    Ok(g)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &LogitMatrix) -> ProbMatrix {
    let mut out = logits.clone();
    for b in 0..out.rows() {
        softmax_in_place(out.row_mut(b));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    row.iter_mut().for_each(|x| *x /= sum);
}

/// One SGD step with heavy-ball momentum:
/// `v ← μ v + g + λ w` (λ on weight matrices only), then `w ← w − lr v`.
pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, lr: f64, momentum: f64, weight_decay: f64) -> Result<()> {
    if !params.weights.same_shape(grads) {
        return Err(Error::Argument("gradient shapes do not match parameters".into()));
    }
    let decayed = ["w1", "w2"];
    let params_views = params.weights.views_mut();
    let velocity_views = params.momentum.views_mut();
    for (((name, p), (_, v)), (_, g)) in params_views.into_iter().zip(velocity_views).zip(grads.views()) {
        let wd = if decayed.contains(&name) { weight_decay } else { 0.0 };
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = momentum * *v + g + wd * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}

/// Half-cosine decay from `lr0` at step 0 to zero at `total_steps`.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> f64 {
    if total_steps == 0 {
        return lr0;
    }
    let t = step.min(total_steps) as f64 / total_steps as f64;
    lr0 * 0.5 * (1.0 + (PI * t).cos())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SIZES: LayerSizes = LayerSizes {
        input: 3,
        hidden: 4,
        classes: 2,
    };

    fn random_batch(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data)
    }

    #[test]
    fn zero_params_give_uniform_softmax() {
        let params = ModelParams::zeros(SIZES);
        let batch = Matrix::from_rows(&[[1.0, 2.0, 3.0]], 3);
        let (logits, _) = forward(&params, &batch).unwrap();
        assert_eq!(logits.as_slice(), &[0.0, 0.0]);
        assert_eq!(softmax(&logits).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_batch_gives_empty_logits() {
        let params = ModelParams::zeros(SIZES);
        let (logits, _) = forward(&params, &Matrix::zeros(0, 3)).unwrap();
        assert_eq!(logits.shape(), (0, 2));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let params = ModelParams::zeros(SIZES);
        assert!(forward(&params, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn hand_evaluated_forward() {
        // 2 -> 2 -> 2 with identity-like weights.
        let sizes = LayerSizes { input: 2, hidden: 2, classes: 2 };
        let mut params = ModelParams::zeros(sizes);
        params.weights.w1 = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]], 2);
        params.weights.b1 = vec![0.5, -0.5];
        params.weights.w2 = Matrix::from_rows(&[[2.0, 0.0], [1.0, 1.0]], 2);
        params.weights.b2 = vec![0.0, 1.0];
        let (logits, _) = forward(&params, &Matrix::from_rows(&[[1.0, 0.0]], 2)).unwrap();
        // hidden = relu((1.5, -0.5)) = (1.5, 0); logits = (3.0, 2.5)
        assert_eq!(logits.as_slice(), &[3.0, 2.5]);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&Matrix::from_rows(&[[0.0, 0.0, 0.0]], 3));
        for x in p.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&Matrix::from_rows(&[[1000.0, 0.0]], 2));
        assert_eq!(p.get(0, 0), 1.0);
        assert!(p.get(0, 1) >= 0.0 && p.get(0, 1) < 1e-300);
        let p = softmax(&Matrix::from_rows(&[[1.0, 2.0]], 2));
        assert!((p.get(0, 0) - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((p.get(0, 1) - 0.731_058_578_630_005).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ModelParams::init(SIZES, &mut rng);
        let batch = random_batch(3, 3, &mut rng);
        let (_, cache) = forward(&params, &batch).unwrap();
        let g = backward(&params, &cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g.flatten().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn duplicated_sample_doubles_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(SIZES, &mut rng);
        let one = random_batch(1, 3, &mut rng);
        let up = Matrix::from_rows(&[[0.3, -0.7]], 2);
        let (_, cache) = forward(&params, &one).unwrap();
        let single = backward(&params, &cache, &up).unwrap();
        let twice = Matrix::vstack(&[&one, &one]);
        let (_, cache) = forward(&params, &twice).unwrap();
        let double = backward(&params, &cache, &Matrix::vstack(&[&up, &up])).unwrap();
        for (a, b) in single.flatten().iter().zip(double.flatten()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_rejects_wrong_shape() {
        let params = ModelParams::zeros(SIZES);
        let (_, cache) = forward(&params, &Matrix::zeros(2, 3)).unwrap();
        assert!(backward(&params, &cache, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_weights_and_updates_buffers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ModelParams::init(SIZES, &mut rng);
        let before = params.weights.clone();
        let mut grads = Tensors::zeros(SIZES);
        grads.b2 = vec![1.0, -1.0];
        sgd_step(&mut params, &grads, 0.0, 0.9, 5e-4).unwrap();
        assert_eq!(params.weights, before);
        assert_eq!(params.momentum.b2, vec![1.0, -1.0]);
    }

    #[test]
    fn plain_gradient_descent_step() {
        let mut params = ModelParams::zeros(SIZES);
        params.weights.b2 = vec![1.0, 2.0];
        let mut grads = Tensors::zeros(SIZES);
        grads.b2 = vec![0.5, -0.5];
        sgd_step(&mut params, &grads, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(params.weights.b2, vec![1.0 - 0.05, 2.0 + 0.05]);
    }

    #[test]
    fn momentum_unrolls_to_one_point_nine() {
        let mut params = ModelParams::zeros(SIZES);
        let mut grads = Tensors::zeros(SIZES);
        grads.b1 = vec![1.0; 4];
        let lr = 0.1;
        sgd_step(&mut params, &grads, lr, 0.9, 0.0).unwrap();
        let after_one = params.weights.b1[0];
        sgd_step(&mut params, &grads, lr, 0.9, 0.0).unwrap();
        let second_delta = params.weights.b1[0] - after_one;
        assert!((second_delta - (-lr * 1.9)).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_shrinks_weights_but_not_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ModelParams::init(SIZES, &mut rng);
        params.weights.b1 = vec![0.5; 4];
        let zero = Tensors::zeros(SIZES);
        let mut norm = params.weight_norm_sq();
        for _ in 0..5 {
            sgd_step(&mut params, &zero, 0.1, 0.9, 1e-2).unwrap();
            let next = params.weight_norm_sq();
            assert!(next < norm);
            norm = next;
        }
        assert_eq!(params.weights.b1, vec![0.5; 4]);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0, 100, 0.03), 0.03);
        assert!(cosine_lr(100, 100, 0.03).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 0.03) - 0.015).abs() < 1e-15);
        let lrs: Vec<f64> = (0..=100).map(|s| cosine_lr(s, 100, 1.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
