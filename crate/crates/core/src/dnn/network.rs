//! Fully connected tanh network with a softmax output layer.

use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::matrix::{axpy, dot, Matrix};
use super::{rng_stream, ModelConfig, STREAM_INIT};
use crate::error::{Error, Result};

/// Weights (`fan_out x fan_in`) and biases of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Matrix::zeros(fan_out, fan_in), b: alloc::vec![0.0; fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.rows()
    }
}

/// Network parameters; the same layout doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.w.shape() == b.w.shape() && a.b.len() == b.b.len())
    }

    /// Checks that layer shapes chain from input to output.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].fan_out(),
                    found: pair[1].fan_in(),
                });
            }
        }
        for l in &self.layers {
            if l.b.len() != l.fan_out() {
                return Err(Error::DimensionMismatch { expected: l.fan_out(), found: l.b.len() });
            }
        }
        Ok(())
    }

    /// Flat views of every weight and bias tensor, in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), &l.b[..]])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), &mut l.b[..]])
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    /// Probabilities without dropout and without keeping a cache.
    pub fn infer(&self, batch: &Matrix) -> Result<Matrix> {
        check_input(self, batch)?;
        let last = self.layers.len() - 1;
        let mut h = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &h);
            if l < last {
                z.as_mut_slice().iter_mut().for_each(|v| *v = libm::tanh(*v));
            }
            if z.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation(l));
            }
            h = z;
        }
        softmax_rows(&mut h);
        Ok(h)
    }
}

/// Glorot-uniform weights, `U(-sqrt(6/(fan_in+fan_out)), +sqrt(..))`, zero biases.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = rng_stream(seed, STREAM_INIT);
    let dims = config.layer_dims();
    let layers = dims
        .windows(2)
        .map(|d| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let limit = glorot_limit(fan_in, fan_out);
            let dist = Uniform::new_inclusive(-limit, limit);
            let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            Layer {
                w: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                b: alloc::vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(ModelParams { layers })
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Infer,
    /// Inverted dropout after every hidden activation; masks are drawn from
    /// `mask_seed`.
    Train { dropout_rate: f64, mask_seed: u64 },
}

/// Activations recorded by a forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (for hidden layers after dropout).
    inputs: Vec<Matrix>,
    /// tanh outputs of the hidden layers, before dropout.
    activations: Vec<Matrix>,
    /// Per-element dropout scale (0 or 1/keep) of each hidden layer.
    masks: Vec<Option<Vec<f64>>>,
    probabilities: Matrix,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Matrix {
        &self.probabilities
    }

    /// Input seen by layer `l`: the batch for `l = 0`, otherwise the
    /// previous hidden layer's output after dropout.
    pub fn layer_input(&self, l: usize) -> &Matrix {
        &self.inputs[l]
    }
}

fn check_input(params: &ModelParams, batch: &Matrix) -> Result<()> {
    params.validate()?;
    if batch.cols() != params.input_dim() {
        return Err(Error::DimensionMismatch { expected: params.input_dim(), found: batch.cols() });
    }
    Ok(())
}

/// `h W^T + b`
fn affine(layer: &Layer, h: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(h.rows(), layer.fan_out());
    for r in 0..h.rows() {
        let x = h.row(r);
        for (o, zo) in z.row_mut(r).iter_mut().enumerate() {
            *zo = dot(layer.w.row(o), x) + layer.b[o];
        }
    }
    z
}

fn softmax_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

pub fn forward(params: &ModelParams, batch: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
    check_input(params, batch)?;
    let mut rng = match mode {
        Mode::Train { dropout_rate, mask_seed } if dropout_rate > 0.0 => {
            if !(0.0..1.0).contains(&dropout_rate) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "dropout rate {dropout_rate} outside [0, 1)"
                )));
            }
            Some((1.0 - dropout_rate, rng_stream(mask_seed, 0)))
        }
        _ => None,
    };
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut activations = Vec::with_capacity(last);
    let mut masks = Vec::with_capacity(last);
    let mut h = batch.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = affine(layer, &h);
        inputs.push(h);
        if l == last {
            if z.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation(l));
            }
            softmax_rows(&mut z);
            h = z;
            break;
        }
        z.as_mut_slice().iter_mut().for_each(|v| *v = libm::tanh(*v));
        if z.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation(l));
        }
        let mut out = z.clone();
        let mask = rng.as_mut().map(|(keep, rng)| {
            let scale = 1.0 / *keep;
            let mask: Vec<f64> = (0..out.as_slice().len())
                .map(|_| if rng.gen::<f64>() < *keep { scale } else { 0.0 })
                .collect();
            out.as_mut_slice().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
            mask
        });
        activations.push(z);
        masks.push(mask);
        h = out;
    }
    let cache = ForwardCache { inputs, activations, masks, probabilities: h.clone() };
    Ok((h, cache))
}

fn check_targets(rows: usize, classes: usize, targets: &[usize]) -> Result<()> {
    if targets.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: targets.len() });
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::DimensionMismatch { expected: classes, found: t });
    }
    Ok(())
}

/// Mean categorical cross-entropy against class-index targets (the one-hot
/// position), with probabilities clamped below at 1e-12.
pub fn loss_cce(probabilities: &Matrix, targets: &[usize]) -> Result<f64> {
    check_targets(probabilities.rows(), probabilities.cols(), targets)?;
    if targets.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(r, &t)| -libm::log(probabilities.get(r, t).max(1e-12)))
        .sum();
    Ok(total / targets.len() as f64)
}

/// Exact gradients of [`loss_cce`] with respect to every weight and bias.
/// The output delta is the fused softmax/cross-entropy term
/// `(p - onehot) / batch`; dropout masks from the cache are replayed.
pub fn backward(params: &ModelParams, cache: &ForwardCache, targets: &[usize]) -> Result<ModelParams> {
    let n_layers = params.layers.len();
    let probs = &cache.probabilities;
    if cache.inputs.len() != n_layers
        || cache.activations.len() + 1 != n_layers
        || probs.cols() != params.output_dim()
        || cache.inputs.iter().zip(&params.layers).any(|(x, l)| x.cols() != l.fan_in())
    {
        return Err(Error::CacheMismatch);
    }
    check_targets(probs.rows(), probs.cols(), targets)?;
    let batch = probs.rows();
    let inv_b = 1.0 / batch as f64;

    let mut delta = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        let row = delta.row_mut(r);
        row[t] -= 1.0;
        row.iter_mut().for_each(|v| *v *= inv_b);
    }

    let mut grads = params.zeros_like();
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let input = &cache.inputs[l];
        let g = &mut grads.layers[l];
        for r in 0..batch {
            let d = delta.row(r);
            let x = input.row(r);
            for (o, &d_o) in d.iter().enumerate() {
                if d_o != 0.0 {
                    axpy(g.w.row_mut(o), d_o, x);
                }
                g.b[o] += d_o;
            }
        }
        if l == 0 {
            break;
        }
        // Back through W, then the dropout mask and tanh of hidden layer l-1.
        let act = &cache.activations[l - 1];
        let mask = cache.masks[l - 1].as_deref();
        let mut next = Matrix::zeros(batch, layer.fan_in());
        for r in 0..batch {
            let dh = next.row_mut(r);
            for (o, &d_o) in delta.row(r).iter().enumerate() {
                if d_o != 0.0 {
                    axpy(dh, d_o, layer.w.row(o));
                }
            }
            let a = act.row(r);
            let base = r * layer.fan_in();
            for (j, v) in dh.iter_mut().enumerate() {
                if let Some(m) = mask {
                    *v *= m[base + j];
                }
                *v *= 1.0 - a[j] * a[j];
            }
        }
        delta = next;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny(dims: &[usize], out: usize) -> ModelConfig {
        ModelConfig {
            input_dim: dims[0],
            hidden_dims: dims[1..].to_vec(),
            output_dim: out,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_shapes_and_determinism() {
        let cfg = tiny(&[48, 4], 3);
        let a = init_model(&cfg, 11).unwrap();
        let b = init_model(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers[0].w.shape(), (4, 48));
        assert_eq!(a.layers[1].w.shape(), (3, 4));
        assert_eq!((a.layers[0].b.len(), a.layers[1].b.len()), (4, 3));
        assert!(a.layers.iter().all(|l| l.b.iter().all(|&b| b == 0.0)));
        assert_ne!(a, init_model(&cfg, 12).unwrap());
    }

    #[test]
    fn zero_logits_give_uniform() {
        let mut p = init_model(&tiny(&[3, 2], 4), 1).unwrap();
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let probs = p.infer(&x).unwrap();
        assert!(probs.row(0).iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn zero_dropout_matches_infer() {
        let p = init_model(&tiny(&[5, 6, 4], 3), 2).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2, -0.3, 0.4, 1.0], [1.0, 0.0, 0.0, -1.0, 0.5]]).unwrap();
        let (train, _) = forward(&p, &x, Mode::Train { dropout_rate: 0.0, mask_seed: 9 }).unwrap();
        let (inf, _) = forward(&p, &x, Mode::Infer).unwrap();
        assert_eq!(train, inf);
        assert_eq!(inf, p.infer(&x).unwrap());
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_delta() {
        let probs = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(loss_cce(&probs, &[0, 1]).unwrap(), 0.0);
        let uniform = Matrix::from_rows(&[[0.2; 5]]).unwrap();
        assert!((loss_cce(&uniform, &[3]).unwrap() - libm::log(5.0)).abs() < 1e-15);
        assert!(loss_cce(&probs, &[0]).is_err());
        assert!(loss_cce(&probs, &[0, 2]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = init_model(&tiny(&[3, 2], 2), 1).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(p.infer(&x), Err(Error::DimensionMismatch { .. })));
        assert!(forward(&p, &x, Mode::Infer).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let p = init_model(&tiny(&[3, 2], 2), 1).unwrap();
        let other = init_model(&tiny(&[3, 4, 2], 2), 1).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let (_, cache) = forward(&p, &x, Mode::Infer).unwrap();
        assert_eq!(backward(&other, &cache, &[0]).unwrap_err(), Error::CacheMismatch);
        assert!(backward(&p, &cache, &[0, 1]).is_err());
    }

    #[test]
    fn backward_is_deterministic() {
        let p = init_model(&tiny(&[6, 5, 4], 3), 3).unwrap();
        let x = Matrix::from_rows(&[vec![0.3; 6], vec![-0.7; 6]]).unwrap();
        let mode = Mode::Train { dropout_rate: 0.3, mask_seed: 17 };
        let (_, c1) = forward(&p, &x, mode).unwrap();
        let (_, c2) = forward(&p, &x, mode).unwrap();
        assert_eq!(backward(&p, &c1, &[0, 2]).unwrap(), backward(&p, &c2, &[0, 2]).unwrap());
    }

    #[test]
    fn output_delta_vanishes_at_perfect_prediction() {
        // Huge output bias pins the softmax to class 1.
        let mut p = init_model(&tiny(&[2, 3], 2), 5).unwrap();
        p.layers[1].b = vec![-800.0, 800.0];
        let x = Matrix::from_rows(&[[0.5, -0.5]]).unwrap();
        let (_, cache) = forward(&p, &x, Mode::Infer).unwrap();
        let g = backward(&p, &cache, &[1]).unwrap();
        assert!(g.layers[1].b.iter().all(|v| v.abs() < 1e-12));
        assert!(g.layers[1].w.as_slice().iter().all(|v| v.abs() < 1e-12));
    }
}
