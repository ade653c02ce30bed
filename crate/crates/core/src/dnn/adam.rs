use super::network::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like() }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    cfg: &AdamConfig,
    state: &mut AdamState,
    params: &mut ModelParams,
    grads: &ModelParams,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidConfig("adam step index starts at 1".into()));
    }
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(Error::DimensionMismatch {
            expected: params.parameter_count(),
            found: grads.parameter_count(),
        });
    }
    let t = t as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::{init_model, ModelConfig};

    fn params() -> ModelParams {
        let cfg = ModelConfig { input_dim: 3, hidden_dims: alloc::vec![2], output_dim: 2, ..Default::default() };
        init_model(&cfg, 4).unwrap()
    }

    fn filled(like: &ModelParams, f: impl Fn(usize) -> f64) -> ModelParams {
        let mut g = like.zeros_like();
        let mut k = 0;
        for t in g.tensors_mut() {
            for v in t.iter_mut() {
                *v = f(k);
                k += 1;
            }
        }
        g
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&AdamConfig::default(), &mut st, &mut p, &before.zeros_like(), 1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let mut p = params();
        let before = p.clone();
        let g = filled(&p, |k| (k as f64 - 7.0) * 0.013);
        let mut st = AdamState::new(&p);
        adam_step(&cfg, &mut st, &mut p, &g, 1).unwrap();
        let moved = p.tensors().flatten().zip(before.tensors().flatten());
        for ((after, before), g) in moved.zip(g.tensors().flatten()) {
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((after - before - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_lr_sign() {
        let cfg = AdamConfig::default();
        let mut p = params();
        let g = filled(&p, |k| if k % 2 == 0 { 0.5 } else { -2.0 });
        let mut st = AdamState::new(&p);
        let mut last = p.clone();
        for t in 1..=5000 {
            last = p.clone();
            adam_step(&cfg, &mut st, &mut p, &g, t).unwrap();
        }
        let steps = p.tensors().flatten().zip(last.tensors().flatten());
        for ((now, prev), g) in steps.zip(g.tensors().flatten()) {
            let expected = -cfg.learning_rate * g.signum();
            assert!((now - prev - expected).abs() < 1e-9, "{} vs {expected}", now - prev);
        }
    }

    #[test]
    fn shape_mismatch_and_step_zero() {
        let mut p = params();
        let mut st = AdamState::new(&p);
        let other = ModelParams { layers: p.layers[..1].to_vec() };
        assert!(adam_step(&AdamConfig::default(), &mut st, &mut p, &other, 1).is_err());
        let g = p.zeros_like();
        assert!(adam_step(&AdamConfig::default(), &mut st, &mut p, &g, 0).is_err());
    }
}
