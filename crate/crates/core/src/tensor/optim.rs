use std::collections::HashMap;

use super::{ParamSet, Scalar, TensorError};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment buffers and step counter for [`adam_step`].
#[derive(Clone, Debug)]
pub struct AdamState<E> {
    pub config: AdamConfig,
    step: u64,
    moments: HashMap<String, (Vec<E>, Vec<E>)>,
}

impl<E: Scalar> AdamState<E> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState { config, step: 0, moments: HashMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn require_grads<E: Scalar>(params: &ParamSet<E>) -> Result<(), TensorError> {
    for (name, t) in params.iter() {
        if t.grad().is_none() {
            return Err(TensorError::MissingGrad(name.to_string()));
        }
    }
    Ok(())
}

/// One bias-corrected Adam update applied in place.
///
/// Fails without touching any parameter if a gradient is missing.
pub fn adam_step<E: Scalar>(params: &mut ParamSet<E>, state: &mut AdamState<E>) -> Result<(), TensorError> {
    require_grads(params)?;
    for (name, t) in params.iter() {
        if let Some((m, _)) = state.moments.get(name) {
            if m.len() != t.numel() {
                return Err(TensorError::DataLength { shape: t.shape().to_vec(), len: m.len() });
            }
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let (b1, b2) = (E::from_f64_lossy(c.beta1), E::from_f64_lossy(c.beta2));
    let (one_b1, one_b2) = (E::from_f64_lossy(1.0 - c.beta1), E::from_f64_lossy(1.0 - c.beta2));
    let step_size = E::from_f64_lossy(c.lr / bc1);
    let inv_sqrt_bc2 = E::from_f64_lossy(1.0 / bc2.sqrt());
    let eps = E::from_f64_lossy(c.eps);
    for (name, p) in params.iter_mut() {
        let n = p.numel();
        let (m, v) = state.moments.entry(name.to_string()).or_insert_with(|| (vec![E::zero(); n], vec![E::zero(); n]));
        let grad = p.grad().expect("checked").to_vec();
        for (((w, g), mi), vi) in p.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + one_b1 * g;
            *vi = b2 * *vi + one_b2 * g * g;
            *w -= step_size * *mi / (vi.sqrt() * inv_sqrt_bc2 + eps);
        }
    }
    Ok(())
}

/// Plain gradient descent: `p <- p - lr * grad(p)`.
pub fn sgd_step<E: Scalar>(params: &mut ParamSet<E>, lr: f64) -> Result<(), TensorError> {
    require_grads(params)?;
    let lr = E::from_f64_lossy(lr);
    for (_, p) in params.iter_mut() {
        let grad = p.grad().expect("checked").to_vec();
        p.data_mut().iter_mut().zip(grad).for_each(|(w, g)| *w -= lr * g);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};

    fn single(value: f64, grad: f64) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        let mut t = Tensor::from_f64(vec![1], &[value]).unwrap();
        t.set_grad(vec![grad]).unwrap();
        ps.insert("p", t).unwrap();
        ps
    }

    #[test]
    fn adam_zero_grad_is_noop() {
        let mut ps = single(0.7, 0.0);
        let mut st = AdamState::new(AdamConfig::default());
        for _ in 0..3 {
            adam_step(&mut ps, &mut st).unwrap();
        }
        assert_eq!(ps.get("p").unwrap().data(), &[0.7]);
        assert_eq!(st.step_count(), 3);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // t = 1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
        let mut ps = single(0.0, 1.0);
        let mut st = AdamState::new(AdamConfig { lr: 0.1, ..AdamConfig::default() });
        adam_step(&mut ps, &mut st).unwrap();
        let p = ps.get("p").unwrap().data()[0];
        assert!((p + 0.1 / (1.0 + 1e-8)).abs() < 1e-15, "{p}");
    }

    #[test]
    fn adam_identical_params_identical_updates() {
        let mut ps = ParamSet::<f64>::new();
        for name in ["a", "b"] {
            let mut t = Tensor::from_f64(vec![2], &[0.3, -1.0]).unwrap();
            t.set_grad(vec![0.25, -4.0]).unwrap();
            ps.insert(name, t).unwrap();
        }
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(&mut ps, &mut st).unwrap();
        assert_eq!(ps.get("a").unwrap().data(), ps.get("b").unwrap().data());
    }

    #[test]
    fn missing_grad_rejected() {
        let mut ps = ParamSet::<f64>::new();
        ps.insert("w", Tensor::zeros(vec![2])).unwrap();
        let mut st = AdamState::new(AdamConfig::default());
        assert!(matches!(adam_step(&mut ps, &mut st), Err(TensorError::MissingGrad(_))));
        assert!(matches!(sgd_step(&mut ps, 0.1), Err(TensorError::MissingGrad(_))));
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn sgd_examples() {
        let mut ps = single(1.0, 2.0);
        sgd_step(&mut ps, 0.5).unwrap();
        assert_eq!(ps.get("p").unwrap().data(), &[0.0]);
        let mut ps = single(1.0, 2.0);
        sgd_step(&mut ps, 0.0).unwrap();
        assert_eq!(ps.get("p").unwrap().data(), &[1.0]);
    }

    #[test]
    fn sgd_and_fresh_adam_agree_in_sign() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let g: f64 = rng.random_range(-5.0..5.0);
            if g == 0.0 {
                continue;
            }
            let mut a = single(0.0, g);
            let mut s = single(0.0, g);
            adam_step(&mut a, &mut AdamState::new(AdamConfig::default())).unwrap();
            sgd_step(&mut s, 0.01).unwrap();
            let (da, ds) = (a.get("p").unwrap().data()[0], s.get("p").unwrap().data()[0]);
            assert_eq!(da.signum(), ds.signum());
        }
    }
}
