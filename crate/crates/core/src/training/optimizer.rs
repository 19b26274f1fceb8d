use super::TrainConfig;

/// AdamW moment accumulators over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One AdamW update with bias correction and decoupled weight decay:
/// `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState, lr: f64, cfg: &TrainConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state length mismatch");
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_hand_value() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.0; 3];
        let mut s = OptimizerState::new(3);
        adamw_step(&mut p, &[1.0; 3], &mut s, 1e-3, &cfg);
        for x in p {
            assert!((x - (-9.999_999_900_000_001e-4)).abs() < 1e-15, "{x}");
        }
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_keeps_zero() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.0; 2];
        let mut s = OptimizerState::new(2);
        for _ in 0..10 {
            adamw_step(&mut p, &[0.0; 2], &mut s, 1e-3, &cfg);
        }
        assert_eq!(p, vec![0.0; 2]);
    }

    #[test]
    fn decay_shrinks_parameters_without_gradient() {
        let cfg = TrainConfig::default();
        let mut p = vec![2.0];
        let mut s = OptimizerState::new(1);
        adamw_step(&mut p, &[0.0], &mut s, 0.1, &cfg);
        assert!((p[0] - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
    }
}
