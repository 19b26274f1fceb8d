use super::TrainConfig;

/// Cosine annealing without restarts over `cfg.epochs` epochs.
pub fn cosine_lr(epoch: usize, cfg: &TrainConfig) -> f64 {
    let phase = std::f64::consts::PI * epoch as f64 / cfg.epochs as f64;
    cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + phase.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let cfg = TrainConfig::default();
        assert_eq!(cosine_lr(0, &cfg), 0.001);
        assert!((cosine_lr(50, &cfg) - 0.0005).abs() < 1e-18);
        assert!(cosine_lr(100, &cfg).abs() < 1e-18);
        let floor = TrainConfig { lr_min: 1e-4, ..cfg };
        assert!((cosine_lr(100, &floor) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn strictly_decreasing() {
        let cfg = TrainConfig { epochs: 37, ..TrainConfig::default() };
        let lrs: Vec<f64> = (0..=37).map(|e| cosine_lr(e, &cfg)).collect();
        assert!(lrs.windows(2).all(|w| w[1] < w[0]));
    }
}
