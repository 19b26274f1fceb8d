//! Analytic gradients against central finite differences, plus forward-map
//! sanity properties of the residual network.

use proptest::prelude::*;
use switchlearn::dynamics::PairDataset;
use switchlearn::nn::{BlockParams, DeepResNet, WeightSharing};

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-6;

fn perturbed(net: &DeepResNet, index: usize, delta: f64) -> DeepResNet {
    let mut n = net.clone();
    *n.parameters_mut().nth(index).unwrap() += delta;
    n
}

/// Largest relative deviation `|a - fd| / max(1, |a|)` over all parameters.
fn worst_gradient_deviation(net: &DeepResNet, data: &PairDataset) -> f64 {
    let (_, grads) = net.batch_loss_and_grad(data).unwrap();
    let analytic: Vec<f64> = grads.values().collect();
    assert_eq!(analytic.len(), net.parameter_count());
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let up = perturbed(net, i, STEP).mean_loss(data).unwrap();
        let down = perturbed(net, i, -STEP).mean_loss(data).unwrap();
        let fd = (up - down) / (2.0 * STEP);
        worst = worst.max((a - fd).abs() / a.abs().max(1.0));
    }
    worst
}

fn random_pairs(dim: usize, count: usize, values: &[f64]) -> PairDataset {
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..count)
        .map(|k| {
            let x = (0..dim).map(|c| values[(k * 2 * dim + c) % values.len()]).collect();
            let y = (0..dim).map(|c| values[(k * 2 * dim + dim + c) % values.len()]).collect();
            (x, y)
        })
        .collect();
    PairDataset::from_pairs(dim, &pairs).unwrap()
}

#[test]
fn fixed_small_net_gradient() {
    let net = DeepResNet::kaiming(2, 3, 4, WeightSharing::Shared, 2024);
    let data = random_pairs(2, 5, &[0.3, -0.8, 1.1, 0.25, -0.4, 0.9, -1.3, 0.05, 0.6, -0.15, 0.7]);
    let worst = worst_gradient_deviation(&net, &data);
    assert!(worst < REL_TOL, "deviation {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn analytic_gradient_matches_central_differences(
        dim in 1usize..=4,
        hidden in 1usize..=8,
        steps in 1usize..=6,
        unshared in any::<bool>(),
        seed in any::<u64>(),
        batch in 1usize..=6,
        values in prop::collection::vec(-1.5f64..1.5, 16),
    ) {
        let sharing = if unshared { WeightSharing::Unshared } else { WeightSharing::Shared };
        let mut net = DeepResNet::kaiming(dim, hidden, steps, sharing, seed);
        // Nonzero biases exercise every gradient path.
        for (k, p) in net.parameters_mut().enumerate() {
            if *p == 0.0 {
                *p = 0.05 * values[k % values.len()];
            }
        }
        let data = random_pairs(dim, batch, &values);
        let worst = worst_gradient_deviation(&net, &data);
        prop_assert!(worst < REL_TOL, "deviation {}", worst);
    }

    #[test]
    fn forward_is_lipschitz_with_operator_norm_bound(
        seed in any::<u64>(),
        steps in 1usize..=6,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let net = DeepResNet::kaiming(3, 5, steps, WeightSharing::Shared, seed);
        let b = &net.blocks()[0];
        let l = (1.0 + spectral_norm(&b.w2, 3, 5) * spectral_norm(&b.w1, 5, 3)).powi(steps as i32);
        let fx = net.forward(&x).unwrap();
        let fy = net.forward(&y).unwrap();
        let lhs = dist(&fx, &fy);
        let rhs = l * dist(&x, &y);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn zero_parameters_are_identity(
        dim in 1usize..=5,
        steps in 1usize..=12,
        x in prop::collection::vec(-100.0f64..100.0, 5),
    ) {
        let net = DeepResNet::zeros(dim, 4, steps, WeightSharing::Shared);
        prop_assert_eq!(net.forward(&x[..dim]).unwrap(), x[..dim].to_vec());
    }

    #[test]
    fn forward_and_gradient_are_bit_stable(seed in any::<u64>()) {
        let net = DeepResNet::kaiming(2, 4, 3, WeightSharing::Shared, seed);
        let data = random_pairs(2, 4, &[0.1, 0.7, -0.3, 1.2, -0.9]);
        let (l1, g1) = net.batch_loss_and_grad(&data).unwrap();
        let (l2, g2) = net.batch_loss_and_grad(&data).unwrap();
        prop_assert_eq!(l1.to_bits(), l2.to_bits());
        prop_assert_eq!(g1, g2);
    }
}

#[test]
fn unshared_blocks_apply_in_order() {
    // Block 0 adds 1 to the state, block 1 is y + tanh(y).
    let add = BlockParams { w1: vec![0.0], b1: vec![0.0], w2: vec![0.0], b2: vec![1.0] };
    let tanh = BlockParams { w1: vec![1.0], b1: vec![0.0], w2: vec![1.0], b2: vec![0.0] };
    let net = DeepResNet::from_blocks(1, 1, 2, WeightSharing::Unshared, vec![add, tanh]).unwrap();
    let y = net.forward(&[0.0]).unwrap()[0];
    assert!((y - (1.0 + 1f64.tanh())).abs() < 1e-15);
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest singular value of a row-major `rows x cols` matrix, by power
/// iteration on `A^T A`.
fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut sigma = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = (0..rows)
            .map(|r| (0..cols).map(|c| a[r * cols + c] * v[c]).sum())
            .collect();
        let mut w: Vec<f64> = (0..cols)
            .map(|c| (0..rows).map(|r| a[r * cols + c] * av[r]).sum())
            .collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= n);
        sigma = n.sqrt();
        v = w;
    }
    // Small safety factor for incomplete convergence.
    sigma * (1.0 + 1e-6)
}
