use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::dynamics::PairDataset;
use crate::rng;

/// Parameters of one residual block `F(y) = w2 tanh(w1 y + b1) + b2`.
///
/// `w1` is `hidden x dim` and `w2` is `dim x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl BlockParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; dim * hidden],
            b2: vec![0.0; dim],
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn shape_ok(&self, dim: usize, hidden: usize) -> bool {
        self.w1.len() == hidden * dim
            && self.b1.len() == hidden
            && self.w2.len() == dim * hidden
            && self.b2.len() == dim
    }
}

/// Whether all `M` block applications share one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSharing {
    #[default]
    Shared,
    Unshared,
}

/// Gradient of a scalar loss with respect to every block's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<BlockParams>,
}

impl Gradients {
    pub fn zeros_like(net: &DeepResNet) -> Self {
        Self {
            blocks: vec![BlockParams::zeros(net.dim, net.hidden); net.blocks.len()],
        }
    }

    pub fn clear(&mut self) {
        for b in &mut self.blocks {
            for s in b.slices_mut() {
                s.fill(0.0);
            }
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks
            .iter()
            .flat_map(|b| b.slices().into_iter().flatten().copied())
    }
}

/// Recurrent residual network: `y_{m+1} = y_m + F(y_m; theta_m)`, `m = 0..M`.
///
/// With [`WeightSharing::Shared`] there is a single block and `theta_m` is the
/// same at every application.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepResNet {
    dim: usize,
    hidden: usize,
    steps: usize,
    sharing: WeightSharing,
    blocks: Vec<BlockParams>,
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// `(M + 1) x dim` states `y_0..y_M`.
    states: Vec<f64>,
    /// `M x hidden` activations `tanh(w1 y_m + b1)`.
    acts: Vec<f64>,
    grad_state: Vec<f64>,
    grad_hidden: Vec<f64>,
}

impl Workspace {
    pub fn new(net: &DeepResNet) -> Self {
        Self {
            states: vec![0.0; (net.steps + 1) * net.dim],
            acts: vec![0.0; net.steps * net.hidden],
            grad_state: vec![0.0; net.dim],
            grad_hidden: vec![0.0; net.hidden],
        }
    }
}

impl DeepResNet {
    /// All-zero parameters: the network is the identity map.
    pub fn zeros(dim: usize, hidden: usize, steps: usize, sharing: WeightSharing) -> Self {
        assert!(dim >= 1 && hidden >= 1 && steps >= 1, "dimensions must be positive");
        let count = match sharing {
            WeightSharing::Shared => 1,
            WeightSharing::Unshared => steps,
        };
        Self {
            dim,
            hidden,
            steps,
            sharing,
            blocks: vec![BlockParams::zeros(dim, hidden); count],
        }
    }

    /// Kaiming (He) normal initialization with fan-in mode and gain `sqrt(2)`;
    /// biases are zero.
    pub fn kaiming(dim: usize, hidden: usize, steps: usize, sharing: WeightSharing, seed: u64) -> Self {
        let mut net = Self::zeros(dim, hidden, steps, sharing);
        let mut r = rng::seeded(seed);
        let std1 = (2.0 / dim as f64).sqrt();
        let std2 = (2.0 / hidden as f64).sqrt();
        for b in &mut net.blocks {
            for w in &mut b.w1 {
                let z: f64 = StandardNormal.sample(&mut r);
                *w = std1 * z;
            }
            for w in &mut b.w2 {
                let z: f64 = StandardNormal.sample(&mut r);
                *w = std2 * z;
            }
        }
        net
    }

    pub fn from_blocks(
        dim: usize,
        hidden: usize,
        steps: usize,
        sharing: WeightSharing,
        blocks: Vec<BlockParams>,
    ) -> Result<Self, NetError> {
        let expected = match sharing {
            WeightSharing::Shared => 1,
            WeightSharing::Unshared => steps,
        };
        if dim == 0 || hidden == 0 || steps == 0 {
            return Err(NetError::Shape("dimensions must be positive".into()));
        }
        if blocks.len() != expected {
            return Err(NetError::Shape(format!(
                "{} blocks given, {expected} required for M = {steps} ({sharing:?})",
                blocks.len()
            )));
        }
        if blocks.iter().any(|b| !b.shape_ok(dim, hidden)) {
            return Err(NetError::Shape(format!(
                "block parameters do not match d = {dim}, h = {hidden}"
            )));
        }
        Ok(Self {
            dim,
            hidden,
            steps,
            sharing,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Number of block applications `M`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sharing(&self) -> WeightSharing {
        self.sharing
    }

    pub fn blocks(&self) -> &[BlockParams] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [BlockParams] {
        &mut self.blocks
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks.len() * (2 * self.dim * self.hidden + self.dim + self.hidden)
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks
            .iter()
            .flat_map(|b| b.slices().into_iter().flatten().copied())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.blocks
            .iter_mut()
            .flat_map(|b| b.slices_mut().into_iter().flatten())
    }

    fn block(&self, m: usize) -> &BlockParams {
        match self.sharing {
            WeightSharing::Shared => &self.blocks[0],
            WeightSharing::Unshared => &self.blocks[m],
        }
    }

    /// Checked forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.dim {
            return Err(NetError::Dimension {
                expected: self.dim,
                found: input.len(),
            });
        }
        let mut ws = Workspace::new(self);
        let out = self.forward_ws(input, &mut ws).to_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite);
        }
        Ok(out)
    }

    /// Forward pass recording activations in `ws`; returns `y_M`.
    pub fn forward_ws<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        let (d, h) = (self.dim, self.hidden);
        ws.states[..d].copy_from_slice(input);
        for m in 0..self.steps {
            let b = self.block(m);
            let (done, rest) = ws.states.split_at_mut((m + 1) * d);
            let y = &done[m * d..];
            let next = &mut rest[..d];
            let act = &mut ws.acts[m * h..(m + 1) * h];
            for (c, a) in act.iter_mut().enumerate() {
                let row = &b.w1[c * d..(c + 1) * d];
                let z = b.b1[c] + row.iter().zip(y).map(|(w, v)| w * v).sum::<f64>();
                *a = z.tanh();
            }
            for r in 0..d {
                let row = &b.w2[r * h..(r + 1) * h];
                next[r] = y[r] + b.b2[r] + row.iter().zip(act.iter()).map(|(w, a)| w * a).sum::<f64>();
            }
        }
        &ws.states[self.steps * d..]
    }

    /// Squared Euclidean one-step error `||N(input) - target||^2`.
    pub fn loss_se(&self, input: &[f64], target: &[f64]) -> Result<f64, NetError> {
        if target.len() != self.dim {
            return Err(NetError::Dimension {
                expected: self.dim,
                found: target.len(),
            });
        }
        let out = self.forward(input)?;
        Ok(squared_error(&out, target))
    }

    /// Adds `scale * d||N(input) - target||^2 / d theta` into `grads` and
    /// returns the pair's squared error.
    pub fn accumulate_gradient(
        &self,
        input: &[f64],
        target: &[f64],
        scale: f64,
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> f64 {
        let (d, h) = (self.dim, self.hidden);
        self.forward_ws(input, ws);
        let out = &ws.states[self.steps * d..];
        let mut loss = 0.0;
        for r in 0..d {
            let diff = out[r] - target[r];
            loss += diff * diff;
            ws.grad_state[r] = 2.0 * scale * diff;
        }
        for m in (0..self.steps).rev() {
            let b = self.block(m);
            let gi = match self.sharing {
                WeightSharing::Shared => 0,
                WeightSharing::Unshared => m,
            };
            let g = &mut grads.blocks[gi];
            let y = &ws.states[m * d..(m + 1) * d];
            let act = &ws.acts[m * h..(m + 1) * h];
            let gy = &mut ws.grad_state;
            let dz = &mut ws.grad_hidden;
            dz.fill(0.0);
            for r in 0..d {
                let gr = gy[r];
                g.b2[r] += gr;
                let w2row = &b.w2[r * h..(r + 1) * h];
                let g2row = &mut g.w2[r * h..(r + 1) * h];
                for c in 0..h {
                    g2row[c] += gr * act[c];
                    dz[c] += w2row[c] * gr;
                }
            }
            for c in 0..h {
                dz[c] *= 1.0 - act[c] * act[c];
            }
            for c in 0..h {
                let dzc = dz[c];
                g.b1[c] += dzc;
                let w1row = &b.w1[c * d..(c + 1) * d];
                let g1row = &mut g.w1[c * d..(c + 1) * d];
                for k in 0..d {
                    g1row[k] += dzc * y[k];
                    gy[k] += w1row[k] * dzc;
                }
            }
        }
        loss
    }

    /// Mean squared error over `batch` (indices into `data`) and its exact
    /// gradient; pairs are accumulated in the order given.
    pub fn batch_loss_and_grad_into(
        &self,
        data: &PairDataset,
        batch: &[usize],
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> f64 {
        grads.clear();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &k in batch {
            let p = data.pair(k);
            total += self.accumulate_gradient(p.input, p.output, scale, grads, ws);
        }
        total * scale
    }

    /// Mean squared error over the whole dataset and its gradient.
    pub fn batch_loss_and_grad(&self, data: &PairDataset) -> Result<(f64, Gradients), NetError> {
        if data.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        if data.dim() != self.dim {
            return Err(NetError::Dimension {
                expected: self.dim,
                found: data.dim(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut ws = Workspace::new(self);
        let batch: Vec<usize> = (0..data.len()).collect();
        let loss = self.batch_loss_and_grad_into(data, &batch, &mut grads, &mut ws);
        Ok((loss, grads))
    }

    /// Mean of [`DeepResNet::loss_se`] over `data` without gradients.
    pub fn mean_loss(&self, data: &PairDataset) -> Result<f64, NetError> {
        if data.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut ws = Workspace::new(self);
        let mut total = 0.0;
        for p in data.iter() {
            total += squared_error(self.forward_ws(p.input, &mut ws), p.output);
        }
        Ok(total / data.len() as f64)
    }
}

pub fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(steps: usize) -> DeepResNet {
        let block = BlockParams {
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: vec![0.0],
        };
        DeepResNet::from_blocks(1, 1, steps, WeightSharing::Shared, vec![block]).unwrap()
    }

    #[test]
    fn zero_parameters_give_identity() {
        for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
            for m in [1, 3, 10] {
                let net = DeepResNet::zeros(3, 4, m, sharing);
                assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
            }
        }
    }

    #[test]
    fn one_block_hand_value() {
        let y = scalar_net(1).forward(&[1.0]).unwrap();
        assert!((y[0] - 1.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn origin_is_fixed_point() {
        assert_eq!(scalar_net(2).forward(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn squared_loss_examples() {
        assert_eq!(squared_error(&[1.0, 2.0], &[1.0, 3.0]), 1.0);
        assert_eq!(squared_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        let net = DeepResNet::zeros(2, 3, 4, WeightSharing::Shared);
        let l = net.loss_se(&[2.0, 1.0], &[2.0, 1.1]).unwrap();
        assert!((l - 0.01).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = DeepResNet::zeros(2, 3, 1, WeightSharing::Shared);
        assert!(matches!(net.forward(&[1.0]), Err(NetError::Dimension { .. })));
        let mut big = scalar_net(1);
        big.blocks_mut()[0].b2[0] = f64::INFINITY;
        assert!(matches!(big.forward(&[0.0]), Err(NetError::NonFinite)));
    }

    #[test]
    fn from_blocks_checks_shapes() {
        let b = BlockParams::zeros(2, 3);
        assert!(DeepResNet::from_blocks(2, 3, 4, WeightSharing::Unshared, vec![b.clone()]).is_err());
        assert!(DeepResNet::from_blocks(2, 4, 1, WeightSharing::Shared, vec![b.clone()]).is_err());
        assert!(DeepResNet::from_blocks(2, 3, 4, WeightSharing::Shared, vec![b]).is_ok());
    }

    #[test]
    fn kaiming_biases_zero_and_deterministic() {
        let a = DeepResNet::kaiming(2, 20, 10, WeightSharing::Shared, 5);
        let b = DeepResNet::kaiming(2, 20, 10, WeightSharing::Shared, 5);
        assert_eq!(a, b);
        assert_ne!(a, DeepResNet::kaiming(2, 20, 10, WeightSharing::Shared, 6));
        for blk in a.blocks() {
            assert!(blk.b1.iter().chain(&blk.b2).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn kaiming_variance_matches_fan_in() {
        let net = DeepResNet::kaiming(2, 10_000, 1, WeightSharing::Shared, 77);
        let w1 = &net.blocks()[0].w1;
        let mean = w1.iter().sum::<f64>() / w1.len() as f64;
        let var = w1.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / w1.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "w1 variance {var}");
        let w2 = &net.blocks()[0].w2;
        let var2 = w2.iter().map(|w| w * w).sum::<f64>() / w2.len() as f64;
        assert!((var2 / (2.0 / 10_000.0) - 1.0).abs() < 0.1, "w2 variance {var2}");
    }

    #[test]
    fn duplicate_pair_has_single_pair_gradient() {
        let net = DeepResNet::kaiming(2, 3, 4, WeightSharing::Shared, 1);
        let pair = (vec![0.3, -0.2], vec![0.5, 0.1]);
        let one = PairDataset::from_pairs(2, &[pair.clone()]).unwrap();
        let two = PairDataset::from_pairs(2, &[pair.clone(), pair]).unwrap();
        let (l1, g1) = net.batch_loss_and_grad(&one).unwrap();
        let (l2, g2) = net.batch_loss_and_grad(&two).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.values().zip(g2.values()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn exact_targets_give_zero_gradient() {
        let net = DeepResNet::kaiming(2, 3, 4, WeightSharing::Shared, 9);
        let x = vec![0.4, 0.7];
        let y = net.forward(&x).unwrap();
        let data = PairDataset::from_pairs(2, &[(x, y)]).unwrap();
        let (loss, g) = net.batch_loss_and_grad(&data).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let net = DeepResNet::zeros(1, 1, 1, WeightSharing::Shared);
        let data = PairDataset::from_pairs(1, &[]);
        assert!(data.is_err() || net.batch_loss_and_grad(&data.unwrap()).is_err());
    }
}
