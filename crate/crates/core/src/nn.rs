//! Dense Q-network with manual backpropagation and Adam.
//!
//! Hidden layers use ReLU, the output head is linear. All arithmetic is
//! `f64`. Parameters are addressed in a flat order: for each layer, the
//! weight matrix row-major (`out × in`) followed by the biases.
//!
//! # Checkpoint format
//!
//! ```text
//! qnetwork v1
//! dims 11 32 64 128 8
//! <layer 0 weights, row-major, space separated>
//! <layer 0 biases>
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! exact. Optimizer state is not stored.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const CHECKPOINT_HEADER: &str = "qnetwork v1";

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: Array2<f64>,
    b: Array1<f64>,
}

/// Adam first/second moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: u64,
}

impl AdamState {
    fn zeros(layers: &[Layer]) -> Self {
        let z: Vec<Layer> = layers
            .iter()
            .map(|l| Layer { w: Array2::zeros(l.w.raw_dim()), b: Array1::zeros(l.b.len()) })
            .collect();
        Self { m: z.clone(), v: z, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Per-layer gradients, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    /// Gradient in flat parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    adam: AdamState,
}

/// `[2 + 3K, 32, 64, 128, 2^K]`.
pub fn default_dims(n_task_types: usize) -> Vec<usize> {
    vec![2 + 3 * n_task_types, 32, 64, 128, 1 << n_task_types]
}

/// He-uniform weights (variance `2 / fan_in`), zero biases.
pub fn init_network(layer_dims: &[usize], seed: u64) -> Result<QNetwork> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidArgument("layer dims must hold at least two positive sizes".into()));
    }
    let mut rng = rng_from_seed(seed);
    let layers: Vec<Layer> = layer_dims
        .windows(2)
        .map(|d| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
            Layer { w, b: Array1::zeros(fan_out) }
        })
        .collect();
    Ok(QNetwork { dims: layer_dims.to_vec(), adam: AdamState::zeros(&layers), layers })
}

/// Copies the online parameters into `target`; Adam state stays untouched.
pub fn sync_target(online: &QNetwork, target: &mut QNetwork) -> Result<()> {
    if online.dims != target.dims {
        return Err(Error::DimensionMismatch { expected: online.n_params(), got: target.n_params() });
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        t.w.assign(&o.w);
        t.b.assign(&o.b);
    }
    Ok(())
}

impl QNetwork {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn weights(&self, layer: usize) -> &Array2<f64> {
        &self.layers[layer].w
    }

    pub fn biases(&self, layer: usize) -> &Array1<f64> {
        &self.layers[layer].b
    }

    /// Replaces one layer's parameters.
    pub fn set_layer(&mut self, layer: usize, w: Array2<f64>, b: Array1<f64>) -> Result<()> {
        let l = &mut self.layers[layer];
        if w.raw_dim() != l.w.raw_dim() {
            return Err(Error::DimensionMismatch { expected: l.w.len(), got: w.len() });
        }
        if b.len() != l.b.len() {
            return Err(Error::DimensionMismatch { expected: l.b.len(), got: b.len() });
        }
        l.w = w;
        l.b = b;
        Ok(())
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: params.len() });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for x in l.w.iter_mut().chain(l.b.iter_mut()) {
                *x = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.w.len() {
                return &mut l.w.as_slice_mut().expect("standard layout")[index];
            }
            index -= l.w.len();
            if index < l.b.len() {
                return &mut l.b[index];
            }
            index -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// Order-sensitive fingerprint of the parameter bits.
    pub fn checksum(&self) -> u64 {
        self.params_flat().iter().fold(0xcbf2_9ce4_8422_2325, |h: u64, x| {
            (h ^ x.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Q-values of one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Q-values of a batch, one row per sample.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.w.t()) + &l.b;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a)
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got });
        }
        Ok(())
    }

    /// Activations of every layer, input included.
    fn activations(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.w.t()) + &l.b;
            if i < last {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        acts
    }

    /// Signs of every hidden pre-activation for one input.
    pub fn activation_pattern(&self, features: &[f64]) -> Result<Vec<bool>> {
        self.check_input(features.len())?;
        let mut a = Array1::from(features.to_vec());
        let mut pattern = Vec::new();
        for l in &self.layers[..self.layers.len() - 1] {
            let z = l.w.dot(&a) + &l.b;
            pattern.extend(z.iter().map(|&v| v > 0.0));
            a = z.mapv(relu);
        }
        Ok(pattern)
    }

    /// Mean squared error on the chosen actions and its gradient.
    pub fn loss_and_gradient(
        &self,
        x: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradient)> {
        self.check_input(x.ncols())?;
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if actions.len() != n || targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: actions.len().min(targets.len()) });
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(Error::InvalidArgument(format!("action index {a} out of range")));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }

        let acts = self.activations(x);
        let q = acts.last().expect("output layer");
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        let mut delta = Array2::<f64>::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = q[[i, a]] - y;
            loss += err * err;
            delta[[i, a]] = 2.0 * err / n as f64;
        }
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }

        let n_layers = self.layers.len();
        let mut weights = vec![Array2::zeros((0, 0)); n_layers];
        let mut biases = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let input = &acts[l];
            weights[l] = delta.t().dot(input);
            biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w);
                back.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((loss, Gradient { weights, biases }))
    }

    /// One Adam step on the batch; returns the loss before the update.
    pub fn train_step(
        &mut self,
        x: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
        lr: f64,
    ) -> Result<f64> {
        let (loss, grad) = self.loss_and_gradient(x, actions, targets)?;
        self.apply_adam(&grad, lr);
        Ok(loss)
    }

    /// Adam update with (β₁, β₂, ε) = (0.9, 0.999, 1e-8).
    pub fn apply_adam(&mut self, grad: &Gradient, lr: f64) {
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.adam.m[l], &mut self.adam.v[l]);
            ndarray::Zip::from(&mut layer.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&grad.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&grad.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CHECKPOINT_HEADER}").unwrap();
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(s, "dims {}", dims.join(" ")).unwrap();
        for l in &self.layers {
            let w: Vec<String> = l.w.iter().map(|x| format!("{x:?}")).collect();
            let b: Vec<String> = l.b.iter().map(|x| format!("{x:?}")).collect();
            writeln!(s, "{}", w.join(" ")).unwrap();
            writeln!(s, "{}", b.join(" ")).unwrap();
        }
        s
    }

    /// Parses a checkpoint; optimizer state starts fresh.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("checkpoint: {msg}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CHECKPOINT_HEADER) {
            return Err(bad("missing header"));
        }
        let dims_line = lines.next().ok_or_else(|| bad("missing dims"))?;
        let dims: Vec<usize> = dims_line
            .strip_prefix("dims ")
            .ok_or_else(|| bad("missing dims"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad dim")))
            .collect::<Result<_>>()?;
        let mut net = init_network(&dims, 0).map_err(|_| bad("bad dims"))?;
        let parse_row = |line: Option<&str>, len: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = line
                .ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad value")))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(bad("wrong parameter count"));
            }
            Ok(vals)
        };
        for l in &mut net.layers {
            let w = parse_row(lines.next(), l.w.len())?;
            let b = parse_row(lines.next(), l.b.len())?;
            l.w = Array2::from_shape_vec(l.w.raw_dim(), w).expect("length checked");
            l.b = Array1::from(b);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data"));
        }
        Ok(net)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Central-difference estimate of ∂loss/∂θ for one sample, in flat order.
pub fn finite_diff_gradient(net: &QNetwork, features: &[f64], action_index: usize, target: f64, h: f64) -> Vec<f64> {
    let loss = |n: &QNetwork| {
        let q = n.forward(features).expect("input checked by caller");
        (q[action_index] - target).powi(2)
    };
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let p = *probe.param_mut(i);
            *probe.param_mut(i) = p + h;
            let up = loss(&probe);
            *probe.param_mut(i) = p - h;
            let down = loss(&probe);
            *probe.param_mut(i) = p;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Flags parameters whose `±h` perturbation flips any hidden unit between
/// active and inactive; finite differences are unreliable there.
pub fn kink_sensitive(net: &QNetwork, features: &[f64], h: f64) -> Vec<bool> {
    let base = net.activation_pattern(features).expect("input checked by caller");
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let p = *probe.param_mut(i);
            let mut flips = false;
            for delta in [h, -h] {
                *probe.param_mut(i) = p + delta;
                flips |= probe.activation_pattern(features).expect("same dims") != base;
            }
            *probe.param_mut(i) = p;
            flips
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn batch(rows: &[Vec<f64>]) -> Array2<f64> {
        let cols = rows[0].len();
        Array2::from_shape_vec((rows.len(), cols), rows.concat()).unwrap()
    }

    fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = init_network(&default_dims(3), 7).unwrap();
        let b = init_network(&default_dims(3), 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_network(&default_dims(3), 8).unwrap());
        for l in 0..a.n_layers() {
            assert!(a.biases(l).iter().all(|&x| x == 0.0));
        }
        assert_eq!(a.dims(), &[11, 32, 64, 128, 8]);
    }

    #[test]
    fn init_variance_matches_fan_in() {
        let net = init_network(&[400, 500], 3).unwrap();
        let w = net.weights(0);
        let mean = w.mean().unwrap();
        let var = w.mapv(|x| (x - mean).powi(2)).mean().unwrap();
        assert!((var / (2.0 / 400.0) - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(init_network(&[4], 0).is_err());
        assert!(init_network(&[4, 0, 2], 0).is_err());
        let net = init_network(&[4, 2], 0).unwrap();
        assert_eq!(net.forward(&[1.0; 3]), Err(Error::DimensionMismatch { expected: 4, got: 3 }));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = init_network(&[3, 5, 4], 1).unwrap();
        net.set_params_flat(&vec![0.0; net.n_params()]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn linear_layer_by_hand() {
        let mut net = init_network(&[3, 2], 1).unwrap();
        net.set_layer(0, array![[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]], array![0.5, -1.0]).unwrap();
        // [1+4+9+0.5, -1+1+0-1]
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![14.5, -1.0]);
    }

    #[test]
    fn relu_zeros_negative_units() {
        let mut net = init_network(&[2, 2, 1], 1).unwrap();
        net.set_layer(0, array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0]).unwrap();
        net.set_layer(1, array![[1.0, 1.0]], array![0.0]).unwrap();
        // Hidden = relu([-3, 2]) = [0, 2].
        assert_eq!(net.forward(&[-3.0, 2.0]).unwrap(), vec![2.0]);
        assert_eq!(net.forward(&[-3.0, -2.0]).unwrap(), vec![0.0]);
        assert_eq!(net.activation_pattern(&[-3.0, 2.0]).unwrap(), vec![false, true]);
    }

    #[test]
    fn perfect_targets_leave_parameters_unchanged() {
        let mut net = init_network(&default_dims(2), 4).unwrap();
        let rows = random_rows(1, 6, 8);
        let x = batch(&rows);
        let q = net.forward_batch(x.view()).unwrap();
        let actions = [0, 1, 2, 3, 0, 1];
        let targets: Vec<f64> = actions.iter().enumerate().map(|(i, &a)| q[[i, a]]).collect();
        let before = net.params_flat();
        let loss = net.train_step(x.view(), &actions, &targets, 1e-3).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.params_flat(), before);
        assert_eq!(net.adam().step(), 1);
    }

    #[test]
    fn linear_gradient_by_hand() {
        let mut net = init_network(&[3, 2], 1).unwrap();
        net.set_layer(0, array![[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]], array![0.1, 0.0]).unwrap();
        let x = [1.0, 2.0, -0.5];
        let q = net.forward(&x).unwrap()[0];
        let y = 3.0;
        let (_, g) = net.loss_and_gradient(batch(&[x.to_vec()]).view(), &[0], &[y]).unwrap();
        for j in 0..3 {
            assert!((g.weights[0][[0, j]] - 2.0 * (q - y) * x[j]).abs() < 1e-14);
            assert_eq!(g.weights[0][[1, j]], 0.0);
        }
        assert!((g.biases[0][0] - 2.0 * (q - y)).abs() < 1e-14);
    }

    #[test]
    fn non_finite_inputs_fail() {
        let mut net = init_network(&[2, 3, 2], 1).unwrap();
        let x = batch(&[vec![1.0, 1.0]]);
        assert_eq!(net.train_step(x.view(), &[0], &[f64::NAN], 1e-3), Err(Error::NonFiniteLoss));
        let x = batch(&[vec![f64::INFINITY, 1.0]]);
        assert_eq!(net.train_step(x.view(), &[0], &[1.0], 1e-3), Err(Error::NonFiniteLoss));
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        let mut net = init_network(&default_dims(3), 2).unwrap();
        let x = batch(&random_rows(3, 32, 11));
        let actions: Vec<usize> = (0..32).map(|i| i % 8).collect();
        let targets: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let first = net.train_step(x.view(), &actions, &targets, 1e-3).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = net.train_step(x.view(), &actions, &targets, 1e-3).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn fits_random_linear_map() {
        let mut net = init_network(&default_dims(3), 5).unwrap();
        let mut rng = rng_from_seed(9);
        let map: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..11).map(|_| rng.random_range(-0.3..0.3)).collect())
            .collect();
        let inputs = random_rows(11, 32, 11);
        let mut rows = Vec::new();
        let mut actions = Vec::new();
        let mut targets = Vec::new();
        for x in &inputs {
            for (a, m) in map.iter().enumerate() {
                rows.push(x.clone());
                actions.push(a);
                targets.push(m.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
            }
        }
        let x = batch(&rows);
        let mut loss = f64::INFINITY;
        for _ in 0..5000 {
            loss = net.train_step(x.view(), &actions, &targets, 1e-3).unwrap();
            if loss < 1e-3 {
                break;
            }
        }
        assert!(loss < 1e-3, "loss {loss}");
    }

    #[test]
    fn adam_with_zero_gradient_is_inert() {
        let mut net = init_network(&[4, 6, 3], 1).unwrap();
        let before = net.params_flat();
        let zero = Gradient {
            weights: (0..2).map(|l| Array2::zeros(net.weights(l).raw_dim())).collect(),
            biases: (0..2).map(|l| Array1::zeros(net.biases(l).len())).collect(),
        };
        net.apply_adam(&zero, 1e-2);
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn sync_copies_parameters_only() {
        let mut online = init_network(&default_dims(2), 1).unwrap();
        let mut target = init_network(&default_dims(2), 2).unwrap();
        let x = batch(&random_rows(4, 4, 8));
        online.train_step(x.view(), &[0, 1, 2, 3], &[1.0; 4], 1e-3).unwrap();
        sync_target(&online, &mut target).unwrap();
        assert_eq!(target.adam().step(), 0);
        for probe in random_rows(5, 10, 8) {
            assert_eq!(online.forward(&probe).unwrap(), target.forward(&probe).unwrap());
        }
        let snapshot = target.checksum();
        sync_target(&online, &mut target).unwrap();
        assert_eq!(target.checksum(), snapshot);
        online.train_step(x.view(), &[0, 1, 2, 3], &[1.0; 4], 1e-3).unwrap();
        assert_eq!(target.checksum(), snapshot);
        assert_ne!(online.checksum(), snapshot);
        let mut other = init_network(&[8, 4], 0).unwrap();
        assert!(sync_target(&online, &mut other).is_err());
    }

    #[test]
    fn finite_differences_match_on_small_net() {
        let net = init_network(&[4, 8, 4], 6).unwrap();
        let x = [0.3, -0.7, 1.1, 0.2];
        let (_, g) = net.loss_and_gradient(batch(&[x.to_vec()]).view(), &[2], &[0.5]).unwrap();
        let fd = finite_diff_gradient(&net, &x, 2, 0.5, 1e-5);
        let kinks = kink_sensitive(&net, &x, 1e-5);
        for ((a, n), k) in g.flatten().iter().zip(&fd).zip(&kinks) {
            if !k {
                assert!(rel_err(*a, *n) <= 1e-4, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn dead_unit_has_flat_gradient() {
        let mut net = init_network(&[2, 2, 1], 1).unwrap();
        net.set_layer(0, array![[1.0, 0.0], [0.0, 1.0]], array![-10.0, 0.0]).unwrap();
        net.set_layer(1, array![[1.0, 1.0]], array![0.0]).unwrap();
        let fd = finite_diff_gradient(&net, &[1.0, 1.0], 0, 0.0, 1e-5);
        // First hidden unit is dead: its incoming weights and bias are flat.
        assert_eq!(&fd[0..2], &[0.0, 0.0]);
        assert_eq!(fd[4], 0.0);
    }

    #[test]
    fn finite_differences_converge() {
        // Away from kinks the loss is quadratic in any single parameter, so
        // central differences are exact up to rounding for every step size.
        let net = init_network(&[3, 6, 6, 2], 12).unwrap();
        let x = [2.0, -1.5, 3.0];
        let (_, g) = net.loss_and_gradient(batch(&[x.to_vec()]).view(), &[1], &[2.0]).unwrap();
        let g = g.flatten();
        let smooth: Vec<bool> = kink_sensitive(&net, &x, 1e-3).iter().map(|k| !k).collect();
        for h in [1e-3, 1e-4, 1e-5] {
            let fd = finite_diff_gradient(&net, &x, 1, 2.0, h);
            for i in (0..g.len()).filter(|&i| smooth[i]) {
                assert!((g[i] - fd[i]).abs() <= 1e-9 * g[i].abs().max(1.0), "h={h} i={i}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut net = init_network(&default_dims(2), 3).unwrap();
        let x = batch(&random_rows(4, 3, 8));
        net.train_step(x.view(), &[0, 1, 2], &[1.0, -1.0, 0.5], 1e-2).unwrap();
        let back = QNetwork::from_text(&net.to_text()).unwrap();
        assert_eq!(back.params_flat(), net.params_flat());
        assert_eq!(back.dims(), net.dims());
        assert!(QNetwork::from_text("qnetwork v1\ndims 2 1\n1 2\n").is_err());
        assert!(QNetwork::from_text("nonsense").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn forward_is_pure(seed in 0u64..1000, x in prop::collection::vec(-3.0f64..3.0, 8)) {
            let net = init_network(&default_dims(2), seed).unwrap();
            let before = net.clone();
            let a = net.forward(&x).unwrap();
            prop_assert_eq!(a, net.forward(&x).unwrap());
            prop_assert_eq!(net, before);
        }
    }
}
