//! Dense tanh networks with hand-written backprop, and Adam.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(inputs, outputs)`, so a batch goes through as `x · w + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Array2::zeros((inputs, outputs)), b: Array1::zeros(outputs) }
    }
}

/// Layer widths `[in, h1, .., out]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape(pub Vec<usize>);

/// Multi-layer perceptron, tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of every layer; `inputs[k+1] = tanh(inputs[k]·w_k + b_k)`.
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// PyTorch-style uniform init, `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let layers = sizes
            .windows(2)
            .map(|io| {
                let bound = 1.0 / (io[0] as f64).sqrt();
                let mut d = Dense::zeros(io[0], io[1]);
                d.w.mapv_inplace(|_| rng.random_range(-bound..bound));
                d.b.mapv_inplace(|_| rng.random_range(-bound..bound));
                d
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self { layers: sizes.windows(2).map(|io| Dense::zeros(io[0], io[1])).collect() }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape().0)
    }

    pub fn shape(&self) -> MlpShape {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        MlpShape(s)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if k < last {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            h = if k < last { z.mapv(f64::tanh) } else { z };
        }
        (h, MlpCache { inputs })
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Array2<f64>, grads: &mut Mlp) -> Array2<f64> {
        let mut g = grad_out.clone();
        for k in (0..self.layers.len()).rev() {
            let x = &cache.inputs[k];
            grads.layers[k].w += &x.t().dot(&g);
            grads.layers[k].b += &g.sum_axis(Axis(0));
            let gx = g.dot(&self.layers[k].w.t());
            g = if k > 0 {
                // x is tanh output of the previous layer
                Zip::from(&gx).and(x).map_collect(|&gi, &xi| gi * (1.0 - xi * xi))
            } else {
                gx
            };
        }
        g
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice().expect("standard layout"), l.b.as_slice().expect("standard layout")])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.w.as_slice_mut().expect("standard layout"), l.b.as_slice_mut().expect("standard layout")])
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn fill(&mut self, value: f64) {
        self.tensors_mut().for_each(|t| t.fill(value));
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.shape() == other.shape()
    }
}

/// `target ← (1 − τ)·target + τ·online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::ShapeMismatch(format!("soft update: {:?} vs {:?}", target.shape(), online.shape())));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must be in [0, 1], got {tau}")));
    }
    for (t, o) in target.tensors_mut().zip(online.tensors()) {
        for (tv, ov) in t.iter_mut().zip(o) {
            *tv = (1.0 - tau) * *tv + tau * ov;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Mlp,
    v: Mlp,
    t: i32,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: net.zeros_like(), v: net.zeros_like(), t: 0 }
    }

    /// Descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Mlp) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in net.tensors_mut().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut()) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::Array;

    /// Central-difference relative error between an analytic gradient and
    /// `f`, evaluated over every parameter of `net`.
    pub(crate) fn max_fd_error(net: &Mlp, grads: &Mlp, f: impl Fn(&Mlp) -> f64) -> f64 {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut probe = net.clone();
        let flat_grads: Vec<f64> = grads.tensors().flat_map(|t| t.iter().copied()).collect();
        let mut idx = 0;
        let n_tensors = net.layers.len() * 2;
        for ti in 0..n_tensors {
            let len = net.tensors().nth(ti).unwrap().len();
            for i in 0..len {
                let orig = probe.tensors().nth(ti).unwrap()[i];
                probe.tensors_mut().nth(ti).unwrap()[i] = orig + h;
                let up = f(&probe);
                probe.tensors_mut().nth(ti).unwrap()[i] = orig - h;
                let down = f(&probe);
                probe.tensors_mut().nth(ti).unwrap()[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = flat_grads[idx];
                let err = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-6);
                worst = worst.max(err);
                idx += 1;
            }
        }
        worst
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = stream(3, 0);
        let net = Mlp::new(&[3, 5, 4, 2], &mut rng);
        let x = Array::from_shape_fn((6, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let weights = Array::from_shape_fn((6, 2), |(i, j)| 0.5 + (i as f64) - (j as f64) * 0.7);
        let loss = |n: &Mlp| (n.forward(&x) * &weights).sum();
        let (_, cache) = net.forward_cached(&x);
        let mut grads = net.zeros_like();
        let gx = net.backward(&cache, &weights, &mut grads);
        assert!(max_fd_error(&net, &grads, loss) < 1e-6);

        // input gradient
        let h = 1e-6;
        for i in 0..6 {
            for j in 0..3 {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[[i, j]] += h;
                down[[i, j]] -= h;
                let num = ((net.forward(&up) * &weights).sum() - (net.forward(&down) * &weights).sum()) / (2.0 * h);
                assert!((num - gx[[i, j]]).abs() < 1e-6 * (1.0 + num.abs()));
            }
        }
    }

    #[test]
    fn cached_forward_agrees() {
        let mut rng = stream(4, 0);
        let net = Mlp::new(&[2, 8, 1], &mut rng);
        let x = Array::from_shape_fn((5, 2), |(i, j)| i as f64 - j as f64);
        assert_eq!(net.forward(&x), net.forward_cached(&x).0);
        assert_eq!(net.shape(), MlpShape(vec![2, 8, 1]));
        assert_eq!(net.n_params(), 2 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn soft_update_limits() {
        let mut rng = stream(5, 0);
        let online = Mlp::new(&[2, 4, 1], &mut rng);
        let start = Mlp::new(&[2, 4, 1], &mut rng);

        let mut t = start.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, start);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        let dist = |a: &Mlp, b: &Mlp| -> f64 {
            a.tensors().zip(b.tensors()).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2))).sum::<f64>().sqrt()
        };
        let mut t = start.clone();
        let d0 = dist(&t, &online);
        for k in 1..=200 {
            soft_update(&mut t, &online, 0.005).unwrap();
            let expected = d0 * 0.995f64.powi(k);
            assert!((dist(&t, &online) - expected).abs() < 1e-9 * d0);
        }

        let mut wrong = Mlp::new(&[2, 3, 1], &mut rng);
        assert!(soft_update(&mut wrong, &online, 0.5).is_err());
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut net = Mlp::zeros(&[1, 1]);
        net.layers[0].w[[0, 0]] = 3.0;
        net.layers[0].b[0] = -2.0;
        let mut opt = Adam::new(&net, 0.05);
        for _ in 0..2000 {
            let mut g = net.zeros_like();
            g.layers[0].w[[0, 0]] = 2.0 * (net.layers[0].w[[0, 0]] - 1.0);
            g.layers[0].b[0] = 2.0 * (net.layers[0].b[0] + 0.5);
            opt.step(&mut net, &g);
        }
        assert!((net.layers[0].w[[0, 0]] - 1.0).abs() < 1e-3);
        assert!((net.layers[0].b[0] + 0.5).abs() < 1e-3);
    }
}
