//! Minimal differentiable multilayer-perceptron substrate.
//!
//! Dense row-major matrices, an MLP with cached forward passes and exact
//! reverse-mode backward passes, and a bias-corrected Adam optimizer. No
//! graph machinery: the composition is fixed (affine layers with an
//! elementwise hidden activation and a linear output), which is all the
//! actor-critic stack needs and keeps every gradient checkable against
//! finite differences.

pub mod adam;
pub mod policy;

pub use adam::AdamState;
pub use policy::{scale_action, GaussianHead};

use rand::Rng;
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<R: Real = f64> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[R]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[R] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [R] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }
}

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply<R: Real>(self, z: R) -> R {
        match self {
            Activation::Relu => z.max(R::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative<R: Real>(self, z: R) -> R {
        match self {
            Activation::Relu => {
                if z > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                R::one() - t * t
            }
        }
    }
}

/// One affine layer: weights are `out x in`, row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<R: Real = f64> {
    pub w: Mat<R>,
    pub b: Vec<R>,
}

impl<R: Real> Layer<R> {
    fn zeros_like(&self) -> Self {
        Self {
            w: Mat::zeros(self.w.rows, self.w.cols),
            b: vec![R::zero(); self.b.len()],
        }
    }
}

/// Fully connected network: affine layers, a shared hidden activation,
/// and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<R: Real = f64> {
    pub layers: Vec<Layer<R>>,
    pub activation: Activation,
}

/// Per-layer gradients, shaped exactly like the parameters.
pub type MlpGrads<R> = Vec<Layer<R>>;

/// Activations cached by the forward pass, sufficient for an exact
/// backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<R: Real = f64> {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Mat<R>>,
    /// Pre-activation values of each hidden layer.
    hidden_preacts: Vec<Mat<R>>,
}

impl<R: Real> Mlp<R> {
    /// He-style fan-in-scaled uniform initialization. `final_scale`
    /// shrinks the output layer (policy heads start near zero actions).
    pub fn init<G: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        final_scale: f64,
        rng: &mut G,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let mut limit = (6.0 / fan_in as f64).sqrt();
            if l == sizes.len() - 2 {
                limit *= final_scale;
            }
            let mut w = Mat::zeros(fan_out, fan_in);
            for v in w.data_mut() {
                *v = R::scalar((R::unit_uniform(rng).as_f64() * 2.0 - 1.0) * limit);
            }
            layers.push(Layer {
                w,
                b: vec![R::zero(); fan_out],
            });
        }
        Self { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows
    }

    /// Layer sizes including input and output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.rows));
        s
    }

    pub fn zero_grads(&self) -> MlpGrads<R> {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    fn affine(&self, l: usize, x: &Mat<R>) -> Mat<R> {
        let layer = &self.layers[l];
        let out_dim = layer.w.rows;
        let mut z = Mat::zeros(x.rows, out_dim);
        for b in 0..x.rows {
            let xr = x.row(b);
            let zr = z.row_mut(b);
            for o in 0..out_dim {
                let wr = layer.w.row(o);
                let mut acc = layer.b[o];
                for i in 0..xr.len() {
                    acc = acc + wr[i] * xr[i];
                }
                zr[o] = acc;
            }
        }
        z
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: &Mat<R>) -> Result<(Mat<R>, ForwardCache<R>), NeuralError> {
        if x.cols != self.input_dim() {
            return Err(NeuralError::ShapeMismatch {
                context: "mlp forward input",
                expected: self.input_dim().to_string(),
                got: x.cols.to_string(),
            });
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut hidden_preacts = Vec::with_capacity(n - 1);
        let mut cur = x.clone();
        for l in 0..n {
            let z = self.affine(l, &cur);
            inputs.push(cur);
            if l + 1 < n {
                let mut a = z.clone();
                for v in a.data_mut() {
                    *v = self.activation.apply(*v);
                }
                hidden_preacts.push(z);
                cur = a;
            } else {
                cur = z;
            }
        }
        Ok((
            cur,
            ForwardCache {
                inputs,
                hidden_preacts,
            },
        ))
    }

    /// Single-sample forward without keeping the cache.
    pub fn forward_one(&self, x: &[R]) -> Result<Vec<R>, NeuralError> {
        let m = Mat::from_rows(&[x]);
        let (out, _) = self.forward(&m)?;
        Ok(out.row(0).to_vec())
    }

    /// Exact reverse-mode gradients of a scalar loss, given the gradient
    /// of that loss with respect to the network output. Also returns the
    /// gradient with respect to the network input (used to differentiate
    /// critics with respect to actions).
    pub fn backward(
        &self,
        cache: &ForwardCache<R>,
        dout: &Mat<R>,
    ) -> Result<(MlpGrads<R>, Mat<R>), NeuralError> {
        let n = self.layers.len();
        if dout.cols != self.output_dim() || dout.rows != cache.inputs[0].rows {
            return Err(NeuralError::ShapeMismatch {
                context: "mlp backward output gradient",
                expected: format!("{}x{}", cache.inputs[0].rows, self.output_dim()),
                got: format!("{}x{}", dout.rows, dout.cols),
            });
        }
        let mut grads = self.zero_grads();
        let mut g = dout.clone();
        for l in (0..n).rev() {
            let x = &cache.inputs[l];
            let layer = &self.layers[l];
            let gl = &mut grads[l];
            for b in 0..g.rows {
                let gr = g.row(b);
                let xr = x.row(b);
                for o in 0..gr.len() {
                    let go = gr[o];
                    if go == R::zero() {
                        continue;
                    }
                    gl.b[o] = gl.b[o] + go;
                    let wr = gl.w.row_mut(o);
                    for i in 0..xr.len() {
                        wr[i] = wr[i] + go * xr[i];
                    }
                }
            }
            // Gradient with respect to this layer's input.
            let mut din = Mat::zeros(g.rows, layer.w.cols);
            for b in 0..g.rows {
                let gr = g.row(b);
                let dr = din.row_mut(b);
                for o in 0..gr.len() {
                    let go = gr[o];
                    if go == R::zero() {
                        continue;
                    }
                    let wr = layer.w.row(o);
                    for i in 0..dr.len() {
                        dr[i] = dr[i] + go * wr[i];
                    }
                }
            }
            if l > 0 {
                let z = &cache.hidden_preacts[l - 1];
                for (d, zv) in din.data_mut().iter_mut().zip(z.data()) {
                    *d = *d * self.activation.derivative(*zv);
                }
            }
            g = din;
        }
        Ok((grads, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(sizes: &[usize], seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::init(sizes, Activation::Relu, 1.0, &mut rng)
    }

    /// Naive per-neuron forward pass, kept deliberately dumb and separate
    /// from the batched implementation.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (l, layer) in net.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.b.len());
            for o in 0..layer.b.len() {
                let mut acc = layer.b[o];
                for (i, &xi) in cur.iter().enumerate() {
                    acc += layer.w.row(o)[i] * xi;
                }
                if l + 1 < net.layers.len() {
                    acc = acc.max(0.0);
                }
                next.push(acc);
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn zero_net_outputs_zero() {
        let mut net = random_net(&[3, 4, 2], 0);
        for layer in &mut net.layers {
            for v in layer.w.data_mut() {
                *v = 0.0;
            }
        }
        let out = net.forward_one(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = random_net(&[3, 3], 1);
        for o in 0..3 {
            for i in 0..3 {
                net.layers[0].w.row_mut(o)[i] = if o == i { 1.0 } else { 0.0 };
            }
            net.layers[0].b[o] = 0.0;
        }
        let out = net.forward_one(&[0.5, -1.5, 2.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.5, 2.0]);
    }

    #[test]
    fn forward_matches_reference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..10 {
            let net = random_net(&[5, 8, 8, 3], seed);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = net.forward_one(&x).unwrap();
            let want = reference_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = random_net(&[4, 3], 2);
        assert!(matches!(
            net.forward_one(&[1.0, 2.0]),
            Err(NeuralError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let net = random_net(&[3, 5, 2], 3);
        let x = Mat::from_rows(&[&[0.3, -0.4, 0.8]]);
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, din) = net.backward(&cache, &Mat::zeros(1, 2)).unwrap();
        for layer in &grads {
            assert!(layer.w.data().iter().all(|&v| v == 0.0));
            assert!(layer.b.iter().all(|&v| v == 0.0));
        }
        assert!(din.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_squared_loss_closed_form() {
        // loss = (w.x - y)^2, dL/dw = 2 (w.x - y) x^T.
        let mut net = random_net(&[3, 1], 4);
        net.layers[0].b[0] = 0.0;
        let x = [0.7, -1.2, 0.4];
        let y = 0.9;
        let out = net.forward_one(&x).unwrap()[0];
        let (_, cache) = net.forward(&Mat::from_rows(&[&x])).unwrap();
        let dl = 2.0 * (out - y);
        let (grads, _) = net.backward(&cache, &Mat::from_rows(&[&[dl]])).unwrap();
        for i in 0..3 {
            let want = 2.0 * (out - y) * x[i];
            assert!((grads[0].w.row(0)[i] - want).abs() < 1e-12);
        }
        assert!((grads[0].b[0] - dl).abs() < 1e-12);
    }

    /// Scalar loss used by the finite-difference checks: a fixed random
    /// projection of the outputs, summed over the batch.
    fn projected_loss(net: &Mlp, x: &Mat, proj: &[f64]) -> f64 {
        let (out, _) = net.forward(x).unwrap();
        let mut loss = 0.0;
        for b in 0..out.rows() {
            for (o, &p) in proj.iter().enumerate() {
                loss += p * out.row(b)[o];
            }
        }
        loss
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for seed in 0..20 {
            let mut net = random_net(&[4, 8, 3], seed);
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect())
                .collect();
            let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let x = Mat::from_rows(&row_refs);
            let proj: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let (out, cache) = net.forward(&x).unwrap();
            let mut dout = Mat::zeros(out.rows(), out.cols());
            for b in 0..out.rows() {
                dout.row_mut(b).copy_from_slice(&proj);
            }
            let (grads, _) = net.backward(&cache, &dout).unwrap();

            let h = 1e-5;
            for l in 0..net.layers.len() {
                for idx in 0..net.layers[l].w.data().len() {
                    let orig = net.layers[l].w.data()[idx];
                    net.layers[l].w.data_mut()[idx] = orig + h;
                    let up = projected_loss(&net, &x, &proj);
                    net.layers[l].w.data_mut()[idx] = orig - h;
                    let down = projected_loss(&net, &x, &proj);
                    net.layers[l].w.data_mut()[idx] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = grads[l].w.data()[idx];
                    let denom = an.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (an - fd).abs() / denom < 1e-4,
                        "seed {seed} layer {l} w[{idx}]: analytic {an} vs fd {fd}"
                    );
                }
                for o in 0..net.layers[l].b.len() {
                    let orig = net.layers[l].b[o];
                    net.layers[l].b[o] = orig + h;
                    let up = projected_loss(&net, &x, &proj);
                    net.layers[l].b[o] = orig - h;
                    let down = projected_loss(&net, &x, &proj);
                    net.layers[l].b[o] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = grads[l].b[o];
                    let denom = an.abs().max(fd.abs()).max(1e-6);
                    assert!((an - fd).abs() / denom < 1e-4);
                }
            }
        }
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let net = random_net(&[4, 6, 2], 7);
        let x0 = vec![0.3, -0.9, 1.1, 0.2];
        let proj = [0.8, -0.6];
        let loss = |x: &[f64]| {
            let out = net.forward_one(x).unwrap();
            proj[0] * out[0] + proj[1] * out[1]
        };
        let (_, cache) = net.forward(&Mat::from_rows(&[&x0])).unwrap();
        let (_, din) = net
            .backward(&cache, &Mat::from_rows(&[&proj]))
            .unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut xp = x0.clone();
            xp[i] += h;
            let mut xm = x0.clone();
            xm[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((din.row(0)[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = random_net(&[6, 16, 4], 11);
        let x: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.3).collect();
        let a = net.forward_one(&x).unwrap();
        let b = net.forward_one(&x).unwrap();
        assert_eq!(a, b);
    }

    use rand::Rng;
}
