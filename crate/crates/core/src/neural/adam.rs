//! Bias-corrected Adam updates for [`Mlp`] parameters.

use crate::num::Real;

use super::{Layer, Mlp, MlpGrads, NeuralError};

/// First and second moment accumulators plus the step counter, shaped
/// like the parameters they update.
#[derive(Debug, Clone)]
pub struct AdamState<R: Real = f64> {
    pub lr: R,
    pub beta1: R,
    pub beta2: R,
    pub eps: R,
    pub step: u64,
    m: Vec<Layer<R>>,
    v: Vec<Layer<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new(net: &Mlp<R>, lr: R) -> Self {
        Self {
            lr,
            beta1: R::scalar(0.9),
            beta2: R::scalar(0.999),
            eps: R::scalar(1e-8),
            step: 0,
            m: net.zero_grads(),
            v: net.zero_grads(),
        }
    }

    /// One optimizer step: descend `params` along `grads`.
    pub fn step(&mut self, params: &mut Mlp<R>, grads: &MlpGrads<R>) -> Result<(), NeuralError> {
        if grads.len() != params.layers.len() {
            return Err(NeuralError::ShapeMismatch {
                context: "adam step",
                expected: params.layers.len().to_string(),
                got: grads.len().to_string(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = R::one() - self.beta1.powi(t);
        let bc2 = R::one() - self.beta2.powi(t);
        for l in 0..params.layers.len() {
            if grads[l].w.data().len() != params.layers[l].w.data().len()
                || grads[l].b.len() != params.layers[l].b.len()
            {
                return Err(NeuralError::ShapeMismatch {
                    context: "adam step layer",
                    expected: format!(
                        "{}x{}",
                        params.layers[l].w.rows(),
                        params.layers[l].w.cols()
                    ),
                    got: format!("{}x{}", grads[l].w.rows(), grads[l].w.cols()),
                });
            }
            update_slice(
                params.layers[l].w.data_mut(),
                grads[l].w.data(),
                self.m[l].w.data_mut(),
                self.v[l].w.data_mut(),
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
            update_slice(
                &mut params.layers[l].b,
                &grads[l].b,
                &mut self.m[l].b,
                &mut self.v[l].b,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice<R: Real>(
    p: &mut [R],
    g: &[R],
    m: &mut [R],
    v: &mut [R],
    lr: R,
    b1: R,
    b2: R,
    eps: R,
    bc1: R,
    bc2: R,
) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (R::one() - b1) * g[i];
        v[i] = b2 * v[i] + (R::one() - b2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}
