//! Squashed-Gaussian policy head.
//!
//! The actor network emits `2A` raw values per state: `A` pre-squash means
//! and `A` raw standard deviations. Actions are `tanh` of a reparameterized
//! Gaussian sample, which keeps them in `(-1, 1)`; the log-probability
//! carries the tanh change-of-variables correction, without which the
//! entropy term of the actor objective would be wrong.

use crate::kinematics::{BodyTwist, RobotGeometry};
use crate::num::Real;

/// Lower clamp on the policy standard deviation.
pub const SIGMA_MIN: f64 = 1e-3;
/// Upper clamp on the policy standard deviation.
pub const SIGMA_MAX: f64 = 2.0;
/// Stabilizer inside the tanh log-density correction.
pub const LOGP_EPS: f64 = 1e-6;

/// Distribution parameters for one state: pre-squash means and clamped
/// standard deviations, plus the raw std outputs needed to route gradients
/// through the softplus.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead<R: Real = f64> {
    pub mean_pre: Vec<R>,
    pub std: Vec<R>,
    std_raw: Vec<R>,
}

fn softplus<R: Real>(x: R) -> R {
    // ln(1 + e^x), switching to the asymptote for large x.
    if x > R::scalar(20.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

impl<R: Real> GaussianHead<R> {
    /// Split a raw actor output row `(mean_0..mean_A, std_0..std_A)`.
    pub fn from_raw(raw: &[R]) -> Self {
        assert!(raw.len() % 2 == 0, "policy head needs an even output dim");
        let dim = raw.len() / 2;
        let mean_pre = raw[..dim].to_vec();
        let std_raw = raw[dim..].to_vec();
        let std = std_raw
            .iter()
            .map(|&s| softplus(s).max(R::scalar(SIGMA_MIN)).min(R::scalar(SIGMA_MAX)))
            .collect();
        Self {
            mean_pre,
            std,
            std_raw,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_pre.len()
    }

    /// Deterministic evaluation action: the squashed mean.
    pub fn mean_action(&self) -> Vec<R> {
        self.mean_pre.iter().map(|m| m.tanh()).collect()
    }
}

/// A reparameterized sample: the squashed action, its log-probability, and
/// the noise that generated it (kept so the gradient path can be replayed).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction<R: Real = f64> {
    pub action: Vec<R>,
    pub log_prob: R,
    pub eps: Vec<R>,
}

/// Squash a reparameterized Gaussian draw `u = mean + std * eps` and
/// accumulate `log pi(a)` with the tanh correction.
pub fn sample_with_eps<R: Real>(head: &GaussianHead<R>, eps: &[R]) -> SampledAction<R> {
    assert_eq!(eps.len(), head.dim());
    let half_ln_two_pi = R::scalar(0.5 * (std::f64::consts::TAU).ln());
    let c = R::scalar(LOGP_EPS);
    let mut action = Vec::with_capacity(head.dim());
    let mut log_prob = R::zero();
    for d in 0..head.dim() {
        let u = head.mean_pre[d] + head.std[d] * eps[d];
        let a = u.tanh();
        action.push(a);
        let sech2 = R::one() - a * a;
        log_prob = log_prob
            - R::scalar(0.5) * eps[d] * eps[d]
            - head.std[d].ln()
            - half_ln_two_pi
            - (sech2 + c).ln();
    }
    SampledAction {
        action,
        log_prob,
        eps: eps.to_vec(),
    }
}

/// Gradient of a scalar objective with respect to the raw actor outputs,
/// given its gradient with respect to the sampled action (`d_action`) and
/// with respect to `log pi` (`d_logp`). The sample must come from
/// [`sample_with_eps`] on the same head.
pub fn head_backward<R: Real>(
    head: &GaussianHead<R>,
    sample: &SampledAction<R>,
    d_action: &[R],
    d_logp: R,
) -> Vec<R> {
    let dim = head.dim();
    let c = R::scalar(LOGP_EPS);
    let mut d_raw = vec![R::zero(); 2 * dim];
    for d in 0..dim {
        let a = sample.action[d];
        let sech2 = R::one() - a * a;
        // d/du of -ln(sech2 + c).
        let corr = R::scalar(2.0) * a * sech2 / (sech2 + c);
        let d_mean = d_logp * corr + d_action[d] * sech2;
        let d_sigma = d_logp * (corr * sample.eps[d] - R::one() / head.std[d])
            + d_action[d] * sech2 * sample.eps[d];
        // Softplus gate; clamped sigmas pass no gradient.
        let sp = softplus(head.std_raw[d]);
        let gate = if sp > R::scalar(SIGMA_MIN) && sp < R::scalar(SIGMA_MAX) {
            sigmoid(head.std_raw[d])
        } else {
            R::zero()
        };
        d_raw[d] = d_mean;
        d_raw[dim + d] = d_sigma * gate;
    }
    d_raw
}

/// Affine map from a normalized action in `[-1, 1]^3` to a body twist at
/// the robot's kinematic limits (symmetric lower bounds).
pub fn scale_action<R: Real>(action: &[R], geo: &RobotGeometry<R>) -> BodyTwist<R> {
    assert_eq!(action.len(), 3);
    let lerp = |a: R, max: R| {
        let min = -max;
        min + (a + R::one()) / R::scalar(2.0) * (max - min)
    };
    BodyTwist::new(
        lerp(action[0], geo.vx_max),
        lerp(action[1], geo.vy_max),
        lerp(action[2], geo.wz_max),
    )
}
