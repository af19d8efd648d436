//! Soft actor-critic: twin critics with target networks, an
//! entropy-regularized squashed-Gaussian actor, and the training loop.

pub mod replay;
pub mod train;

pub use replay::{ReplayBuffer, ReplayError, Transition};
pub use train::{evaluate, train, EvalStats, TrainOutcome, TrainSetup, TrainingLog};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::policy::{head_backward, sample_with_eps, GaussianHead, SampledAction};
use crate::neural::{Activation, AdamState, Mat, Mlp, MlpGrads, NeuralError};
use crate::num::Real;

/// Which action space the agent drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// Hierarchical: 3 twist components, routed through the fuzzy
    /// controller.
    Twist,
    /// Ablation: 8 raw wheel values (4 steering angles, 4 speeds).
    Wheel,
}

impl ActionMode {
    pub fn act_dim(self) -> usize {
        match self {
            ActionMode::Twist => 3,
            ActionMode::Wheel => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Entropy temperature. Fixed unless `auto_alpha` is set.
    pub alpha: f64,
    pub auto_alpha: bool,
    pub lr_alpha: f64,
    pub episodes: u32,
    /// Uniform-random transitions collected before the first update.
    pub warmup: usize,
    pub updates_per_step: u32,
    pub buffer_capacity: usize,
    /// Hidden layer widths of actor and critics.
    pub hidden: Vec<usize>,
    /// Deterministic evaluation cadence (episodes); zero disables.
    pub eval_every: u32,
    pub eval_episodes: u32,
    /// Episodes in the final held-out evaluation.
    pub final_eval_episodes: u32,
    /// Checkpoint cadence (episodes); zero keeps only the final one.
    pub checkpoint_every: u32,
    pub action_mode: ActionMode,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 128,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            alpha: 0.2,
            auto_alpha: false,
            lr_alpha: 3e-4,
            episodes: 2000,
            warmup: 1000,
            updates_per_step: 1,
            buffer_capacity: 500_000,
            hidden: vec![512, 512],
            eval_every: 50,
            eval_episodes: 10,
            final_eval_episodes: 50,
            checkpoint_every: 500,
            action_mode: ActionMode::Twist,
        }
    }
}

/// Soft Bellman backup for one sample:
/// `y = r + gamma (1 - done) (min_q - alpha log_pi)`.
pub fn soft_target<R: Real>(r: R, done: bool, min_q: R, log_pi: R, gamma: R, alpha: R) -> R {
    if done {
        r
    } else {
        r + gamma * (min_q - alpha * log_pi)
    }
}

/// Blend critic parameters into a target network:
/// `phi' <- tau phi + (1 - tau) phi'`.
pub fn soft_update_mlp<R: Real>(
    target: &mut Mlp<R>,
    src: &Mlp<R>,
    tau: R,
) -> Result<(), NeuralError> {
    if target.sizes() != src.sizes() {
        return Err(NeuralError::ShapeMismatch {
            context: "soft update",
            expected: format!("{:?}", src.sizes()),
            got: format!("{:?}", target.sizes()),
        });
    }
    let keep = R::one() - tau;
    for (tl, sl) in target.layers.iter_mut().zip(&src.layers) {
        for (t, s) in tl.w.data_mut().iter_mut().zip(sl.w.data()) {
            *t = tau * *s + keep * *t;
        }
        for (t, s) in tl.b.iter_mut().zip(&sl.b) {
            *t = tau * *s + keep * *t;
        }
    }
    Ok(())
}

/// Actor, twin critics, their targets, and the optimizers.
#[derive(Debug, Clone)]
pub struct SacAgent<R: Real = f64> {
    pub actor: Mlp<R>,
    pub critic1: Mlp<R>,
    pub critic2: Mlp<R>,
    pub target1: Mlp<R>,
    pub target2: Mlp<R>,
    actor_opt: AdamState<R>,
    critic1_opt: AdamState<R>,
    critic2_opt: AdamState<R>,
    log_alpha: R,
    alpha_m: R,
    alpha_v: R,
    alpha_steps: u64,
    pub config: SacConfig,
    obs_dim: usize,
    act_dim: usize,
}

impl<R: Real> SacAgent<R> {
    pub fn new<G: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        config: SacConfig,
        rng: &mut G,
    ) -> Self {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(2 * act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);

        let actor = Mlp::init(&actor_sizes, Activation::Relu, 0.01, rng);
        let critic1 = Mlp::init(&critic_sizes, Activation::Relu, 1.0, rng);
        let critic2 = Mlp::init(&critic_sizes, Activation::Relu, 1.0, rng);
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        let actor_opt = AdamState::new(&actor, R::scalar(config.lr_actor));
        let critic1_opt = AdamState::new(&critic1, R::scalar(config.lr_critic));
        let critic2_opt = AdamState::new(&critic2, R::scalar(config.lr_critic));
        let log_alpha = R::scalar(config.alpha.max(1e-8).ln());
        Self {
            actor,
            critic1,
            critic2,
            target1,
            target2,
            actor_opt,
            critic1_opt,
            critic2_opt,
            log_alpha,
            alpha_m: R::zero(),
            alpha_v: R::zero(),
            alpha_steps: 0,
            config,
            obs_dim,
            act_dim,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn alpha(&self) -> R {
        self.log_alpha.exp()
    }

    /// Stochastic normalized action: a squashed-Gaussian draw.
    pub fn act_sampled<G: Rng + ?Sized>(&self, obs: &[R], rng: &mut G) -> Vec<R> {
        let raw = self
            .actor
            .forward_one(obs)
            .expect("actor input dim mismatch");
        let head = GaussianHead::from_raw(&raw);
        let eps: Vec<R> = (0..self.act_dim).map(|_| R::standard_normal(rng)).collect();
        sample_with_eps(&head, &eps).action
    }

    /// Deterministic normalized action: the squashed mean, used by
    /// evaluation and deployment.
    pub fn act_mean(&self, obs: &[R]) -> Vec<R> {
        let raw = self
            .actor
            .forward_one(obs)
            .expect("actor input dim mismatch");
        GaussianHead::from_raw(&raw).mean_action()
    }

    fn states_mat(&self, batch: &[&Transition<R>], next: bool) -> Mat<R> {
        let rows: Vec<&[R]> = batch
            .iter()
            .map(|t| if next { &*t.s_next } else { &*t.s })
            .collect();
        Mat::from_rows(&rows)
    }

    fn critic_inputs(&self, states: &Mat<R>, actions: &[Vec<R>]) -> Mat<R> {
        let mut m = Mat::zeros(states.rows(), self.obs_dim + self.act_dim);
        for b in 0..states.rows() {
            let row = m.row_mut(b);
            row[..self.obs_dim].copy_from_slice(states.row(b));
            row[self.obs_dim..].copy_from_slice(&actions[b]);
        }
        m
    }

    /// Bellman targets for a batch, sampling fresh next actions from the
    /// current actor and bootstrapping through the pessimistic (minimum)
    /// target critic.
    pub fn critic_target<G: Rng + ?Sized>(
        &self,
        batch: &[&Transition<R>],
        rng: &mut G,
    ) -> Vec<R> {
        let next_states = self.states_mat(batch, true);
        let (raw, _) = self
            .actor
            .forward(&next_states)
            .expect("actor forward in critic_target");
        let mut actions = Vec::with_capacity(batch.len());
        let mut log_pis = Vec::with_capacity(batch.len());
        for b in 0..batch.len() {
            let head = GaussianHead::from_raw(raw.row(b));
            let eps: Vec<R> = (0..self.act_dim).map(|_| R::standard_normal(rng)).collect();
            let s = sample_with_eps(&head, &eps);
            actions.push(s.action);
            log_pis.push(s.log_prob);
        }
        let inputs = self.critic_inputs(&next_states, &actions);
        let (q1, _) = self.target1.forward(&inputs).expect("target1 forward");
        let (q2, _) = self.target2.forward(&inputs).expect("target2 forward");
        let gamma = R::scalar(self.config.gamma);
        let alpha = self.alpha();
        batch
            .iter()
            .enumerate()
            .map(|(b, t)| {
                let min_q = q1.row(b)[0].min(q2.row(b)[0]);
                soft_target(t.r, t.done, min_q, log_pis[b], gamma, alpha)
            })
            .collect()
    }

    /// Mean squared Bellman residual of one critic and its parameter
    /// gradients. Targets are treated as constants.
    pub fn critic_loss_and_grads(
        critic: &Mlp<R>,
        inputs: &Mat<R>,
        y: &[R],
    ) -> (R, MlpGrads<R>) {
        let (q, cache) = critic.forward(inputs).expect("critic forward");
        let n = R::scalar(y.len() as f64);
        let mut loss = R::zero();
        let mut dout = Mat::zeros(y.len(), 1);
        for b in 0..y.len() {
            let err = q.row(b)[0] - y[b];
            loss = loss + err * err;
            dout.row_mut(b)[0] = R::scalar(2.0) * err / n;
        }
        let (grads, _) = critic.backward(&cache, &dout).expect("critic backward");
        (loss / n, grads)
    }

    /// One Adam step on each critic against the targets `y`. Returns both
    /// losses. The actor is untouched.
    pub fn critic_update(&mut self, batch: &[&Transition<R>], y: &[R]) -> (R, R) {
        let states = self.states_mat(batch, false);
        let actions: Vec<Vec<R>> = batch.iter().map(|t| t.a.to_vec()).collect();
        let inputs = self.critic_inputs(&states, &actions);
        let (l1, g1) = Self::critic_loss_and_grads(&self.critic1, &inputs, y);
        let (l2, g2) = Self::critic_loss_and_grads(&self.critic2, &inputs, y);
        self.critic1_opt
            .step(&mut self.critic1, &g1)
            .expect("critic1 adam");
        self.critic2_opt
            .step(&mut self.critic2, &g2)
            .expect("critic2 adam");
        (l1, l2)
    }

    /// Reparameterized actor objective
    /// `mean(alpha log_pi(a~|s) - min(Q1, Q2)(s, a~))` and its gradients,
    /// for a fixed noise matrix (one row of standard normals per sample).
    /// Critic parameters receive no updates; they only supply the action
    /// gradient. Also returns the batch mean log-probability.
    pub fn actor_objective_and_grads(
        &self,
        batch: &[&Transition<R>],
        eps: &Mat<R>,
    ) -> (R, MlpGrads<R>, R) {
        let n = batch.len();
        let n_r = R::scalar(n as f64);
        let states = self.states_mat(batch, false);
        let (raw, actor_cache) = self.actor.forward(&states).expect("actor forward");

        let mut heads: Vec<GaussianHead<R>> = Vec::with_capacity(n);
        let mut samples: Vec<SampledAction<R>> = Vec::with_capacity(n);
        let mut actions: Vec<Vec<R>> = Vec::with_capacity(n);
        for b in 0..n {
            let head = GaussianHead::from_raw(raw.row(b));
            let s = sample_with_eps(&head, eps.row(b));
            actions.push(s.action.clone());
            heads.push(head);
            samples.push(s);
        }
        let inputs = self.critic_inputs(&states, &actions);
        let (q1, c1_cache) = self.critic1.forward(&inputs).expect("critic1 forward");
        let (q2, c2_cache) = self.critic2.forward(&inputs).expect("critic2 forward");

        let alpha = self.alpha();
        let mut loss = R::zero();
        let mut mean_logp = R::zero();
        let mut dout1 = Mat::zeros(n, 1);
        let mut dout2 = Mat::zeros(n, 1);
        for b in 0..n {
            let (v1, v2) = (q1.row(b)[0], q2.row(b)[0]);
            loss = loss + alpha * samples[b].log_prob - v1.min(v2);
            mean_logp = mean_logp + samples[b].log_prob;
            // d loss / d q_min = -1/n, routed to whichever critic is min.
            if v1 <= v2 {
                dout1.row_mut(b)[0] = -R::one() / n_r;
            } else {
                dout2.row_mut(b)[0] = -R::one() / n_r;
            }
        }
        loss = loss / n_r;
        mean_logp = mean_logp / n_r;

        let (_, din1) = self.critic1.backward(&c1_cache, &dout1).expect("critic1 bw");
        let (_, din2) = self.critic2.backward(&c2_cache, &dout2).expect("critic2 bw");

        let d_logp = alpha / n_r;
        let mut dout_actor = Mat::zeros(n, 2 * self.act_dim);
        for b in 0..n {
            let mut d_action = vec![R::zero(); self.act_dim];
            for d in 0..self.act_dim {
                d_action[d] = din1.row(b)[self.obs_dim + d] + din2.row(b)[self.obs_dim + d];
            }
            let d_raw = head_backward(&heads[b], &samples[b], &d_action, d_logp);
            dout_actor.row_mut(b).copy_from_slice(&d_raw);
        }
        let (grads, _) = self
            .actor
            .backward(&actor_cache, &dout_actor)
            .expect("actor backward");
        (loss, grads, mean_logp)
    }

    /// One Adam step on the actor (and optionally on the temperature).
    /// Critic parameters are bitwise untouched.
    pub fn actor_update<G: Rng + ?Sized>(&mut self, batch: &[&Transition<R>], rng: &mut G) -> R {
        let mut eps = Mat::zeros(batch.len(), self.act_dim);
        for b in 0..batch.len() {
            for v in eps.row_mut(b) {
                *v = R::standard_normal(rng);
            }
        }
        let (loss, grads, mean_logp) = self.actor_objective_and_grads(batch, &eps);
        self.actor_opt
            .step(&mut self.actor, &grads)
            .expect("actor adam");
        if self.config.auto_alpha {
            self.alpha_grad_step(mean_logp);
        }
        loss
    }

    /// Adam on `log_alpha` toward the target entropy `-act_dim`,
    /// minimizing `-log_alpha * (log_pi + target_entropy)`.
    fn alpha_grad_step(&mut self, mean_logp: R) {
        let target_entropy = -R::scalar(self.act_dim as f64);
        let g = -(mean_logp + target_entropy);
        let b1 = R::scalar(0.9);
        let b2 = R::scalar(0.999);
        self.alpha_steps += 1;
        self.alpha_m = b1 * self.alpha_m + (R::one() - b1) * g;
        self.alpha_v = b2 * self.alpha_v + (R::one() - b2) * g * g;
        let m_hat = self.alpha_m / (R::one() - b1.powi(self.alpha_steps as i32));
        let v_hat = self.alpha_v / (R::one() - b2.powi(self.alpha_steps as i32));
        self.log_alpha = self.log_alpha
            - R::scalar(self.config.lr_alpha) * m_hat / (v_hat.sqrt() + R::scalar(1e-8));
        // Keep the temperature in a sane band even on adversarial batches.
        self.log_alpha = self.log_alpha
            .max(R::scalar(-13.8))
            .min(R::scalar(2.3));
    }

    /// Soft-update both target networks.
    pub fn soft_update(&mut self) {
        let tau = R::scalar(self.config.tau);
        soft_update_mlp(&mut self.target1, &self.critic1, tau).expect("target1 shapes");
        soft_update_mlp(&mut self.target2, &self.critic2, tau).expect("target2 shapes");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_config(hidden: Vec<usize>) -> SacConfig {
        SacConfig {
            hidden,
            batch_size: 8,
            warmup: 0,
            ..SacConfig::default()
        }
    }

    fn toy_batch(
        obs_dim: usize,
        act_dim: usize,
        n: usize,
        seed: u64,
    ) -> Vec<Transition<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Transition {
                s: (0..obs_dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<_>>()
                    .into_boxed_slice(),
                a: (0..act_dim)
                    .map(|_| rng.gen_range(-0.9..0.9))
                    .collect::<Vec<_>>()
                    .into_boxed_slice(),
                r: rng.gen_range(-1.0..1.0),
                s_next: (0..obs_dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<_>>()
                    .into_boxed_slice(),
                done: false,
            })
            .collect()
    }

    /// Critic that ignores its input and always outputs `bias`.
    fn constant_critic(obs_dim: usize, act_dim: usize, bias: f64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::init(
            &[obs_dim + act_dim, 4, 1],
            Activation::Relu,
            1.0,
            &mut rng,
        );
        for layer in &mut net.layers {
            for v in layer.w.data_mut() {
                *v = 0.0;
            }
            for v in &mut layer.b {
                *v = 0.0;
            }
        }
        net.layers.last_mut().unwrap().b[0] = bias;
        net
    }

    #[test]
    fn soft_target_worked_example() {
        let y: f64 = soft_target(1.0, false, 2.0, -1.0, 0.99, 0.2);
        assert!((y - 3.178).abs() < 1e-12);
    }

    #[test]
    fn soft_target_terminal_cutoff() {
        let y: f64 = soft_target(1.0, true, 123.0, -45.0, 0.99, 0.2);
        assert_eq!(y, 1.0);
    }

    #[test]
    fn critic_target_uses_min_of_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = SacAgent::<f64>::new(4, 2, toy_config(vec![8]), &mut rng);
        agent.config.alpha = 0.0;
        agent.log_alpha = f64::NEG_INFINITY; // alpha = 0
        agent.target1 = constant_critic(4, 2, 5.0);
        agent.target2 = constant_critic(4, 2, 3.0);
        let batch = toy_batch(4, 2, 6, 1);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let y = agent.critic_target(&refs, &mut rng);
        for (t, yv) in batch.iter().zip(&y) {
            assert!((yv - (t.r + 0.99 * 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn critic_target_terminal_ignores_critics() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let agent = SacAgent::<f64>::new(4, 2, toy_config(vec![8]), &mut rng);
        let mut batch = toy_batch(4, 2, 4, 2);
        for t in &mut batch {
            t.done = true;
            t.r = 1.0;
        }
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let y = agent.critic_target(&refs, &mut rng);
        assert!(y.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn exact_fit_has_zero_loss_and_fixed_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agent = SacAgent::<f64>::new(4, 2, toy_config(vec![4]), &mut rng);
        agent.critic1 = constant_critic(4, 2, 3.0);
        agent.critic2 = constant_critic(4, 2, 3.0);
        agent.critic1_opt = AdamState::new(&agent.critic1, 3e-4);
        agent.critic2_opt = AdamState::new(&agent.critic2, 3e-4);
        let batch = toy_batch(4, 2, 5, 3);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let y = vec![3.0; 5];
        let before = agent.critic1.clone();
        let (l1, l2) = agent.critic_update(&refs, &y);
        assert_eq!(l1, 0.0);
        assert_eq!(l2, 0.0);
        assert_eq!(agent.critic1, before);
    }

    #[test]
    fn twin_critics_update_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut agent = SacAgent::<f64>::new(4, 2, toy_config(vec![4]), &mut rng);
        agent.critic1 = constant_critic(4, 2, 1.0);
        agent.critic2 = constant_critic(4, 2, 2.0);
        agent.critic1_opt = AdamState::new(&agent.critic1, 3e-4);
        agent.critic2_opt = AdamState::new(&agent.critic2, 3e-4);
        let batch = toy_batch(4, 2, 5, 4);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let y = vec![0.0; 5];
        let (l1, l2) = agent.critic_update(&refs, &y);
        assert!((l1 - 1.0).abs() < 1e-12);
        assert!((l2 - 4.0).abs() < 1e-12);
        assert_ne!(agent.critic1.layers.last().unwrap().b[0], 1.0);
        assert_ne!(agent.critic2.layers.last().unwrap().b[0], 2.0);
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let agent = SacAgent::<f64>::new(3, 2, toy_config(vec![6]), &mut rng);
        let batch = toy_batch(3, 2, 4, 5);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let y: Vec<f64> = (0..4).map(|i| 0.3 * i as f64 - 0.4).collect();
        let states = agent.states_mat(&refs, false);
        let actions: Vec<Vec<f64>> = refs.iter().map(|t| t.a.to_vec()).collect();
        let inputs = agent.critic_inputs(&states, &actions);

        let mut critic = agent.critic1.clone();
        let (_, grads) = SacAgent::critic_loss_and_grads(&critic, &inputs, &y);
        let h = 1e-5;
        for l in 0..critic.layers.len() {
            for idx in 0..critic.layers[l].w.data().len() {
                let orig = critic.layers[l].w.data()[idx];
                critic.layers[l].w.data_mut()[idx] = orig + h;
                let (up, _) = SacAgent::critic_loss_and_grads(&critic, &inputs, &y);
                critic.layers[l].w.data_mut()[idx] = orig - h;
                let (down, _) = SacAgent::critic_loss_and_grads(&critic, &inputs, &y);
                critic.layers[l].w.data_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads[l].w.data()[idx];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (an - fd).abs() / denom < 1e-4,
                    "layer {l} w[{idx}]: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut agent = SacAgent::<f64>::new(4, 2, toy_config(vec![6]), &mut rng);
        // Give the actor non-degenerate weights.
        agent.actor = Mlp::init(&[4, 6, 4], Activation::Relu, 1.0, &mut rng);
        let batch = toy_batch(4, 2, 4, 6);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let mut eps = Mat::zeros(4, 2);
        for b in 0..4 {
            for v in eps.row_mut(b) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let (_, grads, _) = agent.actor_objective_and_grads(&refs, &eps);
        let h = 1e-5;
        for l in 0..agent.actor.layers.len() {
            for idx in 0..agent.actor.layers[l].w.data().len() {
                let orig = agent.actor.layers[l].w.data()[idx];
                agent.actor.layers[l].w.data_mut()[idx] = orig + h;
                let (up, _, _) = agent.actor_objective_and_grads(&refs, &eps);
                agent.actor.layers[l].w.data_mut()[idx] = orig - h;
                let (down, _, _) = agent.actor_objective_and_grads(&refs, &eps);
                agent.actor.layers[l].w.data_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads[l].w.data()[idx];
                let denom = an.abs().max(fd.abs()).max(1e-5);
                assert!(
                    (an - fd).abs() / denom < 1e-4,
                    "layer {l} w[{idx}]: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn entropy_off_actor_ascends_the_min_critic() {
        // V-shaped critic peaked at action c > 0: one update from a
        // near-zero policy mean must move the mean toward c.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cfg = toy_config(vec![4]);
        cfg.alpha = 0.0;
        cfg.lr_actor = 1e-2;
        let mut agent = SacAgent::<f64>::new(2, 1, cfg, &mut rng);
        agent.log_alpha = f64::NEG_INFINITY;
        let c = 0.5;
        // Q(s, a) = -|a - c| via two ReLU units reading only the action.
        let mut critic = constant_critic(2, 1, 0.0);
        critic.layers[0].w.row_mut(0)[2] = 1.0; // reads a
        critic.layers[0].b[0] = -c; // relu(a - c)
        critic.layers[0].w.row_mut(1)[2] = -1.0; // reads -a
        critic.layers[0].b[1] = c; // relu(c - a)
        critic.layers[1].w.row_mut(0)[0] = -1.0;
        critic.layers[1].w.row_mut(0)[1] = -1.0;
        agent.critic1 = critic.clone();
        agent.critic2 = critic;

        let batch = toy_batch(2, 1, 64, 12);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        let mean_before: f64 = {
            let raw = agent.actor.forward_one(&batch[0].s).unwrap();
            GaussianHead::from_raw(&raw).mean_action()[0]
        };
        assert!(mean_before.abs() < 0.05, "policy should start near zero");
        agent.actor_update(&refs, &mut rng);
        let mean_after: f64 = {
            let raw = agent.actor.forward_one(&batch[0].s).unwrap();
            GaussianHead::from_raw(&raw).mean_action()[0]
        };
        assert!(
            mean_after > mean_before,
            "mean must move toward the critic argmax: {mean_before} -> {mean_after}"
        );
    }

    #[test]
    fn soft_update_endpoints_and_worked_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let src = Mlp::<f64>::init(&[2, 3, 1], Activation::Relu, 1.0, &mut rng);
        let zero = {
            let mut z = src.clone();
            for l in &mut z.layers {
                for v in l.w.data_mut() {
                    *v = 0.0;
                }
                for v in &mut l.b {
                    *v = 0.0;
                }
            }
            z
        };
        // tau = 1 copies the source exactly.
        let mut t = zero.clone();
        soft_update_mlp(&mut t, &src, 1.0).unwrap();
        assert_eq!(t, src);
        // tau = 0 leaves the target unchanged.
        let mut t = zero.clone();
        soft_update_mlp(&mut t, &src, 0.0).unwrap();
        assert_eq!(t, zero);
        // tau = 0.005, phi = 1, phi' = 0 -> 0.005.
        let mut ones = src.clone();
        for l in &mut ones.layers {
            for v in l.w.data_mut() {
                *v = 1.0;
            }
            for v in &mut l.b {
                *v = 1.0;
            }
        }
        let mut t = zero;
        soft_update_mlp(&mut t, &ones, 0.005).unwrap();
        for l in &t.layers {
            for v in l.w.data() {
                assert_eq!(*v, 0.005);
            }
        }
        // Shape mismatch is rejected.
        let mut small = Mlp::<f64>::init(&[2, 2, 1], Activation::Relu, 1.0, &mut rng);
        assert!(soft_update_mlp(&mut small, &src, 0.5).is_err());
    }

    #[test]
    fn no_gradient_leakage_between_actor_and_critics() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut agent = SacAgent::<f64>::new(4, 2, toy_config(vec![6]), &mut rng);
        let batch = toy_batch(4, 2, 8, 7);
        let refs: Vec<&Transition<f64>> = batch.iter().collect();

        let (c1, c2) = (agent.critic1.clone(), agent.critic2.clone());
        agent.actor_update(&refs, &mut rng);
        assert_eq!(agent.critic1, c1, "actor update must not touch critic 1");
        assert_eq!(agent.critic2, c2, "actor update must not touch critic 2");

        let actor = agent.actor.clone();
        let y = agent.critic_target(&refs, &mut rng);
        agent.critic_update(&refs, &y);
        assert_eq!(agent.actor, actor, "critic update must not touch the actor");
    }

    #[test]
    fn targets_stay_inside_critic_weight_trails() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut agent = SacAgent::<f64>::new(3, 2, toy_config(vec![4]), &mut rng);
        let flatten = |net: &Mlp<f64>| -> Vec<f64> {
            net.layers
                .iter()
                .flat_map(|l| l.w.data().iter().chain(&l.b).cloned().collect::<Vec<_>>())
                .collect()
        };
        let mut lo = flatten(&agent.critic1);
        let mut hi = lo.clone();
        for round in 0..50 {
            let batch = toy_batch(3, 2, 8, 100 + round);
            let refs: Vec<&Transition<f64>> = batch.iter().collect();
            let y = agent.critic_target(&refs, &mut rng);
            agent.critic_update(&refs, &y);
            let cur = flatten(&agent.critic1);
            for (i, v) in cur.iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
            agent.soft_update();
            let t = flatten(&agent.target1);
            for i in 0..t.len() {
                assert!(
                    t[i] >= lo[i] - 1e-12 && t[i] <= hi[i] + 1e-12,
                    "target weight {i} left the critic trail: {} not in [{}, {}]",
                    t[i],
                    lo[i],
                    hi[i]
                );
            }
        }
    }

    #[test]
    fn update_sequence_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(16);
            let mut agent = SacAgent::<f64>::new(3, 2, toy_config(vec![6]), &mut rng);
            for round in 0..20 {
                let batch = toy_batch(3, 2, 8, 200 + round);
                let refs: Vec<&Transition<f64>> = batch.iter().collect();
                let y = agent.critic_target(&refs, &mut rng);
                agent.critic_update(&refs, &y);
                agent.actor_update(&refs, &mut rng);
                agent.soft_update();
            }
            (agent.actor, agent.critic1, agent.target2)
        };
        assert_eq!(run(), run());
    }

    use rand::Rng;
}
