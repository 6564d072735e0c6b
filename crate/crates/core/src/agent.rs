//! Actor-critic learner: softmax policy over channels, state-value critic,
//! one-step advantage and the online updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionVector, ChannelIndex, SpectrumState};
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Network input for a state: previous action, sensing channel and user
/// channel each one-hot, then the mode scaled onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoding(Vec<f64>);

impl StateEncoding {
    pub fn encode(s: &SpectrumState) -> Self {
        let n = s.channels();
        let mut v = vec![0.0; 3 * n + 1];
        v[..n].copy_from_slice(s.prev_action.entries());
        v[n + s.sensing_freq - 1] = 1.0;
        v[2 * n + s.user_freq - 1] = 1.0;
        v[3 * n] = s.sensing_mode.normalized();
        Self(v)
    }

    pub fn from_raw(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn width(channels: usize) -> usize {
        3 * channels + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyper {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Maximum timeslots per training episode.
    pub episode_length: usize,
    /// Bootstrap the advantage with an undiscounted `V(s')`.
    pub strict_undiscounted_advantage: bool,
}

impl TrainingHyper {
    /// Discount applied to the bootstrap term of the advantage.
    pub fn bootstrap_discount(&self) -> f64 {
        if self.strict_undiscounted_advantage {
            1.0
        } else {
            self.gamma
        }
    }
}

impl Default for TrainingHyper {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            actor_lr: 0.01,
            critic_lr: 0.01,
            episode_length: 100,
            strict_undiscounted_advantage: false,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Policy network `π(·|s; θ)`: encoded state → channel logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub net: Mlp,
}

impl PolicyParams {
    pub fn init<R: Rng + ?Sized>(channels: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            net: Mlp::init(StateEncoding::width(channels), hidden, channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.net.outputs()
    }
}

/// State-value network `V(s; w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub net: Mlp,
}

impl ValueParams {
    pub fn init<R: Rng + ?Sized>(channels: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            net: Mlp::init(StateEncoding::width(channels), hidden, 1, rng),
        }
    }

    pub fn value(&self, s: &StateEncoding) -> f64 {
        self.net.forward(s.as_slice()).output[0]
    }

    /// `∇_w V(s; w)`.
    pub fn value_grad(&self, s: &StateEncoding) -> Vec<f64> {
        let act = self.net.forward(s.as_slice());
        self.net.backward(s.as_slice(), &act, &[1.0])
    }
}

pub fn policy_forward(theta: &PolicyParams, s: &StateEncoding) -> Vec<f64> {
    softmax(&theta.net.forward(s.as_slice()).output)
}

pub fn log_prob(theta: &PolicyParams, s: &StateEncoding, channel: ChannelIndex) -> f64 {
    policy_forward(theta, s)[channel - 1].ln()
}

/// `∇_θ log π(channel | s; θ)`.
pub fn log_prob_grad(theta: &PolicyParams, s: &StateEncoding, channel: ChannelIndex) -> Vec<f64> {
    let act = theta.net.forward(s.as_slice());
    let probs = softmax(&act.output);
    let mut grad_logits: Vec<f64> = probs.iter().map(|p| -p).collect();
    grad_logits[channel - 1] += 1.0;
    theta.net.backward(s.as_slice(), &act, &grad_logits)
}

/// Inverse-CDF draw of a one-hot action.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> ActionVector {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = Some(i);
            break;
        }
    }
    // rounding can leave acc just below u; fall back to the last live entry
    let idx = chosen.unwrap_or_else(|| probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1));
    ActionVector::one_hot(idx + 1, probs.len()).expect("index within probs")
}

/// Most probable channel, lowest index on ties.
pub fn greedy_action(probs: &[f64]) -> ActionVector {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    ActionVector::one_hot(best + 1, probs.len()).expect("index within probs")
}

/// One-step TD advantage `r + γ·V(s') − V(s)`, with `V(s') = 0` at terminal
/// states.
pub fn advantage_estimate(r: f64, v_next: f64, v_curr: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * v_next };
    r + bootstrap - v_curr
}

/// Semi-gradient TD(0) step: descends `½·δ²` with the target held fixed,
/// i.e. `w ← w + α·δ·∇V(s)`.
pub fn critic_update(w: &mut ValueParams, s: &StateEncoding, advantage: f64, lr: f64) -> Result<()> {
    if !advantage.is_finite() {
        return Err(Error::Diverged(format!("critic advantage {advantage}")));
    }
    if advantage == 0.0 {
        return Ok(());
    }
    let grad = w.value_grad(s);
    w.net.add_scaled(&grad, lr * advantage)
}

/// Semi-gradient of `½·(target − V(s; w))²` with `target` held constant.
pub fn critic_loss_grad(w: &ValueParams, s: &StateEncoding, target: f64) -> Vec<f64> {
    let delta = target - w.value(s);
    w.value_grad(s).into_iter().map(|g| -delta * g).collect()
}

pub fn critic_loss(w: &ValueParams, s: &StateEncoding, target: f64) -> f64 {
    let delta = target - w.value(s);
    0.5 * delta * delta
}

/// One transition used by the policy-gradient estimate.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub state: StateEncoding,
    pub channel: ChannelIndex,
    pub advantage: f64,
}

/// `θ ← θ + α·Σ_t ∇log π(a_t|s_t)·A_t`.
pub fn actor_update(theta: &mut PolicyParams, trajectory: &[PolicySample], lr: f64) -> Result<()> {
    let mut grad = vec![0.0; theta.net.num_params()];
    let mut any = false;
    for sample in trajectory {
        if !sample.advantage.is_finite() {
            return Err(Error::Diverged(format!("actor advantage {}", sample.advantage)));
        }
        if sample.advantage == 0.0 {
            continue;
        }
        any = true;
        let act = theta.net.forward(sample.state.as_slice());
        let probs = softmax(&act.output);
        let mut grad_logits: Vec<f64> = probs.iter().map(|p| -p * sample.advantage).collect();
        grad_logits[sample.channel - 1] += sample.advantage;
        theta
            .net
            .backward_into(sample.state.as_slice(), &act, &grad_logits, &mut grad);
    }
    if !any {
        return Ok(());
    }
    theta.net.add_scaled(&grad, lr)
}

/// Actor and critic together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub actor: PolicyParams,
    pub critic: ValueParams,
}

impl ActorCritic {
    pub fn init<R: Rng + ?Sized>(channels: usize, actor_hidden: usize, critic_hidden: usize, rng: &mut R) -> Self {
        Self {
            actor: PolicyParams::init(channels, actor_hidden, rng),
            critic: ValueParams::init(channels, critic_hidden, rng),
        }
    }

    /// One online update from a single executed transition. Returns the
    /// advantage used.
    pub fn learn(
        &mut self,
        s: &StateEncoding,
        channel: ChannelIndex,
        reward: f64,
        s_next: &StateEncoding,
        terminal: bool,
        hyper: &TrainingHyper,
    ) -> Result<f64> {
        let v_curr = self.critic.value(s);
        let v_next = if terminal { 0.0 } else { self.critic.value(s_next) };
        let adv = advantage_estimate(reward, v_next, v_curr, hyper.bootstrap_discount(), terminal);
        critic_update(&mut self.critic, s, adv, hyper.critic_lr)?;
        let sample = PolicySample {
            state: s.clone(),
            channel,
            advantage: adv,
        };
        actor_update(&mut self.actor, std::slice::from_ref(&sample), hyper.actor_lr)?;
        Ok(adv)
    }
}
