//! Action correction: predicts next-slot spectrum conflicts with a learned
//! linear surrogate `b̄_n(s) + k_n(s)·a_n` and replaces unsafe actions with
//! the closest safe one.
//!
//! The correction problem `min ½‖ã − a‖²  s.t.  b̄_n + k_n·ã_n ≤ 1 ∀n` is
//! separable per channel, so each coordinate has the closed-form solution
//! `ã_n = a_n − λ_n·k_n` with `λ_n = max(0, (k_n·a_n + b̄_n − 1) / k_n²)`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::StateEncoding;
use crate::env::{ActionVector, ChannelIndex, SpectrumState};
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Sensitivities with `|k| ≤ SENSITIVITY_EPS` get no multiplier.
pub const SENSITIVITY_EPS: f64 = 1e-6;

/// Observable constraint value per channel: previous action plus user
/// occupancy, so `{0, 1, 2}` on real states.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBaseline(Vec<f64>);

impl ConstraintBaseline {
    pub fn from_values(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn baseline_constraint(s: &SpectrumState) -> ConstraintBaseline {
    let mut v = s.prev_action.entries().to_vec();
    v[s.user_freq - 1] += 1.0;
    ConstraintBaseline(v)
}

/// Shared trunk with one sensitivity head per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintModel {
    pub net: Mlp,
}

impl ConstraintModel {
    pub fn init<R: Rng + ?Sized>(channels: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            net: Mlp::init(StateEncoding::width(channels), hidden, channels, rng),
        }
    }

    pub fn zeros(channels: usize, hidden: usize) -> Self {
        Self {
            net: Mlp::zeros(StateEncoding::width(channels), hidden, channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.net.outputs()
    }

    /// `k_n(s; w_n)` for every channel.
    pub fn sensitivities(&self, s: &StateEncoding) -> Vec<f64> {
        self.net.forward(s.as_slice()).output
    }
}

/// `b̄_n(s) + k_n(s)·a_n` for each channel.
pub fn predict_constraint(model: &ConstraintModel, s: &SpectrumState, a: &ActionVector) -> Vec<f64> {
    let k = model.sensitivities(&StateEncoding::encode(s));
    surrogate(baseline_constraint(s).as_slice(), &k, a.entries())
}

fn surrogate(baseline: &[f64], k: &[f64], a: &[f64]) -> Vec<f64> {
    baseline
        .iter()
        .zip(k)
        .zip(a)
        .map(|((b, k), a)| b + k * a)
        .collect()
}

/// Any predicted value above `1 + margin`.
pub fn is_violation(predicted: &[f64], margin: f64) -> bool {
    predicted.iter().any(|&v| v > 1.0 + margin)
}

/// One executed transition, reduced to what the surrogate fit needs.
#[derive(Debug, Clone)]
pub struct ConstraintSample {
    pub encoding: StateEncoding,
    pub baseline: Vec<f64>,
    pub action: Vec<f64>,
    pub next_baseline: Vec<f64>,
}

impl ConstraintSample {
    pub fn new(s: &SpectrumState, a: &ActionVector, s_next: &SpectrumState) -> Self {
        Self {
            encoding: StateEncoding::encode(s),
            baseline: baseline_constraint(s).0,
            action: a.entries().to_vec(),
            next_baseline: baseline_constraint(s_next).0,
        }
    }

    fn residuals(&self, k: &[f64]) -> Vec<f64> {
        surrogate(&self.baseline, k, &self.action)
            .iter()
            .zip(&self.next_baseline)
            .map(|(p, t)| p - t)
            .collect()
    }
}

/// Mean over samples and channels of the squared surrogate residual.
pub fn constraint_loss(model: &ConstraintModel, batch: &[ConstraintSample]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let n = model.channels() as f64;
    let total: f64 = batch
        .iter()
        .map(|s| s.residuals(&model.sensitivities(&s.encoding)).iter().map(|r| r * r).sum::<f64>())
        .sum();
    total / (batch.len() as f64 * n)
}

/// Mean squared residual restricted to channels the action selected.
pub fn action_channel_mse(model: &ConstraintModel, batch: &[ConstraintSample]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in batch {
        let r = s.residuals(&model.sensitivities(&s.encoding));
        for (ri, &a) in r.iter().zip(&s.action) {
            if a != 0.0 {
                total += ri * ri;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn constraint_loss_grad(model: &ConstraintModel, batch: &[ConstraintSample]) -> Vec<f64> {
    let mut grad = vec![0.0; model.net.num_params()];
    if batch.is_empty() {
        return grad;
    }
    let scale = 2.0 / (batch.len() as f64 * model.channels() as f64);
    for s in batch {
        let act = model.net.forward(s.encoding.as_slice());
        let r = s.residuals(&act.output);
        let grad_out: Vec<f64> = r.iter().zip(&s.action).map(|(ri, a)| scale * ri * a).collect();
        model.net.backward_into(s.encoding.as_slice(), &act, &grad_out, &mut grad);
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ConstraintTraining {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            lr: 0.5,
        }
    }
}

/// Minibatch gradient descent on the surrogate residual. Returns the
/// full-batch loss after each epoch.
pub fn train_constraint_model<R: Rng + ?Sized>(
    model: &mut ConstraintModel,
    samples: &[ConstraintSample],
    opts: &ConstraintTraining,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::with_capacity(opts.epochs);
    let batch_size = opts.batch_size.max(1);
    let mut batch = Vec::with_capacity(batch_size);
    for epoch in 0..opts.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let grad = constraint_loss_grad(model, &batch);
            model.net.add_scaled(&grad, -opts.lr)?;
        }
        let loss = constraint_loss(model, samples);
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("constraint loss {loss} at epoch {epoch}")));
        }
        losses.push(loss);
    }
    Ok(losses)
}

/// `max(0, (k·a + b̄ − 1) / k²)`; errors when `|k| ≤ SENSITIVITY_EPS`.
pub fn lagrange_multiplier(k: f64, a: f64, baseline: f64) -> Result<f64> {
    if k.abs() <= SENSITIVITY_EPS {
        return Err(Error::DegenerateSensitivity { k });
    }
    Ok(((k * a + baseline - 1.0) / (k * k)).max(0.0))
}

/// Relaxed (continuous) solution of the correction problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedCorrection {
    pub relaxed: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Channels whose sensitivity was too small for a multiplier; left at
    /// `ã_n = a_n`, `λ_n = 0`.
    pub degenerate: Vec<ChannelIndex>,
}

pub fn solve_relaxed(a: &[f64], baseline: &[f64], k: &[f64]) -> RelaxedCorrection {
    let mut relaxed = Vec::with_capacity(a.len());
    let mut multipliers = Vec::with_capacity(a.len());
    let mut degenerate = Vec::new();
    for (n, ((&an, &bn), &kn)) in a.iter().zip(baseline).zip(k).enumerate() {
        match lagrange_multiplier(kn, an, bn) {
            Ok(lambda) => {
                multipliers.push(lambda);
                relaxed.push(if lambda == 0.0 { an } else { an - lambda * kn });
            }
            Err(_) => {
                degenerate.push(n + 1);
                multipliers.push(0.0);
                relaxed.push(an);
            }
        }
    }
    RelaxedCorrection {
        relaxed,
        multipliers,
        degenerate,
    }
}

/// Worst violation of each KKT condition on a relaxed solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub primal: f64,
    pub dual: f64,
    pub stationarity: f64,
    pub slackness: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.stationarity).max(self.slackness)
    }
}

/// Non-degenerate channels only; `primal` is measured relative to the
/// constraint scale `max(1, |b̄|, |k·ã|)`.
pub fn kkt_report(a: &[f64], baseline: &[f64], k: &[f64], sol: &RelaxedCorrection) -> KktReport {
    let mut rep = KktReport {
        primal: 0.0,
        dual: 0.0,
        stationarity: 0.0,
        slackness: 0.0,
    };
    for n in 0..a.len() {
        if sol.degenerate.contains(&(n + 1)) {
            continue;
        }
        let x = sol.relaxed[n];
        let lambda = sol.multipliers[n];
        let g = baseline[n] + k[n] * x - 1.0;
        let scale = 1.0f64.max(baseline[n].abs()).max((k[n] * x).abs());
        rep.primal = rep.primal.max(g.max(0.0) / scale);
        rep.dual = rep.dual.max((-lambda).max(0.0));
        rep.stationarity = rep.stationarity.max((x - a[n] + lambda * k[n]).abs());
        rep.slackness = rep.slackness.max((lambda * g).abs());
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub action: ActionVector,
    /// No channel was predicted feasible.
    pub fallback: bool,
}

/// Highest (clamped) relaxed entry among channels whose predicted constraint
/// with `a_n = 1` stays within `1 + margin`; lowest index wins ties. With no
/// feasible channel, picks the smallest predicted value.
pub fn project_to_onehot(relaxed: &[f64], baseline: &[f64], k: &[f64], margin: f64) -> Projection {
    let n = relaxed.len();
    let predicted: Vec<f64> = baseline.iter().zip(k).map(|(b, k)| b + k).collect();
    let mut best: Option<usize> = None;
    for i in 0..n {
        if predicted[i] > 1.0 + margin {
            continue;
        }
        let v = relaxed[i].clamp(0.0, 1.0);
        match best {
            Some(b) if relaxed[b].clamp(0.0, 1.0) >= v => {}
            _ => best = Some(i),
        }
    }
    let (idx, fallback) = match best {
        Some(i) => (i, false),
        None => {
            let mut low = 0;
            for i in 1..n {
                if predicted[i] < predicted[low] {
                    low = i;
                }
            }
            (low, true)
        }
    };
    Projection {
        action: ActionVector::one_hot(idx + 1, n).expect("index within range"),
        fallback,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub relaxed: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub corrected: ActionVector,
    pub was_corrected: bool,
    pub degenerate: Vec<ChannelIndex>,
    pub fallback: bool,
}

/// Closed-form correction of a one-hot action followed by projection back
/// onto a single channel.
pub fn correct_action(a: &ActionVector, baseline: &[f64], k: &[f64], margin: f64) -> Result<CorrectionResult> {
    a.channel()?;
    if baseline.len() != a.len() || k.len() != a.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: baseline.len().min(k.len()),
        });
    }
    let sol = solve_relaxed(a.entries(), baseline, k);
    let proj = project_to_onehot(&sol.relaxed, baseline, k, margin);
    Ok(CorrectionResult {
        was_corrected: proj.action != *a,
        corrected: proj.action,
        fallback: proj.fallback,
        relaxed: sol.relaxed,
        multipliers: sol.multipliers,
        degenerate: sol.degenerate,
    })
}

/// Outcome of screening one proposed action.
#[derive(Debug, Clone, PartialEq)]
pub struct ShieldDecision {
    pub executed: ActionVector,
    pub violated: bool,
    pub correction: Option<CorrectionResult>,
}

impl ShieldDecision {
    pub fn was_corrected(&self) -> bool {
        self.correction.as_ref().is_some_and(|c| c.was_corrected)
    }
}

/// Learned constraint model plus the violation margin used on predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shield {
    pub model: ConstraintModel,
    pub margin: f64,
}

impl Shield {
    pub fn screen(&self, s: &SpectrumState, a: &ActionVector) -> Result<ShieldDecision> {
        screen_action(&self.model, self.margin, s, a)
    }
}

/// Predict the proposed action's constraints and correct it when any
/// channel exceeds `1 + margin`.
pub fn screen_action(
    model: &ConstraintModel,
    margin: f64,
    s: &SpectrumState,
    a: &ActionVector,
) -> Result<ShieldDecision> {
    let k = model.sensitivities(&StateEncoding::encode(s));
    let baseline = baseline_constraint(s);
    let predicted = surrogate(baseline.as_slice(), &k, a.entries());
    if !is_violation(&predicted, margin) {
        return Ok(ShieldDecision {
            executed: a.clone(),
            violated: false,
            correction: None,
        });
    }
    let correction = correct_action(a, baseline.as_slice(), &k, margin)?;
    Ok(ShieldDecision {
        executed: correction.corrected.clone(),
        violated: true,
        correction: Some(correction),
    })
}
