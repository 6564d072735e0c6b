//! Training and inference loops, confrontation accounting and run traces.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{greedy_action, policy_forward, sample_action, ActorCritic, StateEncoding};
use crate::config::RunConfig;
use crate::env::{mode_transition, ModeMachine, Scenario, SensingMode, SpectrumEnv};
use crate::error::{Error, Result};
use crate::shield::{screen_action, train_constraint_model, ConstraintModel, ConstraintSample};

/// Whether the next detection decides a transition rule, i.e. a hit and a
/// miss lead to different modes.
pub fn is_critical_instant(machine: &ModeMachine) -> bool {
    !machine.is_absorbed() && mode_transition(machine, true).mode() != mode_transition(machine, false).mode()
}

/// Confrontations within one contiguous stay in a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub mode: SensingMode,
    pub episode: usize,
    /// Confrontations in this occurrence.
    pub total: usize,
    /// Confrontations the jammer won.
    pub won: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfrontationLedger {
    occurrences: Vec<Occurrence>,
}

impl ConfrontationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Open a new occurrence; called on every (re-)entry into a mode.
    pub fn enter(&mut self, mode: SensingMode, episode: usize) {
        self.occurrences.push(Occurrence {
            mode,
            episode,
            total: 0,
            won: 0,
        });
    }

    /// Record a confrontation in the current occurrence.
    pub fn record(&mut self, won: bool) {
        let occ = self
            .occurrences
            .last_mut()
            .expect("confrontation recorded before any occurrence");
        occ.total += 1;
        occ.won += usize::from(won);
    }

    pub fn occurrences(&self) -> &[Occurrence] {
        &self.occurrences
    }

    pub fn totals(&self) -> (usize, usize) {
        self.occurrences
            .iter()
            .fold((0, 0), |(t, w), o| (t + o.total, w + o.won))
    }
}

/// Empirical success rate of occurrence `m` (0-based), in percent.
pub fn success_rate(ledger: &ConfrontationLedger, m: usize) -> Result<f64> {
    let occ = ledger
        .occurrences()
        .get(m)
        .ok_or(Error::UndefinedOccurrence(m))?;
    rate(occ.won, occ.total).ok_or(Error::UndefinedOccurrence(m))
}

fn rate(won: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| won as f64 / total as f64 * 100.0)
}

/// One executed timeslot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based position in the run.
    pub timeslot: u64,
    pub episode: usize,
    /// Environment slot in which the action executes.
    pub slot: u64,
    pub prev_channel: usize,
    pub sensing_freq: usize,
    pub user_freq: usize,
    pub mode: u8,
    pub proposed: usize,
    pub executed: usize,
    pub violated: bool,
    pub corrected: bool,
    pub fallback: bool,
    pub reward: f64,
    pub jam_hit: bool,
    pub conflict: bool,
    /// Sensing and user channels in the slot the action executes.
    pub sensing_channel: usize,
    pub user_channel: usize,
    pub mode_after: u8,
    pub critical: bool,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub timeslots: usize,
    pub conflicts: usize,
    pub corrections: usize,
    pub confrontations: usize,
    pub wins: usize,
    pub final_mode: u8,
    pub total_reward: f64,
}

impl EpisodeSummary {
    /// Aggregate success rate over the episode's confrontations, percent.
    pub fn success_percent(&self) -> Option<f64> {
        rate(self.wins, self.confrontations)
    }
}

/// Append-only record of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn push(&mut self, rec: TraceRecord) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn conflicts(&self) -> usize {
        self.records.iter().filter(|r| r.conflict).count()
    }

    /// `(timeslot, cumulative conflicts)` after every slot.
    pub fn cumulative_conflicts(&self) -> Vec<(u64, usize)> {
        let mut acc = 0;
        self.records
            .iter()
            .map(|r| {
                acc += usize::from(r.conflict);
                (r.timeslot, acc)
            })
            .collect()
    }

    /// `(timeslot, mode code)` after every slot.
    pub fn modes(&self) -> Vec<(u64, u8)> {
        self.records.iter().map(|r| (r.timeslot, r.mode_after)).collect()
    }

    /// Occurrence ledger rebuilt from the records. Each episode opens a
    /// fresh occurrence of its starting mode.
    pub fn ledger(&self) -> ConfrontationLedger {
        let mut ledger = ConfrontationLedger::new();
        let mut episode = None;
        for r in &self.records {
            if episode != Some(r.episode) {
                episode = Some(r.episode);
                ledger.enter(SensingMode::from_code(r.mode).expect("valid mode code"), r.episode);
            }
            if r.critical {
                ledger.record(r.jam_hit);
            }
            if r.mode_after != r.mode {
                ledger.enter(SensingMode::from_code(r.mode_after).expect("valid mode code"), r.episode);
            }
        }
        ledger
    }

    pub fn episodes(&self) -> Vec<EpisodeSummary> {
        let mut out: Vec<EpisodeSummary> = Vec::new();
        for r in &self.records {
            if out.last().map(|e| e.episode) != Some(r.episode) {
                out.push(EpisodeSummary {
                    episode: r.episode,
                    timeslots: 0,
                    conflicts: 0,
                    corrections: 0,
                    confrontations: 0,
                    wins: 0,
                    final_mode: r.mode,
                    total_reward: 0.0,
                });
            }
            let e = out.last_mut().unwrap();
            e.timeslots += 1;
            e.conflicts += usize::from(r.conflict);
            e.corrections += usize::from(r.corrected);
            e.confrontations += usize::from(r.critical);
            e.wins += usize::from(r.critical && r.jam_hit);
            e.final_mode = r.mode_after;
            e.total_reward += r.reward;
        }
        out
    }

    /// Aggregate success rate over all confrontations in the run, percent.
    pub fn success_percent(&self) -> Option<f64> {
        let (total, won) = self.ledger().totals();
        rate(won, total)
    }
}

/// Safe-optimal choice for the slot in which an action executes: the
/// sensing channel, or any channel but the user's when the two coincide.
pub fn oracle_accepts(scenario: &Scenario, slot: u64, executed: usize) -> bool {
    let sensing = scenario.sensor.frequency(slot);
    let user = scenario.user.frequency(slot);
    if sensing == user {
        executed != user
    } else {
        executed == sensing
    }
}

/// Fraction of trace slots on which the executed channel agrees with
/// [`oracle_accepts`].
pub fn oracle_agreement(scenario: &Scenario, trace: &RunTrace) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let ok = trace
        .records
        .iter()
        .filter(|r| oracle_accepts(scenario, r.slot, r.executed))
        .count();
    ok as f64 / trace.len() as f64
}

/// Learned parameters produced by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub agent: ActorCritic,
    pub constraint: ConstraintModel,
}

enum Policy {
    Sample,
    Greedy,
}

struct Rollout<'a> {
    cfg: &'a RunConfig,
    scenario: Scenario,
    env: SpectrumEnv,
}

impl<'a> Rollout<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let scenario = cfg.scenario()?;
        let mut env = SpectrumEnv::new(scenario);
        if !cfg.history_reset {
            env = env.with_global_window();
        }
        Ok(Self { cfg, scenario, env })
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let first = rng.gen_range(1..=self.scenario.channels());
        self.env.reset(first, self.cfg.primed_detections)?;
        Ok(())
    }

    /// Propose, screen, execute. Returns the record, the executed action's
    /// transition sample and whether learning applies to this slot.
    fn advance<R: Rng + ?Sized>(
        &mut self,
        artifacts: &Artifacts,
        shield_margin: Option<f64>,
        policy: Policy,
        rng: &mut R,
        episode: usize,
        timeslot: u64,
    ) -> Result<(TraceRecord, StepContext)> {
        let state = self.env.state().clone();
        let critical = is_critical_instant(self.env.machine());
        let enc = StateEncoding::encode(&state);
        let probs = policy_forward(&artifacts.agent.actor, &enc);
        let proposed = match policy {
            Policy::Sample => sample_action(&probs, rng),
            Policy::Greedy => greedy_action(&probs),
        };
        let (executed, violated, corrected, fallback) = match shield_margin {
            Some(margin) => {
                let d = screen_action(&artifacts.constraint, margin, &state, &proposed)?;
                let fallback = d.correction.as_ref().is_some_and(|c| c.fallback);
                (d.executed.clone(), d.violated, d.was_corrected(), fallback)
            }
            None => (proposed.clone(), false, false, false),
        };
        let slot = self.env.timeslot();
        let out = self.env.step(&executed)?;
        let rec = TraceRecord {
            timeslot,
            episode,
            slot: slot + 1,
            prev_channel: state.prev_action.channel()?,
            sensing_freq: state.sensing_freq,
            user_freq: state.user_freq,
            mode: state.sensing_mode.code(),
            proposed: proposed.channel()?,
            executed: out.jam_channel,
            violated,
            corrected,
            fallback,
            reward: out.reward,
            jam_hit: out.jam_hit,
            conflict: out.conflict,
            sensing_channel: out.sensing_channel,
            user_channel: out.user_channel,
            mode_after: out.mode_after.code(),
            critical,
            terminal: out.terminal,
        };
        let ctx = StepContext {
            sample: ConstraintSample::new(&state, &executed, &out.next_state),
            enc,
            next_enc: StateEncoding::encode(&out.next_state),
        };
        Ok((rec, ctx))
    }
}

struct StepContext {
    sample: ConstraintSample,
    enc: StateEncoding,
    next_enc: StateEncoding,
}

/// Stateful offline trainer: random-action warm-up for the constraint
/// model, then actor-critic episodes with the shield in the loop.
pub struct Trainer<'a> {
    cfg: &'a RunConfig,
    rollout: Rollout<'a>,
    artifacts: Artifacts,
    rng: ChaCha8Rng,
    buffer: VecDeque<ConstraintSample>,
    trace: RunTrace,
    episodes_done: usize,
    warmed_up: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.channels;
        let agent = ActorCritic::init(n, cfg.actor_hidden, cfg.critic_hidden, &mut rng);
        let constraint = ConstraintModel::init(n, cfg.constraint_hidden, &mut rng);
        Ok(Self {
            cfg,
            rollout: Rollout::new(cfg)?,
            artifacts: Artifacts { agent, constraint },
            rng,
            buffer: VecDeque::new(),
            trace: RunTrace::default(),
            episodes_done: 0,
            warmed_up: false,
        })
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    fn remember(&mut self, sample: ConstraintSample) {
        if self.buffer.len() == self.cfg.constraint_buffer.max(1) {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample);
    }

    fn fit_constraint(&mut self, epochs: usize) -> Result<Vec<f64>> {
        let samples: Vec<ConstraintSample> = self.buffer.iter().cloned().collect();
        let opts = self.cfg.constraint_training(epochs);
        train_constraint_model(&mut self.artifacts.constraint, &samples, &opts, &mut self.rng)
    }

    /// Collect uniformly random transitions and fit the constraint model.
    /// Rollouts run the full episode length even past lock-on so every slot
    /// of the hop period is covered. Returns the per-epoch surrogate loss.
    pub fn warm_up(&mut self) -> Result<Vec<f64>> {
        self.warmed_up = true;
        let n = self.cfg.channels;
        let mut collected = 0;
        while collected < self.cfg.constraint_warmup_steps {
            self.rollout.reset(&mut self.rng)?;
            for _ in 0..self.cfg.episode_length {
                if collected == self.cfg.constraint_warmup_steps {
                    break;
                }
                let s = self.rollout.env.state().clone();
                let ch = self.rng.gen_range(1..=n);
                let a = crate::env::ActionVector::one_hot(ch, n)?;
                let out = self.rollout.env.step(&a)?;
                self.remember(ConstraintSample::new(&s, &a, &out.next_state));
                collected += 1;
            }
        }
        self.fit_constraint(self.cfg.constraint_epochs)
    }

    /// One training episode (up to `episode_length` slots or lock-on).
    pub fn run_episode(&mut self) -> Result<EpisodeSummary> {
        if !self.warmed_up {
            self.warm_up()?;
        }
        let hyper = self.cfg.hyper();
        let episode = self.episodes_done;
        self.rollout.reset(&mut self.rng)?;
        let start = self.trace.len();
        for _ in 0..self.cfg.episode_length {
            let timeslot = self.trace.len() as u64 + 1;
            let (rec, ctx) = self.rollout.advance(
                &self.artifacts,
                self.cfg.shield.then_some(self.cfg.violation_margin),
                Policy::Sample,
                &mut self.rng,
                episode,
                timeslot,
            )?;
            // on corrected slots the proposal is credited with the outcome of
            // the executed action, i.e. the shield is treated as part of the
            // environment
            if !rec.corrected || self.cfg.learn_on_corrected {
                self.artifacts
                    .agent
                    .learn(&ctx.enc, rec.proposed, rec.reward, &ctx.next_enc, rec.terminal, &hyper)?;
            }
            self.remember(ctx.sample);
            let terminal = rec.terminal;
            self.trace.push(rec);
            if terminal {
                break;
            }
        }
        self.episodes_done += 1;
        let interval = self.cfg.constraint_refresh_interval;
        if interval > 0 && self.episodes_done.is_multiple_of(interval) {
            self.fit_constraint(self.cfg.constraint_refresh_epochs)?;
        }
        let summary = RunTrace {
            records: self.trace.records[start..].to_vec(),
        }
        .episodes();
        Ok(summary[0])
    }

    pub fn into_parts(self) -> (Artifacts, ChaCha8Rng, RunTrace, usize) {
        (self.artifacts, self.rng, self.trace, self.episodes_done)
    }
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub artifacts: Artifacts,
    pub rng: ChaCha8Rng,
    pub trace: RunTrace,
    pub episodes: usize,
}

/// Warm-up plus `train_episodes` actor-critic episodes.
pub fn run_training(cfg: &RunConfig) -> Result<TrainingRun> {
    let mut trainer = Trainer::new(cfg)?;
    trainer.warm_up()?;
    for _ in 0..cfg.train_episodes {
        trainer.run_episode()?;
    }
    let (artifacts, rng, trace, episodes) = trainer.into_parts();
    Ok(TrainingRun {
        artifacts,
        rng,
        trace,
        episodes,
    })
}

/// Frozen-parameter greedy rollout for `inference_timeslots` slots. A
/// lock-on ends the episode and the next one starts from a fresh reset.
pub fn run_inference(artifacts: &Artifacts, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<RunTrace> {
    cfg.validate()?;
    let mut rollout = Rollout::new(cfg)?;
    let margin = cfg.shield.then_some(cfg.violation_margin);
    let mut trace = RunTrace::default();
    let mut episode = 0;
    rollout.reset(rng)?;
    while trace.len() < cfg.inference_timeslots {
        let timeslot = trace.len() as u64 + 1;
        let (rec, _) = rollout.advance(artifacts, margin, Policy::Greedy, rng, episode, timeslot)?;
        let terminal = rec.terminal;
        trace.push(rec);
        if terminal {
            episode += 1;
            rollout.reset(rng)?;
        }
    }
    Ok(trace)
}
