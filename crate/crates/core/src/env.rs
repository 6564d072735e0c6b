//! Spectrum confrontation between a jammer, a frequency-agile multifunction
//! sensing device and a non-cooperative hopping uplink user.
//!
//! Channels are 1-based (`1..=N`) everywhere in this module. Timeslots start
//! at `t = 1`. The jammer observes the state of slot `t` and its chosen
//! channel is emitted during slot `t + 1`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based channel index in `1..=N`.
pub type ChannelIndex = usize;

/// Linear hop schedule `f(t) = k·t + b`, wrapped onto `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopSchedule {
    pub slope: i64,
    pub intercept: i64,
    pub channels: usize,
}

impl HopSchedule {
    pub fn new(slope: i64, intercept: i64, channels: usize) -> Result<Self> {
        if channels < 2 {
            return Err(Error::Config {
                key: "channels".into(),
                reason: format!("need at least 2 channels, got {channels}"),
            });
        }
        Ok(Self {
            slope,
            intercept,
            channels,
        })
    }

    /// Channel occupied in slot `t`.
    pub fn frequency(&self, t: u64) -> ChannelIndex {
        hop_frequency(self, t)
    }
}

/// `((k·t + b − 1) mod N) + 1`. Total over all `t`; for `t ∈ 1..=N` and the
/// default schedules it coincides with the unwrapped line.
pub fn hop_frequency(schedule: &HopSchedule, t: u64) -> ChannelIndex {
    let n = schedule.channels as i128;
    let raw = schedule.slope as i128 * t as i128 + schedule.intercept as i128 - 1;
    (raw.rem_euclid(n) + 1) as ChannelIndex
}

/// Detection succeeds unless the jammer sits on the sensing channel.
pub fn detect(jam_channel: ChannelIndex, sensing_channel: ChannelIndex) -> bool {
    jam_channel != sensing_channel
}

/// Operating mode of the sensing device. The integer codes are the ones
/// used in every output file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SensingMode {
    Searching = 1,
    Tracking = 2,
    LockOn = 3,
}

impl SensingMode {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Searching),
            2 => Some(Self::Tracking),
            3 => Some(Self::LockOn),
            _ => None,
        }
    }

    /// Mode value scaled onto `[0, 1]` for network inputs.
    pub fn normalized(self) -> f64 {
        (self.code() - 1) as f64 / 2.0
    }
}

/// Largest window any transition rule inspects.
pub const HISTORY_CAPACITY: usize = 4;

/// Searching escalates after this many hits in `SEARCH_WINDOW` detections.
pub const SEARCH_WINDOW: usize = 4;
pub const SEARCH_HITS: usize = 3;
/// Tracking locks on after this many hits in `LOCK_WINDOW` detections.
pub const LOCK_WINDOW: usize = 3;
pub const LOCK_HITS: usize = 2;
/// Tracking falls back to searching after `RELEASE_WINDOW` straight misses.
pub const RELEASE_WINDOW: usize = 4;

/// Mode state machine of the sensing device plus its detection history
/// (oldest first).
///
/// Escalations fire on the detection that completes the hit count, so a
/// window that is not yet full can still escalate once enough hits are in
/// it. Falling back from tracking needs a full window of misses. By default
/// the history is cleared on every mode change, so windows only span the
/// current occupancy of a mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeMachine {
    mode: SensingMode,
    history: VecDeque<bool>,
    reset_on_change: bool,
}

impl Default for ModeMachine {
    fn default() -> Self {
        Self::new()
    }
}

impl ModeMachine {
    pub fn new() -> Self {
        Self {
            mode: SensingMode::Searching,
            history: VecDeque::with_capacity(HISTORY_CAPACITY),
            reset_on_change: true,
        }
    }

    /// Machine in `mode` with a pre-recorded history (oldest first). Only the
    /// last `HISTORY_CAPACITY` entries are kept.
    pub fn with_history(mode: SensingMode, history: &[bool]) -> Self {
        let keep = history.len().saturating_sub(HISTORY_CAPACITY);
        Self {
            mode,
            history: history[keep..].iter().copied().collect(),
            reset_on_change: true,
        }
    }

    /// Keep the history across mode changes instead of clearing it.
    pub fn global_window(mut self) -> Self {
        self.reset_on_change = false;
        self
    }

    pub fn set_reset_on_change(&mut self, reset: bool) {
        self.reset_on_change = reset;
    }

    pub fn mode(&self) -> SensingMode {
        self.mode
    }

    pub fn history(&self) -> Vec<bool> {
        self.history.iter().copied().collect()
    }

    pub fn is_absorbed(&self) -> bool {
        self.mode == SensingMode::LockOn
    }

    fn hits_in_last(&self, window: usize) -> usize {
        self.history.iter().rev().take(window).filter(|&&d| d).count()
    }

    /// Record one detection outcome and apply the transition rules.
    /// Returns the mode after the update.
    pub fn observe(&mut self, detected: bool) -> SensingMode {
        if self.is_absorbed() {
            return self.mode;
        }
        if self.history.len() == HISTORY_CAPACITY {
            self.history.pop_front();
        }
        self.history.push_back(detected);

        let next = match self.mode {
            SensingMode::Searching if detected && self.hits_in_last(SEARCH_WINDOW) >= SEARCH_HITS => {
                SensingMode::Tracking
            }
            SensingMode::Tracking if detected && self.hits_in_last(LOCK_WINDOW) >= LOCK_HITS => {
                SensingMode::LockOn
            }
            SensingMode::Tracking
                if self.history.len() >= RELEASE_WINDOW
                    && self.hits_in_last(RELEASE_WINDOW) == 0 =>
            {
                SensingMode::Searching
            }
            mode => mode,
        };
        if next != self.mode {
            self.mode = next;
            if self.reset_on_change {
                self.history.clear();
            }
        }
        self.mode
    }
}

/// Functional form of [`ModeMachine::observe`].
pub fn mode_transition(machine: &ModeMachine, detected: bool) -> ModeMachine {
    let mut next = machine.clone();
    next.observe(detected);
    next
}

/// Jamming action over `N` channels. Discrete actions are one-hot; the
/// correction layer also produces relaxed real-valued vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn one_hot(channel: ChannelIndex, channels: usize) -> Result<Self> {
        if channel == 0 || channel > channels {
            return Err(Error::ChannelOutOfRange { channel, channels });
        }
        let mut v = vec![0.0; channels];
        v[channel - 1] = 1.0;
        Ok(Self(v))
    }

    pub fn from_entries(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one_hot(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0) && self.0.iter().filter(|&&x| x == 1.0).count() == 1
    }

    /// Selected channel of a one-hot action.
    pub fn channel(&self) -> Result<ChannelIndex> {
        if !self.is_one_hot() {
            return Err(Error::NotOneHot(self.0.clone()));
        }
        Ok(self.0.iter().position(|&x| x == 1.0).unwrap() + 1)
    }
}

/// What the jammer observes in slot `t`: the action emitted in `t`, the
/// sensing and user channels in `t`, and the sensing mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumState {
    pub prev_action: ActionVector,
    pub sensing_freq: ChannelIndex,
    pub user_freq: ChannelIndex,
    pub sensing_mode: SensingMode,
}

impl SpectrumState {
    pub fn channels(&self) -> usize {
        self.prev_action.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Jamming hit.
    pub hit: f64,
    /// Jamming miss.
    pub miss: f64,
    /// Searching → tracking or tracking → lock-on.
    pub escalation: f64,
    /// Tracking → searching.
    pub deescalation: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            hit: 1.0,
            miss: 0.0,
            escalation: -5.0,
            deescalation: 5.0,
        }
    }
}

/// Transition rewards take precedence over hit/miss.
pub fn compute_reward(
    jam_hit: bool,
    mode_before: SensingMode,
    mode_after: SensingMode,
    cfg: &RewardConfig,
) -> f64 {
    use SensingMode::*;
    match (mode_before, mode_after) {
        (Searching, Tracking) | (Tracking, LockOn) => cfg.escalation,
        (Tracking, Searching) => cfg.deescalation,
        _ if jam_hit => cfg.hit,
        _ => cfg.miss,
    }
}

/// Both hop schedules and the reward table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sensor: HopSchedule,
    pub user: HopSchedule,
    pub rewards: RewardConfig,
}

impl Scenario {
    pub fn new(sensor: HopSchedule, user: HopSchedule, rewards: RewardConfig) -> Result<Self> {
        if sensor.channels != user.channels {
            return Err(Error::Config {
                key: "channels".into(),
                reason: "sensor and user schedules disagree on channel count".into(),
            });
        }
        Ok(Self {
            sensor,
            user,
            rewards,
        })
    }

    pub fn channels(&self) -> usize {
        self.sensor.channels
    }

    /// Default setting: 8 channels, sensor sweeping up from channel 1, user
    /// sweeping down from channel 8, rewards (1, 0, −5, 5).
    pub fn reference() -> Self {
        Self {
            sensor: HopSchedule {
                slope: 1,
                intercept: 0,
                channels: 8,
            },
            user: HopSchedule {
                slope: -1,
                intercept: 8,
                channels: 8,
            },
            rewards: RewardConfig::default(),
        }
    }

    /// Observation at slot `t` given the action emitted in `t`.
    pub fn observe(&self, t: u64, emitted: ActionVector, mode: SensingMode) -> SpectrumState {
        SpectrumState {
            prev_action: emitted,
            sensing_freq: self.sensor.frequency(t),
            user_freq: self.user.frequency(t),
            sensing_mode: mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: SpectrumState,
    pub reward: f64,
    pub jam_hit: bool,
    pub conflict: bool,
    pub mode_before: SensingMode,
    pub mode_after: SensingMode,
    pub terminal: bool,
    pub jam_channel: ChannelIndex,
    pub sensing_channel: ChannelIndex,
    pub user_channel: ChannelIndex,
}

/// Execute `action` (chosen in slot `t`) during slot `t + 1`.
///
/// `machine` is advanced in place and must agree with `state.sensing_mode`.
pub fn step(
    state: &SpectrumState,
    action: &ActionVector,
    t: u64,
    scenario: &Scenario,
    machine: &mut ModeMachine,
) -> Result<StepOutcome> {
    let n = scenario.channels();
    if action.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: action.len(),
        });
    }
    let jam_channel = action.channel()?;
    debug_assert_eq!(machine.mode(), state.sensing_mode);

    let next_t = t + 1;
    let sensing_channel = scenario.sensor.frequency(next_t);
    let user_channel = scenario.user.frequency(next_t);

    let mode_before = machine.mode();
    let detected = detect(jam_channel, sensing_channel);
    let mode_after = machine.observe(detected);
    let jam_hit = !detected;
    let reward = compute_reward(jam_hit, mode_before, mode_after, &scenario.rewards);

    Ok(StepOutcome {
        next_state: scenario.observe(next_t, action.clone(), mode_after),
        reward,
        jam_hit,
        conflict: jam_channel == user_channel,
        mode_before,
        mode_after,
        terminal: mode_after == SensingMode::LockOn,
        jam_channel,
        sensing_channel,
        user_channel,
    })
}

/// Sequential environment wrapper around [`step`].
#[derive(Debug, Clone)]
pub struct SpectrumEnv {
    scenario: Scenario,
    t: u64,
    state: SpectrumState,
    machine: ModeMachine,
    reset_on_change: bool,
}

impl SpectrumEnv {
    pub fn new(scenario: Scenario) -> Self {
        let state = scenario.observe(
            1,
            ActionVector::one_hot(1, scenario.channels()).expect("at least 2 channels"),
            SensingMode::Searching,
        );
        Self {
            scenario,
            t: 1,
            state,
            machine: ModeMachine::new(),
            reset_on_change: true,
        }
    }

    pub fn with_global_window(mut self) -> Self {
        self.reset_on_change = false;
        self.machine.set_reset_on_change(false);
        self
    }

    /// Start a confrontation at slot 1. `emitted` is the channel jammed in
    /// slot 1; `primed_detections` leading hits are pre-recorded in the
    /// sensing device's history.
    pub fn reset(&mut self, emitted: ChannelIndex, primed_detections: usize) -> Result<&SpectrumState> {
        let action = ActionVector::one_hot(emitted, self.scenario.channels())?;
        let mut machine = ModeMachine::with_history(
            SensingMode::Searching,
            &vec![true; primed_detections.min(HISTORY_CAPACITY)],
        );
        machine.set_reset_on_change(self.reset_on_change);
        self.machine = machine;
        self.t = 1;
        self.state = self.scenario.observe(1, action, SensingMode::Searching);
        Ok(&self.state)
    }

    pub fn state(&self) -> &SpectrumState {
        &self.state
    }

    pub fn machine(&self) -> &ModeMachine {
        &self.machine
    }

    pub fn timeslot(&self) -> u64 {
        self.t
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn step(&mut self, action: &ActionVector) -> Result<StepOutcome> {
        let outcome = step(&self.state, action, self.t, &self.scenario, &mut self.machine)?;
        self.t += 1;
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }
}
