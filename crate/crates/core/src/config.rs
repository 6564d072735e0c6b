//! Run configuration as a flat `key = value` document.
//!
//! Blank lines and `#` comments are ignored. Missing keys take the
//! reference-scenario defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::TrainingHyper;
use crate::env::{HopSchedule, RewardConfig, Scenario};
use crate::error::{Error, Result};
use crate::shield::ConstraintTraining;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub channels: usize,
    pub sensor_slope: i64,
    pub sensor_intercept: i64,
    pub user_slope: i64,
    pub user_intercept: i64,
    pub reward_hit: f64,
    pub reward_miss: f64,
    pub reward_escalation: f64,
    pub reward_deescalation: f64,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Maximum timeslots per training episode.
    pub episode_length: usize,
    pub train_episodes: usize,
    pub inference_timeslots: usize,
    pub seed: u64,
    pub shield: bool,
    /// Bootstrap the advantage with `V(s')` instead of `γ·V(s')`.
    pub undiscounted_bootstrap: bool,
    /// Also run actor/critic updates on slots where the shield replaced
    /// the proposed action, crediting the proposal with the realised
    /// outcome.
    pub learn_on_corrected: bool,
    /// Clear the sensing device's detection history on every mode change.
    pub history_reset: bool,
    /// Hits pre-recorded in the sensing device's history at episode start.
    pub primed_detections: usize,
    pub constraint_hidden: usize,
    pub constraint_lr: f64,
    pub constraint_batch: usize,
    /// Random-action transitions collected before actor-critic training.
    pub constraint_warmup_steps: usize,
    pub constraint_epochs: usize,
    /// Refit the constraint model every this many episodes (0 = never).
    pub constraint_refresh_interval: usize,
    pub constraint_refresh_epochs: usize,
    pub constraint_buffer: usize,
    /// A predicted constraint value counts as a violation above `1 + margin`.
    pub violation_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            sensor_slope: 1,
            sensor_intercept: 0,
            user_slope: -1,
            user_intercept: 8,
            reward_hit: 1.0,
            reward_miss: 0.0,
            reward_escalation: -5.0,
            reward_deescalation: 5.0,
            gamma: 0.9,
            actor_lr: 0.01,
            critic_lr: 0.01,
            actor_hidden: 64,
            critic_hidden: 64,
            episode_length: 100,
            train_episodes: 2000,
            inference_timeslots: 1000,
            seed: 7,
            shield: true,
            undiscounted_bootstrap: false,
            learn_on_corrected: true,
            history_reset: true,
            primed_detections: 2,
            constraint_hidden: 64,
            constraint_lr: 0.5,
            constraint_batch: 32,
            constraint_warmup_steps: 2000,
            constraint_epochs: 200,
            constraint_refresh_interval: 100,
            constraint_refresh_epochs: 5,
            constraint_buffer: 4000,
            violation_margin: 0.5,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config {
            key: key.into(),
            reason: format!("expected a boolean (true/false/on/off), got `{v}`"),
        }),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| Error::Config {
        key: key.into(),
        reason: format!("cannot parse `{v}`: {e}"),
    })
}

macro_rules! config_keys {
    ($($key:ident : $kind:ident),* $(,)?) => {
        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => { self.$key = config_keys!(@parse $kind, key, value); })*
                    _ => return Err(Error::Config { key: key.into(), reason: "unknown key".into() }),
                }
                Ok(())
            }

            /// Serialize back to the `key = value` form, one key per line.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(let _ = writeln!(out, "{} = {}", stringify!($key), config_keys!(@show $kind, self.$key));)*
                out
            }
        }
    };
    (@parse bool, $k:expr, $v:expr) => { parse_bool($k, $v)? };
    (@parse num, $k:expr, $v:expr) => { parse_num($k, $v)? };
    (@show bool, $e:expr) => { if $e { "on" } else { "off" } };
    (@show num, $e:expr) => { $e };
}

config_keys! {
    channels: num,
    sensor_slope: num,
    sensor_intercept: num,
    user_slope: num,
    user_intercept: num,
    reward_hit: num,
    reward_miss: num,
    reward_escalation: num,
    reward_deescalation: num,
    gamma: num,
    actor_lr: num,
    critic_lr: num,
    actor_hidden: num,
    critic_hidden: num,
    episode_length: num,
    train_episodes: num,
    inference_timeslots: num,
    seed: num,
    shield: bool,
    undiscounted_bootstrap: bool,
    learn_on_corrected: bool,
    history_reset: bool,
    primed_detections: num,
    constraint_hidden: num,
    constraint_lr: num,
    constraint_batch: num,
    constraint_warmup_steps: num,
    constraint_epochs: num,
    constraint_refresh_interval: num,
    constraint_refresh_epochs: num,
    constraint_buffer: num,
    violation_margin: num,
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(invalid(key, format!("duplicate key on line {}", i + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 {
            return Err(invalid("channels", format!("need N >= 2, got {}", self.channels)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        for (key, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("constraint_lr", self.constraint_lr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("must be a positive finite rate, got {v}")));
            }
        }
        for (key, v) in [
            ("reward_hit", self.reward_hit),
            ("reward_miss", self.reward_miss),
            ("reward_escalation", self.reward_escalation),
            ("reward_deescalation", self.reward_deescalation),
        ] {
            if !v.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        for (key, v) in [
            ("actor_hidden", self.actor_hidden),
            ("critic_hidden", self.critic_hidden),
            ("constraint_hidden", self.constraint_hidden),
            ("episode_length", self.episode_length),
            ("constraint_batch", self.constraint_batch),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.primed_detections > 2 {
            // three primed hits would escalate before the jammer acts
            return Err(invalid("primed_detections", "must be at most 2"));
        }
        if !(self.violation_margin.is_finite() && (0.0..1.0).contains(&self.violation_margin)) {
            return Err(invalid("violation_margin", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(
            HopSchedule::new(self.sensor_slope, self.sensor_intercept, self.channels)?,
            HopSchedule::new(self.user_slope, self.user_intercept, self.channels)?,
            RewardConfig {
                hit: self.reward_hit,
                miss: self.reward_miss,
                escalation: self.reward_escalation,
                deescalation: self.reward_deescalation,
            },
        )
    }

    pub fn hyper(&self) -> TrainingHyper {
        TrainingHyper {
            gamma: self.gamma,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            episode_length: self.episode_length,
            strict_undiscounted_advantage: self.undiscounted_bootstrap,
        }
    }

    pub fn constraint_training(&self, epochs: usize) -> ConstraintTraining {
        ConstraintTraining {
            epochs,
            batch_size: self.constraint_batch,
            lr: self.constraint_lr,
        }
    }

    /// Network shapes must agree for parameters to be reusable.
    pub fn check_compatible(&self, other: &RunConfig) -> Result<()> {
        let pairs = [
            ("channels", self.channels, other.channels),
            ("actor_hidden", self.actor_hidden, other.actor_hidden),
            ("critic_hidden", self.critic_hidden, other.critic_hidden),
            ("constraint_hidden", self.constraint_hidden, other.constraint_hidden),
        ];
        for (key, a, b) in pairs {
            if a != b {
                return Err(Error::Incompatible(format!("{key}: checkpoint has {a}, config has {b}")));
            }
        }
        Ok(())
    }
}
