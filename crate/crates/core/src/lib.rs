//! Safe jamming against a frequency-agile multifunction sensing device.
//!
//! An actor-critic agent learns which channel to jam each timeslot, and a
//! learned constraint model with a closed-form KKT correction keeps the
//! jammer off the channel of a non-cooperative uplink user.
//!
//! - [`env`]: hop schedules, detection, sensing mode machine, rewards.
//! - [`agent`]: policy and value networks and their updates.
//! - [`shield`]: constraint surrogate, its training, action correction.
//! - [`harness`]: training/inference loops and success-rate accounting.
//! - [`config`], [`checkpoint`], [`output`]: run configuration and files.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod output;
pub mod shield;

pub use config::RunConfig;
pub use error::{Error, Result};
