//! Versioned JSON checkpoint holding everything needed to resume or replay
//! a run.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::Artifacts;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    pub artifacts: Artifacts,
    pub rng: ChaCha8Rng,
    pub episodes_done: usize,
    pub timeslots_done: u64,
}

impl Checkpoint {
    pub fn new(
        config: RunConfig,
        artifacts: Artifacts,
        rng: ChaCha8Rng,
        episodes_done: usize,
        timeslots_done: u64,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            artifacts,
            rng,
            episodes_done,
            timeslots_done,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Trace("checkpoint has no version field".into()))?;
        if found != CHECKPOINT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        ckpt.config.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ActorCritic;
    use crate::shield::ConstraintModel;
    use rand::{RngCore, SeedableRng};

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let artifacts = Artifacts {
            agent: ActorCritic::init(8, 16, 16, &mut rng),
            constraint: ConstraintModel::init(8, 16, &mut rng),
        };
        rng.next_u64();
        Checkpoint::new(RunConfig::default(), artifacts, rng, 12, 345)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ckpt = sample();
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        assert_eq!(back, ckpt);
        let bits = |c: &Checkpoint| -> Vec<u64> {
            c.artifacts.agent.actor.net.params().iter().map(|p| p.to_bits()).collect()
        };
        assert_eq!(bits(&back), bits(&ckpt));
        let (mut a, mut b) = (ckpt.rng.clone(), back.rng.clone());
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut ckpt = sample();
        ckpt.version = 99;
        let err = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { found: 99, .. }));
    }
}
