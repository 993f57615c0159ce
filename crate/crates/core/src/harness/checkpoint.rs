//! Trained question-players saved as JSON with the hash of the config that
//! produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::QuestionPlayer;
use crate::error::{Error, Result};
use crate::game::SceneConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub player: QuestionPlayer,
    /// Scenes the player was trained on; sessions draw from the same config.
    pub scene: SceneConfig,
    pub max_rounds: usize,
    /// SHA-256 of the canonical JSON of the training config.
    pub config_hash: String,
    pub seed: u64,
}

/// SHA-256 hex digest of the JSON serialization of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(config)?)))
}

impl Checkpoint {
    pub fn new<T: Serialize>(
        player: QuestionPlayer,
        scene: SceneConfig,
        max_rounds: usize,
        config: &T,
        seed: u64,
    ) -> Result<Self> {
        let ck = Checkpoint {
            player,
            scene,
            max_rounds,
            config_hash: config_hash(config)?,
            seed,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn validate(&self) -> Result<()> {
        self.player.validate()?;
        self.scene.validate()?;
        if self.player.space() != &crate::game::QuestionSpace::for_vocab(&self.scene.vocab()) {
            return Err(Error::ConfigMismatch("question space does not match the scene vocabulary".into()));
        }
        if self.max_rounds == 0 || self.max_rounds > self.player.layout.max_rounds {
            return Err(Error::ConfigMismatch(format!(
                "{} rounds do not fit a layout for {}",
                self.max_rounds, self.player.layout.max_rounds
            )));
        }
        if self.scene.n_objects > self.player.layout.max_objects {
            return Err(Error::ConfigMismatch(format!(
                "{} objects do not fit a layout for {}",
                self.scene.n_objects, self.player.layout.max_objects
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        ck.validate()?;
        Ok(ck)
    }
}
