//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{chain_env, random_factored, random_single_controller};
use crate::error::{Error, Result};
use crate::estimation::LearningConfig;
use crate::game::{build_game, GameSpec, ZeroSumGame};

/// Where the game comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    /// The built-in 7-state chain.
    Chain,
    /// A [`GameSpec`] JSON file; relative paths resolve against the config file's directory.
    SpecFile { path: PathBuf },
    RandomSingleController {
        n_states: usize,
        n_actions_p1: usize,
        n_actions_p2: usize,
        horizon: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        seed: u64,
    },
    RandomFactored {
        n1: usize,
        n2: usize,
        n_actions_p1: usize,
        n_actions_p2: usize,
        horizon: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        seed: u64,
    },
}

fn default_noise() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub episodes: usize,
    pub delta: f64,
    #[serde(default = "one")]
    pub eta_scale: f64,
    #[serde(default = "one")]
    pub gamma_scale: f64,
    #[serde(default = "one")]
    pub reward_bonus_scale: f64,
    #[serde(default = "one")]
    pub transition_bonus_scale: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Check every optimistic backup against the true model.
    #[serde(default = "yes")]
    pub audit: bool,
}

impl ExperimentConfig {
    /// The chain experiment with step sizes x50, bonuses x0.01 and delta = 0.01.
    pub fn chain_practical(episodes: usize, seeds: Vec<u64>) -> Self {
        Self::new(GameSource::Chain, LearningConfig::chain_practical(episodes), seeds)
    }

    pub fn new(game: GameSource, learning: LearningConfig, seeds: Vec<u64>) -> Self {
        Self {
            game,
            episodes: learning.episodes,
            delta: learning.delta,
            eta_scale: learning.eta_scale,
            gamma_scale: learning.gamma_scale,
            reward_bonus_scale: learning.reward_bonus_scale,
            transition_bonus_scale: learning.transition_bonus_scale,
            seeds,
            output_dir: None,
            audit: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving a relative spec path
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let GameSource::SpecFile { path: spec } = &mut cfg.game {
            if spec.is_relative() {
                if let Some(dir) = path.parent() {
                    *spec = dir.join(&*spec);
                }
            }
        }
        Ok(cfg)
    }

    pub fn learning(&self) -> LearningConfig {
        LearningConfig {
            episodes: self.episodes,
            delta: self.delta,
            eta_scale: self.eta_scale,
            gamma_scale: self.gamma_scale,
            reward_bonus_scale: self.reward_bonus_scale,
            transition_bonus_scale: self.transition_bonus_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learning().validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Builds the configured game. Invalid spec files are configuration errors.
    pub fn build_game(&self) -> Result<ZeroSumGame> {
        let config_err = |e: Error| Error::Config(e.to_string());
        match &self.game {
            GameSource::Chain => Ok(chain_env()),
            GameSource::SpecFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read game spec {}: {e}", path.display())))?;
                let spec: GameSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                build_game(&spec).map_err(config_err)
            }
            &GameSource::RandomSingleController {
                n_states,
                n_actions_p1,
                n_actions_p2,
                horizon,
                noise,
                seed,
            } => {
                check_sizes(&[n_states, n_actions_p1, n_actions_p2, horizon], noise)?;
                Ok(random_single_controller(
                    n_states,
                    n_actions_p1,
                    n_actions_p2,
                    horizon,
                    noise,
                    seed,
                ))
            }
            &GameSource::RandomFactored {
                n1,
                n2,
                n_actions_p1,
                n_actions_p2,
                horizon,
                noise,
                seed,
            } => {
                check_sizes(&[n1, n2, n_actions_p1, n_actions_p2, horizon], noise)?;
                Ok(random_factored(
                    n1,
                    n2,
                    n_actions_p1,
                    n_actions_p2,
                    horizon,
                    noise,
                    seed,
                ))
            }
        }
    }
}

fn check_sizes(sizes: &[usize], noise: f64) -> Result<()> {
    if sizes.contains(&0) {
        return Err(Error::Config("random game sizes must be positive".into()));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::Config(format!("noise half-width {noise} must lie in [0, 0.5)")));
    }
    Ok(())
}
