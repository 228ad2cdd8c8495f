//! Optimistic fictitious-play policy optimization for tabular two-player
//! zero-sum Markov games with factored or single-controller transitions.
//!
//! Indexing is zero-based throughout: steps `h in 0..H`, states, and actions.
//! Player 1 maximizes, player 2 minimizes.

pub mod bench;
pub mod dp;
pub mod envs;
pub mod error;
pub mod estimation;
pub mod fp;
pub mod game;
pub mod metrics;
pub mod reaching;

pub use dp::{
    bilinear, evaluate_pair, exact_reaching, hindsight_best_p1, hindsight_best_p2, p1_reaching, p2_reaching,
    ReachingDistribution, ValueTable,
};
pub use envs::{chain_env, chain_equilibrium, random_factored, random_single_controller};
pub use error::{Error, Result};
pub use estimation::{EmpiricalModel, LearningConfig, Side};
pub use fp::{
    episode_update, mirror_step, optimistic_backup, BonusSign, Learner, LogPolicy, MirrorDirection, OptimisticEval,
    Orientation, Role,
};
pub use game::{
    build_game, sample_episode, GameSpec, Kernel, Policy, RewardTable, StateLayout, Trajectory, ZeroSumGame,
};
pub use metrics::{finalize_regret, optimism_audit, RegretLedger};
pub use reaching::{empirical_reaching, model_reaching};
