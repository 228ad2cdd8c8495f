//! Visit counters, empirical reward/transition estimates and Hoeffding bonuses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Kernel, RewardTable, StateLayout, Trajectory, ZeroSumGame};

/// Confidence level, episode budget and the multipliers applied to the
/// theoretical step sizes and bonuses.
///
/// The episode budget `episodes` (K) enters every bonus logarithm and the
/// default step sizes; it is the planned total, not the running index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
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
}

fn one() -> f64 {
    1.0
}

impl LearningConfig {
    /// Unscaled step sizes and bonuses.
    pub fn theoretical(episodes: usize, delta: f64) -> Self {
        Self {
            episodes,
            delta,
            eta_scale: 1.0,
            gamma_scale: 1.0,
            reward_bonus_scale: 1.0,
            transition_bonus_scale: 1.0,
        }
    }

    /// Practical setting for the chain: step sizes x50, bonuses x0.01, delta = 0.01.
    pub fn chain_practical(episodes: usize) -> Self {
        Self {
            episodes,
            delta: 0.01,
            eta_scale: 50.0,
            gamma_scale: 50.0,
            reward_bonus_scale: 0.01,
            transition_bonus_scale: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 2 {
            return Err(Error::Config(format!(
                "episode budget K = {} must be at least 2",
                self.episodes
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        for (name, v) in [
            ("eta_scale", self.eta_scale),
            ("gamma_scale", self.gamma_scale),
            ("reward_bonus_scale", self.reward_bonus_scale),
            ("transition_bonus_scale", self.transition_bonus_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(())
    }
}

/// Which per-player transition estimate to address. In single-controller
/// games only [`Side::P1`] exists and is indexed by the joint state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    P1,
    P2,
}

#[derive(Clone, Debug, PartialEq)]
struct TransitionCounts {
    n_states: usize,
    n_actions: usize,
    visits: Vec<u64>,
    next: Vec<u64>,
}

impl TransitionCounts {
    fn new(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            visits: vec![0; horizon * n_states * n_actions],
            next: vec![0; horizon * n_states * n_actions * n_states],
        }
    }

    #[inline]
    fn cell(&self, h: usize, x: usize, act: usize) -> usize {
        (h * self.n_states + x) * self.n_actions + act
    }

    fn record(&mut self, h: usize, x: usize, act: usize, x_next: usize) {
        let c = self.cell(h, x, act);
        self.visits[c] += 1;
        self.next[c * self.n_states + x_next] += 1;
    }

    fn row(&self, h: usize, x: usize, act: usize) -> Vec<f64> {
        let c = self.cell(h, x, act);
        let n = self.visits[c];
        if n == 0 {
            return vec![1.0 / self.n_states as f64; self.n_states];
        }
        self.next[c * self.n_states..(c + 1) * self.n_states]
            .iter()
            .map(|&m| m as f64 / n as f64)
            .collect()
    }

    fn kernel(&self, horizon: usize) -> Kernel {
        let mut probs = Vec::with_capacity(self.next.len());
        for h in 0..horizon {
            for x in 0..self.n_states {
                for act in 0..self.n_actions {
                    probs.extend(self.row(h, x, act));
                }
            }
        }
        Kernel::from_raw(horizon, self.n_states, self.n_actions, probs)
    }
}

/// One player's running estimate of the game from observed trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalModel {
    horizon: usize,
    layout: StateLayout,
    n_a: usize,
    n_b: usize,
    initial_state: usize,
    config: LearningConfig,
    n_sab: Vec<u64>,
    reward_sum: Vec<f64>,
    p1: TransitionCounts,
    p2: Option<TransitionCounts>,
    episodes: usize,
    reward_log: f64,
    p1_log: f64,
    p2_log: f64,
}

impl EmpiricalModel {
    /// Empty model for `game`'s spaces. Only sizes are read from the game.
    pub fn new(game: &ZeroSumGame, config: LearningConfig) -> Self {
        let (horizon, n_a, n_b) = (game.horizon(), game.n_actions_p1(), game.n_actions_p2());
        let layout = game.layout();
        let n = layout.n_joint();
        let hk_over_delta = horizon as f64 * config.episodes as f64 / config.delta;
        let reward_log = ((n * n_a * n_b) as f64 * hk_over_delta).ln();
        let (p1, p2, p1_log, p2_log) = match layout {
            StateLayout::Joint { n_states } => (
                TransitionCounts::new(horizon, n_states, n_a),
                None,
                ((n_states * n_a) as f64 * hk_over_delta).ln(),
                0.0,
            ),
            StateLayout::Factored { n1, n2 } => (
                TransitionCounts::new(horizon, n1, n_a),
                Some(TransitionCounts::new(horizon, n2, n_b)),
                ((2 * n1 * n_a) as f64 * hk_over_delta).ln(),
                ((2 * n2 * n_b) as f64 * hk_over_delta).ln(),
            ),
        };
        Self {
            horizon,
            layout,
            n_a,
            n_b,
            initial_state: game.initial_state(),
            config,
            n_sab: vec![0; horizon * n * n_a * n_b],
            reward_sum: vec![0.0; horizon * n * n_a * n_b],
            p1,
            p2,
            episodes: 0,
            reward_log,
            p1_log,
            p2_log,
        }
    }

    pub fn config(&self) -> &LearningConfig {
        &self.config
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_actions_p1(&self) -> usize {
        self.n_a
    }

    pub fn n_actions_p2(&self) -> usize {
        self.n_b
    }

    /// Joint start state of every episode.
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn is_factored(&self) -> bool {
        self.p2.is_some()
    }

    /// Number of trajectories folded in so far.
    pub fn episodes(&self) -> usize {
        self.episodes
    }

    #[inline]
    fn sab(&self, h: usize, s: usize, a: usize, b: usize) -> usize {
        ((h * self.layout.n_joint() + s) * self.n_a + a) * self.n_b + b
    }

    /// Folds one trajectory into every counter.
    pub fn update(&mut self, traj: &Trajectory) -> Result<()> {
        if traj.steps.len() != self.horizon {
            return Err(Error::IndexMismatch(format!(
                "trajectory has {} steps, horizon is {}",
                traj.steps.len(),
                self.horizon
            )));
        }
        let n = self.layout.n_joint();
        if let Some(bad) = traj
            .steps
            .iter()
            .find(|st| st.state >= n || st.next_state >= n || st.action_a >= self.n_a || st.action_b >= self.n_b)
        {
            return Err(Error::IndexMismatch(format!("trajectory step {bad:?} out of bounds")));
        }
        for (h, st) in traj.steps.iter().enumerate() {
            let c = self.sab(h, st.state, st.action_a, st.action_b);
            self.n_sab[c] += 1;
            self.reward_sum[c] += st.reward;
            let (x, x_next) = (self.layout.p1_index(st.state), self.layout.p1_index(st.next_state));
            self.p1.record(h, x, st.action_a, x_next);
            if let Some(p2) = self.p2.as_mut() {
                let (y, y_next) = (self.layout.p2_index(st.state), self.layout.p2_index(st.next_state));
                p2.record(h, y, st.action_b, y_next);
            }
        }
        self.episodes += 1;
        Ok(())
    }

    pub fn count_sab(&self, h: usize, s: usize, a: usize, b: usize) -> u64 {
        self.n_sab[self.sab(h, s, a, b)]
    }

    /// Visits of `(h, x, act)` in one player's own space (joint space for single-controller games).
    pub fn count(&self, side: Side, h: usize, x: usize, act: usize) -> u64 {
        let counts = self.counts(side);
        counts.visits[counts.cell(h, x, act)]
    }

    fn counts(&self, side: Side) -> &TransitionCounts {
        match side {
            Side::P1 => &self.p1,
            Side::P2 => self
                .p2
                .as_ref()
                .expect("player-2 transition estimate exists only in factored games"),
        }
    }

    /// Smallest `N_h(s, a, b)` over all cells.
    pub fn min_count(&self) -> u64 {
        self.n_sab.iter().copied().min().unwrap_or(0)
    }

    /// Sample mean of observed rewards at `(h, s, a, b)`; 0 before any visit.
    pub fn empirical_reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        let c = self.sab(h, s, a, b);
        self.reward_sum[c] / self.n_sab[c].max(1) as f64
    }

    /// Empirical next-state distribution; uniform before any visit.
    pub fn empirical_transition(&self, side: Side, h: usize, x: usize, act: usize) -> Vec<f64> {
        self.counts(side).row(h, x, act)
    }

    /// The whole empirical kernel for one side.
    pub fn estimated_kernel(&self, side: Side) -> Kernel {
        self.counts(side).kernel(self.horizon)
    }

    pub fn reward_bonus(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        let n = self.count_sab(h, s, a, b).max(1) as f64;
        self.config.reward_bonus_scale * (4.0 * self.reward_log / n).sqrt()
    }

    /// Transition bonus at `(h, s, a, b)`. Single-controller games ignore `b`;
    /// factored games sum the two per-component terms.
    pub fn transition_bonus(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        let h_sq = (self.horizon * self.horizon) as f64;
        let term = |counts: &TransitionCounts, x: usize, act: usize, log: f64| {
            let n = counts.visits[counts.cell(h, x, act)].max(1) as f64;
            (2.0 * h_sq * counts.n_states as f64 * log / n).sqrt()
        };
        let raw = match &self.p2 {
            None => term(&self.p1, s, a, self.p1_log),
            Some(p2) => {
                term(&self.p1, self.layout.p1_index(s), a, self.p1_log)
                    + term(p2, self.layout.p2_index(s), b, self.p2_log)
            }
        };
        self.config.transition_bonus_scale * raw
    }

    pub fn total_bonus(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.reward_bonus(h, s, a, b) + self.transition_bonus(h, s, a, b)
    }

    /// Lower-confidence reward `max(r_hat - bonus_r, 0)`.
    pub fn optimistic_reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        (self.empirical_reward(h, s, a, b) - self.reward_bonus(h, s, a, b)).max(0.0)
    }

    /// [`Self::optimistic_reward`] over every cell. Before any episode the
    /// initialization `r_hat = 0` makes this identically zero.
    pub fn lower_confidence_rewards(&self) -> RewardTable {
        if self.episodes == 0 {
            return RewardTable::zeros(self.horizon, self.layout.n_joint(), self.n_a, self.n_b);
        }
        RewardTable::from_fn(self.horizon, self.layout.n_joint(), self.n_a, self.n_b, |h, s, a, b| {
            self.optimistic_reward(h, s, a, b)
        })
    }
}
