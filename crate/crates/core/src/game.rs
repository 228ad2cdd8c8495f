//! Game model for two-player zero-sum episodic Markov games.
//!
//! Steps, states and actions are dense zero-based indices. Step `h` runs over
//! `0..horizon`. In a factored game the joint state is encoded as
//! `s = s1 * n2 + s2` where `n2` is the size of player 2's component; every
//! module (exact and empirical) goes through [`StateLayout`] for that mapping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the row sums of every probability distribution.
pub const DIST_TOL: f64 = 1e-9;

pub(crate) fn check_distribution(row: &[f64], context: impl FnOnce() -> String) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: "empty row".into(),
        });
    }
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: format!("entry {p} is negative or not finite"),
        });
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution {
            context: context(),
            reason: format!("row sums to {total}"),
        });
    }
    Ok(())
}

/// Draws an index from `row` by inversion of one uniform variate.
pub(crate) fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Per-step transition kernel `P_h(s' | s, action)` over a single state space.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from a flat `[h][s][action][s']` buffer, validating every row.
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::IndexMismatch("kernel dimensions must be positive".into()));
        }
        if probs.len() != horizon * n_states * n_actions * n_states {
            return Err(Error::IndexMismatch(format!(
                "kernel buffer has {} entries, expected {}",
                probs.len(),
                horizon * n_states * n_actions * n_states
            )));
        }
        let kernel = Self::from_raw(horizon, n_states, n_actions, probs);
        for h in 0..horizon {
            for s in 0..n_states {
                for a in 0..n_actions {
                    check_distribution(kernel.row(h, s, a), || {
                        format!("transition row (h={h}, s={s}, action={a})")
                    })?;
                }
            }
        }
        Ok(kernel)
    }

    pub(crate) fn from_raw(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), horizon * n_states * n_actions * n_states);
        Self {
            horizon,
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn from_fn(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut row: impl FnMut(usize, usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(horizon * n_states * n_actions * n_states);
        for h in 0..horizon {
            for s in 0..n_states {
                for a in 0..n_actions {
                    let r = row(h, s, a);
                    if r.len() != n_states {
                        return Err(Error::IndexMismatch(format!(
                            "transition row (h={h}, s={s}, action={a}) has {} entries, expected {n_states}",
                            r.len()
                        )));
                    }
                    probs.extend(r);
                }
            }
        }
        Self::new(horizon, n_states, n_actions, probs)
    }

    /// Every row uniform over the state space.
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_states as f64;
        Self::from_raw(
            horizon,
            n_states,
            n_actions,
            vec![p; horizon * n_states * n_actions * n_states],
        )
    }

    /// Every action keeps the state where it is.
    pub fn identity(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let mut probs = vec![0.0; horizon * n_states * n_actions * n_states];
        for h in 0..horizon {
            for s in 0..n_states {
                for a in 0..n_actions {
                    probs[((h * n_states + s) * n_actions + a) * n_states + s] = 1.0;
                }
            }
        }
        Self::from_raw(horizon, n_states, n_actions, probs)
    }

    fn from_nested(rows: &[Vec<Vec<Vec<f64>>>], what: &str) -> Result<Self> {
        let horizon = rows.len();
        let n_states = rows.first().map_or(0, Vec::len);
        let n_actions = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
        Self::from_fn(horizon, n_states, n_actions, |h, s, a| {
            rows.get(h)
                .and_then(|r| r.get(s))
                .and_then(|r| r.get(a))
                .cloned()
                .unwrap_or_default()
        })
        .map_err(|e| match e {
            Error::IndexMismatch(m) => Error::IndexMismatch(format!("{what}: {m}")),
            other => other,
        })
        .and_then(|k| {
            let ragged = rows
                .iter()
                .any(|r| r.len() != n_states || r.iter().any(|x| x.len() != n_actions));
            if ragged {
                Err(Error::IndexMismatch(format!("{what}: ragged transition tensor")))
            } else {
                Ok(k)
            }
        })
    }

    fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.horizon)
            .map(|h| {
                (0..self.n_states)
                    .map(|s| (0..self.n_actions).map(|a| self.row(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = ((h * self.n_states + s) * self.n_actions + a) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    /// `sum_{s'} P_h(s' | s, a) values[s']`
    #[inline]
    pub fn expect(&self, h: usize, s: usize, a: usize, values: &[f64]) -> f64 {
        self.row(h, s, a).iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// Dense reward tensor `r_h(s, a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    horizon: usize,
    n_states: usize,
    n_a: usize,
    n_b: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(horizon: usize, n_states: usize, n_a: usize, n_b: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != horizon * n_states * n_a * n_b {
            return Err(Error::IndexMismatch(format!(
                "reward buffer has {} entries, expected {}",
                values.len(),
                horizon * n_states * n_a * n_b
            )));
        }
        Ok(Self {
            horizon,
            n_states,
            n_a,
            n_b,
            values,
        })
    }

    pub fn from_fn(
        horizon: usize,
        n_states: usize,
        n_a: usize,
        n_b: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(horizon * n_states * n_a * n_b);
        for h in 0..horizon {
            for s in 0..n_states {
                for a in 0..n_a {
                    for b in 0..n_b {
                        values.push(f(h, s, a, b));
                    }
                }
            }
        }
        Self {
            horizon,
            n_states,
            n_a,
            n_b,
            values,
        }
    }

    pub fn zeros(horizon: usize, n_states: usize, n_a: usize, n_b: usize) -> Self {
        Self::from_fn(horizon, n_states, n_a, n_b, |_, _, _, _| 0.0)
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.values[((h * self.n_states + s) * self.n_a + a) * self.n_b + b]
    }

    /// Row-major `(a, b)` matrix at `(h, s)`.
    #[inline]
    pub fn matrix(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.n_states + s) * self.n_a * self.n_b;
        &self.values[start..start + self.n_a * self.n_b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }
}

/// Transition factored into two independent per-player chains.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredTransition {
    pub p1: Kernel,
    pub p2: Kernel,
}

/// Transition driven by player 1's action only.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleControllerTransition {
    pub p: Kernel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transition {
    Factored(FactoredTransition),
    SingleController(SingleControllerTransition),
}

/// How the joint state space maps onto each player's policy index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateLayout {
    /// Both players condition on the joint state.
    Joint { n_states: usize },
    /// Player 1 conditions on `s1`, player 2 on `s2`; joint `s = s1 * n2 + s2`.
    Factored { n1: usize, n2: usize },
}

impl StateLayout {
    pub fn n_joint(self) -> usize {
        match self {
            Self::Joint { n_states } => n_states,
            Self::Factored { n1, n2 } => n1 * n2,
        }
    }

    pub fn p1_states(self) -> usize {
        match self {
            Self::Joint { n_states } => n_states,
            Self::Factored { n1, .. } => n1,
        }
    }

    pub fn p2_states(self) -> usize {
        match self {
            Self::Joint { n_states } => n_states,
            Self::Factored { n2, .. } => n2,
        }
    }

    #[inline]
    pub fn p1_index(self, s: usize) -> usize {
        match self {
            Self::Joint { .. } => s,
            Self::Factored { n2, .. } => s / n2,
        }
    }

    #[inline]
    pub fn p2_index(self, s: usize) -> usize {
        match self {
            Self::Joint { .. } => s,
            Self::Factored { n2, .. } => s % n2,
        }
    }

    #[inline]
    pub fn join(n2: usize, s1: usize, s2: usize) -> usize {
        s1 * n2 + s2
    }
}

/// A fully specified tabular zero-sum Markov game.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSumGame {
    horizon: usize,
    n_a: usize,
    n_b: usize,
    layout: StateLayout,
    reward: RewardTable,
    transition: Transition,
    initial_state: usize,
    reward_noise: f64,
    reference_value: Option<f64>,
}

impl ZeroSumGame {
    /// Validates sizes, reward range, noise support and transition rows.
    pub fn new(reward: RewardTable, transition: Transition, initial_state: usize, reward_noise: f64) -> Result<Self> {
        let horizon = reward.horizon;
        if horizon == 0 {
            return Err(Error::IndexMismatch("horizon must be at least 1".into()));
        }
        if reward.n_a == 0 || reward.n_b == 0 || reward.n_states == 0 {
            return Err(Error::IndexMismatch("state and action spaces must be nonempty".into()));
        }
        let layout = match &transition {
            Transition::SingleController(t) => {
                if t.p.n_actions != reward.n_a {
                    return Err(Error::IndexMismatch(format!(
                        "transition has {} actions, player 1 has {}",
                        t.p.n_actions, reward.n_a
                    )));
                }
                StateLayout::Joint { n_states: t.p.n_states }
            }
            Transition::Factored(t) => {
                if t.p1.n_actions != reward.n_a || t.p2.n_actions != reward.n_b {
                    return Err(Error::IndexMismatch(
                        "factored kernels disagree with action space sizes".into(),
                    ));
                }
                if t.p1.horizon != horizon || t.p2.horizon != horizon {
                    return Err(Error::IndexMismatch(
                        "factored kernels disagree with the horizon".into(),
                    ));
                }
                StateLayout::Factored {
                    n1: t.p1.n_states,
                    n2: t.p2.n_states,
                }
            }
        };
        if let Transition::SingleController(t) = &transition {
            if t.p.horizon != horizon {
                return Err(Error::IndexMismatch(
                    "transition horizon disagrees with reward horizon".into(),
                ));
            }
        }
        if layout.n_joint() != reward.n_states {
            return Err(Error::IndexMismatch(format!(
                "reward has {} states, transition implies {}",
                reward.n_states,
                layout.n_joint()
            )));
        }
        if initial_state >= reward.n_states {
            return Err(Error::IndexMismatch(format!(
                "initial state {initial_state} out of range"
            )));
        }
        if !(reward_noise.is_finite() && reward_noise >= 0.0) {
            return Err(Error::Config(format!(
                "reward noise half-width {reward_noise} must be finite and >= 0"
            )));
        }
        for (i, &r) in reward.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::RewardOutOfRange {
                    context: format!("flat index {i}"),
                    value: r,
                });
            }
            // observation support [r - w, r + w] must stay inside [0, 1]
            if r - reward_noise < -1e-12 || r + reward_noise > 1.0 + 1e-12 {
                return Err(Error::RewardOutOfRange {
                    context: format!("flat index {i} with noise half-width {reward_noise}"),
                    value: r,
                });
            }
        }
        Ok(Self {
            horizon,
            n_a: reward.n_a,
            n_b: reward.n_b,
            layout,
            reward,
            transition,
            initial_state,
            reward_noise,
            reference_value: None,
        })
    }

    /// Attaches a known equilibrium value, reported as `v_star` by the runner.
    pub fn with_reference_value(mut self, value: f64) -> Self {
        self.reference_value = Some(value);
        self
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_joint()
    }

    pub fn n_actions_p1(&self) -> usize {
        self.n_a
    }

    pub fn n_actions_p2(&self) -> usize {
        self.n_b
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn reward(&self) -> &RewardTable {
        &self.reward
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn reward_noise(&self) -> f64 {
        self.reward_noise
    }

    pub fn reference_value(&self) -> Option<f64> {
        self.reference_value
    }

    pub fn is_single_controller(&self) -> bool {
        matches!(self.transition, Transition::SingleController(_))
    }

    /// Initial state of player 1's component (the joint state for single-controller games).
    pub fn p1_initial(&self) -> usize {
        self.layout.p1_index(self.initial_state)
    }

    pub fn p2_initial(&self) -> usize {
        self.layout.p2_index(self.initial_state)
    }

    /// Next-state distribution over joint states from `(h, s, a, b)`.
    pub fn effective_joint_transition(&self, h: usize, s: usize, a: usize, b: usize) -> Vec<f64> {
        match &self.transition {
            Transition::SingleController(t) => t.p.row(h, s, a).to_vec(),
            Transition::Factored(t) => {
                let (s1, s2) = (self.layout.p1_index(s), self.layout.p2_index(s));
                let r1 = t.p1.row(h, s1, a);
                let r2 = t.p2.row(h, s2, b);
                r1.iter().flat_map(|p| r2.iter().map(move |q| p * q)).collect()
            }
        }
    }

    /// `<P_h(. | s, a, b), values>` over joint states, without materializing the joint row.
    pub fn expected_next(&self, h: usize, s: usize, a: usize, b: usize, values: &[f64]) -> f64 {
        match &self.transition {
            Transition::SingleController(t) => t.p.expect(h, s, a, values),
            Transition::Factored(t) => {
                let StateLayout::Factored { n2, .. } = self.layout else {
                    unreachable!()
                };
                let (s1, s2) = (s / n2, s % n2);
                factored_expect(t.p1.row(h, s1, a), t.p2.row(h, s2, b), values)
            }
        }
    }

    fn sample_next<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, b: usize, rng: &mut R) -> usize {
        match &self.transition {
            Transition::SingleController(t) => sample_index(t.p.row(h, s, a), rng),
            Transition::Factored(t) => {
                let StateLayout::Factored { n2, .. } = self.layout else {
                    unreachable!()
                };
                let s1 = sample_index(t.p1.row(h, s / n2, a), rng);
                let s2 = sample_index(t.p2.row(h, s % n2, b), rng);
                StateLayout::join(n2, s1, s2)
            }
        }
    }

    fn observe_reward<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, b: usize, rng: &mut R) -> f64 {
        let mean = self.reward.get(h, s, a, b);
        if self.reward_noise == 0.0 {
            return mean;
        }
        let u: f64 = rng.gen();
        (mean + self.reward_noise * (2.0 * u - 1.0)).clamp(0.0, 1.0)
    }
}

/// Two-stage contraction of a product kernel against joint values laid out as `[s1][s2]`.
#[inline]
pub(crate) fn factored_expect(row1: &[f64], row2: &[f64], values: &[f64]) -> f64 {
    let n2 = row2.len();
    row1.iter()
        .enumerate()
        .filter(|(_, p)| **p != 0.0)
        .map(|(s1, p)| {
            let inner: f64 = row2
                .iter()
                .zip(&values[s1 * n2..(s1 + 1) * n2])
                .map(|(q, v)| q * v)
                .sum();
            p * inner
        })
        .sum()
}

/// Markov policy `pi_h(action | state)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != horizon * n_states * n_actions {
            return Err(Error::IndexMismatch(format!(
                "policy buffer has {} entries, expected {}",
                probs.len(),
                horizon * n_states * n_actions
            )));
        }
        let policy = Self::from_raw(horizon, n_states, n_actions, probs);
        for h in 0..horizon {
            for s in 0..n_states {
                check_distribution(policy.dist(h, s), || format!("policy (h={h}, s={s})"))?;
            }
        }
        Ok(policy)
    }

    pub(crate) fn from_raw(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), horizon * n_states * n_actions);
        Self {
            horizon,
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self::from_raw(horizon, n_states, n_actions, vec![p; horizon * n_states * n_actions])
    }

    /// Point mass on `choose(h, s)` everywhere.
    pub fn deterministic(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut choose: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![0.0; horizon * n_states * n_actions];
        for h in 0..horizon {
            for s in 0..n_states {
                let a = choose(h, s);
                assert!(a < n_actions, "action {a} out of range");
                probs[(h * n_states + s) * n_actions + a] = 1.0;
            }
        }
        Self::from_raw(horizon, n_states, n_actions, probs)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.n_states + s) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        sample_index(self.dist(h, s), rng)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action_a: usize,
    pub action_b: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

fn check_policy_shape(game: &ZeroSumGame, mu: &Policy, nu: &Policy) {
    let layout = game.layout();
    assert_eq!(mu.horizon, game.horizon, "player 1 policy horizon");
    assert_eq!(nu.horizon, game.horizon, "player 2 policy horizon");
    assert_eq!(mu.n_states, layout.p1_states(), "player 1 policy state space");
    assert_eq!(nu.n_states, layout.p2_states(), "player 2 policy state space");
    assert_eq!(mu.n_actions, game.n_a, "player 1 action space");
    assert_eq!(nu.n_actions, game.n_b, "player 2 action space");
}

/// Plays one episode with simultaneous moves and bandit reward feedback.
///
/// Panics if a policy does not match the game's spaces.
pub fn sample_episode<R: Rng + ?Sized>(game: &ZeroSumGame, mu: &Policy, nu: &Policy, rng: &mut R) -> Trajectory {
    check_policy_shape(game, mu, nu);
    let layout = game.layout();
    let mut state = game.initial_state;
    let mut steps = Vec::with_capacity(game.horizon);
    for h in 0..game.horizon {
        let a = mu.sample(h, layout.p1_index(state), rng);
        let b = nu.sample(h, layout.p2_index(state), rng);
        let reward = game.observe_reward(h, state, a, b, rng);
        let next_state = game.sample_next(h, state, a, b, rng);
        steps.push(Step {
            state,
            action_a: a,
            action_b: b,
            reward,
            next_state,
        });
        state = next_state;
    }
    Trajectory { steps }
}

type Tensor4 = Vec<Vec<Vec<Vec<f64>>>>;

fn default_noise() -> f64 {
    0.1
}

/// JSON document describing a game. Tensors are nested arrays indexed
/// `reward[h][s][a][b]` and `p[h][s][action][s']`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub horizon: usize,
    pub num_actions_p1: usize,
    pub num_actions_p2: usize,
    pub reward: Tensor4,
    pub transition: TransitionSpec,
    pub initial_state: InitialState,
    #[serde(default = "default_noise")]
    pub reward_noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionSpec {
    SingleController { p: Tensor4 },
    Factored { p1: Tensor4, p2: Tensor4 },
}

/// Joint index for single-controller games, `[s1, s2]` for factored ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Joint(usize),
    Pair([usize; 2]),
}

/// Validates a [`GameSpec`] into a [`ZeroSumGame`].
pub fn build_game(spec: &GameSpec) -> Result<ZeroSumGame> {
    let horizon = spec.horizon;
    if horizon == 0 || spec.reward.len() != horizon {
        return Err(Error::IndexMismatch(format!(
            "reward tensor has {} steps, horizon is {horizon}",
            spec.reward.len()
        )));
    }
    let n_states = spec.reward[0].len();
    let (n_a, n_b) = (spec.num_actions_p1, spec.num_actions_p2);
    for (h, by_state) in spec.reward.iter().enumerate() {
        if by_state.len() != n_states {
            return Err(Error::IndexMismatch(format!(
                "reward step {h} has {} states",
                by_state.len()
            )));
        }
        for (s, m) in by_state.iter().enumerate() {
            if m.len() != n_a || m.iter().any(|row| row.len() != n_b) {
                return Err(Error::IndexMismatch(format!(
                    "reward matrix at (h={h}, s={s}) is not {n_a}x{n_b}"
                )));
            }
        }
    }
    let reward = RewardTable::from_fn(horizon, n_states, n_a, n_b, |h, s, a, b| spec.reward[h][s][a][b]);
    let transition = match &spec.transition {
        TransitionSpec::SingleController { p } => Transition::SingleController(SingleControllerTransition {
            p: Kernel::from_nested(p, "transition p")?,
        }),
        TransitionSpec::Factored { p1, p2 } => Transition::Factored(FactoredTransition {
            p1: Kernel::from_nested(p1, "transition p1")?,
            p2: Kernel::from_nested(p2, "transition p2")?,
        }),
    };
    let initial = match (&transition, spec.initial_state) {
        (Transition::SingleController(_), InitialState::Joint(s)) => s,
        (Transition::Factored(t), InitialState::Pair([s1, s2])) => {
            if s1 >= t.p1.n_states || s2 >= t.p2.n_states {
                return Err(Error::IndexMismatch(format!("initial pair ({s1}, {s2}) out of range")));
            }
            StateLayout::join(t.p2.n_states, s1, s2)
        }
        (Transition::SingleController(_), InitialState::Pair(_)) => {
            return Err(Error::IndexMismatch(
                "single-controller games take a scalar initial state".into(),
            ))
        }
        (Transition::Factored(_), InitialState::Joint(_)) => {
            return Err(Error::IndexMismatch(
                "factored games take an [s1, s2] initial state".into(),
            ))
        }
    };
    let game = ZeroSumGame::new(reward, transition, initial, spec.reward_noise)?;
    Ok(match spec.reference_value {
        Some(v) => game.with_reference_value(v),
        None => game,
    })
}

impl ZeroSumGame {
    pub fn to_spec(&self) -> GameSpec {
        let reward = (0..self.horizon)
            .map(|h| {
                (0..self.n_states())
                    .map(|s| {
                        (0..self.n_a)
                            .map(|a| (0..self.n_b).map(|b| self.reward.get(h, s, a, b)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let (transition, initial_state) = match &self.transition {
            Transition::SingleController(t) => (
                TransitionSpec::SingleController { p: t.p.to_nested() },
                InitialState::Joint(self.initial_state),
            ),
            Transition::Factored(t) => (
                TransitionSpec::Factored {
                    p1: t.p1.to_nested(),
                    p2: t.p2.to_nested(),
                },
                InitialState::Pair([self.p1_initial(), self.p2_initial()]),
            ),
        };
        GameSpec {
            horizon: self.horizon,
            num_actions_p1: self.n_a,
            num_actions_p2: self.n_b,
            reward,
            transition,
            initial_state,
            reward_noise: self.reward_noise,
            reference_value: self.reference_value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_state_sc(horizon: usize, reward: f64, noise: f64) -> ZeroSumGame {
        let r = RewardTable::from_fn(horizon, 1, 2, 2, |_, _, _, _| reward);
        let p = Kernel::identity(horizon, 1, 2);
        ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            noise,
        )
        .unwrap()
    }

    #[test]
    fn reward_out_of_range_is_rejected() {
        let r = RewardTable::from_fn(1, 1, 2, 2, |_, _, a, b| if a == 1 && b == 1 { 1.3 } else { 0.5 });
        let p = Kernel::identity(1, 1, 2);
        let err = ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.0,
        );
        assert!(matches!(err, Err(Error::RewardOutOfRange { .. })));
    }

    #[test]
    fn noise_support_must_stay_in_unit_interval() {
        let r = RewardTable::from_fn(1, 1, 2, 2, |_, _, _, _| 0.05);
        let p = Kernel::identity(1, 1, 2);
        let err = ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.1,
        );
        assert!(matches!(err, Err(Error::RewardOutOfRange { .. })));
    }

    #[test]
    fn short_row_is_invalid_distribution() {
        let err = Kernel::new(1, 2, 1, vec![0.5, 0.4, 0.0, 1.0]);
        assert!(matches!(err, Err(Error::InvalidDistribution { .. })));
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let r = RewardTable::zeros(2, 3, 2, 2);
        let p = Kernel::identity(2, 2, 2);
        let err = ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.0,
        );
        assert!(matches!(err, Err(Error::IndexMismatch(_))));
    }

    #[test]
    fn factored_point_masses_multiply() {
        let p1 = Kernel::new(1, 2, 1, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let p2 = Kernel::new(1, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = RewardTable::zeros(1, 4, 1, 1);
        let g = ZeroSumGame::new(r, Transition::Factored(FactoredTransition { p1, p2 }), 0, 0.0).unwrap();
        // joint (s1 = 0, s2 = 1) encodes to 0 * 2 + 1
        assert_eq!(g.effective_joint_transition(0, 0, 0, 0), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn factored_outer_product() {
        let p1 = Kernel::new(1, 2, 1, vec![0.7, 0.3, 0.7, 0.3]).unwrap();
        let p2 = Kernel::new(1, 2, 1, vec![0.4, 0.6, 0.4, 0.6]).unwrap();
        let r = RewardTable::zeros(1, 4, 1, 1);
        let g = ZeroSumGame::new(r, Transition::Factored(FactoredTransition { p1, p2 }), 0, 0.0).unwrap();
        let joint = g.effective_joint_transition(0, 0, 0, 0);
        for (got, want) in joint.iter().zip([0.28, 0.42, 0.12, 0.18]) {
            assert!((got - want).abs() < 1e-12);
        }
        let values = [1.0, 2.0, 3.0, 4.0];
        let direct: f64 = joint.iter().zip(values).map(|(p, v)| p * v).sum();
        assert!((g.expected_next(0, 0, 0, 0, &values) - direct).abs() < 1e-12);
    }

    #[test]
    fn single_controller_ignores_player_two() {
        let p = Kernel::new(1, 2, 2, vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9]).unwrap();
        let r = RewardTable::zeros(1, 2, 2, 3);
        let g = ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.0,
        )
        .unwrap();
        assert_eq!(
            g.effective_joint_transition(0, 1, 1, 0),
            g.effective_joint_transition(0, 1, 1, 2)
        );
    }

    #[test]
    fn noiseless_deterministic_episode_is_fully_determined() {
        let g = one_state_sc(3, 0.4, 0.0);
        let mu = Policy::deterministic(3, 1, 2, |_, _| 1);
        let nu = Policy::deterministic(3, 1, 2, |_, _| 0);
        let traj = sample_episode(&g, &mu, &nu, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(traj.steps.len(), 3);
        for step in &traj.steps {
            assert_eq!(
                (step.state, step.action_a, step.action_b, step.next_state),
                (0, 1, 0, 0)
            );
            assert_eq!(step.reward, 0.4);
        }
    }

    #[test]
    fn fixed_seed_reproduces_episode() {
        let g = crate::envs::chain_env();
        let mu = Policy::uniform(7, 7, 2);
        let nu = Policy::uniform(7, 7, 2);
        let a = sample_episode(&g, &mu, &nu, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_episode(&g, &mu, &nu, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        for w in a.steps.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
    }

    #[test]
    fn spec_round_trip_preserves_game() {
        let g = crate::envs::random_factored(2, 3, 2, 2, 3, 0.1, 11);
        let spec = g.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back = build_game(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn initial_state_shape_must_match_transition() {
        let mut spec = crate::envs::chain_env().to_spec();
        spec.initial_state = InitialState::Pair([0, 0]);
        assert!(matches!(build_game(&spec), Err(Error::IndexMismatch(_))));
    }
}
