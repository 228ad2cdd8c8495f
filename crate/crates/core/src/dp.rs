//! Exact dynamic programming under the true model: policy-pair evaluation,
//! state-reaching probabilities and best policies in hindsight.
//!
//! The hindsight oracles exploit the transition structure. In a
//! single-controller game the state process depends only on player 1, so
//! against a fixed history of player-2 policies player 1 faces one MDP whose
//! reward is the history-summed expected reward, and player 2's objective is
//! linear in `nu_h(.|s)` with per-state weights that do not depend on `nu`.
//! In a factored game the two state components evolve independently, so each
//! player's reaching probabilities are fixed by its own policy and the
//! opponent's marginal enters only through a summed effective reward.

use crate::error::{Error, Result};
use crate::game::{check_distribution, Kernel, Policy, StateLayout, Transition, ZeroSumGame};

/// `V_h(s)` for `h in 0..=H` and `Q_h(s, a, b)` for `h in 0..H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    n_states: usize,
    n_a: usize,
    n_b: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub(crate) fn zeros(horizon: usize, n_states: usize, n_a: usize, n_b: usize) -> Self {
        Self {
            horizon,
            n_states,
            n_a,
            n_b,
            v: vec![0.0; (horizon + 1) * n_states],
            q: vec![0.0; horizon * n_states * n_a * n_b],
        }
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

    #[inline]
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.n_states + s]
    }

    /// All `V_h(.)` at step `h` (`h == horizon` gives the terminal zeros).
    #[inline]
    pub fn values_at(&self, h: usize) -> &[f64] {
        &self.v[h * self.n_states..(h + 1) * self.n_states]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.q[((h * self.n_states + s) * self.n_a + a) * self.n_b + b]
    }

    /// Row-major `(a, b)` matrix `Q_h(s, ., .)`.
    #[inline]
    pub fn q_matrix(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.n_states + s) * self.n_a * self.n_b;
        &self.q[start..start + self.n_a * self.n_b]
    }

    pub(crate) fn q_matrix_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = (h * self.n_states + s) * self.n_a * self.n_b;
        &mut self.q[start..start + self.n_a * self.n_b]
    }

    pub(crate) fn set_value(&mut self, h: usize, s: usize, v: f64) {
        self.v[h * self.n_states + s] = v;
    }
}

/// `mu^T M nu` for a row-major `(a, b)` matrix.
#[inline]
pub fn bilinear(mu: &[f64], matrix: &[f64], nu: &[f64]) -> f64 {
    let n_b = nu.len();
    mu.iter()
        .enumerate()
        .map(|(a, pa)| {
            pa * matrix[a * n_b..(a + 1) * n_b]
                .iter()
                .zip(nu)
                .map(|(q, pb)| q * pb)
                .sum::<f64>()
        })
        .sum()
}

/// Exact Bellman evaluation of `(mu, nu)` by backward recursion.
pub fn evaluate_pair(game: &ZeroSumGame, mu: &Policy, nu: &Policy) -> ValueTable {
    let (horizon, n_states, n_a, n_b) = (
        game.horizon(),
        game.n_states(),
        game.n_actions_p1(),
        game.n_actions_p2(),
    );
    let layout = game.layout();
    let mut table = ValueTable::zeros(horizon, n_states, n_a, n_b);
    for h in (0..horizon).rev() {
        let next = table.values_at(h + 1).to_vec();
        for s in 0..n_states {
            let reward = game.reward().matrix(h, s);
            let q = table.q_matrix_mut(h, s);
            for a in 0..n_a {
                for b in 0..n_b {
                    q[a * n_b + b] = reward[a * n_b + b] + game.expected_next(h, s, a, b, &next);
                }
            }
            let v = bilinear(
                mu.dist(h, layout.p1_index(s)),
                table.q_matrix(h, s),
                nu.dist(h, layout.p2_index(s)),
            );
            table.set_value(h, s, v);
        }
    }
    table
}

/// State-reaching probabilities `d_h(.)` for `h in 0..H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachingDistribution {
    horizon: usize,
    n_states: usize,
    d: Vec<f64>,
}

impl ReachingDistribution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn at(&self, h: usize) -> &[f64] {
        &self.d[h * self.n_states..(h + 1) * self.n_states]
    }

    /// Builds a distribution from one validated row per step.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.first().map_or(0, Vec::len);
        let mut d = Vec::with_capacity(rows.len() * n_states);
        for (h, row) in rows.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::IndexMismatch(format!(
                    "reaching row {h} has {} states, expected {n_states}",
                    row.len()
                )));
            }
            check_distribution(row, || format!("reaching distribution at step {h}"))?;
            d.extend_from_slice(row);
        }
        Ok(Self {
            horizon: rows.len(),
            n_states,
            d,
        })
    }

    /// A point mass at `state` for every step; used where a component is trivial.
    pub fn point_mass(horizon: usize, n_states: usize, state: usize) -> Self {
        let mut d = vec![0.0; horizon * n_states];
        for h in 0..horizon {
            d[h * n_states + state] = 1.0;
        }
        Self { horizon, n_states, d }
    }

    /// `sum_h sum_s |self_h(s) - other_h(s)|`
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.d.iter().zip(&other.d).map(|(x, y)| (x - y).abs()).sum()
    }
}

/// Forward recursion `d_h(s') = sum_s sum_a d_{h-1}(s) pi_{h-1}(a|s) P_{h-1}(s'|s,a)`.
pub(crate) fn forward_reaching(kernel: &Kernel, policy: &Policy, initial: usize) -> ReachingDistribution {
    let (horizon, n_states) = (kernel.horizon(), kernel.n_states());
    assert_eq!(policy.n_states(), n_states, "policy and kernel state spaces differ");
    assert_eq!(
        policy.n_actions(),
        kernel.n_actions(),
        "policy and kernel action spaces differ"
    );
    assert!(initial < n_states, "initial state out of range");
    let mut d = vec![0.0; horizon * n_states];
    d[initial] = 1.0;
    for h in 1..horizon {
        let (prev, rest) = d.split_at_mut(h * n_states);
        let prev = &prev[(h - 1) * n_states..];
        let cur = &mut rest[..n_states];
        for (s, &mass) in prev.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.dist(h - 1, s).iter().enumerate() {
                let w = mass * pa;
                if w == 0.0 {
                    continue;
                }
                for (next, p) in cur.iter_mut().zip(kernel.row(h - 1, s, a)) {
                    *next += w * p;
                }
            }
        }
    }
    ReachingDistribution { horizon, n_states, d }
}

/// Exact reaching probabilities of `policy` under the true per-player `kernel`.
pub fn exact_reaching(kernel: &Kernel, policy: &Policy, initial: usize) -> ReachingDistribution {
    forward_reaching(kernel, policy, initial)
}

/// Player 1's true kernel: `P` for single-controller games, `P1` for factored ones.
pub fn p1_kernel(game: &ZeroSumGame) -> &Kernel {
    match game.transition() {
        Transition::SingleController(t) => &t.p,
        Transition::Factored(t) => &t.p1,
    }
}

/// Exact reaching probabilities of player 1 in its own state space.
pub fn p1_reaching(game: &ZeroSumGame, mu: &Policy) -> ReachingDistribution {
    exact_reaching(p1_kernel(game), mu, game.p1_initial())
}

/// Exact reaching probabilities of player 2's component in a factored game.
pub fn p2_reaching(game: &ZeroSumGame, nu: &Policy) -> Option<ReachingDistribution> {
    match game.transition() {
        Transition::Factored(t) => Some(exact_reaching(&t.p2, nu, game.p2_initial())),
        Transition::SingleController(_) => None,
    }
}

/// Best player-1 response to a growing history of player-2 policies.
///
/// Keeps the history-summed effective reward `R_h(x, a)` over player 1's own
/// state space, so each `solve` is one backward pass.
#[derive(Clone, Debug)]
pub struct HindsightP1 {
    horizon: usize,
    n_own: usize,
    n_a: usize,
    effective: Vec<f64>,
    episodes: usize,
}

/// Best player-2 response to a growing history of player-1 policies.
#[derive(Clone, Debug)]
pub struct HindsightP2 {
    horizon: usize,
    n_own: usize,
    n_b: usize,
    effective: Vec<f64>,
    episodes: usize,
}

impl HindsightP1 {
    pub fn new(game: &ZeroSumGame) -> Self {
        let n_own = game.layout().p1_states();
        Self {
            horizon: game.horizon(),
            n_own,
            n_a: game.n_actions_p1(),
            effective: vec![0.0; game.horizon() * n_own * game.n_actions_p1()],
            episodes: 0,
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn push(&mut self, game: &ZeroSumGame, nu: &Policy) {
        let (n_a, n_b) = (game.n_actions_p1(), game.n_actions_p2());
        match game.layout() {
            StateLayout::Joint { n_states } => {
                for h in 0..self.horizon {
                    for s in 0..n_states {
                        let nu_s = nu.dist(h, s);
                        let m = game.reward().matrix(h, s);
                        for a in 0..n_a {
                            let r: f64 = (0..n_b).map(|b| nu_s[b] * m[a * n_b + b]).sum();
                            self.effective[(h * n_states + s) * n_a + a] += r;
                        }
                    }
                }
            }
            StateLayout::Factored { n1, n2 } => {
                let q2 = p2_reaching(game, nu).expect("factored game");
                for h in 0..self.horizon {
                    for s1 in 0..n1 {
                        for a in 0..n_a {
                            let mut r = 0.0;
                            for (s2, &w) in q2.at(h).iter().enumerate() {
                                if w == 0.0 {
                                    continue;
                                }
                                let m = game.reward().matrix(h, StateLayout::join(n2, s1, s2));
                                let nu_s = nu.dist(h, s2);
                                r += w * (0..n_b).map(|b| nu_s[b] * m[a * n_b + b]).sum::<f64>();
                            }
                            self.effective[(h * n1 + s1) * n_a + a] += r;
                        }
                    }
                }
            }
        }
        self.episodes += 1;
    }

    /// Deterministic maximizer (lowest-index ties) and `sum_k V_1^{mu*, nu^k}`.
    pub fn solve(&self, game: &ZeroSumGame) -> (Policy, f64) {
        let kernel = p1_kernel(game);
        let (choice, w) = backward_dp(self.horizon, self.n_own, self.n_a, &self.effective, kernel, true);
        let policy = Policy::deterministic(self.horizon, self.n_own, self.n_a, |h, s| choice[h * self.n_own + s]);
        (policy, w[game.p1_initial()])
    }
}

impl HindsightP2 {
    pub fn new(game: &ZeroSumGame) -> Self {
        let n_own = game.layout().p2_states();
        Self {
            horizon: game.horizon(),
            n_own,
            n_b: game.n_actions_p2(),
            effective: vec![0.0; game.horizon() * n_own * game.n_actions_p2()],
            episodes: 0,
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn push(&mut self, game: &ZeroSumGame, mu: &Policy) {
        let (n_a, n_b) = (game.n_actions_p1(), game.n_actions_p2());
        let layout = game.layout();
        // player 1's reaching probabilities are fixed by mu in both structures
        let q1 = p1_reaching(game, mu);
        match layout {
            StateLayout::Joint { n_states } => {
                for h in 0..self.horizon {
                    for (s, &w) in q1.at(h).iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let mu_s = mu.dist(h, s);
                        let m = game.reward().matrix(h, s);
                        for b in 0..n_b {
                            let r: f64 = (0..n_a).map(|a| mu_s[a] * m[a * n_b + b]).sum();
                            self.effective[(h * n_states + s) * n_b + b] += w * r;
                        }
                    }
                }
            }
            StateLayout::Factored { n2, .. } => {
                for h in 0..self.horizon {
                    for s2 in 0..n2 {
                        for b in 0..n_b {
                            let mut r = 0.0;
                            for (s1, &w) in q1.at(h).iter().enumerate() {
                                if w == 0.0 {
                                    continue;
                                }
                                let m = game.reward().matrix(h, StateLayout::join(n2, s1, s2));
                                let mu_s = mu.dist(h, s1);
                                r += w * (0..n_a).map(|a| mu_s[a] * m[a * n_b + b]).sum::<f64>();
                            }
                            self.effective[(h * n2 + s2) * n_b + b] += r;
                        }
                    }
                }
            }
        }
        self.episodes += 1;
    }

    /// Deterministic minimizer (lowest-index ties) and `sum_k V_1^{mu^k, nu*}`.
    pub fn solve(&self, game: &ZeroSumGame) -> (Policy, f64) {
        match game.transition() {
            Transition::SingleController(_) => {
                // the objective is separable over (h, s): no dynamics to plan through
                let mut total = 0.0;
                let mut choice = vec![0; self.horizon * self.n_own];
                for (cell, slot) in choice.iter_mut().enumerate() {
                    let row = &self.effective[cell * self.n_b..(cell + 1) * self.n_b];
                    let (b, v) = arg_best(row, false);
                    *slot = b;
                    total += v;
                }
                let policy =
                    Policy::deterministic(self.horizon, self.n_own, self.n_b, |h, s| choice[h * self.n_own + s]);
                (policy, total)
            }
            Transition::Factored(t) => {
                let (choice, w) = backward_dp(self.horizon, self.n_own, self.n_b, &self.effective, &t.p2, false);
                let policy =
                    Policy::deterministic(self.horizon, self.n_own, self.n_b, |h, s| choice[h * self.n_own + s]);
                (policy, w[game.p2_initial()])
            }
        }
    }
}

/// Index and value of the max (or min) entry, ties to the lowest index.
fn arg_best(row: &[f64], maximize: bool) -> (usize, f64) {
    let mut best = (0, row[0]);
    for (i, &v) in row.iter().enumerate().skip(1) {
        if (maximize && v > best.1) || (!maximize && v < best.1) {
            best = (i, v);
        }
    }
    best
}

/// Greedy backward DP on an MDP with per-step rewards `effective[h][x][act]`.
/// Returns the chosen action per `(h, x)` and the step-0 values.
fn backward_dp(
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    effective: &[f64],
    kernel: &Kernel,
    maximize: bool,
) -> (Vec<usize>, Vec<f64>) {
    let mut next = vec![0.0; n_states];
    let mut choice = vec![0; horizon * n_states];
    let mut row = vec![0.0; n_actions];
    for h in (0..horizon).rev() {
        let mut cur = vec![0.0; n_states];
        for x in 0..n_states {
            for (act, slot) in row.iter_mut().enumerate() {
                *slot = effective[(h * n_states + x) * n_actions + act] + kernel.expect(h, x, act, &next);
            }
            let (act, v) = arg_best(&row, maximize);
            choice[h * n_states + x] = act;
            cur[x] = v;
        }
        next = cur;
    }
    (choice, next)
}

/// Exact maximizer of `sum_k V_1^{mu, nu^k}` over Markov policies.
pub fn hindsight_best_p1(game: &ZeroSumGame, history: &[Policy]) -> Result<(Policy, f64)> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut acc = HindsightP1::new(game);
    for nu in history {
        acc.push(game, nu);
    }
    Ok(acc.solve(game))
}

/// Exact minimizer of `sum_k V_1^{mu^k, nu}` over Markov policies.
pub fn hindsight_best_p2(game: &ZeroSumGame, history: &[Policy]) -> Result<(Policy, f64)> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut acc = HindsightP2::new(game);
    for mu in history {
        acc.push(game, mu);
    }
    Ok(acc.solve(game))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_env, chain_equilibrium, random_factored, random_single_controller};
    use crate::game::{RewardTable, SingleControllerTransition};

    fn matrix_game(m: [[f64; 2]; 2]) -> ZeroSumGame {
        let r = RewardTable::from_fn(1, 1, 2, 2, |_, _, a, b| m[a][b]);
        let p = Kernel::identity(1, 1, 2);
        ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let g = random_single_controller(3, 2, 2, 3, 0.0, 1);
        let r = RewardTable::zeros(3, 3, 2, 2);
        let g = ZeroSumGame::new(r, g.transition().clone(), 0, 0.0).unwrap();
        let t = evaluate_pair(&g, &Policy::uniform(3, 3, 2), &Policy::uniform(3, 3, 2));
        for h in 0..=3 {
            assert!(t.values_at(h).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn chain_equilibrium_value() {
        let g = chain_env();
        let (mu, nu) = chain_equilibrium();
        assert!((evaluate_pair(&g, &mu, &nu).value(0, 0) - 0.8594323).abs() < 1e-6);
    }

    #[test]
    fn single_state_bilinear_form() {
        let g = matrix_game([[0.9, 0.2], [0.6, 0.4]]);
        let mu = Policy::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let nu = Policy::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert!((evaluate_pair(&g, &mu, &nu).value(0, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn value_table_invariants() {
        let g = random_factored(2, 2, 2, 2, 3, 0.1, 4);
        let mu = Policy::uniform(3, 2, 2);
        let nu = Policy::new(
            3,
            2,
            2,
            vec![0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.9, 0.1, 0.2, 0.8, 0.1, 0.9],
        )
        .unwrap();
        let t = evaluate_pair(&g, &mu, &nu);
        assert!(t.values_at(3).iter().all(|&v| v == 0.0));
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..2 {
                    for b in 0..2 {
                        let q = t.q(h, s, a, b);
                        assert!((0.0..=(3 - h) as f64).contains(&q));
                    }
                }
                let v = bilinear(mu.dist(h, s / 2), t.q_matrix(h, s), nu.dist(h, s % 2));
                assert!((t.value(h, s) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reaching_one_step_by_hand() {
        let k = Kernel::new(2, 2, 1, vec![0.7, 0.3, 0.2, 0.8, 0.7, 0.3, 0.2, 0.8]).unwrap();
        let d = exact_reaching(&k, &Policy::uniform(2, 2, 1), 0);
        assert_eq!(d.at(0), &[1.0, 0.0]);
        assert!((d.at(1)[0] - 0.7).abs() < 1e-15 && (d.at(1)[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn identity_kernel_is_a_fixed_point() {
        let k = Kernel::identity(5, 3, 2);
        let d = exact_reaching(&k, &Policy::uniform(5, 3, 2), 2);
        for h in 0..5 {
            assert_eq!(d.at(h), &[0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        let g = chain_env();
        assert!(matches!(hindsight_best_p1(&g, &[]), Err(Error::EmptyHistory)));
        assert!(matches!(hindsight_best_p2(&g, &[]), Err(Error::EmptyHistory)));
    }

    #[test]
    fn chain_hindsight_recovers_equilibrium() {
        let g = chain_env();
        let (mu_star, nu_star) = chain_equilibrium();
        let k = 4;
        let (best_mu, total) = hindsight_best_p1(&g, &vec![nu_star.clone(); k]).unwrap();
        // only s == h can still reach the top by the last step; elsewhere both actions tie
        for h in 0..7 {
            assert_eq!(best_mu.dist(h, h), &[0.0, 1.0], "h={h}");
        }
        assert!((total - k as f64 * 0.8594323).abs() < k as f64 * 1e-6);

        let (best_nu, total) = hindsight_best_p2(&g, &vec![mu_star; k]).unwrap();
        assert_eq!(best_nu.dist(6, 6), &[0.0, 1.0]);
        assert!((total - k as f64 * 0.8594323).abs() < k as f64 * 1e-6);
    }

    #[test]
    fn action_independent_game_is_indifferent() {
        let base = random_single_controller(2, 2, 2, 3, 0.0, 8);
        let Transition::SingleController(t) = base.transition() else {
            unreachable!()
        };
        let p = Kernel::from_fn(3, 2, 2, |h, s, _| t.p.row(h, s, 0).to_vec()).unwrap();
        let r = RewardTable::from_fn(3, 2, 2, 2, |h, s, _, b| base.reward().get(h, s, 0, b));
        let g = ZeroSumGame::new(
            r,
            Transition::SingleController(SingleControllerTransition { p }),
            0,
            0.0,
        )
        .unwrap();
        let history = vec![Policy::uniform(3, 2, 2), Policy::deterministic(3, 2, 2, |h, _| h % 2)];
        let (_, total) = hindsight_best_p1(&g, &history).unwrap();
        let uniform: f64 = history
            .iter()
            .map(|nu| evaluate_pair(&g, &Policy::uniform(3, 2, 2), nu).value(0, 0))
            .sum();
        assert!((total - uniform).abs() < 1e-12);
    }
}
