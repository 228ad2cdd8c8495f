//! Optimistic fictitious-play policy optimization: one episode of policy
//! evaluation and mirror-step policy improvement for each player.
//!
//! Four pipelines are provided, selected by [`Role`]:
//!
//! * factored player 1: optimistic backup, then a mirror ascent step on the
//!   Q-function averaged over player 2's empirical reaching probabilities;
//! * factored player 2: pessimistic backup (bonus subtracted), then the
//!   symmetric mirror descent step;
//! * single-controller player 1: optimistic backup, then a mirror ascent step
//!   on `<Q(s, a, .), nu(.|s)>`;
//! * single-controller player 2: no value backup and no transition bonus; a
//!   mirror descent step on the lower-confidence reward weighted by player
//!   1's empirical reaching probabilities.
//!
//! Policies are advanced in log space. Repeated exponential updates drive
//! dominated actions far below the smallest positive `f64`, so the
//! probability view ([`LogPolicy::to_policy`]) can round such entries to 0
//! even though the log weights stay finite.

use crate::dp::{bilinear, ReachingDistribution, ValueTable};
use crate::error::{Error, Result};
use crate::estimation::{EmpiricalModel, Side};
use crate::game::{factored_expect, Policy, RewardTable, StateLayout};
use crate::reaching::model_reaching;

/// Whether the exploration bonus is added (maximizer) or subtracted (minimizer).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BonusSign {
    Plus,
    Minus,
}

impl BonusSign {
    fn factor(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

/// Upper (or lower) confidence Q/V tables built from an empirical model.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimisticEval {
    layout: StateLayout,
    sign: BonusSign,
    table: ValueTable,
}

impl OptimisticEval {
    pub fn sign(&self) -> BonusSign {
        self.sign
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon()
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn q(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.table.q(h, s, a, b)
    }

    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.table.value(h, s)
    }
}

/// `max(min(x, cap), 0)`
#[inline]
pub fn clip_q(x: f64, cap: f64) -> f64 {
    x.min(cap).max(0.0)
}

/// Backward sweep `Q_h = clip(r_hat + P_hat V_{h+1} +/- bonus, H - h)` (zero-based `h`)
/// followed by `V_h(s) = mu^T Q_h(s) nu`.
///
/// Before the first observed episode all bonuses are zero, matching the
/// algorithms' initialization.
pub fn optimistic_backup(
    model: &EmpiricalModel,
    mu_prev: &Policy,
    nu_prev: &Policy,
    sign: BonusSign,
) -> OptimisticEval {
    let bonus_scale = if model.episodes() == 0 { 0.0 } else { sign.factor() };
    backup_with(model, mu_prev, nu_prev, sign, |h, s, a, b| {
        bonus_scale * model.total_bonus(h, s, a, b)
    })
}

fn backup_with(
    model: &EmpiricalModel,
    mu_prev: &Policy,
    nu_prev: &Policy,
    sign: BonusSign,
    bonus: impl Fn(usize, usize, usize, usize) -> f64,
) -> OptimisticEval {
    let layout = model.layout();
    let (horizon, n_a, n_b) = (model.horizon(), model.n_actions_p1(), model.n_actions_p2());
    let n = layout.n_joint();
    let mut table = ValueTable::zeros(horizon, n, n_a, n_b);
    let k1 = model.estimated_kernel(Side::P1);
    let k2 = model.is_factored().then(|| model.estimated_kernel(Side::P2));
    let mut next_by_sab = vec![0.0; n * n_a * n_b];
    for h in (0..horizon).rev() {
        let next = table.values_at(h + 1).to_vec();
        match (&k2, layout) {
            (None, _) => {
                for s in 0..n {
                    for a in 0..n_a {
                        let pv = k1.expect(h, s, a, &next);
                        next_by_sab[(s * n_a + a) * n_b..(s * n_a + a + 1) * n_b].fill(pv);
                    }
                }
            }
            (Some(k2), StateLayout::Factored { n1, n2 }) => {
                for s1 in 0..n1 {
                    for s2 in 0..n2 {
                        let s = StateLayout::join(n2, s1, s2);
                        for a in 0..n_a {
                            for b in 0..n_b {
                                next_by_sab[(s * n_a + a) * n_b + b] =
                                    factored_expect(k1.row(h, s1, a), k2.row(h, s2, b), &next);
                            }
                        }
                    }
                }
            }
            (Some(_), StateLayout::Joint { .. }) => unreachable!("joint layout has a single kernel"),
        }
        let cap = (horizon - h) as f64;
        for s in 0..n {
            let q = table.q_matrix_mut(h, s);
            for a in 0..n_a {
                for b in 0..n_b {
                    let raw =
                        model.empirical_reward(h, s, a, b) + next_by_sab[(s * n_a + a) * n_b + b] + bonus(h, s, a, b);
                    q[a * n_b + b] = clip_q(raw, cap);
                }
            }
            let v = bilinear(
                mu_prev.dist(h, layout.p1_index(s)),
                table.q_matrix(h, s),
                nu_prev.dist(h, layout.p2_index(s)),
            );
            table.set_value(h, s, v);
        }
    }
    OptimisticEval { layout, sign, table }
}

/// Per-step, per-own-state weights over the player's own actions.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorDirection {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    weights: Vec<f64>,
}

impl MirrorDirection {
    pub fn from_fn(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut weights = Vec::with_capacity(horizon * n_states * n_actions);
        for h in 0..horizon {
            for x in 0..n_states {
                for act in 0..n_actions {
                    weights.push(f(h, x, act));
                }
            }
        }
        Self {
            horizon,
            n_states,
            n_actions,
            weights,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn row(&self, h: usize, x: usize) -> &[f64] {
        let start = (h * self.n_states + x) * self.n_actions;
        &self.weights[start..start + self.n_actions]
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// `dir_h(s, a) = sum_b Q_h(s, a, b) nu_h(b | s)`
pub fn ascent_direction_sc(eval: &OptimisticEval, nu_prev: &Policy) -> MirrorDirection {
    let t = &eval.table;
    let n_b = t.n_b();
    MirrorDirection::from_fn(t.horizon(), t.n_states(), t.n_a(), |h, s, a| {
        let nu = nu_prev.dist(h, s);
        (0..n_b).map(|b| t.q(h, s, a, b) * nu[b]).sum()
    })
}

/// `dir_h(s1, a) = sum_{s2} d_h(s2) sum_b nu_h(b | s2) Q_h((s1, s2), a, b)`
pub fn ascent_direction_factored(
    eval: &OptimisticEval,
    nu_prev: &Policy,
    d2: &ReachingDistribution,
) -> MirrorDirection {
    let StateLayout::Factored { n1, n2 } = eval.layout else {
        panic!("factored direction needs a factored layout")
    };
    let t = &eval.table;
    let n_b = t.n_b();
    MirrorDirection::from_fn(t.horizon(), n1, t.n_a(), |h, s1, a| {
        d2.at(h)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(s2, w)| {
                let s = StateLayout::join(n2, s1, s2);
                let nu = nu_prev.dist(h, s2);
                w * (0..n_b).map(|b| t.q(h, s, a, b) * nu[b]).sum::<f64>()
            })
            .sum()
    })
}

/// `dir_h(s2, b) = sum_{s1} d_h(s1) sum_a mu_h(a | s1) Q_h((s1, s2), a, b)`
pub fn descent_direction_factored(
    eval: &OptimisticEval,
    mu_prev: &Policy,
    d1: &ReachingDistribution,
) -> MirrorDirection {
    let StateLayout::Factored { n2, .. } = eval.layout else {
        panic!("factored direction needs a factored layout")
    };
    let t = &eval.table;
    let n_a = t.n_a();
    MirrorDirection::from_fn(t.horizon(), n2, t.n_b(), |h, s2, b| {
        d1.at(h)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(s1, w)| {
                let s = StateLayout::join(n2, s1, s2);
                let mu = mu_prev.dist(h, s1);
                w * (0..n_a).map(|a| mu[a] * t.q(h, s, a, b)).sum::<f64>()
            })
            .sum()
    })
}

/// `dir_h(s, b) = d_h(s) sum_a mu_h(a | s) r_tilde_h(s, a, b)`
pub fn descent_direction_sc(rtilde: &RewardTable, mu_prev: &Policy, d: &ReachingDistribution) -> MirrorDirection {
    let (n_a, n_b) = (rtilde.n_a(), rtilde.n_b());
    MirrorDirection::from_fn(rtilde.horizon(), rtilde.n_states(), n_b, |h, s, b| {
        let w = d.at(h)[s];
        if w == 0.0 {
            return 0.0;
        }
        let mu = mu_prev.dist(h, s);
        w * (0..n_a).map(|a| mu[a] * rtilde.get(h, s, a, b)).sum::<f64>()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Ascent,
    Descent,
}

impl Orientation {
    fn factor(self) -> f64 {
        match self {
            Self::Ascent => 1.0,
            Self::Descent => -1.0,
        }
    }
}

/// KL-regularized linear step on log weights: `new(a) ∝ exp(prev(a) ± step * dir(a))`,
/// renormalized in log space.
pub fn mirror_step_logits(prev_log: &[f64], dir: &[f64], step: f64, orientation: Orientation, out: &mut [f64]) {
    debug_assert_eq!(prev_log.len(), dir.len());
    let sign = orientation.factor() * step;
    for ((o, p), d) in out.iter_mut().zip(prev_log).zip(dir) {
        *o = p + sign * d;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + out.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for o in out.iter_mut() {
        *o -= log_z;
    }
}

/// One mirror ascent/descent step on a strictly positive distribution.
pub fn mirror_step(prev: &[f64], dir: &[f64], step: f64, orientation: Orientation) -> Result<Vec<f64>> {
    if prev.len() != dir.len() {
        return Err(Error::IndexMismatch(format!(
            "distribution has {} entries, direction has {}",
            prev.len(),
            dir.len()
        )));
    }
    if prev.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::DegenerateDistribution);
    }
    let logs: Vec<f64> = prev.iter().map(|p| p.ln()).collect();
    let mut out = vec![0.0; prev.len()];
    mirror_step_logits(&logs, dir, step, orientation, &mut out);
    Ok(out.into_iter().map(f64::exp).collect())
}

/// A policy stored as normalized log-probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPolicy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    log_probs: Vec<f64>,
}

impl LogPolicy {
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            horizon,
            n_states,
            n_actions,
            log_probs: vec![-(n_actions as f64).ln(); horizon * n_states * n_actions],
        }
    }

    pub fn from_policy(policy: &Policy) -> Result<Self> {
        if !policy.is_strictly_positive() {
            return Err(Error::DegenerateDistribution);
        }
        Ok(Self {
            horizon: policy.horizon(),
            n_states: policy.n_states(),
            n_actions: policy.n_actions(),
            log_probs: policy.probs().iter().map(|p| p.ln()).collect(),
        })
    }

    #[inline]
    pub fn row(&self, h: usize, x: usize) -> &[f64] {
        let start = (h * self.n_states + x) * self.n_actions;
        &self.log_probs[start..start + self.n_actions]
    }

    pub fn to_policy(&self) -> Policy {
        Policy::from_raw(
            self.horizon,
            self.n_states,
            self.n_actions,
            self.log_probs.iter().map(|l| l.exp()).collect(),
        )
    }

    /// Applies the mirror step at every `(h, x)`.
    pub fn mirror_update(&self, dir: &MirrorDirection, step: f64, orientation: Orientation) -> Self {
        assert_eq!(
            (dir.horizon, dir.n_states, dir.n_actions),
            (self.horizon, self.n_states, self.n_actions)
        );
        let mut next = self.clone();
        for (cell, (prev, d)) in self
            .log_probs
            .chunks(self.n_actions)
            .zip(dir.weights.chunks(self.n_actions))
            .enumerate()
        {
            let out = &mut next.log_probs[cell * self.n_actions..(cell + 1) * self.n_actions];
            mirror_step_logits(prev, d, step, orientation, out);
        }
        next
    }
}

/// Which player and transition structure an update runs for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    P1Factored,
    P2Factored,
    P1SingleController,
    P2SingleController,
}

impl Role {
    /// The pair of roles matching a model's transition structure.
    pub fn pair_for(model: &EmpiricalModel) -> (Role, Role) {
        if model.is_factored() {
            (Role::P1Factored, Role::P2Factored)
        } else {
            (Role::P1SingleController, Role::P2SingleController)
        }
    }

    pub fn is_player_one(self) -> bool {
        matches!(self, Role::P1Factored | Role::P1SingleController)
    }

    fn is_factored(self) -> bool {
        matches!(self, Role::P1Factored | Role::P2Factored)
    }
}

/// Theoretical step size for `role`, times the configured multiplier.
///
/// Player 1 (both structures): `eta = sqrt(ln|A| / (K H^2))`. Factored
/// player 2: `gamma = sqrt(ln|B| / (K H^2))`. Single-controller player 2:
/// `gamma = sqrt(|S| ln|B| / K)`.
pub fn default_step_size(role: Role, model: &EmpiricalModel) -> f64 {
    let cfg = model.config();
    let k = cfg.episodes as f64;
    let h_sq = (model.horizon() * model.horizon()) as f64;
    let ln_a = (model.n_actions_p1() as f64).ln();
    let ln_b = (model.n_actions_p2() as f64).ln();
    match role {
        Role::P1Factored | Role::P1SingleController => cfg.eta_scale * (ln_a / (k * h_sq)).sqrt(),
        Role::P2Factored => cfg.gamma_scale * (ln_b / (k * h_sq)).sqrt(),
        Role::P2SingleController => {
            let n = model.layout().n_joint() as f64;
            cfg.gamma_scale * (n * ln_b / k).sqrt()
        }
    }
}

/// What one player's update produced besides the next policy.
#[derive(Clone, Debug)]
pub struct EpisodeDiagnostics {
    /// Confidence-bound Q/V tables; `None` for the single-controller player 2.
    pub eval: Option<OptimisticEval>,
    pub direction: MirrorDirection,
    pub step_size: f64,
}

/// One episode of policy evaluation and improvement for `role`.
///
/// `model` must reflect episodes `1..k-1`; `opponent_prev` and `own_prev`
/// are the policies played in episode `k-1`.
pub fn episode_update(
    role: Role,
    model: &EmpiricalModel,
    opponent_prev: &Policy,
    own_prev: &LogPolicy,
    step_size: f64,
) -> Result<(LogPolicy, EpisodeDiagnostics)> {
    if role.is_factored() != model.is_factored() {
        return Err(Error::Config(format!(
            "role {role:?} does not match the model's transition structure"
        )));
    }
    let own = own_prev.to_policy();
    let (eval, direction, orientation) = match role {
        Role::P1Factored => {
            let eval = optimistic_backup(model, &own, opponent_prev, BonusSign::Plus);
            let d2 = model_reaching(model, Side::P2, opponent_prev);
            let dir = ascent_direction_factored(&eval, opponent_prev, &d2);
            (Some(eval), dir, Orientation::Ascent)
        }
        Role::P2Factored => {
            let eval = optimistic_backup(model, opponent_prev, &own, BonusSign::Minus);
            let d1 = model_reaching(model, Side::P1, opponent_prev);
            let dir = descent_direction_factored(&eval, opponent_prev, &d1);
            (Some(eval), dir, Orientation::Descent)
        }
        Role::P1SingleController => {
            let eval = optimistic_backup(model, &own, opponent_prev, BonusSign::Plus);
            let dir = ascent_direction_sc(&eval, opponent_prev);
            (Some(eval), dir, Orientation::Ascent)
        }
        Role::P2SingleController => {
            let rtilde = model.lower_confidence_rewards();
            let d = model_reaching(model, Side::P1, opponent_prev);
            let dir = descent_direction_sc(&rtilde, opponent_prev, &d);
            (None, dir, Orientation::Descent)
        }
    };
    let next = own_prev.mirror_update(&direction, step_size, orientation);
    Ok((
        next,
        EpisodeDiagnostics {
            eval,
            direction,
            step_size,
        },
    ))
}

/// A player's full learning state across episodes.
#[derive(Clone, Debug)]
pub struct Learner {
    role: Role,
    model: EmpiricalModel,
    policy: LogPolicy,
    step_size: f64,
}

impl Learner {
    /// Uniform initial policy, empty model, theoretical step size times the configured scale.
    pub fn new(role: Role, model: EmpiricalModel) -> Self {
        let layout = model.layout();
        let (n_states, n_actions) = if role.is_player_one() {
            (layout.p1_states(), model.n_actions_p1())
        } else {
            (layout.p2_states(), model.n_actions_p2())
        };
        let step_size = default_step_size(role, &model);
        Self {
            role,
            policy: LogPolicy::uniform(model.horizon(), n_states, n_actions),
            model,
            step_size,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn model(&self) -> &EmpiricalModel {
        &self.model
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn policy(&self) -> Policy {
        self.policy.to_policy()
    }

    pub fn log_policy(&self) -> &LogPolicy {
        &self.policy
    }

    /// Replaces the current policy with the next one given the opponent's previous policy.
    pub fn improve(&mut self, opponent_prev: &Policy) -> Result<EpisodeDiagnostics> {
        let (next, diag) = episode_update(self.role, &self.model, opponent_prev, &self.policy, self.step_size)?;
        self.policy = next;
        Ok(diag)
    }

    pub fn observe(&mut self, traj: &crate::game::Trajectory) -> Result<()> {
        self.model.update(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_env, random_factored};
    use crate::estimation::LearningConfig;
    use crate::game::{sample_episode, DIST_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).ln())
            .sum()
    }

    #[test]
    fn clip_rule() {
        assert_eq!(clip_q(9.3, 5.0), 5.0);
        assert_eq!(clip_q(-0.2, 5.0), 0.0);
        assert_eq!(clip_q(2.5, 5.0), 2.5);
    }

    #[test]
    fn first_episode_backup_is_zero() {
        let g = chain_env();
        let m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let u = Policy::uniform(7, 7, 2);
        let eval = optimistic_backup(&m, &u, &u, BonusSign::Plus);
        for h in 0..7 {
            for s in 0..7 {
                assert_eq!(eval.value(h, s), 0.0);
            }
        }
    }

    #[test]
    fn q_entries_respect_the_cap() {
        let g = random_factored(2, 2, 2, 2, 4, 0.1, 3);
        let mut m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let (mu, nu) = (Policy::uniform(4, 2, 2), Policy::uniform(4, 2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            m.update(&sample_episode(&g, &mu, &nu, &mut rng)).unwrap();
        }
        for sign in [BonusSign::Plus, BonusSign::Minus] {
            let eval = optimistic_backup(&m, &mu, &nu, sign);
            for h in 0..4 {
                for s in 0..4 {
                    for a in 0..2 {
                        for b in 0..2 {
                            let q = eval.q(h, s, a, b);
                            assert!((0.0..=(4 - h) as f64).contains(&q));
                        }
                    }
                    let v = bilinear(mu.dist(h, s / 2), eval.table().q_matrix(h, s), nu.dist(h, s % 2));
                    assert_eq!(eval.value(h, s), v);
                }
            }
        }
    }

    #[test]
    fn sc_ascent_direction_examples() {
        let g = chain_env();
        let m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let u = Policy::uniform(7, 7, 2);
        let mut eval = optimistic_backup(&m, &u, &u, BonusSign::Plus);
        eval.table.q_matrix_mut(6, 0).copy_from_slice(&[2.0, 4.0, 1.0, 1.0]);
        let dir = ascent_direction_sc(&eval, &u);
        assert_eq!(dir.row(6, 0), &[3.0, 1.0]);
        let point = Policy::deterministic(7, 7, 2, |_, _| 1);
        assert_eq!(ascent_direction_sc(&eval, &point).row(6, 0), &[4.0, 1.0]);
    }

    #[test]
    fn factored_directions_weight_by_reaching() {
        let g = random_factored(1, 2, 2, 2, 1, 0.0, 1);
        let m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let u = Policy::uniform(1, 2, 2);
        let mut eval = optimistic_backup(&m, &Policy::uniform(1, 1, 2), &u, BonusSign::Plus);
        // joint states (0, 0) and (0, 1); Q rows averaged over b give 2 and 4 for a = 0
        eval.table.q_matrix_mut(0, 0).copy_from_slice(&[2.0, 2.0, 0.0, 0.0]);
        eval.table.q_matrix_mut(0, 1).copy_from_slice(&[4.0, 4.0, 0.0, 0.0]);
        let first = ReachingDistribution::point_mass(1, 2, 0);
        let dir = ascent_direction_factored(&eval, &u, &first);
        assert_eq!(dir.row(0, 0), &[2.0, 0.0]);
        let mixed = reaching_from_rows(&[vec![0.5, 0.5]]);
        let dir = ascent_direction_factored(&eval, &u, &mixed);
        assert_eq!(dir.row(0, 0), &[3.0, 0.0]);
        let d1 = ReachingDistribution::point_mass(1, 1, 0);
        let mu = Policy::deterministic(1, 1, 2, |_, _| 0);
        let dir = descent_direction_factored(&eval, &mu, &d1);
        assert_eq!(dir.row(0, 0), &[2.0, 2.0]);
        assert_eq!(dir.row(0, 1), &[4.0, 4.0]);
    }

    fn reaching_from_rows(rows: &[Vec<f64>]) -> ReachingDistribution {
        ReachingDistribution::from_rows(rows).unwrap()
    }

    #[test]
    fn capped_q_saturates_direction() {
        let g = random_factored(2, 2, 2, 2, 2, 0.0, 2);
        let m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let u = Policy::uniform(2, 2, 2);
        let mut eval = optimistic_backup(&m, &u, &u, BonusSign::Plus);
        for s in 0..4 {
            eval.table.q_matrix_mut(0, s).fill(2.0);
        }
        let d2 = reaching_from_rows(&[vec![0.3, 0.7], vec![0.5, 0.5]]);
        let dir = ascent_direction_factored(&eval, &u, &d2);
        for s1 in 0..2 {
            for w in dir.row(0, s1) {
                assert!((w - 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sc_descent_direction_examples() {
        let rt = RewardTable::from_fn(1, 2, 2, 2, |_, s, a, b| match (s, a, b) {
            (0, 0, 0) => 0.8,
            (0, 0, 1) => 0.2,
            _ => 0.5,
        });
        let mu = Policy::deterministic(1, 2, 2, |_, _| 0);
        let d = ReachingDistribution::point_mass(1, 2, 0);
        let dir = descent_direction_sc(&rt, &mu, &d);
        assert_eq!(dir.row(0, 0), &[0.8, 0.2]);
        assert_eq!(dir.row(0, 1), &[0.0, 0.0]);
        let zero = descent_direction_sc(&RewardTable::zeros(1, 2, 2, 2), &mu, &d);
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn mirror_step_examples() {
        let prev = [0.2, 0.3, 0.5];
        assert_eq!(
            mirror_step(&prev, &[1.0, -2.0, 3.0], 0.0, Orientation::Ascent)
                .unwrap()
                .len(),
            3
        );
        for (x, y) in mirror_step(&prev, &[1.0, -2.0, 3.0], 0.0, Orientation::Ascent)
            .unwrap()
            .iter()
            .zip(prev)
        {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in mirror_step(&prev, &[4.0; 3], 0.7, Orientation::Descent)
            .unwrap()
            .iter()
            .zip(prev)
        {
            assert!((x - y).abs() < 1e-15);
        }
        let out = mirror_step(&[0.5, 0.5], &[1.0, 0.0], 1.0, Orientation::Ascent).unwrap();
        let e = std::f64::consts::E;
        assert!((out[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((out[0] - 0.731059).abs() < 1e-6 && (out[1] - 0.268941).abs() < 1e-6);
        assert!(matches!(
            mirror_step(&[1.0, 0.0], &[0.0, 0.0], 1.0, Orientation::Ascent),
            Err(Error::DegenerateDistribution)
        ));
    }

    #[test]
    fn prox_objective_never_worse_than_staying() {
        let prev = [0.1, 0.6, 0.3];
        let dir = [2.0, -1.0, 0.5];
        for (orientation, sgn) in [(Orientation::Ascent, 1.0), (Orientation::Descent, -1.0)] {
            let step = 0.8;
            let new = mirror_step(&prev, &dir, step, orientation).unwrap();
            let lin: f64 = new.iter().zip(&prev).zip(&dir).map(|((n, p), d)| (n - p) * d).sum();
            assert!(sgn * lin - kl(&new, &prev) / step >= -1e-12);
        }
    }

    #[test]
    fn first_episode_keeps_policies_uniform() {
        let g = chain_env();
        let m = EmpiricalModel::new(&g, LearningConfig::chain_practical(1000));
        let u = Policy::uniform(7, 7, 2);
        for role in [Role::P1SingleController, Role::P2SingleController] {
            let step = default_step_size(role, &m);
            let (next, diag) = episode_update(role, &m, &u, &LogPolicy::uniform(7, 7, 2), step).unwrap();
            assert_eq!(next.to_policy(), u);
            assert_eq!(diag.eval.is_none(), role == Role::P2SingleController);
        }
    }

    #[test]
    fn role_must_match_structure() {
        let g = chain_env();
        let m = EmpiricalModel::new(&g, LearningConfig::theoretical(100, 0.1));
        let u = Policy::uniform(7, 7, 2);
        assert!(matches!(
            episode_update(Role::P1Factored, &m, &u, &LogPolicy::uniform(7, 7, 2), 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn step_sizes_follow_the_formulas() {
        let g = chain_env();
        let m = EmpiricalModel::new(&g, LearningConfig::chain_practical(10_000));
        let eta = default_step_size(Role::P1SingleController, &m);
        assert!((eta - 50.0 * (2f64.ln() / (1e4 * 49.0)).sqrt()).abs() < 1e-15);
        let gamma = default_step_size(Role::P2SingleController, &m);
        assert!((gamma - 50.0 * (7.0 * 2f64.ln() / 1e4).sqrt()).abs() < 1e-15);
        let f = random_factored(2, 2, 2, 3, 4, 0.0, 1);
        let m = EmpiricalModel::new(&f, LearningConfig::theoretical(100, 0.1));
        let gamma = default_step_size(Role::P2Factored, &m);
        assert!((gamma - (3f64.ln() / (100.0 * 16.0)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn updates_are_deterministic_and_normalized() {
        let g = random_factored(2, 2, 2, 2, 3, 0.1, 6);
        let cfg = LearningConfig::theoretical(50, 0.1);
        let run = || {
            let mut p1 = Learner::new(Role::P1Factored, EmpiricalModel::new(&g, cfg));
            let mut p2 = Learner::new(Role::P2Factored, EmpiricalModel::new(&g, cfg));
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            for _ in 0..20 {
                let (mu, nu) = (p1.policy(), p2.policy());
                p1.improve(&nu).unwrap();
                p2.improve(&mu).unwrap();
                let traj = sample_episode(&g, &p1.policy(), &p2.policy(), &mut rng);
                p1.observe(&traj).unwrap();
                p2.observe(&traj).unwrap();
            }
            (p1.policy(), p2.policy())
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        for p in [&a.0, &a.1] {
            assert!(p.is_strictly_positive());
            for cell in p.probs().chunks(2) {
                assert!((cell.iter().sum::<f64>() - 1.0).abs() < DIST_TOL);
            }
        }
    }
}
