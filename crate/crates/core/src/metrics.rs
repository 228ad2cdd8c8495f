//! Exact regret accounting and the optimism audit.

use crate::dp::{evaluate_pair, hindsight_best_p1, hindsight_best_p2, HindsightP1, HindsightP2};
use crate::error::Result;
use crate::fp::{BonusSign, OptimisticEval};
use crate::game::{Policy, StateLayout, ZeroSumGame};

/// Threshold above which a prediction error counts as an optimism violation.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Cumulative regrets after some number of episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretSnapshot {
    pub episodes: usize,
    pub regret1: f64,
    pub regret2: f64,
    pub gap: f64,
}

impl RegretSnapshot {
    fn new(episodes: usize, regret1: f64, regret2: f64) -> Self {
        Self {
            episodes,
            regret1,
            regret2,
            gap: regret1 + regret2,
        }
    }
}

/// Per-episode record produced by [`RegretLedger::record_episode`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub value: f64,
    pub partial: RegretSnapshot,
}

/// Exact values and hindsight regrets of a played policy sequence.
#[derive(Clone, Debug)]
pub struct RegretLedger {
    values: Vec<f64>,
    mus: Vec<Policy>,
    nus: Vec<Policy>,
    violations: Vec<usize>,
    value_sum: f64,
    best_p1: HindsightP1,
    best_p2: HindsightP2,
}

impl RegretLedger {
    pub fn new(game: &ZeroSumGame) -> Self {
        Self {
            values: Vec::new(),
            mus: Vec::new(),
            nus: Vec::new(),
            violations: Vec::new(),
            value_sum: 0.0,
            best_p1: HindsightP1::new(game),
            best_p2: HindsightP2::new(game),
        }
    }

    /// Appends `V_1^{mu^k, nu^k}(s_1)`, stores both policies and returns the
    /// running regrets over episodes `1..=k`.
    pub fn record_episode(&mut self, game: &ZeroSumGame, mu: &Policy, nu: &Policy) -> EpisodeRecord {
        let value = evaluate_pair(game, mu, nu).value(0, game.initial_state());
        self.values.push(value);
        self.value_sum += value;
        self.best_p1.push(game, nu);
        self.best_p2.push(game, mu);
        self.mus.push(mu.clone());
        self.nus.push(nu.clone());
        self.violations.push(0);
        let (_, best1) = self.best_p1.solve(game);
        let (_, best2) = self.best_p2.solve(game);
        EpisodeRecord {
            episode: self.values.len(),
            value,
            partial: RegretSnapshot::new(self.values.len(), best1 - self.value_sum, self.value_sum - best2),
        }
    }

    /// Adds optimism violations to the latest episode's count.
    pub fn add_violations(&mut self, count: usize) {
        if let Some(last) = self.violations.last_mut() {
            *last += count;
        }
    }

    pub fn episodes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn violations(&self) -> &[usize] {
        &self.violations
    }

    pub fn policies(&self) -> (&[Policy], &[Policy]) {
        (&self.mus, &self.nus)
    }
}

/// Recomputes the regrets from the stored policy history.
pub fn finalize_regret(ledger: &RegretLedger, game: &ZeroSumGame) -> Result<RegretSnapshot> {
    let (_, best1) = hindsight_best_p1(game, &ledger.nus)?;
    let (_, best2) = hindsight_best_p2(game, &ledger.mus)?;
    let played: f64 = ledger.values.iter().sum();
    Ok(RegretSnapshot::new(ledger.episodes(), best1 - played, played - best2))
}

/// Outcome of checking an optimistic evaluation against the true model.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub violations: usize,
    /// Largest signed prediction error; nonpositive when the bound holds everywhere.
    pub max_error: f64,
}

/// Prediction errors `r + P V - Q` (upper bounds) or `Q - r - P V` (lower
/// bounds) under the true reward and transitions, over every `(h, s, a, b)`.
pub fn optimism_audit(game: &ZeroSumGame, eval: &OptimisticEval) -> AuditReport {
    let (horizon, n_a, n_b) = (game.horizon(), game.n_actions_p1(), game.n_actions_p2());
    let n = match eval.layout() {
        StateLayout::Joint { n_states } => n_states,
        StateLayout::Factored { n1, n2 } => n1 * n2,
    };
    let sign = match eval.sign() {
        BonusSign::Plus => 1.0,
        BonusSign::Minus => -1.0,
    };
    let mut report = AuditReport {
        violations: 0,
        max_error: f64::NEG_INFINITY,
    };
    for h in 0..horizon {
        let next = eval.table().values_at(h + 1);
        for s in 0..n {
            for a in 0..n_a {
                for b in 0..n_b {
                    let target = game.reward().get(h, s, a, b) + game.expected_next(h, s, a, b, next);
                    let err = sign * (target - eval.q(h, s, a, b));
                    report.max_error = report.max_error.max(err);
                    if err > VIOLATION_TOL {
                        report.violations += 1;
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_env, chain_equilibrium, random_single_controller};
    use crate::estimation::{EmpiricalModel, LearningConfig};
    use crate::fp::optimistic_backup;
    use crate::game::sample_episode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_play_has_constant_values() {
        let g = chain_env();
        let u = Policy::uniform(7, 7, 2);
        let mut ledger = RegretLedger::new(&g);
        for _ in 0..4 {
            ledger.record_episode(&g, &u, &u);
        }
        assert!(ledger.values().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_episode_regret_is_a_best_response_gap() {
        let g = random_single_controller(3, 2, 2, 3, 0.1, 4);
        let (mu, nu) = (Policy::uniform(3, 3, 2), Policy::uniform(3, 3, 2));
        let mut ledger = RegretLedger::new(&g);
        let rec = ledger.record_episode(&g, &mu, &nu);
        let (best, total) = hindsight_best_p1(&g, std::slice::from_ref(&nu)).unwrap();
        assert!((total - evaluate_pair(&g, &best, &nu).value(0, 0)).abs() < 1e-12);
        assert!((rec.partial.regret1 - (total - rec.value)).abs() < 1e-12);
        assert!(rec.partial.regret1 >= 0.0 && rec.partial.regret2 >= 0.0);
    }

    #[test]
    fn equilibrium_play_has_zero_regret() {
        let g = chain_env();
        let (mu, nu) = chain_equilibrium();
        let mut ledger = RegretLedger::new(&g);
        for _ in 0..10 {
            ledger.record_episode(&g, &mu, &nu);
        }
        let r = finalize_regret(&ledger, &g).unwrap();
        assert!(r.regret1.abs() < 10.0 * 1e-9 && r.regret2.abs() < 10.0 * 1e-9);
        assert_eq!(r.gap, r.regret1 + r.regret2);
    }

    #[test]
    fn doubling_repeated_policies_doubles_regret() {
        let g = random_single_controller(3, 2, 2, 3, 0.1, 9);
        let mu = Policy::deterministic(3, 3, 2, |h, s| (h + s) % 2);
        let nu = Policy::uniform(3, 3, 2);
        let regret_after = |k: usize| {
            let mut ledger = RegretLedger::new(&g);
            for _ in 0..k {
                ledger.record_episode(&g, &mu, &nu);
            }
            finalize_regret(&ledger, &g).unwrap()
        };
        let (one, two) = (regret_after(3), regret_after(6));
        assert!((two.regret1 - 2.0 * one.regret1).abs() < 1e-12);
        assert!((two.regret2 - 2.0 * one.regret2).abs() < 1e-12);
    }

    #[test]
    fn incremental_and_final_regrets_agree() {
        let g = random_single_controller(3, 2, 2, 3, 0.1, 2);
        let mut ledger = RegretLedger::new(&g);
        let mut last = None;
        for k in 0..5 {
            let mu = Policy::deterministic(3, 3, 2, |h, s| (h + s + k) % 2);
            let nu = Policy::deterministic(3, 3, 2, |h, s| (h * s + k) % 2);
            last = Some(ledger.record_episode(&g, &mu, &nu));
        }
        let fin = finalize_regret(&ledger, &g).unwrap();
        let part = last.unwrap().partial;
        assert!((fin.regret1 - part.regret1).abs() < 1e-12 && (fin.regret2 - part.regret2).abs() < 1e-12);
    }

    #[test]
    fn saturated_bonus_never_violates() {
        let g = random_single_controller(3, 2, 2, 3, 0.1, 1);
        let mut cfg = LearningConfig::theoretical(10, 0.05);
        cfg.reward_bonus_scale = 1e12;
        let mut m = EmpiricalModel::new(&g, cfg);
        let u = Policy::uniform(3, 3, 2);
        m.update(&sample_episode(&g, &u, &u, &mut ChaCha8Rng::seed_from_u64(0)))
            .unwrap();
        let eval = optimistic_backup(&m, &u, &u, BonusSign::Plus);
        for h in 0..3 {
            assert!((0..3).all(|s| eval.q(h, s, 0, 0) == (3 - h) as f64));
        }
        assert_eq!(optimism_audit(&g, &eval).violations, 0);
    }

    #[test]
    fn perfect_model_has_zero_prediction_error() {
        // one state with a self-loop: every visited cell is estimated exactly
        let r = crate::game::RewardTable::from_fn(2, 1, 2, 2, |h, _, a, b| 0.1 * (1 + h + 2 * a + b) as f64);
        let p = crate::game::Kernel::identity(2, 1, 2);
        let t = crate::game::Transition::SingleController(crate::game::SingleControllerTransition { p });
        let g = ZeroSumGame::new(r, t, 0, 0.0).unwrap();
        let mut cfg = LearningConfig::theoretical(10, 0.05);
        cfg.reward_bonus_scale = 0.0;
        cfg.transition_bonus_scale = 0.0;
        let mut m = EmpiricalModel::new(&g, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = Policy::uniform(2, 1, 2);
        for _ in 0..200 {
            m.update(&sample_episode(&g, &u, &u, &mut rng)).unwrap();
        }
        assert!(m.min_count() > 0);
        let eval = optimistic_backup(&m, &u, &u, BonusSign::Plus);
        let report = optimism_audit(&g, &eval);
        assert!(report.max_error.abs() < 1e-12, "{report:?}");
        assert_eq!(report.violations, 0);
    }
}
