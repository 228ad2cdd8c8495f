//! Empirical state-reaching probabilities under estimated transitions.

use crate::dp::{forward_reaching, ReachingDistribution};
use crate::estimation::{EmpiricalModel, Side};
use crate::game::{Kernel, Policy, StateLayout};

/// Forward recursion of `policy` through an estimated kernel.
///
/// Unvisited rows of an empirical kernel are uniform, so every `d_h` stays a
/// probability distribution.
pub fn empirical_reaching(est_transition: &Kernel, policy: &Policy, initial: usize) -> ReachingDistribution {
    forward_reaching(est_transition, policy, initial)
}

/// Reaching probabilities of one side's policy under `model`'s estimate of that side's dynamics.
pub fn model_reaching(model: &EmpiricalModel, side: Side, policy: &Policy) -> ReachingDistribution {
    let layout = model.layout();
    let initial_joint = model.initial_state();
    let initial = match (side, layout) {
        (Side::P1, _) => layout.p1_index(initial_joint),
        (Side::P2, StateLayout::Factored { .. }) => layout.p2_index(initial_joint),
        (Side::P2, StateLayout::Joint { .. }) => panic!("single-controller games have no player-2 dynamics"),
    };
    empirical_reaching(&model.estimated_kernel(side), policy, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::exact_reaching;
    use crate::game::DIST_TOL;

    #[test]
    fn true_kernel_matches_exact() {
        let g = crate::envs::chain_env();
        let mu = Policy::uniform(7, 7, 2);
        let k = crate::dp::p1_kernel(&g);
        assert_eq!(empirical_reaching(k, &mu, 0), exact_reaching(k, &mu, 0));
    }

    #[test]
    fn uniform_rows_mix_immediately() {
        let k = Kernel::uniform(4, 2, 2);
        let mu = Policy::deterministic(4, 2, 2, |h, s| (h + s) % 2);
        let d = empirical_reaching(&k, &mu, 1);
        assert_eq!(d.at(0), &[0.0, 1.0]);
        for h in 1..4 {
            assert_eq!(d.at(h), &[0.5, 0.5]);
        }
    }

    #[test]
    fn two_step_recursion_by_hand() {
        // step 0: both rows (0.7, 0.3); step 1: rows (0.7, 0.3) and (0.2, 0.8)
        let k = Kernel::new(
            3,
            2,
            1,
            vec![0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let d = empirical_reaching(&k, &Policy::uniform(3, 2, 1), 0);
        assert!((d.at(1)[0] - 0.7).abs() < 1e-15);
        assert!((d.at(2)[0] - 0.55).abs() < 1e-15 && (d.at(2)[1] - 0.45).abs() < 1e-15);
        for h in 0..3 {
            assert!((d.at(h).iter().sum::<f64>() - 1.0).abs() < DIST_TOL);
        }
    }
}
