//! Built-in environments: the 7-state chain and seeded random games.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::evaluate_pair;
use crate::game::{
    FactoredTransition, Kernel, Policy, RewardTable, SingleControllerTransition, Transition, ZeroSumGame,
};

pub const CHAIN_STATES: usize = 7;
pub const CHAIN_HORIZON: usize = 7;

/// Reward matrix at the last chain state, indexed `[a][b]`.
pub const CHAIN_END_REWARD: [[f64; 2]; 2] = [[0.9, 0.2], [0.6, 0.4]];

fn chain_row(s: usize, a: usize) -> Vec<f64> {
    let last = CHAIN_STATES - 1;
    let (up, stay, down) = match (s, a) {
        (0, 0) => (0.1, 0.9, 0.0),
        (0, _) => (0.9, 0.1, 0.0),
        (_, 0) => (0.05, 0.05, 0.9),
        _ => (0.9, 0.05, 0.05),
    };
    let mut row = vec![0.0; CHAIN_STATES];
    // moves that would leave the chain fall back to staying put
    if s == last {
        row[s] = stay + up;
    } else {
        row[s] = stay;
        row[s + 1] = up;
    }
    if s > 0 {
        row[s - 1] = down;
    }
    row
}

/// The 7-state single-controller chain with horizon 7.
///
/// State `i` here is `s_{i+1}` in one-based notation. Action 1 moves up the
/// chain with probability 0.9, action 0 moves down (stays at the bottom) with
/// probability 0.9. Every state pays 0.1 except the top, which pays
/// [`CHAIN_END_REWARD`]. Observed rewards carry `Unif[-0.1, 0.1]` noise.
pub fn chain_env() -> ZeroSumGame {
    let p =
        Kernel::from_fn(CHAIN_HORIZON, CHAIN_STATES, 2, |_, s, a| chain_row(s, a)).expect("chain rows are stochastic");
    let reward = RewardTable::from_fn(CHAIN_HORIZON, CHAIN_STATES, 2, 2, |_, s, a, b| {
        if s == CHAIN_STATES - 1 {
            CHAIN_END_REWARD[a][b]
        } else {
            0.1
        }
    });
    let game = ZeroSumGame::new(
        reward,
        Transition::SingleController(SingleControllerTransition { p }),
        0,
        0.1,
    )
    .expect("chain environment is valid");
    let (mu, nu) = chain_equilibrium();
    let v = evaluate_pair(&game, &mu, &nu).value(0, 0);
    game.with_reference_value(v)
}

/// Player 1 always plays action 1; player 2 plays action 1 (the minimizing column at the top state).
pub fn chain_equilibrium() -> (Policy, Policy) {
    (
        Policy::deterministic(CHAIN_HORIZON, CHAIN_STATES, 2, |_, _| 1),
        Policy::deterministic(CHAIN_HORIZON, CHAIN_STATES, 2, |_, _| 1),
    )
}

fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 1e-3 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_rewards(
    rng: &mut ChaCha8Rng,
    horizon: usize,
    n_states: usize,
    n_a: usize,
    n_b: usize,
    noise: f64,
) -> RewardTable {
    RewardTable::from_fn(horizon, n_states, n_a, n_b, |_, _, _, _| {
        noise + (1.0 - 2.0 * noise) * rng.gen::<f64>()
    })
}

/// Random single-controller game; rewards lie in `[noise, 1 - noise]`.
pub fn random_single_controller(
    n_states: usize,
    n_a: usize,
    n_b: usize,
    horizon: usize,
    noise: f64,
    seed: u64,
) -> ZeroSumGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Kernel::from_fn(horizon, n_states, n_a, |_, _, _| random_row(&mut rng, n_states)).expect("random rows");
    let reward = random_rewards(&mut rng, horizon, n_states, n_a, n_b, noise);
    ZeroSumGame::new(
        reward,
        Transition::SingleController(SingleControllerTransition { p }),
        0,
        noise,
    )
    .expect("random single-controller game is valid")
}

/// Random factored game with component sizes `n1`, `n2`; starts at `(0, 0)`.
pub fn random_factored(
    n1: usize,
    n2: usize,
    n_a: usize,
    n_b: usize,
    horizon: usize,
    noise: f64,
    seed: u64,
) -> ZeroSumGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p1 = Kernel::from_fn(horizon, n1, n_a, |_, _, _| random_row(&mut rng, n1)).expect("random rows");
    let p2 = Kernel::from_fn(horizon, n2, n_b, |_, _, _| random_row(&mut rng, n2)).expect("random rows");
    let reward = random_rewards(&mut rng, horizon, n1 * n2, n_a, n_b, noise);
    ZeroSumGame::new(reward, Transition::Factored(FactoredTransition { p1, p2 }), 0, noise)
        .expect("random factored game is valid")
}
