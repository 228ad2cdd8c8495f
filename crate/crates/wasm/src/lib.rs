//! Browser bindings: learning curves on the chain, single mirror steps and
//! reaching distributions. Results cross the boundary as JSON strings.

use optifp::bench::{render_svg, run_seed, ValueSeries};
use optifp::dp::{evaluate_pair, p1_reaching};
use optifp::envs::{chain_env, chain_equilibrium, CHAIN_HORIZON, CHAIN_STATES};
use optifp::estimation::LearningConfig;
use optifp::fp::{mirror_step, Orientation};
use optifp::game::Policy;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Longest run the page may request; keeps the tab responsive.
pub const MAX_EPISODES: usize = 5000;

#[derive(Debug, Serialize)]
pub struct LearningCurve {
    pub episodes: usize,
    pub values: Vec<f64>,
    pub v_star: f64,
    pub regret1: Vec<f64>,
    pub regret2: Vec<f64>,
    pub final_mu_top: Vec<f64>,
    pub final_nu_top: Vec<f64>,
    pub svg: String,
}

/// Self-play on the chain with the given multipliers on step sizes and bonuses.
pub fn learning_curve(episodes: usize, step_scale: f64, bonus_scale: f64, seed: u64) -> Result<LearningCurve, String> {
    if episodes > MAX_EPISODES {
        return Err(format!("at most {MAX_EPISODES} episodes in the browser"));
    }
    let game = chain_env();
    let learning = LearningConfig {
        episodes,
        delta: 0.01,
        eta_scale: step_scale,
        gamma_scale: step_scale,
        reward_bonus_scale: bonus_scale,
        transition_bonus_scale: bonus_scale,
    };
    let run = run_seed(&game, learning, seed, false).map_err(|e| e.to_string())?;
    let v_star = game.reference_value().expect("chain has a reference value");
    let series = ValueSeries {
        episodes: run.rows.iter().map(|r| r.episode).collect(),
        mean_value: run.rows.iter().map(|r| r.v_exact).collect(),
        v_star: Some(v_star),
    };
    let (mus, nus) = run.ledger.policies();
    let top = CHAIN_STATES - 1;
    Ok(LearningCurve {
        episodes,
        values: series.mean_value.clone(),
        v_star,
        regret1: run.rows.iter().map(|r| r.regret1_partial).collect(),
        regret2: run.rows.iter().map(|r| r.regret2_partial).collect(),
        final_mu_top: mus.last().map(|p| p.dist(top, top).to_vec()).unwrap_or_default(),
        final_nu_top: nus.last().map(|p| p.dist(top, top).to_vec()).unwrap_or_default(),
        svg: render_svg(&series),
    })
}

/// One KL-regularized step from `prev` along `dir`.
pub fn mirror(prev: &[f64], dir: &[f64], step: f64, ascent: bool) -> Result<Vec<f64>, String> {
    let orientation = if ascent {
        Orientation::Ascent
    } else {
        Orientation::Descent
    };
    mirror_step(prev, dir, step, orientation).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct ChainReaching {
    /// `d[h][s]`: probability of occupying chain state `s` at step `h`.
    pub d: Vec<Vec<f64>>,
    /// Value of the stationary policy against player 2's equilibrium policy.
    pub value: f64,
    pub v_star: f64,
}

/// Reaching probabilities on the chain when player 1 plays action 1 with probability `p_up` everywhere.
pub fn reaching(p_up: f64) -> Result<ChainReaching, String> {
    if !(0.0..=1.0).contains(&p_up) {
        return Err(format!("probability {p_up} outside [0, 1]"));
    }
    let game = chain_env();
    let probs = [1.0 - p_up, p_up].repeat(CHAIN_HORIZON * CHAIN_STATES);
    let mu = Policy::new(CHAIN_HORIZON, CHAIN_STATES, 2, probs).map_err(|e| e.to_string())?;
    let d = p1_reaching(&game, &mu);
    let (_, nu) = chain_equilibrium();
    Ok(ChainReaching {
        d: (0..CHAIN_HORIZON).map(|h| d.at(h).to_vec()).collect(),
        value: evaluate_pair(&game, &mu, &nu).value(0, 0),
        v_star: game.reference_value().expect("chain has a reference value"),
    })
}

fn to_json<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = learningCurve)]
pub fn learning_curve_js(episodes: usize, step_scale: f64, bonus_scale: f64, seed: u32) -> Result<String, JsError> {
    to_json(learning_curve(episodes, step_scale, bonus_scale, u64::from(seed)))
}

#[wasm_bindgen(js_name = mirrorStep)]
pub fn mirror_step_js(prev: Vec<f64>, dir: Vec<f64>, step: f64, ascent: bool) -> Result<Vec<f64>, JsError> {
    mirror(&prev, &dir, step, ascent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = chainReaching)]
pub fn chain_reaching_js(p_up: f64) -> Result<String, JsError> {
    to_json(reaching(p_up))
}
