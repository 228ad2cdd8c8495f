//! Multi-seed self-play runs, CSV output and the seed-averaged summary.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimation::{EmpiricalModel, LearningConfig};
use crate::fp::{default_step_size, episode_update, EpisodeDiagnostics, LogPolicy, Role};
use crate::game::{sample_episode, Trajectory, ZeroSumGame};
use crate::metrics::{optimism_audit, RegretLedger};

/// One CSV data row; field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    pub v_exact: f64,
    pub v_star: Option<f64>,
    pub regret1_partial: f64,
    pub regret2_partial: f64,
    pub gap_partial: f64,
    pub optimism_violations: usize,
    pub max_bonus: f64,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "seed",
    "episode",
    "v_exact",
    "v_star",
    "regret1_partial",
    "regret2_partial",
    "gap_partial",
    "optimism_violations",
    "max_bonus",
];

/// Seed-averaged row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub episode: usize,
    pub seeds: usize,
    pub v_exact: f64,
    pub v_star: Option<f64>,
    pub regret1_partial: f64,
    pub regret2_partial: f64,
    pub gap_partial: f64,
    pub optimism_violations: f64,
    pub max_bonus: f64,
    /// `gap_partial / episode`: the approximation level of the averaged policies.
    pub gap_per_episode: f64,
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<EpisodeRow>,
    pub ledger: RegretLedger,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

/// Largest total bonus of `model` over the cells visited in `traj`; zero before any data, matching the backups.
pub fn max_bonus(model: &EmpiricalModel, traj: &Trajectory) -> f64 {
    if model.episodes() == 0 {
        return 0.0;
    }
    traj.steps
        .iter()
        .enumerate()
        .map(|(h, st)| model.total_bonus(h, st.state, st.action_a, st.action_b))
        .fold(0.0, f64::max)
}

fn audit_violations(game: &ZeroSumGame, diags: [&EpisodeDiagnostics; 2]) -> usize {
    diags
        .iter()
        .filter_map(|d| d.eval.as_ref())
        .map(|eval| optimism_audit(game, eval).violations)
        .sum()
}

/// Runs both players' algorithms against each other for `learning.episodes` episodes.
///
/// Episode `k` updates both policies from the model of episodes `1..k-1` and
/// the opponent's policy from episode `k-1`, plays one sampled episode, then
/// feeds the trajectory to the shared model.
pub fn run_seed(game: &ZeroSumGame, learning: LearningConfig, seed: u64, audit: bool) -> Result<SeedRun> {
    learning.validate()?;
    let mut model = EmpiricalModel::new(game, learning);
    let (role1, role2) = Role::pair_for(&model);
    let layout = game.layout();
    let (step1, step2) = (default_step_size(role1, &model), default_step_size(role2, &model));
    let mut mu_log = LogPolicy::uniform(game.horizon(), layout.p1_states(), game.n_actions_p1());
    let mut nu_log = LogPolicy::uniform(game.horizon(), layout.p2_states(), game.n_actions_p2());
    let mut mu = mu_log.to_policy();
    let mut nu = nu_log.to_policy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = RegretLedger::new(game);
    let mut rows = Vec::with_capacity(learning.episodes);
    for _ in 0..learning.episodes {
        let (next_mu, d1) = episode_update(role1, &model, &nu, &mu_log, step1)?;
        let (next_nu, d2) = episode_update(role2, &model, &mu, &nu_log, step2)?;
        mu_log = next_mu;
        nu_log = next_nu;
        mu = mu_log.to_policy();
        nu = nu_log.to_policy();
        let record = ledger.record_episode(game, &mu, &nu);
        // the zero-data backup is the initialization, not a confidence bound
        let violations = if audit && model.episodes() > 0 {
            audit_violations(game, [&d1, &d2])
        } else {
            0
        };
        ledger.add_violations(violations);
        let traj = sample_episode(game, &mu, &nu, &mut rng);
        let bonus = max_bonus(&model, &traj);
        model.update(&traj)?;
        rows.push(EpisodeRow {
            seed,
            episode: record.episode,
            v_exact: record.value,
            v_star: game.reference_value(),
            regret1_partial: record.partial.regret1,
            regret2_partial: record.partial.regret2,
            gap_partial: record.partial.gap,
            optimism_violations: violations,
            max_bonus: bonus,
        });
    }
    Ok(SeedRun { seed, rows, ledger })
}

#[cfg(not(target_arch = "wasm32"))]
fn run_all(game: &ZeroSumGame, config: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let learning = config.learning();
    std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_seed(game, learning, seed, config.audit)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

#[cfg(target_arch = "wasm32")]
fn run_all(game: &ZeroSumGame, config: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let learning = config.learning();
    config
        .seeds
        .iter()
        .map(|&seed| run_seed(game, learning, seed, config.audit))
        .collect()
}

/// Runs every seed (concurrently where threads exist) and averages the results in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let game = config.build_game()?;
    let runs = run_all(&game, config)?;
    let summary = summarize(&runs);
    Ok(ExperimentOutcome { runs, summary })
}

/// Arithmetic means of every column across runs, episode by episode.
pub fn summarize(runs: &[SeedRun]) -> Vec<SummaryRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let n = runs.len() as f64;
    (0..first.rows.len())
        .map(|i| {
            let mean = |f: &dyn Fn(&EpisodeRow) -> f64| runs.iter().map(|r| f(&r.rows[i])).sum::<f64>() / n;
            let episode = first.rows[i].episode;
            let gap = mean(&|r| r.gap_partial);
            SummaryRow {
                episode,
                seeds: runs.len(),
                v_exact: mean(&|r| r.v_exact),
                v_star: first.rows[i].v_star,
                regret1_partial: mean(&|r| r.regret1_partial),
                regret2_partial: mean(&|r| r.regret2_partial),
                gap_partial: gap,
                optimism_violations: mean(&|r| r.optimism_violations as f64),
                max_bonus: mean(&|r| r.max_bonus),
                gap_per_episode: gap / episode as f64,
            }
        })
        .collect()
}

pub fn seed_csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

pub const SUMMARY_CSV: &str = "summary.csv";

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one CSV per seed plus `summary.csv`; returns the per-seed paths.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(outcome.runs.len());
    for run in &outcome.runs {
        let path = dir.join(seed_csv_name(run.seed));
        write_rows(&path, &run.rows)?;
        paths.push(path);
    }
    write_rows(&dir.join(SUMMARY_CSV), &outcome.summary)?;
    Ok(paths)
}

/// Reads a per-seed CSV, checking the header.
pub fn read_seed_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::MalformedCsv(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::MalformedCsv(format!("{}: {e}", path.display()))))
        .collect()
}
