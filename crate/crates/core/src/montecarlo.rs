//! Seeded Monte Carlo simulation of complete games.
//!
//! Game `j` draws its stage outcomes from the SplitMix64 stream seeded with
//! [`game_seed`]`(master, j)`, one uniform per stage, so any single game can
//! be replayed in isolation with [`trace_game`]. Games run in fixed-size
//! batches and batch statistics are merged in game-index order, which makes
//! the output independent of thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{apply_outcome, sample_stage, win_probabilities, GameError, GameSpec, GameState, StageOutcome, SuffixPayoffs};
use crate::oracle::{Method, PayoffReport};
use crate::rng::{game_seed, player_seed, SplitMix64};
use crate::strategies::{decide, Strategy, StrategyError, StrategySpec};

/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("number of games must be at least 1")]
    NoGames,
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("profile has {got} strategies for {players} players")]
    ProfileLength { players: usize, got: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub games: u64,
    pub seed: u64,
    pub batch_size: u64,
    pub profile: Vec<StrategySpec>,
}

impl SimulationConfig {
    pub const DEFAULT_BATCH: u64 = 4096;

    pub fn new(games: u64, seed: u64, profile: Vec<StrategySpec>) -> Self {
        SimulationConfig {
            games,
            seed,
            batch_size: Self::DEFAULT_BATCH,
            profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerStats {
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub ci99_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    /// 1-based stage.
    pub stage: usize,
    pub wins: Vec<u64>,
    pub no_winner: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub games: u64,
    pub seed: u64,
    pub players: Vec<PlayerStats>,
    pub stages: Vec<StageCounts>,
    pub clamp_events: u64,
}

impl SimulationStats {
    pub fn payoff_report(&self) -> PayoffReport {
        PayoffReport {
            expected_payoffs: self.players.iter().map(|p| p.mean).collect(),
            method: Method::MonteCarlo,
            node_count: self.games * self.stages.len() as u64,
            standard_errors: Some(self.players.iter().map(|p| p.standard_error).collect()),
        }
    }
}

/// One played stage, as logged by traces and exported to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based stage.
    pub stage: usize,
    pub investments: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub draw: f64,
    /// 0-based winner.
    pub winner: Option<usize>,
    pub fee_paid: f64,
    pub resources_after: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub final_state: GameState,
    pub clamp_events: u64,
}

impl GameTrace {
    /// States at the start of every stage followed by the terminal state.
    pub fn states(&self, spec: &GameSpec) -> Vec<GameState> {
        let mut state = spec.initial_state();
        let mut out = vec![state.clone()];
        for row in &self.rows {
            state = apply_outcome(
                &state,
                &StageOutcome {
                    winner: row.winner,
                    investments: row.investments.clone(),
                },
                spec,
            )
            .expect("trace rows replay");
            out.push(state.clone());
        }
        out
    }
}

/// Stage-by-stage driver shared by simulation, tracing and interactive play.
pub struct Stepper<'a> {
    spec: &'a GameSpec,
    suffix: SuffixPayoffs,
    state: GameState,
    history: Vec<StageOutcome>,
    draws: SplitMix64,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a GameSpec, seed: u64) -> Self {
        Stepper {
            spec,
            suffix: spec.suffix(),
            state: spec.initial_state(),
            history: Vec::new(),
            draws: SplitMix64::new(seed),
        }
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn suffix(&self) -> &SuffixPayoffs {
        &self.suffix
    }

    pub fn history(&self) -> &[StageOutcome] {
        &self.history
    }

    pub fn is_over(&self) -> bool {
        self.state.is_terminal(self.spec)
    }

    /// Profile decisions at the current stage, plus the clamp count.
    pub fn decide(&self, profile: &mut [Box<dyn Strategy>]) -> Result<(Vec<f64>, usize), GameError> {
        let d = decide(profile, self.spec, &self.suffix, &self.state, &self.history)?;
        Ok((d.investments, d.clamped))
    }

    /// Resolves the current stage with one uniform draw.
    pub fn play_stage(&mut self, investments: Vec<f64>) -> Result<TraceRow, GameError> {
        let probs = win_probabilities(&investments)?;
        let draw = self.draws.next_unit();
        let outcome = sample_stage(&investments, draw);
        let next = apply_outcome(&self.state, &outcome, self.spec)?;
        let fee_paid = match outcome.winner {
            Some(_) => self.spec.fees()[self.state.stage],
            None => 0.0,
        };
        let row = TraceRow {
            stage: self.state.stage + 1,
            investments,
            probabilities: probs.players,
            draw,
            winner: outcome.winner,
            fee_paid,
            resources_after: next.resources.clone(),
        };
        self.history.push(outcome);
        self.state = next;
        Ok(row)
    }
}

/// Fresh strategy instances for one game; random strategies get streams
/// keyed by the game seed and player index.
pub fn instantiate(profile: &[StrategySpec], seed: u64) -> Result<Vec<Box<dyn Strategy>>, StrategyError> {
    profile
        .iter()
        .enumerate()
        .map(|(i, s)| s.build_for_stream(Some(player_seed(seed, i))))
        .collect()
}

fn check_profile(spec: &GameSpec, profile: &[StrategySpec]) -> Result<(), SimulationError> {
    if profile.len() != spec.players() {
        return Err(SimulationError::ProfileLength {
            players: spec.players(),
            got: profile.len(),
        });
    }
    Ok(())
}

/// Plays one game from `seed` and logs every stage.
pub fn trace_game(spec: &GameSpec, profile: &[StrategySpec], seed: u64) -> Result<GameTrace, SimulationError> {
    check_profile(spec, profile)?;
    let mut strategies = instantiate(profile, seed)?;
    let mut stepper = Stepper::new(spec, seed);
    let mut rows = Vec::with_capacity(spec.stages());
    let mut clamp_events = 0;
    while !stepper.is_over() {
        let (investments, clamped) = stepper.decide(&mut strategies)?;
        clamp_events += clamped as u64;
        rows.push(stepper.play_stage(investments)?);
    }
    Ok(GameTrace {
        seed,
        rows,
        final_state: stepper.state,
        clamp_events,
    })
}

#[derive(Debug, Clone)]
struct Accumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    wins: Vec<Vec<u64>>,
    no_winner: Vec<u64>,
    clamp_events: u64,
}

impl Accumulator {
    fn new(players: usize, stages: usize) -> Self {
        Accumulator {
            count: 0,
            mean: vec![0.0; players],
            m2: vec![0.0; players],
            wins: vec![vec![0; players]; stages],
            no_winner: vec![0; stages],
            clamp_events: 0,
        }
    }

    fn push(&mut self, payoffs: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(payoffs) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
    }

    /// Chan et al. pairwise merge; `other` holds the later games.
    fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        for (mine, theirs) in self.wins.iter_mut().zip(&other.wins) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        for (a, b) in self.no_winner.iter_mut().zip(&other.no_winner) {
            *a += b;
        }
        self.clamp_events += other.clamp_events;
    }
}

fn run_batch(spec: &GameSpec, config: &SimulationConfig, games: std::ops::Range<u64>) -> Result<Accumulator, SimulationError> {
    let mut acc = Accumulator::new(spec.players(), spec.stages());
    for j in games {
        let seed = game_seed(config.seed, j);
        let mut strategies = instantiate(&config.profile, seed)?;
        let mut stepper = Stepper::new(spec, seed);
        while !stepper.is_over() {
            let (investments, clamped) = stepper.decide(&mut strategies)?;
            acc.clamp_events += clamped as u64;
            let row = stepper.play_stage(investments)?;
            match row.winner {
                Some(w) => acc.wins[row.stage - 1][w] += 1,
                None => acc.no_winner[row.stage - 1] += 1,
            }
        }
        acc.push(&stepper.state.cumulative_payoffs);
    }
    Ok(acc)
}

/// Plays `config.games` independent games and summarizes payoffs and wins.
pub fn run_games(spec: &GameSpec, config: &SimulationConfig) -> Result<SimulationStats, SimulationError> {
    if config.games == 0 {
        return Err(SimulationError::NoGames);
    }
    if config.batch_size == 0 {
        return Err(SimulationError::EmptyBatch);
    }
    check_profile(spec, &config.profile)?;
    let batches = config.games.div_ceil(config.batch_size);
    let parts = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * config.batch_size;
            let end = (start + config.batch_size).min(config.games);
            run_batch(spec, config, start..end)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = Accumulator::new(spec.players(), spec.stages());
    for part in &parts {
        total.merge(part);
    }

    let n = total.count as f64;
    let players = total
        .mean
        .iter()
        .zip(&total.m2)
        .map(|(&mean, &m2)| {
            let variance = if total.count > 1 { m2 / (n - 1.0) } else { 0.0 };
            let standard_error = (variance / n).sqrt();
            PlayerStats {
                mean,
                variance,
                standard_error,
                ci99_half_width: Z_99 * standard_error,
            }
        })
        .collect();
    let stages = total
        .wins
        .into_iter()
        .zip(total.no_winner)
        .enumerate()
        .map(|(k, (wins, no_winner))| StageCounts {
            stage: k + 1,
            wins,
            no_winner,
        })
        .collect();
    Ok(SimulationStats {
        games: config.games,
        seed: config.seed,
        players,
        stages,
        clamp_events: total.clamp_events,
    })
}

/// Writes trace rows as CSV with columns `game_id, stage, investment_1..m,
/// winner, fee, resource_1..m_after`. Winners are 1-based; an empty field
/// means no winner.
pub fn write_trace_csv<'t, W: Write>(
    out: W,
    players: usize,
    traces: impl IntoIterator<Item = (u64, &'t GameTrace)>,
) -> Result<(), SimulationError> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["game_id".to_string(), "stage".to_string()];
    header.extend((1..=players).map(|i| format!("investment_{i}")));
    header.push("winner".into());
    header.push("fee".into());
    header.extend((1..=players).map(|i| format!("resource_{i}_after")));
    writer.write_record(&header)?;
    for (game_id, trace) in traces {
        for row in &trace.rows {
            let mut record = vec![game_id.to_string(), row.stage.to_string()];
            record.extend(row.investments.iter().map(f64::to_string));
            record.push(row.winner.map(|w| (w + 1).to_string()).unwrap_or_default());
            record.push(row.fee_paid.to_string());
            record.extend(row.resources_after.iter().map(f64::to_string));
            writer.write_record(&record)?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
