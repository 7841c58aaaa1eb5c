//! Command-line driver.
//!
//! One JSON experiment config per run. Subcommands print a text summary by
//! default; `--format json` prints the full report instead, and `--out`
//! writes the report (JSON, or CSV traces for `simulate`) to a file.
//! Exit codes: 0 success, 1 verification failure, 2 invalid input.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::equilibrium::{
    check_hypothesis, equilibrium_investment, is_effective, proportional_value, threshold, EquilibriumError,
    ThresholdReport,
};
use crate::game::{allowed_interval, validate_spec, GameError, GameSpec, RawSpec, SpecError};
use crate::montecarlo::{
    instantiate, run_games, trace_game, write_trace_csv, GameTrace, SimulationConfig, SimulationError,
    SimulationStats, Stepper,
};
use crate::oracle::{one_shot_deviation_scan, NashReport, OracleError, ScanOptions, Verdict, NASH_TOLERANCE};
use crate::rng::game_seed;
use crate::strategies::{StrategyError, StrategySpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

const DEFAULT_GAMES: u64 = 100_000;
const DEFAULT_GRID: usize = 257;

#[derive(Debug, Parser)]
#[command(name = "blotto", version, about = "Sequential Colonel Blotto with costly winnings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Task,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub games: Option<u64>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Write the report to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Threshold M and its per-stage terms.
    Threshold,
    /// Equilibrium investments along the expected path and equilibrium values.
    Equilibrium,
    /// Monte Carlo simulation of the configured profile.
    Simulate,
    /// One-shot deviation scan of the configured profile.
    VerifyNash,
    /// PI-effectiveness of each player against the rest.
    Effective,
    /// Interactive game against the configured profile.
    Play,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub games: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Relative Nash tolerance (times `W`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<u64>,
    /// 1-based player: the deviator for `verify-nash`, the human for `play`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: RawSpec,
    /// One per player; empty means everyone plays the equilibrium.
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no config given (use --config <path>)")]
    NoConfig,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("io: {0}")]
    Stream(#[from] std::io::Error),
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid game: {0}")]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("input ended before the game was over")]
    InputClosed,
}

/// Reproducibility block carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub task: Task,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutput {
    pub metadata: Metadata,
    pub threshold: ThresholdReport,
    pub above_threshold: Vec<bool>,
    pub checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStage {
    pub stage: usize,
    pub resources: Vec<f64>,
    pub investments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutput {
    pub metadata: Metadata,
    #[serde(rename = "M")]
    pub threshold: f64,
    /// Deterministic path where each player pays its expected fee share.
    pub expected_path: Vec<PathStage>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub metadata: Metadata,
    pub profile: Vec<StrategySpec>,
    pub stats: SimulationStats,
    /// Equilibrium values, when every player exceeds `M`.
    #[serde(default)]
    pub theory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub metadata: Metadata,
    pub profile: Vec<StrategySpec>,
    pub verdict: Verdict,
    pub reports: Vec<NashReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveEntry {
    pub player: usize,
    pub resource: f64,
    #[serde(default)]
    pub effective: Option<bool>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveOutput {
    pub metadata: Metadata,
    #[serde(rename = "M")]
    pub threshold: f64,
    pub players: Vec<EffectiveEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayOutput {
    pub metadata: Metadata,
    /// 1-based human player.
    pub human: usize,
    pub trace: GameTrace,
    pub expectation: Vec<f64>,
}

/// A config resolved against command-line overrides.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub task: Task,
    pub spec: GameSpec,
    pub profile: Vec<StrategySpec>,
    pub params: TaskParams,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub config_hash: String,
}

impl Experiment {
    pub fn load(cli: &Cli) -> Result<Self, CliError> {
        let path = cli.config.as_ref().ok_or(CliError::NoConfig)?;
        let bytes = fs::read(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes)?;
        Self::resolve(cli, config, hex_digest(&bytes))
    }

    pub fn resolve(cli: &Cli, config: ExperimentConfig, config_hash: String) -> Result<Self, CliError> {
        if let Some(task) = config.task {
            if task != cli.command {
                return Err(CliError::Config(format!(
                    "config is for task {task:?}, but {:?} was requested",
                    cli.command
                )));
            }
        }
        let spec = validate_spec(config.game)?;
        let profile = if config.strategies.is_empty() {
            vec![StrategySpec::Equilibrium; spec.players()]
        } else {
            config.strategies
        };
        if profile.len() != spec.players() {
            return Err(CliError::Config(format!(
                "{} strategies given for {} players",
                profile.len(),
                spec.players()
            )));
        }
        for s in &profile {
            s.validate()?;
        }
        let mut params = config.params;
        params.seed = cli.seed.or(params.seed);
        params.games = cli.games.or(params.games);
        params.grid = cli.grid.or(params.grid);
        if let Some(p) = params.player {
            if p == 0 || p > spec.players() {
                return Err(CliError::Config(format!("player {p} does not exist")));
            }
        }
        Ok(Experiment {
            task: cli.command,
            spec,
            profile,
            params,
            format: cli.format.or(config.output.format).unwrap_or_default(),
            out: cli.out.clone().or(config.output.path),
            config_hash,
        })
    }

    fn metadata(&self, seed: Option<u64>, grid: Option<usize>) -> Metadata {
        Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash.clone(),
            task: self.task,
            seed,
            grid,
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses arguments, runs, and reports errors on stderr; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut output = std::io::stdout().lock();
    match execute(&cli, &mut input, &mut output) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn execute(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<u8, CliError> {
    let exp = Experiment::load(cli)?;
    run_experiment(&exp, input, out)
}

pub fn run_experiment(exp: &Experiment, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<u8, CliError> {
    if exp.format == Format::Csv && exp.task != Task::Simulate {
        return Err(CliError::Config("csv output is only available for simulate".into()));
    }
    match exp.task {
        Task::Threshold => cmd_threshold(exp, out),
        Task::Equilibrium => cmd_equilibrium(exp, out),
        Task::Simulate => cmd_simulate(exp, out),
        Task::VerifyNash => cmd_verify_nash(exp, out),
        Task::Effective => cmd_effective(exp, out),
        Task::Play => cmd_play(exp, input, out),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Emits `report` per the experiment's format and output path; `text` is
/// the human summary.
fn emit<T: Serialize>(exp: &Experiment, report: &T, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)?;
    match (&exp.out, exp.format) {
        (Some(path), _) => {
            write_file(path, json.as_bytes())?;
            out.write_all(text.as_bytes())?;
        }
        (None, Format::Json) => writeln!(out, "{json}")?,
        (None, _) => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn threshold_checks(spec: &GameSpec, m: &ThresholdReport) -> Vec<BoundCheck> {
    let n = spec.stages();
    let unit_payoffs = spec.payoffs().iter().all(|&w| w == 1.0);
    let mut checks = Vec::new();
    if unit_payoffs && spec.fees()[..n - 1].iter().all(|&c| c == 1.0) && n >= 2 {
        let bound = n as f64 * (2.0 + (n as f64).ln());
        checks.push(BoundCheck {
            label: "M < n(2+ln n)".into(),
            bound,
            holds: m.value < bound,
        });
    }
    if unit_payoffs && n >= 2 && spec.fees().iter().enumerate().all(|(k, &c)| c == (n - k - 1) as f64) {
        let bound = (n * (n - 1)) as f64;
        checks.push(BoundCheck {
            label: "M = n(n-1)".into(),
            bound,
            holds: m.value == bound,
        });
    }
    checks
}

pub fn cmd_threshold(exp: &Experiment, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = threshold(&exp.spec);
    let above: Vec<bool> = exp.spec.initial_resources().iter().map(|&a| m.exceeded_by(a)).collect();
    let checks = threshold_checks(&exp.spec, &m);
    let mut text = format!("M = {}\nargmax stage: {}\nper-stage terms: {}\n", m.value, m.argmax_stage, fmt_list(&m.per_stage_terms));
    for (i, (&a, &ok)) in exp.spec.initial_resources().iter().zip(&above).enumerate() {
        text += &format!("player {}: A = {a} {} M\n", i + 1, if ok { ">" } else { "<=" });
    }
    for c in &checks {
        text += &format!("{} = {:.3}: {}\n", c.label, c.bound, if c.holds { "pass" } else { "fail" });
    }
    let report = ThresholdOutput {
        metadata: exp.metadata(None, None),
        threshold: m,
        above_threshold: above,
        checks,
    };
    emit(exp, &report, &text, out)?;
    Ok(EXIT_OK)
}

/// Equilibrium investments along the path where each player's resource
/// drops by its investment plus its expected fee share.
pub fn expected_path(spec: &GameSpec) -> Vec<PathStage> {
    let suffix = spec.suffix();
    let mut state = spec.initial_state();
    let mut path = Vec::with_capacity(spec.stages());
    while !state.is_terminal(spec) {
        let investments: Vec<f64> = (0..spec.players())
            .map(|i| equilibrium_investment(spec, &suffix, &state, i).unwrap_or(0.0))
            .collect();
        let total: f64 = investments.iter().sum();
        let fee = spec.fees()[state.stage];
        path.push(PathStage {
            stage: state.stage + 1,
            resources: state.resources.clone(),
            investments: investments.clone(),
        });
        for (r, x) in state.resources.iter_mut().zip(&investments) {
            let share = if total > 0.0 { x / total } else { 0.0 };
            *r = (*r - x - share * fee).max(0.0);
        }
        state.stage += 1;
    }
    path
}

pub fn cmd_equilibrium(exp: &Experiment, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = threshold(&exp.spec);
    let path = expected_path(&exp.spec);
    let (values, warning) = match crate::equilibrium::equilibrium_value(&exp.spec) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut text = format!("M = {}\n", m.value);
    for row in &path {
        text += &format!(
            "stage {}: resources [{}] invest [{}]\n",
            row.stage,
            fmt_list(&row.resources),
            fmt_list(&row.investments)
        );
    }
    match (&values, &warning) {
        (Some(v), _) => text += &format!("equilibrium values: [{}]\n", fmt_list(v)),
        (None, Some(w)) => text += &format!("warning: {w}; values not computed\n"),
        _ => {}
    }
    let report = EquilibriumOutput {
        metadata: exp.metadata(None, None),
        threshold: m.value,
        expected_path: path,
        values,
        warning,
    };
    emit(exp, &report, &text, out)?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(exp: &Experiment, out: &mut dyn Write) -> Result<u8, CliError> {
    let seed = exp.params.seed.unwrap_or(0);
    let games = exp.params.games.unwrap_or(DEFAULT_GAMES);
    let mut config = SimulationConfig::new(games, seed, exp.profile.clone());
    if let Some(b) = exp.params.batch_size {
        config.batch_size = b;
    }
    let stats = run_games(&exp.spec, &config)?;
    let theory = crate::equilibrium::equilibrium_value(&exp.spec).ok();
    let mut text = format!("games: {games}, seed: {seed}\n");
    for (i, p) in stats.players.iter().enumerate() {
        text += &format!(
            "player {} ({}): mean {:.6} +/- {:.6} (99% CI)",
            i + 1,
            exp.profile[i],
            p.mean,
            p.ci99_half_width
        );
        if let Some(t) = &theory {
            text += &format!(", equilibrium value {:.6}", t[i]);
        }
        text += "\n";
    }
    text += &format!("clamp events: {}\n", stats.clamp_events);

    if exp.format == Format::Csv {
        let traces = (0..games)
            .map(|j| trace_game(&exp.spec, &exp.profile, game_seed(seed, j)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, exp.spec.players(), (0..games).zip(&traces))?;
        match &exp.out {
            Some(path) => {
                write_file(path, &buf)?;
                out.write_all(text.as_bytes())?;
            }
            None => out.write_all(&buf)?,
        }
        return Ok(EXIT_OK);
    }
    let report = SimulateOutput {
        metadata: exp.metadata(Some(seed), None),
        profile: exp.profile.clone(),
        stats,
        theory,
    };
    emit(exp, &report, &text, out)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify_nash(exp: &Experiment, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = threshold(&exp.spec);
    check_hypothesis(&exp.spec, &m)?;
    let grid = exp.params.grid.unwrap_or(DEFAULT_GRID);
    let options = ScanOptions {
        grid,
        relative_tolerance: exp.params.tolerance.unwrap_or(NASH_TOLERANCE),
        limit: None,
    };
    let profile = crate::strategies::build_profile(&exp.profile)?;
    let deviators: Vec<usize> = match exp.params.player {
        Some(p) => vec![p - 1],
        None => (0..exp.spec.players()).collect(),
    };
    let reports = deviators
        .into_iter()
        .map(|d| one_shot_deviation_scan(&exp.spec, &profile, d, options))
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = if reports.iter().all(|r| r.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut text = String::new();
    for r in &reports {
        text += &format!(
            "player {}: {} nodes, max improvement {:e} (tolerance {:e}), max grid step {}: {}\n",
            r.deviator,
            r.nodes.len(),
            r.max_improvement,
            r.tolerance,
            r.max_grid_step,
            if r.verdict == Verdict::Pass { "pass" } else { "fail" }
        );
    }
    text += &format!("verdict: {}\n", if verdict == Verdict::Pass { "pass" } else { "fail" });
    let report = VerifyOutput {
        metadata: exp.metadata(None, Some(grid)),
        profile: exp.profile.clone(),
        verdict,
        reports,
    };
    emit(exp, &report, &text, out)?;
    Ok(if verdict == Verdict::Pass { EXIT_OK } else { EXIT_FAILED })
}

pub fn cmd_effective(exp: &Experiment, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = threshold(&exp.spec);
    let resources = exp.spec.initial_resources();
    let mut entries = Vec::new();
    for (i, &a) in resources.iter().enumerate() {
        // the others act as one joint opponent only if each of them exceeds M
        let short = resources
            .iter()
            .enumerate()
            .find(|&(j, &r)| j != i && !m.exceeded_by(r));
        let (effective, note) = match short {
            Some((j, _)) => (
                None,
                Some(format!("player {} does not exceed M; characterization inapplicable", j + 1)),
            ),
            None => {
                let joint: f64 = resources.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r).sum();
                (Some(is_effective(exp.spec.fees(), exp.spec.payoffs(), a, joint)?), None)
            }
        };
        entries.push(EffectiveEntry {
            player: i + 1,
            resource: a,
            effective,
            note,
        });
    }
    let mut text = format!("M = {}\n", m.value);
    for e in &entries {
        let verdict = match (e.effective, &e.note) {
            (Some(true), _) => "effective".to_string(),
            (Some(false), _) => "not effective".to_string(),
            (None, Some(n)) => n.clone(),
            (None, None) => "unknown".to_string(),
        };
        text += &format!("player {} (A = {}): {verdict}\n", e.player, e.resource);
    }
    let report = EffectiveOutput {
        metadata: exp.metadata(None, None),
        threshold: m.value,
        players: entries,
    };
    emit(exp, &report, &text, out)?;
    Ok(EXIT_OK)
}

/// Runs [`play_session`] and writes its report to `--out`, if given.
pub fn cmd_play(exp: &Experiment, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<u8, CliError> {
    let report = play_session(exp, input, out)?;
    if let Some(path) = &exp.out {
        write_file(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(EXIT_OK)
}

/// Interactive game: the human is `params.player` (default 1), everyone
/// else follows the configured profile. Stage outcomes use the same draw
/// stream as [`trace_game`] with the same seed.
pub fn play_session(exp: &Experiment, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<PlayOutput, CliError> {
    let spec = &exp.spec;
    let seed = exp.params.seed.unwrap_or(0);
    let human = exp.params.player.unwrap_or(1) - 1;
    let mut strategies = instantiate(&exp.profile, seed)?;
    let mut stepper = Stepper::new(spec, seed);
    let mut rows = Vec::with_capacity(spec.stages());
    writeln!(out, "seed {seed}; you are player {}", human + 1)?;
    while !stepper.is_over() {
        let state = stepper.state().clone();
        let k = state.stage;
        writeln!(
            out,
            "\nstage {} of {} | fee {} | payoff {} | payoff remaining {}",
            k + 1,
            spec.stages(),
            spec.fees()[k],
            spec.payoffs()[k],
            stepper.suffix().at(k)
        )?;
        let listing: Vec<String> = state
            .resources
            .iter()
            .enumerate()
            .map(|(i, r)| format!("P{}={r}", i + 1))
            .collect();
        writeln!(out, "resources: {}", listing.join(" "))?;
        let (mut investments, _) = stepper.decide(&mut strategies)?;
        let interval = allowed_interval(&state, human, spec)?;
        write!(out, "your investment (allowed: {interval}): ")?;
        out.flush()?;
        let chosen = loop {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(CliError::InputClosed);
            }
            match line.trim().parse::<f64>().ok().and_then(|x| interval.admit(x, state.resources[human])) {
                Some(x) => break x,
                None => {
                    write!(out, "invalid input; allowed: {interval}: ")?;
                    out.flush()?;
                }
            }
        };
        investments[human] = chosen;
        let row = stepper.play_stage(investments)?;
        let winner = match row.winner {
            Some(w) => format!("player {} wins (fee {})", w + 1, row.fee_paid),
            None => "no winner".to_string(),
        };
        writeln!(out, "investments [{}], draw {}: {winner}", fmt_list(&row.investments), row.draw)?;
        rows.push(row);
    }
    let final_state = stepper.state().clone();
    let expectation = proportional_value(spec.initial_resources(), spec.total_payoff())?;
    let hypothesis = match check_hypothesis(spec, &threshold(spec)) {
        Ok(()) => "every player exceeds M",
        Err(_) => "not every player exceeds M",
    };
    writeln!(out, "\nrealized payoffs: [{}]", fmt_list(&final_state.cumulative_payoffs))?;
    writeln!(out, "equilibrium expectation A^i W / sum A: [{}] ({hypothesis})", fmt_list(&expectation))?;
    Ok(PlayOutput {
        metadata: exp.metadata(Some(seed), None),
        human: human + 1,
        trace: GameTrace {
            seed,
            rows,
            final_state,
            clamp_events: 0,
        },
        expectation,
    })
}
