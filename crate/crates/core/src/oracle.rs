//! Exact expected payoffs by backward recursion over the outcome tree, and
//! Nash verification by one-shot deviation scans.
//!
//! The outcome tree branches on every winner with positive probability, so
//! an `m`-player, `n`-stage game has up to `m^n` leaves. Sums over branches
//! always run in ascending player order, which keeps results reproducible
//! bit-for-bit regardless of how nodes are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{
    check_hypothesis, is_effective, proportional_value, threshold, DeviationCurveParams, EquilibriumError,
};
use crate::game::{apply_outcome, win_probabilities, GameError, GameSpec, GameState, StageOutcome, SuffixPayoffs};
use crate::strategies::{decide, Strategy, StrategyError};

/// Relative tolerance (times `W`) separating floating noise from real gains.
pub const NASH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("{stages} stages exceed the exact-evaluation cap of {cap} for {players} players")]
    TreeTooLarge { stages: usize, cap: usize, players: usize },
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("player {0} does not exist")]
    NoSuchPlayer(usize),
    #[error("deviation curves need a two-player game with at least two stages")]
    UnsupportedShape,
}

/// Bound on the depth of exactly evaluated outcome trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLimit {
    pub max_stages: usize,
}

impl TreeLimit {
    const MAX_LEAVES: u64 = 20_000;

    /// Largest depth whose `m`-ary tree has at most 20 000 leaves
    /// (14 stages for two players, 9 for three).
    pub fn default_for(players: usize) -> Self {
        let mut depth = 0;
        let mut leaves: u64 = 1;
        while let Some(next) = leaves.checked_mul(players.max(2) as u64) {
            if next > Self::MAX_LEAVES {
                break;
            }
            leaves = next;
            depth += 1;
        }
        TreeLimit { max_stages: depth }
    }

    pub fn check(&self, spec: &GameSpec) -> Result<(), OracleError> {
        if spec.stages() > self.max_stages {
            return Err(OracleError::TreeTooLarge {
                stages: spec.stages(),
                cap: self.max_stages,
                players: spec.players(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffReport {
    pub expected_payoffs: Vec<f64>,
    pub method: Method,
    pub node_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
}

/// Continuation payoffs of one node of an explored tree.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValue {
    pub state: GameState,
    pub values: Vec<f64>,
}

struct Evaluator<'a> {
    spec: &'a GameSpec,
    suffix: SuffixPayoffs,
    profile: Vec<Box<dyn Strategy>>,
    history: Vec<StageOutcome>,
    nodes: u64,
    observed: Option<Vec<NodeValue>>,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a GameSpec, profile: Vec<Box<dyn Strategy>>) -> Self {
        Evaluator {
            spec,
            suffix: spec.suffix(),
            profile,
            history: Vec::new(),
            nodes: 0,
            observed: None,
        }
    }

    /// Expected payoffs collected from `state` onward.
    fn continuation(&mut self, state: &GameState) -> Result<Vec<f64>, GameError> {
        if state.is_terminal(self.spec) {
            return Ok(vec![0.0; self.spec.players()]);
        }
        self.nodes += 1;
        let decision = decide(&mut self.profile, self.spec, &self.suffix, state, &self.history)?;
        let values = self.stage_values(state, &decision.investments)?;
        if let Some(observed) = self.observed.as_mut() {
            observed.push(NodeValue {
                state: state.clone(),
                values: values.clone(),
            });
        }
        Ok(values)
    }

    /// Expected payoffs from this stage on, for fixed stage investments and
    /// profile play afterwards.
    fn stage_values(&mut self, state: &GameState, investments: &[f64]) -> Result<Vec<f64>, GameError> {
        let probs = win_probabilities(investments)?;
        let payoff = self.spec.payoffs()[state.stage];
        let mut total = vec![0.0; self.spec.players()];
        if probs.no_winner == 1.0 {
            return self.branch(state, None, investments);
        }
        for (w, &p) in probs.players.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let child = self.branch(state, Some(w), investments)?;
            for (t, v) in total.iter_mut().zip(&child) {
                *t += p * v;
            }
            total[w] += p * payoff;
        }
        Ok(total)
    }

    fn branch(&mut self, state: &GameState, winner: Option<usize>, investments: &[f64]) -> Result<Vec<f64>, GameError> {
        let outcome = StageOutcome {
            winner,
            investments: investments.to_vec(),
        };
        let child = apply_outcome(state, &outcome, self.spec)?;
        self.history.push(outcome);
        let values = self.continuation(&child);
        self.history.pop();
        values
    }
}

pub fn exact_expected_payoffs(spec: &GameSpec, profile: &[Box<dyn Strategy>]) -> Result<PayoffReport, OracleError> {
    exact_expected_payoffs_with_limit(spec, profile, TreeLimit::default_for(spec.players()))
}

/// Exact expected total payoffs of `profile` from the initial state.
pub fn exact_expected_payoffs_with_limit(
    spec: &GameSpec,
    profile: &[Box<dyn Strategy>],
    limit: TreeLimit,
) -> Result<PayoffReport, OracleError> {
    limit.check(spec)?;
    let mut eval = Evaluator::new(spec, profile.to_vec());
    let expected_payoffs = eval.continuation(&spec.initial_state())?;
    Ok(PayoffReport {
        expected_payoffs,
        method: Method::Exact,
        node_count: eval.nodes,
        standard_errors: None,
    })
}

/// Continuation payoffs at every decision node of the profile's tree.
pub fn node_values(spec: &GameSpec, profile: &[Box<dyn Strategy>], limit: TreeLimit) -> Result<Vec<NodeValue>, OracleError> {
    limit.check(spec)?;
    let mut eval = Evaluator::new(spec, profile.to_vec());
    eval.observed = Some(Vec::new());
    eval.continuation(&spec.initial_state())?;
    Ok(eval.observed.unwrap_or_default())
}

/// A decision node reachable with positive probability under profile play.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: GameState,
    pub history: Vec<StageOutcome>,
    /// Investments the profile makes at this node.
    pub investments: Vec<f64>,
    pub reach_probability: f64,
}

fn root_node(spec: &GameSpec, profile: &[Box<dyn Strategy>]) -> Result<TreeNode, OracleError> {
    let state = spec.initial_state();
    let mut profile = profile.to_vec();
    let investments = decide(&mut profile, spec, &spec.suffix(), &state, &[])?.investments;
    Ok(TreeNode {
        state,
        history: Vec::new(),
        investments,
        reach_probability: 1.0,
    })
}

/// Every reachable decision node, in depth-first order (winners ascending).
pub fn enumerate_tree(spec: &GameSpec, profile: &[Box<dyn Strategy>], limit: TreeLimit) -> Result<Vec<TreeNode>, OracleError> {
    limit.check(spec)?;
    let suffix = spec.suffix();
    let mut profile = profile.to_vec();
    let mut nodes = Vec::new();
    let mut history = Vec::new();
    walk(spec, &suffix, &mut profile, spec.initial_state(), &mut history, 1.0, &mut nodes)?;
    Ok(nodes)
}

fn walk(
    spec: &GameSpec,
    suffix: &SuffixPayoffs,
    profile: &mut [Box<dyn Strategy>],
    state: GameState,
    history: &mut Vec<StageOutcome>,
    reach: f64,
    nodes: &mut Vec<TreeNode>,
) -> Result<(), OracleError> {
    if state.is_terminal(spec) {
        return Ok(());
    }
    let investments = decide(profile, spec, suffix, &state, history)?.investments;
    let probs = win_probabilities(&investments)?;
    nodes.push(TreeNode {
        state: state.clone(),
        history: history.clone(),
        investments: investments.clone(),
        reach_probability: reach,
    });
    let winners: Vec<(Option<usize>, f64)> = if probs.no_winner == 1.0 {
        vec![(None, 1.0)]
    } else {
        probs
            .players
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(w, &p)| (Some(w), p))
            .collect()
    };
    for (winner, p) in winners {
        let outcome = StageOutcome {
            winner,
            investments: investments.clone(),
        };
        let child = apply_outcome(&state, &outcome, spec)?;
        history.push(outcome);
        walk(spec, suffix, profile, child, history, reach * p, nodes)?;
        history.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgameReport {
    pub nodes: usize,
    /// Largest `|V^i_k - A^i_k W_k / sum_j A^j_k|` divided by `W_k`.
    pub max_scaled_error: f64,
    pub pass: bool,
}

/// Checks that every node's continuation value matches the proportional
/// share of the remaining payoff.
pub fn subgame_value_check(spec: &GameSpec, profile: &[Box<dyn Strategy>]) -> Result<SubgameReport, OracleError> {
    check_hypothesis(spec, &threshold(spec))?;
    let suffix = spec.suffix();
    let nodes = node_values(spec, profile, TreeLimit::default_for(spec.players()))?;
    let mut max_scaled_error: f64 = 0.0;
    for node in &nodes {
        let remaining = suffix.at(node.state.stage);
        let expected = proportional_value(&node.state.resources, remaining)?;
        for (v, e) in node.values.iter().zip(&expected) {
            max_scaled_error = max_scaled_error.max((v - e).abs() / remaining);
        }
    }
    Ok(SubgameReport {
        nodes: nodes.len(),
        max_scaled_error,
        pass: max_scaled_error <= NASH_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub grid: usize,
    /// Allowed gain, as a fraction of the total payoff `W`.
    pub relative_tolerance: f64,
    pub limit: Option<TreeLimit>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: 257,
            relative_tolerance: NASH_TOLERANCE,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScan {
    /// 1-based stage.
    pub stage: usize,
    pub resources: Vec<f64>,
    pub conforming_investment: f64,
    pub equilibrium_value: f64,
    pub best_deviation_value: f64,
    pub best_deviation: f64,
    pub grid_step: f64,
    pub improvement: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    /// 1-based deviating player.
    pub deviator: usize,
    pub grid: usize,
    /// Absolute tolerance `relative_tolerance * W`.
    pub tolerance: f64,
    pub max_improvement: f64,
    /// Coarsest grid spacing over all nodes; deviations gaining less than
    /// the payoff change across one step may go undetected.
    pub max_grid_step: f64,
    pub verdict: Verdict,
    pub nodes: Vec<NodeScan>,
}

fn grid_points(hi: f64, grid: usize, conforming: f64) -> (Vec<f64>, f64) {
    if hi <= 0.0 {
        return (vec![0.0], 0.0);
    }
    let step = hi / (grid - 1) as f64;
    let mut points: Vec<f64> = (0..grid)
        .map(|j| if j + 1 == grid { hi } else { j as f64 * step })
        .collect();
    points.push(conforming);
    (points, step)
}

/// Deviator's exact payoff at `node` for each investment in `points`, with
/// profile play everywhere else.
fn deviation_values(
    spec: &GameSpec,
    profile: &[Box<dyn Strategy>],
    node: &TreeNode,
    deviator: usize,
    points: &[f64],
) -> Result<Vec<f64>, OracleError> {
    let mut eval = Evaluator::new(spec, profile.to_vec());
    eval.history = node.history.clone();
    let mut investments = node.investments.clone();
    points
        .iter()
        .map(|&s| {
            investments[deviator] = s;
            Ok(eval.stage_values(&node.state, &investments)?[deviator])
        })
        .collect()
}

/// One-shot deviation scan for `deviator` (0-based): at every reachable
/// node, tries a grid of investments spanning the allowed interval (plus 0
/// and the profile's own choice) with profile play afterwards.
pub fn one_shot_deviation_scan(
    spec: &GameSpec,
    profile: &[Box<dyn Strategy>],
    deviator: usize,
    options: ScanOptions,
) -> Result<NashReport, OracleError> {
    if options.grid < 3 {
        return Err(OracleError::GridTooSmall(options.grid));
    }
    if deviator >= spec.players() {
        return Err(OracleError::NoSuchPlayer(deviator));
    }
    let m = threshold(spec);
    for (i, &a) in spec.initial_resources().iter().enumerate() {
        if i != deviator && !m.exceeded_by(a) {
            return Err(EquilibriumError::HypothesisUnmet {
                player: i + 1,
                resource: a,
                threshold: m.value,
            }
            .into());
        }
    }
    let limit = options.limit.unwrap_or_else(|| TreeLimit::default_for(spec.players()));
    let tree = enumerate_tree(spec, profile, limit)?;
    let tolerance = options.relative_tolerance * spec.total_payoff();

    let scans = tree
        .par_iter()
        .map(|node| {
            let conforming = node.investments[deviator];
            let fee = spec.fees()[node.state.stage];
            let own = node.state.resources[deviator];
            let hi = if own >= fee { own - fee } else { 0.0 };
            let (points, step) = grid_points(hi, options.grid, conforming);
            let values = deviation_values(spec, profile, node, deviator, &points)?;
            let equilibrium_value = *values.last().expect("conforming point is always sampled");
            let (mut best, mut best_value) = (conforming, equilibrium_value);
            for (&s, &v) in points.iter().zip(&values) {
                if v > best_value {
                    best = s;
                    best_value = v;
                }
            }
            let improvement = best_value - equilibrium_value;
            let near = (best - conforming).abs() <= step * (1.0 + 1e-9);
            Ok(NodeScan {
                stage: node.state.stage + 1,
                resources: node.state.resources.clone(),
                conforming_investment: conforming,
                equilibrium_value,
                best_deviation_value: best_value,
                best_deviation: best,
                grid_step: step,
                improvement,
                pass: improvement <= tolerance && near,
            })
        })
        .collect::<Result<Vec<_>, OracleError>>()?;

    let max_improvement = scans.iter().map(|s| s.improvement).fold(0.0, f64::max);
    let max_grid_step = scans.iter().map(|s| s.grid_step).fold(0.0, f64::max);
    let verdict = if scans.iter().all(|s| s.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(NashReport {
        deviator: deviator + 1,
        grid: options.grid,
        tolerance,
        max_improvement,
        max_grid_step,
        verdict,
        nodes: scans,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub investment: f64,
    pub exact: f64,
    pub closed_form: f64,
    /// Whether the stage-two subgames after this investment are
    /// PI-effective, the condition under which the closed form is exact.
    pub continuation_effective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMatchReport {
    pub tolerance: f64,
    /// Largest `|exact - F(s)|` over grid points with effective continuations.
    pub max_gap: f64,
    /// Largest `|exact - F(s)|` over the whole grid.
    pub max_gap_all: f64,
    /// Largest `exact - F(s)`; the closed form is an upper bound everywhere.
    pub max_excess: f64,
    pub ineffective_points: usize,
    pub pass: bool,
    pub points: Vec<CurvePoint>,
}

/// Compares player one's exact stage-one deviation payoffs against the
/// closed-form curve `F(s)` on `grid` points of `[0, A - c_1]` (plus `a_1`).
pub fn deviation_curve_match(spec: &GameSpec, grid: usize) -> Result<CurveMatchReport, OracleError> {
    if grid < 3 {
        return Err(OracleError::GridTooSmall(grid));
    }
    if spec.players() != 2 || spec.stages() < 2 {
        return Err(OracleError::UnsupportedShape);
    }
    let params = DeviationCurveParams::from_spec(spec)?;
    let profile = crate::strategies::build_profile(&vec![crate::strategies::StrategySpec::Equilibrium; 2])?;
    let limit = TreeLimit::default_for(2);
    limit.check(spec)?;
    let root = root_node(spec, &profile)?;
    let (a, c1) = (params.a, params.first_fee);
    let hi = if a >= c1 { a - c1 } else { 0.0 };
    let (points, _) = grid_points(hi, grid, root.investments[0]);
    let exact = deviation_values(spec, &profile, &root, 0, &points)?;

    let fees = &spec.fees()[1..];
    let payoffs = &spec.payoffs()[1..];
    let b1 = params.opponent_investment;
    let b = params.b;
    let mut out = Vec::with_capacity(points.len());
    for (&s, &v) in points.iter().zip(&exact) {
        let closed_form = params.f(s)?;
        let lose = is_effective(fees, payoffs, a - s, (b - b1 - c1).max(0.0))?;
        let continuation_effective = if s == 0.0 {
            lose
        } else {
            lose && is_effective(fees, payoffs, (a - s - c1).max(0.0), b - b1)?
        };
        out.push(CurvePoint {
            investment: s,
            exact: v,
            closed_form,
            continuation_effective,
        });
    }
    let tolerance = NASH_TOLERANCE * spec.total_payoff();
    let gap = |p: &CurvePoint| (p.exact - p.closed_form).abs();
    let max_gap = out.iter().filter(|p| p.continuation_effective).map(gap).fold(0.0, f64::max);
    let max_gap_all = out.iter().map(gap).fold(0.0, f64::max);
    let max_excess = out.iter().map(|p| p.exact - p.closed_form).fold(f64::NEG_INFINITY, f64::max);
    let ineffective_points = out.iter().filter(|p| !p.continuation_effective).count();
    Ok(CurveMatchReport {
        tolerance,
        max_gap,
        max_gap_all,
        max_excess,
        ineffective_points,
        pass: max_gap <= tolerance && max_excess <= tolerance,
        points: out,
    })
}
