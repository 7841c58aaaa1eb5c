//! Game data model and stage mechanics.
//!
//! Stages are indexed from 0 internally (`GameState::stage == n` is the
//! terminal state); user-facing output numbers stages and players from 1.
//! Resource quantities (investments, fees, remaining resources) and payoff
//! quantities are kept in separate fields and never combined.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing investments against their bounds.
pub const REL_TOL: f64 = 1e-12;

/// Absolute slack allowed around a bound of magnitude `scale`.
pub fn tolerance(scale: f64) -> f64 {
    REL_TOL * scale.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("game needs at least one stage")]
    NoStages,
    #[error("game needs at least two players, got {0}")]
    TooFewPlayers(usize),
    #[error("payoff must be positive (stage {stage}: {value})")]
    NonPositivePayoff { stage: usize, value: f64 },
    #[error("fee must be nonnegative (stage {stage}: {value})")]
    NegativeFee { stage: usize, value: f64 },
    #[error("resource must be nonnegative (player {player}: {value})")]
    NegativeResource { player: usize, value: f64 },
    #[error("{what} must be finite")]
    NonFinite { what: &'static str },
    #[error("expected {} or {stages} fees for {stages} stages, got {got}", stages - 1)]
    FeeCount { stages: usize, got: usize },
    #[error("fee of the last stage must be 0, got {0}")]
    LastFeeNonZero(f64),
    #[error("declared {declared} stages but {actual} payoffs were given")]
    StageCountMismatch { declared: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("the game is over; no stage left to play")]
    Terminal,
    #[error("player {0} does not exist")]
    NoSuchPlayer(usize),
    #[error("investment profile has {got} entries for {players} players")]
    ProfileLength { players: usize, got: usize },
    #[error("investment must be nonnegative (player {player}: {value})")]
    NegativeInvestment { player: usize, value: f64 },
    #[error("player {player} invested {investment} with only {resource} available")]
    Overdrawn {
        player: usize,
        investment: f64,
        resource: f64,
    },
    #[error("winner {player} cannot pay fee {fee} from remaining {remaining}")]
    FeeUnpaid {
        player: usize,
        fee: f64,
        remaining: f64,
    },
    #[error("outcome winner is inconsistent with the investments")]
    InconsistentOutcome,
}

/// Unvalidated game description, as read from config files.
///
/// `fees` may have length `n - 1` (the last-stage fee is implied) or `n`
/// (the last entry must then be 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    pub fees: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub resources: Vec<f64>,
}

/// Immutable, validated game description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct GameSpec {
    fees: Vec<f64>,
    payoffs: Vec<f64>,
    resources: Vec<f64>,
}

pub fn validate_spec(raw: RawSpec) -> Result<GameSpec, SpecError> {
    let n = raw.payoffs.len();
    if n == 0 {
        return Err(SpecError::NoStages);
    }
    if let Some(declared) = raw.stages {
        if declared != n {
            return Err(SpecError::StageCountMismatch {
                declared,
                actual: n,
            });
        }
    }
    if raw.resources.len() < 2 {
        return Err(SpecError::TooFewPlayers(raw.resources.len()));
    }
    for (k, &w) in raw.payoffs.iter().enumerate() {
        if !w.is_finite() {
            return Err(SpecError::NonFinite { what: "payoff" });
        }
        if w <= 0.0 {
            return Err(SpecError::NonPositivePayoff {
                stage: k + 1,
                value: w,
            });
        }
    }
    let mut fees = raw.fees;
    for (k, &c) in fees.iter().enumerate() {
        if !c.is_finite() {
            return Err(SpecError::NonFinite { what: "fee" });
        }
        if c < 0.0 {
            return Err(SpecError::NegativeFee {
                stage: k + 1,
                value: c,
            });
        }
    }
    if fees.len() == n - 1 {
        fees.push(0.0);
    } else if fees.len() == n {
        if fees[n - 1] != 0.0 {
            return Err(SpecError::LastFeeNonZero(fees[n - 1]));
        }
    } else {
        return Err(SpecError::FeeCount {
            stages: n,
            got: fees.len(),
        });
    }
    for (i, &a) in raw.resources.iter().enumerate() {
        if !a.is_finite() {
            return Err(SpecError::NonFinite { what: "resource" });
        }
        if a < 0.0 {
            return Err(SpecError::NegativeResource {
                player: i + 1,
                value: a,
            });
        }
    }
    Ok(GameSpec {
        fees,
        payoffs: raw.payoffs,
        resources: raw.resources,
    })
}

impl TryFrom<RawSpec> for GameSpec {
    type Error = SpecError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        validate_spec(raw)
    }
}

impl From<GameSpec> for RawSpec {
    fn from(spec: GameSpec) -> Self {
        RawSpec {
            stages: Some(spec.payoffs.len()),
            fees: spec.fees,
            payoffs: spec.payoffs,
            resources: spec.resources,
        }
    }
}

impl GameSpec {
    /// Builds and validates a spec; `fees` follows the same length rule as [`RawSpec`].
    pub fn new(fees: Vec<f64>, payoffs: Vec<f64>, resources: Vec<f64>) -> Result<Self, SpecError> {
        validate_spec(RawSpec {
            stages: None,
            fees,
            payoffs,
            resources,
        })
    }

    pub fn stages(&self) -> usize {
        self.payoffs.len()
    }

    pub fn players(&self) -> usize {
        self.resources.len()
    }

    /// Fees `c_1..c_n`, with `c_n = 0`.
    pub fn fees(&self) -> &[f64] {
        &self.fees
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn initial_resources(&self) -> &[f64] {
        &self.resources
    }

    pub fn total_payoff(&self) -> f64 {
        self.suffix().total()
    }

    pub fn suffix(&self) -> SuffixPayoffs {
        suffix_payoffs(&self.payoffs).expect("validated spec has at least one stage")
    }

    /// Same fees and payoffs with different starting resources.
    pub fn with_resources(&self, resources: Vec<f64>) -> Result<Self, SpecError> {
        GameSpec::new(self.fees.clone(), self.payoffs.clone(), resources)
    }

    pub fn initial_state(&self) -> GameState {
        GameState {
            stage: 0,
            resources: self.resources.clone(),
            cumulative_payoffs: vec![0.0; self.players()],
        }
    }
}

/// Suffix sums `W_k = w_k + ... + w_n`, stored with a trailing `W_{n+1} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffixPayoffs {
    values: Vec<f64>,
}

impl SuffixPayoffs {
    /// `W` at 0-based stage `k`; `k == n` yields 0.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn total(&self) -> f64 {
        self.values[0]
    }

    pub fn stages(&self) -> usize {
        self.values.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }
}

pub fn suffix_payoffs(payoffs: &[f64]) -> Result<SuffixPayoffs, SpecError> {
    if payoffs.is_empty() {
        return Err(SpecError::NoStages);
    }
    let mut values = vec![0.0; payoffs.len() + 1];
    for k in (0..payoffs.len()).rev() {
        values[k] = payoffs[k] + values[k + 1];
    }
    Ok(SuffixPayoffs { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    /// 0-based index of the stage about to be played.
    pub stage: usize,
    pub resources: Vec<f64>,
    pub cumulative_payoffs: Vec<f64>,
}

impl GameState {
    pub fn is_terminal(&self, spec: &GameSpec) -> bool {
        self.stage >= spec.stages()
    }

    pub fn total_resources(&self) -> f64 {
        self.resources.iter().sum()
    }
}

/// What happened at one stage: who won (if anyone) and what everyone invested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    /// 0-based player index; `None` when every investment was 0.
    pub winner: Option<usize>,
    pub investments: Vec<f64>,
}

/// Closed interval `[lo, hi]` of allowed investments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Accepts `x` if it lies in the interval up to the relative tolerance
    /// (scaled by `resource`), snapping grazing values onto the bound.
    pub fn admit(&self, x: f64, resource: f64) -> Option<f64> {
        let slack = tolerance(resource);
        if x.is_nan() || x < self.lo - slack || x > self.hi + slack {
            None
        } else {
            Some(x.clamp(self.lo, self.hi))
        }
    }

    /// Clamps `x` into the interval; the flag reports whether `x` was
    /// outside by more than the tolerance.
    pub fn clamp(&self, x: f64, resource: f64) -> (f64, bool) {
        match self.admit(x, resource) {
            Some(v) => (v, false),
            None if x.is_nan() => (self.lo, true),
            None => (x.clamp(self.lo, self.hi), true),
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_degenerate() {
            write!(f, "{{{}}}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

/// Investments available to `player` at the current stage: `[0, A - c]`
/// when the player can cover the fee, otherwise only 0.
pub fn allowed_interval(state: &GameState, player: usize, spec: &GameSpec) -> Result<Interval, GameError> {
    if state.is_terminal(spec) {
        return Err(GameError::Terminal);
    }
    let resource = *state
        .resources
        .get(player)
        .ok_or(GameError::NoSuchPlayer(player))?;
    let fee = spec.fees()[state.stage];
    let hi = if resource >= fee { resource - fee } else { 0.0 };
    Ok(Interval { lo: 0.0, hi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinProbabilities {
    pub players: Vec<f64>,
    pub no_winner: f64,
}

/// Proportional contest: player `i` wins with probability `x_i / sum x`.
pub fn win_probabilities(investments: &[f64]) -> Result<WinProbabilities, GameError> {
    for (i, &x) in investments.iter().enumerate() {
        if x.is_nan() || x < 0.0 {
            return Err(GameError::NegativeInvestment {
                player: i,
                value: x,
            });
        }
    }
    let total: f64 = investments.iter().sum();
    if total == 0.0 {
        return Ok(WinProbabilities {
            players: vec![0.0; investments.len()],
            no_winner: 1.0,
        });
    }
    Ok(WinProbabilities {
        players: investments.iter().map(|x| x / total).collect(),
        no_winner: 0.0,
    })
}

/// Resolves a stage from one uniform draw `u` in `[0, 1)` by scanning the
/// cumulative win probabilities in ascending player order.
pub fn sample_stage(investments: &[f64], u: f64) -> StageOutcome {
    let total: f64 = investments.iter().sum();
    let winner = if total > 0.0 {
        let mut cumulative = 0.0;
        let mut chosen = None;
        for (i, &x) in investments.iter().enumerate() {
            cumulative += x / total;
            if x > 0.0 && cumulative > u {
                chosen = Some(i);
                break;
            }
        }
        // rounding can leave the final cumulative sum a hair below u
        chosen.or_else(|| investments.iter().rposition(|&x| x > 0.0))
    } else {
        None
    };
    StageOutcome {
        winner,
        investments: investments.to_vec(),
    }
}

/// Applies a resolved stage: everyone pays their investment, the winner
/// additionally pays the stage fee and collects the stage payoff.
pub fn apply_outcome(state: &GameState, outcome: &StageOutcome, spec: &GameSpec) -> Result<GameState, GameError> {
    if state.is_terminal(spec) {
        return Err(GameError::Terminal);
    }
    let m = spec.players();
    if outcome.investments.len() != m {
        return Err(GameError::ProfileLength {
            players: m,
            got: outcome.investments.len(),
        });
    }
    let all_zero = outcome.investments.iter().all(|&x| x == 0.0);
    match outcome.winner {
        None if !all_zero => return Err(GameError::InconsistentOutcome),
        Some(w) if w >= m => return Err(GameError::NoSuchPlayer(w)),
        Some(w) if outcome.investments[w] <= 0.0 => return Err(GameError::InconsistentOutcome),
        _ => {}
    }

    let k = state.stage;
    let mut next = state.clone();
    for (i, &x) in outcome.investments.iter().enumerate() {
        if x.is_nan() || x < 0.0 {
            return Err(GameError::NegativeInvestment {
                player: i,
                value: x,
            });
        }
        let resource = state.resources[i];
        let remaining = resource - x;
        if remaining < -tolerance(resource) {
            return Err(GameError::Overdrawn {
                player: i,
                investment: x,
                resource,
            });
        }
        next.resources[i] = remaining.max(0.0);
    }
    if let Some(w) = outcome.winner {
        let fee = spec.fees()[k];
        let remaining = next.resources[w] - fee;
        if remaining < -tolerance(state.resources[w]) {
            return Err(GameError::FeeUnpaid {
                player: w,
                fee,
                remaining: next.resources[w],
            });
        }
        next.resources[w] = remaining.max(0.0);
        next.cumulative_payoffs[w] += spec.payoffs()[k];
    }
    next.stage += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_stage() -> GameSpec {
        GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![10.0, 10.0]).unwrap()
    }

    #[test]
    fn validate_appends_last_fee() {
        let spec = two_stage();
        assert_eq!(spec.fees(), &[1.0, 0.0]);
        assert_eq!(spec.stages(), 2);
        assert_eq!(spec.players(), 2);
    }

    #[test]
    fn validate_rejects_bad_input() {
        let err = GameSpec::new(vec![1.0], vec![1.0, 0.0], vec![1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("payoff must be positive"));
        let err = GameSpec::new(vec![-1.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("fee must be nonnegative"));
        let err = GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![1.0, -2.0]).unwrap_err();
        assert!(matches!(err, SpecError::NegativeResource { player: 2, .. }));
        assert_eq!(
            GameSpec::new(vec![], vec![], vec![1.0, 1.0]).unwrap_err(),
            SpecError::NoStages
        );
        assert_eq!(
            GameSpec::new(vec![], vec![1.0], vec![1.0]).unwrap_err(),
            SpecError::TooFewPlayers(1)
        );
        assert_eq!(
            GameSpec::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap_err(),
            SpecError::LastFeeNonZero(2.0)
        );
        assert!(matches!(
            GameSpec::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(SpecError::FeeCount { .. })
        ));
        assert!(matches!(
            GameSpec::new(vec![f64::NAN], vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(SpecError::NonFinite { .. })
        ));
    }

    #[test]
    fn spec_serde_validates() {
        let spec: GameSpec =
            serde_json::from_str(r#"{"fees":[1],"payoffs":[1,1],"resources":[10,10]}"#).unwrap();
        assert_eq!(spec, two_stage());
        let back: GameSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<GameSpec>(r#"{"fees":[-1],"payoffs":[1,1],"resources":[1,1]}"#).is_err());
    }

    #[test]
    fn allowed_interval_rules() {
        let spec = GameSpec::new(vec![2.0], vec![1.0, 1.0], vec![5.0, 1.0]).unwrap();
        let state = spec.initial_state();
        assert_eq!(allowed_interval(&state, 0, &spec).unwrap(), Interval { lo: 0.0, hi: 3.0 });
        let only_zero = allowed_interval(&state, 1, &spec).unwrap();
        assert!(only_zero.is_degenerate());
        assert_eq!(only_zero.hi, 0.0);

        let last = GameState {
            stage: 1,
            resources: vec![7.0, 1.0],
            cumulative_payoffs: vec![0.0, 0.0],
        };
        assert_eq!(allowed_interval(&last, 0, &spec).unwrap().hi, 7.0);

        let done = GameState { stage: 2, ..last };
        assert_eq!(allowed_interval(&done, 0, &spec), Err(GameError::Terminal));
    }

    #[test]
    fn admit_snaps_within_tolerance() {
        let iv = Interval { lo: 0.0, hi: 3.0 };
        assert_eq!(iv.admit(3.0 + 1e-13, 5.0), Some(3.0));
        assert_eq!(iv.admit(-1e-13, 5.0), Some(0.0));
        assert_eq!(iv.admit(3.1, 5.0), None);
        assert_eq!(iv.clamp(3.1, 5.0), (3.0, true));
        assert_eq!(iv.clamp(-2.0, 5.0), (0.0, true));
        assert_eq!(iv.clamp(1.0, 5.0), (1.0, false));
    }

    #[test]
    fn win_probability_examples() {
        let p = win_probabilities(&[0.0, 0.0]).unwrap();
        assert_eq!(p.no_winner, 1.0);
        assert_eq!(p.players, vec![0.0, 0.0]);
        let p = win_probabilities(&[3.0, 1.0]).unwrap();
        assert_eq!(p.players, vec![0.75, 0.25]);
        assert_eq!(p.no_winner, 0.0);
        let p = win_probabilities(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.players, vec![0.25, 0.25, 0.5]);
        assert!(win_probabilities(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn sample_stage_examples() {
        assert_eq!(sample_stage(&[3.0, 1.0], 0.7).winner, Some(0));
        assert_eq!(sample_stage(&[3.0, 1.0], 0.8).winner, Some(1));
        assert_eq!(sample_stage(&[3.0, 1.0], 0.75).winner, Some(1));
        assert_eq!(sample_stage(&[0.0, 0.0], 0.3).winner, None);
        // zero investors are never chosen, even at u = 0
        assert_eq!(sample_stage(&[0.0, 2.0], 0.0).winner, Some(1));
        assert_eq!(sample_stage(&[1.0, 0.0], 0.999_999_999_999).winner, Some(0));
    }

    #[test]
    fn apply_outcome_examples() {
        let spec = two_stage();
        let state = spec.initial_state();
        let next = apply_outcome(
            &state,
            &StageOutcome {
                winner: Some(0),
                investments: vec![4.5, 4.5],
            },
            &spec,
        )
        .unwrap();
        assert_eq!(next.resources, vec![4.5, 5.5]);
        assert_eq!(next.cumulative_payoffs, vec![1.0, 0.0]);
        assert_eq!(next.stage, 1);

        let idle = apply_outcome(
            &state,
            &StageOutcome {
                winner: None,
                investments: vec![0.0, 0.0],
            },
            &spec,
        )
        .unwrap();
        assert_eq!(idle.resources, state.resources);
        assert_eq!(idle.stage, 1);

        let free = GameSpec::new(vec![0.0], vec![1.0, 1.0], vec![10.0, 10.0]).unwrap();
        let next = apply_outcome(
            &free.initial_state(),
            &StageOutcome {
                winner: Some(1),
                investments: vec![2.0, 3.0],
            },
            &free,
        )
        .unwrap();
        assert_eq!(next.resources, vec![8.0, 7.0]);
    }

    #[test]
    fn apply_outcome_errors() {
        let spec = GameSpec::new(vec![3.0], vec![1.0, 1.0], vec![4.0, 10.0]).unwrap();
        let state = spec.initial_state();
        let err = apply_outcome(
            &state,
            &StageOutcome {
                winner: Some(0),
                investments: vec![2.0, 1.0],
            },
            &spec,
        )
        .unwrap_err();
        assert!(matches!(err, GameError::FeeUnpaid { player: 0, .. }));
        let err = apply_outcome(
            &state,
            &StageOutcome {
                winner: None,
                investments: vec![1.0, 0.0],
            },
            &spec,
        )
        .unwrap_err();
        assert_eq!(err, GameError::InconsistentOutcome);
        let err = apply_outcome(
            &state,
            &StageOutcome {
                winner: Some(1),
                investments: vec![5.0, 1.0],
            },
            &spec,
        )
        .unwrap_err();
        assert!(matches!(err, GameError::Overdrawn { player: 0, .. }));
    }

    #[test]
    fn suffix_examples() {
        assert_eq!(suffix_payoffs(&[1.0, 2.0, 3.0]).unwrap().as_slice(), &[6.0, 5.0, 3.0]);
        assert_eq!(suffix_payoffs(&[1.0]).unwrap().as_slice(), &[1.0]);
        let s = suffix_payoffs(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.as_slice(), &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(s.at(4), 0.0);
        assert_eq!(s.total(), 4.0);
        assert_eq!(suffix_payoffs(&[]).unwrap_err(), SpecError::NoStages);
    }
}
