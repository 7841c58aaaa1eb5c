//! Closed-form equilibrium quantities.
//!
//! The threshold `M`, the proportional equilibrium investments, the
//! effectiveness induction, equilibrium values, and the stage-one deviation
//! payoff curves `F(s)` and `F̂(x)` used to cross-check the exact oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{allowed_interval, suffix_payoffs, GameError, GameSpec, GameState, Interval, SpecError, SuffixPayoffs};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("hypothesis A>M unmet: player {player} has {resource}, threshold is {threshold}")]
    HypothesisUnmet {
        player: usize,
        resource: f64,
        threshold: f64,
    },
    #[error("characterization inapplicable: opponent resource {resource} does not exceed M = {threshold}")]
    CharacterizationInapplicable { resource: f64, threshold: f64 },
    #[error("all resources are zero")]
    AllResourcesZero,
    #[error("closed forms need a two-player game with at least two stages")]
    UnsupportedShape,
    #[error("x = {x} is outside the deviation domain ({lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("deviation formula denominator is not positive at {at}")]
    NonPositiveDenominator { at: f64 },
}

/// Threshold `M` with the per-stage terms it is the maximum of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    #[serde(rename = "M")]
    pub value: f64,
    /// 1-based stage attaining the maximum (smallest such stage).
    pub argmax_stage: usize,
    /// `W * (c_k / w_k + sum_{i<k} c_i / W_{i+1})` for each stage.
    pub per_stage_terms: Vec<f64>,
}

impl ThresholdReport {
    pub fn exceeded_by(&self, resource: f64) -> bool {
        resource > self.value
    }
}

/// `M = W * max_k (c_k / w_k + sum_{i<k} c_i / W_{i+1})` for a validated spec.
pub fn threshold(spec: &GameSpec) -> ThresholdReport {
    threshold_unchecked(spec.fees(), spec.payoffs())
}

/// Validates `fees` (length `n - 1` or `n`) and `payoffs`, then computes `M`.
pub fn threshold_for(fees: &[f64], payoffs: &[f64]) -> Result<ThresholdReport, SpecError> {
    let spec = GameSpec::new(fees.to_vec(), payoffs.to_vec(), vec![0.0, 0.0])?;
    Ok(threshold(&spec))
}

fn threshold_unchecked(fees: &[f64], payoffs: &[f64]) -> ThresholdReport {
    let suffix = suffix_payoffs(payoffs).expect("nonempty payoffs");
    let total = suffix.total();
    let mut prefix = 0.0;
    let mut per_stage_terms = Vec::with_capacity(payoffs.len());
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..payoffs.len() {
        let fee = fees.get(k).copied().unwrap_or(0.0);
        let term = total * (fee / payoffs[k] + prefix);
        if term > best.0 {
            best = (term, k + 1);
        }
        per_stage_terms.push(term);
        prefix += fee / suffix.at(k + 1).max(f64::MIN_POSITIVE);
    }
    ThresholdReport {
        value: best.0,
        argmax_stage: best.1,
        per_stage_terms,
    }
}

/// Raw equilibrium formula `w_k A / W_k - A c_k / total`, with the fee share
/// taken as 0 when `total` is 0.
pub fn proportional_investment(payoff: f64, suffix: f64, fee: f64, own: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    payoff * own / suffix - own * fee / total
}

/// Equilibrium investment `a^i_k` of `player`, or 0 when it is not allowed.
/// At the last stage the whole remaining resource is invested.
pub fn equilibrium_investment(
    spec: &GameSpec,
    suffix: &SuffixPayoffs,
    state: &GameState,
    player: usize,
) -> Result<f64, GameError> {
    let interval = allowed_interval(state, player, spec)?;
    let k = state.stage;
    let own = state.resources[player];
    if k + 1 == spec.stages() {
        return Ok(own);
    }
    let total = state.total_resources();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let a = proportional_investment(spec.payoffs()[k], suffix.at(k), spec.fees()[k], own, total);
    Ok(interval.admit(a, own).unwrap_or(0.0))
}

/// PI-effectiveness of `(n, A, B)` by the stage-one induction, valid when
/// the opponent's resource exceeds `M`.
///
/// `fees` follows the [`GameSpec`] length rule. Runs in `O(2^n)`.
pub fn is_effective(fees: &[f64], payoffs: &[f64], a: f64, b: f64) -> Result<bool, EquilibriumError> {
    let spec = GameSpec::new(fees.to_vec(), payoffs.to_vec(), vec![a, b])?;
    // a single stage is always effective: everything is invested
    if spec.stages() == 1 {
        return Ok(true);
    }
    let m = threshold(&spec);
    if !(b > m.value) {
        return Err(EquilibriumError::CharacterizationInapplicable {
            resource: b,
            threshold: m.value,
        });
    }
    Ok(effective_from(spec.fees(), spec.payoffs(), a, b))
}

fn effective_from(fees: &[f64], payoffs: &[f64], a: f64, b: f64) -> bool {
    if payoffs.len() <= 1 {
        return true;
    }
    let total_payoff: f64 = payoffs.iter().sum();
    let (w1, c1) = (payoffs[0], fees[0]);
    let total = a + b;
    let a1 = proportional_investment(w1, total_payoff, c1, a, total);
    let b1 = proportional_investment(w1, total_payoff, c1, b, total);
    let interval = Interval {
        lo: 0.0,
        hi: if a >= c1 { a - c1 } else { 0.0 },
    };
    let (fees, payoffs) = (&fees[1..], &payoffs[1..]);
    match interval.admit(a1, a) {
        None => false,
        Some(0.0) => effective_from(fees, payoffs, a, (b - b1 - c1).max(0.0)),
        Some(x) => {
            effective_from(fees, payoffs, (a - x - c1).max(0.0), b - b1)
                && effective_from(fees, payoffs, a - x, (b - b1 - c1).max(0.0))
        }
    }
}

/// True iff `player` kept `A_k > W_k c_k / w_k` at every non-terminal state.
pub fn resource_lower_bound_check(trajectory: &[GameState], spec: &GameSpec, player: usize) -> bool {
    let suffix = spec.suffix();
    trajectory
        .iter()
        .filter(|s| !s.is_terminal(spec))
        .all(|s| {
            let k = s.stage;
            s.resources[player] > suffix.at(k) * spec.fees()[k] / spec.payoffs()[k]
        })
}

/// `A^i W / sum_j A^j` without any hypothesis check.
pub fn proportional_value(resources: &[f64], total_payoff: f64) -> Result<Vec<f64>, EquilibriumError> {
    let total: f64 = resources.iter().sum();
    if total <= 0.0 {
        return Err(EquilibriumError::AllResourcesZero);
    }
    Ok(resources.iter().map(|a| a * total_payoff / total).collect())
}

/// Equilibrium value of each player; refuses unless every resource exceeds `M`.
pub fn equilibrium_value(spec: &GameSpec) -> Result<Vec<f64>, EquilibriumError> {
    if spec.initial_resources().iter().all(|&a| a == 0.0) {
        return Err(EquilibriumError::AllResourcesZero);
    }
    check_hypothesis(spec, &threshold(spec))?;
    proportional_value(spec.initial_resources(), spec.total_payoff())
}

/// Errors on the first player whose resource does not exceed `M`.
pub fn check_hypothesis(spec: &GameSpec, m: &ThresholdReport) -> Result<(), EquilibriumError> {
    for (i, &a) in spec.initial_resources().iter().enumerate() {
        if !m.exceeded_by(a) {
            return Err(EquilibriumError::HypothesisUnmet {
                player: i + 1,
                resource: a,
                threshold: m.value,
            });
        }
    }
    Ok(())
}

/// Inputs of the stage-one deviation curves for player one against an
/// equilibrium opponent with resource `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationCurveParams {
    pub a: f64,
    pub b: f64,
    pub first_payoff: f64,
    pub total_payoff: f64,
    pub tail_payoff: f64,
    pub first_fee: f64,
    /// Opponent's stage-one equilibrium investment.
    pub opponent_investment: f64,
}

impl DeviationCurveParams {
    pub fn new(a: f64, b: f64, first_payoff: f64, total_payoff: f64, tail_payoff: f64, first_fee: f64) -> Self {
        let opponent_investment = first_payoff * b / total_payoff - b * first_fee / (a + b);
        DeviationCurveParams {
            a,
            b,
            first_payoff,
            total_payoff,
            tail_payoff,
            first_fee,
            opponent_investment,
        }
    }

    /// Parameters for a two-player spec of at least two stages whose second
    /// player exceeds `M`.
    pub fn from_spec(spec: &GameSpec) -> Result<Self, EquilibriumError> {
        if spec.players() != 2 || spec.stages() < 2 {
            return Err(EquilibriumError::UnsupportedShape);
        }
        let m = threshold(spec);
        let (a, b) = (spec.initial_resources()[0], spec.initial_resources()[1]);
        if !m.exceeded_by(b) {
            return Err(EquilibriumError::CharacterizationInapplicable {
                resource: b,
                threshold: m.value,
            });
        }
        let suffix = spec.suffix();
        Ok(Self::new(
            a,
            b,
            spec.payoffs()[0],
            suffix.total(),
            suffix.at(1),
            spec.fees()[0],
        ))
    }

    /// Player one's stage-one equilibrium investment `a_1`.
    pub fn equilibrium_investment(&self) -> f64 {
        self.first_payoff * self.a / self.total_payoff - self.a * self.first_fee / (self.a + self.b)
    }

    pub fn value(&self) -> f64 {
        self.a * self.total_payoff / (self.a + self.b)
    }

    /// Domain `(lo, hi]` of `x = s - a_1` corresponding to `0 < s <= A - c_1`.
    pub fn fhat_domain(&self) -> (f64, f64) {
        let sum = self.a + self.b;
        let lo = self.a * self.first_fee / sum - self.first_payoff * self.a / self.total_payoff;
        let hi = self.tail_payoff * self.a / self.total_payoff - self.b * self.first_fee / sum;
        (lo, hi)
    }

    /// `F̂(x) = F(a_1 + x)` in its simplified form.
    pub fn fhat(&self, x: f64) -> Result<f64, EquilibriumError> {
        let (lo, hi) = self.fhat_domain();
        if !(x > lo && x <= hi) {
            return Err(EquilibriumError::OutsideDomain { x, lo, hi });
        }
        let sum = self.a + self.b;
        let w = self.total_payoff;
        let left = self.tail_payoff * sum - w * x;
        let right = w * x - w * self.first_fee + self.first_payoff * sum;
        if !(left > 0.0 && right > 0.0) {
            return Err(EquilibriumError::NonPositiveDenominator { at: x });
        }
        Ok(self.value() - self.b * w.powi(3) * x * x / (sum * left * right))
    }

    /// Two-branch stage-one payoff `F(s)` for investment `s` with
    /// equilibrium continuation values.
    pub fn f(&self, s: f64) -> Result<f64, EquilibriumError> {
        let b1 = self.opponent_investment;
        let denom = self.a + self.b - s - b1 - self.first_fee;
        if !(denom > 0.0) {
            return Err(EquilibriumError::NonPositiveDenominator { at: s });
        }
        if s == 0.0 {
            return Ok(self.a * self.tail_payoff / denom);
        }
        let win = s / (s + b1) * (self.first_payoff + (self.a - s - self.first_fee) * self.tail_payoff / denom);
        let lose = b1 / (s + b1) * (self.a - s) * self.tail_payoff / denom;
        Ok(win + lose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_stage(a: f64, b: f64) -> GameSpec {
        GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![a, b]).unwrap()
    }

    #[test]
    fn threshold_examples() {
        // c_k = n - k, w_k = 1 gives n(n - 1)
        let n = 10;
        let fees: Vec<f64> = (1..=n).map(|k| (n - k) as f64).collect();
        let r = threshold_for(&fees, &vec![1.0; n]).unwrap();
        assert_eq!(r.value, 90.0);

        // 4 * (1 + 1/3 + 1/2) evaluated by hand
        let r = threshold_for(&[1.0, 1.0, 1.0], &[1.0; 4]).unwrap();
        assert!((r.value - 22.0 / 3.0).abs() < 1e-12);
        assert!(r.value < 4.0 * (2.0 + 4f64.ln()));
        assert_eq!(r.per_stage_terms.len(), 4);

        let r = threshold_for(&[], &[3.0]).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax_stage, 1);
    }

    #[test]
    fn threshold_dominates_fee_ratios() {
        let fees = [0.3, 1.2, 0.0, 0.7];
        let payoffs = [1.5, 0.5, 2.0, 1.0, 0.8];
        let r = threshold_for(&fees, &payoffs).unwrap();
        let total: f64 = payoffs.iter().sum();
        for (k, &w) in payoffs.iter().enumerate() {
            let c = fees.get(k).copied().unwrap_or(0.0);
            assert!(r.value >= total * c / w);
        }
        assert_eq!(r.value, r.per_stage_terms[r.argmax_stage - 1]);
    }

    #[test]
    fn investment_examples() {
        let spec = two_stage(10.0, 10.0);
        let suffix = spec.suffix();
        let state = spec.initial_state();
        assert_eq!(equilibrium_investment(&spec, &suffix, &state, 0).unwrap(), 4.5);

        let last = GameState {
            stage: 1,
            resources: vec![3.7, 1.3],
            cumulative_payoffs: vec![1.0, 0.0],
        };
        assert_eq!(equilibrium_investment(&spec, &suffix, &last, 0).unwrap(), 3.7);
        assert_eq!(equilibrium_investment(&spec, &suffix, &last, 1).unwrap(), 1.3);

        let broke = two_stage(0.0, 10.0);
        assert_eq!(equilibrium_investment(&broke, &suffix, &broke.initial_state(), 0).unwrap(), 0.0);

        let nobody = two_stage(0.0, 0.0);
        assert_eq!(equilibrium_investment(&nobody, &suffix, &nobody.initial_state(), 1).unwrap(), 0.0);

        let done = GameState { stage: 2, ..last };
        assert_eq!(equilibrium_investment(&spec, &suffix, &done, 0), Err(GameError::Terminal));
    }

    #[test]
    fn disallowed_investment_falls_back_to_zero() {
        // a_1 = 1.5/2 - 1.5/11.5 > A - c_1 = 0.5
        let spec = two_stage(1.5, 10.0);
        let inv = equilibrium_investment(&spec, &spec.suffix(), &spec.initial_state(), 0).unwrap();
        assert_eq!(inv, 0.0);
    }

    #[test]
    fn effectiveness_examples() {
        assert!(is_effective(&[], &[1.0], 0.3, 10.0).unwrap());
        assert!(is_effective(&[1.0], &[1.0, 1.0], 10.0, 10.0).unwrap());
        assert!(!is_effective(&[1.0], &[1.0, 1.0], 1.5, 10.0).unwrap());
        assert!(matches!(
            is_effective(&[1.0], &[1.0, 1.0], 10.0, 2.0),
            Err(EquilibriumError::CharacterizationInapplicable { .. })
        ));
        // a zero-resource player invests 0 throughout
        assert!(is_effective(&[1.0, 1.0], &[1.0, 1.0, 1.0], 0.0, 10.0).unwrap());
    }

    #[test]
    fn lower_bound_check_is_strict() {
        let spec = two_stage(10.0, 10.0);
        // W_1 c_1 / w_1 = 2
        let boundary = GameState {
            stage: 0,
            resources: vec![2.0, 10.0],
            cumulative_payoffs: vec![0.0, 0.0],
        };
        assert!(!resource_lower_bound_check(std::slice::from_ref(&boundary), &spec, 0));
        let above = GameState {
            resources: vec![2.0 + 1e-9, 10.0],
            ..boundary
        };
        assert!(resource_lower_bound_check(&[above], &spec, 0));

        let single = GameSpec::new(vec![], vec![1.0], vec![0.5, 0.5]).unwrap();
        assert!(resource_lower_bound_check(&[single.initial_state()], &single, 0));
    }

    #[test]
    fn value_examples() {
        assert_eq!(equilibrium_value(&two_stage(10.0, 10.0)).unwrap(), vec![1.0, 1.0]);
        let spec = GameSpec::new(vec![1.0, 1.0], vec![2.0, 2.0, 2.0], vec![200.0, 100.0]).unwrap();
        let v = equilibrium_value(&spec).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
        let three = GameSpec::new(vec![], vec![4.0], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(equilibrium_value(&three).unwrap(), vec![1.0, 1.0, 2.0]);

        assert!(matches!(
            equilibrium_value(&two_stage(1.0, 10.0)),
            Err(EquilibriumError::HypothesisUnmet { player: 1, .. })
        ));
        assert_eq!(
            equilibrium_value(&two_stage(0.0, 0.0)),
            Err(EquilibriumError::AllResourcesZero)
        );
    }

    fn example_params() -> DeviationCurveParams {
        DeviationCurveParams::from_spec(&two_stage(10.0, 10.0)).unwrap()
    }

    #[test]
    fn fhat_examples() {
        let p = example_params();
        assert_eq!(p.opponent_investment, 4.5);
        assert_eq!(p.fhat(0.0).unwrap(), 1.0);
        assert!((p.fhat(0.5).unwrap() - (1.0 - 1.0 / 361.0)).abs() < 1e-15);
        assert_eq!(p.fhat_domain(), (-4.5, 4.5));
        assert!(p.fhat(-4.5).is_err());
        assert!(p.fhat(4.5).is_ok());
        assert!(matches!(p.fhat(4.6), Err(EquilibriumError::OutsideDomain { .. })));
    }

    #[test]
    fn f_examples() {
        let p = example_params();
        // win: (A_2, B_2) = (4, 5.5); lose: (5, 4.5); last stage is proportional
        let oracle = 5.0 / 9.5 * (1.0 + 4.0 / 9.5) + 4.5 / 9.5 * (5.0 / 9.5);
        assert!((p.f(5.0).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.997_230).abs() < 1e-6);
        assert!((p.f(p.equilibrium_investment()).unwrap() - p.value()).abs() < 1e-15);
        let zero = p.f(0.0).unwrap();
        assert!((zero - 10.0 / 14.5).abs() < 1e-15);
        assert!(zero < p.value());
    }

    #[test]
    fn curve_params_need_two_players_and_stages() {
        let one = GameSpec::new(vec![], vec![1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(DeviationCurveParams::from_spec(&one), Err(EquilibriumError::UnsupportedShape));
        assert!(matches!(
            DeviationCurveParams::from_spec(&two_stage(10.0, 1.0)),
            Err(EquilibriumError::CharacterizationInapplicable { .. })
        ));
    }
}
