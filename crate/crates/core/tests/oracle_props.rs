mod common;

use blotto::equilibrium::{equilibrium_investment, DeviationCurveParams};
use blotto::oracle::{
    deviation_curve_match, enumerate_tree, exact_expected_payoffs, exact_expected_payoffs_with_limit, node_values,
    one_shot_deviation_scan, subgame_value_check, OracleError, ScanOptions, TreeLimit, Verdict,
};
use blotto::strategies::{build_profile, DecisionContext, EquilibriumStrategy};
use blotto::{GameSpec, Strategy, StrategySpec};

/// Invests `first` at stage one, then follows the equilibrium.
#[derive(Clone)]
struct FirstStage {
    first: f64,
}

impl Strategy for FirstStage {
    fn name(&self) -> String {
        format!("first_stage:{}", self.first)
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        if ctx.state.stage == 0 {
            self.first
        } else {
            EquilibriumStrategy.invest(ctx)
        }
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

fn with_first(first: f64) -> Vec<Box<dyn Strategy>> {
    vec![Box::new(FirstStage { first }), Box::new(EquilibriumStrategy)]
}

#[test]
fn two_stage_equilibrium_value() {
    let spec = common::two_stage();
    let r = exact_expected_payoffs(&spec, &common::equilibrium_profile(2)).unwrap();
    for v in &r.expected_payoffs {
        assert!((v - 1.0).abs() <= 1e-9);
    }
    // hand tree: 0.5 (1 + 0.45) + 0.5 * 0.55
    assert!((0.5 * (1.0 + 0.45) + 0.5 * 0.55 - r.expected_payoffs[0]).abs() <= 1e-12);
}

#[test]
fn zero_against_equilibrium() {
    let spec = common::unit_fees(4, vec![10.0, 10.0]);
    let profile = build_profile(&[StrategySpec::Zero, StrategySpec::Equilibrium]).unwrap();
    let r = exact_expected_payoffs(&spec, &profile).unwrap();
    assert_eq!(r.expected_payoffs[0], 0.0);
    assert!((r.expected_payoffs[1] - 4.0).abs() <= 1e-12);
}

#[test]
fn single_stage_shares() {
    let spec = GameSpec::new(vec![], vec![1.5], vec![3.0, 1.0, 2.0]).unwrap();
    let r = exact_expected_payoffs(&spec, &common::equilibrium_profile(3)).unwrap();
    for (v, a) in r.expected_payoffs.iter().zip([3.0, 1.0, 2.0]) {
        assert!((v - a * 1.5 / 6.0).abs() <= 1e-12);
    }
}

#[test]
fn all_zero_profile_loses_payoff() {
    let spec = common::unit_fees(3, vec![10.0, 10.0]);
    let profile = build_profile(&[StrategySpec::Zero, StrategySpec::Zero]).unwrap();
    let r = exact_expected_payoffs(&spec, &profile).unwrap();
    assert_eq!(r.expected_payoffs, vec![0.0, 0.0]);
}

#[test]
fn totals_never_exceed_payoff() {
    let spec = common::unit_fees(4, vec![7.0, 3.0, 5.0]);
    for name in ["equilibrium", "zero", "naive_proportional", "constant_fraction:0.3", "all_in_last"] {
        let s: StrategySpec = name.parse().unwrap();
        let profile = build_profile(&[s, StrategySpec::Equilibrium, StrategySpec::AllInLast]).unwrap();
        let r = exact_expected_payoffs(&spec, &profile).unwrap();
        assert!(r.expected_payoffs.iter().sum::<f64>() <= spec.total_payoff() + 1e-9, "{name}");
    }
}

#[test]
fn tree_cap_is_enforced() {
    let spec = common::unit_fees(15, vec![500.0, 500.0]);
    let err = exact_expected_payoffs(&spec, &common::equilibrium_profile(2)).unwrap_err();
    assert!(matches!(err, OracleError::TreeTooLarge { .. }));
    let spec = common::unit_fees(10, vec![500.0, 500.0, 500.0]);
    assert!(exact_expected_payoffs(&spec, &common::equilibrium_profile(3)).is_err());
    let r = exact_expected_payoffs_with_limit(&spec, &common::equilibrium_profile(3), TreeLimit { max_stages: 10 });
    assert!(r.is_ok());
}

#[test]
fn subgame_values_on_two_stage() {
    let spec = common::two_stage();
    let nodes = node_values(&spec, &common::equilibrium_profile(2), TreeLimit::default_for(2)).unwrap();
    let after_win = nodes
        .iter()
        .find(|n| n.state.stage == 1 && n.state.resources[0] < n.state.resources[1])
        .unwrap();
    assert!((after_win.state.resources[0] - 4.5).abs() <= 1e-12);
    assert!((after_win.values[0] - 0.45).abs() <= 1e-12);
    let report = subgame_value_check(&spec, &common::equilibrium_profile(2)).unwrap();
    assert!(report.pass);
    assert_eq!(report.nodes, 3);
}

#[test]
fn subgame_check_requires_hypothesis() {
    let spec = GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![1.5, 10.0]).unwrap();
    assert!(subgame_value_check(&spec, &common::equilibrium_profile(2)).is_err());
}

#[test]
fn stage_one_scan_peaks_at_equilibrium() {
    let spec = common::two_stage();
    let report = one_shot_deviation_scan(&spec, &common::equilibrium_profile(2), 0, ScanOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    let root = &report.nodes[0];
    assert_eq!(root.stage, 1);
    assert!((root.best_deviation - 4.5).abs() <= 1e-12);
    assert!((root.best_deviation_value - 1.0).abs() <= 1e-9);
}

#[test]
fn fixed_stage_one_deviations() {
    let spec = common::two_stage();
    let v5 = exact_expected_payoffs(&spec, &with_first(5.0)).unwrap().expected_payoffs[0];
    // F(5) = (5 * 9.5 + 20 + 22.5) / 9.5^2 = 90 / 90.25
    assert!((v5 - 90.0 / 90.25).abs() <= 1e-12);
    assert!((v5 - 0.997230).abs() <= 1e-6);
    let v0 = exact_expected_payoffs(&spec, &with_first(0.0)).unwrap().expected_payoffs[0];
    let p = DeviationCurveParams::from_spec(&spec).unwrap();
    assert!((v0 - 10.0 / 14.5).abs() <= 1e-12);
    assert!((v0 - p.f(0.0).unwrap()).abs() <= 1e-12);
    assert!(v0 < p.value());
}

#[test]
fn planted_deviation_fails_scan() {
    let spec = common::unit_fees(5, vec![20.0, 20.0]);
    let profile = build_profile(&["constant_fraction:0.9".parse().unwrap(), StrategySpec::Equilibrium]).unwrap();
    let report = one_shot_deviation_scan(&spec, &profile, 0, ScanOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert!(report.max_improvement > report.tolerance);
}

#[test]
fn scan_requires_opponents_above_threshold() {
    let spec = GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![10.0, 1.5]).unwrap();
    assert!(one_shot_deviation_scan(&spec, &common::equilibrium_profile(2), 0, ScanOptions::default()).is_err());
    // the deviator itself may sit below M
    assert!(one_shot_deviation_scan(&spec, &common::equilibrium_profile(2), 1, ScanOptions::default()).is_ok());
    let opts = ScanOptions { grid: 2, ..ScanOptions::default() };
    assert!(matches!(
        one_shot_deviation_scan(&common::two_stage(), &common::equilibrium_profile(2), 0, opts),
        Err(OracleError::GridTooSmall(2))
    ));
}

#[test]
fn curve_match_on_reference_game() {
    let spec = common::two_stage();
    let r = deviation_curve_match(&spec, 1001).unwrap();
    assert!(r.pass);
    assert!(r.max_gap_all <= 1e-9 * spec.total_payoff());
    let eq = r.points.last().unwrap();
    assert!((eq.investment - 4.5).abs() <= 1e-12);
    assert_eq!(eq.closed_form, 1.0);
}

#[test]
fn closed_form_is_an_upper_bound_on_longer_games() {
    let spec = common::unit_fees(5, vec![20.0, 20.0]);
    let r = deviation_curve_match(&spec, 257).unwrap();
    assert!(r.max_excess <= 1e-9 * spec.total_payoff());
    assert!(r.max_gap <= 1e-9 * spec.total_payoff());
    for p in r.points.iter().filter(|p| p.continuation_effective) {
        assert!((p.exact - p.closed_form).abs() <= 1e-9 * spec.total_payoff());
    }
}

#[test]
fn value_increases_with_own_resource() {
    let base = common::unit_fees(4, vec![10.0, 12.0]);
    let mut last = f64::NEG_INFINITY;
    for j in 0..20 {
        let a = 8.0 + j as f64;
        let spec = base.with_resources(vec![a, 12.0]).unwrap();
        let v = exact_expected_payoffs(&spec, &common::equilibrium_profile(2)).unwrap().expected_payoffs[0];
        assert!(v > last);
        last = v;
    }
}

#[test]
fn tree_nodes_carry_profile_investments() {
    let spec = common::unit_fees(3, vec![9.0, 8.0, 10.0]);
    let tree = enumerate_tree(&spec, &common::equilibrium_profile(3), TreeLimit::default_for(3)).unwrap();
    assert_eq!(tree.len(), 1 + 3 + 9);
    let suffix = spec.suffix();
    let total: f64 = tree.iter().filter(|n| n.state.stage == 2).map(|n| n.reach_probability).sum();
    assert!((total - 1.0).abs() <= 1e-12);
    for node in &tree {
        for i in 0..3 {
            assert_eq!(node.investments[i], equilibrium_investment(&spec, &suffix, &node.state, i).unwrap());
        }
    }
}
