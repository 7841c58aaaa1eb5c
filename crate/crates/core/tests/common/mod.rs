#![allow(dead_code)]

use blotto::{threshold, GameSpec, Strategy, StrategySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random spec with `w_k` in [0.5, 2], `c_k` in [0, 1] and every resource
/// uniform in (M, 3M]; when M = 0 the range is (0, 3W].
pub fn random_spec(rng: &mut ChaCha8Rng, stages: usize, players: usize) -> GameSpec {
    let payoffs: Vec<f64> = (0..stages).map(|_| rng.random_range(0.5..=2.0)).collect();
    let fees: Vec<f64> = (0..stages - 1).map(|_| rng.random_range(0.0..=1.0)).collect();
    let probe = GameSpec::new(fees.clone(), payoffs.clone(), vec![0.0; players]).unwrap();
    let m = threshold(&probe).value;
    let (lo, width) = if m > 0.0 { (m, 2.0 * m) } else { (0.0, 3.0 * probe.total_payoff()) };
    let resources = (0..players)
        .map(|_| lo + width * (1.0 - rng.random::<f64>()))
        .collect();
    GameSpec::new(fees, payoffs, resources).unwrap()
}

/// The randomized family used across suites: `n` in 1..=8, `m` in {2, 3}.
pub fn random_specs(seed: u64, count: usize) -> Vec<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=8);
            let m = rng.random_range(2..=3);
            random_spec(&mut rng, n, m)
        })
        .collect()
}

pub fn equilibrium_profile(players: usize) -> Vec<Box<dyn Strategy>> {
    blotto::strategies::build_profile(&vec![StrategySpec::Equilibrium; players]).unwrap()
}

/// The two-stage reference game: w = (1, 1), c_1 = 1, A = B = 10.
pub fn two_stage() -> GameSpec {
    GameSpec::new(vec![1.0], vec![1.0, 1.0], vec![10.0, 10.0]).unwrap()
}

/// n stages, unit payoffs, unit fees before the last stage.
pub fn unit_fees(n: usize, resources: Vec<f64>) -> GameSpec {
    GameSpec::new(vec![1.0; n - 1], vec![1.0; n], resources).unwrap()
}
