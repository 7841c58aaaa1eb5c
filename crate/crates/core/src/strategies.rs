//! Strategy contract and the built-in strategy library.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::equilibrium_investment;
use crate::game::{allowed_interval, GameError, GameSpec, GameState, Interval, StageOutcome, SuffixPayoffs};
use crate::rng::mix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("fraction must lie in [0, 1], got {0}")]
    FractionOutOfRange(f64),
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error("bad parameter for `{name}`: {detail}")]
    BadParameter { name: String, detail: String },
}

/// Public information available to a strategy when it decides.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub spec: &'a GameSpec,
    pub suffix: &'a SuffixPayoffs,
    pub state: &'a GameState,
    /// 0-based index of the deciding player.
    pub player: usize,
    /// Outcomes of all stages played so far.
    pub history: &'a [StageOutcome],
}

impl DecisionContext<'_> {
    pub fn own_resource(&self) -> f64 {
        self.state.resources[self.player]
    }

    pub fn allowed(&self) -> Interval {
        allowed_interval(self.state, self.player, self.spec).expect("strategies are only asked at live stages")
    }

    pub fn is_last_stage(&self) -> bool {
        self.state.stage + 1 == self.spec.stages()
    }
}

/// A behavioral strategy: maps the public state to an investment.
pub trait Strategy: Send + Sync {
    fn name(&self) -> String;

    /// Investment for the stage in `ctx`. The engine clamps the result into
    /// the allowed interval.
    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64;

    fn clone_box(&self) -> Box<dyn Strategy>;
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EquilibriumStrategy;

impl Strategy for EquilibriumStrategy {
    fn name(&self) -> String {
        "equilibrium".into()
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        equilibrium_investment(ctx.spec, ctx.suffix, ctx.state, ctx.player).unwrap_or(0.0)
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl Strategy for ZeroStrategy {
    fn name(&self) -> String {
        "zero".into()
    }

    fn invest(&mut self, _ctx: &DecisionContext<'_>) -> f64 {
        0.0
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

/// `w_k A_k / W_k`, ignoring the expected fee.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveProportional;

impl Strategy for NaiveProportional {
    fn name(&self) -> String {
        "naive_proportional".into()
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        let own = ctx.own_resource();
        if ctx.is_last_stage() {
            return ctx.allowed().clamp(own, own).0;
        }
        let k = ctx.state.stage;
        let raw = ctx.spec.payoffs()[k] * own / ctx.suffix.at(k);
        ctx.allowed().clamp(raw, own).0
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantFraction {
    fraction: f64,
}

impl ConstantFraction {
    pub fn new(fraction: f64) -> Result<Self, StrategyError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(StrategyError::FractionOutOfRange(fraction));
        }
        Ok(ConstantFraction { fraction })
    }
}

impl Strategy for ConstantFraction {
    fn name(&self) -> String {
        format!("constant_fraction({})", self.fraction)
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        let own = ctx.own_resource();
        ctx.allowed().clamp(self.fraction * own, own).0
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

/// Saves everything for the last stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllInLast;

impl Strategy for AllInLast {
    fn name(&self) -> String {
        "all_in_last".into()
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        if ctx.is_last_stage() {
            ctx.own_resource()
        } else {
            0.0
        }
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

/// Uniform over the allowed interval, from a private seeded generator.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    seed: u64,
    rng: ChaCha8Rng,
}

impl UniformRandom {
    pub fn new(seed: u64) -> Self {
        UniformRandom {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Strategy for UniformRandom {
    fn name(&self) -> String {
        format!("uniform_random({})", self.seed)
    }

    fn invest(&mut self, ctx: &DecisionContext<'_>) -> f64 {
        let iv = ctx.allowed();
        if iv.is_degenerate() {
            return iv.lo;
        }
        self.rng.random_range(iv.lo..=iv.hi)
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Serializable strategy description, as named in configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Equilibrium,
    Zero,
    NaiveProportional,
    ConstantFraction {
        fraction: f64,
    },
    AllInLast,
    UniformRandom {
        #[serde(default)]
        seed: u64,
    },
}

impl StrategySpec {
    pub fn build(&self) -> Result<Box<dyn Strategy>, StrategyError> {
        self.build_for_stream(None)
    }

    /// Builds an instance whose randomness (if any) is additionally keyed by
    /// `stream`, so every simulated game gets its own private generator.
    pub fn build_for_stream(&self, stream: Option<u64>) -> Result<Box<dyn Strategy>, StrategyError> {
        Ok(match *self {
            StrategySpec::Equilibrium => Box::new(EquilibriumStrategy),
            StrategySpec::Zero => Box::new(ZeroStrategy),
            StrategySpec::NaiveProportional => Box::new(NaiveProportional),
            StrategySpec::ConstantFraction { fraction } => Box::new(ConstantFraction::new(fraction)?),
            StrategySpec::AllInLast => Box::new(AllInLast),
            StrategySpec::UniformRandom { seed } => {
                let seed = match stream {
                    Some(s) => mix64(seed ^ s),
                    None => seed,
                };
                Box::new(UniformRandom::new(seed))
            }
        })
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, StrategySpec::UniformRandom { .. })
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        self.build().map(|_| ())
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Equilibrium => write!(f, "equilibrium"),
            StrategySpec::Zero => write!(f, "zero"),
            StrategySpec::NaiveProportional => write!(f, "naive_proportional"),
            StrategySpec::ConstantFraction { fraction } => write!(f, "constant_fraction:{fraction}"),
            StrategySpec::AllInLast => write!(f, "all_in_last"),
            StrategySpec::UniformRandom { seed } => write!(f, "uniform_random:{seed}"),
        }
    }
}

/// Parses `name` or `name:param`, e.g. `constant_fraction:0.9`.
impl FromStr for StrategySpec {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let bad = |detail: String| StrategyError::BadParameter {
            name: name.to_string(),
            detail,
        };
        let spec = match (name, param) {
            ("equilibrium", None) => StrategySpec::Equilibrium,
            ("zero", None) => StrategySpec::Zero,
            ("naive_proportional", None) => StrategySpec::NaiveProportional,
            ("all_in_last", None) => StrategySpec::AllInLast,
            ("constant_fraction", Some(p)) => StrategySpec::ConstantFraction {
                fraction: p.parse().map_err(|e| bad(format!("{e}")))?,
            },
            ("uniform_random", p) => StrategySpec::UniformRandom {
                seed: p.map(str::parse).transpose().map_err(|e| bad(format!("{e}")))?.unwrap_or(0),
            },
            ("equilibrium" | "zero" | "naive_proportional" | "all_in_last", Some(_)) => {
                return Err(bad("takes no parameter".into()))
            }
            ("constant_fraction", None) => return Err(bad("missing fraction".into())),
            _ => return Err(StrategyError::Unknown(s.to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The baseline opponents offered for experiments.
pub fn baseline_strategies() -> Vec<StrategySpec> {
    vec![
        StrategySpec::Zero,
        StrategySpec::NaiveProportional,
        StrategySpec::ConstantFraction { fraction: 0.5 },
        StrategySpec::AllInLast,
        StrategySpec::UniformRandom { seed: 0 },
    ]
}

pub fn build_profile(specs: &[StrategySpec]) -> Result<Vec<Box<dyn Strategy>>, StrategyError> {
    specs.iter().map(StrategySpec::build).collect()
}

/// Investments chosen at one stage, after engine-side clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub investments: Vec<f64>,
    /// Number of players whose raw output was outside the allowed interval.
    pub clamped: usize,
}

/// Asks every strategy of the profile for its investment, then re-validates.
pub fn decide(
    profile: &mut [Box<dyn Strategy>],
    spec: &GameSpec,
    suffix: &SuffixPayoffs,
    state: &GameState,
    history: &[StageOutcome],
) -> Result<Decision, GameError> {
    if profile.len() != spec.players() {
        return Err(GameError::ProfileLength {
            players: spec.players(),
            got: profile.len(),
        });
    }
    let mut investments = Vec::with_capacity(profile.len());
    let mut clamped = 0;
    for (player, strategy) in profile.iter_mut().enumerate() {
        let interval = allowed_interval(state, player, spec)?;
        let ctx = DecisionContext {
            spec,
            suffix,
            state,
            player,
            history,
        };
        let (x, moved) = interval.clamp(strategy.invest(&ctx), state.resources[player]);
        clamped += usize::from(moved);
        investments.push(x);
    }
    Ok(Decision { investments, clamped })
}
