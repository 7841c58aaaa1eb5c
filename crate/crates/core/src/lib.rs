//! Sequential m-player Colonel Blotto game with costly winnings.
//!
//! Each of `n` stages is a proportional contest: player `i` wins stage `k`
//! with probability `x_i / sum_j x_j` and then pays the maintenance fee
//! `c_k` out of its remaining resources. The crate provides
//!
//! - [`game`]: the data model and stage mechanics,
//! - [`equilibrium`]: the threshold `M`, equilibrium investments and values,
//!   effectiveness, and the stage-one deviation curves,
//! - [`strategies`]: the strategy contract and baseline opponents,
//! - [`oracle`]: exact expected payoffs and one-shot deviation scans,
//! - [`montecarlo`]: seeded simulation of many games,
//! - [`cli`]: the `blotto` command-line driver.

pub mod cli;
pub mod equilibrium;
pub mod game;
pub mod montecarlo;
pub mod oracle;
pub mod rng;
pub mod strategies;

pub use equilibrium::{equilibrium_value, threshold, ThresholdReport};
pub use game::{GameSpec, GameState, StageOutcome, SuffixPayoffs};
pub use strategies::{Strategy, StrategySpec};
