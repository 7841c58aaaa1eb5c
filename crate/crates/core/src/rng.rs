//! SplitMix64 seed mixing and the per-stage uniform stream.
//!
//! Game `j` of a run with master seed `s` uses the stream seeded by
//! `game_seed(s, j) = mix64(s + (j + 1) * GOLDEN_GAMMA)`, i.e. the `j`-th
//! output of a SplitMix64 generator started at `s`. Each stage consumes
//! exactly one draw `u = (next() >> 11) * 2^-53` in `[0, 1)`.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn game_seed(master: u64, game: u64) -> u64 {
    mix64(master.wrapping_add(game.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Seed for a per-player stream (strategy randomness) inside one game.
pub fn player_seed(game_seed: u64, player: usize) -> u64 {
    mix64(game_seed ^ mix64((player as u64).wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
