//! Seeded substreams.
//!
//! One master seed feeds a ChaCha8 generator; each purpose gets its own
//! 64-bit stream number, so draws for one purpose never depend on how many
//! values another purpose consumed or in which order columns were solved.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Component tolerance draws, one standard normal per component in
/// canonical netlist order.
pub const COMPONENT_STREAM: u64 = 0;

/// Voltage noise for drive column `col` (0-based).
pub fn column_stream(col: usize) -> u64 {
    1 + col as u64
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
