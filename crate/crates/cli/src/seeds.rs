//! Independent random streams derived from the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DICTIONARY: u64 = 1;
pub const BACKGROUNDS: u64 = 2;
pub const QUALITY_CORPUS: u64 = 3;

pub fn rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(master);
    r.set_stream(stream);
    r
}
