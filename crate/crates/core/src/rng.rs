//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(master seed, domain)` and
//! positioned on a 64-bit stream index, so results depend only on those three
//! numbers and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Separates the purposes random numbers are drawn for, so that e.g. chain 3
/// and reference resample 3 never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Chain = 1,
    Reference = 2,
    Resample = 3,
    Verify = 4,
    Target = 5,
    Projection = 6,
}

const TAG: [u8; 8] = *b"pgglmc\0\0";

pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
