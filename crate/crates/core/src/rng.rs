//! Counter-keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is built from
//! `(seed, realization, index, domain)`, so a stream depends only on its
//! coordinates and never on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    PhaseScreen = 0x5343_5245_454e_0001,
    Bootstrap = 0x424f_4f54_5354_0002,
    Test = 0x5445_5354_0000_0003,
}

pub fn stream(domain: Domain, seed: u64, realization: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&realization.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&(domain as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Stream for screen `screen` of realization `realization`.
pub fn screen_stream(seed: u64, realization: u64, screen: u64) -> ChaCha8Rng {
    stream(Domain::PhaseScreen, seed, realization, screen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = screen_stream(1, 2, 3).random();
        let b: u64 = screen_stream(1, 2, 3).random();
        let c: u64 = screen_stream(1, 2, 4).random();
        let d: u64 = screen_stream(1, 3, 3).random();
        let e: u64 = stream(Domain::Bootstrap, 1, 2, 3).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }
}
