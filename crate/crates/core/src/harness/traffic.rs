//! Seeded uniform traffic.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::waterfill::TrafficMatrix;

/// Identifier written into result metadata. Bump the suffix whenever the
/// stream-to-matrix mapping changes.
pub const PRNG_ID: &str = "splitmix64/v1";

/// Off-diagonal entries uniform on `[0, theta)`, drawn row-major from a
/// SplitMix64 stream seeded with `seed`. Each draw keeps the top 53 bits.
pub fn gen_traffic(satellites: usize, theta: f64, seed: u64) -> Result<TrafficMatrix> {
    if satellites < 2 {
        return Err(Error::invalid(format!("need at least 2 satellites, got {satellites}")));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::invalid(format!("theta must be finite and non-negative, got {theta}")));
    }
    let mut rng = SplitMix64::from_seed(seed.to_le_bytes());
    let scale = theta * f64::powi(2.0, -53);
    let mut data = vec![0.0; satellites * satellites];
    for i in 0..satellites {
        for j in 0..satellites {
            if i != j {
                data[i * satellites + j] = (rng.next_u64() >> 11) as f64 * scale;
            }
        }
    }
    TrafficMatrix::new(satellites, data)
}

/// Seed of replication `rep`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add(rep as u64)
}
