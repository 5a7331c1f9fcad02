//! Brownian increments from a counter-based generator.
//!
//! Every normal draw is a pure function of `(seed, step, component)`, so a
//! path can be regenerated piecewise, in any order, on any thread.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SkgsError};

/// Name recorded in run metadata; changing the generator changes outputs.
pub const GENERATOR_NAME: &str = "splitmix64-counter/inverse-cdf";

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Increments are rounded to multiples of `2^-44`. Sums of such numbers
/// are exact while they stay below `2^9` in magnitude, so aggregated paths
/// add up to the same total bit for bit whatever the grouping.
const QUANTUM: f64 = 1.0 / (1u64 << 44) as f64;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sample `j` of an ensemble. Injective in `j` for a fixed master
/// seed, since both `mix64` and xor with a constant are bijections.
pub fn sample_seed(master: u64, j: u64) -> u64 {
    mix64(master ^ mix64(j))
}

fn uniform(seed: u64, counter: u64) -> f64 {
    let bits = mix64(seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)));
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Brownian increments of `B0, B1, B2` over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrement {
    pub db0: f64,
    pub db1: f64,
    pub db2: f64,
}

impl NoiseIncrement {
    pub const ZERO: NoiseIncrement = NoiseIncrement {
        db0: 0.0,
        db1: 0.0,
        db2: 0.0,
    };

    pub fn new(db0: f64, db1: f64, db2: f64) -> Self {
        NoiseIncrement { db0, db1, db2 }
    }
}

/// One realization of `(B0, B1, B2)` sampled at resolution `fine_dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub master_seed: u64,
    pub fine_dt: f64,
    pub increments: Vec<NoiseIncrement>,
}

impl BrownianPath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

/// Draws `n_fine` independent `N(0, fine_dt)` triples keyed by `seed`.
pub fn sample_path(seed: u64, fine_dt: f64, n_fine: usize) -> Result<BrownianPath> {
    if !(fine_dt.is_finite() && fine_dt > 0.0) {
        return Err(SkgsError::param("noise.fine_dt", "must be positive"));
    }
    if n_fine == 0 {
        return Err(SkgsError::param("noise.n_fine", "must be at least 1"));
    }
    let normal = std_normal();
    let sd = fine_dt.sqrt();
    let increments = (0..n_fine as u64)
        .map(|k| {
            let draw = |c: u64| (sd * normal.inverse_cdf(uniform(seed, 3 * k + c)) / QUANTUM).round() * QUANTUM;
            NoiseIncrement::new(draw(0), draw(1), draw(2))
        })
        .collect();
    Ok(BrownianPath {
        master_seed: seed,
        fine_dt,
        increments,
    })
}

/// Sums each run of `k` fine increments, left to right.
pub fn aggregate(path: &BrownianPath, k: usize) -> Result<Vec<NoiseIncrement>> {
    if k == 0 || path.len() % k != 0 {
        return Err(SkgsError::param(
            "noise.aggregate",
            format!("k = {k} does not divide the {} fine steps", path.len()),
        ));
    }
    Ok(path
        .increments
        .chunks(k)
        .map(|c| {
            c.iter().fold(NoiseIncrement::ZERO, |acc, d| {
                NoiseIncrement::new(acc.db0 + d.db0, acc.db1 + d.db1, acc.db2 + d.db2)
            })
        })
        .collect())
}
