//! Seed derivation and primitive samplers.
//!
//! All randomness flows from explicit `u64` seeds through ChaCha streams so
//! that every artifact is reproducible bit-for-bit. Substreams are derived by
//! hashing (seed, stream, counter) triples, which keeps draws for one purpose
//! independent of how many draws another purpose consumes.

use rand::RngCore;

/// Purpose tags for derived substreams.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Geometry = 0x47454f4d,
    DirectChannel = 0x44495243,
    BsRisChannel = 0x42524953,
    RisUserChannel = 0x52555352,
    EnvEpisode = 0x454e5645,
    AgentInit = 0x41494e49,
    Exploration = 0x4558504c,
    ReplaySample = 0x5250534d,
    Warmup = 0x5741524d,
    Benchmark = 0x424e4348,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from (seed, stream, counter).
pub fn mix(seed: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter)
}

/// Uniform draw in [0, 1) with 53-bit resolution.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in [-1, 1).
pub fn uniform_pm1(rng: &mut impl RngCore) -> f64 {
    2.0 * uniform01(rng) - 1.0
}

/// Pair of independent standard normal draws (Box-Muller).
pub fn normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    // Guard the log against a zero draw.
    let u1 = loop {
        let u = uniform01(rng);
        if u > 0.0 {
            break u;
        }
    };
    let u2 = uniform01(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    (r * phi.cos(), r * phi.sin())
}

/// Single standard normal draw.
pub fn normal(rng: &mut impl RngCore) -> f64 {
    normal_pair(rng).0
}
