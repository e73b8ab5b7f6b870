//! Counter-based random numbers.
//!
//! Every random quantity in a simulation is a pure function of the master seed
//! and a structured key, so two systems fed the same key see the same
//! Brownian increment no matter how the work is scheduled across threads.
//! Keys are hashed with chained splitmix64 finalizers; Gaussian deviates come
//! from Box-Muller on two independent uniform words.

use rand::RngCore;

use crate::real::Real;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix(h ^ mix(word.wrapping_add(GOLDEN)))
}

/// Independent families of random numbers drawn from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Channel {
    /// Brownian increments of tracked particles.
    Brownian = 1,
    /// Brownian increments of resampled companions in the mean-field operator.
    CompanionBrownian = 2,
    /// Initial positions.
    Init = 3,
    /// Random batch divisions.
    Partition = 4,
    /// Companion index draws.
    Companion = 5,
    /// Randomized regularity probes and other auxiliary sampling.
    Aux = 6,
}

/// Identifies one Gaussian increment: which replica, particle, interval and substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub replica: u64,
    pub particle: u64,
    pub step: u64,
    pub substep: u64,
}

impl NoiseKey {
    pub fn new(replica: u64, particle: usize, step: usize, substep: usize) -> Self {
        Self {
            replica,
            particle: particle as u64,
            step: step as u64,
            substep: substep as u64,
        }
    }
}

/// Keyed source of reproducible random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn hash(&self, channel: Channel, words: &[u64]) -> u64 {
        let mut h = mix(self.seed ^ (channel as u64).wrapping_mul(GOLDEN));
        for &w in words {
            h = absorb(h, w);
        }
        h
    }

    /// Uniform deviate in `[0, 1)` for an arbitrary key.
    #[inline]
    pub fn uniform(&self, channel: Channel, words: &[u64]) -> f64 {
        unit_open_right(self.hash(channel, words))
    }

    /// Standard normal deviate for an arbitrary key.
    #[inline]
    pub fn gaussian(&self, channel: Channel, words: &[u64]) -> f64 {
        let h = self.hash(channel, words);
        box_muller(mix(h ^ 0x5851_F42D_4C95_7F2D), mix(h ^ 0x1405_7B7E_F767_814F))
    }

    /// Standard normal increment for component `component` of the particle named by `key`.
    #[inline]
    pub fn normal<T: Real>(&self, channel: Channel, key: NoiseKey, component: usize) -> T {
        T::of(self.gaussian(
            channel,
            &[key.replica, key.particle, key.step, key.substep, component as u64],
        ))
    }

    /// Sequential generator seeded by a key, for shuffles and index draws.
    pub fn rng(&self, channel: Channel, words: &[u64]) -> KeyedRng {
        KeyedRng {
            key: self.hash(channel, words),
            counter: 0,
        }
    }
}

#[inline]
fn unit_open_right(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = unit_open_right(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Counter-mode generator derived from a [`NoiseStream`] key.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    key: u64,
    counter: u64,
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        absorb(self.key, self.counter)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
