//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, domain, chain, step)`; the draw index is
//! the position within the block opened for that key. A block is a ChaCha8
//! keystream whose key comes from `(seed, domain)`, whose stream id is the
//! chain index and whose word position starts at `step << 32`. Opening the same
//! key twice yields the same numbers, however chains are scheduled across
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Which consumer a block belongs to. Distinct domains never share keystream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    InitialNoise,
    StepNoise,
    Langevin,
    Init,
    Training,
    TaskGoal,
    TaskJitter,
    TaskObservation,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::InitialNoise => 0x01,
            Domain::StepNoise => 0x02,
            Domain::Langevin => 0x03,
            Domain::Init => 0x10,
            Domain::Training => 0x11,
            Domain::TaskGoal => 0x20,
            Domain::TaskJitter => 0x21,
            Domain::TaskObservation => 0x22,
        }
    }
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes two words into one; used to derive sub-seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut s = a ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut s);
    splitmix64(&mut s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream labelled by `tag`.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(mix(self.seed, tag))
    }

    pub fn draws(&self, domain: Domain, chain: u64, step: u64) -> Draws {
        let mut state = self.seed ^ domain.tag().wrapping_mul(0xa076_1d64_78bd_642f);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chain);
        rng.set_word_pos(u128::from(step) << 32);
        Draws { rng }
    }
}

/// Sequential draws within one keyed block.
pub struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.normal();
        }
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_normal(&mut v);
        v
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_repeat() {
        let s = RngStream::new(7);
        let a = s.draws(Domain::StepNoise, 3, 42).normal_vec(16);
        let b = s.draws(Domain::StepNoise, 3, 42).normal_vec(16);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_keys_differ() {
        let s = RngStream::new(7);
        let base = s.draws(Domain::StepNoise, 3, 42).normal_vec(8);
        for other in [
            s.draws(Domain::StepNoise, 4, 42).normal_vec(8),
            s.draws(Domain::StepNoise, 3, 43).normal_vec(8),
            s.draws(Domain::InitialNoise, 3, 42).normal_vec(8),
            RngStream::new(8).draws(Domain::StepNoise, 3, 42).normal_vec(8),
        ] {
            assert_ne!(base, other);
        }
    }

    #[test]
    fn normals_have_unit_moments() {
        let s = RngStream::new(0);
        let n = 200_000;
        let v = s.draws(Domain::StepNoise, 0, 0).normal_vec(n);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn neighbouring_chains_are_uncorrelated() {
        let s = RngStream::new(11);
        let n = 50_000;
        let a = s.draws(Domain::StepNoise, 0, 5).normal_vec(n);
        let b = s.draws(Domain::StepNoise, 1, 5).normal_vec(n);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 0.02, "corr {corr}");
    }
}
