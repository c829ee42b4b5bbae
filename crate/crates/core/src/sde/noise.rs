//! Per-path random inputs.
//!
//! Every path owns independent ChaCha streams keyed by `(seed, path index)`,
//! so results do not depend on scheduling and a deviation run sees exactly
//! the Brownian motions and claims of the run it is compared with.
//! Brownian paths are built by bisection in breadth-first order: with `2^m`
//! steps, the first `2^m` normals fix the path at every coarser dyadic grid,
//! so halving the step refines the same path.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::params::{ClaimModel, ClaimSizeLaw};

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Market = 0,
    Claims = 1,
    Arrivals = 2,
    Bridge = 3,
}

pub(crate) fn stream_rng(seed: u64, path: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 * path + stream as u64);
    rng
}

/// Fills `w` with a Brownian path on the uniform grid `k h`, `k = 0..=n`.
pub(crate) fn brownian_path(rng: &mut impl Rng, n: usize, h: f64, w: &mut Vec<f64>) {
    w.clear();
    w.resize(n + 1, 0.0);
    let z: f64 = rng.sample(StandardNormal);
    w[n] = (n as f64 * h).sqrt() * z;
    let mut queue = Vec::with_capacity(n);
    queue.push((0usize, n));
    let mut head = 0;
    while head < queue.len() {
        let (lo, hi) = queue[head];
        head += 1;
        if hi - lo < 2 {
            continue;
        }
        let mid = (lo + hi) / 2;
        let left = (mid - lo) as f64;
        let right = (hi - mid) as f64;
        let span = left + right;
        let mean = (w[lo] * right + w[hi] * left) / span;
        let sd = (h * left * right / span).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        w[mid] = mean + sd * z;
        queue.push((lo, mid));
        queue.push((mid, hi));
    }
}

/// Brownian bridge value at `t` between `(t0, w0)` and `(t1, w1)`.
pub(crate) fn bridge_sample(rng: &mut impl Rng, t0: f64, w0: f64, t1: f64, w1: f64, t: f64) -> f64 {
    let span = t1 - t0;
    let a = t - t0;
    let b = t1 - t;
    let z: f64 = rng.sample(StandardNormal);
    (w0 * b + w1 * a) / span + (a * b / span).max(0.0).sqrt() * z
}

pub(crate) enum ClaimSampler {
    None,
    Exponential(Exp<f64>),
    Discrete { atoms: Vec<f64>, index: WeightedIndex<f64> },
}

impl ClaimSampler {
    pub(crate) fn new(claims: &ClaimModel) -> Result<Self> {
        if !claims.is_active() {
            return Ok(ClaimSampler::None);
        }
        match &claims.size_law {
            ClaimSizeLaw::Exponential { rate } => Exp::new(*rate)
                .map(ClaimSampler::Exponential)
                .map_err(|e| Error::Distribution(e.to_string())),
            ClaimSizeLaw::FiniteDiscrete { atoms, weights } => Ok(ClaimSampler::Discrete {
                atoms: atoms.clone(),
                index: WeightedIndex::new(weights).map_err(|e| Error::Distribution(e.to_string()))?,
            }),
        }
    }

    fn size(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ClaimSampler::None => 0.0,
            ClaimSampler::Exponential(d) => d.sample(rng),
            ClaimSampler::Discrete { atoms, index } => atoms[index.sample(rng)],
        }
    }
}

/// Claim arrival times and sizes on `(0, horizon]`, in time order.
pub(crate) fn claim_arrivals(
    rng: &mut impl Rng,
    intensity: f64,
    sampler: &ClaimSampler,
    horizon: f64,
    out: &mut Vec<(f64, f64)>,
) {
    out.clear();
    if matches!(sampler, ClaimSampler::None) || intensity <= 0.0 {
        return;
    }
    let gaps = Exp::new(intensity).expect("positive intensity");
    let mut t = 0.0;
    loop {
        t += gaps.sample(rng);
        if t > horizon {
            break;
        }
        let z = sampler.size(rng);
        out.push((t, z));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(7, 3, Stream::Market).random();
        let b: u64 = stream_rng(7, 3, Stream::Market).random();
        let c: u64 = stream_rng(7, 3, Stream::Claims).random();
        let d: u64 = stream_rng(7, 4, Stream::Market).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn halving_refines_the_same_path() {
        let coarse_n = 64;
        let t = 3.0;
        let mut coarse = Vec::new();
        let mut fine = Vec::new();
        brownian_path(&mut stream_rng(1, 0, Stream::Market), coarse_n, t / 64.0, &mut coarse);
        brownian_path(&mut stream_rng(1, 0, Stream::Market), 2 * coarse_n, t / 128.0, &mut fine);
        for k in 0..=coarse_n {
            assert!((coarse[k] - fine[2 * k]).abs() < 1e-12, "node {k}");
        }
    }

    #[test]
    fn increments_have_brownian_variance() {
        let n = 30;
        let h = 0.1;
        let reps = 20_000;
        let mut sums = vec![0.0; n];
        let mut w = Vec::new();
        let mut rng = stream_rng(11, 0, Stream::Market);
        for _ in 0..reps {
            brownian_path(&mut rng, n, h, &mut w);
            for k in 0..n {
                let d = w[k + 1] - w[k];
                sums[k] += d * d;
            }
        }
        // Each sum / reps estimates h with relative s.e. sqrt(2 / reps) = 1%.
        for s in sums {
            let v = s / reps as f64;
            assert!((v - h).abs() < 0.05 * h, "{v}");
        }
    }

    #[test]
    fn no_arrivals_without_claims() {
        let mut out = vec![(1.0, 1.0)];
        claim_arrivals(&mut stream_rng(1, 0, Stream::Arrivals), 5.0, &ClaimSampler::None, 3.0, &mut out);
        assert!(out.is_empty());
    }
}

