//! Reproducible seeded sampling of chain trajectories.
//!
//! The generator is SplitMix64, a counter-based 64-bit generator: state
//! advances by a fixed odd constant and each output is a bijective mix of
//! the state, so identical seeds give identical streams on every
//! platform. Partition draws compare a raw 64-bit output against exact
//! cumulative thresholds (weights scaled by 2^64 and floored), never
//! against floating-point boundaries, so trajectories are bit-stable
//! across number modes too.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Signed, ToPrimitive, Zero};

use crate::chain::PartitionWeights;
use crate::partitions::Partition;
use crate::scalar::Scalar;
use crate::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output mix (a bijection on 64-bit words).
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64: `state += GOLDEN_GAMMA; output = mix64(state)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

/// Seed of the k-th independent stream under a base seed: streams are
/// decorrelated by mixing the counter before xoring it into the base.
pub fn stream_seed(base_seed: u64, stream: u64) -> u64 {
    mix64(base_seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)))
}

/// One sampled trajectory: the visited partitions from the coarsest one,
/// stopped at absorption or at the horizon, and the step of the first
/// visit to the absorbing state if it happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub seed: u64,
    pub states: Vec<Partition>,
    pub absorption_step: Option<usize>,
}

/// Draws support partitions by exact cumulative thresholds and walks the
/// chain by joining the current state with each draw.
#[derive(Clone, Debug)]
pub struct TrajectorySampler {
    support: Vec<Partition>,
    /// Cumulative weights scaled by 2^64, floored; the last is forced to
    /// 2^64 so a draw always lands.
    thresholds: Vec<u128>,
    absorbing: Partition,
    n_sites: usize,
}

impl TrajectorySampler {
    pub fn new<N: Scalar>(rho: &PartitionWeights<N>) -> Result<Self> {
        let scale = BigInt::from(1u8) << 64;
        let mut support = Vec::with_capacity(rho.len());
        let mut thresholds = Vec::with_capacity(rho.len());
        let mut cumulative = BigRational::zero();
        for (partition, weight) in rho.iter() {
            let exact = weight.to_exact();
            if exact.is_negative() {
                return Err(Error::InvalidWeights(format!("negative weight at {partition}")));
            }
            cumulative += exact;
            let floored: BigInt = (cumulative.numer() * &scale) / cumulative.denom();
            thresholds.push(floored.to_u128().ok_or_else(|| {
                Error::InvalidWeights("cumulative weight exceeds 1".into())
            })?);
            support.push(partition.clone());
        }
        *thresholds.last_mut().expect("nonempty support") = 1u128 << 64;
        Ok(TrajectorySampler {
            support,
            thresholds,
            absorbing: rho.common_refinement(),
            n_sites: rho.n_sites(),
        })
    }

    /// The support partition selected by a raw 64-bit draw.
    pub fn draw(&self, raw: u64) -> &Partition {
        let u = raw as u128;
        let at = self.thresholds.partition_point(|&t| t <= u);
        &self.support[at]
    }

    pub fn absorbing(&self) -> &Partition {
        &self.absorbing
    }

    /// Walks one trajectory. Deterministic in the seed.
    pub fn trajectory(&self, seed: u64, horizon: usize) -> Trajectory {
        let mut rng = SplitMix64::new(seed);
        let mut current = Partition::coarsest(self.n_sites);
        let mut states = vec![current.clone()];
        let mut absorption_step = if current == self.absorbing { Some(0) } else { None };
        for step in 1..=horizon {
            if absorption_step.is_some() {
                break;
            }
            current = current.join_unchecked(self.draw(rng.next_u64()));
            states.push(current.clone());
            if current == self.absorbing {
                absorption_step = Some(step);
            }
        }
        Trajectory { seed, states, absorption_step }
    }

    /// First hitting step of the absorbing state within the horizon,
    /// without materializing the path.
    pub fn absorption_step(&self, seed: u64, horizon: usize) -> Option<usize> {
        let mut rng = SplitMix64::new(seed);
        let mut current = Partition::coarsest(self.n_sites);
        if current == self.absorbing {
            return Some(0);
        }
        for step in 1..=horizon {
            current = current.join_unchecked(self.draw(rng.next_u64()));
            if current == self.absorbing {
                return Some(step);
            }
        }
        None
    }
}

/// Empirical survival probability at one step count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalEstimate {
    pub step: usize,
    /// Fraction of trajectories not yet absorbed after `step` steps.
    pub estimate: f64,
    /// Binomial standard error of the estimate.
    pub std_error: f64,
    pub survivors: u64,
    pub trajectories: u64,
}

/// Samples `trajectories` seeded paths (streams of `base_seed`) and
/// returns the empirical survival curve for every step up to the horizon.
pub fn estimate_survival<N: Scalar>(
    rho: &PartitionWeights<N>,
    base_seed: u64,
    trajectories: u64,
    horizon: usize,
) -> Result<Vec<SurvivalEstimate>> {
    if trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    let sampler = TrajectorySampler::new(rho)?;
    let mut absorbed_at = vec![0u64; horizon + 1];
    for k in 0..trajectories {
        if let Some(step) = sampler.absorption_step(stream_seed(base_seed, k), horizon) {
            absorbed_at[step] += 1;
        }
    }
    let mut out = Vec::with_capacity(horizon + 1);
    let mut absorbed_so_far = 0u64;
    for (step, &count) in absorbed_at.iter().enumerate() {
        absorbed_so_far += count;
        let survivors = trajectories - absorbed_so_far;
        let estimate = survivors as f64 / trajectories as f64;
        let std_error = (estimate * (1.0 - estimate) / trajectories as f64).sqrt();
        out.push(SurvivalEstimate { step, estimate, std_error, survivors, trajectories });
    }
    Ok(out)
}
