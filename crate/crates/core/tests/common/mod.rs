//! Shared fixtures and oracles for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num::BigRational;

use recomb_core::chain::{PartitionWeights, StateSpace, TransitionMatrix};
use recomb_core::measures::ProductMeasure;
use recomb_core::montecarlo::SplitMix64;
use recomb_core::partitions::Partition;
use recomb_core::quasistationary::{analyze, Analysis, QsReport};
use recomb_core::scalar::Scalar;

pub fn r(n: i64, d: i64) -> BigRational {
    Scalar::from_ratio(n, d)
}

pub fn p(text: &str) -> Partition {
    Partition::parse(text).unwrap()
}

/// The worked three-site model: coarsest 1/5, {1}{2,3} 1/2, {1,2}{3} 3/10.
pub fn e1_weights() -> PartitionWeights<BigRational> {
    PartitionWeights::new([
        (Partition::coarsest(3), r(1, 5)),
        (p("{1}{2,3}"), r(1, 2)),
        (p("{1,2}{3}"), r(3, 10)),
    ])
    .unwrap()
}

/// Same support as the worked model with equal split weights, so the
/// argmax set has two elements.
pub fn symmetric_weights() -> PartitionWeights<BigRational> {
    PartitionWeights::new([
        (Partition::coarsest(3), r(1, 5)),
        (p("{1}{2,3}"), r(2, 5)),
        (p("{1,2}{3}"), r(2, 5)),
    ])
    .unwrap()
}

/// Coarsest/finest with equal weight on two sites.
pub fn dyadic_weights() -> PartitionWeights<BigRational> {
    PartitionWeights::new([
        (Partition::coarsest(2), r(1, 2)),
        (Partition::finest(2), r(1, 2)),
    ])
    .unwrap()
}

pub struct Model {
    pub rho: PartitionWeights<BigRational>,
    pub space: StateSpace,
    pub matrix: TransitionMatrix<BigRational>,
}

pub fn build_model(rho: PartitionWeights<BigRational>) -> Model {
    let space = StateSpace::build(&rho, 50_000).unwrap();
    let matrix = TransitionMatrix::build(&rho, &space).unwrap();
    Model { rho, space, matrix }
}

/// Brute-force enumeration of all partitions of `n` sites, by running
/// through restricted-growth strings in lexicographic order.
pub fn enumerate_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        out.push(Partition::from_rgs(rgs.clone()).unwrap());
        let mut i = n;
        loop {
            if i == 1 {
                return out;
            }
            i -= 1;
            let max_prefix = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for l in rgs.iter_mut().skip(i + 1) {
                    *l = 0;
                }
                break;
            }
        }
    }
}

/// Naive join by intersecting atom sets, the independent oracle for the
/// lattice implementation.
pub fn join_oracle(a: &Partition, b: &Partition) -> Partition {
    let mut blocks = Vec::new();
    for ka in a.atoms() {
        for kb in b.atoms() {
            let inter: Vec<usize> = ka
                .iter()
                .filter(|site| kb.contains(site))
                .map(|site| site + 1)
                .collect();
            if !inter.is_empty() {
                blocks.push(inter);
            }
        }
    }
    Partition::from_blocks(a.n_sites(), &blocks).unwrap()
}

pub fn random_partition(rng: &mut SplitMix64, n_sites: usize) -> Partition {
    let labels: Vec<usize> = (0..n_sites)
        .map(|_| (rng.next_u64() % n_sites as u64) as usize)
        .collect();
    Partition::from_labels(&labels).unwrap()
}

/// A random weight vector: up to `max_support` distinct partitions with
/// positive rational weights that sum to 1 exactly.
pub fn random_weights(
    rng: &mut SplitMix64,
    n_sites: usize,
    max_support: usize,
) -> PartitionWeights<BigRational> {
    let want = 1 + (rng.next_u64() as usize) % max_support;
    let mut support = BTreeSet::new();
    for _ in 0..50 {
        if support.len() >= want {
            break;
        }
        support.insert(random_partition(rng, n_sites));
    }
    weights_over(rng, support)
}

/// Like [`random_weights`], but every support member has at most one atom
/// of size ≥ 2. On such supports the chain-mixture decomposition of the
/// iterated operator is exact for any number of sites (each tensor factor
/// but one is a preserved single-site marginal, so the operator acts
/// affinely on the mixtures that arise).
pub fn random_single_block_weights(
    rng: &mut SplitMix64,
    n_sites: usize,
    max_support: usize,
) -> PartitionWeights<BigRational> {
    let want = 1 + (rng.next_u64() as usize) % max_support;
    let mut support = BTreeSet::new();
    for _ in 0..200 {
        if support.len() >= want {
            break;
        }
        let candidate = random_partition(rng, n_sites);
        if candidate.atoms().iter().filter(|a| a.len() >= 2).count() <= 1 {
            support.insert(candidate);
        }
    }
    weights_over(rng, support)
}

fn weights_over(
    rng: &mut SplitMix64,
    support: BTreeSet<Partition>,
) -> PartitionWeights<BigRational> {
    let parts: Vec<i64> = (0..support.len())
        .map(|_| 1 + (rng.next_u64() % 99) as i64)
        .collect();
    let total: i64 = parts.iter().sum();
    PartitionWeights::new(
        support
            .into_iter()
            .zip(parts)
            .map(|(partition, v)| (partition, r(v, total))),
    )
    .unwrap()
}

/// Keeps sampling until the model has a genuine quasi-stationary regime.
pub fn random_regular_model(rng: &mut SplitMix64, n_sites: usize, max_support: usize) -> (Model, QsReport<BigRational>) {
    loop {
        let model = build_model(random_weights(rng, n_sites, max_support));
        match analyze(&model.matrix, &model.space).unwrap() {
            Analysis::Regular(report) => return (model, report),
            Analysis::Degenerate(_) => continue,
        }
    }
}

/// A regular model whose sub-leading contraction rate β₀/η is at most
/// `max_rate`. Fixed-horizon limit checks are only a valid test of the
/// limit when the model can actually converge within the horizon: the
/// error after n steps decays like poly(n)·(β₀/η)^n, so e.g. rate ≤ 3/4
/// leaves ~17 orders of magnitude of headroom at n = 200 against a 1e-8
/// tolerance.
pub fn random_gapped_model(
    rng: &mut SplitMix64,
    n_sites: usize,
    max_support: usize,
    max_rate: f64,
) -> (Model, QsReport<BigRational>) {
    for _ in 0..500 {
        let (model, report) = random_regular_model(rng, n_sites, max_support);
        let rate = report.beta0.to_f64() / report.eta.to_f64();
        if rate <= max_rate {
            return (model, report);
        }
    }
    panic!("no sufficiently gapped model in 500 draws");
}

/// A random exact product measure over binary alphabets: seeded positive
/// integers, normalized.
pub fn random_measure(rng: &mut SplitMix64, n_sites: usize) -> ProductMeasure<BigRational> {
    let cells = 1usize << n_sites;
    let draws: Vec<i64> = (0..cells).map(|_| 1 + (rng.next_u64() % 999) as i64).collect();
    let total: i64 = draws.iter().sum();
    ProductMeasure::new(vec![2; n_sites], draws.into_iter().map(|v| r(v, total)).collect())
        .unwrap()
}
