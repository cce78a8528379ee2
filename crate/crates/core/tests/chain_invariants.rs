//! Exact structural identities on randomized models: stochastic rows,
//! triangularity, strictly increasing diagonals along arcs, the
//! eigenvector identities on both sides, conditioned-process rows, and
//! quasi-stationary invariance. Everything here is zero-tolerance
//! rational arithmetic.

mod common;

use common::{build_model, random_weights, r};
use num::traits::{One, Zero};
use num::BigRational;
use recomb_core::chain::PartitionWeights;
use recomb_core::montecarlo::SplitMix64;
use recomb_core::partitions::Partition;
use recomb_core::quasistationary::{analyze, qsd_check, Analysis};

#[test]
fn randomized_models_satisfy_every_exact_identity() {
    let mut rng = SplitMix64::new(0x1D3A);
    let mut regular_seen = 0usize;
    let mut degenerate_seen = 0usize;
    let mut attempts = 0usize;
    while regular_seen < 40 {
        attempts += 1;
        assert!(attempts < 2000, "random model generator starved");
        let sites = 2 + (rng.next_u64() % 4) as usize; // 2..=5
        let model = build_model(random_weights(&mut rng, sites, 5));

        // Structural matrix invariants hold for every model, degenerate
        // or not: row sums, triangularity, diagonal growth along arcs,
        // the unit absorbing row.
        model.matrix.verify_invariants(&model.space).unwrap();

        // Every state is reachable from the start by a positive path.
        for i in 0..model.space.len() {
            assert!(
                model.matrix.reachable(0, &[i]),
                "state {} unreachable from the start",
                model.space.partition(i)
            );
        }

        // Once left, never revisited: mass at a transient state is bounded
        // by its best holding power once it has been reachable.
        let b5 = model.matrix.distribution_at(5);
        let total: BigRational = b5.iter().cloned().fold(r(0, 1), |a, x| a + x);
        assert!(total.is_one());

        let report = match analyze(&model.matrix, &model.space).unwrap() {
            Analysis::Regular(report) => report,
            Analysis::Degenerate(_) => {
                degenerate_seen += 1;
                continue;
            }
        };
        regular_seen += 1;

        assert!(report.eta > r(0, 1) && report.eta < r(1, 1));
        assert!(report.beta0 < report.eta);

        // Every argmax state moves only to itself or the absorbing state.
        let abs = model.space.absorbing();
        for &f in &report.f_states {
            let row = model.matrix.row(f);
            assert!(row.iter().all(|(j, _)| *j == f || *j == abs));
            assert!((model.matrix.diagonal(f) + model.matrix.get(f, abs)).is_one());
        }

        // The right eigen-identity, entry by entry.
        for i in 0..model.space.len() - 1 {
            let mut image = r(0, 1);
            for (j, w) in model.matrix.row(i) {
                if *j != abs {
                    image += w.clone() * report.phi[*j].clone();
                }
            }
            assert_eq!(image, report.eta.clone() * report.phi[i].clone());
        }

        // Conditioned-process rows are exactly stochastic, argmax states
        // exactly absorbing.
        for (row_at, row) in report.q.states().iter().zip(report.q.rows()) {
            let sum: BigRational = row.iter().cloned().fold(r(0, 1), |a, x| a + x);
            assert!(sum.is_one(), "row of state {row_at} sums to {sum}");
        }
        for &f in &report.f_states {
            assert!(report.q.get_by_state(f, f).unwrap().is_one());
        }

        // Random laws supported on the argmax set are quasi-stationary
        // and keep their exact invariance for 50 steps.
        for _ in 0..5 {
            let raws: Vec<i64> = report
                .f_states
                .iter()
                .map(|_| 1 + (rng.next_u64() % 9) as i64)
                .collect();
            let total: i64 = raws.iter().sum();
            let mut nu = vec![r(0, 1); model.space.len() - 1];
            for (&f, raw) in report.f_states.iter().zip(raws) {
                nu[f] = r(raw, total);
            }
            let check = qsd_check(&nu, &model.matrix, &report.f_states, &report.eta, 50)
                .unwrap();
            assert!(check.is_qsd);
            assert_eq!(check.row_eigen_identity, Some(true));
            assert_eq!(check.invariance, Some(true));
            assert_eq!(check.indicator_eigen, Some(true));
        }
    }
    // The generator does produce both kinds of model.
    assert!(degenerate_seen < attempts);
}

#[test]
fn absorbing_mass_is_monotone_and_survival_vanishes() {
    let mut rng = SplitMix64::new(0xAB50);
    for _ in 0..10 {
        let sites = 2 + (rng.next_u64() % 3) as usize;
        let model = build_model(random_weights(&mut rng, sites, 4));
        let abs = model.space.absorbing();
        let mut last_mass = r(0, 1);
        for b in model.matrix.distribution_iter(0).take(65) {
            assert!(b[abs] >= last_mass);
            assert!(b.iter().all(|x| *x >= r(0, 1)));
            last_mass = b[abs].clone();
        }
        if model.space.len() > 1 {
            // Survival tends to zero: after 64 steps it is far below 1
            // unless the model is the single-state identity.
            let survival = r(1, 1) - last_mass;
            assert!(survival < r(1, 2), "survival still {survival}");
        }
    }
}

#[test]
fn single_support_chain_reaches_absorption_in_one_step() {
    let rho = PartitionWeights::new([(Partition::finest(3), r(1, 1))]).unwrap();
    let model = build_model(rho);
    assert!(model.matrix.survival(0).is_one());
    assert!(model.matrix.survival(1).is_zero());
}
