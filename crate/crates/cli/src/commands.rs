//! Subcommand implementations. Each command writes its artifacts under
//! the output directory, prints one machine-readable JSON summary line to
//! stdout, and returns the process exit code: 0 on success (degenerate
//! models are success, flagged), nonzero when validation or an exact
//! identity fails.

use std::path::Path;

use anyhow::bail;
use serde_json::{json, Value};

use recomb_core::chain::{StateSpace, TransitionMatrix};
use recomb_core::measures::{
    mixture_of_factorizations, recombination_iterate, recombination_step,
};
use recomb_core::montecarlo::estimate_survival;
use recomb_core::partitions::PartitionFamily;
use recomb_core::quasistationary::{
    analyze, conditioned_path_checks, qsd_check, Analysis,
};
use recomb_core::scalar::Scalar;

use crate::config::Model;
use crate::report;

pub struct Outcome {
    pub summary: Value,
    pub exit_code: i32,
}

fn ok(summary: Value) -> Outcome {
    Outcome { summary, exit_code: 0 }
}

struct Built<N> {
    space: StateSpace,
    matrix: TransitionMatrix<N>,
}

fn build<N: Scalar>(model: &Model<N>) -> anyhow::Result<Built<N>> {
    let space = StateSpace::build(&model.weights, model.state_cap)?;
    let matrix = TransitionMatrix::build(&model.weights, &space)?;
    Ok(Built { space, matrix })
}

pub fn closure<N: Scalar>(model: &Model<N>, out: &Path) -> anyhow::Result<Outcome> {
    let closed = model.weights.support().closure(model.state_cap)?;
    let absorbing = model.weights.common_refinement();
    let states: Vec<Value> = closed
        .iter()
        .map(|p| Value::String(p.to_string()))
        .collect();
    let body = json!({
        "count": states.len(),
        "states": states,
        "absorbing": absorbing.to_string(),
    });
    let path = report::write_json(out, "closure.json", &body)?;
    let mut summary = body;
    summary["command"] = json!("closure");
    summary["file"] = json!(path.display().to_string());
    Ok(ok(summary))
}

pub fn matrix<N: Scalar>(model: &Model<N>, out: &Path) -> anyhow::Result<Outcome> {
    let built = build(model)?;
    let path = report::write_matrix_csv(out, "matrix.csv", &built.space, &built.matrix)?;
    built.matrix.verify_invariants(&built.space)?;
    Ok(ok(json!({
        "command": "matrix",
        "states": built.space.len(),
        "absorbing": built.space.partition(built.space.absorbing()).to_string(),
        "degenerate": built.space.len() == 1,
        "file": path.display().to_string(),
    })))
}

pub fn evolve<N: Scalar>(model: &Model<N>, steps: usize, out: &Path) -> anyhow::Result<Outcome> {
    let built = build(model)?;
    let csv_path =
        report::write_evolution_csv(out, "evolve.csv", &built.space, &built.matrix, steps)?;

    // Cross-check of the two computation routes for the iterated operator,
    // when a measure is configured. Exact in rational mode; the check can
    // genuinely fail on supports where several weighted partitions have
    // two or more non-singleton atoms (the decomposition only holds when
    // at most one atom per weighted partition is non-singleton).
    let cross = match &model.measure {
        None => json!({"ran": false, "reason": "no measure configured"}),
        Some(m) => {
            let mut max_err = 0.0f64;
            let mut first_failure: Option<usize> = None;
            let mut current = m.clone();
            for n in 0..=steps.min(8) {
                if n > 0 {
                    current = recombination_step(&current, &model.weights)?;
                }
                let b = built.matrix.distribution_at(n);
                let mixed = mixture_of_factorizations(&b, &built.space, m)?;
                let step_err = current
                    .values()
                    .iter()
                    .zip(mixed.values())
                    .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
                    .fold(0.0, f64::max);
                max_err = max_err.max(step_err);
                let pass = if N::EXACT { step_err == 0.0 } else { step_err <= 1e-10 };
                if !pass && first_failure.is_none() {
                    first_failure = Some(n);
                }
            }
            json!({
                "ran": true,
                "pass": first_failure.is_none(),
                "maxAbsError": max_err,
                "firstFailureStep": first_failure,
            })
        }
    };
    let pass = cross["pass"].as_bool().unwrap_or(true);
    let body = json!({
        "steps": steps,
        "survivalAtEnd": report::scalar_json(&built.matrix.survival(steps)),
        "chainMixtureCheck": cross,
    });
    let json_path = report::write_json(out, "evolve.json", &body)?;
    let mut summary = body;
    summary["command"] = json!("evolve");
    summary["files"] = json!([
        csv_path.display().to_string(),
        json_path.display().to_string(),
    ]);
    Ok(Outcome { summary, exit_code: if pass { 0 } else { 1 } })
}

pub fn qsd<N: Scalar>(model: &Model<N>, out: &Path) -> anyhow::Result<Outcome> {
    let built = build(model)?;
    let analysis = analyze(&built.matrix, &built.space)?;
    let body = report::analysis_json(&built.space, &analysis);
    let path = report::write_json(out, "qsd.json", &body)?;
    let mut summary = body;
    summary["command"] = json!("qsd");
    summary["file"] = json!(path.display().to_string());
    Ok(ok(summary))
}

pub fn qprocess<N: Scalar>(model: &Model<N>, horizon: usize, out: &Path) -> anyhow::Result<Outcome> {
    let built = build(model)?;
    let analysis = analyze(&built.matrix, &built.space)?;
    let (body, pass) = match &analysis {
        Analysis::Degenerate(_) => (report::analysis_json(&built.space, &analysis), true),
        Analysis::Regular(rep) => {
            let depth = 3usize;
            let checks = conditioned_path_checks(&built.matrix, &rep.q, depth, horizon)?;
            let mut max_err = 0.0f64;
            let paths: Vec<Value> = checks
                .iter()
                .map(|c| {
                    let err = (c.q_product.clone() - c.conditioned.clone()).abs().to_f64();
                    max_err = max_err.max(err);
                    json!({
                        "path": c.path.iter()
                            .map(|&i| built.space.partition(i).to_string())
                            .collect::<Vec<_>>(),
                        "qProduct": report::scalar_json(&c.q_product),
                        "conditioned": report::scalar_json(&c.conditioned),
                        "absError": err,
                    })
                })
                .collect();
            let pass = max_err <= 1e-6;
            let mut body = report::analysis_json(&built.space, &analysis);
            body["pathChecks"] = json!({
                "horizon": horizon,
                "maxDepth": depth,
                "maxAbsError": max_err,
                "pass": pass,
                "paths": paths,
            });
            (body, pass)
        }
    };
    let path = report::write_json(out, "qprocess.json", &body)?;
    let mut summary = body;
    summary["command"] = json!("qprocess");
    summary["file"] = json!(path.display().to_string());
    Ok(Outcome { summary, exit_code: if pass { 0 } else { 1 } })
}

pub fn simulate<N: Scalar>(
    model: &Model<N>,
    seeds: u64,
    horizon: usize,
    base_seed: u64,
    out: &Path,
) -> anyhow::Result<Outcome> {
    if seeds == 0 {
        bail!("need at least one trajectory");
    }
    let built = build(model)?;
    let estimates = estimate_survival(&model.weights, base_seed, seeds, horizon)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("simulate.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["n", "estimate", "stderr", "exact"])?;
    let mut worst_sigma = 0.0f64;
    for e in &estimates {
        let exact = built.matrix.survival(e.step);
        writer.write_record([
            e.step.to_string(),
            format!("{}", e.estimate),
            format!("{}", e.std_error),
            exact.to_string(),
        ])?;
        let gap = (e.estimate - exact.to_f64()).abs();
        if e.std_error > 0.0 {
            worst_sigma = worst_sigma.max(gap / e.std_error);
        } else if gap > 0.0 {
            worst_sigma = f64::INFINITY;
        }
    }
    writer.flush()?;
    Ok(ok(json!({
        "command": "simulate",
        "seeds": seeds,
        "horizon": horizon,
        "baseSeed": base_seed,
        "worstSigma": worst_sigma,
        "file": path.display().to_string(),
    })))
}

pub fn verify<N: Scalar>(model: &Model<N>, base_seed: u64, out: &Path) -> anyhow::Result<Outcome> {
    let built = build(model)?;
    let mut checks: Vec<Value> = Vec::new();
    let mut all_pass = true;
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(json!({"name": name, "pass": pass, "detail": detail}));
    };

    match built.matrix.verify_invariants(&built.space) {
        Ok(()) => push("matrix_invariants", true, "rows stochastic, triangular, diagonals increase along arcs, absorbing row is unit".into()),
        Err(e) => {
            all_pass = false;
            push("matrix_invariants", false, e.to_string());
        }
    }

    {
        // Closure is a fixpoint of the one-step operator and its common
        // refinement dominates every member.
        let support = model.weights.support();
        let closed = support.closure(model.state_cap)?;
        let mut image = Vec::new();
        for d in &closed {
            for g in &support {
                image.push(d.join(g)?);
            }
        }
        let image = PartitionFamily::new(image)?;
        let top = support.common_refinement();
        let fix = image == closed;
        let dominated = closed
            .iter()
            .all(|member| member.coarser_eq(&top).unwrap_or(false));
        let pass = fix && dominated;
        if !pass {
            all_pass = false;
        }
        push("closure_fixpoint", pass, format!("{} states, refinement {}", closed.len(), top));
    }

    {
        let abs = built.space.absorbing();
        let mut last = N::zero();
        let mut monotone = true;
        for b in built.matrix.distribution_iter(0).take(65) {
            if b[abs] < last {
                monotone = false;
                break;
            }
            last = b[abs].clone();
        }
        if !monotone {
            all_pass = false;
        }
        push("absorbing_mass_monotone", monotone, "mass at the absorbing state never decreases (n <= 64)".into());
    }

    let analysis = analyze(&built.matrix, &built.space)?;
    let degenerate = matches!(analysis, Analysis::Degenerate(_));
    if let Analysis::Regular(rep) = &analysis {
        let abs = built.space.absorbing();
        {
            let pass = rep
                .f_states
                .iter()
                .all(|&f| (built.matrix.diagonal(f) + built.matrix.get(f, abs)).close_to(&N::one(), 1e-10));
            if !pass {
                all_pass = false;
            }
            push("argmax_rows_close", pass, "argmax states move only to themselves or absorption".into());
        }
        {
            let pass = rep.beta0 < rep.eta;
            if !pass {
                all_pass = false;
            }
            push("beta0_below_eta", pass, format!("beta0 = {}, eta = {}", rep.beta0, rep.eta));
        }
        {
            // Right eigen-identity of the hitting-functional vector.
            let mut pass = true;
            for i in 0..built.space.len() - 1 {
                let mut image = N::zero();
                for (j, w) in built.matrix.row(i) {
                    if *j != abs {
                        image = image + w.clone() * rep.phi[*j].clone();
                    }
                }
                if !image.close_to(&(rep.eta.clone() * rep.phi[i].clone()), 1e-10) {
                    pass = false;
                    break;
                }
            }
            if !pass {
                all_pass = false;
            }
            push("eigenvector_identity", pass, "P* phi = eta phi".into());
        }
        {
            let rows_ok = rep.q.rows().iter().all(|row| {
                let sum = row.iter().cloned().fold(N::zero(), |a, b| a + b);
                sum.close_to(&N::one(), 1e-10)
            });
            let absorbing_ok = rep
                .f_states
                .iter()
                .all(|&f| rep.q.get_by_state(f, f).map(|v| v.close_to(&N::one(), 1e-10)).unwrap_or(false));
            if !(rows_ok && absorbing_ok) {
                all_pass = false;
            }
            push("q_matrix_stochastic_and_argmax_absorbing", rows_ok && absorbing_ok,
                 format!("{} boundary states", rep.boundary.len()));
        }
        {
            let total = rep
                .quasi_limiting
                .iter()
                .cloned()
                .fold(N::zero(), |a, b| a + b);
            let off_f_zero = rep
                .quasi_limiting
                .iter()
                .enumerate()
                .all(|(i, v)| rep.f_states.contains(&i) || v.is_zero());
            let pass = total.close_to(&N::one(), 1e-10) && off_f_zero;
            if !pass {
                all_pass = false;
            }
            push("quasi_limiting_normalized", pass, format!("total mass {total}"));
        }
        {
            let mut pass = true;
            for &f in &rep.f_states {
                let mut nu = vec![N::zero(); built.space.len() - 1];
                nu[f] = N::one();
                let check = qsd_check(&nu, &built.matrix, &rep.f_states, &rep.eta, 50)?;
                pass &= check.is_qsd
                    && check.row_eigen_identity == Some(true)
                    && check.invariance == Some(true)
                    && check.indicator_eigen == Some(true);
            }
            if !pass {
                all_pass = false;
            }
            push("qsd_invariance", pass, "unit masses on argmax states are quasi-stationary (n <= 50)".into());
        }
    }

    if let Some(m) = &model.measure {
        {
            let fixed = m
                .factorize(&model.weights.common_refinement())?
                .tensor()?;
            let once = recombination_step(&fixed, &model.weights)?;
            let pass = once.close_to(&fixed, 1e-12);
            if !pass {
                all_pass = false;
            }
            push("factorized_fixed_point", pass, "the refinement-factorized measure is fixed".into());
        }
        {
            let mut max_err = 0.0f64;
            let mut pass = true;
            for n in 0..=6usize {
                let lhs = recombination_iterate(m, &model.weights, n)?;
                let b = built.matrix.distribution_at(n);
                let rhs = mixture_of_factorizations(&b, &built.space, m)?;
                let err = lhs
                    .values()
                    .iter()
                    .zip(rhs.values())
                    .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
                    .fold(0.0, f64::max);
                max_err = max_err.max(err);
                pass &= if N::EXACT { err == 0.0 } else { err <= 1e-10 };
            }
            if !pass {
                all_pass = false;
            }
            push(
                "chain_mixture_decomposition",
                pass,
                format!("max abs error {max_err} over steps 0..=6; exact only when at most one atom per weighted partition is non-singleton"),
            );
        }
    }

    {
        let estimates = estimate_survival(&model.weights, base_seed, 10_000, 5)?;
        let mut pass = true;
        for step in [1usize, 5] {
            let e = &estimates[step.min(estimates.len() - 1)];
            let exact = built.matrix.survival(e.step).to_f64();
            let slack = 3.0 * e.std_error.max(1e-9);
            pass &= (e.estimate - exact).abs() <= slack;
        }
        if !pass {
            all_pass = false;
        }
        push("montecarlo_consistency", pass, "empirical survival within 3 binomial standard errors".into());
    }

    let body = json!({
        "degenerate": degenerate,
        "pass": all_pass,
        "checks": checks,
    });
    let path = report::write_json(out, "verify.json", &body)?;
    let mut summary = body;
    summary["command"] = json!("verify");
    summary["file"] = json!(path.display().to_string());
    Ok(Outcome { summary, exit_code: if all_pass { 0 } else { 1 } })
}
