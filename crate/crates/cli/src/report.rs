//! File emission: JSON reports (rationals as "p/q" strings in exact mode,
//! plain numbers in float mode; keys in insertion order) and CSV series.
//! All outputs are UTF-8 with LF line endings.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};

use recomb_core::chain::{StateSpace, TransitionMatrix};
use recomb_core::quasistationary::{Analysis, DegeneracyKind, QsReport};
use recomb_core::scalar::Scalar;

pub fn scalar_json<N: Scalar>(x: &N) -> Value {
    if N::EXACT {
        Value::String(x.to_string())
    } else {
        serde_json::Number::from_f64(x.to_f64())
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(x.to_string()))
    }
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn write_matrix_csv<N: Scalar>(
    dir: &Path,
    name: &str,
    space: &StateSpace,
    matrix: &TransitionMatrix<N>,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut writer = csv::Writer::from_path(&path)?;
    let mut header = vec!["state".to_string()];
    header.extend(space.states().iter().map(|p| p.to_string()));
    writer.write_record(&header)?;
    for i in 0..space.len() {
        let mut record = vec![space.partition(i).to_string()];
        record.extend((0..space.len()).map(|j| matrix.get(i, j).to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(path)
}

pub fn write_evolution_csv<N: Scalar>(
    dir: &Path,
    name: &str,
    space: &StateSpace,
    matrix: &TransitionMatrix<N>,
    steps: usize,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut writer = csv::Writer::from_path(&path)?;
    let mut header = vec!["n".to_string()];
    header.extend(space.states().iter().map(|p| p.to_string()));
    header.push("survival".to_string());
    writer.write_record(&header)?;
    for (n, b) in matrix.distribution_iter(0).take(steps + 1).enumerate() {
        let mut record = vec![n.to_string()];
        record.extend(b.iter().map(|x| x.to_string()));
        let survival = N::one() - b[space.absorbing()].clone();
        record.push(survival.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(path)
}

/// The quasi-stationary report in its JSON schema. Degenerate models get
/// the flag, the reason and the absorption bound, with the spectral
/// quantities suppressed.
pub fn analysis_json<N: Scalar>(space: &StateSpace, analysis: &Analysis<N>) -> Value {
    match analysis {
        Analysis::Degenerate(d) => json!({
            "degenerate": true,
            "reason": match d.kind {
                DegeneracyKind::IdentityModel =>
                    "all weight on the coarsest partition; the operator is the identity",
                DegeneracyKind::ZeroDecayRate =>
                    "every state bordering absorption has zero holding probability",
            },
            "absorptionBound": d.absorption_bound,
        }),
        Analysis::Regular(report) => qs_report_json(space, report),
    }
}

fn states_json(space: &StateSpace, indices: &[usize]) -> Value {
    Value::Array(
        indices
            .iter()
            .map(|&i| Value::String(space.partition(i).to_string()))
            .collect(),
    )
}

fn vector_json<N: Scalar>(space: &StateSpace, values: &[N]) -> Value {
    let mut map = Map::new();
    for (i, v) in values.iter().enumerate() {
        map.insert(space.partition(i).to_string(), scalar_json(v));
    }
    Value::Object(map)
}

pub fn qs_report_json<N: Scalar>(space: &StateSpace, report: &QsReport<N>) -> Value {
    let q_rows: Vec<Value> = report
        .q
        .rows()
        .iter()
        .map(|row| Value::Array(row.iter().map(scalar_json).collect()))
        .collect();
    json!({
        "degenerate": false,
        "eta": scalar_json(&report.eta),
        "beta0": scalar_json(&report.beta0),
        "F": states_json(space, &report.f_states),
        "delta": states_json(space, &report.delta),
        "phi": vector_json(space, &report.phi),
        "boundary": states_json(space, &report.boundary),
        "Q": {
            "states": states_json(space, report.q.states()),
            "rows": q_rows,
        },
        "quasiLimiting": vector_json(space, &report.quasi_limiting),
        "limitConstant": scalar_json(&report.limit_constant),
    })
}
