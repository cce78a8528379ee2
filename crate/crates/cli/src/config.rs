//! Model configuration: a single JSON file describing sites, alphabet
//! sizes, partition weights, an optional measure, the number mode and
//! resource caps.
//!
//! Probabilities are written as strings (`"1/2"`, `"0.3"`) or JSON
//! integers; JSON floats are accepted only in float mode, since they
//! cannot round-trip into exact rationals faithfully.

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use recomb_core::chain::PartitionWeights;
use recomb_core::measures::{BlockTable, FactorizedMeasure, ProductMeasure, DEFAULT_TABLE_CAP};
use recomb_core::montecarlo::SplitMix64;
use recomb_core::partitions::{Partition, DEFAULT_STATE_CAP};
use recomb_core::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelConfig {
    pub sites: SitesSpec,
    #[serde(default)]
    pub alphabet_sizes: Option<Vec<usize>>,
    /// Pairs of (partition string, probability).
    pub weights: Vec<(String, serde_json::Value)>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub caps: Option<CapsSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SitesSpec {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum MeasureSpec {
    /// Dense joint table, row-major over sites in ascending order.
    #[serde(rename = "table")]
    Table { values: Vec<serde_json::Value> },
    /// Seeded positive draws, normalized (integers in exact mode).
    #[serde(rename = "random")]
    Random { seed: u64 },
    /// A partition with one probability table per atom; the measure is
    /// their tensor product.
    #[serde(rename = "product")]
    Product { partition: String, blocks: Vec<Vec<serde_json::Value>> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CapsSpec {
    #[serde(default)]
    pub states: Option<usize>,
    #[serde(default)]
    pub table: Option<usize>,
}

impl ModelConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: ModelConfig = serde_json::from_str(&text).map_err(|e| {
            anyhow!("config parse error at line {}, column {}: {e}", e.line(), e.column())
        })?;
        if config.weights.is_empty() {
            bail!("config has no weights");
        }
        Ok(config)
    }

    pub fn n_sites(&self) -> usize {
        match &self.sites {
            SitesSpec::Count(n) => *n,
            SitesSpec::Labels(labels) => labels.len(),
        }
    }
}

/// A fully validated model in one number mode.
pub struct Model<N> {
    pub weights: PartitionWeights<N>,
    pub measure: Option<ProductMeasure<N>>,
    pub state_cap: usize,
}

fn parse_value<N: Scalar>(value: &serde_json::Value, what: &str) -> anyhow::Result<N> {
    match value {
        serde_json::Value::String(text) => {
            N::parse_number(text).map_err(|e| anyhow!("{what}: {e}"))
        }
        serde_json::Value::Number(number) => {
            if let Some(int) = number.as_i64() {
                Ok(N::from_ratio(int, 1))
            } else if N::EXACT {
                bail!("{what}: write non-integer probabilities as strings (e.g. \"3/10\") in exact mode")
            } else {
                Ok(N::parse_number(&number.to_string()).map_err(|e| anyhow!("{what}: {e}"))?)
            }
        }
        other => bail!("{what}: expected a number or string, got {other}"),
    }
}

pub fn build_model<N: Scalar>(
    config: &ModelConfig,
    state_cap_flag: Option<usize>,
    table_cap_flag: Option<usize>,
) -> anyhow::Result<Model<N>> {
    let n_sites = config.n_sites();
    if n_sites == 0 {
        bail!("the model needs at least one site");
    }
    let alphabet = match &config.alphabet_sizes {
        Some(sizes) => {
            if sizes.len() != n_sites {
                bail!("{} alphabet sizes for {} sites", sizes.len(), n_sites);
            }
            if sizes.iter().any(|&k| k < 1) {
                bail!("alphabet sizes must be at least 1");
            }
            sizes.clone()
        }
        None => vec![2; n_sites],
    };
    let caps = config.caps.as_ref();
    let state_cap = state_cap_flag
        .or(caps.and_then(|c| c.states))
        .unwrap_or(DEFAULT_STATE_CAP);
    let table_cap = table_cap_flag
        .or(caps.and_then(|c| c.table))
        .unwrap_or(DEFAULT_TABLE_CAP);

    let mut pairs = Vec::with_capacity(config.weights.len());
    let mut float_sum = 0.0f64;
    for (text, value) in &config.weights {
        let partition = Partition::parse(text)
            .map_err(|e| anyhow!("weight partition `{text}`: {e}"))?;
        if partition.n_sites() != n_sites {
            bail!("partition `{text}` covers {} sites, model has {n_sites}", partition.n_sites());
        }
        let weight: N = parse_value(value, &format!("weight of `{text}`"))?;
        float_sum += weight.to_f64();
        pairs.push((partition, weight));
    }
    if !N::EXACT && (float_sum - 1.0).abs() > 1e-15 && (float_sum - 1.0).abs() <= 1e-9 {
        eprintln!(
            "{}",
            serde_json::json!({
                "warning": "weights renormalized",
                "sum": float_sum,
            })
        );
    }
    let weights = PartitionWeights::new(pairs)?;

    let table_cells: usize = alphabet.iter().try_fold(1usize, |acc, &k| {
        acc.checked_mul(k).filter(|&c| c <= table_cap)
    })
    .ok_or_else(|| anyhow!("joint table exceeds the table cap {table_cap}"))?;

    let measure = match &config.measure {
        None => None,
        Some(MeasureSpec::Table { values }) => {
            let parsed = values
                .iter()
                .enumerate()
                .map(|(i, v)| parse_value::<N>(v, &format!("measure entry {i}")))
                .collect::<anyhow::Result<Vec<_>>>()?;
            Some(ProductMeasure::new(alphabet.clone(), parsed)?)
        }
        Some(MeasureSpec::Random { seed }) => {
            Some(random_measure(&alphabet, *seed, table_cells)?)
        }
        Some(MeasureSpec::Product { partition, blocks }) => {
            let partition = Partition::parse(partition)?;
            if partition.n_sites() != n_sites {
                bail!("measure partition covers {} sites, model has {n_sites}", partition.n_sites());
            }
            let atoms = partition.atoms();
            if atoms.len() != blocks.len() {
                bail!("{} blocks for {} atoms", blocks.len(), atoms.len());
            }
            let tables = atoms
                .iter()
                .zip(blocks)
                .map(|(atom, entries)| {
                    let shape: Vec<usize> = atom.iter().map(|&s| alphabet[s]).collect();
                    let parsed = entries
                        .iter()
                        .enumerate()
                        .map(|(i, v)| parse_value::<N>(v, &format!("block entry {i}")))
                        .collect::<anyhow::Result<Vec<_>>>()?;
                    Ok(BlockTable::new(atom.clone(), shape, parsed)?)
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Some(FactorizedMeasure::new(partition, tables)?.tensor()?)
        }
    };

    Ok(Model { weights, measure, state_cap })
}

/// Seeded positive integers in 1..=2^20, normalized. Both modes normalize
/// the same integers, so they describe the same measure.
fn random_measure<N: Scalar>(
    alphabet: &[usize],
    seed: u64,
    cells: usize,
) -> anyhow::Result<ProductMeasure<N>> {
    let mut rng = SplitMix64::new(seed);
    let draws: Vec<i64> = (0..cells).map(|_| ((rng.next_u64() >> 44) + 1) as i64).collect();
    let total: i64 = draws.iter().sum();
    let values = draws.into_iter().map(|v| {
        let n: N = N::from_ratio(v, total);
        n
    });
    Ok(ProductMeasure::new(alphabet.to_vec(), values.collect())?)
}
