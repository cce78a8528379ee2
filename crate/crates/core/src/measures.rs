//! Finite product probability measures as dense joint tables, their
//! marginals and tensor products, and the recombination operator.
//!
//! Tables are row-major over sites in ascending order (the last site
//! varies fastest). A [`BlockTable`] is a table over an arbitrary subset
//! of sites; a [`ProductMeasure`] is a validated table over all of them;
//! a [`FactorizedMeasure`] is a partition together with one marginal
//! table per atom. The recombination operator maps a joint law to the
//! weighted mixture, over a partition weight vector, of the tensor
//! products of its per-atom marginals.

use crate::chain::{PartitionWeights, StateSpace};
use crate::partitions::Partition;
use crate::scalar::{pairwise_sum, Scalar};
use crate::{Error, Result};

/// Default cap on the number of entries of a dense joint table.
pub const DEFAULT_TABLE_CAP: usize = 1 << 20;

/// Absolute tolerance for total-mass checks in float mode.
pub const MASS_TOL: f64 = 1e-12;

/// A dense nonnegative table over the product of the alphabets of a
/// sorted site subset. The empty site set gives a single-entry table,
/// which is how the unit `μ_∅ ≡ 1` is represented.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTable<N> {
    sites: Vec<usize>,
    shape: Vec<usize>,
    values: Vec<N>,
}

impl<N: Scalar> BlockTable<N> {
    /// Validates structure: sites strictly ascending, shape aligned with
    /// sites, a value for every cell, no negative entries.
    pub fn new(sites: Vec<usize>, shape: Vec<usize>, values: Vec<N>) -> Result<Self> {
        if sites.len() != shape.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} sites but {} alphabet sizes",
                sites.len(),
                shape.len()
            )));
        }
        if !sites.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidMeasure("sites must be strictly ascending".into()));
        }
        let mut cells: usize = 1;
        for (&site, &k) in sites.iter().zip(&shape) {
            if k == 0 {
                return Err(Error::InvalidMeasure(format!("site {} has an empty alphabet", site + 1)));
            }
            cells = cells
                .checked_mul(k)
                .ok_or_else(|| Error::InvalidMeasure("table size overflows".into()))?;
        }
        if values.len() != cells {
            return Err(Error::InvalidMeasure(format!(
                "expected {} entries, got {}",
                cells,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| *v < N::zero()) {
            return Err(Error::InvalidMeasure(format!(
                "negative entry {} at cell {bad}",
                values[bad]
            )));
        }
        Ok(BlockTable { sites, shape, values })
    }

    /// The unit table over no sites.
    pub fn unit() -> Self {
        BlockTable { sites: vec![], shape: vec![], values: vec![N::one()] }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[N] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_mass(&self) -> N {
        pairwise_sum(&self.values)
    }

    /// Sums the table down to the given sites (any order, no duplicates);
    /// summing to the empty set yields the total mass as a unit table.
    pub fn marginal(&self, keep: &[usize]) -> Result<BlockTable<N>> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        if keep_sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate site in marginal".into()));
        }
        let positions = keep_sorted
            .iter()
            .map(|s| {
                self.sites
                    .binary_search(s)
                    .map_err(|_| Error::InvalidArgument(format!("unknown site {}", s + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let out_shape: Vec<usize> = positions.iter().map(|&p| self.shape[p]).collect();
        let out_strides = strides(&out_shape);
        let mut out = vec![N::zero(); out_shape.iter().product::<usize>().max(1)];
        let mut multi = vec![0usize; self.shape.len()];
        for value in &self.values {
            if !value.is_zero() {
                let cell: usize = positions
                    .iter()
                    .zip(&out_strides)
                    .map(|(&p, &stride)| multi[p] * stride)
                    .sum();
                out[cell] = out[cell].clone() + value.clone();
            }
            advance(&mut multi, &self.shape);
        }
        Ok(BlockTable { sites: keep_sorted, shape: out_shape, values: out })
    }

    fn value_at(&self, merged_multi: &[usize], positions: &[usize]) -> &N {
        let own_strides = strides(&self.shape);
        let cell: usize = positions
            .iter()
            .zip(&own_strides)
            .map(|(&p, &stride)| merged_multi[p] * stride)
            .sum();
        &self.values[cell]
    }
}

/// The tensor product of tables over pairwise disjoint site sets. Sites
/// merge into ascending order; each output entry is the product of the
/// input entries at the corresponding sub-indices. Marginalizing the
/// result back to any subset of one factor's sites returns that factor's
/// marginal (stability under restriction).
pub fn tensor_tables<N: Scalar>(tables: &[&BlockTable<N>]) -> Result<BlockTable<N>> {
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for t in tables {
        for (&site, &k) in t.sites.iter().zip(&t.shape) {
            merged.push((site, k));
        }
    }
    merged.sort_unstable();
    if merged.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("tensor factors share a site".into()));
    }
    let sites: Vec<usize> = merged.iter().map(|&(s, _)| s).collect();
    let shape: Vec<usize> = merged.iter().map(|&(_, k)| k).collect();
    // Positions of each factor's sites inside the merged index.
    let positions: Vec<Vec<usize>> = tables
        .iter()
        .map(|t| {
            t.sites
                .iter()
                .map(|s| sites.binary_search(s).expect("merged contains factor sites"))
                .collect()
        })
        .collect();
    let cells = shape.iter().product::<usize>().max(1);
    let mut values = Vec::with_capacity(cells);
    let mut multi = vec![0usize; shape.len()];
    for _ in 0..cells {
        let mut v = N::one();
        for (t, pos) in tables.iter().zip(&positions) {
            v = v * t.value_at(&multi, pos).clone();
        }
        values.push(v);
        advance(&mut multi, &shape);
    }
    Ok(BlockTable { sites, shape, values })
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn advance(multi: &mut [usize], shape: &[usize]) {
    for i in (0..shape.len()).rev() {
        multi[i] += 1;
        if multi[i] < shape[i] {
            return;
        }
        multi[i] = 0;
    }
}

/// A joint probability law over all sites: nonnegative entries with total
/// mass 1 (exact in rational mode, within [`MASS_TOL`] in float mode).
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMeasure<N> {
    table: BlockTable<N>,
}

impl<N: Scalar> ProductMeasure<N> {
    /// Wraps a dense table over the alphabets `{0,…,k_i-1}` per site,
    /// row-major with the last site fastest.
    pub fn new(alphabet: Vec<usize>, values: Vec<N>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::InvalidMeasure("no sites".into()));
        }
        let sites: Vec<usize> = (0..alphabet.len()).collect();
        let table = BlockTable::new(sites, alphabet, values)?;
        Self::from_table(table)
    }

    /// Wraps a [`BlockTable`] that already covers sites `0..n`.
    pub fn from_table(table: BlockTable<N>) -> Result<Self> {
        let n = table.sites.len();
        if table.sites.iter().copied().ne(0..n) || n == 0 {
            return Err(Error::InvalidMeasure("table does not cover all sites".into()));
        }
        let mass = table.total_mass();
        if !mass.close_to(&N::one(), MASS_TOL) {
            return Err(Error::InvalidMeasure(format!("total mass is {mass}, not 1")));
        }
        Ok(ProductMeasure { table })
    }

    pub fn uniform(alphabet: Vec<usize>) -> Result<Self> {
        let cells: usize = alphabet.iter().product();
        if cells == 0 {
            return Err(Error::InvalidMeasure("empty alphabet".into()));
        }
        let w = N::from_ratio(1, i64::try_from(cells).map_err(|_| {
            Error::InvalidMeasure("table too large for a uniform measure".into())
        })?);
        Self::new(alphabet, vec![w; cells])
    }

    pub fn n_sites(&self) -> usize {
        self.table.sites.len()
    }

    pub fn alphabet(&self) -> &[usize] {
        &self.table.shape
    }

    pub fn values(&self) -> &[N] {
        &self.table.values
    }

    pub fn len(&self) -> usize {
        self.table.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_table(&self) -> &BlockTable<N> {
        &self.table
    }

    /// The marginal law on a site subset; the empty subset gives the unit
    /// table (total mass 1).
    pub fn marginal(&self, sites: &[usize]) -> Result<BlockTable<N>> {
        self.table.marginal(sites)
    }

    /// Splits the law into its per-atom marginals along a partition.
    pub fn factorize(&self, partition: &Partition) -> Result<FactorizedMeasure<N>> {
        if partition.n_sites() != self.n_sites() {
            return Err(Error::SizeMismatch {
                left: partition.n_sites(),
                right: self.n_sites(),
            });
        }
        let blocks = partition
            .atoms()
            .iter()
            .map(|atom| self.table.marginal(atom))
            .collect::<Result<Vec<_>>>()?;
        Ok(FactorizedMeasure { partition: partition.clone(), blocks })
    }

    /// Entrywise comparison: exact in rational mode, within `tol` in
    /// float mode.
    pub fn close_to(&self, other: &ProductMeasure<N>, tol: f64) -> bool {
        self.alphabet() == other.alphabet()
            && self
                .values()
                .iter()
                .zip(other.values())
                .all(|(a, b)| a.close_to(b, tol))
    }

    /// Total-variation distance: half the sum of absolute differences.
    pub fn total_variation(&self, other: &ProductMeasure<N>) -> Result<N> {
        if self.alphabet() != other.alphabet() {
            return Err(Error::InvalidArgument("alphabets differ".into()));
        }
        let diffs: Vec<N> = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a.clone() - b.clone()).abs())
            .collect();
        Ok(N::from_ratio(1, 2) * pairwise_sum(&diffs))
    }
}

/// A partition together with one probability table per atom; its tensor
/// product is the product measure with those block marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedMeasure<N> {
    partition: Partition,
    blocks: Vec<BlockTable<N>>,
}

impl<N: Scalar> FactorizedMeasure<N> {
    /// Blocks must line up with the partition's atoms (same sites, in
    /// atom order) and each must be a probability table.
    pub fn new(partition: Partition, blocks: Vec<BlockTable<N>>) -> Result<Self> {
        let atoms = partition.atoms();
        if atoms.len() != blocks.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} block tables",
                atoms.len(),
                blocks.len()
            )));
        }
        for (atom, block) in atoms.iter().zip(&blocks) {
            if block.sites() != atom.as_slice() {
                return Err(Error::InvalidMeasure(format!(
                    "block sites {:?} do not match atom {:?}",
                    block.sites(),
                    atom
                )));
            }
            let mass = block.total_mass();
            if !mass.close_to(&N::one(), MASS_TOL) {
                return Err(Error::InvalidMeasure(format!(
                    "block over {:?} has mass {mass}",
                    atom
                )));
            }
        }
        Ok(FactorizedMeasure { partition, blocks })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn blocks(&self) -> &[BlockTable<N>] {
        &self.blocks
    }

    /// The dense product measure with these block marginals.
    pub fn tensor(&self) -> Result<ProductMeasure<N>> {
        let refs: Vec<&BlockTable<N>> = self.blocks.iter().collect();
        ProductMeasure::from_table(tensor_tables(&refs)?)
    }
}

/// One application of the recombination operator: the weighted mixture,
/// over the support of `rho`, of the tensor products of the per-atom
/// marginals of `m`.
pub fn recombination_step<N: Scalar>(
    m: &ProductMeasure<N>,
    rho: &PartitionWeights<N>,
) -> Result<ProductMeasure<N>> {
    if rho.n_sites() != m.n_sites() {
        return Err(Error::SizeMismatch { left: rho.n_sites(), right: m.n_sites() });
    }
    let mut acc = vec![N::zero(); m.len()];
    for (d, w) in rho.iter() {
        let term = m.factorize(d)?.tensor()?;
        for (slot, v) in acc.iter_mut().zip(term.values()) {
            *slot = slot.clone() + w.clone() * v.clone();
        }
    }
    ProductMeasure::new(m.alphabet().to_vec(), acc)
}

/// `n`-fold composition of [`recombination_step`]; zero steps is the
/// identity.
pub fn recombination_iterate<N: Scalar>(
    m: &ProductMeasure<N>,
    rho: &PartitionWeights<N>,
    steps: usize,
) -> Result<ProductMeasure<N>> {
    let mut current = m.clone();
    for _ in 0..steps {
        current = recombination_step(&current, rho)?;
    }
    Ok(current)
}

/// `Σ_δ b(δ) · (tensor of the δ-marginals of m)` over a state space.
/// This is the right-hand side of the chain decomposition of the iterated
/// operator: with `b` the chain distribution after `n` steps it equals
/// `n` applications of [`recombination_step`] exactly.
pub fn mixture_of_factorizations<N: Scalar>(
    coefficients: &[N],
    space: &StateSpace,
    m: &ProductMeasure<N>,
) -> Result<ProductMeasure<N>> {
    if coefficients.len() != space.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} states",
            coefficients.len(),
            space.len()
        )));
    }
    let total = pairwise_sum(coefficients);
    if !total.close_to(&N::one(), WEIGHT_TOL) {
        return Err(Error::InvalidArgument(format!(
            "coefficients sum to {total}, not 1"
        )));
    }
    if coefficients.iter().any(|c| *c < N::zero()) {
        return Err(Error::InvalidArgument("negative coefficient".into()));
    }
    let mut acc = vec![N::zero(); m.len()];
    for (state, b) in space.states().iter().zip(coefficients) {
        if b.is_zero() {
            continue;
        }
        let term = m.factorize(state)?.tensor()?;
        for (slot, v) in acc.iter_mut().zip(term.values()) {
            *slot = slot.clone() + b.clone() * v.clone();
        }
    }
    ProductMeasure::new(m.alphabet().to_vec(), acc)
}

const WEIGHT_TOL: f64 = 1e-9;
