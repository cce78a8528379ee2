//! The Markov chain on the reachable partition set.
//!
//! A weight vector over partitions drives both the recombination operator
//! and a chain: from state `δ`, draw a partition `D` with its weight and
//! jump to `δ ∨ D`. The state space is the coarsest partition together
//! with the closure of the support; in the canonical order (atom count
//! ascending, labels lexicographic) every transition moves weakly to the
//! right, so the matrix is upper triangular with the common refinement of
//! the support as the unique absorbing state in the last position.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::partitions::{Partition, PartitionFamily};
use crate::scalar::{pairwise_sum, Scalar};
use crate::{Error, Result};

/// Absolute tolerance for weight normalization in float mode; inside it
/// the weights are renormalized, outside it construction fails.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A probability vector over partitions of a shared index set. Only the
/// support is stored: entries with weight exactly zero are dropped at
/// construction, negative weights are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionWeights<N> {
    n_sites: usize,
    entries: BTreeMap<Partition, N>,
}

impl<N: Scalar> PartitionWeights<N> {
    /// Validates and normalizes a weight list. The weights must sum to 1:
    /// exactly in rational mode; within [`WEIGHT_SUM_TOL`] in float mode,
    /// in which case they are renormalized.
    pub fn new(entries: impl IntoIterator<Item = (Partition, N)>) -> Result<Self> {
        let mut map: BTreeMap<Partition, N> = BTreeMap::new();
        let mut n_sites = None;
        for (p, w) in entries {
            match n_sites {
                None => n_sites = Some(p.n_sites()),
                Some(n) if n != p.n_sites() => {
                    return Err(Error::SizeMismatch { left: n, right: p.n_sites() })
                }
                _ => {}
            }
            if w < N::zero() {
                return Err(Error::InvalidWeights(format!("negative weight {w} at {p}")));
            }
            if w.is_zero() {
                continue; // not part of the support
            }
            if map.insert(p.clone(), w).is_some() {
                return Err(Error::InvalidWeights(format!("duplicate partition {p}")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidWeights("empty support".into()));
        }
        let total = pairwise_sum(&map.values().cloned().collect::<Vec<_>>());
        if N::EXACT {
            if !total.is_one() {
                return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
            }
        } else {
            if (total.to_f64() - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
            }
            for w in map.values_mut() {
                *w = w.clone() / total.clone();
            }
        }
        Ok(PartitionWeights { n_sites: n_sites.unwrap(), entries: map })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Support partitions with their weights, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&Partition, &N)> {
        self.entries.iter()
    }

    pub fn weight(&self, p: &Partition) -> N {
        self.entries.get(p).cloned().unwrap_or_else(N::zero)
    }

    /// The support as a family.
    pub fn support(&self) -> PartitionFamily {
        PartitionFamily::new(self.entries.keys().cloned()).expect("support is nonempty")
    }

    /// The common refinement of the support: the absorbing state.
    pub fn common_refinement(&self) -> Partition {
        self.support().common_refinement()
    }

    /// Weight of the coarsest partition (zero when absent). The model is
    /// the identity transformation iff this is 1.
    pub fn coarsest_weight(&self) -> N {
        self.weight(&Partition::coarsest(self.n_sites))
    }
}

/// The ordered reachable state set: the coarsest partition plus the
/// closure of the support, sorted canonically (a linear extension of the
/// refinement order). The common refinement of the support is always the
/// last state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    states: Vec<Partition>,
    index: HashMap<Partition, usize>,
    absorbing: usize,
}

impl StateSpace {
    /// Builds the state space for a weight vector, with a cap on the
    /// closure size.
    pub fn build<N: Scalar>(rho: &PartitionWeights<N>, cap: usize) -> Result<Self> {
        let closed = rho.support().closure(cap)?;
        let mut set: std::collections::BTreeSet<Partition> =
            closed.iter().cloned().collect();
        set.insert(Partition::coarsest(rho.n_sites()));
        let states: Vec<Partition> = set.into_iter().collect();
        let index: HashMap<Partition, usize> =
            states.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let absorbing = index[&rho.common_refinement()];
        if absorbing != states.len() - 1 {
            return Err(Error::InternalConsistency(
                "absorbing state is not last in canonical order".into(),
            ));
        }
        Ok(StateSpace { states, index, absorbing })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// States in topological (coarse-first) order.
    pub fn states(&self) -> &[Partition] {
        &self.states
    }

    pub fn partition(&self, index: usize) -> &Partition {
        &self.states[index]
    }

    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Ordinal of the absorbing state (always the last one).
    pub fn absorbing(&self) -> usize {
        self.absorbing
    }

    /// Ordinal of the chain's start state, the coarsest partition.
    pub fn start(&self) -> usize {
        0
    }
}

/// Row-sparse stochastic matrix over a [`StateSpace`]. Row `i` holds the
/// (column, weight) pairs with positive weight, sorted by column; every
/// column index is `>= i`.
#[derive(Clone, PartialEq)]
pub struct TransitionMatrix<N> {
    rows: Vec<Vec<(usize, N)>>,
    absorbing: usize,
}

impl<N: Scalar> TransitionMatrix<N> {
    /// Builds `P[δ,δ'] = Σ { ρ_D : δ ∨ D = δ' }` over the given space.
    pub fn build(rho: &PartitionWeights<N>, space: &StateSpace) -> Result<Self> {
        let mut rows = Vec::with_capacity(space.len());
        for state in space.states() {
            let mut row: BTreeMap<usize, N> = BTreeMap::new();
            for (d, w) in rho.iter() {
                let target = state.join(d)?;
                let Some(j) = space.index_of(&target) else {
                    return Err(Error::InvalidArgument(format!(
                        "state space does not contain {target}; was it built from the same weights?"
                    )));
                };
                let slot = row.entry(j).or_insert_with(N::zero);
                *slot = slot.clone() + w.clone();
            }
            rows.push(row.into_iter().collect());
        }
        Ok(TransitionMatrix { rows, absorbing: space.absorbing() })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn absorbing(&self) -> usize {
        self.absorbing
    }

    /// Positive entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, N)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> N {
        self.rows[i]
            .iter()
            .find(|(col, _)| *col == j)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(N::zero)
    }

    /// The holding probability of state `i`.
    pub fn diagonal(&self, i: usize) -> N {
        self.get(i, i)
    }

    pub fn row_sum(&self, i: usize) -> N {
        pairwise_sum(&self.rows[i].iter().map(|(_, w)| w.clone()).collect::<Vec<_>>())
    }

    /// There is an arc `i → j` iff `P[i,j] > 0`.
    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        !self.get(i, j).is_zero()
    }

    /// One step of distribution evolution: `b' = b P`.
    pub fn step(&self, b: &[N]) -> Vec<N> {
        assert_eq!(b.len(), self.dim(), "distribution length mismatch");
        let mut out = vec![N::zero(); self.dim()];
        for (i, mass) in b.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (j, w) in &self.rows[i] {
                out[*j] = out[*j].clone() + mass.clone() * w.clone();
            }
        }
        out
    }

    /// `b_0, b_1, …` starting from unit mass at `start`.
    pub fn distribution_iter(&self, start: usize) -> impl Iterator<Item = Vec<N>> + '_ {
        let mut b0 = vec![N::zero(); self.dim()];
        b0[start] = N::one();
        std::iter::successors(Some(b0), move |b| Some(self.step(b)))
    }

    /// Distribution after `n` steps from the coarsest partition.
    pub fn distribution_at(&self, n: usize) -> Vec<N> {
        self.distribution_from(0, n)
    }

    pub fn distribution_from(&self, start: usize, n: usize) -> Vec<N> {
        self.distribution_iter(start).nth(n).expect("infinite iterator")
    }

    /// Evolves an arbitrary initial distribution `n` steps.
    pub fn evolve(&self, b0: &[N], n: usize) -> Vec<N> {
        let mut b = b0.to_vec();
        for _ in 0..n {
            b = self.step(&b);
        }
        b
    }

    /// Probability of not being absorbed after `n` steps, from the
    /// coarsest partition.
    pub fn survival(&self, n: usize) -> N {
        self.survival_from(0, n)
    }

    pub fn survival_from(&self, start: usize, n: usize) -> N {
        N::one() - self.distribution_from(start, n)[self.absorbing].clone()
    }

    /// For every state: can the chain reach `targets` with positive
    /// probability? One reverse pass suffices because arcs never point
    /// left in the canonical order.
    pub fn reachable_set(&self, targets: &[usize]) -> Vec<bool> {
        let mut reach = vec![false; self.dim()];
        for &t in targets {
            reach[t] = true;
        }
        for i in (0..self.dim()).rev() {
            if reach[i] {
                continue;
            }
            reach[i] = self.rows[i].iter().any(|(j, _)| *j != i && reach[*j]);
        }
        reach
    }

    pub fn reachable(&self, from: usize, targets: &[usize]) -> bool {
        self.reachable_set(targets)[from]
    }

    /// The vector `g(δ) = E_δ(z^{ζ_B}; ζ_B < ∞)` for a hitting time
    /// `ζ_B`: 1 on `B`, 0 on states that cannot reach `B`, elsewhere the
    /// solution of `g = z P g` by exact back-substitution. Fails when the
    /// geometric series diverges, i.e. `z · P[δ,δ] >= 1` at a state that
    /// can reach `B` but is not in it.
    pub fn hitting_vector(&self, targets: &[usize], z: &N) -> Result<Vec<N>> {
        if *z <= N::zero() {
            return Err(Error::InvalidArgument(format!("z must be positive, got {z}")));
        }
        let mut in_b = vec![false; self.dim()];
        for &t in targets {
            if t >= self.dim() {
                return Err(Error::InvalidArgument(format!("state {t} out of range")));
            }
            in_b[t] = true;
        }
        let reach = self.reachable_set(targets);
        let mut g = vec![N::zero(); self.dim()];
        for i in (0..self.dim()).rev() {
            if in_b[i] {
                g[i] = N::one();
            } else if reach[i] {
                let mut upstream = N::zero();
                for (j, w) in &self.rows[i] {
                    if *j != i {
                        upstream = upstream + w.clone() * g[*j].clone();
                    }
                }
                let denom = N::one() - z.clone() * self.diagonal(i);
                if denom <= N::zero() {
                    return Err(Error::DivergentFunctional {
                        state: i.to_string(),
                        diagonal: self.diagonal(i).to_string(),
                    });
                }
                g[i] = z.clone() * upstream / denom;
            }
        }
        Ok(g)
    }

    /// `E_start(z^{ζ_B}; ζ_B < ∞)`.
    pub fn hitting_functional(&self, targets: &[usize], z: &N, start: usize) -> Result<N> {
        Ok(self.hitting_vector(targets, z)?[start].clone())
    }

    /// Checks every structural invariant of the matrix against its space:
    /// stochastic rows, triangularity with respect to refinement, positive
    /// diagonals away from the coarsest state, a unit absorbing row, and
    /// strictly increasing diagonals along arcs.
    pub fn verify_invariants(&self, space: &StateSpace) -> Result<()> {
        if space.len() != self.dim() {
            return Err(Error::InvalidArgument("space/matrix dimension mismatch".into()));
        }
        for i in 0..self.dim() {
            let sum = self.row_sum(i);
            if !sum.close_to(&N::one(), 1e-10) {
                return Err(Error::InternalConsistency(format!(
                    "row {} ({}) sums to {}",
                    i,
                    space.partition(i),
                    sum
                )));
            }
            for (j, w) in self.row(i) {
                if *j < i {
                    return Err(Error::InternalConsistency(format!(
                        "entry ({i},{j}) below the diagonal"
                    )));
                }
                if *w <= N::zero() {
                    return Err(Error::InternalConsistency(format!(
                        "stored entry ({i},{j}) is not positive"
                    )));
                }
                if !space.partition(i).coarser_eq_unchecked(space.partition(*j)) {
                    return Err(Error::InternalConsistency(format!(
                        "arc {} → {} does not refine",
                        space.partition(i),
                        space.partition(*j)
                    )));
                }
                // Holding probabilities strictly increase along arcs.
                if *j != i && self.diagonal(i) >= self.diagonal(*j) {
                    return Err(Error::InternalConsistency(format!(
                        "diagonal does not increase along {} → {}",
                        space.partition(i),
                        space.partition(*j)
                    )));
                }
            }
            // Every state in the closure of the support holds with positive
            // probability; only the coarsest state (present even with zero
            // weight, since the chain starts there) may have a zero diagonal.
            if i != space.start() && self.diagonal(i).is_zero() {
                return Err(Error::InternalConsistency(format!(
                    "state {} has zero holding probability",
                    space.partition(i)
                )));
            }
        }
        let last = self.row(self.absorbing);
        if last.len() != 1 || last[0].0 != self.absorbing || !last[0].1.is_one() {
            return Err(Error::InternalConsistency("absorbing row is not the unit row".into()));
        }
        Ok(())
    }
}

impl<N: fmt::Debug> fmt::Debug for TransitionMatrix<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionMatrix")
            .field("dim", &self.rows.len())
            .field("absorbing", &self.absorbing)
            .field("rows", &self.rows)
            .finish()
    }
}
