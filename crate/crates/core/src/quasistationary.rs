//! Quasi-stationary analysis of the partition chain.
//!
//! Because the transition matrix is triangular with strictly increasing
//! diagonals along arcs, everything about the chain conditioned on
//! non-absorption is explicit. Write `Δ` for the transient states with a
//! direct arc to the absorbing state, `η` for the largest holding
//! probability over `Δ` and `ℱ` for its argmax set. Then survival decays
//! like `η^n`, the conditional law of the chain concentrates on `ℱ`, the
//! vector of hitting functionals `φ(δ) = E_δ(η^{-ζ_ℱ}; ζ_ℱ < ∞)` is a
//! right eigenvector of the substochastic restriction for `η`, the
//! conditioned process has an explicit stochastic matrix with every `ℱ`
//! state absorbing, and the quasi-stationary distributions are exactly
//! the laws supported on `ℱ`.

use crate::chain::{StateSpace, TransitionMatrix};
use crate::scalar::{pairwise_sum, Scalar};
use crate::{Error, Result};

/// Tolerance for identity checks in float mode; exact mode uses `==`.
const IDENT_TOL: f64 = 1e-10;

/// Why a model has no quasi-stationary regime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DegeneracyKind {
    /// All weight sits on the coarsest partition: the operator is the
    /// identity and the chain starts absorbed.
    IdentityModel,
    /// Every state with an arc to the absorbing state has zero holding
    /// probability, so survival is not geometric; absorption happens in
    /// at most the reported number of steps.
    ZeroDecayRate,
}

/// A degenerate verdict: the model is valid but the conditioned-process
/// quantities are undefined; absorption happens within `absorption_bound`
/// steps with certainty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Degeneracy {
    pub kind: DegeneracyKind,
    pub absorption_bound: usize,
}

/// The conditioned process matrix over the states that can reach `ℱ`,
/// with its own state list (indices into the full space).
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix<N> {
    states: Vec<usize>,
    rows: Vec<Vec<N>>,
}

impl<N: Scalar> QMatrix<N> {
    /// Indices into the full state space, ascending.
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn rows(&self) -> &[Vec<N>] {
        &self.rows
    }

    /// Entry addressed by full-space state indices; `None` when either
    /// state lies outside the boundary set.
    pub fn get_by_state(&self, from: usize, to: usize) -> Option<N> {
        let i = self.states.binary_search(&from).ok()?;
        let j = self.states.binary_search(&to).ok()?;
        Some(self.rows[i][j].clone())
    }

    /// Product of entries along a path of full-space state indices.
    pub fn path_product(&self, path: &[usize]) -> Option<N> {
        let mut acc = N::one();
        for pair in path.windows(2) {
            acc = acc * self.get_by_state(pair[0], pair[1])?;
        }
        Some(acc)
    }
}

/// Everything the analysis produces for a non-degenerate model. Vectors
/// indexed by transient states run over the full space minus the
/// absorbing state (which is always last), in state order.
#[derive(Clone, Debug, PartialEq)]
pub struct QsReport<N> {
    /// Transient states with a direct arc to the absorbing state.
    pub delta: Vec<usize>,
    /// Geometric decay rate of survival: the largest holding probability
    /// over `delta`. Lies strictly between 0 and 1.
    pub eta: N,
    /// States of `delta` attaining `eta`.
    pub f_states: Vec<usize>,
    /// Largest holding probability among transient states outside
    /// `f_states`; 0 when there are none. Always strictly below `eta`.
    pub beta0: N,
    /// `φ(δ) = E_δ(η^{-ζ_ℱ}; ζ_ℱ < ∞)` over transient states: 1 on `ℱ`,
    /// 0 exactly on the states that cannot reach `ℱ`, and a right
    /// eigenvector of the substochastic restriction for eigenvalue `η`.
    pub phi: Vec<N>,
    /// States with positive probability of reaching `ℱ` (where `φ > 0`);
    /// the state set of the conditioned process.
    pub boundary: Vec<usize>,
    /// Transition matrix of the chain conditioned to never be absorbed.
    pub q: QMatrix<N>,
    /// Limit of the conditional law of the chain given survival: zero off
    /// `ℱ`, and on `ℱ` the normalized per-target hitting functionals.
    pub quasi_limiting: Vec<N>,
    /// `lim η^{-n} P(survival past n) = φ(start)`.
    pub limit_constant: N,
}

/// Outcome of [`analyze`]: a full report, or a degeneracy verdict.
#[derive(Clone, Debug, PartialEq)]
pub enum Analysis<N> {
    Degenerate(Degeneracy),
    Regular(QsReport<N>),
}

impl<N> Analysis<N> {
    pub fn report(&self) -> Option<&QsReport<N>> {
        match self {
            Analysis::Regular(r) => Some(r),
            Analysis::Degenerate(_) => None,
        }
    }
}

/// Transient states with a direct positive-probability arc to the
/// absorbing state. Errors when the model is the identity (single state).
pub fn delta_set<N: Scalar>(p: &TransitionMatrix<N>, space: &StateSpace) -> Result<Vec<usize>> {
    if space.len() == 1 {
        return Err(Error::DegenerateModel(
            "all weight on the coarsest partition; the operator is the identity".into(),
        ));
    }
    let abs = space.absorbing();
    Ok((0..space.len()).filter(|&i| i != abs && p.has_arc(i, abs)).collect())
}

/// The exact maximum holding probability over `delta` and its full argmax
/// set (no tie-breaking). For a positive maximum, every argmax state is
/// verified to move only to itself or the absorbing state.
pub fn eta_and_f<N: Scalar>(
    p: &TransitionMatrix<N>,
    delta: &[usize],
) -> Result<(N, Vec<usize>)> {
    if delta.is_empty() {
        return Err(Error::InternalConsistency("delta set is empty".into()));
    }
    let mut eta = N::zero();
    for &i in delta {
        let d = p.diagonal(i);
        if d > eta {
            eta = d;
        }
    }
    let f_states: Vec<usize> =
        delta.iter().copied().filter(|&i| p.diagonal(i) == eta).collect();
    if !eta.is_zero() {
        for &i in &f_states {
            let closing = p.diagonal(i) + p.get(i, p.absorbing());
            if !closing.close_to(&N::one(), IDENT_TOL) {
                return Err(Error::InternalConsistency(format!(
                    "argmax state {i} leaks mass: P[δ,δ] + P[δ,abs] = {closing}"
                )));
            }
        }
    }
    Ok((eta, f_states))
}

/// Largest holding probability among transient states outside `f_states`;
/// 0 when that range is empty.
pub fn beta0<N: Scalar>(p: &TransitionMatrix<N>, f_states: &[usize]) -> N {
    let mut best = N::zero();
    for i in 0..p.dim() {
        if i == p.absorbing() || f_states.contains(&i) {
            continue;
        }
        let d = p.diagonal(i);
        if d > best {
            best = d;
        }
    }
    best
}

/// The eigenvector of hitting functionals, over transient states: the
/// hitting vector for target `ℱ` at argument `1/η`, solved by exact
/// back-substitution (the relevant diagonals sit strictly below `η`, so
/// the system is invertible). In exact mode the eigen-identity is
/// verified before returning.
pub fn phi_vector<N: Scalar>(
    p: &TransitionMatrix<N>,
    f_states: &[usize],
    eta: &N,
) -> Result<Vec<N>> {
    if *eta <= N::zero() {
        return Err(Error::DegenerateModel("zero decay rate".into()));
    }
    let z = eta.recip();
    let full = p.hitting_vector(f_states, &z)?;
    let phi = full[..p.dim() - 1].to_vec();
    verify_right_eigenvector(p, &phi, eta)?;
    Ok(phi)
}

fn verify_right_eigenvector<N: Scalar>(
    p: &TransitionMatrix<N>,
    phi: &[N],
    eta: &N,
) -> Result<()> {
    let abs = p.absorbing();
    for i in 0..phi.len() {
        let mut image = N::zero();
        for (j, w) in p.row(i) {
            if *j != abs {
                image = image + w.clone() * phi[*j].clone();
            }
        }
        let scaled = eta.clone() * phi[i].clone();
        if !image.close_to(&scaled, IDENT_TOL) {
            return Err(Error::InternalConsistency(format!(
                "(P* φ)[{i}] = {image} but η φ[{i}] = {scaled}"
            )));
        }
    }
    Ok(())
}

/// `lim η^{-n} P(survival past n)`, from the start state.
pub fn limit_constant<N: Scalar>(phi: &[N]) -> N {
    phi[0].clone()
}

/// The limiting conditional law over transient states: per-target hitting
/// functionals on `ℱ`, scaled by the limit constant, zero elsewhere. The
/// per-target values are verified to add up to the `ℱ`-hitting functional.
pub fn quasi_limiting<N: Scalar>(
    p: &TransitionMatrix<N>,
    f_states: &[usize],
    eta: &N,
    phi: &[N],
) -> Result<Vec<N>> {
    let z = eta.recip();
    let norm = limit_constant(phi);
    if norm <= N::zero() {
        return Err(Error::InternalConsistency(
            "limit constant is not positive at the start state".into(),
        ));
    }
    let mut out = vec![N::zero(); phi.len()];
    let mut covered = N::zero();
    for &target in f_states {
        let share = p.hitting_functional(&[target], &z, 0)?;
        covered = covered + share.clone();
        out[target] = share / norm.clone();
    }
    // The hitting time of ℱ splits disjointly over which member is hit.
    if !covered.close_to(&norm, IDENT_TOL) {
        return Err(Error::InternalConsistency(format!(
            "per-target functionals sum to {covered}, expected {norm}"
        )));
    }
    Ok(out)
}

/// `lim P_start(survive n) / P(survive n) = φ(start)/φ(coarsest)`; zero
/// exactly when `start` cannot reach `ℱ`.
pub fn ratio_limit<N: Scalar>(phi: &[N], start: usize) -> Result<N> {
    if start >= phi.len() {
        return Err(Error::InvalidArgument(format!(
            "state {start} is not transient"
        )));
    }
    let bottom = limit_constant(phi);
    if bottom.is_zero() {
        return Err(Error::InternalConsistency("zero limit constant".into()));
    }
    Ok(phi[start].clone() / bottom)
}

/// The conditioned-process matrix over the states that can reach `ℱ`
/// (equivalently, where `phi > 0`): `Q[δ,δ'] = η^{-1} P[δ,δ'] φ(δ')/φ(δ)`.
/// Rows are verified stochastic and `ℱ` rows absorbing.
pub fn q_matrix<N: Scalar>(
    p: &TransitionMatrix<N>,
    f_states: &[usize],
    eta: &N,
    phi: &[N],
) -> Result<QMatrix<N>> {
    let boundary: Vec<usize> =
        (0..phi.len()).filter(|&i| !phi[i].is_zero()).collect();
    if boundary.is_empty() {
        return Err(Error::InternalConsistency("empty boundary set".into()));
    }
    let z = eta.recip();
    let mut rows = Vec::with_capacity(boundary.len());
    for &i in &boundary {
        let mut row = Vec::with_capacity(boundary.len());
        for &j in &boundary {
            row.push(z.clone() * p.get(i, j) * phi[j].clone() / phi[i].clone());
        }
        let total = pairwise_sum(&row);
        if !total.close_to(&N::one(), IDENT_TOL) {
            return Err(Error::InternalConsistency(format!(
                "conditioned row for state {i} sums to {total}"
            )));
        }
        rows.push(row);
    }
    let q = QMatrix { states: boundary, rows };
    for &f in f_states {
        let held = q.get_by_state(f, f).expect("ℱ lies inside the boundary");
        if !held.close_to(&N::one(), IDENT_TOL) {
            return Err(Error::InternalConsistency(format!(
                "state {f} is not absorbing under the conditioned process"
            )));
        }
    }
    Ok(q)
}

/// Runs the whole analysis, flagging degenerate models instead of
/// failing on them.
pub fn analyze<N: Scalar>(p: &TransitionMatrix<N>, space: &StateSpace) -> Result<Analysis<N>> {
    if space.len() == 1 {
        return Ok(Analysis::Degenerate(Degeneracy {
            kind: DegeneracyKind::IdentityModel,
            absorption_bound: 0,
        }));
    }
    let delta = delta_set(p, space)?;
    let (eta, f_states) = eta_and_f(p, &delta)?;
    if eta.is_zero() {
        return Ok(Analysis::Degenerate(Degeneracy {
            kind: DegeneracyKind::ZeroDecayRate,
            absorption_bound: space.len(),
        }));
    }
    let b0 = beta0(p, &f_states);
    if b0 >= eta {
        return Err(Error::InternalConsistency(format!(
            "β₀ = {b0} is not strictly below η = {eta}"
        )));
    }
    let phi = phi_vector(p, &f_states, &eta)?;
    let ql = quasi_limiting(p, &f_states, &eta, &phi)?;
    let q = q_matrix(p, &f_states, &eta, &phi)?;
    let boundary = q.states().to_vec();
    let limit = limit_constant(&phi);
    if limit <= N::zero() {
        return Err(Error::InternalConsistency(
            "limit constant must be positive from the start state".into(),
        ));
    }
    Ok(Analysis::Regular(QsReport {
        delta,
        eta,
        f_states,
        beta0: b0,
        phi,
        boundary,
        q,
        quasi_limiting: ql,
        limit_constant: limit,
    }))
}

/// Result of testing a candidate initial law for quasi-stationarity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QsdCheck {
    /// True iff the law is supported on `ℱ` — exactly the condition for
    /// being a quasi-stationary distribution here.
    pub is_qsd: bool,
    /// `ν' P* = η ν'`, checked when `is_qsd`.
    pub row_eigen_identity: Option<bool>,
    /// `P_ν(Y_n = δ | survival) = ν(δ)` for all n up to the horizon,
    /// checked by direct evolution when `is_qsd`.
    pub invariance: Option<bool>,
    /// The indicator row vector of the support (and of all of `ℱ`)
    /// satisfies the same row eigen-identity, checked when `is_qsd`.
    pub indicator_eigen: Option<bool>,
}

/// Tests whether `nu` (a probability vector over transient states) is a
/// quasi-stationary distribution, and when it is, verifies the defining
/// identities by direct computation up to `horizon` steps.
pub fn qsd_check<N: Scalar>(
    nu: &[N],
    p: &TransitionMatrix<N>,
    f_states: &[usize],
    eta: &N,
    horizon: usize,
) -> Result<QsdCheck> {
    let transient = p.dim() - 1;
    if nu.len() != transient {
        return Err(Error::InvalidArgument(format!(
            "expected {transient} entries, got {}",
            nu.len()
        )));
    }
    if nu.iter().any(|x| *x < N::zero()) {
        return Err(Error::InvalidArgument("negative mass".into()));
    }
    let total = pairwise_sum(nu);
    if !total.close_to(&N::one(), 1e-9) {
        return Err(Error::InvalidArgument(format!("mass {total}, expected 1")));
    }
    let is_qsd = nu
        .iter()
        .enumerate()
        .all(|(i, x)| x.is_zero() || f_states.contains(&i));
    if !is_qsd {
        return Ok(QsdCheck {
            is_qsd: false,
            row_eigen_identity: None,
            invariance: None,
            indicator_eigen: None,
        });
    }

    let row_ok = row_eigen_holds(p, nu, eta);

    // Invariance under conditioning, by exact evolution of the extended
    // vector: the conditional mass at each transient state must stay at
    // ν(δ), and survival must decay by exactly η each step.
    let abs = p.absorbing();
    let mut b: Vec<N> = nu.iter().cloned().chain(std::iter::once(N::zero())).collect();
    let mut expected_survival = N::one();
    let mut invariance_ok = true;
    'outer: for _ in 1..=horizon {
        b = p.step(&b);
        expected_survival = expected_survival * eta.clone();
        let survival = N::one() - b[abs].clone();
        if !survival.close_to(&expected_survival, IDENT_TOL) {
            invariance_ok = false;
            break;
        }
        for i in 0..transient {
            let conditional_mass = nu[i].clone() * survival.clone();
            if !b[i].close_to(&conditional_mass, IDENT_TOL) {
                invariance_ok = false;
                break 'outer;
            }
        }
    }

    // The unnormalized indicator of any nonempty subset of ℱ passes the
    // same row identity; check the support of ν and all of ℱ.
    let support: Vec<usize> =
        (0..transient).filter(|&i| !nu[i].is_zero()).collect();
    let mut indicator_ok = true;
    for subset in [&support, &f_states.to_vec()] {
        let mut ind = vec![N::zero(); transient];
        for &i in subset {
            ind[i] = N::one();
        }
        indicator_ok &= row_eigen_holds(p, &ind, eta);
    }

    Ok(QsdCheck {
        is_qsd: true,
        row_eigen_identity: Some(row_ok),
        invariance: Some(invariance_ok),
        indicator_eigen: Some(indicator_ok),
    })
}

/// `x' P* = η x'` for a row vector over transient states.
fn row_eigen_holds<N: Scalar>(p: &TransitionMatrix<N>, x: &[N], eta: &N) -> bool {
    let abs = p.absorbing();
    let mut image = vec![N::zero(); x.len()];
    for (i, mass) in x.iter().enumerate() {
        if mass.is_zero() {
            continue;
        }
        for (j, w) in p.row(i) {
            if *j != abs {
                image[*j] = image[*j].clone() + mass.clone() * w.clone();
            }
        }
    }
    image
        .iter()
        .zip(x)
        .all(|(got, want)| got.close_to(&(eta.clone() * want.clone()), IDENT_TOL))
}

/// One conditioned-path comparison: the exact finite-`n` conditional
/// probability of a path against the product of conditioned-process
/// entries it converges to.
#[derive(Clone, Debug, PartialEq)]
pub struct PathCheck<N> {
    /// States visited after the start state (full-space indices).
    pub path: Vec<usize>,
    pub q_product: N,
    pub conditioned: N,
}

/// `P(Y_1 = path[0], …, Y_k = path[k-1] | survival past n)`, starting
/// from the coarsest state, computed exactly.
pub fn conditioned_path_probability<N: Scalar>(
    p: &TransitionMatrix<N>,
    path: &[usize],
    n: usize,
) -> Result<N> {
    if path.len() > n {
        return Err(Error::InvalidArgument("path longer than the horizon".into()));
    }
    let mut joint = N::one();
    let mut at = 0usize;
    for &next in path {
        joint = joint * p.get(at, next);
        at = next;
    }
    let denominator = p.survival(n);
    if denominator.is_zero() {
        return Err(Error::DegenerateModel(format!("no survival past step {n}")));
    }
    Ok(joint * p.survival_from(at, n - path.len()) / denominator)
}

/// Enumerates every positive-probability path of length 1..=`max_len`
/// from the start state through a state set, and compares its conditioned
/// probability at horizon `n` with the matching product of `q` entries.
pub fn conditioned_path_checks<N: Scalar>(
    p: &TransitionMatrix<N>,
    q: &QMatrix<N>,
    max_len: usize,
    n: usize,
) -> Result<Vec<PathCheck<N>>> {
    let allowed = q.states();
    if !allowed.contains(&0) {
        return Err(Error::InternalConsistency(
            "start state lies outside the boundary set".into(),
        ));
    }
    let mut checks = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(prefix) = stack.pop() {
        let last = prefix.last().copied().unwrap_or(0);
        if !prefix.is_empty() {
            let mut full = vec![0];
            full.extend(&prefix);
            let q_product = q.path_product(&full).expect("path stays inside the boundary");
            let conditioned = conditioned_path_probability(p, &prefix, n)?;
            checks.push(PathCheck { path: prefix.clone(), q_product, conditioned });
        }
        if prefix.len() < max_len {
            for &next in allowed {
                if p.has_arc(last, next) {
                    let mut extended = prefix.clone();
                    extended.push(next);
                    stack.push(extended);
                }
            }
        }
    }
    Ok(checks)
}
