//! Canonical set partitions of `{1,…,n}` with the common-refinement join,
//! the coarser/finer order, and closure of a family under joins.
//!
//! Site indices are 0-based in the API; parsed and printed strings are
//! 1-based. The text syntax is bit-exact: block form `{1,3}{2}` (blocks
//! sorted by least element, elements ascending) and label form `0,1,0`;
//! the parser accepts both, [`fmt::Display`] emits block form.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result};

/// Default cap on the number of partitions a closure may collect before
/// giving up. Bell-number growth makes some guardrail mandatory.
pub const DEFAULT_STATE_CAP: usize = 50_000;

/// A partition of the sites `{0,…,n-1}`, stored as a restricted-growth
/// string: one block label per site, label 0 first, each label at most
/// one above the maximum of the labels before it. Two partitions are
/// equal iff their label strings are equal.
///
/// `Ord` sorts by (number of atoms, labels lexicographically). That is a
/// linear extension of the refinement order with the coarsest partition
/// first and the common refinement of any family last; the chain module
/// relies on it for triangularity. The refinement order itself is
/// [`Partition::coarser_eq`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    rgs: Vec<usize>,
}

impl Partition {
    /// Validates a restricted-growth string and wraps it.
    pub fn from_rgs(rgs: Vec<usize>) -> Result<Self> {
        if rgs.is_empty() {
            return Err(Error::InvalidPartition("index set is empty".into()));
        }
        if rgs[0] != 0 {
            return Err(Error::InvalidPartition(format!(
                "site 1 must carry label 0, found {}",
                rgs[0]
            )));
        }
        let mut max = 0;
        for (i, &label) in rgs.iter().enumerate().skip(1) {
            if label > max + 1 {
                return Err(Error::InvalidPartition(format!(
                    "label {} at site {} skips over {}",
                    label,
                    i + 1,
                    max + 1
                )));
            }
            max = max.max(label);
        }
        Ok(Partition { rgs })
    }

    /// Canonicalizes an arbitrary label assignment (first-occurrence
    /// relabeling). Any two sites with equal labels end up in one atom.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPartition("index set is empty".into()));
        }
        Ok(Self::relabel(labels))
    }

    /// Canonicalizes an explicit block decomposition of `{1,…,n_sites}`
    /// (1-based sites). Blocks must be nonempty, pairwise disjoint and
    /// cover every site.
    pub fn from_blocks(n_sites: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidPartition("index set is empty".into()));
        }
        let mut label = vec![usize::MAX; n_sites];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {} is empty", b + 1)));
            }
            for &site in block {
                if site == 0 || site > n_sites {
                    return Err(Error::InvalidPartition(format!(
                        "site {site} lies outside 1..={n_sites}"
                    )));
                }
                if label[site - 1] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "site {site} appears in more than one block"
                    )));
                }
                label[site - 1] = b;
            }
        }
        if let Some(missing) = label.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "site {} is not covered by any block",
                missing + 1
            )));
        }
        Ok(Self::relabel(&label))
    }

    /// The one-block partition `{I}`, the bottom of the refinement order.
    pub fn coarsest(n_sites: usize) -> Self {
        assert!(n_sites > 0, "index set is empty");
        Partition { rgs: vec![0; n_sites] }
    }

    /// The all-singletons partition, the top of the refinement order.
    pub fn finest(n_sites: usize) -> Self {
        assert!(n_sites > 0, "index set is empty");
        Partition { rgs: (0..n_sites).collect() }
    }

    fn relabel(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut rgs = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = map.len();
            rgs.push(*map.entry(l).or_insert(next));
        }
        Partition { rgs }
    }

    pub fn n_sites(&self) -> usize {
        self.rgs.len()
    }

    /// Number of atoms (blocks).
    pub fn atom_count(&self) -> usize {
        self.rgs.iter().copied().max().unwrap_or(0) + 1
    }

    /// The canonical label string, one label per site.
    pub fn rgs(&self) -> &[usize] {
        &self.rgs
    }

    /// Atoms as ascending 0-based site lists, ordered by least element.
    pub fn atoms(&self) -> Vec<Vec<usize>> {
        let mut atoms = vec![Vec::new(); self.atom_count()];
        for (site, &label) in self.rgs.iter().enumerate() {
            atoms[label].push(site);
        }
        atoms
    }

    pub fn is_coarsest(&self) -> bool {
        self.atom_count() == 1
    }

    pub fn is_finest(&self) -> bool {
        self.atom_count() == self.n_sites()
    }

    /// The join `self ∨ other`: atoms are the nonempty pairwise
    /// intersections of atoms. Commutative, associative, idempotent, and
    /// the coarsest partition is its unit.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.check_same_sites(other)?;
        Ok(self.join_unchecked(other))
    }

    pub(crate) fn join_unchecked(&self, other: &Partition) -> Partition {
        let kb = other.atom_count();
        let mut map = vec![usize::MAX; self.atom_count() * kb];
        let mut next = 0;
        let mut rgs = Vec::with_capacity(self.rgs.len());
        for (&a, &b) in self.rgs.iter().zip(&other.rgs) {
            let key = a * kb + b;
            if map[key] == usize::MAX {
                map[key] = next;
                next += 1;
            }
            rgs.push(map[key]);
        }
        // First-occurrence labels are already in restricted-growth form.
        Partition { rgs }
    }

    /// The refinement order: `self ⪯ other`, true iff every atom of
    /// `other` is contained in an atom of `self` (equivalently
    /// `self ∨ other = other`).
    pub fn coarser_eq(&self, other: &Partition) -> Result<bool> {
        self.check_same_sites(other)?;
        Ok(self.coarser_eq_unchecked(other))
    }

    pub(crate) fn coarser_eq_unchecked(&self, other: &Partition) -> bool {
        // self ⪯ other iff label-of-other → label-of-self is a function.
        let mut image = vec![usize::MAX; other.atom_count()];
        for (&mine, &theirs) in self.rgs.iter().zip(&other.rgs) {
            if image[theirs] == usize::MAX {
                image[theirs] = mine;
            } else if image[theirs] != mine {
                return false;
            }
        }
        true
    }

    fn check_same_sites(&self, other: &Partition) -> Result<()> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::SizeMismatch {
                left: self.n_sites(),
                right: other.n_sites(),
            });
        }
        Ok(())
    }

    /// Parses block form `{1,3}{2}` or label form `0,1,0`. Label form is
    /// canonicalized, so any label assignment is accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() {
            return Err(Error::Parse("empty partition string".into()));
        }
        if t.starts_with('{') {
            let blocks = parse_blocks(t)?;
            let n_sites = blocks.iter().map(Vec::len).sum();
            Partition::from_blocks(n_sites, &blocks)
        } else {
            let labels = t
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad label `{}` in `{t}`", part.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            Partition::from_labels(&labels)
        }
    }
}

fn parse_blocks(text: &str) -> Result<Vec<Vec<usize>>> {
    let mut blocks = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let Some(stripped) = rest.strip_prefix('{') else {
            return Err(Error::Parse(format!("expected `{{` at `{rest}`")));
        };
        let Some(end) = stripped.find('}') else {
            return Err(Error::Parse(format!("unclosed block in `{text}`")));
        };
        let body = &stripped[..end];
        let mut block = Vec::new();
        for part in body.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::Parse(format!("empty site in block `{{{body}}}`")));
            }
            let site: usize = part
                .parse()
                .map_err(|_| Error::Parse(format!("bad site `{part}` in `{text}`")))?;
            block.push(site);
        }
        blocks.push(block);
        rest = stripped[end + 1..].trim_start();
    }
    if blocks.is_empty() {
        return Err(Error::Parse("no blocks found".into()));
    }
    Ok(blocks)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for atom in self.atoms() {
            write!(f, "{{")?;
            for (k, site) in atom.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", site + 1)?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({self})")
    }
}

impl Ord for Partition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.atom_count(), &self.rgs).cmp(&(other.atom_count(), &other.rgs))
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A finite, duplicate-free set of partitions over one shared index set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionFamily {
    n_sites: usize,
    members: BTreeSet<Partition>,
}

impl PartitionFamily {
    /// Builds a family from a nonempty iterator; duplicates collapse.
    pub fn new(members: impl IntoIterator<Item = Partition>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut n_sites = None;
        for p in members {
            match n_sites {
                None => n_sites = Some(p.n_sites()),
                Some(n) if n != p.n_sites() => {
                    return Err(Error::SizeMismatch { left: n, right: p.n_sites() })
                }
                _ => {}
            }
            set.insert(p);
        }
        match n_sites {
            None => Err(Error::EmptyFamily),
            Some(n) => Ok(PartitionFamily { n_sites: n, members: set }),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: &Partition) -> bool {
        self.members.contains(p)
    }

    /// Members in canonical order (coarse first).
    pub fn iter(&self) -> impl Iterator<Item = &Partition> {
        self.members.iter()
    }

    /// The join of every member: the finest partition the family can
    /// produce, and the unique member of the closure fixed by joining
    /// with any member.
    pub fn common_refinement(&self) -> Partition {
        let mut iter = self.members.iter();
        let first = iter.next().expect("family is nonempty").clone();
        iter.fold(first, |acc, p| acc.join_unchecked(p))
    }

    /// Least family that contains `self` and is closed under joining with
    /// members of `self`, computed as a worklist fixpoint. Fails once more
    /// than `cap` partitions have been collected, reporting the count.
    pub fn closure(&self, cap: usize) -> Result<PartitionFamily> {
        let mut seen = self.members.clone();
        let mut work: Vec<Partition> = self.members.iter().cloned().collect();
        while let Some(d) = work.pop() {
            for g in &self.members {
                let joined = d.join_unchecked(g);
                if !seen.contains(&joined) {
                    if seen.len() >= cap {
                        return Err(Error::CapExceeded {
                            what: "partition closure",
                            cap,
                            reached: seen.len() + 1,
                        });
                    }
                    seen.insert(joined.clone());
                    work.push(joined);
                }
            }
        }
        Ok(PartitionFamily { n_sites: self.n_sites, members: seen })
    }
}

impl<'a> IntoIterator for &'a PartitionFamily {
    type Item = &'a Partition;
    type IntoIter = std::collections::btree_set::Iter<'a, Partition>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}
