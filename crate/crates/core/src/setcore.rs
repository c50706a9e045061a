//! Finite subsets of index intervals, tuples over them and disjoint
//! subcollections.
//!
//! Every enumeration here is lazy and deterministic: subsets come by
//! cardinality and then lexicographically, and disjoint subcollections come
//! by the cardinality of their union, then by the union in lexicographic
//! order, then by the restricted growth string of the partition.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of positive integers, stored strictly increasing.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct FiniteSet(Vec<u32>);

impl FiniteSet {
    /// Builds a set from arbitrary-order elements. Zero and repeated
    /// elements are rejected.
    pub fn new(elements: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut v: Vec<u32> = elements.into_iter().collect();
        v.sort_unstable();
        if v.first() == Some(&0) {
            return Err(Error::Domain("set elements must be positive".into()));
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("repeated element in {v:?}")));
        }
        Ok(FiniteSet(v))
    }

    pub(crate) fn from_sorted(v: Vec<u32>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]) && v.first() != Some(&0));
        FiniteSet(v)
    }

    pub fn empty() -> Self {
        FiniteSet(Vec::new())
    }

    /// `{1, ..., r}`.
    pub fn interval(r: u32) -> Self {
        FiniteSet((1..=r).collect())
    }

    pub fn singleton(a: u32) -> Result<Self> {
        Self::new([a])
    }

    pub fn elements(&self) -> &[u32] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<u32> {
        self.0.last().copied()
    }

    pub fn contains(&self, a: u32) -> bool {
        self.0.binary_search(&a).is_ok()
    }

    pub fn is_subset(&self, other: &FiniteSet) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|a| it.any(|b| b == a))
    }

    pub fn is_disjoint(&self, other: &FiniteSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &FiniteSet) -> FiniteSet {
        FiniteSet(self.0.iter().merge(other.0.iter()).dedup().copied().collect())
    }

    pub fn difference(&self, other: &FiniteSet) -> FiniteSet {
        FiniteSet(self.0.iter().filter(|a| !other.contains(**a)).copied().collect())
    }

    /// True when every element lies in `{1, ..., r}`.
    pub fn within(&self, r: IndexInterval) -> bool {
        self.max().is_none_or(|m| m <= r.get())
    }
}

impl TryFrom<Vec<u32>> for FiniteSet {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        FiniteSet::new(v)
    }
}

impl From<FiniteSet> for Vec<u32> {
    fn from(s: FiniteSet) -> Self {
        s.0
    }
}

impl fmt::Display for FiniteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

/// The interval `[1, r]`, `r >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct IndexInterval(u32);

impl IndexInterval {
    pub fn new(r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("index interval needs r >= 1".into()));
        }
        Ok(IndexInterval(r))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_set(self) -> FiniteSet {
        FiniteSet::interval(self.0)
    }
}

impl TryFrom<u32> for IndexInterval {
    type Error = Error;
    fn try_from(r: u32) -> Result<Self> {
        IndexInterval::new(r)
    }
}

impl From<IndexInterval> for u32 {
    fn from(r: IndexInterval) -> u32 {
        r.0
    }
}

/// Nonempty subsets of `[r]`, optionally capped in cardinality.
pub fn nonempty_subsets(
    r: IndexInterval,
    max_card: Option<usize>,
) -> impl Iterator<Item = FiniteSet> + Clone {
    subsets_of(&r.as_set(), 1, max_card.unwrap_or(r.get() as usize))
}

/// Subsets of `ground` with cardinality in `min_card..=max_card`, by
/// cardinality and then lexicographically.
pub fn subsets_of(
    ground: &FiniteSet,
    min_card: usize,
    max_card: usize,
) -> impl Iterator<Item = FiniteSet> + Clone {
    let elems = ground.0.clone();
    let max_card = max_card.min(elems.len());
    (min_card..=max_card).flat_map(move |k| {
        elems
            .clone()
            .into_iter()
            .combinations(k)
            .map(FiniteSet::from_sorted)
    })
}

/// All ordered `d`-tuples (with repetition) over `domain`, lexicographic in
/// the domain's order. `d` must be at least 1.
pub fn d_tuples<T: Clone>(domain: &[T], d: usize) -> impl Iterator<Item = Vec<T>> + '_ {
    assert!(d >= 1, "d_tuples needs d >= 1");
    std::iter::repeat_n(domain.iter().cloned(), d).multi_cartesian_product()
}

/// A family of pairwise disjoint nonempty finite sets. Block order is
/// significant: block `i` (1-based) plays the role of the point `i` of the
/// ground set `[s]` of `F(B)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<FiniteSet>", into = "Vec<FiniteSet>")]
pub struct DisjointCollection {
    blocks: Vec<FiniteSet>,
}

impl DisjointCollection {
    pub fn new(blocks: Vec<FiniteSet>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::Domain(format!("block {} is empty", i + 1)));
            }
            for c in &blocks[..i] {
                if !b.is_disjoint(c) {
                    return Err(Error::Domain(format!("blocks {c} and {b} overlap")));
                }
            }
        }
        Ok(DisjointCollection { blocks })
    }

    /// `{{a} : a in elems}`.
    pub fn singletons(elems: &FiniteSet) -> Self {
        DisjointCollection {
            blocks: elems.iter().map(|a| FiniteSet(vec![a])).collect(),
        }
    }

    pub fn blocks(&self) -> &[FiniteSet] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index set `[s]` of `F(B)`.
    pub fn index_ground(&self) -> FiniteSet {
        FiniteSet::interval(self.blocks.len() as u32)
    }

    /// Union of all blocks.
    pub fn support(&self) -> FiniteSet {
        self.blocks
            .iter()
            .fold(FiniteSet::empty(), |acc, b| acc.union(b))
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// `gamma -> union of gamma`, with `gamma` given as blocks of `self`.
    pub fn embed_union(&self, gamma: &[FiniteSet]) -> Result<FiniteSet> {
        let mut out = FiniteSet::empty();
        for g in gamma {
            if !self.blocks.contains(g) {
                return Err(Error::Domain(format!("{g} is not a block of the collection")));
            }
            out = out.union(g);
        }
        Ok(out)
    }

    /// `gamma -> union of gamma`, with `gamma` given as 1-based block indices.
    pub fn embed_indices(&self, gamma: &FiniteSet) -> Result<FiniteSet> {
        let mut out = FiniteSet::empty();
        for i in gamma.iter() {
            let b = self.blocks.get(i as usize - 1).ok_or_else(|| {
                Error::Domain(format!("block index {i} out of range 1..={}", self.len()))
            })?;
            out = out.union(b);
        }
        Ok(out)
    }

    /// The collection `{union C : C in inner}` induced by a subcollection
    /// `inner` of `F(self)` (whose elements are block indices of `self`).
    pub fn compose(&self, inner: &DisjointCollection) -> Result<DisjointCollection> {
        let blocks = inner
            .blocks
            .iter()
            .map(|c| self.embed_indices(c))
            .collect::<Result<Vec<_>>>()?;
        // disjointness is inherited from `inner` and `self`
        Ok(DisjointCollection { blocks })
    }
}

impl TryFrom<Vec<FiniteSet>> for DisjointCollection {
    type Error = Error;
    fn try_from(v: Vec<FiniteSet>) -> Result<Self> {
        DisjointCollection::new(v)
    }
}

impl From<DisjointCollection> for Vec<FiniteSet> {
    fn from(c: DisjointCollection) -> Self {
        c.blocks
    }
}

impl fmt::Display for DisjointCollection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.blocks.iter().join(","))
    }
}

/// Restricted growth strings of length `n` using exactly `s` labels, in
/// lexicographic order. Each one is a partition of `n` points into `s`
/// nonempty blocks, blocks ordered by their least point.
#[derive(Clone, Debug)]
struct Partitions {
    s: usize,
    rgs: Vec<usize>,
    started: bool,
    done: bool,
}

impl Partitions {
    fn new(n: usize, s: usize) -> Self {
        let done = s == 0 || s > n;
        let mut rgs = vec![0; n];
        if !done {
            for (k, slot) in rgs[n - (s - 1)..].iter_mut().enumerate() {
                *slot = k + 1;
            }
        }
        Partitions {
            s,
            rgs,
            started: false,
            done,
        }
    }

    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        let s = self.s;
        let mut prefix_max = vec![0usize; n];
        let mut m = 0;
        for i in 0..n {
            prefix_max[i] = m;
            m = m.max(self.rgs[i]);
        }
        for i in (1..n).rev() {
            let cand = self.rgs[i] + 1;
            if cand > prefix_max[i] + 1 || cand >= s {
                continue;
            }
            let m = prefix_max[i].max(cand);
            let need = s - 1 - m;
            let room = n - i - 1;
            if room < need {
                continue;
            }
            self.rgs[i] = cand;
            for slot in &mut self.rgs[i + 1..] {
                *slot = 0;
            }
            for k in 0..need {
                self.rgs[n - need + k] = m + 1 + k;
            }
            return true;
        }
        false
    }
}

impl Iterator for Partitions {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        Some(self.rgs.clone())
    }
}

/// All disjoint `s`-subcollections of `ground`, in canonical order. The
/// first item, when `ground` has at least `s` points, is the collection of
/// the first `s` singletons.
pub fn disjoint_subcollections(
    ground: &FiniteSet,
    s: usize,
) -> impl Iterator<Item = DisjointCollection> + Clone {
    subsets_of(ground, s.max(1), ground.len()).flat_map(move |union| {
        Partitions::new(union.len(), s).map(move |rgs| {
            let mut blocks = vec![Vec::new(); s];
            for (a, label) in union.iter().zip(rgs) {
                blocks[label].push(a);
            }
            DisjointCollection {
                blocks: blocks.into_iter().map(FiniteSet::from_sorted).collect(),
            }
        })
    })
}

/// Singleton `s`-subcollections `{{b} : b in B}` for `B` an `s`-subset of
/// `ground`, lexicographic in `B`.
pub fn singleton_subcollections(
    ground: &FiniteSet,
    s: usize,
) -> impl Iterator<Item = DisjointCollection> + Clone {
    subsets_of(ground, s, s).map(|b| DisjointCollection::singletons(&b))
}
