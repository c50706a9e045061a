//! Polynomial mappings `F([r]) -> H` with zero constant term.
//!
//! A mapping is stored through its t-producing function, the unique table
//! `u -> Phi(u)` on nonempty `u` with `|u| <= d` such that
//! `phi(alpha) = sum of Phi(u) over u subset of alpha`. A q-producing function
//! (a table on `d`-tuples) is accepted as input and converted at once.
//!
//! All arithmetic is exact. Torus values are rationals reduced into `[0, 1)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, format_q, Q};
use crate::setcore::{subsets_of, DisjointCollection, FiniteSet, IndexInterval};

/// The abelian group `H` a mapping takes values in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueGroup {
    Integers,
    Rationals,
    IntegerVectors(usize),
    RationalVectors(usize),
    /// `R/Z`, represented by rationals in `[0, 1)`.
    Torus,
}

impl ValueGroup {
    pub fn dim(self) -> usize {
        match self {
            ValueGroup::IntegerVectors(l) | ValueGroup::RationalVectors(l) => l,
            _ => 1,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(
            self,
            ValueGroup::IntegerVectors(_) | ValueGroup::RationalVectors(_)
        )
    }

    pub fn is_integral(self) -> bool {
        matches!(self, ValueGroup::Integers | ValueGroup::IntegerVectors(_))
    }

    fn validate(self) -> Result<()> {
        if self.is_vector() && self.dim() == 0 {
            return Err(Error::Domain("vector value groups need l >= 1".into()));
        }
        Ok(())
    }

    pub fn zero(self) -> Value {
        Value(vec![Q::zero(); self.dim()])
    }

    /// Checks dimension and integrality; torus values are reduced mod 1.
    pub fn admit(self, v: Value) -> Result<Value> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        if self.is_integral() && !v.0.iter().all(|x| x.is_integer()) {
            return Err(Error::Domain(format!("{v} is not an integer value")));
        }
        Ok(self.reduce(v))
    }

    pub fn reduce(self, mut v: Value) -> Value {
        if self == ValueGroup::Torus {
            for x in &mut v.0 {
                *x = rational::fract(x);
            }
        }
        v
    }

    pub fn is_zero(self, v: &Value) -> bool {
        match self {
            ValueGroup::Torus => v.0.iter().all(|x| x.is_integer()),
            _ => v.0.iter().all(Zero::is_zero),
        }
    }
}

/// An element of a [`ValueGroup`]: a scalar is a vector of length one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(pub Vec<Q>);

impl Value {
    pub fn scalar(x: Q) -> Self {
        Value(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_scalar(&self) -> Option<&Q> {
        match self.0.as_slice() {
            [x] => Some(x),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    /// Largest fractional norm over the coordinates.
    pub fn fractional_norm(&self) -> Q {
        self.0
            .iter()
            .map(rational::fractional_norm)
            .max()
            .unwrap_or_else(Q::zero)
    }

    pub fn map(&self, f: impl Fn(&Q) -> Q) -> Value {
        Value(self.0.iter().map(f).collect())
    }
}

impl AddAssign<&Value> for Value {
    fn add_assign(&mut self, rhs: &Value) {
        assert_eq!(self.dim(), rhs.dim(), "value dimensions differ");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Add<&Value> for &Value {
    type Output = Value;
    fn add(self, rhs: &Value) -> Value {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&Value> for &Value {
    type Output = Value;
    fn sub(self, rhs: &Value) -> Value {
        assert_eq!(self.dim(), rhs.dim(), "value dimensions differ");
        Value(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for Value {
    type Output = Value;
    fn neg(self) -> Value {
        Value(self.0.into_iter().map(|x| -x).collect())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_scalar() {
            Some(x) => f.write_str(&format_q(x)),
            None => {
                let parts: Vec<_> = self.0.iter().map(format_q).collect();
                write!(f, "({})", parts.join(","))
            }
        }
    }
}

/// A mapping from finite subsets of a finite ground set into a value group.
pub trait SetMapping: Sync {
    fn ground(&self) -> &FiniteSet;
    fn group(&self) -> ValueGroup;
    /// Value at `alpha`; fails when `alpha` is not contained in the ground.
    fn apply(&self, alpha: &FiniteSet) -> Result<Value>;
}

impl<M: SetMapping + ?Sized> SetMapping for &M {
    fn ground(&self) -> &FiniteSet {
        (**self).ground()
    }
    fn group(&self) -> ValueGroup {
        (**self).group()
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        (**self).apply(alpha)
    }
}

impl<M: SetMapping + ?Sized> SetMapping for Box<M> {
    fn ground(&self) -> &FiniteSet {
        (**self).ground()
    }
    fn group(&self) -> ValueGroup {
        (**self).group()
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        (**self).apply(alpha)
    }
}

pub(crate) fn check_within(alpha: &FiniteSet, ground: &FiniteSet) -> Result<()> {
    if alpha.is_subset(ground) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{alpha} is not contained in the ground set {ground}"
        )))
    }
}

/// A mapping given by a closure.
pub struct FnMapping<F> {
    ground: FiniteSet,
    group: ValueGroup,
    f: F,
}

pub fn from_fn<F>(ground: FiniteSet, group: ValueGroup, f: F) -> FnMapping<F>
where
    F: Fn(&FiniteSet) -> Value + Sync,
{
    FnMapping { ground, group, f }
}

impl<F: Fn(&FiniteSet) -> Value + Sync> SetMapping for FnMapping<F> {
    fn ground(&self) -> &FiniteSet {
        &self.ground
    }
    fn group(&self) -> ValueGroup {
        self.group
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        check_within(alpha, &self.ground)?;
        Ok(self.group.reduce((self.f)(alpha)))
    }
}

/// The `beta`-derivative `alpha -> phi(alpha | beta) - phi(alpha)`, defined
/// on subsets of the ground disjoint from `beta`.
pub struct Derivative<M> {
    inner: M,
    beta: FiniteSet,
    ground: FiniteSet,
}

pub fn derive<M: SetMapping>(phi: M, beta: FiniteSet) -> Result<Derivative<M>> {
    if beta.is_empty() {
        return Err(Error::Domain("derivative direction must be nonempty".into()));
    }
    check_within(&beta, phi.ground())?;
    let ground = phi.ground().difference(&beta);
    Ok(Derivative {
        inner: phi,
        beta,
        ground,
    })
}

impl<M: SetMapping> SetMapping for Derivative<M> {
    fn ground(&self) -> &FiniteSet {
        &self.ground
    }
    fn group(&self) -> ValueGroup {
        self.inner.group()
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        check_within(alpha, &self.ground)?;
        let with = self.inner.apply(&alpha.union(&self.beta))?;
        let without = self.inner.apply(alpha)?;
        Ok(self.group().reduce(&with - &without))
    }
}

/// The restriction of an arbitrary mapping to `F(B)`, read on `F([s])`:
/// `gamma -> m(union of the blocks indexed by gamma)`.
pub struct RestrictedMap<M> {
    inner: M,
    blocks: DisjointCollection,
    ground: FiniteSet,
}

pub fn restrict_map<M: SetMapping>(inner: M, blocks: DisjointCollection) -> Result<RestrictedMap<M>> {
    for blk in blocks.blocks() {
        check_within(blk, inner.ground())?;
    }
    Ok(RestrictedMap {
        ground: blocks.index_ground(),
        inner,
        blocks,
    })
}

impl<M: SetMapping> SetMapping for RestrictedMap<M> {
    fn ground(&self) -> &FiniteSet {
        &self.ground
    }
    fn group(&self) -> ValueGroup {
        self.inner.group()
    }
    fn apply(&self, gamma: &FiniteSet) -> Result<Value> {
        self.inner.apply(&self.blocks.embed_indices(gamma)?)
    }
}

/// `gamma -> [m(gamma)] - shift` on nonempty `gamma`, and `0` at the empty
/// set. Scalar mappings only.
pub struct FloorShift<M> {
    inner: M,
    shift: i64,
}

pub fn floor_shift<M: SetMapping>(inner: M, shift: i64) -> Result<FloorShift<M>> {
    if inner.group().dim() != 1 || inner.group() == ValueGroup::Torus {
        return Err(Error::Domain(
            "integer parts are taken of real scalar mappings only".into(),
        ));
    }
    Ok(FloorShift { inner, shift })
}

impl<M: SetMapping> SetMapping for FloorShift<M> {
    fn ground(&self) -> &FiniteSet {
        self.inner.ground()
    }
    fn group(&self) -> ValueGroup {
        ValueGroup::Integers
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        if alpha.is_empty() {
            check_within(alpha, self.inner.ground())?;
            return Ok(ValueGroup::Integers.zero());
        }
        let v = self.inner.apply(alpha)?;
        Ok(v.map(|x| rational::floor(x) - rational::int(self.shift)))
    }
}

/// t-producing function: values on nonempty subsets of `[r]` of cardinality
/// at most `degree`; absent keys are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TProducing {
    degree: usize,
    r: IndexInterval,
    group: ValueGroup,
    table: BTreeMap<FiniteSet, Value>,
}

impl TProducing {
    pub fn new(
        degree: usize,
        r: IndexInterval,
        group: ValueGroup,
        entries: impl IntoIterator<Item = (FiniteSet, Value)>,
    ) -> Result<Self> {
        group.validate()?;
        if degree == 0 {
            return Err(Error::Domain("degree must be at least 1".into()));
        }
        let mut table = BTreeMap::new();
        for (key, value) in entries {
            if key.is_empty() || key.len() > degree || !key.within(r) {
                return Err(Error::Domain(format!(
                    "key {key} must be a nonempty subset of [{}] with at most {degree} elements",
                    r.get()
                )));
            }
            let value = group.admit(value)?;
            let slot = table.entry(key).or_insert_with(|| group.zero());
            *slot += &value;
            *slot = group.reduce(std::mem::replace(slot, group.zero()));
        }
        table.retain(|_, v| !group.is_zero(v));
        Ok(TProducing {
            degree,
            r,
            group,
            table,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn r(&self) -> IndexInterval {
        self.r
    }

    pub fn group(&self) -> ValueGroup {
        self.group
    }

    pub fn get(&self, key: &FiniteSet) -> Value {
        self.table
            .get(key)
            .cloned()
            .unwrap_or_else(|| self.group.zero())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&FiniteSet, &Value)> {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Largest key cardinality carrying a nonzero value.
    pub fn support_degree(&self) -> usize {
        self.table.keys().map(FiniteSet::len).max().unwrap_or(0)
    }
}

/// q-producing function: values on `d`-tuples over `[r]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QProducing {
    degree: usize,
    r: IndexInterval,
    group: ValueGroup,
    table: BTreeMap<Vec<u32>, Value>,
}

impl QProducing {
    pub fn new(
        degree: usize,
        r: IndexInterval,
        group: ValueGroup,
        entries: impl IntoIterator<Item = (Vec<u32>, Value)>,
    ) -> Result<Self> {
        group.validate()?;
        if degree == 0 {
            return Err(Error::Domain("degree must be at least 1".into()));
        }
        let mut table = BTreeMap::new();
        for (key, value) in entries {
            if key.len() != degree || key.iter().any(|&a| a == 0 || a > r.get()) {
                return Err(Error::Domain(format!(
                    "key {key:?} must be a {degree}-tuple over [{}]",
                    r.get()
                )));
            }
            let value = group.admit(value)?;
            let slot = table.entry(key).or_insert_with(|| group.zero());
            *slot += &value;
        }
        Ok(QProducing {
            degree,
            r,
            group,
            table,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn r(&self) -> IndexInterval {
        self.r
    }

    pub fn group(&self) -> ValueGroup {
        self.group
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, &Value)> {
        self.table.iter()
    }
}

/// Sum of the q-producing function over all `d`-tuples with entries in
/// `alpha`.
pub fn eval_q(qp: &QProducing, alpha: &FiniteSet) -> Result<Value> {
    if !alpha.within(qp.r) {
        return Err(Error::Domain(format!(
            "{alpha} is not contained in [{}]",
            qp.r.get()
        )));
    }
    let mut acc = qp.group.zero();
    for (v, x) in &qp.table {
        if v.iter().all(|&a| alpha.contains(a)) {
            acc += x;
        }
    }
    Ok(qp.group.reduce(acc))
}

/// Collapses a q-producing function: `Phi(u)` is the sum of the tuple values
/// whose entry set is exactly `u`.
pub fn t_from_q(qp: &QProducing) -> TProducing {
    let entries = qp.table.iter().map(|(v, x)| {
        let key = FiniteSet::new(v.iter().copied().collect::<BTreeSet<_>>())
            .expect("tuple entries are positive");
        (key, x.clone())
    });
    TProducing::new(qp.degree, qp.r, qp.group, entries).expect("keys of a valid table")
}

/// One q-producing function for a t-producing one: the key
/// `{a1 < ... < ak}` goes to the tuple `(a1, ..., ak, ak, ..., ak)`.
pub fn q_from_t(tp: &TProducing) -> QProducing {
    let d = tp.degree;
    let entries = tp.table.iter().map(|(u, x)| {
        let mut v = u.elements().to_vec();
        let last = *v.last().expect("keys are nonempty");
        v.resize(d, last);
        (v, x.clone())
    });
    QProducing::new(d, tp.r, tp.group, entries).expect("keys of a valid table")
}

fn mask_of(set: &FiniteSet) -> u128 {
    set.iter().fold(0u128, |m, a| m | 1u128 << (a - 1))
}

/// A polynomial mapping `F([r]) -> H` of degree at most `d` vanishing at the
/// empty set, in canonical (t-producing) form.
#[derive(Clone, Debug)]
pub struct SetPolynomial {
    tprod: TProducing,
    ground: FiniteSet,
    masks: Vec<(u128, Value)>,
}

impl PartialEq for SetPolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.tprod == other.tprod
    }
}

impl Eq for SetPolynomial {}

/// Ground sets beyond this size are outside the desk-scale range.
pub const MAX_GROUND: u32 = 128;

impl SetPolynomial {
    pub fn new(tprod: TProducing) -> Result<Self> {
        if tprod.r.get() > MAX_GROUND {
            return Err(Error::Budget(format!(
                "ground [{}] exceeds the supported size {MAX_GROUND}",
                tprod.r.get()
            )));
        }
        let masks = tprod
            .table
            .iter()
            .map(|(u, x)| (mask_of(u), x.clone()))
            .collect();
        Ok(SetPolynomial {
            ground: tprod.r.as_set(),
            tprod,
            masks,
        })
    }

    pub fn from_q(qp: &QProducing) -> Result<Self> {
        Self::new(t_from_q(qp))
    }

    /// Degree-one mapping with producing function `a -> values[a - 1]`.
    pub fn linear(group: ValueGroup, values: Vec<Value>) -> Result<Self> {
        let r = IndexInterval::new(values.len() as u32)?;
        let entries = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (FiniteSet::from_sorted(vec![i as u32 + 1]), v));
        Self::new(TProducing::new(1, r, group, entries)?)
    }

    pub fn zero(degree: usize, r: IndexInterval, group: ValueGroup) -> Result<Self> {
        Self::new(TProducing::new(degree, r, group, [])?)
    }

    pub fn tprod(&self) -> &TProducing {
        &self.tprod
    }

    pub fn degree(&self) -> usize {
        self.tprod.degree
    }

    pub fn r(&self) -> IndexInterval {
        self.tprod.r
    }

    pub fn value_group(&self) -> ValueGroup {
        self.tprod.group
    }

    pub fn eval(&self, alpha: &FiniteSet) -> Result<Value> {
        if !alpha.within(self.tprod.r) {
            return Err(Error::Domain(format!(
                "{alpha} is not contained in [{}]",
                self.tprod.r.get()
            )));
        }
        let a = mask_of(alpha);
        let mut acc = self.tprod.group.zero();
        for (m, x) in &self.masks {
            if m & !a == 0 {
                acc += x;
            }
        }
        Ok(self.tprod.group.reduce(acc))
    }

    /// The subpolynomial on `F(B)`, as a mapping on `F([s])` where index `i`
    /// stands for block `i` of `B`.
    ///
    /// The canonical q-producing function is pushed forward along
    /// `a -> (block containing a)`, which is the q-producing function of the
    /// restriction, and then collapsed to t-form.
    pub fn restrict(&self, b: &DisjointCollection) -> Result<SetPolynomial> {
        let s = IndexInterval::new(b.len() as u32)?;
        let mut block_of = HashMap::new();
        for (i, blk) in b.blocks().iter().enumerate() {
            if !blk.within(self.tprod.r) {
                return Err(Error::Domain(format!(
                    "block {blk} is not contained in [{}]",
                    self.tprod.r.get()
                )));
            }
            for a in blk.iter() {
                block_of.insert(a, i as u32 + 1);
            }
        }
        let q = q_from_t(&self.tprod);
        let pushed = q.table.iter().filter_map(|(v, x)| {
            let blocks: Option<Vec<u32>> = v.iter().map(|a| block_of.get(a).copied()).collect();
            blocks.map(|c| (c, x.clone()))
        });
        let qb = QProducing::new(self.tprod.degree, s, self.tprod.group, pushed)?;
        SetPolynomial::new(t_from_q(&qb))
    }

    /// Restriction to the collection induced by a subcollection `inner` of
    /// `F(outer)`.
    pub fn restrict_nested(
        &self,
        outer: &DisjointCollection,
        inner: &DisjointCollection,
    ) -> Result<SetPolynomial> {
        self.restrict(&outer.compose(inner)?)
    }

    /// Homogeneous components `phi_1, ..., phi_d`; component `i` carries the
    /// keys of cardinality `i`.
    pub fn homogeneous_split(&self) -> Vec<SetPolynomial> {
        (1..=self.tprod.degree)
            .map(|i| {
                let entries = self
                    .tprod
                    .table
                    .iter()
                    .filter(|(u, _)| u.len() == i)
                    .map(|(u, x)| (u.clone(), x.clone()));
                let t = TProducing::new(self.tprod.degree, self.tprod.r, self.tprod.group, entries)
                    .expect("subtable of a valid table");
                SetPolynomial::new(t).expect("same ground")
            })
            .collect()
    }

    /// `{phi(alpha) : alpha nonempty subset of [r]}` for integer-valued
    /// mappings.
    pub fn vip_image(&self) -> Result<BTreeSet<Value>> {
        if !self.tprod.group.is_integral() {
            return Err(Error::Domain(
                "VIP images are taken of integer-valued mappings".into(),
            ));
        }
        crate::setcore::nonempty_subsets(self.tprod.r, None)
            .map(|a| self.eval(&a))
            .collect()
    }

    /// Largest fractional norm of a t-producing value, with its key.
    pub fn max_fractional_norm(&self) -> (Q, Option<FiniteSet>) {
        self.tprod
            .table
            .iter()
            .map(|(u, x)| (x.fractional_norm(), Some(u.clone())))
            .max_by(|a, b| a.0.cmp(&b.0))
            .unwrap_or((Q::zero(), None))
    }

    /// The same table read in another group (e.g. a torus-valued mapping
    /// viewed as rational-valued).
    pub fn with_group(&self, group: ValueGroup) -> Result<SetPolynomial> {
        let t = TProducing::new(
            self.tprod.degree,
            self.tprod.r,
            group,
            self.tprod.table.clone(),
        )?;
        SetPolynomial::new(t)
    }

    /// Table `u -> [Phi(u)]`, integer valued.
    pub fn floor_producing(&self) -> Result<SetPolynomial> {
        self.integer_table(rational::floor)
    }

    /// Table `u -> -[-Phi(u)]`, integer valued.
    pub fn ceil_producing(&self) -> Result<SetPolynomial> {
        self.integer_table(|x| -rational::floor(&-x.clone()))
    }

    fn integer_table(&self, f: impl Fn(&Q) -> Q) -> Result<SetPolynomial> {
        let group = match self.tprod.group {
            ValueGroup::Rationals | ValueGroup::Integers => ValueGroup::Integers,
            ValueGroup::RationalVectors(l) | ValueGroup::IntegerVectors(l) => {
                ValueGroup::IntegerVectors(l)
            }
            ValueGroup::Torus => {
                return Err(Error::Domain("integer parts of torus values are undefined".into()))
            }
        };
        let entries = self.tprod.table.iter().map(|(u, x)| (u.clone(), x.map(&f)));
        SetPolynomial::new(TProducing::new(self.tprod.degree, self.tprod.r, group, entries)?)
    }

    /// Recovers the t-producing function of `map` (on a ground `[r]`) by
    /// Moebius inversion over subsets of cardinality at most `degree`. The
    /// result agrees with `map` everywhere exactly when `map` vanishes at the
    /// empty set and has degree at most `degree`.
    pub fn interpolate<M: SetMapping + ?Sized>(map: &M, degree: usize) -> Result<SetPolynomial> {
        let ground = map.ground().clone();
        let r = IndexInterval::new(ground.len() as u32)?;
        if ground != r.as_set() {
            return Err(Error::Domain(format!(
                "interpolation needs a ground of the form [r], got {ground}"
            )));
        }
        let group = map.group();
        let mut values: HashMap<FiniteSet, Value> = HashMap::new();
        values.insert(FiniteSet::empty(), map.apply(&FiniteSet::empty())?);
        for w in subsets_of(&ground, 1, degree) {
            let v = map.apply(&w)?;
            values.insert(w, v);
        }
        let mut entries = Vec::new();
        for u in subsets_of(&ground, 1, degree) {
            let mut acc = group.zero();
            for w in subsets_of(&u, 0, u.len()) {
                let x = &values[&w];
                if (u.len() - w.len()) % 2 == 0 {
                    acc += x;
                } else {
                    acc = &acc - x;
                }
            }
            entries.push((u, group.reduce(acc)));
        }
        SetPolynomial::new(TProducing::new(degree, r, group, entries)?)
    }
}

impl SetMapping for SetPolynomial {
    fn ground(&self) -> &FiniteSet {
        &self.ground
    }
    fn group(&self) -> ValueGroup {
        self.tprod.group
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        self.eval(alpha)
    }
}

/// An integer polynomial mapping shifted by a constant on nonempty sets:
/// `alpha -> base(alpha) + shift` for `alpha` nonempty, `0` at the empty set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedIntegerPoly {
    pub base: SetPolynomial,
    pub shift: i64,
}

impl ShiftedIntegerPoly {
    pub fn new(base: SetPolynomial, shift: i64) -> Result<Self> {
        if base.value_group() != ValueGroup::Integers {
            return Err(Error::Domain("base must be integer valued".into()));
        }
        if shift > 0 || shift < -(base.degree() as i64) {
            return Err(Error::Domain(format!(
                "shift {shift} outside {{0, -1, ..., -{}}}",
                base.degree()
            )));
        }
        Ok(ShiftedIntegerPoly { base, shift })
    }

    pub fn eval(&self, alpha: &FiniteSet) -> Result<Q> {
        let v = self.base.eval(alpha)?;
        let x = v.as_scalar().cloned().unwrap_or_else(Q::zero);
        Ok(if alpha.is_empty() {
            x
        } else {
            x + rational::int(self.shift)
        })
    }
}

/// Outcome of a degree check by the iterated-derivative criterion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub passed: bool,
    /// False when only families of singletons and pairs were examined.
    pub exhaustive: bool,
    /// Number of `(family, alpha)` pairs at which the iterated derivative was
    /// evaluated.
    pub checks: u64,
    pub counterexample: Option<DegreeCounterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeCounterexample {
    pub betas: Vec<FiniteSet>,
    pub alpha: FiniteSet,
}

/// Configuration of [`DegreeCheck::run`].
#[derive(Clone, Copy, Debug)]
pub struct DegreeCheck {
    /// Grounds up to this size are checked over every disjoint family.
    pub exhaustive_limit: usize,
    /// Cap on checks in the reduced (singletons and pairs) mode.
    pub reduced_cap: u64,
}

impl Default for DegreeCheck {
    fn default() -> Self {
        DegreeCheck {
            exhaustive_limit: 8,
            reduced_cap: 200_000,
        }
    }
}

/// Hard ceiling for the memo table of exhaustive checks.
const EXHAUSTIVE_CEILING: usize = 20;

impl DegreeCheck {
    pub fn exhaustive() -> Self {
        DegreeCheck {
            exhaustive_limit: EXHAUSTIVE_CEILING,
            ..Self::default()
        }
    }

    /// Checks `D_{beta_d} ... D_{beta_0} map = 0` for pairwise disjoint
    /// nonempty `beta_0, ..., beta_d` and every admissible `alpha`.
    pub fn run<M: SetMapping + ?Sized>(&self, map: &M, d: usize) -> Result<DegreeReport> {
        let ground: Vec<u32> = map.ground().iter().collect();
        let n = ground.len();
        let exhaustive = n <= self.exhaustive_limit.min(EXHAUSTIVE_CEILING);
        let mut cache = ValueCache::new(map, &ground, exhaustive)?;
        let family = d + 1;
        let mut report = DegreeReport {
            passed: true,
            exhaustive,
            checks: 0,
            counterexample: None,
        };
        if family > n {
            return Ok(report);
        }
        let max_block = if exhaustive { n } else { 2 };
        let mut labels = vec![0usize; n];
        let mut stop = false;
        label_families(&mut labels, 0, 0, family, max_block, &mut |labels| {
            let mut betas = vec![0u64; family];
            let mut free = 0u64;
            for (i, &l) in labels.iter().enumerate() {
                if l == 0 {
                    free |= 1 << i;
                } else {
                    betas[l - 1] |= 1 << i;
                }
            }
            let unions: Vec<(u64, bool)> = (0..1u64 << family)
                .map(|sel| {
                    let m = (0..family)
                        .filter(|i| sel >> i & 1 == 1)
                        .fold(0u64, |m, i| m | betas[i]);
                    (m, (family - sel.count_ones() as usize) % 2 == 1)
                })
                .collect();
            // alpha ranges over all subsets of the free points, or only the
            // small ones in reduced mode
            let mut alpha = 0u64;
            loop {
                if exhaustive || alpha.count_ones() <= 2 {
                    if !exhaustive && report.checks >= self.reduced_cap {
                        stop = true;
                        return false;
                    }
                    report.checks += 1;
                    let mut acc = map.group().zero();
                    for &(m, negative) in &unions {
                        let v = match cache.get(alpha | m) {
                            Ok(v) => v,
                            Err(e) => {
                                cache.error = Some(e);
                                stop = true;
                                return false;
                            }
                        };
                        if negative {
                            acc = &acc - &v;
                        } else {
                            acc += &v;
                        }
                    }
                    if !map.group().is_zero(&acc) {
                        let to_set = |m: u64| {
                            FiniteSet::from_sorted(
                                (0..n).filter(|i| m >> i & 1 == 1).map(|i| ground[i]).collect(),
                            )
                        };
                        report.passed = false;
                        report.counterexample = Some(DegreeCounterexample {
                            betas: betas.iter().map(|&b| to_set(b)).collect(),
                            alpha: to_set(alpha),
                        });
                        stop = true;
                        return false;
                    }
                }
                if alpha == free {
                    break;
                }
                alpha = (alpha.wrapping_sub(free)) & free;
            }
            true
        });
        if let Some(e) = cache.error.take() {
            return Err(e);
        }
        let _ = stop;
        Ok(report)
    }
}

/// `degree_verify` with the default configuration.
pub fn degree_verify<M: SetMapping + ?Sized>(map: &M, d: usize) -> Result<bool> {
    Ok(DegreeCheck::default().run(map, d)?.passed)
}

/// Assigns each point a label `0` (free) or `1..=family` (member of
/// `beta_{label-1}`), with labels first used in increasing order so each
/// unordered family is produced once. Returns false to stop early.
fn label_families(
    labels: &mut [usize],
    pos: usize,
    used: usize,
    family: usize,
    max_block: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let n = labels.len();
    if family - used > n - pos {
        return true;
    }
    if pos == n {
        return visit(labels);
    }
    let upper = (used + 1).min(family);
    for l in 0..=upper {
        if l > 0 && labels[..pos].iter().filter(|&&x| x == l).count() >= max_block {
            continue;
        }
        labels[pos] = l;
        let used_next = if l == used + 1 { used + 1 } else { used };
        if !label_families(labels, pos + 1, used_next, family, max_block, visit) {
            return false;
        }
    }
    labels[pos] = 0;
    true
}

struct ValueCache<'a, M: ?Sized> {
    map: &'a M,
    ground: &'a [u32],
    dense: Option<Vec<Option<Value>>>,
    sparse: HashMap<u64, Value>,
    error: Option<Error>,
}

impl<'a, M: SetMapping + ?Sized> ValueCache<'a, M> {
    fn new(map: &'a M, ground: &'a [u32], dense: bool) -> Result<Self> {
        if ground.len() > 63 {
            return Err(Error::Budget(format!(
                "degree checks support grounds of at most 63 points, got {}",
                ground.len()
            )));
        }
        Ok(ValueCache {
            map,
            ground,
            dense: dense.then(|| vec![None; 1usize << ground.len()]),
            sparse: HashMap::new(),
            error: None,
        })
    }

    fn compute(&self, mask: u64) -> Result<Value> {
        let set = FiniteSet::from_sorted(
            (0..self.ground.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.ground[i])
                .collect(),
        );
        self.map.apply(&set)
    }

    fn get(&mut self, mask: u64) -> Result<Value> {
        if let Some(dense) = &self.dense {
            if let Some(v) = &dense[mask as usize] {
                return Ok(v.clone());
            }
            let v = self.compute(mask)?;
            self.dense.as_mut().expect("dense")[mask as usize] = Some(v.clone());
            return Ok(v);
        }
        if let Some(v) = self.sparse.get(&mask) {
            return Ok(v.clone());
        }
        let v = self.compute(mask)?;
        self.sparse.insert(mask, v.clone());
        Ok(v)
    }
}

/// True when every `{x_i} < 1/n`, the hypothesis under which
/// `[x_1 + ... + x_n] = [x_1] + ... + [x_n]`.
pub fn fractions_below(xs: &[Q]) -> bool {
    let n = Q::from_integer(xs.len().into());
    xs.iter().all(|x| rational::fract(x) * &n < Q::one())
}

/// True when every `{x_i} > 1 - 1/n`.
pub fn fractions_above(xs: &[Q]) -> bool {
    let n = Q::from_integer(xs.len().into());
    xs.iter()
        .all(|x| (Q::one() - rational::fract(x)) * &n < Q::one() && !x.is_integer())
}

// JSON form of a t-producing function.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueJson {
    Scalar(#[serde(with = "rational::serde_q")] Q),
    Vector(#[serde(with = "rational::serde_qvec")] Vec<Q>),
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    key: FiniteSet,
    value: ValueJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TProducingJson {
    degree: usize,
    r: IndexInterval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<ValueGroup>,
    entries: Vec<EntryJson>,
}

impl Serialize for TProducing {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .table
            .iter()
            .map(|(k, v)| EntryJson {
                key: k.clone(),
                value: if self.group.is_vector() {
                    ValueJson::Vector(v.0.clone())
                } else {
                    ValueJson::Scalar(v.0[0].clone())
                },
            })
            .collect();
        TProducingJson {
            degree: self.degree,
            r: self.r,
            group: Some(self.group),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TProducing {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TProducingJson::deserialize(d)?;
        let group = match raw.group {
            Some(g) => g,
            None => match raw.entries.first().map(|e| &e.value) {
                Some(ValueJson::Vector(v)) => ValueGroup::RationalVectors(v.len()),
                _ => ValueGroup::Rationals,
            },
        };
        let entries = raw.entries.into_iter().map(|e| {
            let v = match e.value {
                ValueJson::Scalar(x) => Value::scalar(x),
                ValueJson::Vector(xs) => Value(xs),
            };
            (e.key, v)
        });
        TProducing::new(raw.degree, raw.r, group, entries).map_err(D::Error::custom)
    }
}

impl Serialize for SetPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tprod.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SetPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        SetPolynomial::new(TProducing::deserialize(d)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::setcore::{d_tuples, nonempty_subsets};

    fn set(v: &[u32]) -> FiniteSet {
        FiniteSet::new(v.iter().copied()).unwrap()
    }

    fn r(n: u32) -> IndexInterval {
        IndexInterval::new(n).unwrap()
    }

    fn q(x: Q) -> Value {
        Value::scalar(x)
    }

    fn tpoly(d: usize, n: u32, entries: &[(&[u32], Q)]) -> SetPolynomial {
        let t = TProducing::new(
            d,
            r(n),
            ValueGroup::Rationals,
            entries.iter().map(|(k, v)| (set(k), q(v.clone()))),
        )
        .unwrap();
        SetPolynomial::new(t).unwrap()
    }

    /// `(sum_{i in alpha} a_i)^2` written out by direct expansion.
    fn square_of_sum(a: &[i64]) -> SetPolynomial {
        let mut entries: Vec<(Vec<u32>, Q)> = Vec::new();
        for i in 0..a.len() {
            entries.push((vec![i as u32 + 1], int(a[i] * a[i])));
            for j in i + 1..a.len() {
                entries.push((vec![i as u32 + 1, j as u32 + 1], int(2 * a[i] * a[j])));
            }
        }
        let refs: Vec<(&[u32], Q)> = entries.iter().map(|(k, v)| (k.as_slice(), v.clone())).collect();
        tpoly(2, a.len() as u32, &refs)
    }

    #[test]
    fn eval_examples() {
        let lin = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(1)), q(int(2))]).unwrap();
        assert_eq!(lin.eval(&set(&[1, 2])).unwrap(), q(int(3)));
        let sq = square_of_sum(&[1, 2]);
        assert_eq!(sq.tprod().get(&set(&[1])), q(int(1)));
        assert_eq!(sq.tprod().get(&set(&[2])), q(int(4)));
        assert_eq!(sq.tprod().get(&set(&[1, 2])), q(int(4)));
        assert_eq!(sq.eval(&set(&[1, 2])).unwrap(), q(int(9)));
        assert!(sq.eval(&FiniteSet::empty()).unwrap().is_zero());
        assert!(sq.eval(&set(&[3])).is_err());
    }

    #[test]
    fn eval_q_examples() {
        let ones = QProducing::new(
            2,
            r(2),
            ValueGroup::Rationals,
            d_tuples(&[1u32, 2], 2).map(|v| (v, q(int(1)))),
        )
        .unwrap();
        assert_eq!(eval_q(&ones, &set(&[1, 2])).unwrap(), q(int(4)));
        let lin = QProducing::new(1, r(1), ValueGroup::Rationals, [(vec![1], q(int(3)))]).unwrap();
        assert_eq!(eval_q(&lin, &set(&[1])).unwrap(), q(int(3)));
        let one = QProducing::new(2, r(2), ValueGroup::Rationals, [(vec![1, 2], q(int(5)))]).unwrap();
        assert_eq!(eval_q(&one, &set(&[1, 2])).unwrap(), q(int(5)));
        assert_eq!(eval_q(&one, &set(&[1])).unwrap(), q(int(0)));
    }

    #[test]
    fn t_from_q_examples() {
        let qp = QProducing::new(
            2,
            r(2),
            ValueGroup::Rationals,
            [(vec![1, 2], q(int(1))), (vec![2, 1], q(int(1)))],
        )
        .unwrap();
        assert_eq!(t_from_q(&qp).get(&set(&[1, 2])), q(int(2)));
        let diag = QProducing::new(2, r(1), ValueGroup::Rationals, [(vec![1, 1], q(int(7)))]).unwrap();
        assert_eq!(t_from_q(&diag).get(&set(&[1])), q(int(7)));
        let lin = QProducing::new(
            1,
            r(3),
            ValueGroup::Rationals,
            [(vec![1], q(int(2))), (vec![3], q(ratio(1, 2)))],
        )
        .unwrap();
        let t = t_from_q(&lin);
        assert_eq!(t.get(&set(&[1])), q(int(2)));
        assert_eq!(t.get(&set(&[3])), q(ratio(1, 2)));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn q_from_t_roundtrip() {
        let p = tpoly(3, 4, &[(&[1], ratio(1, 3)), (&[2, 4], int(5)), (&[1, 2, 3], ratio(-2, 7))]);
        assert_eq!(t_from_q(&q_from_t(p.tprod())), *p.tprod());
    }

    #[test]
    fn derivative_examples() {
        let lin = SetPolynomial::linear(
            ValueGroup::Integers,
            vec![q(int(4)), q(int(-1)), q(int(3)), q(int(2))],
        )
        .unwrap();
        let beta = set(&[2, 3]);
        let d = derive(&lin, beta.clone()).unwrap();
        let phi_beta = lin.eval(&beta).unwrap();
        for alpha in [FiniteSet::empty(), set(&[1]), set(&[1, 4])] {
            assert_eq!(d.apply(&alpha).unwrap(), phi_beta);
        }
        assert!(d.apply(&set(&[2])).is_err());

        let sq = square_of_sum(&[1, 1, 1]);
        let d = derive(&sq, set(&[3])).unwrap();
        assert_eq!(d.apply(&set(&[1, 2])).unwrap(), q(int(5)));
        assert!(derive(&sq, FiniteSet::empty()).is_err());
    }

    #[test]
    fn derivatives_commute() {
        let p = tpoly(3, 6, &[(&[1, 2], ratio(3, 4)), (&[2, 5, 6], int(2)), (&[4], ratio(-1, 5))]);
        let (b, c) = (set(&[2, 3]), set(&[5]));
        let bc = derive(derive(&p, b.clone()).unwrap(), c.clone()).unwrap();
        let cb = derive(derive(&p, c).unwrap(), b).unwrap();
        for alpha in subsets_of(bc.ground(), 0, 6) {
            assert_eq!(bc.apply(&alpha).unwrap(), cb.apply(&alpha).unwrap());
        }
    }

    #[test]
    fn degree_verify_examples() {
        let lin = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(1)), q(int(2)), q(int(0))]).unwrap();
        assert!(degree_verify(&lin, 1).unwrap());
        assert!(!degree_verify(&lin, 0).unwrap());
        let zero = SetPolynomial::zero(2, r(4), ValueGroup::Integers).unwrap();
        assert!(degree_verify(&zero, 0).unwrap());
        let p = tpoly(2, 6, &[(&[1, 2], int(1)), (&[3], ratio(1, 2)), (&[5, 6], ratio(-3, 2))]);
        let report = DegreeCheck::default().run(&p, 2).unwrap();
        assert!(report.passed && report.exhaustive);
        let report = DegreeCheck::default().run(&p, 1).unwrap();
        assert!(!report.passed);
        let ce = report.counterexample.unwrap();
        assert_eq!(ce.betas.len(), 2);
    }

    #[test]
    fn degree_verify_rejects_non_polynomials() {
        // alpha -> 1 for nonempty alpha has no finite degree
        let g = from_fn(FiniteSet::interval(5), ValueGroup::Integers, |a: &FiniteSet| {
            q(int(!a.is_empty() as i64))
        });
        for d in 0..4 {
            assert!(!degree_verify(&g, d).unwrap());
        }
        // |alpha|^2 has degree 2
        let h = from_fn(FiniteSet::interval(5), ValueGroup::Integers, |a: &FiniteSet| {
            q(int((a.len() * a.len()) as i64))
        });
        assert!(degree_verify(&h, 2).unwrap());
        assert!(!degree_verify(&h, 1).unwrap());
    }

    #[test]
    fn degree_verify_reduced_mode_on_large_ground() {
        let h = from_fn(FiniteSet::interval(11), ValueGroup::Integers, |a: &FiniteSet| {
            q(int((a.len() * a.len() * a.len()) as i64))
        });
        let rep = DegreeCheck::default().run(&h, 3).unwrap();
        assert!(rep.passed);
        assert!(!rep.exhaustive);
        let rep = DegreeCheck::default().run(&h, 2).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn torus_values_vanish_mod_one() {
        let lin = SetPolynomial::linear(ValueGroup::Torus, vec![q(ratio(3, 2)), q(ratio(1, 2))]).unwrap();
        assert_eq!(lin.eval(&set(&[1, 2])).unwrap(), q(int(0)));
        assert_eq!(lin.eval(&set(&[1])).unwrap(), q(ratio(1, 2)));
        assert!(degree_verify(&lin, 1).unwrap());
    }

    #[test]
    fn restrict_examples() {
        let p = tpoly(2, 2, &[(&[1], ratio(1, 3)), (&[1, 2], int(4)), (&[2], int(-1))]);
        let b = DisjointCollection::singletons(&set(&[1, 2]));
        assert_eq!(p.restrict(&b).unwrap(), p);

        let lin = SetPolynomial::linear(
            ValueGroup::Integers,
            vec![q(int(1)), q(int(1)), q(int(1))],
        )
        .unwrap();
        let b = DisjointCollection::new(vec![set(&[1, 2]), set(&[3])]).unwrap();
        let rb = lin.restrict(&b).unwrap();
        assert_eq!(rb.tprod().get(&set(&[1])), q(int(2)));
        assert_eq!(rb.tprod().get(&set(&[2])), q(int(1)));
        assert_eq!(rb.tprod().len(), 2);
    }

    #[test]
    fn restrict_matches_union_evaluation() {
        let p = tpoly(
            3,
            7,
            &[
                (&[1], ratio(1, 3)),
                (&[2, 3], int(4)),
                (&[1, 4, 6], ratio(-5, 2)),
                (&[7], int(2)),
                (&[5, 7], ratio(1, 9)),
            ],
        );
        let b = DisjointCollection::new(vec![set(&[1, 7]), set(&[2, 4]), set(&[3, 6])]).unwrap();
        let rb = p.restrict(&b).unwrap();
        for gamma in subsets_of(&b.index_ground(), 0, 3) {
            let lhs = rb.eval(&gamma).unwrap();
            let rhs = p.eval(&b.embed_indices(&gamma).unwrap()).unwrap();
            assert_eq!(lhs, rhs, "gamma = {gamma}");
        }
        assert!(p
            .restrict(&DisjointCollection::new(vec![set(&[8])]).unwrap())
            .is_err());
    }

    #[test]
    fn nested_restriction_agrees_with_iterated() {
        let p = tpoly(2, 6, &[(&[1, 2], ratio(1, 2)), (&[3, 5], int(1)), (&[6], ratio(2, 3))]);
        let outer = DisjointCollection::new(vec![set(&[1]), set(&[2, 3]), set(&[4, 5]), set(&[6])]).unwrap();
        let inner = DisjointCollection::new(vec![set(&[1, 3]), set(&[2, 4])]).unwrap();
        let direct = p.restrict_nested(&outer, &inner).unwrap();
        let iterated = p.restrict(&outer).unwrap().restrict(&inner).unwrap();
        assert_eq!(direct, iterated);
    }

    #[test]
    fn homogeneous_split_examples() {
        let lin = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(2)), q(int(3))]).unwrap();
        let parts = lin.homogeneous_split();
        assert_eq!(parts, vec![lin.clone()]);
        let p = tpoly(2, 2, &[(&[1], int(1)), (&[1, 2], int(5))]);
        let parts = p.homogeneous_split();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].tprod().len(), 1);
        assert_eq!(parts[1].tprod().len(), 1);
        for alpha in nonempty_subsets(r(2), None) {
            let sum = parts
                .iter()
                .fold(ValueGroup::Rationals.zero(), |acc, c| &acc + &c.eval(&alpha).unwrap());
            assert_eq!(sum, p.eval(&alpha).unwrap());
        }
    }

    #[test]
    fn vip_image_examples() {
        let lin = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(1)), q(int(2))]).unwrap();
        let img: Vec<_> = lin.vip_image().unwrap().into_iter().collect();
        assert_eq!(img, vec![q(int(1)), q(int(2)), q(int(3))]);
        // (sum_{i in alpha} i)^2 over [2]
        let t = TProducing::new(
            2,
            r(2),
            ValueGroup::Integers,
            [
                (set(&[1]), q(int(1))),
                (set(&[2]), q(int(4))),
                (set(&[1, 2]), q(int(4))),
            ],
        )
        .unwrap();
        let img: Vec<_> = SetPolynomial::new(t).unwrap().vip_image().unwrap().into_iter().collect();
        assert_eq!(img, vec![q(int(1)), q(int(4)), q(int(9))]);
        let single = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(5))]).unwrap();
        assert_eq!(single.vip_image().unwrap().len(), 1);
        let rat = tpoly(1, 1, &[(&[1], ratio(1, 2))]);
        assert!(rat.vip_image().is_err());
    }

    #[test]
    fn interpolate_recovers_table() {
        let p = tpoly(3, 5, &[(&[1, 2], ratio(1, 2)), (&[3, 4, 5], int(7)), (&[2], ratio(-1, 6))]);
        assert_eq!(SetPolynomial::interpolate(&p, 3).unwrap(), p);
    }

    #[test]
    fn integer_part_additivity_low_and_high() {
        // fractional parts below 1/n: [sum] = sum of [ ]
        let xs = [ratio(1, 100), ratio(201, 100), ratio(-299, 100)];
        assert!(fractions_below(&xs));
        let sum: Q = xs.iter().sum();
        let floors: Q = xs.iter().map(rational::floor).sum();
        assert_eq!(rational::floor(&sum), floors);
        // fractional parts above 1 - 1/n: [sum] = sum(-[-x]) - 1
        let ys = [ratio(99, 100), ratio(-101, 100), ratio(298, 100)];
        assert!(fractions_above(&ys));
        let sum: Q = ys.iter().sum();
        let ceils: Q = ys.iter().map(|y| -rational::floor(&-y.clone())).sum();
        assert_eq!(rational::floor(&sum), ceils - int(1));
    }

    #[test]
    fn shifted_integer_poly() {
        let base = SetPolynomial::linear(ValueGroup::Integers, vec![q(int(1)), q(int(1))]).unwrap();
        let s = ShiftedIntegerPoly::new(base.clone(), -1).unwrap();
        assert_eq!(s.eval(&FiniteSet::empty()).unwrap(), int(0));
        assert_eq!(s.eval(&set(&[1, 2])).unwrap(), int(1));
        assert!(ShiftedIntegerPoly::new(base, -2).is_err());
    }

    #[test]
    fn tproducing_json() {
        let p = tpoly(2, 3, &[(&[1], ratio(1, 2)), (&[1, 3], int(-2))]);
        let json = serde_json::to_string(p.tprod()).unwrap();
        assert_eq!(
            json,
            r#"{"degree":2,"r":3,"group":"rationals","entries":[{"key":[1],"value":"1/2"},{"key":[1,3],"value":"-2"}]}"#
        );
        let back: TProducing = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, p.tprod());
        let vec_json = r#"{"degree":1,"r":2,"group":{"integer_vectors":2},"entries":[{"key":[1],"value":[1,"2"]}]}"#;
        let v: TProducing = serde_json::from_str(vec_json).unwrap();
        assert_eq!(v.get(&set(&[1])), Value(vec![int(1), int(2)]));
        let bad = r#"{"degree":1,"r":2,"entries":[{"key":[1,2],"value":"1"}]}"#;
        assert!(serde_json::from_str::<TProducing>(bad).is_err());
    }
}
