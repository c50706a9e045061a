//! Bounded exhaustive searches for the finite witnesses whose existence the
//! set-polynomial theory guarantees only for very large `r`: small
//! fractional-part sets, subcollections with small producing functions,
//! integer-part linearization, and IP-set hitting tests.
//!
//! Every search scans candidates in a canonical order and reports the first
//! witness in that order, whatever the number of worker threads. Running out
//! of candidates (`Exhausted`) or of budget (`BudgetHit`) is an outcome, not an
//! error.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genpoly::GPAttributes;
use crate::rational::{self, format_q, Q};
use crate::setcore::{
    d_tuples, disjoint_subcollections, subsets_of, DisjointCollection, FiniteSet, IndexInterval,
};
use crate::setpoly::{
    floor_shift, restrict_map, DegreeCheck, SetMapping, SetPolynomial, Value, ValueGroup,
};

/// Limits standing in for the (astronomical) bounds of the existence
/// theorems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_r: u32,
    pub max_subsets: u64,
    pub max_subcollections: u64,
    /// Wall-clock cap in seconds.
    pub time_cap: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_r: 20,
            max_subsets: 1 << 22,
            max_subcollections: 1 << 21,
            time_cap: 60.0,
        }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_r == 0
            || self.max_subsets == 0
            || self.max_subcollections == 0
            || !(self.time_cap.is_finite() && self.time_cap > 0.0)
        {
            return Err(Error::Budget(format!(
                "budget fields must all be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub(crate) fn deadline(&self) -> Deadline {
        Deadline {
            start: Instant::now(),
            cap: Duration::from_secs_f64(self.time_cap),
        }
    }
}

pub(crate) struct Deadline {
    start: Instant,
    cap: Duration,
}

impl Deadline {
    pub(crate) fn expired(&self) -> bool {
        self.start.elapsed() > self.cap
    }

    pub(crate) fn elapsed_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Found,
    Exhausted,
    BudgetHit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub outcome: Outcome,
    pub candidates_examined: u64,
    pub elapsed_ms: u64,
}

/// Result of a witness search. A `Found` report always carries a witness
/// that has been re-verified independently of the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport<W> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<W>,
    pub stats: SearchStats,
    /// Set when a user-supplied bound replaced the exact hypothesis.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub relaxed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl<W> WitnessReport<W> {
    pub fn outcome(&self) -> Outcome {
        self.stats.outcome
    }

    pub(crate) fn new(outcome: Outcome, witness: Option<W>, examined: u64, deadline: &Deadline) -> Self {
        WitnessReport {
            witness,
            stats: SearchStats {
                outcome,
                candidates_examined: examined,
                elapsed_ms: deadline.elapsed_ms(),
            },
            relaxed: false,
            notes: Vec::new(),
        }
    }

    fn from_scan<T>(scan: Scan<T, W>, deadline: &Deadline) -> Self {
        match scan {
            Scan::Found { examined, value, .. } => {
                Self::new(Outcome::Found, Some(value), examined, deadline)
            }
            Scan::Exhausted { examined } => Self::new(Outcome::Exhausted, None, examined, deadline),
            Scan::BudgetHit { examined } => Self::new(Outcome::BudgetHit, None, examined, deadline),
        }
    }
}

pub(crate) enum Scan<T, R> {
    Found { examined: u64, item: T, value: R },
    Exhausted { examined: u64 },
    BudgetHit { examined: u64 },
}

const CHUNK: usize = 512;

/// Scans `items` in order, in parallel chunks, and returns the first item
/// for which `f` yields a value. The answer is the canonical first one even
/// though workers race within a chunk.
pub(crate) fn scan_first<T, R, I, F>(
    items: I,
    limit: u64,
    deadline: &Deadline,
    f: F,
) -> Result<Scan<T, R>>
where
    I: Iterator<Item = T>,
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> Result<Option<R>> + Sync,
{
    let mut items = items.peekable();
    let mut examined = 0u64;
    loop {
        if items.peek().is_none() {
            return Ok(Scan::Exhausted { examined });
        }
        if examined >= limit || deadline.expired() {
            return Ok(Scan::BudgetHit { examined });
        }
        let take = (CHUNK as u64).min(limit - examined) as usize;
        let chunk: Vec<T> = items.by_ref().take(take).collect();
        let hit = chunk
            .par_iter()
            .enumerate()
            .find_map_first(|(i, t)| match f(t) {
                Ok(Some(r)) => Some(Ok((i, r))),
                Ok(None) => None,
                Err(e) => Some(Err(e)),
            });
        match hit {
            Some(Ok((i, value))) => {
                let item = chunk.into_iter().nth(i).expect("index from this chunk");
                return Ok(Scan::Found {
                    examined: examined + i as u64 + 1,
                    item,
                    value,
                });
            }
            Some(Err(e)) => return Err(e),
            None => examined += chunk.len() as u64,
        }
    }
}

fn check_eps(eps: &Q) -> Result<()> {
    if *eps <= Q::zero() {
        return Err(Error::Precondition(format!(
            "eps must be positive, got {}",
            format_q(eps)
        )));
    }
    Ok(())
}

fn value_norm(v: &Value) -> Q {
    v.fractional_norm()
}

/// First nonempty `alpha` of `[r]` (by cardinality, then lexicographic) with
/// `||phi_i(alpha)|| < eps` for every mapping.
pub fn find_small_alpha<M: SetMapping>(
    phis: &[M],
    r: IndexInterval,
    eps: &Q,
    budget: &SearchBudget,
) -> Result<WitnessReport<FiniteSet>> {
    budget.validate()?;
    check_eps(eps)?;
    let ground = r.as_set();
    for phi in phis {
        if !ground.is_subset(phi.ground()) {
            return Err(Error::Domain(format!(
                "mapping ground {} does not contain [{}]",
                phi.ground(),
                r.get()
            )));
        }
    }
    let deadline = budget.deadline();
    let small = |alpha: &FiniteSet| -> Result<bool> {
        for phi in phis {
            if value_norm(&phi.apply(alpha)?) >= *eps {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let scan = scan_first(
        subsets_of(&ground, 1, ground.len()),
        budget.max_subsets,
        &deadline,
        |alpha| Ok(small(alpha)?.then_some(())),
    )?;
    let scan = match scan {
        Scan::Found { examined, item, .. } => {
            if !small(&item)? {
                return Err(Error::Precondition(format!(
                    "witness {item} failed re-verification; mappings are not deterministic"
                )));
            }
            Scan::Found {
                examined,
                value: item.clone(),
                item,
            }
        }
        Scan::Exhausted { examined } => Scan::Exhausted { examined },
        Scan::BudgetHit { examined } => Scan::BudgetHit { examined },
    };
    Ok(WitnessReport::from_scan(scan, &deadline))
}

/// Failures of a family at one value of `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RFailures {
    pub r: u32,
    /// Indices of the instances without a witness (or out of budget).
    pub instances: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    /// One witness per instance at the reported `r`.
    pub witnesses: Vec<FiniteSet>,
    pub failures: Vec<RFailures>,
    pub candidates_examined: u64,
    pub elapsed_ms: u64,
}

/// Smallest `r <= budget.max_r` at which every instance produced by `family`
/// has a small-fractional-part witness. Each instance is a list of mappings
/// that must be small simultaneously.
pub fn empirical_r<M, F>(family: F, eps: &Q, budget: &SearchBudget) -> Result<EmpiricalReport>
where
    M: SetMapping,
    F: Fn(IndexInterval) -> Result<Vec<Vec<M>>>,
{
    budget.validate()?;
    check_eps(eps)?;
    let deadline = budget.deadline();
    let mut failures = Vec::new();
    let mut examined = 0;
    for r in 1..=budget.max_r {
        let ri = IndexInterval::new(r)?;
        let mut witnesses = Vec::new();
        let mut failed = Vec::new();
        for (i, instance) in family(ri)?.iter().enumerate() {
            let rep = find_small_alpha(instance, ri, eps, budget)?;
            examined += rep.stats.candidates_examined;
            match rep.witness {
                Some(w) => witnesses.push(w),
                None => failed.push(i),
            }
        }
        if failed.is_empty() {
            return Ok(EmpiricalReport {
                outcome: Outcome::Found,
                r: Some(r),
                witnesses,
                failures,
                candidates_examined: examined,
                elapsed_ms: deadline.elapsed_ms(),
            });
        }
        failures.push(RFailures {
            r,
            instances: failed,
        });
        if deadline.expired() {
            break;
        }
    }
    Ok(EmpiricalReport {
        outcome: Outcome::BudgetHit,
        r: None,
        witnesses: Vec::new(),
        failures,
        candidates_examined: examined,
        elapsed_ms: deadline.elapsed_ms(),
    })
}

fn producing_small(p: &SetPolynomial, eps: &Q) -> bool {
    p.tprod().entries().all(|(_, v)| value_norm(v) < *eps)
}

/// Recomputes the producing function of `phi` restricted to `F(B)` by
/// Moebius inversion of `gamma -> phi(union gamma)`, without going through
/// [`SetPolynomial::restrict`].
fn independent_restriction(phi: &SetPolynomial, b: &DisjointCollection) -> Result<SetPolynomial> {
    let map = restrict_map(phi, b.clone())?;
    SetPolynomial::interpolate(&map, phi.degree())
}

/// First disjoint `s`-subcollection `B` of `[r]` such that the t-producing
/// function of `phi` restricted to `F(B)` has all fractional norms below
/// `eps`.
pub fn small_producing_subcollection(
    phi: &SetPolynomial,
    s: usize,
    eps: &Q,
    budget: &SearchBudget,
) -> Result<WitnessReport<DisjointCollection>> {
    small_producing_subcollection_all(std::slice::from_ref(phi), s, eps, budget)
}

/// As [`small_producing_subcollection`], for several mappings on the same
/// ground at once.
pub fn small_producing_subcollection_all(
    phis: &[SetPolynomial],
    s: usize,
    eps: &Q,
    budget: &SearchBudget,
) -> Result<WitnessReport<DisjointCollection>> {
    budget.validate()?;
    check_eps(eps)?;
    check_s(s)?;
    let ground = common_ground(phis)?;
    let deadline = budget.deadline();
    let scan = scan_first(
        disjoint_subcollections(&ground, s),
        budget.max_subcollections,
        &deadline,
        |b| {
            for phi in phis {
                if !producing_small(&phi.restrict(b)?, eps) {
                    return Ok(None);
                }
            }
            Ok(Some(()))
        },
    )?;
    let scan = reverify(scan, |b| {
        for phi in phis {
            let direct = phi.restrict(b)?;
            let indep = independent_restriction(phi, b)?;
            if direct != indep || !producing_small(&indep, eps) {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    Ok(WitnessReport::from_scan(scan, &deadline))
}

fn check_s(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::Precondition("s must be at least 1".into()));
    }
    Ok(())
}

fn common_ground(phis: &[SetPolynomial]) -> Result<FiniteSet> {
    let Some(first) = phis.first() else {
        return Ok(FiniteSet::empty());
    };
    for p in phis {
        if p.r() != first.r() {
            return Err(Error::DimensionMismatch {
                expected: first.r().get() as usize,
                found: p.r().get() as usize,
            });
        }
    }
    Ok(first.ground().clone())
}

/// Turns an item-found scan into a witness-carrying one after re-checking
/// the item with `check`.
fn reverify<R>(
    scan: Scan<DisjointCollection, R>,
    check: impl Fn(&DisjointCollection) -> Result<bool>,
) -> Result<Scan<DisjointCollection, DisjointCollection>> {
    Ok(match scan {
        Scan::Found { examined, item, .. } => {
            if !check(&item)? {
                return Err(Error::Precondition(format!(
                    "witness {item:?} failed independent re-verification"
                )));
            }
            Scan::Found {
                examined,
                value: item.clone(),
                item,
            }
        }
        Scan::Exhausted { examined } => Scan::Exhausted { examined },
        Scan::BudgetHit { examined } => Scan::BudgetHit { examined },
    })
}

/// A subcollection together with the shift making the integer part
/// polynomial: `[phi restricted to F(B)] - shift` has degree at most `d` and
/// vanishes at the empty set (the shift applies to nonempty sets only).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkobWitness {
    pub collection: DisjointCollection,
    pub shift: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkopWitness {
    pub collection: DisjointCollection,
    pub shifts: Vec<i64>,
}

/// Bound on the fractional norms of the producing function assumed by
/// [`skob_search`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkobBound {
    /// `1 / r^d` with `r` the ground size and `d` the degree.
    Strict,
    /// A user-supplied bound; reports are flagged as relaxed.
    Relaxed(Q),
}

fn scalar_real(phi: &SetPolynomial) -> Result<()> {
    match phi.value_group() {
        ValueGroup::Rationals | ValueGroup::Integers => Ok(()),
        g => Err(Error::Domain(format!(
            "integer parts are taken of real scalar mappings, got {g:?}"
        ))),
    }
}

/// True when `[restricted] - shift` has degree at most `d`.
fn floor_is_polynomial(restricted: &SetPolynomial, shift: i64, d: usize) -> Result<bool> {
    let g = floor_shift(restricted, shift)?;
    Ok(DegreeCheck::exhaustive().run(&g, d)?.passed)
}

/// The shifts to try, the predicted one first.
fn shift_order(predicted: i64, d: usize) -> Vec<i64> {
    let mut out = vec![predicted];
    out.extend((0..=d as i64).map(|k| -k).filter(|&e| e != predicted));
    out
}

/// Low/high classification of the producing values of each homogeneous
/// component on an index set; `Some(number of high components)` when every
/// component is monochromatic there.
fn ramsey_colour(phi: &SetPolynomial, b: &FiniteSet, bound: &Q) -> Option<i64> {
    let mut high_components = 0;
    for l in 1..=phi.degree() {
        let mut colour = None;
        for u in subsets_of(b, l, l) {
            let v = phi.tprod().get(&u);
            let f = rational::fract(v.as_scalar()?);
            let c = if f < *bound {
                false
            } else if Q::one() - &f < *bound {
                true
            } else {
                return None;
            };
            match colour {
                None => colour = Some(c),
                Some(prev) if prev != c => return None,
                _ => {}
            }
        }
        if colour == Some(true) {
            high_components += 1;
        }
    }
    Some(high_components)
}

/// Finds a singleton `s`-subcollection `B` and a shift `e` in
/// `{0, -1, ..., -d}` with `[phi restricted to F(B)] - e` polynomial of degree
/// at most `d`.
///
/// Requires `||Phi(u)|| < 1/r^d` for every key (or a relaxed bound). Subsets
/// on which every homogeneous component has all its producing values on one
/// side of the integers (all fractional parts small, or all close to 1) are
/// tried first, with the shift predicted by the number of components on the
/// upper side; the remaining subsets follow. Every reported pair passes an
/// exhaustive derivative check on `F(B)`.
pub fn skob_search(
    phi: &SetPolynomial,
    s: usize,
    bound: SkobBound,
    budget: &SearchBudget,
) -> Result<WitnessReport<SkobWitness>> {
    budget.validate()?;
    check_s(s)?;
    scalar_real(phi)?;
    let d = phi.degree();
    let r = phi.r().get();
    let (bound, relaxed) = match bound {
        SkobBound::Strict => (
            Q::new(1.into(), num::pow(num::BigInt::from(r), d)),
            false,
        ),
        SkobBound::Relaxed(b) => {
            check_eps(&b)?;
            (b, true)
        }
    };
    for (u, v) in phi.tprod().entries() {
        let norm = value_norm(v);
        if norm >= bound {
            return Err(Error::Precondition(format!(
                "producing value at key {u} has fractional norm {} >= {}",
                format_q(&norm),
                format_q(&bound)
            )));
        }
    }
    let deadline = budget.deadline();
    // Monochromatic subsets first, then the rest, each in lexicographic order.
    let ground = phi.ground().clone();
    let total = subsets_of(&ground, s, s).count() as u64;
    let mut ordered: Vec<(FiniteSet, Option<i64>)> = Vec::new();
    let mut rest = Vec::new();
    for b in subsets_of(&ground, s, s).take(budget.max_subcollections as usize) {
        match ramsey_colour(phi, &b, &bound) {
            Some(high) => ordered.push((b, Some(-high))),
            None => rest.push((b, None)),
        }
    }
    let monochromatic = ordered.len();
    ordered.extend(rest);
    let limit = budget.max_subcollections.min(total);
    let scan = scan_first(ordered.into_iter(), limit, &deadline, |(b, predicted)| {
        let coll = DisjointCollection::singletons(b);
        let restricted = phi.restrict(&coll)?;
        for e in shift_order(predicted.unwrap_or(0), d) {
            if floor_is_polynomial(&restricted, e, d)? {
                return Ok(Some(e));
            }
        }
        Ok(None)
    })?;
    let mut report = match scan {
        Scan::Found {
            examined,
            item: (b, predicted),
            value: e,
        } => {
            let coll = DisjointCollection::singletons(&b);
            let indep = independent_restriction(phi, &coll)?;
            if !floor_is_polynomial(&indep, e, d)? {
                return Err(Error::Precondition(format!(
                    "witness {b} failed independent re-verification"
                )));
            }
            let mut rep = WitnessReport::new(
                Outcome::Found,
                Some(SkobWitness {
                    collection: coll,
                    shift: e,
                }),
                examined,
                &deadline,
            );
            rep.notes.push(match predicted {
                Some(p) if p == e => "monochromatic subset, predicted shift".to_string(),
                Some(_) => "monochromatic subset, shift found by enumeration".to_string(),
                None => "found by direct enumeration".to_string(),
            });
            rep
        }
        Scan::Exhausted { examined } => {
            WitnessReport::new(if limit < total { Outcome::BudgetHit } else { Outcome::Exhausted }, None, examined, &deadline)
        }
        Scan::BudgetHit { examined } => WitnessReport::new(Outcome::BudgetHit, None, examined, &deadline),
    };
    report.relaxed = relaxed;
    report
        .notes
        .push(format!("{monochromatic} of {total} subsets are monochromatic"));
    Ok(report)
}

/// Shifts making every `[phi_i restricted to F(B)] - e_i` polynomial, if any.
fn joint_shifts(phis: &[SetPolynomial], b: &DisjointCollection) -> Result<Option<Vec<i64>>> {
    let mut shifts = Vec::with_capacity(phis.len());
    for phi in phis {
        let d = phi.degree();
        let restricted = phi.restrict(b)?;
        let mut found = None;
        for e in shift_order(0, d) {
            if floor_is_polynomial(&restricted, e, d)? {
                found = Some(e);
                break;
            }
        }
        match found {
            Some(e) => shifts.push(e),
            None => return Ok(None),
        }
    }
    Ok(Some(shifts))
}

/// How many sizes above `s` the first stage of [`skop_search`] tries.
const PIPELINE_EXTRA: usize = 2;

/// Finds a disjoint `s`-subcollection `B` and shifts `e_i` with every
/// `[phi_i restricted to F(B)] - e_i` polynomial of degree at most `d_i`.
///
/// First stage: a subcollection of `m >= s` blocks on which every producing
/// function is within `1/m^d` of the integers, followed by a singleton search
/// inside it. Fallback: direct enumeration of all disjoint
/// `s`-subcollections.
pub fn skop_search(
    phis: &[SetPolynomial],
    s: usize,
    budget: &SearchBudget,
) -> Result<WitnessReport<SkopWitness>> {
    budget.validate()?;
    check_s(s)?;
    for phi in phis {
        scalar_real(phi)?;
    }
    let deadline = budget.deadline();
    let ground = common_ground(phis)?;
    if phis.is_empty() {
        return Ok(WitnessReport::new(
            Outcome::Found,
            Some(SkopWitness {
                collection: DisjointCollection::singletons(&FiniteSet::interval(s as u32)),
                shifts: Vec::new(),
            }),
            0,
            &deadline,
        ));
    }
    let r = ground.len();
    let dmax = phis.iter().map(SetPolynomial::degree).max().unwrap_or(1);
    let mut examined = 0;
    for m in s..=(s + PIPELINE_EXTRA).min(r) {
        let eps = Q::new(1.into(), num::pow(num::BigInt::from(m), dmax));
        let stage = small_producing_subcollection_all(phis, m, &eps, budget)?;
        examined += stage.stats.candidates_examined;
        let Some(big) = stage.witness else { continue };
        let restricted: Vec<SetPolynomial> = phis
            .iter()
            .map(|p| p.restrict(&big))
            .collect::<Result<_>>()?;
        let scan = scan_first(
            subsets_of(&big.index_ground(), s, s),
            budget.max_subcollections,
            &deadline,
            |c| joint_shifts(&restricted, &DisjointCollection::singletons(c)),
        )?;
        match scan {
            Scan::Found {
                examined: n,
                item,
                value,
            } => {
                examined += n;
                let collection = big.compose(&DisjointCollection::singletons(&item))?;
                return finish_skop(phis, collection, value, examined, &deadline, format!(
                    "small producing subcollection with {m} blocks, then singletons"
                ));
            }
            Scan::Exhausted { examined: n } | Scan::BudgetHit { examined: n } => examined += n,
        }
    }
    let scan = scan_first(
        disjoint_subcollections(&ground, s),
        budget.max_subcollections,
        &deadline,
        |b| joint_shifts(phis, b),
    )?;
    match scan {
        Scan::Found {
            examined: n,
            item,
            value,
        } => finish_skop(phis, item, value, examined + n, &deadline, "direct enumeration".into()),
        Scan::Exhausted { examined: n } => Ok(WitnessReport::new(
            Outcome::Exhausted,
            None,
            examined + n,
            &deadline,
        )),
        Scan::BudgetHit { examined: n } => Ok(WitnessReport::new(
            Outcome::BudgetHit,
            None,
            examined + n,
            &deadline,
        )),
    }
}

fn finish_skop(
    phis: &[SetPolynomial],
    collection: DisjointCollection,
    shifts: Vec<i64>,
    examined: u64,
    deadline: &Deadline,
    note: String,
) -> Result<WitnessReport<SkopWitness>> {
    for (phi, &e) in phis.iter().zip(&shifts) {
        let indep = independent_restriction(phi, &collection)?;
        if !floor_is_polynomial(&indep, e, phi.degree())? {
            return Err(Error::Precondition(format!(
                "witness {collection:?} failed independent re-verification"
            )));
        }
    }
    let mut rep = WitnessReport::new(
        Outcome::Found,
        Some(SkopWitness { collection, shifts }),
        examined,
        deadline,
    );
    rep.notes.push(note);
    Ok(rep)
}

/// A generalized polynomial mapping on `F([r])` with its declared
/// attributes; `attrs.d` is the degree its restrictions should have.
pub struct DeclaredMap<M> {
    pub map: M,
    pub attrs: GPAttributes,
}

/// First disjoint `s`-subcollection `B` on which every mapping restricts to
/// a polynomial mapping of its declared degree (vanishing at the empty set),
/// checked by the exhaustive derivative criterion on `F(B)`.
pub fn gps_search<M: SetMapping>(
    maps: &[DeclaredMap<M>],
    s: usize,
    budget: &SearchBudget,
) -> Result<WitnessReport<DisjointCollection>> {
    budget.validate()?;
    check_s(s)?;
    let deadline = budget.deadline();
    let Some(first) = maps.first() else {
        return Ok(WitnessReport::new(
            Outcome::Found,
            Some(DisjointCollection::singletons(&FiniteSet::interval(s as u32))),
            0,
            &deadline,
        ));
    };
    let ground = first.map.ground().clone();
    if maps.iter().any(|m| *m.map.ground() != ground) {
        return Err(Error::Domain("mappings must share a ground set".into()));
    }
    let polynomial_on = |b: &DisjointCollection| -> Result<bool> {
        for m in maps {
            let restricted = restrict_map(&m.map, b.clone())?;
            if !m.map.group().is_zero(&restricted.apply(&FiniteSet::empty())?) {
                return Ok(false);
            }
            if !DegreeCheck::exhaustive().run(&restricted, m.attrs.d as usize)?.passed {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let scan = scan_first(
        disjoint_subcollections(&ground, s),
        budget.max_subcollections,
        &deadline,
        |b| Ok(polynomial_on(b)?.then_some(())),
    )?;
    let scan = reverify(scan, |b| {
        // an independent pass: interpolate each restriction and compare it
        // with the mapping on every subset of F(B)
        for m in maps {
            let restricted = restrict_map(&m.map, b.clone())?;
            let interp = SetPolynomial::interpolate(&restricted, (m.attrs.d as usize).max(1))?;
            for gamma in subsets_of(&b.index_ground(), 0, b.len()) {
                let lhs = interp.eval(&gamma)?;
                let rhs = restricted.apply(&gamma)?;
                if !m.map.group().is_zero(&(&lhs - &rhs)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })?;
    Ok(WitnessReport::from_scan(scan, &deadline))
}

/// Values that can be summed to form IP-sets: integers or integer vectors.
pub trait Summable: Clone + Ord + Send + Sync {
    fn checked_sum(&self, other: &Self) -> Option<Self>;
    fn is_zero_element(&self) -> bool;
}

impl Summable for i64 {
    fn checked_sum(&self, other: &Self) -> Option<Self> {
        self.checked_add(*other)
    }
    fn is_zero_element(&self) -> bool {
        *self == 0
    }
}

impl Summable for i128 {
    fn checked_sum(&self, other: &Self) -> Option<Self> {
        self.checked_add(*other)
    }
    fn is_zero_element(&self) -> bool {
        *self == 0
    }
}

impl Summable for Vec<i64> {
    fn checked_sum(&self, other: &Self) -> Option<Self> {
        if self.len() != other.len() {
            return None;
        }
        self.iter().zip(other).map(|(a, b)| a.checked_add(*b)).collect()
    }
    fn is_zero_element(&self) -> bool {
        self.iter().all(|&x| x == 0)
    }
}

/// `{sum of n_i over i in alpha : alpha nonempty subset of [r]}` for seeds
/// `n_1, ..., n_r`, duplicates merged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IPrSet<T: Ord> {
    pub seeds: Vec<T>,
    pub sums: BTreeSet<T>,
}

/// Largest number of seeds accepted by [`build_ip_r`].
pub const MAX_IP_SEEDS: usize = 25;

fn subset_sums<T: Summable>(seeds: &[T]) -> Result<Vec<T>> {
    // sums[mask] = sums[mask without its lowest bit] + seed of that bit
    let mut sums: Vec<Option<T>> = vec![None; 1 << seeds.len()];
    for mask in 1usize..sums.len() {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let v = match &sums[rest] {
            None => seeds[low].clone(),
            Some(prev) => prev
                .checked_sum(&seeds[low])
                .ok_or_else(|| Error::Domain("finite sum overflows or mixes dimensions".into()))?,
        };
        sums[mask] = Some(v);
    }
    Ok(sums.into_iter().flatten().collect())
}

pub fn build_ip_r<T: Summable>(seeds: Vec<T>) -> Result<IPrSet<T>> {
    if seeds.len() > MAX_IP_SEEDS {
        return Err(Error::Budget(format!(
            "{} seeds would give 2^{} finite sums; at most {MAX_IP_SEEDS} are supported",
            seeds.len(),
            seeds.len()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::Precondition("at least one seed is needed".into()));
    }
    if seeds.iter().any(Summable::is_zero_element) {
        return Err(Error::Precondition("seeds must be nonzero".into()));
    }
    let sums = subset_sums(&seeds)?.into_iter().collect();
    Ok(IPrSet { seeds, sums })
}

/// Whether some element of `set` satisfies `e`.
pub fn hits<'a, T: 'a>(e: impl Fn(&T) -> bool, set: impl IntoIterator<Item = &'a T>) -> bool {
    set.into_iter().any(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitOutcome {
    /// Every tuple's IP_r-set meets the set.
    AllHit,
    /// Some tuple's IP_r-set misses the set; the first one is reported.
    Miss,
    BudgetHit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitReport {
    pub outcome: HitOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miss: Option<Vec<i64>>,
    pub tuples_checked: u64,
    pub elapsed_ms: u64,
}

/// Checks that the IP_r-set of every `r`-tuple (with repetition) drawn from
/// `pool` meets the set described by `e`. Tuples are taken in lexicographic
/// order of the pool and the first miss is reported.
pub fn ipstar_hit_test<E>(e: E, pool: &[i64], r: usize, budget: &SearchBudget) -> Result<HitReport>
where
    E: Fn(i64) -> bool + Sync,
{
    budget.validate()?;
    if r == 0 || r > MAX_IP_SEEDS {
        return Err(Error::Precondition(format!(
            "r must lie in 1..={MAX_IP_SEEDS}, got {r}"
        )));
    }
    if pool.is_empty() || pool.contains(&0) {
        return Err(Error::Precondition("the pool must be nonempty and free of zeros".into()));
    }
    let deadline = budget.deadline();
    let scan = scan_first(d_tuples(pool, r), budget.max_subsets, &deadline, |seeds| {
        let sums = subset_sums(seeds)?;
        Ok((!sums.iter().any(|&n| e(n))).then_some(()))
    })?;
    let (outcome, miss, checked) = match scan {
        Scan::Found { examined, item, .. } => (HitOutcome::Miss, Some(item), examined),
        Scan::Exhausted { examined } => (HitOutcome::AllHit, None, examined),
        Scan::BudgetHit { examined } => (HitOutcome::BudgetHit, None, examined),
    };
    Ok(HitReport {
        outcome,
        miss,
        tuples_checked: checked,
        elapsed_ms: deadline.elapsed_ms(),
    })
}

/// Largest `r` for which `S_r = {j * 2^(2^r) : 1 <= j <= r}` fits in `i128`.
pub const MAX_FOOTNOTE_R: u32 = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootnoteBlock {
    pub r: u32,
    pub scale: i128,
    pub elements: Vec<i128>,
}

/// Properties of `S = S_1 u ... u S_R`: each block is a dilation of
/// `{1, ..., r}`, contains the IP_r-set with all seeds equal to its scale,
/// and the gaps between consecutive elements of `S` never decrease.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootnoteReport {
    pub blocks: Vec<FootnoteBlock>,
    pub dilation: bool,
    pub contains_ip_r: bool,
    pub gaps_non_decreasing: bool,
    pub gaps: Vec<i128>,
}

pub fn footnote_blocks(max_r: u32) -> Result<Vec<FootnoteBlock>> {
    if max_r == 0 || max_r > MAX_FOOTNOTE_R {
        return Err(Error::Budget(format!(
            "footnote blocks are generated for 1 <= r <= {MAX_FOOTNOTE_R}, got {max_r}"
        )));
    }
    Ok((1..=max_r)
        .map(|r| {
            let scale = 1i128 << (1u32 << r);
            FootnoteBlock {
                r,
                scale,
                elements: (1..=r as i128).map(|j| j * scale).collect(),
            }
        })
        .collect())
}

pub fn footnote_report(max_r: u32) -> Result<FootnoteReport> {
    let blocks = footnote_blocks(max_r)?;
    let dilation = blocks.iter().all(|b| {
        b.scale == 2i128.pow(2u32.pow(b.r))
            && b.elements.iter().all(|x| x % b.scale == 0)
            && b.elements.iter().map(|x| x / b.scale).eq(1..=b.r as i128)
    });
    let mut contains_ip_r = true;
    for b in &blocks {
        let ip = build_ip_r(vec![b.scale; b.r as usize])?;
        let members: BTreeSet<i128> = b.elements.iter().copied().collect();
        contains_ip_r &= ip.sums.is_subset(&members);
    }
    let all: BTreeSet<i128> = blocks.iter().flat_map(|b| b.elements.iter().copied()).collect();
    let all: Vec<i128> = all.into_iter().collect();
    let gaps: Vec<i128> = all.windows(2).map(|w| w[1] - w[0]).collect();
    let gaps_non_decreasing = gaps.windows(2).all(|w| w[0] <= w[1]);
    Ok(FootnoteReport {
        blocks,
        dilation,
        contains_ip_r,
        gaps_non_decreasing,
        gaps,
    })
}
