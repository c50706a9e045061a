//! Generalized polynomials: expressions built from conventional polynomials
//! by addition, multiplication and the integer part `[x]` (floor).
//!
//! Height, width and degree are attributes of the given representation; no
//! search for a minimal representation is attempted. The width follows the
//! recursive rule: the number of components `sum_j (l_j + 1)` of the
//! expanded form, maximized with the widths of the bracketed components.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, format_q, Q};
use crate::setcore::FiniteSet;
use crate::setpoly::{check_within, SetMapping, SetPolynomial, Value, ValueGroup};

pub use crate::rational::fractional_norm;

/// A conventional multivariate polynomial with rational coefficients in the
/// variables `x1, x2, ...`. Monomials are exponent vectors without trailing
/// zeros; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Vec<u32>, Q>,
}

fn trim(mut e: Vec<u32>) -> Vec<u32> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Q) -> Self {
        Poly::from_terms([(vec![], c)])
    }

    /// The variable `x_i`, 1-based.
    pub fn var(i: usize) -> Self {
        assert!(i >= 1, "variables are numbered from 1");
        let mut e = vec![0; i];
        e[i - 1] = 1;
        Poly::from_terms([(e, Q::one())])
    }

    /// `c * x^k` in the first variable.
    pub fn monomial(c: Q, k: u32) -> Self {
        Poly::from_terms([(vec![k], c)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Vec<u32>, Q)>) -> Self {
        let mut out = Poly::zero();
        for (e, c) in terms {
            out.add_term(trim(e), c);
        }
        out
    }

    fn add_term(&mut self, e: Vec<u32>, c: Q) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Q {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.is_empty())
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Number of variables actually referenced (the largest index used).
    pub fn num_vars(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let n = e1.len().max(e2.len());
                let e: Vec<u32> = (0..n)
                    .map(|i| e1.get(i).unwrap_or(&0) + e2.get(i).unwrap_or(&0))
                    .collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Q) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(e, x)| (e.clone(), x * c)))
    }

    fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(Q::one()), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, n: &[Q]) -> Result<Q> {
        if n.len() < self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                found: n.len(),
            });
        }
        let mut acc = Q::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &k) in n.iter().zip(e) {
                t *= num::pow(x.clone(), k as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Substitutes `subs[i-1]` for `x_i`.
    pub fn compose(&self, subs: &[Poly]) -> Result<Poly> {
        if subs.len() < self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                found: subs.len(),
            });
        }
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            let mut t = Poly::constant(c.clone());
            for (p, &k) in subs.iter().zip(e) {
                t = t.mul(&p.pow(k));
            }
            out = out.add(&t);
        }
        Ok(out)
    }
}

fn monomial_name(e: &[u32]) -> String {
    if e.is_empty() {
        return "1".into();
    }
    let single = e.len() == 1;
    e.iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| {
            let v = if single { "x".to_string() } else { format!("x{}", i + 1) };
            if k == 1 {
                v
            } else {
                format!("{v}^{k}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// Parses `"1"`, `"x"`, `"x^3"`, `"x2"`, `"x1*x2^3"` into an exponent vector.
fn parse_monomial(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Parse(format!("not a monomial: {s:?}"));
    let s = s.trim();
    if s == "1" {
        return Ok(Vec::new());
    }
    let mut e: Vec<u32> = Vec::new();
    for factor in s.split('*') {
        let factor = factor.trim();
        let (var, pow) = match factor.split_once('^') {
            Some((v, p)) => (v.trim(), p.trim().parse::<u32>().map_err(|_| bad())?),
            None => (factor, 1),
        };
        let idx = match var.strip_prefix('x') {
            Some("") => 1,
            Some(digits) => digits.parse::<usize>().map_err(|_| bad())?,
            None => return Err(bad()),
        };
        if idx == 0 {
            return Err(bad());
        }
        if e.len() < idx {
            e.resize(idx, 0);
        }
        e[idx - 1] += pow;
    }
    Ok(trim(e))
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // highest degree first reads naturally
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then(b.0.cmp(a.0))
        });
        for (i, (e, c)) in terms.into_iter().enumerate() {
            let negative = *c < Q::zero();
            let abs = if negative { -c.clone() } else { c.clone() };
            if i == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { "-" } else { "+" })?;
            }
            if e.is_empty() {
                f.write_str(&format_q(&abs))?;
            } else if abs.is_one() {
                f.write_str(&monomial_name(e))?;
            } else {
                write!(f, "{}*{}", format_q(&abs), monomial_name(e))?;
            }
        }
        Ok(())
    }
}

/// A generalized polynomial expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GenPoly {
    Poly(Poly),
    Sum(Vec<GenPoly>),
    Prod(Vec<GenPoly>),
    Bracket(Box<GenPoly>),
}

/// Height, width and degree of a representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GPAttributes {
    pub h: u32,
    pub w: u32,
    pub d: u32,
}

/// One summand `[phi_1] ... [phi_l] * phi_0` of the expanded form.
/// `closed` holds the bracketed components `phi_1, ..., phi_l` (without the
/// brackets); `open` is `phi_0`, or `None` for a pure product of brackets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summand {
    pub closed: Vec<GenPoly>,
    pub open: Option<Poly>,
}

impl Summand {
    pub fn eval(&self, n: &[Q]) -> Result<Q> {
        let mut acc = match &self.open {
            Some(p) => p.eval(n)?,
            None => Q::one(),
        };
        for c in &self.closed {
            acc *= rational::floor(&c.eval(n)?);
        }
        Ok(acc)
    }

    pub fn to_genpoly(&self) -> GenPoly {
        let mut factors: Vec<GenPoly> = self
            .closed
            .iter()
            .map(|c| GenPoly::Bracket(Box::new(c.clone())))
            .collect();
        if let Some(p) = &self.open {
            factors.push(GenPoly::Poly(p.clone()));
        }
        match factors.len() {
            0 => GenPoly::Poly(Poly::constant(Q::one())),
            1 => factors.pop().expect("one factor"),
            _ => GenPoly::Prod(factors),
        }
    }
}

/// `phi = sum_j [phi_{j,1}] ... [phi_{j,l_j}] phi_{j,0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    pub summands: Vec<Summand>,
}

impl NormalForm {
    pub fn eval(&self, n: &[Q]) -> Result<Q> {
        let mut acc = Q::zero();
        for s in &self.summands {
            acc += s.eval(n)?;
        }
        Ok(acc)
    }

    pub fn to_genpoly(&self) -> GenPoly {
        match self.summands.len() {
            0 => GenPoly::Poly(Poly::zero()),
            1 => self.summands[0].to_genpoly(),
            _ => GenPoly::Sum(self.summands.iter().map(Summand::to_genpoly).collect()),
        }
    }
}

/// Expands products over sums. Summands with an open factor and equal
/// bracket lists are merged by adding their open factors; pure bracket
/// products are kept apart so that they stay visible as closed summands.
fn expand(gp: &GenPoly) -> Vec<Summand> {
    match gp {
        GenPoly::Poly(p) => {
            if p.is_zero() {
                Vec::new()
            } else {
                vec![Summand {
                    closed: Vec::new(),
                    open: Some(p.clone()),
                }]
            }
        }
        GenPoly::Bracket(inner) => vec![Summand {
            closed: vec![(**inner).clone()],
            open: None,
        }],
        GenPoly::Sum(args) => merge(args.iter().flat_map(expand).collect()),
        GenPoly::Prod(args) => {
            let mut acc = vec![Summand {
                closed: Vec::new(),
                open: None,
            }];
            for a in args {
                let rhs = expand(a);
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for x in &acc {
                    for y in &rhs {
                        let mut closed = x.closed.clone();
                        closed.extend(y.closed.iter().cloned());
                        closed.sort();
                        let open = match (&x.open, &y.open) {
                            (None, o) | (o, None) => o.clone(),
                            (Some(p), Some(q)) => Some(p.mul(q)),
                        };
                        next.push(Summand { closed, open });
                    }
                }
                acc = next;
            }
            merge(acc)
        }
    }
}

fn merge(summands: Vec<Summand>) -> Vec<Summand> {
    let mut open: BTreeMap<Vec<GenPoly>, Poly> = BTreeMap::new();
    let mut order: Vec<Vec<GenPoly>> = Vec::new();
    let mut out = Vec::new();
    for s in summands {
        match s.open {
            Some(p) => {
                if !open.contains_key(&s.closed) {
                    order.push(s.closed.clone());
                }
                let slot = open.entry(s.closed).or_default();
                *slot = slot.add(&p);
            }
            None => out.push(s),
        }
    }
    let mut merged: Vec<Summand> = order
        .into_iter()
        .filter_map(|closed| {
            let p = open.remove(&closed).expect("recorded key");
            (!p.is_zero()).then_some(Summand {
                closed,
                open: Some(p),
            })
        })
        .collect();
    merged.extend(out);
    merged
}

impl GenPoly {
    pub fn poly(p: Poly) -> Self {
        GenPoly::Poly(p)
    }

    pub fn bracket(g: GenPoly) -> Self {
        GenPoly::Bracket(Box::new(g))
    }

    /// Largest variable index referenced by any leaf.
    pub fn num_vars(&self) -> usize {
        match self {
            GenPoly::Poly(p) => p.num_vars(),
            GenPoly::Sum(a) | GenPoly::Prod(a) => a.iter().map(GenPoly::num_vars).max().unwrap_or(0),
            GenPoly::Bracket(g) => g.num_vars(),
        }
    }

    /// Exact value at a rational point; brackets are floors.
    pub fn eval(&self, n: &[Q]) -> Result<Q> {
        match self {
            GenPoly::Poly(p) => p.eval(n),
            GenPoly::Sum(args) => args.iter().try_fold(Q::zero(), |acc, a| Ok(acc + a.eval(n)?)),
            GenPoly::Prod(args) => args.iter().try_fold(Q::one(), |acc, a| Ok(acc * a.eval(n)?)),
            GenPoly::Bracket(g) => Ok(rational::floor(&g.eval(n)?)),
        }
    }

    /// Value at an integer vector.
    pub fn eval_int(&self, n: &[i64]) -> Result<Q> {
        let n: Vec<Q> = n.iter().map(|&k| rational::int(k)).collect();
        self.eval(&n)
    }

    pub fn height(&self) -> u32 {
        match self {
            GenPoly::Poly(_) => 0,
            GenPoly::Sum(a) | GenPoly::Prod(a) => a.iter().map(GenPoly::height).max().unwrap_or(0),
            GenPoly::Bracket(g) => 1 + g.height(),
        }
    }

    pub fn attributes(&self) -> GPAttributes {
        let summands = expand(self);
        let mut w: u32 = summands.iter().map(|s| s.closed.len() as u32 + 1).sum();
        let mut d = 0;
        for s in &summands {
            let mut deg = s.open.as_ref().map_or(0, Poly::degree);
            for c in &s.closed {
                let a = c.attributes();
                w = w.max(a.w);
                deg += a.d;
            }
            d = d.max(deg);
        }
        GPAttributes {
            h: self.height(),
            w: w.max(1),
            d,
        }
    }

    pub fn is_constant_free(&self) -> bool {
        self.first_constant_leaf().is_none()
    }

    fn first_constant_leaf(&self) -> Option<&Poly> {
        match self {
            GenPoly::Poly(p) => (!p.constant_term().is_zero()).then_some(p),
            GenPoly::Sum(a) | GenPoly::Prod(a) => a.iter().find_map(GenPoly::first_constant_leaf),
            GenPoly::Bracket(g) => g.first_constant_leaf(),
        }
    }

    /// No summand of the expanded top level is a pure product of brackets.
    pub fn is_open(&self) -> bool {
        expand(self).iter().all(|s| s.open.is_some())
    }

    pub fn to_normal_form(&self) -> Result<NormalForm> {
        if let Some(leaf) = self.first_constant_leaf() {
            return Err(Error::Classification(format!(
                "not constant-free: the polynomial {leaf} has a nonzero constant term"
            )));
        }
        let summands = expand(self);
        if let Some(s) = summands.iter().find(|s| s.open.is_none()) {
            return Err(Error::Classification(format!(
                "not open: closed summand {}",
                s.to_genpoly()
            )));
        }
        Ok(NormalForm { summands })
    }

    /// Substitutes `subs[i-1]` for `x_i` in every leaf.
    pub fn substitute(&self, subs: &[Poly]) -> Result<GenPoly> {
        Ok(match self {
            GenPoly::Poly(p) => GenPoly::Poly(p.compose(subs)?),
            GenPoly::Sum(a) => GenPoly::Sum(a.iter().map(|g| g.substitute(subs)).collect::<Result<_>>()?),
            GenPoly::Prod(a) => GenPoly::Prod(a.iter().map(|g| g.substitute(subs)).collect::<Result<_>>()?),
            GenPoly::Bracket(g) => GenPoly::bracket(g.substitute(subs)?),
        })
    }
}

impl fmt::Display for GenPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenPoly::Poly(p) => write!(f, "{p}"),
            GenPoly::Sum(args) => {
                for (i, a) in args.iter().enumerate() {
                    let part = a.to_string();
                    if i > 0 && !part.starts_with('-') {
                        f.write_str("+")?;
                    }
                    f.write_str(&part)?;
                }
                Ok(())
            }
            GenPoly::Prod(args) => {
                let minus_one = GenPoly::Poly(Poly::constant(-Q::one()));
                let args = match args.split_first() {
                    Some((first, rest)) if *first == minus_one && !rest.is_empty() => {
                        f.write_str("-")?;
                        rest
                    }
                    _ => &args[..],
                };
                for a in args {
                    let needs_parens = match a {
                        GenPoly::Sum(v) => v.len() > 1,
                        GenPoly::Poly(p) => p.terms.len() > 1,
                        _ => false,
                    };
                    if needs_parens {
                        write!(f, "({a})")?;
                    } else {
                        write!(f, "{a}")?;
                    }
                }
                Ok(())
            }
            GenPoly::Bracket(g) => write!(f, "[{g}]"),
        }
    }
}

// JSON: {"op":"poly","coeffs":{"x^2":"1","1":"1"}} | {"op":"sum","args":[..]}
// | {"op":"prod","args":[..]} | {"op":"bracket","arg":..}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct QJson(#[serde(with = "rational::serde_q")] Q);

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
enum GenPolyJson {
    Poly { coeffs: BTreeMap<String, QJson> },
    Sum { args: Vec<GenPoly> },
    Prod { args: Vec<GenPoly> },
    Bracket { arg: Box<GenPoly> },
}

impl Serialize for GenPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let json = match self {
            GenPoly::Poly(p) => GenPolyJson::Poly {
                coeffs: p
                    .terms
                    .iter()
                    .map(|(e, c)| (monomial_name(e), QJson(c.clone())))
                    .collect(),
            },
            GenPoly::Sum(a) => GenPolyJson::Sum { args: a.clone() },
            GenPoly::Prod(a) => GenPolyJson::Prod { args: a.clone() },
            GenPoly::Bracket(g) => GenPolyJson::Bracket { arg: g.clone() },
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GenPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match GenPolyJson::deserialize(d)? {
            GenPolyJson::Poly { coeffs } => {
                let mut terms = Vec::with_capacity(coeffs.len());
                for (m, c) in coeffs {
                    terms.push((parse_monomial(&m).map_err(D::Error::custom)?, c.0));
                }
                GenPoly::Poly(Poly::from_terms(terms))
            }
            GenPolyJson::Sum { args } => GenPoly::Sum(args),
            GenPolyJson::Prod { args } => GenPoly::Prod(args),
            GenPolyJson::Bracket { arg } => GenPoly::Bracket(arg),
        })
    }
}

/// The mapping `alpha -> gp(phi(alpha))` on `F([r])` for an integer-vector
/// valued set-polynomial `phi`.
#[derive(Clone, Debug)]
pub struct ComposedMap {
    gp: GenPoly,
    phi: SetPolynomial,
}

pub fn compose(gp: &GenPoly, phi: &SetPolynomial) -> Result<ComposedMap> {
    let l = match phi.value_group() {
        ValueGroup::IntegerVectors(l) => l,
        ValueGroup::Integers => 1,
        other => {
            return Err(Error::Domain(format!(
                "composition needs integer-vector values, got {other:?}"
            )))
        }
    };
    if gp.num_vars() > l {
        return Err(Error::DimensionMismatch {
            expected: gp.num_vars(),
            found: l,
        });
    }
    Ok(ComposedMap {
        gp: gp.clone(),
        phi: phi.clone(),
    })
}

impl ComposedMap {
    pub fn genpoly(&self) -> &GenPoly {
        &self.gp
    }

    pub fn inner(&self) -> &SetPolynomial {
        &self.phi
    }

    /// `d(gp) * deg(phi)`, an upper bound for the degree of the composition
    /// as a generalized polynomial in the indicator variables.
    pub fn degree_bound(&self) -> u32 {
        self.gp.attributes().d * self.phi.degree() as u32
    }

    pub fn eval(&self, alpha: &FiniteSet) -> Result<Q> {
        let v = self.phi.eval(alpha)?;
        self.gp.eval(&v.0)
    }

    /// The composition as a generalized polynomial in the indicator
    /// variables `y_1, ..., y_r`: each coordinate of `phi` becomes
    /// `sum_u Phi(u) prod_{a in u} y_a`. Evaluating at the indicator vector
    /// of `alpha` gives the value at `alpha`.
    pub fn representation(&self) -> Result<GenPoly> {
        let l = self.phi.value_group().dim();
        let mut coords = vec![Poly::zero(); l];
        for (u, v) in self.phi.tprod().entries() {
            let mut e = vec![0u32; u.max().unwrap_or(0) as usize];
            for a in u.iter() {
                e[a as usize - 1] = 1;
            }
            for (coord, c) in coords.iter_mut().zip(&v.0) {
                *coord = coord.add(&Poly::from_terms([(e.clone(), c.clone())]));
            }
        }
        self.gp.substitute(&coords)
    }
}

impl SetMapping for ComposedMap {
    fn ground(&self) -> &FiniteSet {
        self.phi.ground()
    }
    fn group(&self) -> ValueGroup {
        ValueGroup::Rationals
    }
    fn apply(&self, alpha: &FiniteSet) -> Result<Value> {
        check_within(alpha, self.phi.ground())?;
        Ok(Value::scalar(self.eval(alpha)?))
    }
}
