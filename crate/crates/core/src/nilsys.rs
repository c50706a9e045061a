//! Concrete nilsystems: rotations and affine skew products of tori, the
//! Heisenberg nilmanifold in Mal'cev coordinates, and polynomial sequences
//! of Heisenberg elements, with orbits, return sets and recurrence probes.
//!
//! Every computation is generic over [`Scalar`]: exact rationals (`Q`) or
//! `f64` ("float mode", for irrational parameters). Float-mode return sets
//! carry an estimate of the accumulated rounding error.
//!
//! Conventions for the Heisenberg group: `(x,y,z)(x',y',z') =
//! (x+x', y+y', z+z'+xy')`, the upper unipotent matrices
//! `[[1,x,z],[0,1,y],[0,0,1]]`. Points of the nilmanifold are cosets `Γg` of
//! the integer lattice; a coset is represented by the unique `q` with
//! coordinates in `[0,1)^3` and `g = γq`, found by reducing `x`, then `y`,
//! then `z`. Translations act on the right: the orbit of `Γh` under `T` is
//! `Γ h T^n`.
//!
//! The metric on the nilmanifold is the maximum of circle distances between
//! Mal'cev coordinates. It is not the quotient of a left-invariant metric on
//! the group, but near the base point it is comparable with any such metric,
//! which is all that recurrence to the base point needs.

use std::collections::HashSet;
use std::fmt;

use num::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genpoly::{GenPoly, Poly};
use crate::rational::{self, format_q, parse_q, Q};
use crate::search::{scan_first, HitOutcome, Outcome, Scan, SearchBudget, WitnessReport};
use crate::setcore::{subsets_of, FiniteSet};
use crate::setpoly::{SetMapping, SetPolynomial, ValueGroup};

/// Real numbers as used by the dynamics: exact rationals or floats.
pub trait Scalar: Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    const EXACT: bool;
    fn from_q(q: &Q) -> Self;
    fn from_i64(n: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn floor(&self) -> Self;
    /// `x - [x]`, in `[0, 1)`.
    fn fract(&self) -> Self;
    fn to_f64(&self) -> f64;
    fn to_text(&self) -> String;
    /// Parses a parameter; float mode also accepts `sqrt(k)`.
    fn parse(text: &str) -> Result<Self>;

    fn zero() -> Self {
        Self::from_i64(0)
    }
    fn neg(&self) -> Self {
        Self::zero().sub(self)
    }
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for Q {
    const EXACT: bool = true;
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn from_i64(n: i64) -> Self {
        rational::int(n)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn floor(&self) -> Self {
        rational::floor(self)
    }
    fn fract(&self) -> Self {
        rational::fract(self)
    }
    fn to_f64(&self) -> f64 {
        rational::to_f64(self)
    }
    fn to_text(&self) -> String {
        format_q(self)
    }
    fn parse(text: &str) -> Result<Self> {
        parse_q(text).map_err(|e| {
            if text.contains("sqrt") {
                Error::Parse(format!("{text:?} is irrational; use float mode"))
            } else {
                e
            }
        })
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn from_q(q: &Q) -> Self {
        rational::to_f64(q)
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn fract(&self) -> Self {
        let f = self - f64::floor(*self);
        // rounding can push a tiny negative input to exactly 1.0
        if f >= 1.0 {
            0.0
        } else {
            f
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_text(&self) -> String {
        format!("{self}")
    }
    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(inner) = t.strip_prefix("sqrt(").and_then(|s| s.strip_suffix(')')) {
            let v = rational::to_f64(&parse_q(inner)?);
            if v < 0.0 {
                return Err(Error::Parse(format!("negative radicand in {text:?}")));
            }
            return Ok(v.sqrt());
        }
        Ok(rational::to_f64(&parse_q(t)?))
    }
}

/// `min({p - q}, 1 - {p - q})`.
pub fn circle_distance<S: Scalar>(p: &S, q: &S) -> S {
    let d = p.sub(q).fract();
    let e = S::from_i64(1).sub(&d);
    if d <= e {
        d
    } else {
        e
    }
}

fn max_scalar<S: Scalar>(it: impl Iterator<Item = S>) -> S {
    it.fold(S::zero(), |m, x| if x > m { x } else { m })
}

/// A point of `T^k`, coordinates reduced into `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint<S> {
    coords: Vec<S>,
}

impl<S: Scalar> TorusPoint<S> {
    pub fn new(coords: Vec<S>) -> Self {
        TorusPoint {
            coords: coords.iter().map(Scalar::fract).collect(),
        }
    }

    pub fn origin(k: usize) -> Self {
        TorusPoint {
            coords: vec![S::zero(); k],
        }
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Maximum over coordinates of the circle distance.
pub fn torus_metric<S: Scalar>(p: &TorusPoint<S>, q: &TorusPoint<S>) -> Result<S> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(max_scalar(
        p.coords.iter().zip(&q.coords).map(|(a, b)| circle_distance(a, b)),
    ))
}

/// `T(x)_i = x_i + sum_{j<i} a_{ij} x_j + alpha_i (mod 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSkew<S> {
    alpha: Vec<S>,
    /// Row `i` holds `a_{i,0..i}`.
    lower: Vec<Vec<i64>>,
}

impl<S: Scalar> AffineSkew<S> {
    /// `a` may be a full `k x k` matrix (zero on and above the diagonal) or
    /// ragged rows of lengths `0, 1, ..., k-1`; an empty `a` means no coupling.
    pub fn new(alpha: Vec<S>, a: Vec<Vec<i64>>) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(Error::Domain("a torus needs dimension at least 1".into()));
        }
        let lower = if a.is_empty() {
            (0..k).map(|i| vec![0; i]).collect()
        } else {
            if a.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: a.len(),
                });
            }
            let mut rows = Vec::with_capacity(k);
            for (i, row) in a.into_iter().enumerate() {
                if row.len() == k {
                    if row[i..].iter().any(|&c| c != 0) {
                        return Err(Error::Domain(format!(
                            "coefficient row {} must vanish on and above the diagonal",
                            i + 1
                        )));
                    }
                    rows.push(row[..i].to_vec());
                } else if row.len() == i {
                    rows.push(row);
                } else {
                    return Err(Error::Domain(format!(
                        "coefficient row {} has length {}, expected {i} or {k}",
                        i + 1,
                        row.len()
                    )));
                }
            }
            rows
        };
        Ok(AffineSkew {
            alpha: alpha.iter().map(Scalar::fract).collect(),
            lower,
        })
    }

    pub fn rotation(alpha: Vec<S>) -> Result<Self> {
        Self::new(alpha, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_rotation(&self) -> bool {
        self.lower.iter().all(|r| r.iter().all(|&c| c == 0))
    }

    fn check(&self, x: &TorusPoint<S>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn coupling(&self, i: usize, x: &[S]) -> S {
        self.lower[i]
            .iter()
            .zip(x)
            .fold(S::zero(), |acc, (&a, xj)| acc.add(&S::from_i64(a).mul(xj)))
    }

    pub fn step(&self, x: &TorusPoint<S>) -> Result<TorusPoint<S>> {
        self.check(x)?;
        let coords = (0..self.dim())
            .map(|i| {
                x.coords[i]
                    .add(&self.coupling(i, &x.coords))
                    .add(&self.alpha[i])
                    .fract()
            })
            .collect();
        Ok(TorusPoint { coords })
    }

    /// Solves `T(x) = y` coordinate by coordinate.
    pub fn inverse_step(&self, y: &TorusPoint<S>) -> Result<TorusPoint<S>> {
        self.check(y)?;
        let mut x: Vec<S> = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let xi = y.coords[i]
                .sub(&self.alpha[i])
                .sub(&self.coupling(i, &x))
                .fract();
            x.push(xi);
        }
        Ok(TorusPoint { coords: x })
    }

    /// `T^n x`; negative `n` iterates the inverse.
    pub fn iterate(&self, x: &TorusPoint<S>, n: i64) -> Result<TorusPoint<S>> {
        let mut p = x.clone();
        for _ in 0..n.unsigned_abs() {
            p = if n > 0 {
                self.step(&p)?
            } else {
                self.inverse_step(&p)?
            };
        }
        self.check(&p)?;
        Ok(p)
    }
}

pub fn skew_step<S: Scalar>(t: &AffineSkew<S>, x: &TorusPoint<S>) -> Result<TorusPoint<S>> {
    t.step(x)
}

pub fn skew_iterate<S: Scalar>(t: &AffineSkew<S>, x: &TorusPoint<S>, n: i64) -> Result<TorusPoint<S>> {
    t.iterate(x, n)
}

/// An element of the Heisenberg group.
#[derive(Clone, Debug, PartialEq)]
pub struct Heisenberg<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Heisenberg<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Heisenberg { x, y, z }
    }

    pub fn identity() -> Self {
        Heisenberg::new(S::zero(), S::zero(), S::zero())
    }

    pub fn mul(&self, h: &Self) -> Self {
        Heisenberg {
            x: self.x.add(&h.x),
            y: self.y.add(&h.y),
            z: self.z.add(&h.z).add(&self.x.mul(&h.y)),
        }
    }

    pub fn inverse(&self) -> Self {
        Heisenberg {
            x: self.x.neg(),
            y: self.y.neg(),
            z: self.z.neg().add(&self.x.mul(&self.y)),
        }
    }

    /// `(nx, ny, nz + C(n,2) xy)`.
    pub fn pow(&self, n: i64) -> Self {
        let nn = S::from_i64(n);
        let c2 = S::from_q(&Q::new((n as i128 * (n as i128 - 1) / 2).into(), 1.into()));
        Heisenberg {
            x: nn.mul(&self.x),
            y: nn.mul(&self.y),
            z: nn.mul(&self.z).add(&c2.mul(&self.x.mul(&self.y))),
        }
    }

    /// `g^n` by repeated squaring with [`Heisenberg::mul`] only; an
    /// independent route to [`Heisenberg::pow`].
    pub fn pow_by_squaring(&self, n: i64) -> Self {
        let mut base = if n < 0 { self.inverse() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    fn magnitude(&self) -> f64 {
        self.x.abs_f64().max(self.y.abs_f64()).max(self.z.abs_f64())
    }
}

pub fn heis_mul<S: Scalar>(g: &Heisenberg<S>, h: &Heisenberg<S>) -> Heisenberg<S> {
    g.mul(h)
}

pub fn heis_pow<S: Scalar>(g: &Heisenberg<S>, n: i64) -> Heisenberg<S> {
    g.pow(n)
}

/// A point of the Heisenberg nilmanifold in Mal'cev coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NilPoint<S> {
    pub malcev: [S; 3],
}

impl<S: Scalar> NilPoint<S> {
    pub fn as_element(&self) -> Heisenberg<S> {
        let [x, y, z] = self.malcev.clone();
        Heisenberg::new(x, y, z)
    }
}

/// Factors `g = γ q` with `γ` in the integer lattice and `q` in `[0,1)^3`.
pub fn malcev_reduce<S: Scalar>(g: &Heisenberg<S>) -> (NilPoint<S>, Heisenberg<S>) {
    let a = g.x.floor();
    let qx = g.x.sub(&a);
    let b = g.y.floor();
    let qy = g.y.sub(&b);
    let w = g.z.sub(&a.mul(&qy));
    let c = w.floor();
    let qz = w.sub(&c);
    (
        NilPoint {
            malcev: [qx.fract(), qy.fract(), qz.fract()],
        },
        Heisenberg::new(a, b, c),
    )
}

pub fn nil_metric<S: Scalar>(p: &NilPoint<S>, q: &NilPoint<S>) -> S {
    max_scalar(
        p.malcev
            .iter()
            .zip(&q.malcev)
            .map(|(a, b)| circle_distance(a, b)),
    )
}

/// Generalized polynomials in `n` for the Mal'cev coordinates of `T^n Γ`
/// with `T = (a, b, c)`:
/// `{an}`, `{bn}` and `{Z}` with
/// `Z = cn + (ab/2)n^2 - (ab/2)n - [an](bn) + [an][bn]`.
pub fn heisenberg_coordinate_genpolys(t: &Heisenberg<Q>) -> [GenPoly; 3] {
    let lin = |c: &Q| GenPoly::Poly(Poly::monomial(c.clone(), 1));
    let frac = |g: GenPoly| {
        GenPoly::Sum(vec![
            g.clone(),
            GenPoly::Prod(vec![
                GenPoly::Poly(Poly::constant(rational::int(-1))),
                GenPoly::bracket(g),
            ]),
        ])
    };
    let half_ab = &t.x * &t.y / rational::int(2);
    let an = lin(&t.x);
    let bn = lin(&t.y);
    let z = GenPoly::Sum(vec![
        GenPoly::Poly(Poly::from_terms([
            (vec![1], &t.z - &half_ab),
            (vec![2], half_ab.clone()),
        ])),
        GenPoly::Prod(vec![
            GenPoly::Poly(Poly::constant(rational::int(-1))),
            GenPoly::bracket(an.clone()),
            bn.clone(),
        ]),
        GenPoly::Prod(vec![GenPoly::bracket(an.clone()), GenPoly::bracket(bn.clone())]),
    ]);
    [frac(an), frac(bn), frac(z)]
}

/// `g(n) = T_1^{p_1(n)} ... T_b^{p_b(n)}` for `n` in `Z^l`.
///
/// Exponents are generalized polynomials; conventional ones with zero
/// constant term are the standard case. Bracketed exponents are accepted
/// only when `allow_general` is set (an experimental extension, without
/// any claimed parameter bounds). Exponents must take integer values at
/// integer points; this is checked at evaluation.
#[derive(Clone, Debug)]
pub struct PolySequence<S> {
    generators: Vec<Heisenberg<S>>,
    exponents: Vec<GenPoly>,
    vars: usize,
}

impl<S: Scalar> PolySequence<S> {
    pub fn new(
        generators: Vec<Heisenberg<S>>,
        exponents: Vec<GenPoly>,
        vars: usize,
        allow_general: bool,
    ) -> Result<Self> {
        if generators.len() != exponents.len() {
            return Err(Error::DimensionMismatch {
                expected: generators.len(),
                found: exponents.len(),
            });
        }
        if vars == 0 {
            return Err(Error::Domain("a polynomial sequence needs at least one variable".into()));
        }
        for p in &exponents {
            if p.num_vars() > vars {
                return Err(Error::DimensionMismatch {
                    expected: vars,
                    found: p.num_vars(),
                });
            }
            if !p.is_constant_free() {
                return Err(Error::Domain(format!("exponent {p} has a constant term")));
            }
            if p.height() > 0 && !allow_general {
                return Err(Error::Domain(format!(
                    "exponent {p} is a generalized polynomial; enable general exponents"
                )));
            }
        }
        Ok(PolySequence {
            generators,
            exponents,
            vars,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// `max_i deg p_i` (for bracketed exponents, their degree attribute).
    pub fn naive_degree(&self) -> u32 {
        self.exponents.iter().map(|p| p.attributes().d).max().unwrap_or(0)
    }

    pub fn exponent_values(&self, n: &[i64]) -> Result<Vec<i64>> {
        if n.len() != self.vars {
            return Err(Error::DimensionMismatch {
                expected: self.vars,
                found: n.len(),
            });
        }
        self.exponents
            .iter()
            .map(|p| rational::to_i64(&p.eval_int(n)?))
            .collect()
    }

    pub fn eval(&self, n: &[i64]) -> Result<Heisenberg<S>> {
        let e = self.exponent_values(n)?;
        Ok(self
            .generators
            .iter()
            .zip(e)
            .fold(Heisenberg::identity(), |acc, (t, k)| acc.mul(&t.pow(k))))
    }

    fn eval_by_squaring(&self, n: &[i64]) -> Result<Heisenberg<S>> {
        let e = self.exponent_values(n)?;
        Ok(self
            .generators
            .iter()
            .zip(e)
            .fold(Heisenberg::identity(), |acc, (t, k)| acc.mul(&t.pow_by_squaring(k))))
    }
}

pub fn poly_sequence_eval<S: Scalar>(g: &PolySequence<S>, n: &[i64]) -> Result<Heisenberg<S>> {
    g.eval(n)
}

/// A system with a base point whose returns can be measured: `n` maps to
/// the distance between the orbit point at time `n` and the base point.
pub trait Recurrent<S: Scalar>: Sync {
    /// Number of time variables `l` (orbits are indexed by `Z^l`).
    fn time_dim(&self) -> usize;
    fn describe(&self) -> String;
    fn base_point(&self) -> Vec<S>;
    /// Coordinates of the orbit point at time `n`.
    fn point(&self, n: &[i64]) -> Result<Vec<S>>;
    fn displacement(&self, n: &[i64]) -> Result<S>;
    /// The same quantity computed along a different route, for
    /// re-verification of witnesses.
    fn displacement_check(&self, n: &[i64]) -> Result<S> {
        self.displacement(n)
    }
    /// Displacements over the box `[-N, N]^l`, in lexicographic order of `n`.
    fn displacements(&self, horizon: u64) -> Result<Vec<(Vec<i64>, S)>> {
        let pts = box_points(self.time_dim(), horizon)?;
        pts.into_par_iter()
            .map(|n| {
                let d = self.displacement(&n)?;
                Ok((n, d))
            })
            .collect()
    }
    /// Estimated absolute rounding error of float-mode displacements over
    /// the box `[-N, N]^l`.
    fn float_error_bound(&self, horizon: u64) -> f64;
}

/// Largest number of points a return-set box may hold.
pub const MAX_BOX_POINTS: u64 = 1 << 24;

fn box_points(l: usize, horizon: u64) -> Result<Vec<Vec<i64>>> {
    let side = 2 * horizon + 1;
    let total = (side as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if total > MAX_BOX_POINTS as u128 {
        return Err(Error::Budget(format!(
            "the box [-{horizon},{horizon}]^{l} has more than {MAX_BOX_POINTS} points"
        )));
    }
    let axis: Vec<i64> = (-(horizon as i64)..=horizon as i64).collect();
    Ok(crate::setcore::d_tuples(&axis, l).collect())
}

/// The orbit of a point under an affine skew product.
pub struct SkewOrbit<S> {
    pub system: AffineSkew<S>,
    pub x0: TorusPoint<S>,
}

impl<S: Scalar> SkewOrbit<S> {
    pub fn new(system: AffineSkew<S>, x0: TorusPoint<S>) -> Result<Self> {
        system.check(&x0)?;
        Ok(SkewOrbit { system, x0 })
    }
}

impl<S: Scalar> Recurrent<S> for SkewOrbit<S> {
    fn time_dim(&self) -> usize {
        1
    }

    fn describe(&self) -> String {
        let alpha: Vec<String> = self.system.alpha.iter().map(Scalar::to_text).collect();
        format!("skew k={} alpha=({})", self.system.dim(), alpha.join(","))
    }

    fn base_point(&self) -> Vec<S> {
        self.x0.coords.clone()
    }

    fn point(&self, n: &[i64]) -> Result<Vec<S>> {
        Ok(self.system.iterate(&self.x0, n[0])?.coords)
    }

    fn displacement(&self, n: &[i64]) -> Result<S> {
        let p = self.system.iterate(&self.x0, n[0])?;
        torus_metric(&p, &self.x0)
    }

    fn displacement_check(&self, n: &[i64]) -> Result<S> {
        // walk there in two legs
        let half = n[0] / 2;
        let p = self.system.iterate(&self.x0, half)?;
        let p = self.system.iterate(&p, n[0] - half)?;
        torus_metric(&p, &self.x0)
    }

    /// Incremental orbit in both directions: `O(N)` steps in total.
    fn displacements(&self, horizon: u64) -> Result<Vec<(Vec<i64>, S)>> {
        let mut back = Vec::with_capacity(horizon as usize);
        let mut p = self.x0.clone();
        for n in 1..=horizon as i64 {
            p = self.system.inverse_step(&p)?;
            back.push((vec![-n], torus_metric(&p, &self.x0)?));
        }
        back.reverse();
        back.push((vec![0], S::zero()));
        let mut p = self.x0.clone();
        for n in 1..=horizon as i64 {
            p = self.system.step(&p)?;
            back.push((vec![n], torus_metric(&p, &self.x0)?));
        }
        Ok(back)
    }

    fn float_error_bound(&self, horizon: u64) -> f64 {
        // each coordinate sums the errors of the ones it is coupled to, so
        // coordinate i accumulates O((A N)^i) roundings
        let k = self.system.dim() as i32;
        let a = self
            .system
            .lower
            .iter()
            .map(|r| r.iter().map(|c| c.unsigned_abs() as f64).sum::<f64>())
            .fold(0.0, f64::max);
        let n = horizon.max(1) as f64;
        4.0 * f64::EPSILON * n.powi(k) * (1.0 + a).powi(k - 1)
    }
}

/// The orbit of `Γh` under right translation by `T`.
pub struct NilOrbit<S> {
    pub t: Heisenberg<S>,
    pub x0: Heisenberg<S>,
    base: NilPoint<S>,
}

impl<S: Scalar> NilOrbit<S> {
    pub fn new(t: Heisenberg<S>, x0: Heisenberg<S>) -> Self {
        let base = malcev_reduce(&x0).0;
        NilOrbit { t, x0, base }
    }

    pub fn coset(&self, n: i64) -> NilPoint<S> {
        malcev_reduce(&self.x0.mul(&self.t.pow(n))).0
    }
}

impl<S: Scalar> Recurrent<S> for NilOrbit<S> {
    fn time_dim(&self) -> usize {
        1
    }

    fn describe(&self) -> String {
        format!(
            "heisenberg t=({},{},{})",
            self.t.x.to_text(),
            self.t.y.to_text(),
            self.t.z.to_text()
        )
    }

    fn base_point(&self) -> Vec<S> {
        self.base.malcev.to_vec()
    }

    fn point(&self, n: &[i64]) -> Result<Vec<S>> {
        Ok(self.coset(n[0]).malcev.to_vec())
    }

    fn displacement(&self, n: &[i64]) -> Result<S> {
        Ok(nil_metric(&self.coset(n[0]), &self.base))
    }

    fn displacement_check(&self, n: &[i64]) -> Result<S> {
        let g = self.x0.mul(&self.t.pow_by_squaring(n[0]));
        Ok(nil_metric(&malcev_reduce(&g).0, &self.base))
    }

    fn float_error_bound(&self, horizon: u64) -> f64 {
        let n = horizon.max(1) as f64;
        let t = &self.t;
        let growth = 1.0
            + self.x0.magnitude()
            + n * (t.x.abs_f64() + t.y.abs_f64() + t.z.abs_f64())
            + n * n * (t.x.abs_f64() * t.y.abs_f64())
            + n * self.x0.x.abs_f64() * t.y.abs_f64();
        8.0 * f64::EPSILON * growth
    }
}

/// The orbit `Γ h g(n)` of a polynomial sequence.
pub struct PolySeqOrbit<S> {
    pub seq: PolySequence<S>,
    pub x0: Heisenberg<S>,
    base: NilPoint<S>,
}

impl<S: Scalar> PolySeqOrbit<S> {
    pub fn new(seq: PolySequence<S>, x0: Heisenberg<S>) -> Self {
        let base = malcev_reduce(&x0).0;
        PolySeqOrbit { seq, x0, base }
    }
}

impl<S: Scalar> Recurrent<S> for PolySeqOrbit<S> {
    fn time_dim(&self) -> usize {
        self.seq.vars
    }

    fn describe(&self) -> String {
        let exps: Vec<String> = self.seq.exponents.iter().map(ToString::to_string).collect();
        format!(
            "polyseq b={} exponents=({})",
            self.seq.generators.len(),
            exps.join(",")
        )
    }

    fn base_point(&self) -> Vec<S> {
        self.base.malcev.to_vec()
    }

    fn point(&self, n: &[i64]) -> Result<Vec<S>> {
        let g = self.x0.mul(&self.seq.eval(n)?);
        Ok(malcev_reduce(&g).0.malcev.to_vec())
    }

    fn displacement(&self, n: &[i64]) -> Result<S> {
        let g = self.x0.mul(&self.seq.eval(n)?);
        Ok(nil_metric(&malcev_reduce(&g).0, &self.base))
    }

    fn displacement_check(&self, n: &[i64]) -> Result<S> {
        let g = self.x0.mul(&self.seq.eval_by_squaring(n)?);
        Ok(nil_metric(&malcev_reduce(&g).0, &self.base))
    }

    fn float_error_bound(&self, horizon: u64) -> f64 {
        // the largest unreduced element over the corners of the box
        let h = horizon as i64;
        let ends = [-h, h];
        let corners = crate::setcore::d_tuples(&ends, self.seq.vars);
        let mag = corners
            .filter_map(|n| self.seq.eval(&n).ok())
            .map(|g| g.magnitude())
            .fold(0.0, f64::max);
        8.0 * f64::EPSILON * (1.0 + mag) * (1 + self.seq.generators.len()) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnMember {
    pub n: Vec<i64>,
    pub distance: String,
}

/// `{n in [-N, N]^l : distance(orbit(n), x0) < eps}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub system: String,
    pub base_point: Vec<String>,
    pub eps: String,
    pub horizon: u64,
    pub mode: ArithmeticMode,
    /// Float mode: estimated bound on the rounding error of each distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bound: Option<f64>,
    /// Float mode: members or non-members whose distance lies within the
    /// error bound of `eps`.
    #[serde(default)]
    pub borderline: u64,
    pub members: Vec<ReturnMember>,
}

impl ReturnSet {
    pub fn member_set(&self) -> HashSet<Vec<i64>> {
        self.members.iter().map(|m| m.n.clone()).collect()
    }

    /// Scalar return times (for one time variable).
    pub fn times(&self) -> Vec<i64> {
        self.members.iter().filter_map(|m| m.n.first().copied()).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Domain(format!("writing CSV: {e}"));
        wr.write_record(["n", "distance"]).map_err(io)?;
        for m in &self.members {
            let n: Vec<String> = m.n.iter().map(ToString::to_string).collect();
            wr.write_record([n.join(";"), m.distance.clone()]).map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::Domain(format!("writing CSV: {e}")))
    }
}

pub fn return_set<S: Scalar, R: Recurrent<S> + ?Sized>(
    orbit: &R,
    eps: &S,
    horizon: u64,
) -> Result<ReturnSet> {
    if *eps <= S::zero() {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    if horizon == 0 {
        return Err(Error::Precondition("the horizon must be at least 1".into()));
    }
    let all = orbit.displacements(horizon)?;
    let error_bound = (!S::EXACT).then(|| orbit.float_error_bound(horizon));
    let eps_f = eps.to_f64();
    let borderline = match error_bound {
        Some(b) => all
            .iter()
            .filter(|(_, d)| (d.to_f64() - eps_f).abs() <= b)
            .count() as u64,
        None => 0,
    };
    let members = all
        .into_iter()
        .filter(|(_, d)| d < eps)
        .map(|(n, d)| ReturnMember {
            n,
            distance: d.to_text(),
        })
        .collect();
    Ok(ReturnSet {
        system: orbit.describe(),
        base_point: orbit.base_point().iter().map(Scalar::to_text).collect(),
        eps: eps.to_text(),
        horizon,
        mode: if S::EXACT {
            ArithmeticMode::Exact
        } else {
            ArithmeticMode::Float
        },
        error_bound,
        borderline,
        members,
    })
}

/// Two points whose orbits are compared by [`distality_probe`].
pub enum PointPair<S> {
    Torus(AffineSkew<S>, TorusPoint<S>, TorusPoint<S>),
    /// Right translation by `t` of the cosets of two elements.
    Nil(Heisenberg<S>, Heisenberg<S>, Heisenberg<S>),
}

/// `min over |n| <= N of dist(T^n x, T^n y)`.
pub fn distality_probe<S: Scalar>(pair: &PointPair<S>, horizon: u64) -> Result<S> {
    match pair {
        PointPair::Torus(t, x, y) => {
            let mut best = torus_metric(x, y)?;
            if best == S::zero() {
                return Err(Error::Domain("distality probe needs distinct points".into()));
            }
            for forward in [true, false] {
                let (mut p, mut q) = (x.clone(), y.clone());
                for _ in 0..horizon {
                    if forward {
                        p = t.step(&p)?;
                        q = t.step(&q)?;
                    } else {
                        p = t.inverse_step(&p)?;
                        q = t.inverse_step(&q)?;
                    }
                    let d = torus_metric(&p, &q)?;
                    if d < best {
                        best = d;
                    }
                }
            }
            Ok(best)
        }
        PointPair::Nil(t, x, y) => {
            let px = malcev_reduce(x).0;
            let py = malcev_reduce(y).0;
            let mut best = nil_metric(&px, &py);
            if best == S::zero() {
                return Err(Error::Domain("distality probe needs distinct points".into()));
            }
            let h = horizon as i64;
            for n in -h..=h {
                let tn = t.pow(n);
                let d = nil_metric(
                    &malcev_reduce(&x.mul(&tn)).0,
                    &malcev_reduce(&y.mul(&tn)).0,
                );
                if d < best {
                    best = d;
                }
            }
            Ok(best)
        }
    }
}

/// Searches a nonempty `alpha` of `[r]` with
/// `dist(orbit(phi(alpha)), x0) < eps`, subsets by cardinality and then
/// lexicographically.
pub fn vip_return_test<S: Scalar, R: Recurrent<S> + ?Sized>(
    orbit: &R,
    phi: &SetPolynomial,
    eps: &S,
    budget: &SearchBudget,
) -> Result<WitnessReport<FiniteSet>> {
    budget.validate()?;
    if *eps <= S::zero() {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let l = orbit.time_dim();
    match phi.value_group() {
        ValueGroup::IntegerVectors(k) if k == l => {}
        ValueGroup::Integers if l == 1 => {}
        g => {
            return Err(Error::Domain(format!(
                "phi must take values in Z^{l}, got {g:?}"
            )))
        }
    }
    let times = |alpha: &FiniteSet| -> Result<Vec<i64>> {
        phi.eval(alpha)?.0.iter().map(rational::to_i64).collect()
    };
    let deadline = budget.deadline();
    let ground = phi.ground().clone();
    let scan = scan_first(
        subsets_of(&ground, 1, ground.len()),
        budget.max_subsets,
        &deadline,
        |alpha| {
            let n = times(alpha)?;
            Ok((orbit.displacement(&n)? < *eps).then_some(()))
        },
    )?;
    let mut report = match scan {
        Scan::Found { examined, item, .. } => {
            let n = times(&item)?;
            let d = orbit.displacement_check(&n)?;
            if d >= *eps {
                return Err(Error::Precondition(format!(
                    "witness {item} failed re-verification (distance {})",
                    d.to_text()
                )));
            }
            let mut rep = WitnessReport::new(Outcome::Found, Some(item), examined, &deadline);
            rep.notes.push(format!("n = {n:?}, distance {}", d.to_text()));
            rep
        }
        Scan::Exhausted { examined } => {
            WitnessReport::new(Outcome::Exhausted, None, examined, &deadline)
        }
        Scan::BudgetHit { examined } => {
            WitnessReport::new(Outcome::BudgetHit, None, examined, &deadline)
        }
    };
    if !S::EXACT {
        report.notes.push(format!(
            "float mode, error bound {:e}",
            orbit.float_error_bound(1)
        ));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub outcome: HitOutcome,
    /// The first increasing sequence none of whose differences returns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miss: Option<Vec<i64>>,
    pub sequences_checked: u64,
}

/// For every increasing `m`-element sequence from `pool`, checks that some
/// difference `n_i - n_j` (`j < i`) is a return time.
pub fn delta_hit_test<S: Scalar, R: Recurrent<S> + ?Sized>(
    orbit: &R,
    eps: &S,
    pool: &[i64],
    m: usize,
    budget: &SearchBudget,
) -> Result<DeltaReport> {
    budget.validate()?;
    if m < 2 {
        return Err(Error::Precondition("m must be at least 2".into()));
    }
    if orbit.time_dim() != 1 {
        return Err(Error::Domain("difference sets need one time variable".into()));
    }
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let deadline = budget.deadline();
    use itertools::Itertools;
    let scan = scan_first(
        sorted.iter().copied().combinations(m),
        budget.max_subsets,
        &deadline,
        |seq: &Vec<i64>| {
            for (j, i) in (0..m).tuple_combinations() {
                if orbit.displacement(&[seq[i] - seq[j]])? < *eps {
                    return Ok(None);
                }
            }
            Ok(Some(()))
        },
    )?;
    Ok(match scan {
        Scan::Found { examined, item, .. } => DeltaReport {
            outcome: HitOutcome::Miss,
            miss: Some(item),
            sequences_checked: examined,
        },
        Scan::Exhausted { examined } => DeltaReport {
            outcome: HitOutcome::AllHit,
            miss: None,
            sequences_checked: examined,
        },
        Scan::BudgetHit { examined } => DeltaReport {
            outcome: HitOutcome::BudgetHit,
            miss: None,
            sequences_checked: examined,
        },
    })
}

/// JSON description of a system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemDesc {
    Skew {
        k: usize,
        alpha: Vec<String>,
        #[serde(default)]
        a: Vec<Vec<i64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<String>>,
    },
    Heisenberg {
        t: [String; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<[String; 3]>,
    },
    Polyseq {
        generators: Vec<[String; 3]>,
        exponents: Vec<GenPoly>,
        #[serde(default = "one")]
        vars: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<[String; 3]>,
        /// Allow bracketed exponents (experimental).
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        general: bool,
    },
}

fn one() -> usize {
    1
}

fn parse_all<S: Scalar>(v: &[String]) -> Result<Vec<S>> {
    v.iter().map(|s| S::parse(s)).collect()
}

fn parse_element<S: Scalar>(v: &[String; 3]) -> Result<Heisenberg<S>> {
    Ok(Heisenberg::new(S::parse(&v[0])?, S::parse(&v[1])?, S::parse(&v[2])?))
}

impl SystemDesc {
    pub fn build<S: Scalar>(&self) -> Result<Box<dyn Recurrent<S>>> {
        Ok(match self {
            SystemDesc::Skew { k, alpha, a, x0 } => {
                if alpha.len() != *k {
                    return Err(Error::DimensionMismatch {
                        expected: *k,
                        found: alpha.len(),
                    });
                }
                let t = AffineSkew::new(parse_all(alpha)?, a.clone())?;
                let x0 = match x0 {
                    Some(v) => TorusPoint::new(parse_all(v)?),
                    None => TorusPoint::origin(*k),
                };
                Box::new(SkewOrbit::new(t, x0)?)
            }
            SystemDesc::Heisenberg { t, x0 } => {
                let x0 = match x0 {
                    Some(v) => parse_element(v)?,
                    None => Heisenberg::identity(),
                };
                Box::new(NilOrbit::new(parse_element(t)?, x0))
            }
            SystemDesc::Polyseq {
                generators,
                exponents,
                vars,
                x0,
                general,
            } => {
                let gens = generators.iter().map(parse_element).collect::<Result<_>>()?;
                let seq = PolySequence::new(gens, exponents.clone(), *vars, *general)?;
                let x0 = match x0 {
                    Some(v) => parse_element(v)?,
                    None => Heisenberg::identity(),
                };
                Box::new(PolySeqOrbit::new(seq, x0))
            }
        })
    }
}

impl<S: Scalar, R: Recurrent<S> + ?Sized> Recurrent<S> for Box<R> {
    fn time_dim(&self) -> usize {
        (**self).time_dim()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn base_point(&self) -> Vec<S> {
        (**self).base_point()
    }
    fn point(&self, n: &[i64]) -> Result<Vec<S>> {
        (**self).point(n)
    }
    fn displacement(&self, n: &[i64]) -> Result<S> {
        (**self).displacement(n)
    }
    fn displacement_check(&self, n: &[i64]) -> Result<S> {
        (**self).displacement_check(n)
    }
    fn displacements(&self, horizon: u64) -> Result<Vec<(Vec<i64>, S)>> {
        (**self).displacements(horizon)
    }
    fn float_error_bound(&self, horizon: u64) -> f64 {
        (**self).float_error_bound(horizon)
    }
}

/// `q` as an `i64`, for exact exponents read from rationals.
pub fn q_to_i64(q: &Q) -> Option<i64> {
    q.is_integer().then(|| q.numer().to_i64()).flatten()
}
