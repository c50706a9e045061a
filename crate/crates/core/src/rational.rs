//! Exact rational helpers: parsing `p/q` strings, floor/fractional parts and
//! serde adapters that write rationals as strings.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"7"`, `"-3/4"` or a finite decimal such as `"0.05"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.trim_start().starts_with('-');
        let whole: BigInt = match whole.trim() {
            "" | "-" | "+" => BigInt::zero(),
            w => w.parse().map_err(|_| bad())?,
        };
        let digits: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num::pow(BigInt::from(10), frac.len());
        let frac = Q::new(digits, scale);
        let whole = Q::from_integer(whole);
        return Ok(if negative { whole - frac } else { whole + frac });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

pub fn format_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Integer part `[x]`, rounding toward negative infinity.
pub fn floor(x: &Q) -> Q {
    x.floor()
}

/// Fractional part `{x} = x - [x]`, always in `[0, 1)`.
pub fn fract(x: &Q) -> Q {
    x - x.floor()
}

/// Distance from `x` to the nearest integer, `min({x}, 1 - {x})`.
pub fn fractional_norm(x: &Q) -> Q {
    let f = fract(x);
    let g = Q::one() - &f;
    if f <= g {
        f
    } else {
        g
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn to_i64(x: &Q) -> Result<i64> {
    if !x.is_integer() {
        return Err(Error::Domain(format!("{} is not an integer", format_q(x))));
    }
    x.numer()
        .to_i64()
        .ok_or_else(|| Error::Domain(format!("{} does not fit in i64", format_q(x))))
}

/// Serde adapter: a rational written as `"p/q"`; integers may also be read
/// from plain JSON numbers.
pub mod serde_q {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Raw {
        Int(i64),
        Float(f64),
        Str(String),
    }

    impl Raw {
        pub(crate) fn into_q<E: de::Error>(self) -> std::result::Result<Q, E> {
            match self {
                Raw::Int(n) => Ok(int(n)),
                Raw::Str(s) => parse_q(&s).map_err(E::custom),
                Raw::Float(f) => Err(E::custom(format!(
                    "float {f} is not accepted here; write it as a \"p/q\" string"
                ))),
            }
        }
    }

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        Raw::deserialize(d)?.into_q()
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod serde_qvec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&format_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        Vec::<serde_q::Raw>::deserialize(d)?
            .into_iter()
            .map(|r| r.into_q())
            .collect()
    }
}
