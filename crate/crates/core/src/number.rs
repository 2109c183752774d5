//! Exact rational numbers and their text/JSON representation.
//!
//! Every value in the library is a [`Rational`]. On the wire a rational is
//! either a JSON integer or a string of the form `"p/q"`, `"p"` or a finite
//! decimal such as `"0.125"`. Output always uses the `"p/q"` string form
//! (`"p"` when the denominator is one).

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"p/q"`, `"p"` or a finite decimal (`"-1.25"`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    let bad = || Error::Parse(format!("not a rational: {text:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
        let denom = num_traits::pow(BigInt::from(10u32), frac.len());
        let value = Rational::new(numer, denom);
        return Ok(if negative { -value } else { value });
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

pub fn format_rational(value: &Rational) -> String {
    value.to_string()
}

/// Lossy decimal rendering used only for human-readable output.
pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

/// Ratio `value / reference`, defined as one when the reference is zero
/// (every bundle meets a zero target).
pub fn ratio(value: &Rational, reference: &Rational) -> Rational {
    if reference.is_zero() {
        Rational::one()
    } else {
        value / reference
    }
}

pub fn is_negative(value: &Rational) -> bool {
    value.is_negative()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Int(i64),
    Big(u64),
    Text(String),
    Float(f64),
}

impl Repr {
    fn into_rational(self) -> Result<Rational> {
        match self {
            Repr::Int(v) => Ok(Rational::from_integer(BigInt::from(v))),
            Repr::Big(v) => Ok(Rational::from_integer(BigInt::from(v))),
            Repr::Text(s) => parse_rational(&s),
            Repr::Float(v) => Err(Error::Parse(format!(
                "non-integer JSON number {v} is inexact; write it as a \"p/q\" string"
            ))),
        }
    }
}

/// Serde adapter for a single rational.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        Repr::deserialize(d)?
            .into_rational()
            .map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<Rational>`.
pub mod serde_rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&format_rational(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<Repr>::deserialize(d)?
            .map(Repr::into_rational)
            .transpose()
            .map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(Repr::into_rational)
            .collect::<Result<_>>()
            .map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a rational matrix.
pub mod serde_rational_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(rows: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row<'a>(#[serde(with = "serde_rational_vec")] &'a Vec<Rational>);
        s.collect_seq(rows.iter().map(Row))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        Vec::<Vec<Repr>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(Repr::into_rational).collect())
            .collect::<Result<_>>()
            .map_err(serde::de::Error::custom)
    }
}
