//! Exact rational helpers used on finite systems.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Exact value of a finite float.
pub fn from_f64(v: f64) -> Result<Rational> {
    Rational::from_f64(v).ok_or_else(|| Error::Parse(format!("non-finite value {v}")))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_positive() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Parses `"3"`, `"-3/7"` or a decimal such as `"0.25"` into an exact rational.
pub fn parse(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in `{s}`")))?;
        let d: BigInt = den.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in `{s}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(Rational::from_integer(n));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("{int_part}{frac_part}0").parse::<BigInt>().map_err(|_| bad())? / 10;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Rational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Canonical text form: `p` for integers, `p/q` otherwise.
pub fn display(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&display(r))
}

pub fn serialize_opt_pair<S: Serializer>(
    r: &Option<[Rational; 2]>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(|[a, b]| [display(a), display(b)]).serialize(s)
}

pub fn serialize_vec<S: Serializer>(r: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    r.iter().map(display).collect::<Vec<_>>().serialize(s)
}
