//! Shared numeric aliases and helpers. All quantities in this crate are exact:
//! level indices and return times are `Int`, measures and offsets are `Rat`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Int = BigInt;
pub type Rat = BigRational;

pub fn int(n: i64) -> Int {
    Int::from(n)
}

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(Int::from(p), Int::from(q))
}

pub fn rat_int(n: &Int) -> Rat {
    Rat::from_integer(n.clone())
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// floor(a / b) for rationals, b > 0.
pub fn rat_div_floor(a: &Rat, b: &Rat) -> Int {
    debug_assert!(b.is_positive());
    let num = a.numer() * b.denom();
    let den = a.denom() * b.numer();
    num.div_floor(&den)
}

/// Parses "p/q" or "p" into a rational. Used by the CLI and config layers.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let bad = || Error::NumberSyntax {
        text: text.to_string(),
    };
    let mut parts = text.splitn(2, '/');
    let p: Int = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|_| bad())?;
    match parts.next() {
        None => Ok(Rat::from_integer(p)),
        Some(qs) => {
            let q: Int = qs.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
    }
}

/// Serde adapters rendering exact values as strings ("1", "-3", "5/2").
pub mod serde_int {
    use super::Int;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Int, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }
}

pub mod serde_rat {
    use super::Rat;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }
}

pub mod serde_rat_pair {
    use super::Rat;
    use serde::ser::SerializeTuple;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &(Rat, Rat), s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&v.0.to_string())?;
        t.serialize_element(&v.1.to_string())?;
        t.end()
    }
}

pub mod serde_rat_pairs {
    use super::Rat;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Vec<(Rat, Rat)>, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (a, b) in v {
            seq.serialize_element(&[a.to_string(), b.to_string()])?;
        }
        seq.end()
    }
}

pub mod serde_int_rat_pairs {
    use super::{Int, Rat};
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Vec<(Int, Rat)>, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for (a, b) in v {
            seq.serialize_element(&[a.to_string(), b.to_string()])?;
        }
        seq.end()
    }
}
