//! Exact arithmetic on integrability parameters in `(0, ∞]` and the derived
//! exponents: the smoothness gap `δ`, the Hölder-conjugate gap `p*`, the
//! diagonal nuclearity exponent `t(r₁, r₂)` and the wavelet shift `σ`.
//!
//! Every quantity that ends up on one side of a decision inequality is an
//! [`ExtRat`]; floats never enter here.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact rational used for every criterion side.
pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExponentError {
    #[error("cannot parse rational literal `{0}`")]
    Parse(String),
    #[error("dimension mismatch: source d={0}, target d={1}")]
    DimensionMismatch(u32, u32),
    #[error("integrability parameter must be positive, got {0}")]
    NonPositive(String),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// `n/1` as a [`Rat`].
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `n/d` as a [`Rat`]; panics on `d = 0`.
pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Nearest `f64` of an exact rational.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Fall back to a scaled division for huge numerators/denominators.
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    n / d
}

/// `max(x, 0)`.
pub fn pos_part(x: &Rat) -> Rat {
    if x.is_positive() {
        x.clone()
    } else {
        Rat::zero()
    }
}

/// Exact rational or `+∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRat {
    Finite(Rat),
    Inf,
}

impl ExtRat {
    pub fn int(n: i64) -> Self {
        ExtRat::Finite(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        ExtRat::Finite(frac(n, d))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtRat::Inf)
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(r) => Some(r),
            ExtRat::Inf => None,
        }
    }

    /// `1/self` with `1/∞ = 0`.
    ///
    /// Only defined for positive values; integrability parameters are
    /// validated positive on construction, so a zero here is a caller bug.
    pub fn recip(&self) -> Rat {
        match self {
            ExtRat::Inf => Rat::zero(),
            ExtRat::Finite(r) => {
                assert!(r.is_positive(), "reciprocal of non-positive value {r}");
                r.recip()
            }
        }
    }

    /// Inverse of [`ExtRat::recip`]: `0 ↦ ∞`, otherwise `1/x`.
    pub fn from_recip(x: Rat) -> Self {
        assert!(!x.is_negative(), "negative reciprocal {x}");
        if x.is_zero() {
            ExtRat::Inf
        } else {
            ExtRat::Finite(x.recip())
        }
    }

    /// Compares `1/a` with `1/b`.
    pub fn cmp_recip(a: &ExtRat, b: &ExtRat) -> Ordering {
        a.recip().cmp(&b.recip())
    }

    pub fn is_positive(&self) -> bool {
        match self {
            ExtRat::Inf => true,
            ExtRat::Finite(r) => r.is_positive(),
        }
    }

    /// True for values in `[1, ∞]`.
    pub fn at_least_one(&self) -> bool {
        match self {
            ExtRat::Inf => true,
            ExtRat::Finite(r) => *r >= Rat::one(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtRat::Inf => f64::INFINITY,
            ExtRat::Finite(r) => rat_to_f64(r),
        }
    }
}

impl From<Rat> for ExtRat {
    fn from(r: Rat) -> Self {
        ExtRat::Finite(r)
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::Inf, ExtRat::Inf) => Ordering::Equal,
            (ExtRat::Inf, _) => Ordering::Greater,
            (_, ExtRat::Inf) => Ordering::Less,
            (ExtRat::Finite(a), ExtRat::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Inf => write!(f, "inf"),
            ExtRat::Finite(r) => write!(f, "{r}"),
        }
    }
}

/// Parses `a/b`, `a`, `a.b` (exactly) or `inf`, with an optional sign.
pub fn parse_rat(s: &str) -> Result<Rat, ExponentError> {
    let err = || ExponentError::Parse(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let (neg, ip) = match ip.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, ip.strip_prefix('+').unwrap_or(ip)),
        };
        if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if !ip.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{}{}", if ip.is_empty() { "0" } else { ip }, fp);
        let n: BigInt = digits.parse().map_err(|_| err())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let r = Rat::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Rat::from_integer(n))
}

impl FromStr for ExtRat {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" || t.eq_ignore_ascii_case("+inf") {
            return Ok(ExtRat::Inf);
        }
        parse_rat(t).map(ExtRat::Finite)
    }
}

impl Serialize for ExtRat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtRat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Besov (`B`) or Triebel-Lizorkin (`F`) scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    B,
    F,
}

impl FromStr for Kind {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "B" | "b" => Ok(Kind::B),
            "F" | "f" => Ok(Kind::F),
            other => Err(ExponentError::Parse(other.to_string())),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::B => "B",
            Kind::F => "F",
        })
    }
}

/// Parameters of one space `A^s_{p,q}` on a `d`-dimensional base.
///
/// `p` and `q` may lie in `(0, 1)`: compactness criteria accept the
/// quasi-Banach range, and nuclearity paths check `p, q ≥ 1` themselves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceParams {
    pub kind: Kind,
    pub s: Rat,
    pub p: ExtRat,
    pub q: ExtRat,
    pub d: u32,
}

impl SpaceParams {
    pub fn new(kind: Kind, s: Rat, p: ExtRat, q: ExtRat, d: u32) -> Result<Self, ExponentError> {
        if d == 0 {
            return Err(ExponentError::ZeroDimension);
        }
        for v in [&p, &q] {
            if !v.is_positive() {
                return Err(ExponentError::NonPositive(v.to_string()));
            }
        }
        Ok(SpaceParams { kind, s, p, q, d })
    }

    /// Both `p` and `q` lie in `[1, ∞]`.
    pub fn is_banach(&self) -> bool {
        self.p.at_least_one() && self.q.at_least_one()
    }
}

/// `δ = s₁ − d/p₁ − s₂ + d/p₂`.
pub fn delta(src: &SpaceParams, tgt: &SpaceParams) -> Result<Rat, ExponentError> {
    if src.d != tgt.d {
        return Err(ExponentError::DimensionMismatch(src.d, tgt.d));
    }
    let d = rat(src.d as i64);
    Ok(&src.s - &d * src.p.recip() - &tgt.s + &d * tgt.p.recip())
}

/// `p*` with `1/p* = (1/p₂ − 1/p₁)₊`; also serves `q*`.
pub fn p_star(p1: &ExtRat, p2: &ExtRat) -> ExtRat {
    ExtRat::from_recip(pos_part(&(p2.recip() - p1.recip())))
}

/// Reciprocal of [`tong_exponent`]: `1 − (1/r₁ − 1/r₂)₊`.
pub fn tong_recip(r1: &ExtRat, r2: &ExtRat) -> Rat {
    Rat::one() - pos_part(&(r1.recip() - r2.recip()))
}

/// Exponent `t(r₁, r₂)` of the sequence norm that equals the nuclear norm of
/// a diagonal operator `ℓ_{r₁} → ℓ_{r₂}`.
pub fn tong_exponent(r1: &ExtRat, r2: &ExtRat) -> ExtRat {
    ExtRat::from_recip(tong_recip(r1, r2))
}

/// `σ = s + d/2 − d/p`.
pub fn sigma(s: &Rat, p: &ExtRat, d: u32) -> Rat {
    let d = rat(d as i64);
    s + &d / rat(2) - d * p.recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> ExtRat {
        s.parse().unwrap()
    }

    fn sp(s: &str, p: &str, d: u32) -> SpaceParams {
        SpaceParams::new(Kind::B, parse_rat(s).unwrap(), e(p), e("2"), d).unwrap()
    }

    #[test]
    fn literal_grammar() {
        assert_eq!(e("3/4"), ExtRat::frac(3, 4));
        assert_eq!(e("0.25"), ExtRat::frac(1, 4));
        assert_eq!(e("-1.5"), ExtRat::frac(-3, 2));
        assert_eq!(e(".5").to_string(), "1/2");
        assert_eq!(e("inf"), ExtRat::Inf);
        assert_eq!(e("7"), ExtRat::int(7));
        assert!("1/0".parse::<ExtRat>().is_err());
        assert!("abc".parse::<ExtRat>().is_err());
        assert!("1.".parse::<ExtRat>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["inf", "3/4", "-2", "0"] {
            assert_eq!(e(s).to_string(), s);
        }
    }

    #[test]
    fn ordering_puts_infinity_last() {
        assert!(ExtRat::Inf > ExtRat::int(1_000_000));
        assert_eq!(ExtRat::cmp_recip(&ExtRat::Inf, &ExtRat::int(2)), Ordering::Less);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&sp("2", "1", 1), &sp("0", "2", 1)).unwrap(), frac(3, 2));
        assert_eq!(delta(&sp("5/3", "3", 2), &sp("5/3", "3", 2)).unwrap(), rat(0));
        assert_eq!(delta(&sp("3", "1", 1), &sp("0", "inf", 1)).unwrap(), rat(2));
        assert_eq!(
            delta(&sp("1", "1", 1), &sp("1", "1", 2)),
            Err(ExponentError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn p_star_examples() {
        assert_eq!(p_star(&e("2"), &e("4")), ExtRat::Inf);
        assert_eq!(p_star(&e("4"), &e("2")), e("4"));
        assert_eq!(p_star(&e("1"), &e("1")), ExtRat::Inf);
    }

    #[test]
    fn tong_examples() {
        assert_eq!(tong_exponent(&e("inf"), &e("1")), e("1"));
        assert_eq!(tong_exponent(&e("1"), &e("inf")), ExtRat::Inf);
        assert_eq!(tong_exponent(&e("2"), &e("4")), e("4/3"));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&rat(0), &e("2"), 2), rat(0));
        assert_eq!(sigma(&rat(1), &e("1"), 1), frac(1, 2));
        assert_eq!(sigma(&rat(2), &e("inf"), 4), rat(4));
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(SpaceParams::new(Kind::B, rat(0), e("0"), e("1"), 1).is_err());
        assert!(SpaceParams::new(Kind::B, rat(0), e("1"), e("-1"), 1).is_err());
        assert!(SpaceParams::new(Kind::B, rat(0), e("1"), e("1"), 0).is_err());
    }
}
