//! Number helpers.
//!
//! [`Wide`] is an f64 mantissa paired with an i64 binary exponent. It holds
//! masses like 2^{-4·10^9} that underflow f64 and would need billions of
//! bits as exact rationals. [`Mass`] keeps a value exact when that is cheap
//! and falls back to [`Wide`] otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};

/// Exponents (α, τ, 1/d) are exact small rationals.
pub type Exponent = Rational64;

fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, raw - 1022)
}

fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    if e > 2100 {
        return m.signum() * f64::INFINITY;
    }
    if e < -2200 {
        return 0.0;
    }
    let half = e / 2;
    m * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

/// `mant · 2^exp` with `|mant|` in [1/2, 1), or zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wide {
    mant: f64,
    exp: i64,
}

impl Wide {
    pub const ZERO: Wide = Wide { mant: 0.0, exp: 0 };
    pub const ONE: Wide = Wide { mant: 0.5, exp: 1 };

    pub fn from_parts(mant: f64, exp: i64) -> Wide {
        if mant == 0.0 {
            return Wide::ZERO;
        }
        let (m, e) = frexp(mant);
        Wide {
            mant: m,
            exp: exp + e,
        }
    }

    pub fn from_f64(x: f64) -> Wide {
        Wide::from_parts(x, 0)
    }

    pub fn from_u128(n: u128) -> Wide {
        if n == 0 {
            return Wide::ZERO;
        }
        let bits = 128 - n.leading_zeros() as i64;
        if bits <= 64 {
            Wide::from_f64(n as f64)
        } else {
            Wide::from_parts((n >> (bits - 64)) as f64, bits - 64)
        }
    }

    /// 2^k.
    pub fn pow2(k: i64) -> Wide {
        Wide {
            mant: 0.5,
            exp: k + 1,
        }
    }

    /// 2^{num/den}, with the integer part carried exactly in the exponent.
    pub fn pow2_frac(num: i128, den: i128) -> Wide {
        let (q, r) = num.div_mod_floor(&den);
        let frac = 2f64.powf(r as f64 / den as f64);
        Wide::from_parts(frac, q as i64)
    }

    pub fn from_ratio(r: &BigRational) -> Wide {
        if r.is_zero() {
            return Wide::ZERO;
        }
        let top = |x: &BigUint| -> (f64, i64) {
            let bits = x.bits() as i64;
            if bits <= 64 {
                (x.to_f64().unwrap(), 0)
            } else {
                ((x >> (bits - 64) as u64).to_f64().unwrap(), bits - 64)
            }
        };
        let (nf, ns) = top(r.numer().magnitude());
        let (df, ds) = top(r.denom().magnitude());
        let w = Wide::from_parts(nf / df, ns - ds);
        if r.is_negative() {
            -w
        } else {
            w
        }
    }

    /// The stored value as an exact rational.
    pub fn to_ratio(&self) -> BigRational {
        let (m, e) = self.dyadic();
        if e >= 0 {
            BigRational::from_integer(m << e as u64)
        } else {
            BigRational::new(m, BigInt::one() << (-e) as u64)
        }
    }

    /// Exact dyadic form `(M, E)` with value `M · 2^E` and `M` odd (or zero).
    pub fn dyadic(&self) -> (BigInt, i64) {
        if self.mant == 0.0 {
            return (BigInt::zero(), 0);
        }
        let mut m = (self.mant * 2f64.powi(53)) as i64;
        let mut e = self.exp - 53;
        while m % 2 == 0 {
            m /= 2;
            e += 1;
        }
        (BigInt::from(m), e)
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0.0
    }

    pub fn is_positive(&self) -> bool {
        self.mant > 0.0
    }

    pub fn to_f64(&self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn log2(&self) -> f64 {
        self.mant.log2() + self.exp as f64
    }

    pub fn ln(&self) -> f64 {
        self.mant.ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    pub fn abs(&self) -> Wide {
        Wide {
            mant: self.mant.abs(),
            exp: self.exp,
        }
    }

    /// `self^tau` for a positive value; the exponent part is split exactly.
    pub fn powr(&self, tau: Exponent) -> Wide {
        if self.mant == 0.0 {
            return Wide::ZERO;
        }
        assert!(self.mant > 0.0, "powr of a negative value");
        let p = *tau.numer() as i128;
        let q = *tau.denom() as i128;
        let scaled = self.exp as i128 * p;
        let (qi, r) = scaled.div_mod_floor(&q);
        let t = p as f64 / q as f64;
        let m = self.mant.powf(t) * 2f64.powf(r as f64 / q as f64);
        Wide::from_parts(m, qi as i64)
    }

    pub fn max(self, other: Wide) -> Wide {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Wide) -> Wide {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl std::ops::Neg for Wide {
    type Output = Wide;
    fn neg(self) -> Wide {
        Wide {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl std::ops::Mul for Wide {
    type Output = Wide;
    fn mul(self, o: Wide) -> Wide {
        Wide::from_parts(self.mant * o.mant, self.exp + o.exp)
    }
}

impl std::ops::Div for Wide {
    type Output = Wide;
    fn div(self, o: Wide) -> Wide {
        assert!(o.mant != 0.0, "division by zero");
        Wide::from_parts(self.mant / o.mant, self.exp - o.exp)
    }
}

impl std::ops::Add for Wide {
    type Output = Wide;
    fn add(self, o: Wide) -> Wide {
        if self.mant == 0.0 {
            return o;
        }
        if o.mant == 0.0 {
            return self;
        }
        let (big, small) = if self.exp >= o.exp {
            (self, o)
        } else {
            (o, self)
        };
        let gap = big.exp - small.exp;
        if gap > 1100 {
            return big;
        }
        Wide::from_parts(big.mant + ldexp(small.mant, -gap), big.exp)
    }
}

impl std::ops::Sub for Wide {
    type Output = Wide;
    fn sub(self, o: Wide) -> Wide {
        self + (-o)
    }
}

impl std::ops::AddAssign for Wide {
    fn add_assign(&mut self, o: Wide) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Wide {
    fn sum<I: Iterator<Item = Wide>>(iter: I) -> Wide {
        iter.fold(Wide::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for Wide {
    fn partial_cmp(&self, o: &Wide) -> Option<Ordering> {
        let sa = self.mant.partial_cmp(&0.0)?;
        let sb = o.mant.partial_cmp(&0.0)?;
        if sa != sb {
            return sa.partial_cmp(&sb);
        }
        if sa == Ordering::Equal {
            return Some(Ordering::Equal);
        }
        let by_mag = self.exp.cmp(&o.exp).then(
            self.mant
                .abs()
                .partial_cmp(&o.mant.abs())
                .unwrap_or(Ordering::Equal),
        );
        Some(if sa == Ordering::Greater {
            by_mag
        } else {
            by_mag.reverse()
        })
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, e) = self.dyadic();
        write!(f, "{m}*2^{e}")
    }
}

impl FromStr for Wide {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Wide> {
        let bad = || CoreError::Parse(format!("not a dyadic value: {s:?}"));
        let (m, e) = s.split_once("*2^").ok_or_else(bad)?;
        let m: i64 = m.trim().parse().map_err(|_| bad())?;
        let e: i64 = e.trim().parse().map_err(|_| bad())?;
        Ok(Wide::from_parts(m as f64, e))
    }
}

impl Serialize for Wide {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Wide {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Wide, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// k when |x| = 2^k.
fn pow2_exponent(x: &BigInt) -> Option<u64> {
    let tz = x.trailing_zeros()?;
    (x.bits() == tz + 1).then_some(tz)
}

/// gcd that avoids the quadratic binary gcd when one side is a power of two
/// or fits in a machine word, which covers dyadic masses times small counts.
pub fn fast_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    for (x, y) in [(a, b), (b, a)] {
        if let Some(k) = pow2_exponent(y) {
            return BigInt::one() << k.min(x.trailing_zeros().unwrap_or(0));
        }
    }
    for (x, y) in [(a, b), (b, a)] {
        if let Some(small) = y.abs().to_u64() {
            let r = (x.abs() % small).to_u64().unwrap();
            return BigInt::from(r.gcd(&small));
        }
    }
    a.gcd(b)
}

fn exact_div(x: &BigInt, g: &BigInt) -> BigInt {
    if g.is_one() {
        return x.clone();
    }
    match pow2_exponent(g) {
        Some(k) => x >> k,
        None => x / g,
    }
}

/// num/den in lowest terms, den ≠ 0.
pub fn normalized(num: BigInt, den: BigInt) -> BigRational {
    let (num, den) = if den.is_negative() {
        (-num, -den)
    } else {
        (num, den)
    };
    let g = fast_gcd(&num, &den);
    BigRational::new_raw(exact_div(&num, &g), exact_div(&den, &g))
}

pub fn rat_mul(a: &BigRational, b: &BigRational) -> BigRational {
    if a.denom().is_one() && b.denom().is_one() {
        return BigRational::from_integer(a.numer() * b.numer());
    }
    let g1 = fast_gcd(a.numer(), b.denom());
    let g2 = fast_gcd(b.numer(), a.denom());
    let num = exact_div(a.numer(), &g1) * exact_div(b.numer(), &g2);
    let den = exact_div(a.denom(), &g2) * exact_div(b.denom(), &g1);
    if num.is_zero() {
        return BigRational::zero();
    }
    BigRational::new_raw(num, den)
}

pub fn rat_div(a: &BigRational, b: &BigRational) -> BigRational {
    assert!(!b.is_zero(), "division by zero");
    let inv = if b.numer().is_negative() {
        BigRational::new_raw(-b.denom(), -b.numer())
    } else {
        BigRational::new_raw(b.denom().clone(), b.numer().clone())
    };
    rat_mul(a, &inv)
}

pub fn rat_add(a: &BigRational, b: &BigRational) -> BigRational {
    if a.denom().is_one() && b.denom().is_one() {
        return BigRational::from_integer(a.numer() + b.numer());
    }
    if a.denom() == b.denom() {
        return normalized(a.numer() + b.numer(), a.denom().clone());
    }
    let g = fast_gcd(a.denom(), b.denom());
    let (da, db) = (exact_div(a.denom(), &g), exact_div(b.denom(), &g));
    normalized(a.numer() * &db + b.numer() * &da, da * b.denom())
}

/// Order by cross-multiplication; denominators are positive.
pub fn rat_cmp(a: &BigRational, b: &BigRational) -> Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

/// A nonnegative mass: exact when cheap, dyadic-float otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum Mass {
    Exact(BigRational),
    Approx(Wide),
}

impl Mass {
    pub fn zero() -> Mass {
        Mass::Exact(BigRational::zero())
    }

    pub fn exact(r: BigRational) -> Mass {
        Mass::Exact(r)
    }

    pub fn wide(&self) -> Wide {
        match self {
            Mass::Exact(r) => Wide::from_ratio(r),
            Mass::Approx(w) => *w,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Mass::Exact(r) => Some(r),
            Mass::Approx(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Mass::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Mass::Exact(r) => r.is_zero(),
            Mass::Approx(w) => w.is_zero(),
        }
    }

    pub fn add(&self, o: &Mass) -> Mass {
        match (self, o) {
            (Mass::Exact(a), Mass::Exact(b)) => Mass::Exact(rat_add(a, b)),
            _ => Mass::Approx(self.wide() + o.wide()),
        }
    }

    pub fn mul(&self, o: &Mass) -> Mass {
        match (self, o) {
            (Mass::Exact(a), Mass::Exact(b)) => Mass::Exact(rat_mul(a, b)),
            _ => Mass::Approx(self.wide() * o.wide()),
        }
    }

    pub fn div(&self, o: &Mass) -> Mass {
        match (self, o) {
            (Mass::Exact(a), Mass::Exact(b)) => Mass::Exact(rat_div(a, b)),
            _ => Mass::Approx(self.wide() / o.wide()),
        }
    }

    pub fn scale(&self, r: &BigRational) -> Mass {
        self.mul(&Mass::Exact(r.clone()))
    }

    pub fn mul_count(&self, n: u128) -> Mass {
        self.scale(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn div_count(&self, n: u128) -> Mass {
        self.scale(&BigRational::new(BigInt::one(), BigInt::from(n)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Mass::Exact(r) => ratio_to_f64(r),
            Mass::Approx(w) => w.to_f64(),
        }
    }

    /// Exact when both sides are exact, otherwise a comparison of the
    /// stored dyadic values.
    pub fn compare(&self, o: &Mass) -> Ordering {
        match (self, o) {
            (Mass::Exact(a), Mass::Exact(b)) => rat_cmp(a, b),
            _ => self
                .wide()
                .partial_cmp(&o.wide())
                .unwrap_or(Ordering::Equal),
        }
    }

    pub fn le(&self, o: &Mass) -> bool {
        self.compare(o) != Ordering::Greater
    }

    pub fn max(self, o: Mass) -> Mass {
        if o.compare(&self) == Ordering::Greater {
            o
        } else {
            self
        }
    }
}

impl fmt::Display for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mass::Exact(r) => write!(f, "{r}"),
            Mass::Approx(w) => write!(f, "{w}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MassRepr {
    Exact(String),
    Dyadic(String),
}

impl Serialize for Mass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mass::Exact(r) => MassRepr::Exact(r.to_string()),
            Mass::Approx(w) => MassRepr::Dyadic(w.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Mass, D::Error> {
        match MassRepr::deserialize(d)? {
            MassRepr::Exact(s) => parse_rational(&s)
                .map(Mass::Exact)
                .map_err(serde::de::Error::custom),
            MassRepr::Dyadic(s) => s
                .parse()
                .map(Mass::Approx)
                .map_err(serde::de::Error::custom),
        }
    }
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

/// 2^k as an exact rational, k of either sign.
pub fn pow2_rat(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as u64)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

pub fn exponent_to_big(e: Exponent) -> BigRational {
    BigRational::new(BigInt::from(*e.numer()), BigInt::from(*e.denom()))
}

pub fn exponent_to_f64(e: Exponent) -> f64 {
    *e.numer() as f64 / *e.denom() as f64
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    Wide::from_ratio(r).to_f64()
}

/// Parses `p/q`, an integer, or a finite decimal like `0.25`, exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || CoreError::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

pub fn parse_exponent(s: &str) -> Result<Exponent> {
    let r = parse_rational(s)?;
    let n = r.numer().to_i64();
    let d = r.denom().to_i64();
    match (n, d) {
        (Some(n), Some(d)) => Ok(Rational64::new(n, d)),
        _ => Err(CoreError::Parse(format!(
            "exponent {s:?} does not fit 64-bit parts"
        ))),
    }
}

/// ⌊c · 2^{p/q}⌋ exactly, for c ≥ 0 and p/q ≥ 0.
pub fn floor_mul_pow2(c: &BigUint, power: Exponent) -> BigUint {
    assert!(power >= Rational64::zero(), "negative growth exponent");
    let p = *power.numer() as u64;
    let q = *power.denom() as u32;
    if q == 1 {
        return c << p;
    }
    (num_traits::pow(c.clone(), q as usize) << p).nth_root(q)
}

/// ⌊2^{p/q}⌋ applied to an i64, with overflow reported.
pub fn floor_mul_pow2_i64(c: i64, power: Exponent) -> Result<i64> {
    if c < 0 {
        return Err(CoreError::Domain(format!("negative endpoint {c}")));
    }
    let v = floor_mul_pow2(&BigUint::from(c as u64), power);
    v.to_i64()
        .ok_or_else(|| CoreError::Overflow(format!("{c}·2^{power} exceeds 64-bit endpoints")))
}

pub fn big_to_u128(b: &BigInt) -> Option<u128> {
    match b.sign() {
        Sign::Minus => None,
        _ => b.to_u128(),
    }
}

/// Serde helpers writing exact rationals as `"p/q"` strings.
pub mod ratio_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Same as [`ratio_string`] for exponents.
pub mod exponent_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Exponent, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Exponent, D::Error> {
        let s = String::deserialize(d)?;
        parse_exponent(&s).map_err(serde::de::Error::custom)
    }
}

/// Lists of exponents as strings.
pub mod exponents_string {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Exponent], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(|e| e.to_string()).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Exponent>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_exponent(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_roundtrips_small_values() {
        for x in [1.0, 0.75, 3.0, 1e-300, 12345.678] {
            let w = Wide::from_f64(x);
            assert_eq!(w.to_f64(), x);
            assert_eq!(w.to_ratio(), BigRational::from_float(x).unwrap());
        }
    }

    #[test]
    fn wide_holds_huge_exponents() {
        let a = Wide::pow2(-4_000_000_000);
        let b = Wide::pow2(-4_000_000_001);
        assert!(a > b);
        assert_eq!((a + a) / a, Wide::from_f64(2.0));
        assert_eq!(a.to_f64(), 0.0);
        assert_eq!((a * Wide::pow2(4_000_000_000)).to_f64(), 1.0);
    }

    #[test]
    fn wide_power_splits_exponent_exactly() {
        let v = Wide::pow2(-3_000_000_000).powr(Rational64::new(1, 3));
        assert_eq!(v, Wide::pow2(-1_000_000_000));
        let w = Wide::from_f64(0.25).powr(Rational64::new(1, 2));
        assert!((w.to_f64() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wide_from_big_ratio() {
        let r = BigRational::new(BigInt::from(1), BigInt::one() << 5000u64) * rat(3, 1);
        let w = Wide::from_ratio(&r);
        assert_eq!(w, Wide::from_f64(3.0) * Wide::pow2(-5000));
        assert_eq!(w.to_ratio(), r);
    }

    #[test]
    fn wide_ordering_with_signs() {
        let a = Wide::from_f64(-2.0);
        let b = Wide::from_f64(1e-30);
        assert!(a < b);
        assert!(-b > a);
        assert!(Wide::ZERO < b);
    }

    #[test]
    fn dyadic_string_parses_back() {
        let w = Wide::from_f64(0.3) * Wide::pow2(-77);
        let s = w.to_string();
        assert_eq!(s.parse::<Wide>().unwrap(), w);
    }

    #[test]
    fn floor_powers_are_exact() {
        // 2^{1/2} = 1.414..., 64·2^{1/3} = 80.63...
        assert_eq!(floor_mul_pow2_i64(1, Rational64::new(1, 2)).unwrap(), 1);
        assert_eq!(floor_mul_pow2_i64(100, Rational64::new(1, 2)).unwrap(), 141);
        assert_eq!(floor_mul_pow2_i64(64, Rational64::new(1, 3)).unwrap(), 80);
        assert_eq!(floor_mul_pow2_i64(7, Rational64::new(2, 1)).unwrap(), 28);
        assert!(floor_mul_pow2_i64(i64::MAX / 2, Rational64::new(2, 1)).is_err());
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/2").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn mass_mixes_exact_and_wide() {
        let a = Mass::exact(rat(1, 4));
        let b = Mass::Approx(Wide::from_f64(0.5));
        assert!(a.mul(&a).is_exact());
        assert!(!a.add(&b).is_exact());
        assert_eq!(a.add(&b).to_f64(), 0.75);
        assert!(a.le(&b));
    }

    fn arb_rat() -> impl proptest::strategy::Strategy<Value = BigRational> {
        use proptest::prelude::*;
        (any::<i32>(), 0u32..200, 1u32..1000, 0u32..3).prop_map(|(n, k, odd, mode)| {
            let den = match mode {
                0 => BigInt::one() << k,
                1 => BigInt::from(odd),
                _ => (BigInt::one() << k) * BigInt::from(odd),
            };
            BigRational::new(BigInt::from(n) << (k / 3), den)
        })
    }

    fn parts(r: &BigRational) -> (BigInt, BigInt) {
        (r.numer().clone(), r.denom().clone())
    }

    proptest::proptest! {
        #[test]
        fn fast_arithmetic_matches_reference(a in arb_rat(), b in arb_rat()) {
            proptest::prop_assert_eq!(parts(&rat_add(&a, &b)), parts(&(&a + &b)));
            proptest::prop_assert_eq!(parts(&rat_mul(&a, &b)), parts(&(&a * &b)));
            proptest::prop_assert_eq!(rat_cmp(&a, &b), a.cmp(&b));
            if !b.is_zero() {
                proptest::prop_assert_eq!(parts(&rat_div(&a, &b)), parts(&(&a / &b)));
            }
        }
    }
}
