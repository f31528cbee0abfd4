//! Weight families ℓ on ℕ₀^d, ℤ^d or a finite box.
//!
//! Product families factor over axes. Their block masses and Hölder power
//! sums come from closed-form geometric series, so they stay cheap on boxes
//! with billions of points.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::{Block, LatticeBox, Progression, ENUM_LIMIT};
use crate::error::{CoreError, Result};
use crate::num::{pow2_rat, rat, rat_add, Exponent, Mass, Wide};

/// Exact masses are kept only while their dyadic denominators stay below
/// this many bits.
const EXACT_BITS: i64 = 1 << 14;

pub type SharedFamily = Arc<dyn LengthFamily>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Support {
    /// ℕ₀^d.
    Cone,
    /// ℤ^d.
    Lattice,
    Finite(LatticeBox),
}

pub trait LengthFamily: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn support(&self) -> Support;

    /// Exact ℓ(v); an error outside the support.
    fn weight(&self, v: &[i64]) -> Result<BigRational>;

    fn weight_wide(&self, v: &[i64]) -> Result<Wide> {
        Ok(Wide::from_ratio(&self.weight(v)?))
    }

    /// L = Σ ℓ over the support.
    fn total_mass(&self) -> Result<BigRational>;

    fn in_support(&self, v: &[i64]) -> bool {
        v.len() == self.dim()
            && match self.support() {
                Support::Cone => v.iter().all(|&x| x >= 0),
                Support::Lattice => true,
                Support::Finite(b) => b.contains(v),
            }
    }

    /// Σ ℓ over a block.
    fn block_mass(&self, b: &Block) -> Result<Mass> {
        let mut s = BigRational::zero();
        for p in b.points()? {
            s = rat_add(&s, &self.weight(&p)?);
        }
        Ok(Mass::Exact(s))
    }

    /// Σ ℓ^τ over a block.
    fn block_power_sum(&self, b: &Block, tau: Exponent) -> Result<Wide> {
        let mut s = Wide::ZERO;
        for p in b.points()? {
            s += self.weight_wide(&p)?.powr(tau);
        }
        Ok(s)
    }

    /// Σ ℓ(u) over u lexicographically smaller than v.
    fn lex_prefix_mass(&self, v: &[i64]) -> Result<BigRational>;

    /// Some(c) when ℓ ≡ c.
    fn constant_value(&self) -> Option<BigRational> {
        None
    }
}

/// One factor of a product family.
pub trait AxisWeights: Send + Sync + fmt::Debug + Clone {
    fn label(&self) -> &'static str;
    fn lattice(&self) -> bool;
    fn weight(&self, i: i64) -> Result<BigRational>;
    fn log2_weight(&self, i: i64) -> Result<i64>;
    /// Σ_{i<a} w(i).
    fn prefix(&self, a: i64) -> BigRational;
    fn total(&self) -> BigRational;
    fn progression_mass(&self, p: &Progression) -> Result<Mass>;
    fn progression_power_sum(&self, p: &Progression, tau: Exponent) -> Result<Wide>;
}

/// 1 − 2^{−x} for x ≥ 0, accurate for small x.
fn one_minus_pow2_neg(x: f64) -> f64 {
    -(-x * std::f64::consts::LN_2).exp_m1()
}

/// Σ_{t<c} r^t with r = 2^{−u}, u > 0.
fn geometric_factor(u: f64, c: u64) -> f64 {
    one_minus_pow2_neg(u * c as f64) / one_minus_pow2_neg(u)
}

/// Exact Σ_{t<c} 2^{−(e0 + t·h)} for h > 0.
fn exact_dyadic_series(e0: i64, h: i64, c: u64) -> BigRational {
    // 2^{−e0} · (1 − 2^{−hc}) / (1 − 2^{−h})
    if c == 0 {
        return BigRational::zero();
    }
    // (2^{hc} − 1)/(2^h − 1) = Σ_t 2^{ht} is an odd integer.
    let hc = h as u64 * c;
    let num = (BigInt::one() << hc) - BigInt::one();
    let den = (BigInt::one() << h as u64) - BigInt::one();
    let q = if h == 1 { num } else { num / den };
    let s = -e0 + h - hc as i64;
    if s >= 0 {
        BigRational::from_integer(q << s as u64)
    } else {
        BigRational::new_raw(q, BigInt::one() << (-s) as u64)
    }
}

/// w(i) = 2^{−(i+1)} on ℕ₀.
#[derive(Clone, Debug, Default)]
pub struct GeometricAxis;

impl AxisWeights for GeometricAxis {
    fn label(&self) -> &'static str {
        "geometric"
    }

    fn lattice(&self) -> bool {
        false
    }

    fn weight(&self, i: i64) -> Result<BigRational> {
        Ok(pow2_rat(-self.log2_weight(i)?))
    }

    fn log2_weight(&self, i: i64) -> Result<i64> {
        if i < 0 {
            return Err(CoreError::Domain(format!("index {i} outside ℕ₀")));
        }
        Ok(i + 1)
    }

    fn prefix(&self, a: i64) -> BigRational {
        if a <= 0 {
            BigRational::zero()
        } else {
            BigRational::one() - pow2_rat(-a)
        }
    }

    fn total(&self) -> BigRational {
        BigRational::one()
    }

    fn progression_mass(&self, p: &Progression) -> Result<Mass> {
        if p.count == 0 {
            return Ok(Mass::zero());
        }
        if p.start < 0 {
            return Err(CoreError::Domain(format!("index {} outside ℕ₀", p.start)));
        }
        let span = p.start + 1 + p.stride.saturating_mul(p.count.min(i64::MAX as u64) as i64);
        if span <= EXACT_BITS {
            return Ok(Mass::Exact(exact_dyadic_series(
                p.start + 1,
                p.stride,
                p.count,
            )));
        }
        Ok(Mass::Approx(
            self.progression_power_sum(p, Exponent::one())?,
        ))
    }

    fn progression_power_sum(&self, p: &Progression, tau: Exponent) -> Result<Wide> {
        if p.count == 0 {
            return Ok(Wide::ZERO);
        }
        if p.start < 0 {
            return Err(CoreError::Domain(format!("index {} outside ℕ₀", p.start)));
        }
        let t = crate::num::exponent_to_f64(tau);
        let lead = Wide::pow2_frac(
            -((p.start as i128 + 1) * *tau.numer() as i128),
            *tau.denom() as i128,
        );
        Ok(lead * Wide::from_f64(geometric_factor(t * p.stride as f64, p.count)))
    }
}

/// w(i) = 2^{−|i|}/3 on ℤ.
#[derive(Clone, Debug, Default)]
pub struct SymmetricGeometricAxis;

impl SymmetricGeometricAxis {
    /// Splits a progression into its negative and nonnegative parts.
    fn split(p: &Progression) -> (Progression, Progression) {
        let neg = p.clip(i64::MIN / 2, -1);
        let pos = p.clip(0, i64::MAX / 2);
        (neg, pos)
    }
}

impl AxisWeights for SymmetricGeometricAxis {
    fn label(&self) -> &'static str {
        "symmetric-geometric"
    }

    fn lattice(&self) -> bool {
        true
    }

    fn weight(&self, i: i64) -> Result<BigRational> {
        Ok(pow2_rat(-i.abs()) * rat(1, 3))
    }

    fn log2_weight(&self, i: i64) -> Result<i64> {
        Ok(i.abs())
    }

    fn prefix(&self, a: i64) -> BigRational {
        if a <= 0 {
            pow2_rat(a) * rat(1, 3)
        } else {
            BigRational::one() - pow2_rat(1 - a) * rat(1, 3)
        }
    }

    fn total(&self) -> BigRational {
        BigRational::one()
    }

    fn progression_mass(&self, p: &Progression) -> Result<Mass> {
        if p.count == 0 {
            return Ok(Mass::zero());
        }
        let (neg, pos) = Self::split(p);
        let far = p.start.abs().max(p.last().abs());
        if far <= EXACT_BITS {
            let mut s = BigRational::zero();
            if pos.count > 0 {
                s += exact_dyadic_series(pos.start, pos.stride, pos.count);
            }
            if neg.count > 0 {
                // Walk the negative part from its largest index downwards.
                s += exact_dyadic_series(-neg.last(), neg.stride, neg.count);
            }
            return Ok(Mass::Exact(s * rat(1, 3)));
        }
        Ok(Mass::Approx(
            self.progression_power_sum(p, Exponent::one())?,
        ))
    }

    fn progression_power_sum(&self, p: &Progression, tau: Exponent) -> Result<Wide> {
        if p.count == 0 {
            return Ok(Wide::ZERO);
        }
        let t = crate::num::exponent_to_f64(tau);
        let (num, den) = (*tau.numer() as i128, *tau.denom() as i128);
        let part = |first_abs: i64, q: &Progression| -> Wide {
            if q.count == 0 {
                return Wide::ZERO;
            }
            Wide::pow2_frac(-(first_abs as i128) * num, den)
                * Wide::from_f64(geometric_factor(t * q.stride as f64, q.count))
        };
        let (neg, pos) = Self::split(p);
        let s = part(pos.start.abs(), &pos) + part(neg.last().abs(), &neg);
        Ok(s * Wide::from_f64(3f64.powf(-t)))
    }
}

/// ℓ(v) = ∏ w(v_k).
#[derive(Clone, Debug)]
pub struct ProductFamily<A: AxisWeights> {
    d: usize,
    axis: A,
}

pub fn geometric(d: usize) -> ProductFamily<GeometricAxis> {
    ProductFamily::new(d, GeometricAxis)
}

pub fn symmetric_geometric(d: usize) -> ProductFamily<SymmetricGeometricAxis> {
    ProductFamily::new(d, SymmetricGeometricAxis)
}

impl<A: AxisWeights> ProductFamily<A> {
    pub fn new(d: usize, axis: A) -> Self {
        assert!(
            (1..=super::MAX_DIM + 1).contains(&d),
            "dimension {d} out of range"
        );
        ProductFamily { d, axis }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.d {
            return Err(CoreError::Domain(format!(
                "expected dimension {}, got {n}",
                self.d
            )));
        }
        Ok(())
    }

    /// log2(1/ℓ(v)) for the geometric family; used by the cost shortcut.
    pub fn log2_inverse_weight(&self, v: &[i64]) -> Result<i64> {
        v.iter().map(|&x| self.axis.log2_weight(x)).sum()
    }
}

impl<A: AxisWeights + 'static> LengthFamily for ProductFamily<A> {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        self.axis.label().to_string()
    }

    fn support(&self) -> Support {
        if self.axis.lattice() {
            Support::Lattice
        } else {
            Support::Cone
        }
    }

    fn weight(&self, v: &[i64]) -> Result<BigRational> {
        self.check_dim(v.len())?;
        let mut w = BigRational::one();
        for &x in v {
            w *= self.axis.weight(x)?;
        }
        Ok(w)
    }

    fn weight_wide(&self, v: &[i64]) -> Result<Wide> {
        self.check_dim(v.len())?;
        let third = if self.axis.lattice() {
            Wide::from_f64(1.0 / 3.0)
        } else {
            Wide::ONE
        };
        let mut w = Wide::pow2(-self.log2_inverse_weight(v)?);
        if self.axis.lattice() {
            for _ in 0..self.d {
                w = w * third;
            }
        }
        Ok(w)
    }

    fn total_mass(&self) -> Result<BigRational> {
        Ok((0..self.d).fold(BigRational::one(), |a, _| a * self.axis.total()))
    }

    fn block_mass(&self, b: &Block) -> Result<Mass> {
        self.check_dim(b.dim())?;
        let mut m = Mass::Exact(BigRational::one());
        for p in &b.axes {
            m = m.mul(&self.axis.progression_mass(p)?);
        }
        Ok(m)
    }

    fn block_power_sum(&self, b: &Block, tau: Exponent) -> Result<Wide> {
        self.check_dim(b.dim())?;
        let mut m = Wide::ONE;
        for p in &b.axes {
            m = m * self.axis.progression_power_sum(p, tau)?;
        }
        Ok(m)
    }

    fn lex_prefix_mass(&self, v: &[i64]) -> Result<BigRational> {
        self.check_dim(v.len())?;
        if let Some(&x) = v.iter().find(|x| x.abs() > EXACT_BITS) {
            return Err(CoreError::guard(
                "exact prefix index",
                x.unsigned_abs() as u128,
                EXACT_BITS as u128,
            ));
        }
        let total = self.axis.total();
        let mut acc = BigRational::zero();
        let mut head = BigRational::one();
        for k in 0..self.d {
            let tail = (k + 1..self.d).fold(BigRational::one(), |a, _| a * &total);
            acc += &head * self.axis.prefix(v[k]) * tail;
            head *= self.axis.weight(v[k])?;
        }
        Ok(acc)
    }
}

/// ℓ ≡ c on a box, on ℕ₀^d or on ℤ^d (the last two are not summable).
#[derive(Clone, Debug)]
pub struct ConstantFamily {
    d: usize,
    value: BigRational,
    support: Support,
}

impl ConstantFamily {
    pub fn on_box(b: LatticeBox, value: BigRational) -> ConstantFamily {
        ConstantFamily {
            d: b.dim(),
            value,
            support: Support::Finite(b),
        }
    }

    /// Constant on a box with total mass 1.
    pub fn uniform(b: LatticeBox) -> ConstantFamily {
        let n = BigInt::from(b.count());
        ConstantFamily::on_box(b, BigRational::new(BigInt::one(), n))
    }

    pub fn cone(d: usize, value: BigRational) -> ConstantFamily {
        ConstantFamily {
            d,
            value,
            support: Support::Cone,
        }
    }

    pub fn lattice(d: usize, value: BigRational) -> ConstantFamily {
        ConstantFamily {
            d,
            value,
            support: Support::Lattice,
        }
    }
}

impl LengthFamily for ConstantFamily {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        format!("constant({})", self.value)
    }

    fn support(&self) -> Support {
        self.support.clone()
    }

    fn weight(&self, v: &[i64]) -> Result<BigRational> {
        if !self.in_support(v) {
            return Err(CoreError::Domain(format!("{v:?} outside the support")));
        }
        Ok(self.value.clone())
    }

    fn total_mass(&self) -> Result<BigRational> {
        match &self.support {
            Support::Finite(b) => {
                Ok(&self.value * BigRational::from_integer(BigInt::from(b.count())))
            }
            _ => Err(CoreError::Unsupported(
                "a constant family on an infinite lattice is not summable".into(),
            )),
        }
    }

    fn block_mass(&self, b: &Block) -> Result<Mass> {
        self.check_block(b)?;
        Ok(Mass::Exact(
            &self.value * BigRational::from_integer(BigInt::from(b.count())),
        ))
    }

    fn block_power_sum(&self, b: &Block, tau: Exponent) -> Result<Wide> {
        self.check_block(b)?;
        Ok(Wide::from_ratio(&self.value).powr(tau) * Wide::from_u128(b.count()))
    }

    fn lex_prefix_mass(&self, v: &[i64]) -> Result<BigRational> {
        match &self.support {
            Support::Finite(b) => {
                let idx = b
                    .linear_index(v)
                    .ok_or_else(|| CoreError::Domain(format!("{v:?} outside the support")))?;
                Ok(&self.value * BigRational::from_integer(BigInt::from(idx)))
            }
            _ => Err(CoreError::Unsupported(
                "lexicographic prefixes of an infinite constant family".into(),
            )),
        }
    }

    fn constant_value(&self) -> Option<BigRational> {
        Some(self.value.clone())
    }
}

impl ConstantFamily {
    fn check_block(&self, b: &Block) -> Result<()> {
        if b.is_empty() {
            return Ok(());
        }
        let ok = match &self.support {
            Support::Finite(bx) => b
                .axes
                .iter()
                .enumerate()
                .all(|(k, p)| bx.lo[k] <= p.start && p.last() <= bx.hi[k]),
            Support::Cone => b.axes.iter().all(|p| p.start >= 0),
            Support::Lattice => true,
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::Domain("block leaves the support".into()))
        }
    }
}

/// Arbitrary positive weights on a finite box, stored in lexicographic order
/// and renormalized to a chosen total.
#[derive(Clone, Debug)]
pub struct TableFamily {
    name: String,
    support: LatticeBox,
    weights: Vec<BigRational>,
    prefix: Vec<BigRational>,
}

impl TableFamily {
    /// Weights from `f`, rescaled so that they sum to 1.
    pub fn normalized(
        name: impl Into<String>,
        support: LatticeBox,
        mut f: impl FnMut(&[i64]) -> BigRational,
    ) -> Result<TableFamily> {
        let raw = TableFamily::raw(name, support, &mut f)?;
        let total = raw.prefix.last().unwrap().clone() + raw.weights.last().unwrap();
        let weights: Vec<BigRational> = raw.weights.iter().map(|w| w / &total).collect();
        Ok(TableFamily::from_weights(raw.name, raw.support, weights))
    }

    /// Weights from `f` as given.
    pub fn raw(
        name: impl Into<String>,
        support: LatticeBox,
        mut f: impl FnMut(&[i64]) -> BigRational,
    ) -> Result<TableFamily> {
        let n = support.count();
        if n > ENUM_LIMIT {
            return Err(CoreError::guard("weight table", n, ENUM_LIMIT));
        }
        let mut weights = Vec::with_capacity(n as usize);
        for p in support.points()? {
            let w = f(&p);
            if !w.is_positive() {
                return Err(CoreError::Domain(format!(
                    "weight at {:?} is not positive",
                    p.0
                )));
            }
            weights.push(w);
        }
        Ok(TableFamily::from_weights(name.into(), support, weights))
    }

    fn from_weights(name: String, support: LatticeBox, weights: Vec<BigRational>) -> TableFamily {
        let mut prefix = Vec::with_capacity(weights.len());
        let mut acc = BigRational::zero();
        for w in &weights {
            prefix.push(acc.clone());
            acc = rat_add(&acc, w);
        }
        TableFamily {
            name,
            support,
            weights,
            prefix,
        }
    }

    pub fn support_box(&self) -> &LatticeBox {
        &self.support
    }
}

impl LengthFamily for TableFamily {
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn support(&self) -> Support {
        Support::Finite(self.support.clone())
    }

    fn weight(&self, v: &[i64]) -> Result<BigRational> {
        let i = self
            .support
            .linear_index(v)
            .ok_or_else(|| CoreError::Domain(format!("{v:?} outside the support")))?;
        Ok(self.weights[i].clone())
    }

    fn total_mass(&self) -> Result<BigRational> {
        Ok(self.prefix.last().unwrap() + self.weights.last().unwrap())
    }

    /// Walks linear indices directly instead of materializing points.
    fn block_mass(&self, b: &Block) -> Result<Mass> {
        let d = self.dim();
        if b.dim() != d {
            return Err(CoreError::Domain(
                "block and support differ in dimension".into(),
            ));
        }
        if b.is_empty() {
            return Ok(Mass::zero());
        }
        let q = &self.support;
        for (k, p) in b.axes.iter().enumerate() {
            if p.start < q.lo[k] || p.last() > q.hi[k] {
                return Err(CoreError::Domain(format!(
                    "block leaves the support along axis {k}"
                )));
            }
        }
        let mut strides = vec![1usize; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * q.side(k + 1) as usize;
        }
        let step: Vec<usize> = (0..d)
            .map(|k| b.axes[k].stride as usize * strides[k])
            .collect();
        let first: usize = (0..d)
            .map(|k| (b.axes[k].start - q.lo[k]) as usize * strides[k])
            .sum();
        let mut counter = vec![0u64; d];
        let mut idx = first;
        let mut s = BigRational::zero();
        loop {
            s = rat_add(&s, &self.weights[idx]);
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(Mass::Exact(s));
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < b.axes[k].count {
                    idx += step[k];
                    break;
                }
                idx -= step[k] * (b.axes[k].count as usize - 1);
                counter[k] = 0;
            }
        }
    }

    fn lex_prefix_mass(&self, v: &[i64]) -> Result<BigRational> {
        let i = self
            .support
            .linear_index(v)
            .ok_or_else(|| CoreError::Domain(format!("{v:?} outside the support")))?;
        Ok(self.prefix[i].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use crate::num::int;

    fn brute_mass(f: &dyn LengthFamily, b: &Block) -> BigRational {
        b.points()
            .unwrap()
            .iter()
            .map(|p| f.weight(p).unwrap())
            .sum()
    }

    #[test]
    fn geometric_closed_forms_match_enumeration() {
        let g = geometric(3);
        let b = Block {
            axes: vec![
                Progression {
                    start: 2,
                    stride: 3,
                    count: 4,
                },
                Progression::interval(0, 5),
                Progression::single(7),
            ],
        };
        assert_eq!(g.block_mass(&b).unwrap(), Mass::Exact(brute_mass(&g, &b)));
        let tau = Exponent::new(1, 3);
        let brute: f64 = b
            .points()
            .unwrap()
            .iter()
            .map(|p| g.weight_wide(p).unwrap().to_f64().powf(1.0 / 3.0))
            .sum();
        let fast = g.block_power_sum(&b, tau).unwrap().to_f64();
        assert!((fast - brute).abs() < 1e-13 * brute);
    }

    #[test]
    fn symmetric_closed_forms_match_enumeration() {
        let s = symmetric_geometric(2);
        let b = Block {
            axes: vec![
                Progression {
                    start: -7,
                    stride: 2,
                    count: 8,
                },
                Progression::interval(-3, 2),
            ],
        };
        assert_eq!(s.block_mass(&b).unwrap(), Mass::Exact(brute_mass(&s, &b)));
        let tau = Exponent::new(2, 3);
        let brute: f64 = b
            .points()
            .unwrap()
            .iter()
            .map(|p| s.weight_wide(p).unwrap().to_f64().powf(2.0 / 3.0))
            .sum();
        let fast = s.block_power_sum(&b, tau).unwrap().to_f64();
        assert!((fast - brute).abs() < 1e-13 * brute);
    }

    #[test]
    fn huge_blocks_fall_back_to_wide() {
        let g = geometric(2);
        let b = Block {
            axes: vec![
                Progression::interval(1_000_000, 2_000_000_000),
                Progression::single(3),
            ],
        };
        let m = g.block_mass(&b).unwrap();
        assert!(!m.is_exact());
        assert_eq!(
            m.wide(),
            Wide::pow2(-1_000_001) * Wide::pow2(-4) * Wide::from_f64(2.0)
        );
    }

    #[test]
    fn lex_prefix_of_products() {
        let s = symmetric_geometric(2);
        let window = LatticeBox::new(vec![-30, -30], vec![30, 30]).unwrap();
        let v = [1i64, -2];
        // Everything lexicographically below v inside a wide window, plus tails.
        let mut approx = 0.0;
        for p in window.points().unwrap() {
            if p.0.as_slice() < &v[..] {
                approx += crate::num::ratio_to_f64(&s.weight(&p).unwrap());
            }
        }
        let exact = crate::num::ratio_to_f64(&s.lex_prefix_mass(&v).unwrap());
        assert!((exact - approx).abs() < 1e-8);
        assert!(s.lex_prefix_mass(&[i64::MIN / 4, 0]).is_err());
    }

    #[test]
    fn table_family_normalizes() {
        let b = LatticeBox::new(vec![0, 0], vec![1, 2]).unwrap();
        let t = TableFamily::normalized("t", b, |v| int(1 + v[0] + v[1])).unwrap();
        assert_eq!(t.total_mass().unwrap(), rat(1, 1));
        assert_eq!(t.weight(&[1, 2]).unwrap(), rat(4, 15));
        assert_eq!(t.lex_prefix_mass(&[1, 0]).unwrap(), rat(6, 15));
    }

    #[test]
    fn table_block_mass_matches_enumeration() {
        let q = LatticeBox::new(vec![-2, 1, 0], vec![3, 4, 6]).unwrap();
        let t = TableFamily::raw("t", q, |v| {
            rat(1 + (v[0] * 7 + v[1] * 3 + v[2]).rem_euclid(11), 3)
        })
        .unwrap();
        let b = Block {
            axes: vec![
                Progression {
                    start: -1,
                    stride: 2,
                    count: 3,
                },
                Progression::single(2),
                Progression {
                    start: 0,
                    stride: 3,
                    count: 3,
                },
            ],
        };
        assert_eq!(t.block_mass(&b).unwrap(), Mass::Exact(brute_mass(&t, &b)));
        let line = Block {
            axes: vec![
                Progression::single(0),
                Progression::interval(1, 4),
                Progression::single(5),
            ],
        };
        assert_eq!(
            t.block_mass(&line).unwrap(),
            Mass::Exact(brute_mass(&t, &line))
        );
        let out = Block {
            axes: vec![
                Progression::interval(2, 4),
                Progression::single(1),
                Progression::single(0),
            ],
        };
        assert!(t.block_mass(&out).is_err());
    }

    #[test]
    fn constant_family_guards() {
        let c = ConstantFamily::cone(2, rat(1, 1));
        assert!(c.total_mass().is_err());
        assert!(c.weight(&[-1, 0]).is_err());
    }
}
