//! Lattice substrate: multi-indices, integer boxes, arithmetic-progression
//! blocks, unidirectional segments, monotone paths and the cost functionals
//! built on a [`LengthFamily`].
//!
//! Axes are 0-based in code. A [`Block`] is a product of one arithmetic
//! progression per axis; boxes, segments, strided segments and planes are all
//! blocks, so every mass in the crate goes through [`LengthFamily::block_mass`]
//! or [`LengthFamily::block_power_sum`].

mod family;

pub use family::{
    geometric, symmetric_geometric, ConstantFamily, GeometricAxis, LengthFamily, ProductFamily,
    SharedFamily, Support, SymmetricGeometricAxis, TableFamily,
};

use std::ops::Deref;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::num::{Exponent, Mass, Wide};

/// Dimension cap for every lattice context.
pub const MAX_DIM: usize = 6;

/// Largest point set any routine will enumerate explicitly.
pub const ENUM_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<i64>);

impl MultiIndex {
    pub fn new(coords: Vec<i64>) -> MultiIndex {
        MultiIndex(coords)
    }

    pub fn zeros(d: usize) -> MultiIndex {
        MultiIndex(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn shifted(&self, axis: usize, delta: i64) -> Result<MultiIndex> {
        let mut c = self.0.clone();
        c[axis] = c[axis]
            .checked_add(delta)
            .ok_or_else(|| CoreError::Overflow(format!("coordinate {} + {delta}", c[axis])))?;
        Ok(MultiIndex(c))
    }

    /// Checks the ℕ₀^d requirement of walk contexts.
    pub fn require_cone(&self) -> Result<()> {
        if self.is_nonnegative() {
            Ok(())
        } else {
            Err(CoreError::Domain(format!(
                "{:?} has a negative coordinate",
                self.0
            )))
        }
    }
}

impl Deref for MultiIndex {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex(v)
    }
}

impl From<&[i64]> for MultiIndex {
    fn from(v: &[i64]) -> Self {
        MultiIndex(v.to_vec())
    }
}

/// Product of closed integer intervals `[lo_k, hi_k]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<LatticeBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(CoreError::Domain(
                "box corners of different or zero dimension".into(),
            ));
        }
        if let Some(k) = (0..lo.len()).find(|&k| lo[k] > hi[k]) {
            return Err(CoreError::Domain(format!(
                "box side {k} has lo {} > hi {}",
                lo[k], hi[k]
            )));
        }
        Ok(LatticeBox { lo, hi })
    }

    pub fn cube(d: usize, lo: i64, hi: i64) -> Result<LatticeBox> {
        LatticeBox::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Number of lattice points along axis `k`.
    pub fn side(&self, k: usize) -> u128 {
        (self.hi[k] as i128 - self.lo[k] as i128 + 1) as u128
    }

    pub fn count(&self) -> u128 {
        (0..self.dim()).fold(1u128, |acc, k| acc.saturating_mul(self.side(k)))
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        v.len() == self.dim() && (0..self.dim()).all(|k| self.lo[k] <= v[k] && v[k] <= self.hi[k])
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.lo[k] && other.hi[k] <= self.hi[k])
    }

    pub fn intersect(&self, other: &LatticeBox) -> Option<LatticeBox> {
        let lo: Vec<i64> = (0..self.dim())
            .map(|k| self.lo[k].max(other.lo[k]))
            .collect();
        let hi: Vec<i64> = (0..self.dim())
            .map(|k| self.hi[k].min(other.hi[k]))
            .collect();
        LatticeBox::new(lo, hi).ok()
    }

    /// The same box with axis `k` pinned to the single value `c`.
    pub fn slice(&self, k: usize, c: i64) -> LatticeBox {
        let mut b = self.clone();
        b.lo[k] = c;
        b.hi[k] = c;
        b
    }

    pub fn to_block(&self) -> Block {
        Block {
            axes: (0..self.dim())
                .map(|k| Progression {
                    start: self.lo[k],
                    stride: 1,
                    count: self.side(k) as u64,
                })
                .collect(),
        }
    }

    pub fn points(&self) -> Result<Vec<MultiIndex>> {
        self.to_block().points()
    }

    /// Row-major (lexicographic) position of `v`.
    pub fn linear_index(&self, v: &[i64]) -> Option<usize> {
        if !self.contains(v) {
            return None;
        }
        let mut idx: usize = 0;
        for k in 0..self.dim() {
            idx = idx * self.side(k) as usize + (v[k] - self.lo[k]) as usize;
        }
        Some(idx)
    }
}

/// `start, start + stride, …` with `count` terms; `stride > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Progression {
    pub start: i64,
    pub stride: i64,
    pub count: u64,
}

impl Progression {
    pub fn single(x: i64) -> Progression {
        Progression {
            start: x,
            stride: 1,
            count: 1,
        }
    }

    pub fn interval(lo: i64, hi: i64) -> Progression {
        let count = if hi < lo { 0 } else { (hi - lo + 1) as u64 };
        Progression {
            start: lo,
            stride: 1,
            count,
        }
    }

    pub fn last(&self) -> i64 {
        self.start + self.stride * (self.count as i64 - 1)
    }

    pub fn term(&self, t: u64) -> i64 {
        self.start + self.stride * t as i64
    }

    pub fn index_of(&self, x: i64) -> Option<u64> {
        if self.count == 0 || x < self.start || x > self.last() {
            return None;
        }
        let off = x - self.start;
        (off % self.stride == 0).then(|| (off / self.stride) as u64)
    }

    /// Terms lying in `[lo, hi]`, again as a progression.
    pub fn clip(&self, lo: i64, hi: i64) -> Progression {
        if self.count == 0 || hi < lo {
            return Progression { count: 0, ..*self };
        }
        let first_t = if lo <= self.start {
            0
        } else {
            (lo - self.start + self.stride - 1) / self.stride
        };
        let last = self.last().min(hi);
        if last < self.start {
            return Progression { count: 0, ..*self };
        }
        let last_t = (last - self.start) / self.stride;
        if last_t < first_t {
            return Progression { count: 0, ..*self };
        }
        Progression {
            start: self.start + first_t * self.stride,
            stride: self.stride,
            count: (last_t - first_t + 1) as u64,
        }
    }
}

/// Product of per-axis progressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub axes: Vec<Progression>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn count(&self) -> u128 {
        self.axes
            .iter()
            .fold(1u128, |a, p| a.saturating_mul(p.count as u128))
    }

    pub fn is_empty(&self) -> bool {
        self.axes.iter().any(|p| p.count == 0)
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        v.len() == self.dim()
            && self
                .axes
                .iter()
                .zip(v)
                .all(|(p, &x)| p.index_of(x).is_some())
    }

    pub fn clip(&self, b: &LatticeBox) -> Block {
        Block {
            axes: self
                .axes
                .iter()
                .enumerate()
                .map(|(k, p)| p.clip(b.lo[k], b.hi[k]))
                .collect(),
        }
    }

    /// Lattice points in lexicographic order; refuses above [`ENUM_LIMIT`].
    pub fn points(&self) -> Result<Vec<MultiIndex>> {
        let n = self.count();
        if n > ENUM_LIMIT {
            return Err(CoreError::guard("point enumeration", n, ENUM_LIMIT));
        }
        let mut out = Vec::with_capacity(n as usize);
        if n == 0 {
            return Ok(out);
        }
        let d = self.dim();
        let mut t = vec![0u64; d];
        loop {
            out.push(MultiIndex(
                (0..d).map(|k| self.axes[k].term(t[k])).collect(),
            ));
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                t[k] += 1;
                if t[k] < self.axes[k].count {
                    break;
                }
                t[k] = 0;
            }
        }
    }
}

/// Points `anchor + t·step·e_axis` for `t = 0..count`. A count of zero is an
/// empty segment. Strides other than one come from strided generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub anchor: MultiIndex,
    pub axis: usize,
    pub step: i64,
    pub count: u64,
}

impl Segment {
    pub fn new(anchor: MultiIndex, axis: usize, step: i64, count: u64) -> Result<Segment> {
        if axis >= anchor.dim() || step == 0 {
            return Err(CoreError::Domain(format!(
                "segment axis {axis} / step {step} invalid in dimension {}",
                anchor.dim()
            )));
        }
        Ok(Segment {
            anchor,
            axis,
            step,
            count,
        })
    }

    /// The full line of `b` along `axis` through `p`, unit stride, increasing.
    pub fn line_in(b: &LatticeBox, p: &[i64], axis: usize) -> Segment {
        let mut a = p.to_vec();
        a[axis] = b.lo[axis];
        Segment {
            anchor: MultiIndex(a),
            axis,
            step: 1,
            count: b.side(axis) as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point(&self, t: u64) -> MultiIndex {
        let mut c = self.anchor.0.clone();
        c[self.axis] += self.step * t as i64;
        MultiIndex(c)
    }

    pub fn last(&self) -> Option<MultiIndex> {
        (self.count > 0).then(|| self.point(self.count - 1))
    }

    pub fn position(&self, v: &[i64]) -> Option<u64> {
        if self.count == 0 || v.len() != self.anchor.dim() {
            return None;
        }
        for k in 0..v.len() {
            if k != self.axis && v[k] != self.anchor[k] {
                return None;
            }
        }
        let off = v[self.axis] - self.anchor[self.axis];
        if off % self.step != 0 {
            return None;
        }
        let t = off / self.step;
        (t >= 0 && (t as u64) < self.count).then_some(t as u64)
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.position(v).is_some()
    }

    pub fn to_block(&self) -> Block {
        let mut axes: Vec<Progression> = self
            .anchor
            .iter()
            .map(|&x| Progression::single(x))
            .collect();
        if self.count == 0 {
            axes[self.axis].count = 0;
            return Block { axes };
        }
        let a = self.anchor[self.axis];
        let z = a + self.step * (self.count as i64 - 1);
        axes[self.axis] = Progression {
            start: a.min(z),
            stride: self.step.abs(),
            count: self.count,
        };
        Block { axes }
    }

    /// The sub-segment from position `t0` to `t1` inclusive (either order),
    /// oriented from `t0` towards `t1`.
    pub fn between(&self, t0: u64, t1: u64) -> Segment {
        let (step, count) = if t1 >= t0 {
            (self.step, t1 - t0 + 1)
        } else {
            (-self.step, t0 - t1 + 1)
        };
        Segment {
            anchor: self.point(t0),
            axis: self.axis,
            step,
            count,
        }
    }

    pub fn within(&self, b: &LatticeBox) -> bool {
        self.count == 0 || (b.contains(&self.anchor) && b.contains(&self.last().unwrap()))
    }

    /// Shared point with another segment, if any.
    pub fn meet(&self, other: &Segment) -> Option<MultiIndex> {
        if self.count == 0 || other.count == 0 {
            return None;
        }
        if self.axis == other.axis {
            let a = self.to_block();
            let b = other.to_block();
            for k in 0..a.dim() {
                if k != self.axis && a.axes[k].start != b.axes[k].start {
                    return None;
                }
            }
            let (pa, pb) = (a.axes[self.axis], b.axes[self.axis]);
            let lo = pa.start.max(pb.start);
            let hi = pa.last().min(pb.last());
            let mut x = lo;
            while x <= hi {
                if pa.index_of(x).is_some() && pb.index_of(x).is_some() {
                    let mut c = self.anchor.0.clone();
                    c[self.axis] = x;
                    return Some(MultiIndex(c));
                }
                x += 1;
            }
            return None;
        }
        // `other` is constant along `self.axis`, so that coordinate is forced.
        let mut cand = self.anchor.0.clone();
        cand[self.axis] = other.anchor[self.axis];
        (self.contains(&cand) && other.contains(&cand)).then_some(MultiIndex(cand))
    }
}

/// Ordered lattice points, consecutive ones differing by ±1 in one coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub points: Vec<MultiIndex>,
}

impl LatticePath {
    pub fn new(points: Vec<MultiIndex>) -> Result<LatticePath> {
        if points.is_empty() {
            return Err(CoreError::Domain("empty path".into()));
        }
        for w in points.windows(2) {
            if step_axis(&w[0], &w[1]).is_none() {
                return Err(CoreError::Domain(format!(
                    "{:?} -> {:?} is not a unit lattice step",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(LatticePath { points })
    }

    /// Builds the monotone path from `start` taking the listed axes in order.
    pub fn from_steps(start: MultiIndex, axes: &[usize]) -> Result<LatticePath> {
        let mut pts = Vec::with_capacity(axes.len() + 1);
        pts.push(start);
        for &a in axes {
            let next = pts.last().unwrap().shifted(a, 1)?;
            pts.push(next);
        }
        Ok(LatticePath { points: pts })
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> &MultiIndex {
        &self.points[0]
    }

    pub fn end(&self) -> &MultiIndex {
        self.points.last().unwrap()
    }

    /// Axis of the step leaving point `j`, and its sign.
    pub fn step(&self, j: usize) -> (usize, i64) {
        step_axis(&self.points[j], &self.points[j + 1]).unwrap()
    }

    /// Every step is +1 in some coordinate.
    pub fn is_geodesic(&self) -> bool {
        (0..self.len()).all(|j| self.step(j).1 == 1)
    }
}

fn step_axis(a: &MultiIndex, b: &MultiIndex) -> Option<(usize, i64)> {
    if a.dim() != b.dim() {
        return None;
    }
    let mut found = None;
    for k in 0..a.dim() {
        let diff = b[k] - a[k];
        if diff != 0 {
            if found.is_some() || diff.abs() != 1 {
                return None;
            }
            found = Some((k, diff));
        }
    }
    found
}

/// |{v ∈ ℕ₀^d : Σ v_k = n}| = C(n+d−1, d−1), saturating at `u128::MAX`.
pub fn sphere_size(d: usize, n: u64) -> u128 {
    assert!(d >= 1, "dimension must be positive");
    let mut c = BigUint::one();
    for i in 1..d as u64 {
        c = c * BigUint::from(n + i) / BigUint::from(i);
    }
    c.to_u128().unwrap_or(u128::MAX)
}

/// Points of the n-sphere in lexicographic order.
pub fn sphere_points(d: usize, n: u64) -> Result<Vec<MultiIndex>> {
    let size = sphere_size(d, n);
    if size > ENUM_LIMIT {
        return Err(CoreError::guard("sphere enumeration", size, ENUM_LIMIT));
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0i64; d];
    fn rec(k: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<MultiIndex>) {
        let d = cur.len();
        if k == d - 1 {
            cur[k] = left;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for x in (0..=left).rev() {
            cur[k] = x;
            rec(k + 1, left - x, cur, out);
        }
    }
    rec(0, n as i64, &mut cur, &mut out);
    out.reverse();
    Ok(out)
}

/// Regions accepted by [`region_mass`].
#[derive(Clone, Debug)]
pub enum Region {
    Box(LatticeBox),
    Block(Block),
    Segment(Segment),
    Points(Vec<MultiIndex>),
    /// The n-sphere of ℕ₀^d.
    Sphere(u64),
    /// The whole support of the family.
    Support,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionMass {
    pub sum: Mass,
    /// Absent for infinite regions.
    pub mean: Option<Mass>,
    pub count: Option<u128>,
}

/// Exact sum of ℓ over the region and its mean.
pub fn region_mass(fam: &dyn LengthFamily, region: &Region) -> Result<RegionMass> {
    let with_mean = |sum: Mass, count: u128| -> Result<RegionMass> {
        if count == 0 {
            return Err(CoreError::Domain("empty region".into()));
        }
        let mean = sum.div_count(count);
        Ok(RegionMass {
            sum,
            mean: Some(mean),
            count: Some(count),
        })
    };
    match region {
        Region::Box(b) => with_mean(fam.block_mass(&b.to_block())?, b.count()),
        Region::Block(b) => with_mean(fam.block_mass(b)?, b.count()),
        Region::Segment(s) => with_mean(fam.block_mass(&s.to_block())?, s.count as u128),
        Region::Points(pts) => {
            let mut sum = BigRational::zero();
            for p in pts {
                sum += fam.weight(p)?;
            }
            with_mean(Mass::Exact(sum), pts.len() as u128)
        }
        Region::Sphere(n) => {
            if fam.support() != Support::Cone {
                return Err(CoreError::Unsupported(
                    "spheres are defined on the positive cone".into(),
                ));
            }
            let mut sum = BigRational::zero();
            for p in sphere_points(fam.dim(), *n)? {
                sum += fam.weight(&p)?;
            }
            with_mean(Mass::Exact(sum), sphere_size(fam.dim(), *n))
        }
        Region::Support => match fam.support() {
            Support::Finite(b) => with_mean(fam.block_mass(&b.to_block())?, b.count()),
            _ => Ok(RegionMass {
                sum: Mass::Exact(fam.total_mass()?),
                mean: None,
                count: None,
            }),
        },
    }
}

/// Exponent choice for [`path_cost`]: one τ, or one α per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CostExponents {
    Single(Exponent),
    PerAxis(Vec<Exponent>),
}

impl CostExponents {
    pub fn for_axis(&self, axis: usize) -> Exponent {
        match self {
            CostExponents::Single(t) => *t,
            CostExponents::PerAxis(v) => v[axis],
        }
    }
}

/// Σ_{j<n} ℓ(γ(j))^{e(j)}, with e(j) the exponent of the step leaving γ(j).
/// Exact when every exponent used is 1.
pub fn path_cost(path: &LatticePath, fam: &dyn LengthFamily, exps: &CostExponents) -> Result<Mass> {
    if path.is_empty() {
        return Err(CoreError::Domain(
            "path_cost needs at least one step".into(),
        ));
    }
    let one = Exponent::one();
    let mut exact = BigRational::zero();
    let mut approx = Wide::ZERO;
    let mut all_exact = true;
    for j in 0..path.len() {
        let (axis, _) = path.step(j);
        let e = exps.for_axis(axis);
        let p = &path.points[j];
        if e == one {
            exact += fam.weight(p)?;
        } else {
            all_exact = false;
            approx += fam.weight_wide(p)?.powr(e);
        }
    }
    if all_exact {
        Ok(Mass::Exact(exact))
    } else {
        Ok(Mass::Approx(approx + Wide::from_ratio(&exact)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn sphere_sizes() {
        assert_eq!(sphere_size(1, 5), 1);
        assert_eq!(sphere_size(2, 3), 4);
        assert_eq!(sphere_size(3, 2), 6);
        assert_eq!(sphere_points(3, 2).unwrap().len(), 6);
    }

    #[test]
    fn sphere_points_are_sorted_and_on_sphere() {
        let pts = sphere_points(3, 4).unwrap();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(pts.iter().all(|p| p.sum() == 4 && p.is_nonnegative()));
    }

    #[test]
    fn region_masses_of_geometric_family() {
        let g = geometric(2);
        let all = region_mass(&g, &Region::Support).unwrap();
        assert_eq!(all.sum, Mass::exact(rat(1, 1)));
        let s1 = region_mass(&g, &Region::Sphere(1)).unwrap();
        assert_eq!(s1.sum, Mass::exact(rat(1, 4)));
        let pts = region_mass(
            &g,
            &Region::Points(vec![vec![1, 0].into(), vec![0, 1].into()]),
        )
        .unwrap();
        assert_eq!(pts.sum, s1.sum);
    }

    #[test]
    fn constant_family_on_box() {
        let b = LatticeBox::new(vec![0, 0], vec![2, 3]).unwrap();
        let c = ConstantFamily::on_box(b.clone(), rat(3, 7));
        let m = region_mass(&c, &Region::Box(b)).unwrap();
        assert_eq!(m.sum, Mass::exact(rat(36, 7)));
        assert_eq!(m.mean, Some(Mass::exact(rat(3, 7))));
    }

    #[test]
    fn path_cost_examples() {
        let g = geometric(2);
        let p = LatticePath::new(vec![
            vec![0, 0].into(),
            vec![1, 0].into(),
            vec![1, 1].into(),
        ])
        .unwrap();
        let half = CostExponents::Single(Exponent::new(1, 2));
        let c = path_cost(&p, &g, &half).unwrap().to_f64();
        assert!((c - (0.25f64.sqrt() + 0.125f64.sqrt())).abs() < 1e-14);
        let one = CostExponents::Single(Exponent::one());
        let p1 = LatticePath::from_steps(MultiIndex::zeros(2), &[1]).unwrap();
        assert_eq!(path_cost(&p1, &g, &one).unwrap(), Mass::exact(rat(1, 4)));
        let unit = ConstantFamily::cone(3, rat(1, 1));
        let p5 = LatticePath::from_steps(MultiIndex::zeros(3), &[0, 2, 2, 1, 0]).unwrap();
        let c5 = path_cost(&p5, &unit, &CostExponents::Single(Exponent::new(1, 3))).unwrap();
        assert_eq!(c5.to_f64(), 5.0);
    }

    #[test]
    fn rejects_non_adjacent_paths() {
        assert!(LatticePath::new(vec![vec![0, 0].into(), vec![1, 1].into()]).is_err());
        assert!(LatticePath::new(vec![vec![0, 0].into(), vec![2, 0].into()]).is_err());
        let back = LatticePath::new(vec![vec![1, 0].into(), vec![0, 0].into()]).unwrap();
        assert!(!back.is_geodesic());
    }

    #[test]
    fn progression_clip() {
        let p = Progression {
            start: 3,
            stride: 4,
            count: 10,
        }; // 3..=39
        let c = p.clip(10, 30);
        assert_eq!((c.start, c.count), (11, 5));
        assert_eq!(p.clip(40, 50).count, 0);
        assert_eq!(p.index_of(19), Some(4));
        assert_eq!(p.index_of(20), None);
    }

    #[test]
    fn segments_meet_and_embed() {
        let h = Segment::new(vec![0, 5].into(), 0, 1, 10).unwrap();
        let v = Segment::new(vec![3, 0].into(), 1, 1, 8).unwrap();
        assert_eq!(h.meet(&v), Some(MultiIndex(vec![3, 5])));
        let strided = Segment::new(vec![3, 1].into(), 1, 3, 4).unwrap(); // rows 1,4,7,10
        assert_eq!(strided.meet(&h), None);
        let h4 = Segment::new(vec![0, 4].into(), 0, 1, 10).unwrap();
        assert_eq!(strided.meet(&h4), Some(MultiIndex(vec![3, 4])));
        let down = Segment::new(vec![2, 9].into(), 1, -2, 3).unwrap(); // rows 9,7,5
        assert_eq!(
            down.to_block().axes[1],
            Progression {
                start: 5,
                stride: 2,
                count: 3
            }
        );
        assert_eq!(down.position(&[2, 5]), Some(2));
        let parallel = Segment::new(vec![2, 6].into(), 1, 1, 3).unwrap(); // rows 6,7,8
        assert_eq!(down.meet(&parallel), Some(MultiIndex(vec![2, 7])));
    }
}
