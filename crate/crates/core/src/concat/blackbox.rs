//! Reaching most of a box from one flagged line by at most D−1 hops along
//! good unidirectional lines.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::lattice::{LatticeBox, LengthFamily, MultiIndex, Segment, ENUM_LIMIT};
use crate::num::{int, ratio_string, Mass};

use super::{big, fraction};

fn check_kappa(kappa: &BigRational) -> Result<()> {
    if *kappa <= BigRational::zero() || *kappa >= BigRational::one() {
        return Err(CoreError::Domain(format!(
            "κ = {kappa} must lie strictly between 0 and 1"
        )));
    }
    Ok(())
}

/// λ′(μ, κ, D) for a D-dimensional box.
///
/// D = 2: every line crossing the start line is a hop, so λ = 2/(1−κ) leaves
/// a good fraction (1+κ)/2 > κ. D ≥ 3: slices along the first flag axis are
/// kept when all D−1 of their flag pieces are λ_D-good with
/// λ_D = 2(D−1)/(1−κ), a fraction ≥ (1+κ)/2; inside each kept slice the
/// (D−1)-dimensional step runs with κ′ = 2κ/(1+κ), so the product is κ.
pub fn lambda_prime(mu: &BigRational, kappa: &BigRational, d: usize) -> Result<BigRational> {
    check_kappa(kappa)?;
    if *mu < BigRational::one() {
        return Err(CoreError::Domain(format!("μ = {mu} must be at least 1")));
    }
    if d < 2 {
        return Err(CoreError::Domain(
            "the hop recursion needs dimension ≥ 2".into(),
        ));
    }
    let one = BigRational::one();
    if d == 2 {
        return Ok(int(2) / (&one - kappa));
    }
    let lam = int(2 * (d as i64 - 1)) / (&one - kappa);
    let inner_kappa = int(2) * kappa / (&one + kappa);
    let inner = lambda_prime(mu, &inner_kappa, d - 1)?;
    Ok(lam * if *mu > inner { mu.clone() } else { inner })
}

/// Line masses of a box, indexed by axis and then by the line's position
/// among the lines of that axis.
#[derive(Clone, Debug)]
pub struct LineTable {
    pub q: LatticeBox,
    pub total: Mass,
    sides: Vec<usize>,
    strides: Vec<usize>,
    n: usize,
    sums: Vec<Vec<Mass>>,
}

impl LineTable {
    pub fn new(fam: &dyn LengthFamily, q: &LatticeBox) -> Result<LineTable> {
        let n = q.count();
        if n > ENUM_LIMIT {
            return Err(CoreError::guard("line table", n, ENUM_LIMIT));
        }
        let d = q.dim();
        let sides: Vec<usize> = (0..d).map(|k| q.side(k) as usize).collect();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sides[k + 1];
        }
        let n = n as usize;
        let mut sums = Vec::with_capacity(d);
        for m in 0..d {
            let lines = n / sides[m];
            let mut v = Vec::with_capacity(lines);
            for li in 0..lines {
                let base = Self::base_of(&strides, &sides, m, li);
                let seg = Segment::line_in(q, &Self::coords(q, &strides, base), m);
                v.push(fam.block_mass(&seg.to_block())?);
            }
            sums.push(v);
        }
        let total = fam.block_mass(&q.to_block())?;
        Ok(LineTable {
            q: q.clone(),
            total,
            sides,
            strides,
            n,
            sums,
        })
    }

    fn base_of(strides: &[usize], sides: &[usize], m: usize, li: usize) -> usize {
        let inner = strides[m];
        (li / inner) * inner * sides[m] + li % inner
    }

    fn coords(q: &LatticeBox, strides: &[usize], idx: usize) -> Vec<i64> {
        let mut r = idx;
        (0..q.dim())
            .map(|k| {
                let c = r / strides[k];
                r %= strides[k];
                q.lo[k] + c as i64
            })
            .collect()
    }

    fn line_index(&self, m: usize, idx: usize) -> usize {
        let inner = self.strides[m];
        let outer = inner * self.sides[m];
        (idx / outer) * inner + idx % inner
    }

    fn base(&self, m: usize, li: usize) -> usize {
        Self::base_of(&self.strides, &self.sides, m, li)
    }

    pub fn point_count(&self) -> usize {
        self.n
    }

    pub fn line_mass(&self, m: usize, p: &[i64]) -> Option<&Mass> {
        let idx = self.q.linear_index(p)?;
        Some(&self.sums[m][self.line_index(m, idx)])
    }

    /// Σ_line · |S(m)| ≤ λ · Σ_Q for every line of every axis.
    pub fn good_lines(&self, lambda: &BigRational) -> Vec<Vec<bool>> {
        let cap = self.total.scale(lambda);
        (0..self.q.dim())
            .map(|m| {
                let copies = self.sums[m].len() as u128;
                self.sums[m]
                    .iter()
                    .map(|s| s.mul_count(copies).le(&cap))
                    .collect()
            })
            .collect()
    }

    /// Breadth-first closure of hops from the points of `gamma`.
    pub fn reach(&self, gamma: &Segment, lambda_prime: &BigRational) -> Result<BlackBoxReach> {
        let d = self.q.dim();
        if d < 2 {
            return Err(CoreError::Domain("hops need at least two axes".into()));
        }
        let gamma = full_line(&self.q, gamma)?;
        let good = self.good_lines(lambda_prime);
        let offsets: Vec<usize> = (0..d)
            .scan(0usize, |acc, m| {
                let o = *acc;
                *acc += self.sums[m].len();
                Some(o)
            })
            .collect();
        let nlines = offsets[d - 1] + self.sums[d - 1].len();
        let mut level = vec![0u8; nlines];
        let mut parent = vec![(u32::MAX, u32::MAX); nlines];
        let mut queue = VecDeque::new();
        let max_hops = d - 1;
        for t in 0..gamma.count {
            let idx = self.q.linear_index(&gamma.point(t)).unwrap();
            for m in 0..d {
                let li = self.line_index(m, idx);
                let g = offsets[m] + li;
                if good[m][li] && level[g] == 0 {
                    level[g] = 1;
                    parent[g] = (u32::MAX, idx as u32);
                    queue.push_back((m, li));
                }
            }
        }
        while let Some((m, li)) = queue.pop_front() {
            let g = offsets[m] + li;
            let lv = level[g];
            if lv as usize >= max_hops {
                continue;
            }
            let base = self.base(m, li);
            for t in 0..self.sides[m] {
                let idx = base + t * self.strides[m];
                for m2 in (0..d).filter(|&x| x != m) {
                    let li2 = self.line_index(m2, idx);
                    let g2 = offsets[m2] + li2;
                    if good[m2][li2] && level[g2] == 0 {
                        level[g2] = lv + 1;
                        parent[g2] = (g as u32, idx as u32);
                        queue.push_back((m2, li2));
                    }
                }
            }
        }
        let mut reached = vec![false; self.n];
        for m in 0..d {
            for li in 0..self.sums[m].len() {
                if level[offsets[m] + li] == 0 {
                    continue;
                }
                let base = self.base(m, li);
                for t in 0..self.sides[m] {
                    reached[base + t * self.strides[m]] = true;
                }
            }
        }
        let reached_count = reached.iter().filter(|&&b| b).count() as u128;
        let lines_good = good
            .iter()
            .map(|v| v.iter().filter(|&&b| b).count() as u128)
            .collect();
        let lines_total = good.iter().map(|v| v.len() as u128).collect();
        Ok(BlackBoxReach {
            q: self.q.clone(),
            gamma,
            lambda_prime: lambda_prime.clone(),
            kappa: None,
            mu: None,
            flag: Vec::new(),
            total: self.n as u128,
            reached_count,
            fraction: fraction(reached_count, self.n as u128),
            meets_kappa: None,
            max_hops,
            lines_good,
            lines_total,
            reached,
            level,
            parent,
            offsets,
            strides: self.strides.clone(),
            sides: self.sides.clone(),
        })
    }
}

/// The full line of `q` carrying `gamma`.
fn full_line(q: &LatticeBox, gamma: &Segment) -> Result<Segment> {
    if gamma.anchor.dim() != q.dim() || !q.contains(&gamma.anchor) {
        return Err(CoreError::Domain("start line is not inside the box".into()));
    }
    let line = Segment::line_in(q, &gamma.anchor, gamma.axis);
    if gamma.step.abs() != 1 || gamma.count != line.count {
        return Err(CoreError::Domain(
            "start segment must be a full unit-stride line of the box".into(),
        ));
    }
    Ok(line)
}

/// Copy-count ratios c(Q^k, Q)·Σ_{Q^k}/Σ_Q of the flag Q^1 = γ ⊂ … ⊂ Q^{D−1},
/// where Q^k frees the axes a, a+1, …, a+k−1 (mod D) from γ's axis a.
pub fn flag_ratios(fam: &dyn LengthFamily, q: &LatticeBox, gamma: &Segment) -> Result<Vec<Mass>> {
    let gamma = full_line(q, gamma)?;
    let d = q.dim();
    let total = fam.block_mass(&q.to_block())?;
    let mut out = Vec::with_capacity(d - 1);
    for k in 1..d {
        let mut piece = q.clone();
        for j in k..d {
            let ax = (gamma.axis + j) % d;
            piece = piece.slice(ax, gamma.anchor[ax]);
        }
        let copies: u128 = (k..d).map(|j| q.side((gamma.axis + j) % d)).product();
        let s = fam.block_mass(&piece.to_block())?;
        out.push(if s.is_zero() {
            Mass::zero()
        } else {
            s.mul_count(copies).div(&total)
        });
    }
    Ok(out)
}

fn mass_ratio(m: &Mass) -> BigRational {
    match m {
        Mass::Exact(r) => r.clone(),
        Mass::Approx(w) => w.to_ratio(),
    }
}

/// The line along `axis` whose flag has the smallest worst ratio (first in
/// lexicographic order on ties), with μ = max(1, that ratio).
pub fn best_flagged_segment(
    fam: &dyn LengthFamily,
    q: &LatticeBox,
    axis: usize,
) -> Result<(Segment, BigRational)> {
    if axis >= q.dim() || q.dim() < 2 {
        return Err(CoreError::Domain(format!(
            "axis {axis} invalid for a {}-dimensional box",
            q.dim()
        )));
    }
    let mut face = q.clone();
    face.hi[axis] = face.lo[axis];
    let mut best: Option<(Segment, Mass)> = None;
    for p in face.points()? {
        let seg = Segment::line_in(q, &p, axis);
        let worst = flag_ratios(fam, q, &seg)?
            .into_iter()
            .fold(Mass::zero(), Mass::max);
        if best
            .as_ref()
            .is_none_or(|(_, b)| worst.compare(b) == std::cmp::Ordering::Less)
        {
            best = Some((seg, worst));
        }
    }
    let (seg, worst) = best.unwrap();
    let mu = mass_ratio(&worst);
    Ok((
        seg,
        if mu < BigRational::one() {
            BigRational::one()
        } else {
            mu
        },
    ))
}

/// Reach from `gamma` with the threshold fixed by the hop recursion, after
/// checking that γ's flag is μ-good.
pub fn black_box_reach(
    fam: &dyn LengthFamily,
    q: &LatticeBox,
    gamma: &Segment,
    kappa: &BigRational,
    mu: &BigRational,
) -> Result<BlackBoxReach> {
    if q.dim() < 3 {
        return Err(CoreError::Domain(
            "the black box needs dimension ≥ 3".into(),
        ));
    }
    let lp = lambda_prime(mu, kappa, q.dim())?;
    let flag = flag_ratios(fam, q, gamma)?;
    let bound = Mass::Exact(mu.clone());
    if let Some(k) = flag.iter().position(|r| !r.le(&bound)) {
        return Err(CoreError::pre(
            "concat.flag",
            format!(
                "flag piece Q^{} has ratio {} > μ = {mu}",
                k + 1,
                flag[k].to_f64()
            ),
        ));
    }
    let mut out = LineTable::new(fam, q)?.reach(gamma, &lp)?;
    out.meets_kappa = Some(big(out.reached_count) >= kappa * big(out.total));
    out.kappa = Some(kappa.clone());
    out.mu = Some(mu.clone());
    out.flag = flag.iter().map(Mass::to_f64).collect();
    Ok(out)
}

/// Reach with an explicit hop threshold and no flag check.
pub fn black_box_reach_with(
    fam: &dyn LengthFamily,
    q: &LatticeBox,
    gamma: &Segment,
    lambda_prime: &BigRational,
) -> Result<BlackBoxReach> {
    LineTable::new(fam, q)?.reach(gamma, lambda_prime)
}

#[derive(Clone, Debug, Serialize)]
pub struct BlackBoxReach {
    pub q: LatticeBox,
    pub gamma: Segment,
    #[serde(with = "ratio_string")]
    pub lambda_prime: BigRational,
    #[serde(serialize_with = "opt_ratio")]
    pub kappa: Option<BigRational>,
    #[serde(serialize_with = "opt_ratio")]
    pub mu: Option<BigRational>,
    pub flag: Vec<f64>,
    pub total: u128,
    pub reached_count: u128,
    #[serde(with = "ratio_string")]
    pub fraction: BigRational,
    pub meets_kappa: Option<bool>,
    pub max_hops: usize,
    pub lines_good: Vec<u128>,
    pub lines_total: Vec<u128>,
    #[serde(skip)]
    reached: Vec<bool>,
    #[serde(skip)]
    level: Vec<u8>,
    #[serde(skip)]
    parent: Vec<(u32, u32)>,
    #[serde(skip)]
    offsets: Vec<usize>,
    #[serde(skip)]
    strides: Vec<usize>,
    #[serde(skip)]
    sides: Vec<usize>,
}

fn opt_ratio<S: serde::Serializer>(
    r: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(x) => s.serialize_some(&x.to_string()),
        None => s.serialize_none(),
    }
}

impl BlackBoxReach {
    pub fn is_reached(&self, p: &[i64]) -> bool {
        self.q.linear_index(p).is_some_and(|i| self.reached[i])
    }

    /// Reached points in lexicographic order.
    pub fn reached_points(&self) -> Vec<MultiIndex> {
        self.reached
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| MultiIndex(LineTable::coords(&self.q, &self.strides, i)))
            .collect()
    }

    fn line_of(&self, g: usize) -> (usize, usize) {
        let m = self.offsets.iter().rposition(|&o| o <= g).unwrap();
        (m, g - self.offsets[m])
    }

    fn line_segment(&self, g: usize) -> Segment {
        let (m, li) = self.line_of(g);
        let base = LineTable::base_of(&self.strides, &self.sides, m, li);
        Segment::line_in(&self.q, &LineTable::coords(&self.q, &self.strides, base), m)
    }

    /// The hops from γ to `p`, first hop first; each consecutive pair meets
    /// and the first hop meets γ.
    pub fn chain_to(&self, p: &[i64]) -> Option<Vec<Segment>> {
        let idx = self.q.linear_index(p)?;
        if !self.reached[idx] {
            return None;
        }
        let d = self.q.dim();
        let mut best: Option<(u8, usize)> = None;
        for m in 0..d {
            let inner = self.strides[m];
            let li = (idx / (inner * self.sides[m])) * inner + idx % inner;
            let g = self.offsets[m] + li;
            let lv = self.level[g];
            if lv > 0 && best.is_none_or(|(b, _)| lv < b) {
                best = Some((lv, g));
            }
        }
        let (_, mut g) = best?;
        let mut out = vec![self.line_segment(g)];
        while self.parent[g].0 != u32::MAX {
            g = self.parent[g].0 as usize;
            out.push(self.line_segment(g));
        }
        out.reverse();
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{geometric, ConstantFamily, TableFamily};
    use crate::num::rat;

    #[test]
    fn recursion_values() {
        let half = rat(1, 2);
        assert_eq!(lambda_prime(&int(1), &half, 2).unwrap(), int(4));
        assert_eq!(lambda_prime(&int(1), &half, 3).unwrap(), int(48));
        // μ above the inner value takes over.
        assert_eq!(lambda_prime(&int(10), &half, 3).unwrap(), int(80));
        assert!(lambda_prime(&int(1), &int(1), 3).is_err());
        assert!(lambda_prime(&rat(1, 2), &half, 3).is_err());
    }

    #[test]
    fn recursion_is_monotone_in_kappa() {
        for d in 2..=5 {
            for mu in [int(1), int(3), rat(7, 2)] {
                let mut prev = BigRational::zero();
                for k in 1..20 {
                    let v = lambda_prime(&mu, &rat(k, 20), d).unwrap();
                    assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn constant_weights_reach_everything() {
        let q = LatticeBox::new(vec![0, 0, 0], vec![3, 4, 2]).unwrap();
        let f = ConstantFamily::lattice(3, int(1));
        let g = Segment::line_in(&q, &[0, 0, 0], 0);
        let r = black_box_reach(&f, &q, &g, &rat(9, 10), &int(1)).unwrap();
        assert_eq!(r.reached_count, q.count());
        assert_eq!(r.meets_kappa, Some(true));
        let far = [3, 4, 2];
        let chain = r.chain_to(&far).unwrap();
        assert!(chain.len() <= 2);
        assert!(chain[0].meet(&g).is_some());
        for w in chain.windows(2) {
            assert!(w[0].meet(&w[1]).is_some());
        }
        assert!(chain.last().unwrap().contains(&far));
    }

    #[test]
    fn flag_must_be_good() {
        let q = LatticeBox::new(vec![0, 0, 0], vec![3, 3, 3]).unwrap();
        let f = geometric(3);
        let g = Segment::line_in(&q, &[0, 0, 0], 0);
        assert!(black_box_reach(&f, &q, &g, &rat(1, 2), &int(1)).is_err());
        let (best, mu) = best_flagged_segment(&f, &q, 0).unwrap();
        assert!(mu >= int(1));
        let r = black_box_reach(&f, &q, &best, &rat(1, 2), &mu).unwrap();
        assert!(r.lambda_prime >= int(48));
        assert!(r.reached_count > 0);
    }

    #[test]
    fn heavy_plane_blocks_its_lines() {
        // All the mass on i_2 = 0: lines inside that plane are far too heavy.
        let q = LatticeBox::new(vec![0, 0, 0], vec![5, 5, 5]).unwrap();
        let f = TableFamily::raw("plane", q.clone(), |p| {
            if p[2] == 0 {
                int(10_000)
            } else {
                int(1)
            }
        })
        .unwrap();
        let t = LineTable::new(&f, &q).unwrap();
        let good = t.good_lines(&int(4));
        let idx = q.linear_index(&[2, 2, 0]).unwrap();
        assert!(!good[0][t.line_index(0, idx)]);
        assert!(!good[1][t.line_index(1, idx)]);
        // Columns cross the plane once, so they stay average and carry the
        // plane's points.
        assert!(good[2][t.line_index(2, idx)]);
        let g = Segment::line_in(&q, &[0, 0, 3], 0);
        let r = black_box_reach_with(&f, &q, &g, &int(4)).unwrap();
        assert!(r.is_reached(&[2, 2, 0]));
        let hops = r.chain_to(&[2, 2, 0]).unwrap();
        assert_eq!(hops.last().unwrap().axis, 2);
    }
}
