//! Inductive box sequences, their multiplicity, A-roundness and the vertical
//! subdivision of a round box into nested pieces along the last axis.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lattice::{LatticeBox, MultiIndex, MAX_DIM};
use crate::num::{exponents_string, floor_mul_pow2_i64, int, ratio_string, Exponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SequenceKind {
    /// Alternating rectangles in ℕ₀² with sides 4^{nα_s}.
    BD2,
    /// Cyclic two-factor updates in ℕ₀^d starting from [[1,4^d]]^d.
    BGeneral,
    /// Cyclic two-factor updates in ℤ^{d−1} starting from [1,1+4^{d+1}]^{d−1}.
    FF,
}

impl SequenceKind {
    pub fn label(&self) -> &'static str {
        match self {
            SequenceKind::BD2 => "b-d2",
            SequenceKind::BGeneral => "b-general",
            SequenceKind::FF => "ff",
        }
    }

    pub fn parse(s: &str) -> Result<SequenceKind> {
        match s.to_ascii_lowercase().as_str() {
            "b-d2" | "bd2" => Ok(SequenceKind::BD2),
            "b-general" | "bgeneral" => Ok(SequenceKind::BGeneral),
            "ff" => Ok(SequenceKind::FF),
            _ => Err(CoreError::Parse(format!("unknown sequence kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSequence {
    pub kind: SequenceKind,
    /// The group dimension d; boxes live in dimension d (B kinds) or d−1 (FF).
    pub d: usize,
    #[serde(with = "exponents_string")]
    pub alpha: Vec<Exponent>,
    /// Index of `boxes[0]`: 1 for B kinds, 0 for FF.
    pub first: usize,
    pub boxes: Vec<LatticeBox>,
}

impl BoxSequence {
    pub fn get(&self, n: usize) -> Option<&LatticeBox> {
        n.checked_sub(self.first).and_then(|i| self.boxes.get(i))
    }

    pub fn last_index(&self) -> usize {
        self.first + self.boxes.len() - 1
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last_index()
    }

    pub fn box_dim(&self) -> usize {
        self.boxes[0].dim()
    }

    /// The axis whose lower end moves at the step n → n+1 and the axis whose
    /// upper end moves (0-based). None for B-d2.
    pub fn modified_axes(&self, n: usize) -> Option<(usize, usize)> {
        match self.kind {
            SequenceKind::BD2 => None,
            SequenceKind::BGeneral => {
                let m = residue(n, self.d);
                Some((m - 1, m % self.d))
            }
            SequenceKind::FF => {
                let i = residue(n, self.d - 1);
                Some((i - 1, i % (self.d - 1)))
            }
        }
    }
}

/// n mod k in {1, …, k}.
pub fn residue(n: usize, k: usize) -> usize {
    match n % k {
        0 => k,
        r => r,
    }
}

fn check_alpha(d: usize, alpha: &[Exponent]) -> Result<()> {
    if alpha.len() != d {
        return Err(CoreError::Domain(format!(
            "need {d} exponents, got {}",
            alpha.len()
        )));
    }
    if alpha
        .iter()
        .any(|a| *a <= Exponent::zero() || *a > Exponent::one())
    {
        return Err(CoreError::Domain(
            "every exponent must lie in (0, 1]".into(),
        ));
    }
    let s: Exponent = alpha.iter().sum();
    if s != Exponent::one() {
        return Err(CoreError::Domain(format!(
            "exponents sum to {s}, need exactly 1"
        )));
    }
    Ok(())
}

/// ⌊4^{n·a}⌋.
fn floor_pow4(n: i64, a: Exponent) -> Result<i64> {
    floor_mul_pow2_i64(1, a * Exponent::from_integer(2 * n))
}

fn checked(x: Option<i64>, what: &str) -> Result<i64> {
    x.ok_or_else(|| CoreError::Overflow(format!("{what} exceeds 64-bit endpoints")))
}

/// Builds Q(first..=n_max). `alpha` is ignored for FF.
pub fn build_sequence(
    kind: SequenceKind,
    d: usize,
    alpha: &[Exponent],
    n_max: usize,
) -> Result<BoxSequence> {
    match kind {
        SequenceKind::BD2 => {
            if d != 2 {
                return Err(CoreError::Domain("the d=2 rectangles need d = 2".into()));
            }
            check_alpha(2, alpha)?;
            if n_max < 1 {
                return Err(CoreError::Domain("n_max must be at least 1".into()));
            }
            let (a1, a2) = (alpha[0], alpha[1]);
            let mut boxes = Vec::with_capacity(n_max);
            for idx in 1..=n_max {
                let n = ((idx - 1) / 2) as i64;
                let b = if idx % 2 == 1 {
                    LatticeBox::new(
                        vec![floor_pow4(n, a1)?, floor_pow4(n, a2)?],
                        vec![floor_pow4(n + 1, a1)?, floor_pow4(n + 2, a2)?],
                    )?
                } else {
                    LatticeBox::new(
                        vec![floor_pow4(n, a1)?, floor_pow4(n + 1, a2)?],
                        vec![floor_pow4(n + 2, a1)?, floor_pow4(n + 2, a2)?],
                    )?
                };
                boxes.push(b);
            }
            Ok(BoxSequence {
                kind,
                d,
                alpha: alpha.to_vec(),
                first: 1,
                boxes,
            })
        }
        SequenceKind::BGeneral => {
            if !(3..=MAX_DIM).contains(&d) {
                return Err(CoreError::Domain(format!(
                    "general boxes need 3 ≤ d ≤ {MAX_DIM}"
                )));
            }
            check_alpha(d, alpha)?;
            if n_max < 1 {
                return Err(CoreError::Domain("n_max must be at least 1".into()));
            }
            let top = checked(4i64.checked_pow(d as u32), "4^d")?;
            let mut seq = BoxSequence {
                kind,
                d,
                alpha: alpha.to_vec(),
                first: 1,
                boxes: vec![LatticeBox::cube(d, 1, top)?],
            };
            for n in 1..n_max {
                let (lo_axis, hi_axis) = seq.modified_axes(n).unwrap();
                let mut b = seq.boxes.last().unwrap().clone();
                let g = |a: Exponent| a * Exponent::from_integer(d as i64);
                b.lo[lo_axis] = floor_mul_pow2_i64(b.lo[lo_axis], g(alpha[lo_axis]))?;
                b.hi[hi_axis] = checked(
                    floor_mul_pow2_i64(b.hi[hi_axis] - 1, g(alpha[hi_axis]))?.checked_add(1),
                    "upper end",
                )?;
                seq.boxes.push(LatticeBox::new(b.lo, b.hi)?);
            }
            Ok(seq)
        }
        SequenceKind::FF => {
            if !(3..=MAX_DIM + 1).contains(&d) {
                return Err(CoreError::Domain(format!(
                    "FF boxes need 3 ≤ d ≤ {}",
                    MAX_DIM + 1
                )));
            }
            let side = checked(4i64.checked_pow(d as u32 + 1), "4^{d+1}")?;
            let mut seq = BoxSequence {
                kind,
                d,
                alpha: Vec::new(),
                first: 0,
                boxes: vec![LatticeBox::cube(d - 1, 1, 1 + side)?],
            };
            for n in 0..n_max {
                let (lo_axis, hi_axis) = seq.modified_axes(n).unwrap();
                let mut b = seq.boxes.last().unwrap().clone();
                let f_lo = 4i64.pow(lo_axis as u32 + 1);
                let f_hi = 4i64.pow(hi_axis as u32 + 1);
                b.lo[lo_axis] = checked(b.lo[lo_axis].checked_mul(f_lo), "lower end")?;
                b.hi[hi_axis] = checked(
                    (b.hi[hi_axis] - 1)
                        .checked_mul(f_hi)
                        .and_then(|v| v.checked_add(1)),
                    "upper end",
                )?;
                seq.boxes.push(LatticeBox::new(b.lo, b.hi)?);
            }
            Ok(seq)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Multiplicity {
    pub value: usize,
    /// A point attaining it.
    pub witness: Option<MultiIndex>,
    /// Indices (in the sequence's numbering) of the boxes containing the witness.
    pub boxes: Vec<usize>,
}

/// Maximum number of boxes sharing a lattice point. A maximizing point can be
/// pushed down on every axis to some box's lower end, so only those
/// coordinates are swept, axis by axis, pruning branches that cannot win.
pub fn multiplicity(boxes: &[LatticeBox]) -> Multiplicity {
    fn rec(
        boxes: &[LatticeBox],
        axis: usize,
        active: &[usize],
        point: &mut Vec<i64>,
        best: &mut (usize, Vec<i64>, Vec<usize>),
    ) {
        if active.len() <= best.0 {
            return;
        }
        if axis == point.len() {
            *best = (active.len(), point.clone(), active.to_vec());
            return;
        }
        let mut cands: Vec<i64> = active.iter().map(|&i| boxes[i].lo[axis]).collect();
        cands.sort_unstable();
        cands.dedup();
        for c in cands {
            let sub: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&i| boxes[i].lo[axis] <= c && c <= boxes[i].hi[axis])
                .collect();
            point[axis] = c;
            rec(boxes, axis + 1, &sub, point, best);
        }
    }
    if boxes.is_empty() {
        return Multiplicity {
            value: 0,
            witness: None,
            boxes: Vec::new(),
        };
    }
    let all: Vec<usize> = (0..boxes.len()).collect();
    let mut best = (0, Vec::new(), Vec::new());
    rec(boxes, 0, &all, &mut vec![0; boxes[0].dim()], &mut best);
    Multiplicity {
        value: best.0,
        witness: Some(MultiIndex(best.1)),
        boxes: best.2,
    }
}

pub fn sequence_multiplicity(seq: &BoxSequence) -> Multiplicity {
    let mut m = multiplicity(&seq.boxes);
    for i in m.boxes.iter_mut() {
        *i += seq.first;
    }
    m
}

/// The least A ≥ 1 for which the box is A-round: with s = 1 + y_1 − x_1 and
/// every axis i (1-based), s^i/A ≤ x_i, y_i ≤ A s^i and s^i/A ≤ 1+y_i−x_i ≤ A s^i.
/// None when some x_i ≤ 0 (no A works).
pub fn minimal_roundness(q: &LatticeBox) -> Option<BigRational> {
    let s = BigInt::from(q.side(0));
    let mut a = BigRational::one();
    let mut sp = BigInt::one();
    for i in 0..q.dim() {
        sp *= &s;
        if q.lo[i] <= 0 {
            return None;
        }
        let spr = BigRational::from_integer(sp.clone());
        let side = int(BigInt::from(q.side(i)));
        for r in [
            &spr / int(q.lo[i]),
            int(q.hi[i]) / &spr,
            &spr / &side,
            &side / &spr,
        ] {
            if r > a {
                a = r;
            }
        }
    }
    Some(a)
}

pub fn is_a_round(q: &LatticeBox, a: &BigRational) -> bool {
    minimal_roundness(q).is_some_and(|m| m <= *a)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelChain {
    /// (m_k, M_k), 1-based, outermost first.
    pub path: Vec<(u64, u64)>,
    pub admissible: bool,
}

/// (1-based piece index, piece count) per level, root first.
pub type PiecePath = Vec<(u64, u64)>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubdivisionTree {
    pub root: LatticeBox,
    #[serde(with = "ratio_string")]
    pub a: BigRational,
    /// Number of cutting levels, d − 2 where the box has d − 1 axes.
    pub depth: usize,
    /// Piece length along the last axis at each level.
    pub piece_len: Vec<i64>,
    /// M_k for every subdivided node of level k − 1.
    pub branching: Vec<u64>,
    /// Whether (1+y_1−x_1)/A² ≤ M_k ≤ 1 + A²(1+y_1−x_1).
    pub branching_ok: Vec<bool>,
    pub levels: u128,
    pub admissible_levels: u128,
    #[serde(with = "ratio_string")]
    pub non_admissible_fraction: BigRational,
    /// The fraction times 1+y_1−x_1.
    #[serde(with = "ratio_string")]
    pub a_prime: BigRational,
    /// Σ_k len_k Π_{j<k} M_j over the number of levels: an upper bound on
    /// the fraction.
    #[serde(with = "ratio_string")]
    pub bracket: BigRational,
}

pub fn vertical_subdivision(q: &LatticeBox, a: &BigRational) -> Result<SubdivisionTree> {
    let axes = q.dim();
    if axes < 2 {
        return Err(CoreError::Domain(
            "subdivision needs at least two axes".into(),
        ));
    }
    if !is_a_round(q, a) {
        return Err(CoreError::pre(
            "boxes.a_round",
            format!(
                "box is not {a}-round (least A is {:?})",
                minimal_roundness(q).map(|m| m.to_string())
            ),
        ));
    }
    let depth = axes - 1;
    let last = axes - 1;
    // Level k (1-based) cuts by y_{d−1−k} − 1; as a 0-based axis that is depth − k.
    let piece_len: Vec<i64> = (1..=depth).map(|k| (q.hi[depth - k] - 1).max(1)).collect();
    let mut branching = Vec::with_capacity(depth);
    let mut parent = q.side(last) as i64;
    for &len in &piece_len {
        branching.push(((parent + len - 1) / len) as u64);
        parent = len;
    }
    let s = int(BigInt::from(q.side(0)));
    let a2 = a * a;
    let lo_b = &s / &a2;
    let hi_b = BigRational::one() + &a2 * &s;
    let branching_ok = branching
        .iter()
        .map(|&m| lo_b <= int(m) && int(m) <= hi_b)
        .collect();
    let levels = q.side(last);
    let admissible_levels = branching
        .iter()
        .fold(*piece_len.last().unwrap() as u128, |acc, &m| {
            acc * (m as u128 - 1)
        });
    let admissible_levels = admissible_levels.min(levels);
    let lv = int(BigInt::from(levels));
    let frac = int(BigInt::from(levels - admissible_levels)) / &lv;
    let mut bracket = BigRational::zero();
    let mut prod = BigInt::one();
    for k in 0..depth {
        bracket += int(&prod * piece_len[k]);
        prod *= branching[k];
    }
    Ok(SubdivisionTree {
        root: q.clone(),
        a: a.clone(),
        depth,
        piece_len,
        branching,
        branching_ok,
        levels,
        admissible_levels,
        a_prime: &frac * &s,
        non_admissible_fraction: frac,
        bracket: bracket / lv,
    })
}

impl SubdivisionTree {
    fn last_axis(&self) -> usize {
        self.root.dim() - 1
    }

    /// The chain of pieces containing the level at last coordinate `i`.
    pub fn chain(&self, i: i64) -> Option<LevelChain> {
        let ax = self.last_axis();
        if i < self.root.lo[ax] || i > self.root.hi[ax] {
            return None;
        }
        let mut off = i - self.root.lo[ax];
        let mut path = Vec::with_capacity(self.depth);
        for k in 0..self.depth {
            let len = self.piece_len[k];
            let m = (off / len) as u64 + 1;
            path.push((m, self.branching[k]));
            if m == self.branching[k] {
                return Some(LevelChain {
                    path,
                    admissible: false,
                });
            }
            off %= len;
        }
        Some(LevelChain {
            path,
            admissible: true,
        })
    }

    /// The piece Q_{m_1,…,m_k} for a chain prefix.
    pub fn piece(&self, path: &[(u64, u64)]) -> LatticeBox {
        let ax = self.last_axis();
        let mut b = self.root.clone();
        for (k, &(m, _)) in path.iter().enumerate() {
            let len = self.piece_len[k];
            let lo = b.lo[ax] + (m as i64 - 1) * len;
            b.hi[ax] = b.hi[ax].min(lo + len - 1);
            b.lo[ax] = lo;
        }
        b
    }

    /// Every leaf piece (trailing pieces stay undivided), in order.
    pub fn leaves(&self, limit: usize) -> Result<Vec<(PiecePath, LatticeBox)>> {
        let mut out = Vec::new();
        let mut stack: Vec<Vec<(u64, u64)>> = vec![Vec::new()];
        while let Some(p) = stack.pop() {
            let k = p.len();
            let done = k == self.depth || p.last().is_some_and(|&(m, mm)| m == mm);
            if done {
                if out.len() >= limit {
                    return Err(CoreError::guard(
                        "subdivision leaves",
                        out.len() as u128 + 1,
                        limit as u128,
                    ));
                }
                out.push((p.clone(), self.piece(&p)));
                continue;
            }
            for m in (1..=self.branching[k]).rev() {
                let mut q = p.clone();
                q.push((m, self.branching[k]));
                stack.push(q);
            }
        }
        Ok(out)
    }
}

/// Measured constants of a B-general sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneralConstants {
    /// max over n, k of 2^{nα_k}/(y−x) and (y−x+1)/2^{nα_k}.
    pub d1: f64,
    /// min over n of the two growth ratios of the modified factors.
    #[serde(with = "ratio_string")]
    pub d2: BigRational,
}

pub fn general_constants(seq: &BoxSequence) -> Result<GeneralConstants> {
    if seq.kind != SequenceKind::BGeneral || seq.boxes.len() < 2 {
        return Err(CoreError::Domain(
            "need a B-general sequence with at least two boxes".into(),
        ));
    }
    let mut d1: f64 = 1.0;
    for n in seq.indices() {
        let b = seq.get(n).unwrap();
        for k in 0..seq.d {
            let g = 2f64.powf(n as f64 * crate::num::exponent_to_f64(seq.alpha[k]));
            let w = (b.hi[k] - b.lo[k]) as f64;
            if w > 0.0 {
                d1 = d1.max(g / w);
            } else {
                d1 = f64::INFINITY;
            }
            d1 = d1.max((w + 1.0) / g);
        }
    }
    let mut d2: Option<BigRational> = None;
    for n in seq.first..seq.last_index() {
        let (a, b) = (seq.get(n).unwrap(), seq.get(n + 1).unwrap());
        let (m, m1) = seq.modified_axes(n).unwrap();
        let w = |q: &LatticeBox, k: usize| int(q.hi[k] - q.lo[k]);
        for (num, den) in [(w(b, m), w(a, m)), (w(a, m1), w(b, m1))] {
            let r = if den.is_zero() {
                int(i64::MAX)
            } else {
                num / den
            };
            if d2.as_ref().is_none_or(|x| r < *x) {
                d2 = Some(r);
            }
        }
    }
    Ok(GeneralConstants {
        d1,
        d2: d2.unwrap(),
    })
}

/// c with (y_i−x_i)/4^{in/(d−1)} ∈ [1/c, c] for every FF box and axis.
pub fn ff_side_bracket(seq: &BoxSequence) -> Result<f64> {
    if seq.kind != SequenceKind::FF {
        return Err(CoreError::Domain("side bracket is for FF sequences".into()));
    }
    let mut c: f64 = 1.0;
    for n in seq.indices() {
        let b = seq.get(n).unwrap();
        for i in 0..b.dim() {
            let e = 2.0 * ((i + 1) * n) as f64 / (seq.d - 1) as f64;
            let r = (b.hi[i] - b.lo[i]) as f64 / 2f64.powf(e);
            c = c.max(r).max(1.0 / r);
        }
    }
    Ok(c)
}

/// Side constants of the d=2 rectangles used by the chain bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct D2Constants {
    /// max over n of 2^{nα_2}/|H_n| and 2^{nα_1}/|V_n|.
    pub d1: f64,
    /// max over n of |horizontal|/2^{nα_1} and |vertical|/2^{nα_2}.
    pub d2: f64,
}

pub fn d2_constants(seq: &BoxSequence) -> Result<D2Constants> {
    if seq.kind != SequenceKind::BD2 {
        return Err(CoreError::Domain(
            "d=2 constants need the d=2 rectangles".into(),
        ));
    }
    let (a1, a2) = (
        crate::num::exponent_to_f64(seq.alpha[0]),
        crate::num::exponent_to_f64(seq.alpha[1]),
    );
    let (mut d1, mut d2) = (0f64, 0f64);
    for n in seq.indices() {
        let b = seq.get(n).unwrap();
        let (g1, g2) = (2f64.powf(n as f64 * a1), 2f64.powf(n as f64 * a2));
        // |H_n| = number of rows = side along axis 1; rows have side(0) points.
        let (rows, cols) = (b.side(1) as f64, b.side(0) as f64);
        d1 = d1.max(g2 / rows).max(g1 / cols);
        d2 = d2.max(cols / g1).max(rows / g2);
    }
    Ok(D2Constants { d1, d2 })
}

/// Exact count of how many boxes of a list contain `v`.
pub fn cover_count(boxes: &[LatticeBox], v: &[i64]) -> usize {
    boxes.iter().filter(|b| b.contains(v)).count()
}

/// Bounding box of a list of boxes.
pub fn hull(boxes: &[LatticeBox]) -> Option<LatticeBox> {
    let first = boxes.first()?;
    let mut h = first.clone();
    for b in &boxes[1..] {
        for k in 0..h.dim() {
            h.lo[k] = h.lo[k].min(b.lo[k]);
            h.hi[k] = h.hi[k].max(b.hi[k]);
        }
    }
    Some(h)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_positive() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    })
}
