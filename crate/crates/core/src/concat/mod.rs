//! Goodness of sub-regions, concatenation of good segments, and the chain
//! certificates built from them.

mod blackbox;
mod budget;
mod chain;
mod ff;
mod vertical;

pub use blackbox::{
    best_flagged_segment, black_box_reach, black_box_reach_with, flag_ratios, lambda_prime,
    BlackBoxReach, LineTable,
};
pub use budget::{distortion_budget, BudgetReport, BudgetRow};
pub use chain::{
    build_chain, verify_chain, ChainCertificate, ChainKind, ChainSegment, ChebyshevRecord,
    LambdaPolicy, SegmentRole, VerifyReport, Witness,
};
pub use vertical::{lambda_cascade, reach_vertical_section, StageReport, VerticalReach};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::boxes::SubdivisionTree;
use crate::error::{CoreError, Result};
use crate::lattice::{Block, LatticeBox, LengthFamily, Segment};
use crate::num::Mass;

/// Both forms of the least λ making a region λ-good in an ambient box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Goodness {
    /// ⟨ℓ_region⟩ / ⟨ℓ_ambient⟩.
    pub mean: Mass,
    /// c · Σ_region ℓ / Σ_ambient ℓ.
    pub copy_count: Mass,
    /// Number of disjoint translates of the region fitting in the ambient box.
    pub copies: u128,
    pub region_mass: Mass,
    pub ambient_mass: Mass,
}

impl Goodness {
    pub fn is_good(&self, lambda: &BigRational) -> bool {
        self.mean.le(&Mass::Exact(lambda.clone()))
    }
}

/// Translates of `region` that fit disjointly in `ambient`, axis by axis.
pub fn copy_count(region: &Block, ambient: &LatticeBox) -> u128 {
    region.axes.iter().enumerate().fold(1u128, |acc, (k, p)| {
        acc.saturating_mul(ambient.side(k) / (p.count as u128).max(1))
    })
}

fn ratio_of(num: &Mass, den: &Mass) -> Mass {
    if num.is_zero() {
        return Mass::zero();
    }
    num.div(den)
}

fn check_inside(region: &Block, ambient: &LatticeBox) -> Result<()> {
    if region.dim() != ambient.dim() {
        return Err(CoreError::Domain(
            "region and ambient box differ in dimension".into(),
        ));
    }
    if region.is_empty() {
        return Err(CoreError::Domain("goodness of an empty region".into()));
    }
    for (k, p) in region.axes.iter().enumerate() {
        if p.start < ambient.lo[k] || p.last() > ambient.hi[k] {
            return Err(CoreError::Domain(format!(
                "region leaves the ambient box along axis {k}"
            )));
        }
    }
    Ok(())
}

pub fn goodness_ratio(
    fam: &dyn LengthFamily,
    region: &Block,
    ambient: &LatticeBox,
) -> Result<Goodness> {
    check_inside(region, ambient)?;
    let region_mass = fam.block_mass(region)?;
    let ambient_mass = fam.block_mass(&ambient.to_block())?;
    goodness_from_masses(
        region_mass,
        region.count(),
        ambient_mass,
        ambient.count(),
        copy_count(region, ambient),
    )
}

fn goodness_from_masses(
    region_mass: Mass,
    region_count: u128,
    ambient_mass: Mass,
    ambient_count: u128,
    copies: u128,
) -> Result<Goodness> {
    if !region_mass.is_zero() && ambient_mass.is_zero() {
        return Err(CoreError::Domain("ambient mass vanishes".into()));
    }
    let mean = ratio_of(
        &region_mass.mul_count(ambient_count),
        &ambient_mass.mul_count(region_count),
    );
    let copy = ratio_of(&region_mass.mul_count(copies), &ambient_mass);
    Ok(Goodness {
        mean,
        copy_count: copy,
        copies,
        region_mass,
        ambient_mass,
    })
}

pub fn segment_goodness(
    fam: &dyn LengthFamily,
    seg: &Segment,
    ambient: &LatticeBox,
) -> Result<Goodness> {
    goodness_ratio(fam, &seg.to_block(), ambient)
}

/// Mean-form ratios of the pieces Q_{m_1}, Q_{m_1,m_2}, … holding level `i`,
/// together with their maximum.
pub fn fully_good_level_ratio(
    fam: &dyn LengthFamily,
    tree: &SubdivisionTree,
    i: i64,
) -> Result<(Mass, Vec<Mass>)> {
    let chain = tree
        .chain(i)
        .ok_or_else(|| CoreError::Domain(format!("level {i} outside the subdivided box")))?;
    chain_ratios(fam, tree, &chain.path, None)
}

/// The same maxima restricted to the vertical section through `p`.
pub fn fully_good_point_ratio(
    fam: &dyn LengthFamily,
    tree: &SubdivisionTree,
    p: &[i64],
) -> Result<(Mass, Vec<Mass>)> {
    if !tree.root.contains(p) {
        return Err(CoreError::Domain(format!(
            "point {p:?} outside the subdivided box"
        )));
    }
    let last = tree.root.dim() - 1;
    let chain = tree.chain(p[last]).unwrap();
    chain_ratios(fam, tree, &chain.path, Some(p))
}

fn chain_ratios(
    fam: &dyn LengthFamily,
    tree: &SubdivisionTree,
    path: &[(u64, u64)],
    section: Option<&[i64]>,
) -> Result<(Mass, Vec<Mass>)> {
    let root = tree.root.to_block();
    let (root_mass, root_count) = (fam.block_mass(&root)?, root.count());
    let mut out = Vec::with_capacity(path.len());
    let mut worst = Mass::zero();
    for k in 1..=path.len() {
        let mut piece = tree.piece(&path[..k]);
        if let Some(p) = section {
            for (a, &x) in p.iter().enumerate().take(piece.dim() - 1) {
                piece = piece.slice(a, x);
            }
        }
        let b = piece.to_block();
        let g = goodness_from_masses(
            fam.block_mass(&b)?,
            b.count(),
            root_mass.clone(),
            root_count,
            1,
        )?;
        worst = worst.max(g.mean.clone());
        out.push(g.mean);
    }
    Ok((worst, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Rows: j fixed, i varies (axis 0).
    Horizontal,
    /// Columns: i fixed, j varies (axis 1).
    Vertical,
}

impl Orientation {
    pub fn axis(&self) -> usize {
        match self {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
        }
    }
}

/// First line of the given orientation with Σℓ ≤ L_Q/|family|. One exists
/// because the lines partition Q.
pub fn find_good_segment_d2(
    fam: &dyn LengthFamily,
    q: &LatticeBox,
    orientation: Orientation,
) -> Result<Segment> {
    if q.dim() != 2 || fam.dim() != 2 {
        return Err(CoreError::Domain("the planar search needs d = 2".into()));
    }
    let axis = orientation.axis();
    let other = 1 - axis;
    let total = fam.block_mass(&q.to_block())?;
    let lines = q.side(other);
    for c in q.lo[other]..=q.hi[other] {
        let mut p = q.lo.clone();
        p[other] = c;
        let seg = Segment::line_in(q, &p, axis);
        if fam.block_mass(&seg.to_block())?.mul_count(lines).le(&total) {
            return Ok(seg);
        }
    }
    // Averaging forbids this; reaching it means the masses were inexact.
    Err(CoreError::GoodSearch {
        n: 0,
        class: format!("{orientation:?} lines"),
        observed: "no line at or below the average".into(),
    })
}

/// Σ_sub · copies ≤ λ · Σ_amb.
pub(crate) fn copy_good(sub: &Mass, copies: u128, amb: &Mass, lambda: &BigRational) -> bool {
    sub.mul_count(copies).le(&amb.scale(lambda))
}

/// ⟨sub⟩ ≤ λ⟨amb⟩.
pub(crate) fn mean_good(
    sub: &Mass,
    sub_count: u128,
    amb: &Mass,
    amb_count: u128,
    lambda: &BigRational,
) -> bool {
    sub.mul_count(amb_count)
        .le(&amb.mul_count(sub_count).scale(lambda))
}

pub(crate) fn big(n: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact count ratio, zero for an empty family.
pub(crate) fn fraction(good: u128, total: u128) -> BigRational {
    if total == 0 {
        return BigRational::zero();
    }
    BigRational::new(BigInt::from(good), BigInt::from(total))
}
