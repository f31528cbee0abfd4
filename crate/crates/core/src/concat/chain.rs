//! Chain certificates: concatenated good segments through a box sequence,
//! each carrying its Hölder-power sum and the box-mass bound it is held to.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::boxes::{d2_constants, general_constants, residue, BoxSequence, SequenceKind};
use crate::error::{CoreError, Result};
use crate::lattice::{LatticeBox, LengthFamily, MultiIndex, Segment};
use crate::num::{
    exponent_string, exponent_to_f64, exponents_string, int, ratio_string, Exponent, Mass, Wide,
};

use super::blackbox::{flag_ratios, lambda_prime, LineTable};
use super::{copy_good, fraction};

/// Relative slack when comparing a measured constant with its closed form.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    BD2,
    BD3,
    BGeneral,
    FFD3,
    FFGeneral,
}

impl ChainKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChainKind::BD2 => "b-d2",
            ChainKind::BD3 => "b-d3",
            ChainKind::BGeneral => "b-general",
            ChainKind::FFD3 => "ff-d3",
            ChainKind::FFGeneral => "ff-general",
        }
    }

    pub fn parse(s: &str) -> Result<ChainKind> {
        match s.to_ascii_lowercase().as_str() {
            "b-d2" => Ok(ChainKind::BD2),
            "b-d3" => Ok(ChainKind::BD3),
            "b-general" => Ok(ChainKind::BGeneral),
            "ff-d3" => Ok(ChainKind::FFD3),
            "ff-general" => Ok(ChainKind::FFGeneral),
            _ => Err(CoreError::Parse(format!("unknown chain kind {s:?}"))),
        }
    }

    pub fn sequence_kind(&self) -> SequenceKind {
        match self {
            ChainKind::BD2 => SequenceKind::BD2,
            ChainKind::BD3 | ChainKind::BGeneral => SequenceKind::BGeneral,
            ChainKind::FFD3 | ChainKind::FFGeneral => SequenceKind::FF,
        }
    }

    pub fn is_ff(&self) -> bool {
        matches!(self, ChainKind::FFD3 | ChainKind::FFGeneral)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum LambdaPolicy {
    /// 2 for FF-d3, the least integer above 2(d−1) for B-general,
    /// max(2, 2/D_2) for B-d3, 4(d−2) for FF-general.
    #[default]
    Default,
    Fixed(BigRational),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentRole {
    /// γ_n^1, the segment carrying the point count.
    Long,
    /// The intersection of consecutive planes.
    Junction,
    /// The segment of the next plane leading back into the next box.
    Transverse,
    Hop,
    Connector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSegment {
    pub n: usize,
    /// 1-based position among the segments of box n.
    pub k: usize,
    pub role: SegmentRole,
    /// Generator f_{i,j} realizing the steps (orbit chains only).
    pub generator: Option<(usize, usize)>,
    pub segment: Segment,
    /// The part actually walked, oriented in walking order.
    pub traversed: Segment,
    #[serde(with = "exponent_string")]
    pub exponent: Exponent,
    pub holder_sum: Wide,
    /// max{L_n^α, L_{n+1}^α} for B chains, L_n^α for orbit chains.
    pub bound_mass: Wide,
    pub ratio: f64,
    /// Mean-form λ* of the segment in Q(n).
    pub goodness: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub from: usize,
    pub to: usize,
    pub point: MultiIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChebyshevRecord {
    pub n: usize,
    pub class: String,
    pub good: u128,
    pub total: u128,
    #[serde(with = "ratio_string")]
    pub fraction: BigRational,
    #[serde(with = "ratio_string")]
    pub floor: BigRational,
    pub ok: bool,
}

impl ChebyshevRecord {
    pub fn new(
        n: usize,
        class: impl Into<String>,
        good: u128,
        total: u128,
        floor: BigRational,
    ) -> ChebyshevRecord {
        let f = fraction(good, total);
        let ok = total > 0 && f >= floor;
        ChebyshevRecord {
            n,
            class: class.into(),
            good,
            total,
            fraction: f,
            floor,
            ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainCertificate {
    pub kind: ChainKind,
    pub d: usize,
    #[serde(with = "exponents_string")]
    pub alpha: Vec<Exponent>,
    /// α in the budget exponent 1 − α.
    #[serde(with = "exponent_string")]
    pub budget_alpha: Exponent,
    pub family: String,
    #[serde(with = "ratio_string")]
    pub lambda: BigRational,
    #[serde(serialize_with = "opt_ratio")]
    pub lambda_prime: Option<BigRational>,
    pub first: usize,
    pub n_max: usize,
    pub start: MultiIndex,
    /// L_n for n = first ..= n_max + 1.
    pub box_masses: Vec<Mass>,
    pub segments: Vec<ChainSegment>,
    pub witnesses: Vec<Witness>,
    /// (n, points of γ_n^1, points walked on it).
    pub long_counts: Vec<(usize, u64, u64)>,
    pub b_measured: f64,
    pub d_measured: f64,
    pub k_d: usize,
    pub b_closed_form: Option<f64>,
    pub chebyshev: Vec<ChebyshevRecord>,
    pub all_hold: bool,
    pub chebyshev_ok: bool,
    pub within_closed_form: Option<bool>,
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

impl ChainCertificate {
    /// The growth the long segment of box n is measured against; D is the
    /// largest ratio of this to the point count.
    pub fn long_growth(&self, n: usize) -> f64 {
        growth(self.kind, self.d, self.budget_alpha, n)
    }

    pub fn box_mass(&self, n: usize) -> Option<&Mass> {
        n.checked_sub(self.first)
            .and_then(|i| self.box_masses.get(i))
    }
}

/// A segment before its sums are filled in.
#[derive(Clone, Debug)]
pub(crate) struct Draft {
    pub n: usize,
    pub role: SegmentRole,
    pub generator: Option<(usize, usize)>,
    pub segment: Segment,
    pub exponent: Exponent,
}

pub(crate) struct Ctx<'a> {
    pub fam: &'a dyn LengthFamily,
    pub seq: &'a BoxSequence,
    pub masses: Vec<Mass>,
}

impl<'a> Ctx<'a> {
    pub fn new(fam: &'a dyn LengthFamily, seq: &'a BoxSequence, n_max: usize) -> Result<Ctx<'a>> {
        if n_max < seq.first || n_max + 1 > seq.last_index() {
            return Err(CoreError::Domain(format!(
                "chain up to n = {n_max} needs boxes {}..={}, have up to {}",
                seq.first,
                n_max + 1,
                seq.last_index()
            )));
        }
        if fam.dim() != seq.box_dim() {
            return Err(CoreError::Domain(format!(
                "family dimension {} does not match box dimension {}",
                fam.dim(),
                seq.box_dim()
            )));
        }
        let masses = (seq.first..=n_max + 1)
            .map(|n| fam.block_mass(&seq.get(n).unwrap().to_block()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ctx { fam, seq, masses })
    }

    pub fn q(&self, n: usize) -> &LatticeBox {
        self.seq.get(n).unwrap()
    }

    pub fn mass(&self, n: usize) -> &Mass {
        &self.masses[n - self.seq.first]
    }

    pub fn block_mass(&self, seg: &Segment) -> Result<Mass> {
        self.fam.block_mass(&seg.to_block())
    }

    pub fn box_mass(&self, b: &LatticeBox) -> Result<Mass> {
        self.fam.block_mass(&b.to_block())
    }
}

pub(crate) struct Assembly {
    pub kind: ChainKind,
    pub lambda: BigRational,
    pub lambda_prime: Option<BigRational>,
    pub drafts: Vec<Draft>,
    pub start: MultiIndex,
    pub chebyshev: Vec<ChebyshevRecord>,
    pub b_closed_form: Option<f64>,
    pub budget_alpha: Exponent,
}

fn growth(kind: ChainKind, d: usize, alpha: Exponent, n: usize) -> f64 {
    if kind.is_ff() {
        4f64.powf(n as f64 / (d - 1) as f64)
    } else {
        2f64.powf(n as f64 * exponent_to_f64(alpha))
    }
}

fn bound_for(ctx: &Ctx, kind: ChainKind, n: usize, e: Exponent) -> Wide {
    let a = ctx.mass(n).wide().powr(e);
    if kind.is_ff() {
        a
    } else {
        a.max(ctx.mass(n + 1).wide().powr(e))
    }
}

fn wide_ratio(a: Wide, b: Wide) -> f64 {
    if a.is_zero() {
        0.0
    } else {
        (a / b).to_f64()
    }
}

/// Walking window on `seg` from `entry` towards `exit` (or the far end).
fn walked(seg: &Segment, entry: &MultiIndex, exit: Option<&MultiIndex>) -> Result<Segment> {
    let t0 = seg
        .position(entry)
        .ok_or_else(|| CoreError::Domain(format!("entry {:?} is not on its segment", entry.0)))?;
    let t1 = match exit {
        Some(x) => seg
            .position(x)
            .ok_or_else(|| CoreError::Domain(format!("exit {:?} is not on its segment", x.0)))?,
        None if t0 + 1 < seg.count => seg.count - 1,
        None => 0,
    };
    Ok(seg.between(t0, t1))
}

pub(crate) fn assemble(ctx: &Ctx, n_max: usize, a: Assembly) -> Result<ChainCertificate> {
    let seq = ctx.seq;
    let nonempty: Vec<usize> = (0..a.drafts.len())
        .filter(|&i| !a.drafts[i].segment.is_empty())
        .collect();
    let mut witnesses = Vec::new();
    for w in nonempty.windows(2) {
        let (i, j) = (w[0], w[1]);
        let p = a.drafts[i]
            .segment
            .meet(&a.drafts[j].segment)
            .ok_or_else(|| {
                CoreError::Domain(format!(
                    "segments {i} (n={}) and {j} (n={}) do not meet",
                    a.drafts[i].n, a.drafts[j].n
                ))
            })?;
        witnesses.push(Witness {
            from: i,
            to: j,
            point: p,
        });
    }
    let mut segments = Vec::with_capacity(a.drafts.len());
    let mut per_box: HashMap<usize, usize> = HashMap::new();
    let mut entry = a.start.clone();
    let mut wi = 0;
    for (i, dr) in a.drafts.iter().enumerate() {
        let k = {
            let c = per_box.entry(dr.n).or_insert(0);
            *c += 1;
            *c
        };
        let traversed = if dr.segment.is_empty() {
            dr.segment.clone()
        } else {
            let exit = witnesses
                .get(wi)
                .filter(|w| w.from == i)
                .map(|w| w.point.clone());
            let t = walked(&dr.segment, &entry, exit.as_ref())?;
            if let Some(x) = exit {
                entry = x;
                wi += 1;
            }
            t
        };
        let block = dr.segment.to_block();
        let holder_sum = if dr.segment.is_empty() {
            Wide::ZERO
        } else {
            ctx.fam.block_power_sum(&block, dr.exponent)?
        };
        let bound_mass = bound_for(ctx, a.kind, dr.n, dr.exponent);
        let goodness = if dr.segment.is_empty() {
            0.0
        } else {
            let m = ctx.fam.block_mass(&block)?;
            let q = ctx.q(dr.n);
            m.mul_count(q.count())
                .div(&ctx.mass(dr.n).mul_count(block.count()))
                .to_f64()
        };
        segments.push(ChainSegment {
            n: dr.n,
            k,
            role: dr.role,
            generator: dr.generator,
            segment: dr.segment.clone(),
            traversed,
            exponent: dr.exponent,
            holder_sum,
            bound_mass,
            ratio: wide_ratio(holder_sum, bound_mass),
            goodness,
            holds: false,
        });
    }
    let b_measured = segments.iter().map(|s| s.ratio).fold(0.0, f64::max);
    for s in &mut segments {
        s.holds = s.ratio <= b_measured;
    }
    let mut long_counts = Vec::new();
    let mut d_measured: f64 = 0.0;
    for s in segments.iter().filter(|s| s.role == SegmentRole::Long) {
        if long_counts.iter().any(|(n, _, _)| *n == s.n) {
            continue;
        }
        long_counts.push((s.n, s.segment.count, s.traversed.count));
        let g = growth(a.kind, seq.d, a.budget_alpha, s.n);
        d_measured = d_measured.max(if s.segment.count == 0 {
            f64::INFINITY
        } else {
            g / s.segment.count as f64
        });
    }
    let k_d = per_box.values().copied().max().unwrap_or(0);
    let within = a
        .b_closed_form
        .map(|b| b_measured <= b * (1.0 + CLOSED_FORM_TOLERANCE));
    let chebyshev_ok = a.chebyshev.iter().all(|c| c.ok);
    Ok(ChainCertificate {
        kind: a.kind,
        d: seq.d,
        alpha: seq.alpha.clone(),
        budget_alpha: a.budget_alpha,
        family: ctx.fam.name(),
        lambda: a.lambda,
        lambda_prime: a.lambda_prime,
        first: seq.first,
        n_max,
        start: a.start,
        box_masses: ctx.masses.clone(),
        all_hold: segments.iter().all(|s| s.holds),
        segments,
        witnesses,
        long_counts,
        b_measured,
        d_measured,
        k_d,
        b_closed_form: a.b_closed_form,
        chebyshev: a.chebyshev,
        chebyshev_ok,
        within_closed_form: within,
    })
}

/// Builds the chain for boxes first..=n_max; the sequence must reach n_max+1.
pub fn build_chain(
    kind: ChainKind,
    fam: &dyn LengthFamily,
    seq: &BoxSequence,
    n_max: usize,
    policy: &LambdaPolicy,
) -> Result<ChainCertificate> {
    if seq.kind != kind.sequence_kind() {
        return Err(CoreError::Domain(format!(
            "{} chains need a {} sequence, got {}",
            kind.label(),
            kind.sequence_kind().label(),
            seq.kind.label()
        )));
    }
    let ctx = Ctx::new(fam, seq, n_max)?;
    let fixed = match policy {
        LambdaPolicy::Default => None,
        LambdaPolicy::Fixed(l) => {
            if *l < BigRational::one() {
                return Err(CoreError::Domain(format!("λ = {l} must be at least 1")));
            }
            Some(l.clone())
        }
    };
    let asm = match kind {
        ChainKind::BD2 => build_b_d2(&ctx, n_max)?,
        ChainKind::BD3 => build_b_d3(&ctx, n_max, fixed)?,
        ChainKind::BGeneral => build_b_general(&ctx, n_max, fixed)?,
        ChainKind::FFD3 => super::ff::build_ff_d3(&ctx, n_max, fixed)?,
        ChainKind::FFGeneral => super::ff::build_ff_general(&ctx, n_max, fixed)?,
    };
    assemble(&ctx, n_max, asm)
}

fn min_alpha(seq: &BoxSequence) -> Exponent {
    *seq.alpha.iter().min().unwrap()
}

fn build_b_d2(ctx: &Ctx, n_max: usize) -> Result<Assembly> {
    let seq = ctx.seq;
    let mut drafts = Vec::new();
    let mut cheb = Vec::new();
    for n in seq.first..=n_max {
        let q = ctx.q(n);
        // Odd boxes are tall: walk columns. Even boxes are wide: walk rows.
        let axis = if n % 2 == 1 { 1 } else { 0 };
        let other = 1 - axis;
        let lines = q.side(other);
        let total = ctx.mass(n);
        let mut good = 0u128;
        let mut first: Option<Segment> = None;
        for c in q.lo[other]..=q.hi[other] {
            let mut p = q.lo.clone();
            p[other] = c;
            let seg = Segment::line_in(q, &p, axis);
            if copy_good(&ctx.block_mass(&seg)?, lines, total, &BigRational::one()) {
                good += 1;
                first.get_or_insert(seg);
            }
        }
        cheb.push(ChebyshevRecord::new(
            n,
            if axis == 1 { "columns" } else { "rows" },
            good,
            lines,
            BigRational::zero(),
        ));
        let seg = first.ok_or_else(|| CoreError::GoodSearch {
            n,
            class: "lines".into(),
            observed: format!("0 of {lines} lines at or below the average"),
        })?;
        drafts.push(Draft {
            n,
            role: SegmentRole::Long,
            generator: None,
            exponent: seq.alpha[axis],
            segment: seg,
        });
    }
    let c = d2_constants(seq)?;
    let (a1, a2) = (exponent_to_f64(seq.alpha[0]), exponent_to_f64(seq.alpha[1]));
    let closed = (c.d1.powf(a1) * c.d2.powf(a2)).max(c.d1.powf(a2) * c.d2.powf(a1));
    let start = drafts[0].segment.anchor.clone();
    Ok(Assembly {
        kind: ChainKind::BD2,
        lambda: BigRational::one(),
        lambda_prime: None,
        drafts,
        start,
        chebyshev: cheb,
        b_closed_form: Some(closed),
        budget_alpha: min_alpha(seq),
    })
}

/// Lines of `q` along `axis` inside the plane `plane` (a box with one pinned
/// axis), indexed by the coordinate along `across`.
fn plane_lines(
    q: &LatticeBox,
    axis: usize,
    across: usize,
) -> impl Iterator<Item = (i64, Segment)> + '_ {
    (q.lo[across]..=q.hi[across]).map(move |c| {
        let mut p = q.lo.clone();
        p[across] = c;
        (c, Segment::line_in(q, &p, axis))
    })
}

fn build_b_d3(ctx: &Ctx, n_max: usize, fixed: Option<BigRational>) -> Result<Assembly> {
    let seq = ctx.seq;
    if seq.d != 3 {
        return Err(CoreError::Domain("the plane chain needs d = 3".into()));
    }
    let gc = general_constants(seq)?;
    let lambda = fixed.unwrap_or_else(|| {
        let l = int(2) / &gc.d2;
        if l > int(2) {
            l
        } else {
            int(2)
        }
    });
    let floor = BigRational::one() - BigRational::one() / &lambda;
    let half = BigRational::new(1.into(), 2.into());
    let mut cheb = Vec::new();
    let mut drafts = Vec::new();
    let axes_of = |n: usize| {
        let m = residue(n, 3);
        (m - 1, m % 3, (m + 1) % 3)
    };

    // P_first: first λ-good h-plane.
    let (_, _, a2) = axes_of(seq.first);
    let q1 = ctx.q(seq.first);
    let mut plane_c: Option<i64> = None;
    let mut good = 0u128;
    for c in q1.lo[a2]..=q1.hi[a2] {
        let m = ctx.box_mass(&q1.slice(a2, c))?;
        if copy_good(&m, q1.side(a2), ctx.mass(seq.first), &lambda) {
            good += 1;
            plane_c.get_or_insert(c);
        }
    }
    cheb.push(ChebyshevRecord::new(
        seq.first,
        "h-planes",
        good,
        q1.side(a2),
        floor.clone(),
    ));
    let mut c = plane_c.ok_or_else(|| CoreError::GoodSearch {
        n: seq.first,
        class: "h-planes".into(),
        observed: format!("0 of {} planes λ-good", q1.side(a2)),
    })?;

    let (mut a_max, mut a_prime) = (0f64, 0f64);
    for n in seq.first..=n_max {
        let (am, am1, am2) = axes_of(n);
        let q = ctx.q(n);
        let qn = ctx.q(n + 1);
        let plane = q.slice(am2, c);
        let pm = ctx.box_mass(&plane)?;
        let g = |k: usize, m: usize| 2f64.powf(m as f64 * exponent_to_f64(seq.alpha[k]));
        a_max = a_max.max(g(am1, n) / q.side(am1) as f64);
        a_prime = a_prime
            .max(g(am, n) / q.side(am) as f64)
            .max(g(am1, n + 1) / qn.side(am1) as f64);

        // γ_n^1: relatively 1-good horizontal line of P_n.
        let mut h1: Option<Segment> = None;
        let mut good = 0u128;
        for (_, seg) in plane_lines(&plane, am, am1) {
            if copy_good(
                &ctx.block_mass(&seg)?,
                q.side(am1),
                &pm,
                &BigRational::one(),
            ) {
                good += 1;
                h1.get_or_insert(seg);
            }
        }
        cheb.push(ChebyshevRecord::new(
            n,
            "horizontal segments of P_n",
            good,
            q.side(am1),
            BigRational::zero(),
        ));
        let h1 = h1.unwrap();

        // Vertical λ-good segments of P_n, for the Chebyshev record.
        let mut vgood = HashMap::new();
        for (cc, seg) in plane_lines(&plane, am1, am) {
            let ok = copy_good(&ctx.block_mass(&seg)?, q.side(am), &pm, &lambda);
            vgood.insert(cc, (ok, seg));
        }
        let vg = vgood.values().filter(|(ok, _)| *ok).count() as u128;
        cheb.push(ChebyshevRecord::new(
            n,
            "vertical segments of P_n",
            vg,
            q.side(am),
            floor.clone(),
        ));

        // P_{n+1}: normal axis am, λ-good in Q(n+1), meeting P_n in a good vertical.
        let mut next: Option<(i64, Segment)> = None;
        let (mut inside, mut inside_good, mut planes_good) = (0u128, 0u128, 0u128);
        for cc in qn.lo[am]..=qn.hi[am] {
            let pmass = ctx.box_mass(&qn.slice(am, cc))?;
            let pg = copy_good(&pmass, qn.side(am), ctx.mass(n + 1), &lambda);
            planes_good += pg as u128;
            if let Some((vok, seg)) = vgood.get(&cc) {
                inside += 1;
                inside_good += *vok as u128;
                if pg && *vok && next.is_none() {
                    next = Some((cc, seg.clone()));
                }
            }
        }
        cheb.push(ChebyshevRecord::new(
            n + 1,
            "h-planes",
            planes_good,
            qn.side(am),
            floor.clone(),
        ));
        cheb.push(ChebyshevRecord::new(
            n,
            "vertical segments of P_n inside Q(n+1)",
            inside_good,
            inside,
            half.clone(),
        ));
        let (c_next, junction) = next.ok_or_else(|| CoreError::GoodSearch {
            n,
            class: "next h-plane".into(),
            observed: format!(
                "{planes_good}/{} planes good, {inside_good}/{inside} verticals good inside Q(n+1)",
                qn.side(am)
            ),
        })?;

        // γ_n^3: λ-good vertical of P_{n+1} (along am2) with i_{am1} in Q(n).
        let pnext = qn.slice(am, c_next);
        let pnm = ctx.box_mass(&pnext)?;
        let mut third: Option<Segment> = None;
        let mut tgood = 0u128;
        for (r, seg) in plane_lines(&pnext, am2, am1) {
            if r < q.lo[am1] || r > q.hi[am1] {
                continue;
            }
            if copy_good(&ctx.block_mass(&seg)?, qn.side(am1), &pnm, &lambda) {
                tgood += 1;
                third.get_or_insert(seg);
            }
        }
        cheb.push(ChebyshevRecord::new(
            n,
            "vertical segments of P_{n+1} inside Q(n)",
            tgood,
            q.side(am1),
            half.clone(),
        ));
        let third = third.ok_or_else(|| CoreError::GoodSearch {
            n,
            class: "vertical of the next plane".into(),
            observed: format!("0 of {} candidates λ-good", q.side(am1)),
        })?;

        drafts.push(Draft {
            n,
            role: SegmentRole::Long,
            generator: None,
            exponent: seq.alpha[am],
            segment: h1,
        });
        drafts.push(Draft {
            n,
            role: SegmentRole::Junction,
            generator: None,
            exponent: seq.alpha[am1],
            segment: junction,
        });
        drafts.push(Draft {
            n,
            role: SegmentRole::Transverse,
            generator: None,
            exponent: seq.alpha[am2],
            segment: third,
        });
        c = c_next;
    }
    let d1 = gc.d1;
    let lf = crate::boxes::to_f64(&lambda);
    let closed = seq
        .alpha
        .iter()
        .map(|&a| {
            let a = exponent_to_f64(a);
            let one = (a_max * d1 * lf).powf(a) * d1.powf(1.0 - a);
            let two = (a_prime * d1 * lf * lf).powf(a) * d1.powf(1.0 - a);
            one.max(two)
        })
        .fold(0.0, f64::max);
    let start = drafts[0].segment.anchor.clone();
    Ok(Assembly {
        kind: ChainKind::BD3,
        lambda,
        lambda_prime: None,
        drafts,
        start,
        chebyshev: cheb,
        b_closed_form: Some(closed),
        budget_alpha: min_alpha(seq),
    })
}

/// Whether every flag piece of the line through `p` along `axis` is λ-good.
fn fully_good(
    fam: &dyn LengthFamily,
    q: &LatticeBox,
    p: &[i64],
    axis: usize,
    lambda: &BigRational,
) -> Result<bool> {
    let line = Segment::line_in(q, p, axis);
    let bound = Mass::Exact(lambda.clone());
    Ok(flag_ratios(fam, q, &line)?.iter().all(|r| r.le(&bound)))
}

fn build_b_general(ctx: &Ctx, n_max: usize, fixed: Option<BigRational>) -> Result<Assembly> {
    let seq = ctx.seq;
    let d = seq.d;
    let lambda = fixed.unwrap_or_else(|| int(2 * d as i64 - 1));
    let half = BigRational::new(1.into(), 2.into());
    let lp = lambda_prime(&lambda, &half, d)?;
    let fully_floor =
        int(d as i64 - 1) * (BigRational::one() - BigRational::one() / &lambda) - int(d as i64 - 2);
    let mut cheb = Vec::new();
    let mut drafts = Vec::new();
    let axis_of = |n: usize| residue(n, d) - 1;

    // γ_first^1: first fully λ-good line of Q(first).
    let q1 = ctx.q(seq.first);
    let a1 = axis_of(seq.first);
    let mut face = q1.clone();
    face.hi[a1] = face.lo[a1];
    let mut gamma: Option<Segment> = None;
    let mut good = 0u128;
    let total = face.count();
    for p in face.points()? {
        if fully_good(ctx.fam, q1, &p, a1, &lambda)? {
            good += 1;
            gamma.get_or_insert_with(|| Segment::line_in(q1, &p, a1));
        }
    }
    cheb.push(ChebyshevRecord::new(
        seq.first,
        "fully good lines",
        good,
        total,
        fully_floor.clone(),
    ));
    let mut gamma = gamma.ok_or_else(|| CoreError::GoodSearch {
        n: seq.first,
        class: "fully good lines".into(),
        observed: format!("0 of {total}"),
    })?;

    let mut a_const: f64 = 1.0;
    let mut a_len: f64 = 1.0;
    for n in seq.first..=n_max {
        let q = ctx.q(n);
        let qn = ctx.q(n + 1);
        let w = q
            .intersect(qn)
            .ok_or_else(|| CoreError::Domain(format!("Q({n}) and Q({}) are disjoint", n + 1)))?;
        let am = axis_of(n);
        let an = axis_of(n + 1);
        drafts.push(Draft {
            n,
            role: SegmentRole::Long,
            generator: None,
            exponent: seq.alpha[am],
            segment: gamma.clone(),
        });
        for b in [q, &w] {
            for s in 0..d {
                let g = 2f64.powf(n as f64 * (1.0 - exponent_to_f64(seq.alpha[s])));
                let c = (b.count() / b.side(s)) as f64;
                a_const = a_const.max(c / g).max(g / c);
                a_len = a_len
                    .max(b.side(s) as f64 / 2f64.powf(n as f64 * exponent_to_f64(seq.alpha[s])));
            }
        }

        let table = LineTable::new(ctx.fam, &w)?;
        let start = Segment::line_in(&w, &gamma.anchor, am);
        let reach = table.reach(&start, &lp)?;
        cheb.push(ChebyshevRecord::new(
            n,
            "black-box reach in Q(n)∩Q(n+1)",
            reach.reached_count,
            reach.total,
            half.clone(),
        ));

        // Points of W on fully λ-good lines of Q(n+1) along the next axis.
        let mut cache: HashMap<Vec<i64>, bool> = HashMap::new();
        let mut face = w.clone();
        face.hi[an] = face.lo[an];
        let mut on_good = 0u128;
        for p in face.points()? {
            let ok = fully_good(ctx.fam, qn, &p, an, &lambda)?;
            let mut key = p.0.clone();
            key[an] = 0;
            cache.insert(key, ok);
            if ok {
                on_good += w.side(an);
            }
        }
        cheb.push(ChebyshevRecord::new(
            n,
            "points on fully good lines of Q(n+1)",
            on_good,
            w.count(),
            half.clone(),
        ));
        let target = reach.reached_points().into_iter().find(|p| {
            let mut key = p.0.clone();
            key[an] = 0;
            cache.get(&key).copied().unwrap_or(false)
        });
        let target = target.ok_or_else(|| CoreError::GoodSearch {
            n,
            class: "reachable start of the next line".into(),
            observed: format!(
                "reach {}/{}, fully good {}/{}",
                reach.reached_count,
                reach.total,
                on_good,
                w.count()
            ),
        })?;
        let hops = reach.chain_to(&target).unwrap();
        // The first hop may be γ's own line inside W; keep it, it is a sub-segment of Q(n).
        for h in hops {
            drafts.push(Draft {
                n,
                role: SegmentRole::Hop,
                generator: None,
                exponent: seq.alpha[h.axis],
                segment: h,
            });
        }
        gamma = Segment::line_in(qn, &target, an);
    }
    let lf = crate::boxes::to_f64(if lp > lambda { &lp } else { &lambda });
    let closed = seq
        .alpha
        .iter()
        .map(|&a| {
            let a = exponent_to_f64(a);
            (lf * a_const).powf(a) * a_len.powf(1.0 - a)
        })
        .fold(0.0, f64::max);
    let start = drafts[0].segment.anchor.clone();
    Ok(Assembly {
        kind: ChainKind::BGeneral,
        lambda,
        lambda_prime: Some(lp),
        drafts,
        start,
        chebyshev: cheb,
        b_closed_form: Some(closed),
        budget_alpha: min_alpha(seq),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes every sum, bound, witness and flag of `cert` from ℓ and the
/// box sequence alone.
pub fn verify_chain(
    cert: &ChainCertificate,
    fam: &dyn LengthFamily,
    seq: &BoxSequence,
) -> Result<VerifyReport> {
    let ctx = Ctx::new(fam, seq, cert.n_max)?;
    let mut r = VerifyReport::default();
    let bad = |r: &mut VerifyReport, msg: String| r.mismatches.push(msg);
    if ctx.masses != cert.box_masses {
        bad(&mut r, "box masses differ".into());
    }
    let mut b: f64 = 0.0;
    for (i, s) in cert.segments.iter().enumerate() {
        r.checked += 1;
        let q = match seq.get(s.n) {
            Some(q) => q,
            None => {
                bad(&mut r, format!("segment {i}: box {} missing", s.n));
                continue;
            }
        };
        if !s.segment.within(q) {
            bad(&mut r, format!("segment {i} leaves Q({})", s.n));
        }
        if s.traversed.count > 0
            && (!s.segment.contains(&s.traversed.anchor)
                || !s.segment.contains(&s.traversed.last().unwrap()))
        {
            bad(
                &mut r,
                format!("segment {i}: walked part leaves the segment"),
            );
        }
        let h = if s.segment.is_empty() {
            Wide::ZERO
        } else {
            fam.block_power_sum(&s.segment.to_block(), s.exponent)?
        };
        if h != s.holder_sum {
            bad(
                &mut r,
                format!(
                    "segment {i}: Hölder sum {} recomputes to {}",
                    s.holder_sum, h
                ),
            );
        }
        let bm = bound_for(&ctx, cert.kind, s.n, s.exponent);
        if bm != s.bound_mass {
            bad(
                &mut r,
                format!("segment {i}: bound {} recomputes to {}", s.bound_mass, bm),
            );
        }
        let ratio = wide_ratio(h, bm);
        if ratio != s.ratio {
            bad(
                &mut r,
                format!("segment {i}: ratio {} recomputes to {ratio}", s.ratio),
            );
        }
        b = b.max(ratio);
        if let Some((gi, gj)) = s.generator {
            let ok = gi == s.segment.axis + 2
                && if gj == 1 {
                    s.segment.step.abs() == 1
                } else {
                    s.segment.step.abs() == s.segment.anchor[gj - 2].abs()
                };
            if !ok {
                bad(
                    &mut r,
                    format!("segment {i}: steps are not those of f({gi},{gj})"),
                );
            }
        }
    }
    if b != cert.b_measured {
        bad(&mut r, format!("B {} recomputes to {b}", cert.b_measured));
    }
    for s in &cert.segments {
        if (s.ratio <= b) != s.holds {
            bad(
                &mut r,
                format!("segment n={} k={}: flag mismatch", s.n, s.k),
            );
        }
    }
    let nonempty: Vec<usize> = (0..cert.segments.len())
        .filter(|&i| !cert.segments[i].segment.is_empty())
        .collect();
    if nonempty.len().saturating_sub(1) != cert.witnesses.len() {
        bad(
            &mut r,
            "witness count differs from the number of junctions".into(),
        );
    }
    for (w, pair) in cert.witnesses.iter().zip(nonempty.windows(2)) {
        r.checked += 1;
        if (w.from, w.to) != (pair[0], pair[1]) {
            bad(&mut r, format!("witness {}→{} out of order", w.from, w.to));
            continue;
        }
        let (a, c) = (&cert.segments[w.from].segment, &cert.segments[w.to].segment);
        if !a.contains(&w.point) || !c.contains(&w.point) {
            bad(
                &mut r,
                format!(
                    "witness {:?} is not shared by segments {} and {}",
                    w.point.0, w.from, w.to
                ),
            );
        }
    }
    for &(n, count, _) in &cert.long_counts {
        if let Some(s) = cert
            .segments
            .iter()
            .find(|s| s.n == n && s.role == SegmentRole::Long)
        {
            if s.segment.count != count {
                bad(&mut r, format!("long count at n={n} differs"));
            }
        }
    }
    if cert.all_hold != cert.segments.iter().all(|s| s.holds) {
        bad(&mut r, "summary flag differs".into());
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::build_sequence;
    use crate::lattice::{geometric, ConstantFamily};

    fn half() -> Vec<Exponent> {
        vec![Exponent::new(1, 2); 2]
    }

    #[test]
    fn d2_chain_short() {
        let seq = build_sequence(SequenceKind::BD2, 2, &half(), 7).unwrap();
        let f = geometric(2);
        let c = build_chain(ChainKind::BD2, &f, &seq, 6, &LambdaPolicy::Default).unwrap();
        assert!(c.all_hold);
        assert_eq!(c.segments.len(), 6);
        assert_eq!(c.witnesses.len(), 5);
        assert_eq!(c.within_closed_form, Some(true));
        assert!(verify_chain(&c, &f, &seq).unwrap().ok());
    }

    #[test]
    fn tampering_is_detected() {
        let seq = build_sequence(SequenceKind::BD2, 2, &half(), 5).unwrap();
        let f = geometric(2);
        let mut c = build_chain(ChainKind::BD2, &f, &seq, 4, &LambdaPolicy::Default).unwrap();
        c.segments[1].holder_sum = c.segments[1].holder_sum * Wide::from_f64(0.5);
        let r = verify_chain(&c, &f, &seq).unwrap();
        assert!(!r.ok());
    }

    #[test]
    fn plane_chain_d3() {
        let a = vec![Exponent::new(1, 3); 3];
        let seq = build_sequence(SequenceKind::BGeneral, 3, &a, 8).unwrap();
        let f = geometric(3);
        let c = build_chain(ChainKind::BD3, &f, &seq, 7, &LambdaPolicy::Default).unwrap();
        assert_eq!(c.k_d, 3);
        assert!(c.all_hold);
        assert_eq!(c.within_closed_form, Some(true));
        assert!(verify_chain(&c, &f, &seq).unwrap().ok());
    }

    #[test]
    fn constant_weights_general() {
        let a = vec![Exponent::new(1, 3); 3];
        let seq = build_sequence(SequenceKind::BGeneral, 3, &a, 3).unwrap();
        let f = ConstantFamily::lattice(3, int(1));
        let c = build_chain(ChainKind::BGeneral, &f, &seq, 2, &LambdaPolicy::Default).unwrap();
        assert!(c.segments.iter().all(|s| (s.goodness - 1.0).abs() < 1e-12));
        assert!(c.k_d <= 3);
        assert!(verify_chain(&c, &f, &seq).unwrap().ok());
    }

    #[test]
    fn wrong_sequence_kind() {
        let seq = build_sequence(SequenceKind::BD2, 2, &half(), 4).unwrap();
        let f = geometric(2);
        assert!(build_chain(ChainKind::FFD3, &f, &seq, 2, &LambdaPolicy::Default).is_err());
        assert!(build_chain(ChainKind::BD2, &f, &seq, 4, &LambdaPolicy::Default).is_err());
    }

    #[test]
    fn kinds_round_trip() {
        for k in [
            ChainKind::BD2,
            ChainKind::BD3,
            ChainKind::BGeneral,
            ChainKind::FFD3,
            ChainKind::FFGeneral,
        ] {
            assert_eq!(ChainKind::parse(k.label()).unwrap(), k);
        }
    }
}
