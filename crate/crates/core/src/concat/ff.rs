//! Chains along orbits of the generators f_{i,j}: long strided paths joined
//! by short unit connectors.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{CoreError, Result};
use crate::lattice::{LatticeBox, Segment};
use crate::num::{int, Exponent, Mass};

use super::chain::{Assembly, ChainKind, ChebyshevRecord, Ctx, Draft, SegmentRole};
use super::{copy_good, mean_good};

/// Candidate cap for the greedy connector search.
pub const CONNECTOR_SEARCH_LIMIT: u64 = 200_000;
/// Largest residue family counted in a Chebyshev record.
pub const RESIDUE_RECORD_LIMIT: i64 = 200_000;

fn ff_alpha(d: usize) -> Exponent {
    Exponent::new(2, (d * (d - 1)) as i64)
}

/// The residue path through `p` along `axis` with stride `stride`, spanning `q`.
fn residue_path(q: &LatticeBox, p: &[i64], axis: usize, stride: i64) -> Segment {
    let lo = q.lo[axis];
    let start = lo + (p[axis] - lo).rem_euclid(stride);
    let mut a = p.to_vec();
    a[axis] = start;
    let count = if start > q.hi[axis] {
        0
    } else {
        ((q.hi[axis] - start) / stride + 1) as u64
    };
    Segment {
        anchor: a.into(),
        axis,
        step: stride,
        count,
    }
}

fn rows(q: &LatticeBox, lo: i64, hi: i64) -> LatticeBox {
    let mut b = q.clone();
    b.lo[1] = lo;
    b.hi[1] = hi;
    b
}

fn unit(anchor: Vec<i64>, axis: usize, count: u64) -> Segment {
    Segment {
        anchor: anchor.into(),
        axis,
        step: 1,
        count,
    }
}

/// First 1-good stride-k path of column k (copy form against the column).
fn stride_path(ctx: &Ctx, n: usize, k: i64, cheb: &mut Vec<ChebyshevRecord>) -> Result<Segment> {
    let q = ctx.q(n);
    let col = q.slice(0, k);
    let cm = ctx.box_mass(&col)?;
    let paths = k.min(q.side(1) as i64);
    let mut good = 0u128;
    let mut first = None;
    for rho in 0..paths {
        let seg = residue_path(q, &[k, q.lo[1] + rho], 1, k);
        if copy_good(
            &ctx.block_mass(&seg)?,
            paths as u128,
            &cm,
            &BigRational::one(),
        ) {
            good += 1;
            if first.is_none() {
                first = Some(seg);
            }
        }
    }
    cheb.push(ChebyshevRecord::new(
        n,
        "stride paths of the column",
        good,
        paths as u128,
        BigRational::zero(),
    ));
    Ok(first.expect("the residue paths partition the column"))
}

pub(crate) fn build_ff_d3(ctx: &Ctx, n_max: usize, fixed: Option<BigRational>) -> Result<Assembly> {
    let seq = ctx.seq;
    if seq.d != 3 {
        return Err(CoreError::Domain("this orbit chain needs d = 3".into()));
    }
    let lambda = fixed.unwrap_or_else(|| int(2));
    let floor = BigRational::one() - BigRational::one() / &lambda;
    let half = BigRational::new(1.into(), 2.into());
    let alpha = ff_alpha(3);
    let mut cheb = Vec::new();
    let mut drafts = Vec::new();

    // Start: first λ-good column of Q(first), then its first 1-good stride path.
    let n0 = seq.first;
    let q0 = ctx.q(n0);
    let mut k0 = None;
    let mut good = 0u128;
    for k in q0.lo[0]..=q0.hi[0] {
        if copy_good(
            &ctx.box_mass(&q0.slice(0, k))?,
            q0.side(0),
            ctx.mass(n0),
            &lambda,
        ) {
            good += 1;
            k0.get_or_insert(k);
        }
    }
    cheb.push(ChebyshevRecord::new(
        n0,
        "columns",
        good,
        q0.side(0),
        floor.clone(),
    ));
    let k = k0.ok_or_else(|| CoreError::GoodSearch {
        n: n0,
        class: "columns".into(),
        observed: format!("0 of {}", q0.side(0)),
    })?;
    let mut long = stride_path(ctx, n0, k, &mut cheb)?;
    // Column index while on a stride path, chunk rows while on a row.
    let mut column = k;
    let mut chunk = (0i64, 0i64);

    for n in n0..=n_max {
        let odd = (n - n0) % 2 == 1;
        let role_gen = if odd { (2, 1) } else { (3, 2) };
        drafts.push(Draft {
            n,
            role: SegmentRole::Long,
            generator: Some(role_gen),
            segment: long.clone(),
            exponent: alpha,
        });
        if n == n_max {
            break;
        }
        let q = ctx.q(n);
        let qn = ctx.q(n + 1);
        if !odd {
            // Step A: a horizontal set P_r of Q(n+1) reached by a good piece of the column.
            let y1 = qn.hi[0];
            let x2 = qn.lo[1];
            let r_max = (qn.side(1) as i64 + y1 - 1) / y1;
            let ov = q.intersect(qn).unwrap().slice(0, column);
            let om = ctx.box_mass(&ov)?;
            let (mut sets_good, mut conn_good) = (0u128, 0u128);
            let mut pick = None;
            // Early boxes are shorter than y_1: the only set is Q(n+1) itself.
            let candidates = if r_max == 1 { 1..2 } else { 1..r_max };
            let total = candidates.end - candidates.start;
            for r in candidates {
                let (a, b) = (x2 + (r - 1) * y1, (x2 + r * y1 - 1).min(qn.hi[1]));
                let pr = ctx.box_mass(&rows(qn, a, b))?;
                let conn = unit(vec![column, a], 1, (b - a + 1) as u64);
                let cm = ctx.block_mass(&conn)?;
                let pg = copy_good(&pr, r_max as u128, ctx.mass(n + 1), &lambda);
                let cg = copy_good(&cm, r_max as u128, &om, &lambda);
                sets_good += pg as u128;
                conn_good += cg as u128;
                if pg && cg && pick.is_none() {
                    pick = Some((a, b, pr, conn));
                }
            }
            let total = total as u128;
            cheb.push(ChebyshevRecord::new(
                n + 1,
                "horizontal sets",
                sets_good,
                total,
                floor.clone(),
            ));
            cheb.push(ChebyshevRecord::new(
                n,
                "column pieces over horizontal sets",
                conn_good,
                total,
                floor.clone(),
            ));
            let (a, b, pr, conn) = pick.ok_or_else(|| CoreError::GoodSearch {
                n,
                class: "horizontal set".into(),
                observed: format!(
                    "{sets_good}/{total} sets good, {conn_good}/{total} column pieces good"
                ),
            })?;
            drafts.push(Draft {
                n,
                role: SegmentRole::Connector,
                generator: Some((3, 1)),
                segment: conn,
                exponent: alpha,
            });
            // γ_{n+1}^1: first 1-good row of P_r.
            let mut good = 0u128;
            let mut row = None;
            for j in a..=b {
                let seg = Segment::line_in(qn, &[qn.lo[0], j], 0);
                if copy_good(
                    &ctx.block_mass(&seg)?,
                    (b - a + 1) as u128,
                    &pr,
                    &BigRational::one(),
                ) {
                    good += 1;
                    row.get_or_insert(seg);
                }
            }
            cheb.push(ChebyshevRecord::new(
                n + 1,
                "rows of the horizontal set",
                good,
                (b - a + 1) as u128,
                BigRational::zero(),
            ));
            long = row.expect("the rows partition the horizontal set");
            chunk = (a, b);
        } else {
            // Step B: a column of Q(n+1) reached by a good piece of P_r.
            let (a, b) = chunk;
            let pm = ctx.box_mass(&rows(q, a, b))?;
            let (mut cols_good, mut conn_good) = (0u128, 0u128);
            let mut pick = None;
            for kk in qn.lo[0]..=qn.hi[0] {
                let conn = unit(vec![kk, a], 1, (b - a + 1) as u64);
                let cg = copy_good(&ctx.block_mass(&conn)?, q.side(0), &pm, &lambda);
                let pg = copy_good(
                    &ctx.box_mass(&qn.slice(0, kk))?,
                    qn.side(0),
                    ctx.mass(n + 1),
                    &lambda,
                );
                cols_good += pg as u128;
                conn_good += cg as u128;
                if pg && cg && pick.is_none() {
                    pick = Some((kk, conn));
                }
            }
            cheb.push(ChebyshevRecord::new(
                n + 1,
                "columns",
                cols_good,
                qn.side(0),
                floor.clone(),
            ));
            cheb.push(ChebyshevRecord::new(
                n,
                "column pieces of the horizontal set",
                conn_good,
                qn.side(0),
                half.clone(),
            ));
            let (kk, conn) = pick.ok_or_else(|| CoreError::GoodSearch {
                n,
                class: "column".into(),
                observed: format!(
                    "{cols_good}/{} columns good, {conn_good} pieces good",
                    qn.side(0)
                ),
            })?;
            drafts.push(Draft {
                n,
                role: SegmentRole::Connector,
                generator: Some((3, 1)),
                segment: conn,
                exponent: alpha,
            });
            long = stride_path(ctx, n + 1, kk, &mut cheb)?;
            column = kk;
        }
    }
    let start = drafts[0].segment.anchor.clone();
    Ok(Assembly {
        kind: ChainKind::FFD3,
        lambda,
        lambda_prime: None,
        drafts,
        start,
        chebyshev: cheb,
        b_closed_form: None,
        budget_alpha: alpha,
    })
}

/// Stride of the long path along `a`: the coordinate p_{a−1}, or 1 on axis 0.
fn sigma(a: usize, p: &[i64]) -> i64 {
    if a == 0 {
        1
    } else {
        p[a - 1]
    }
}

/// Visit the points of `b` in lexicographic order until `f` returns true.
fn scan(b: &LatticeBox, mut f: impl FnMut(&[i64]) -> Result<bool>) -> Result<bool> {
    let mut p = b.lo.clone();
    loop {
        if f(&p)? {
            return Ok(true);
        }
        let mut k = p.len();
        loop {
            if k == 0 {
                return Ok(false);
            }
            k -= 1;
            if p[k] < b.hi[k] {
                p[k] += 1;
                break;
            }
            p[k] = b.lo[k];
        }
    }
}

/// Copy-form record of the residue paths of the line through `p`.
fn residue_record(
    ctx: &Ctx,
    n: usize,
    p: &[i64],
    axis: usize,
    lambda: &BigRational,
    floor: &BigRational,
) -> Result<Option<ChebyshevRecord>> {
    let q = ctx.q(n);
    let s = sigma(axis, p);
    let paths = s.min(q.side(axis) as i64);
    if !(1..=RESIDUE_RECORD_LIMIT).contains(&paths) {
        return Ok(None);
    }
    let lm = ctx.block_mass(&Segment::line_in(q, p, axis))?;
    let mut good = 0u128;
    for rho in 0..paths {
        let mut x = p.to_vec();
        x[axis] = q.lo[axis] + rho;
        if copy_good(
            &ctx.block_mass(&residue_path(q, &x, axis, s))?,
            paths as u128,
            &lm,
            lambda,
        ) {
            good += 1;
        }
    }
    Ok(Some(ChebyshevRecord::new(
        n,
        "residue paths of the long line",
        good,
        paths as u128,
        floor.clone(),
    )))
}

/// Greedy orbit chain in any dimension. The long path of box n runs along
/// the axis whose lower end moves next, with the stride of its generator;
/// a unit connector along the following axis hands over to the next box.
pub(crate) fn build_ff_general(
    ctx: &Ctx,
    n_max: usize,
    fixed: Option<BigRational>,
) -> Result<Assembly> {
    let seq = ctx.seq;
    let d = seq.d;
    if d < 3 {
        return Err(CoreError::Domain("orbit chains need d ≥ 3".into()));
    }
    let lambda = fixed.unwrap_or_else(|| int(4 * (d as i64 - 2)));
    let floor = BigRational::one() - BigRational::one() / &lambda;
    let alpha = ff_alpha(d);
    let axis_of = |n: usize| seq.modified_axes(n).unwrap().0;
    let mut cheb = Vec::new();
    let mut drafts = Vec::new();

    let good_in = |seg: &Segment, n: usize| -> Result<bool> {
        let m: Mass = ctx.block_mass(seg)?;
        Ok(mean_good(
            &m,
            seg.count as u128,
            ctx.mass(n),
            ctx.q(n).count(),
            &lambda,
        ))
    };

    // Start: lexicographic-first good residue path of Q(first).
    let n0 = seq.first;
    let q0 = ctx.q(n0);
    let a0 = axis_of(n0);
    let mut face = q0.clone();
    face.hi[a0] = face.lo[a0];
    let mut long: Option<Segment> = None;
    let mut tried = 0u64;
    scan(&face, |p| {
        let s = sigma(a0, p);
        for rho in 0..s.min(q0.side(a0) as i64) {
            tried += 1;
            if tried > CONNECTOR_SEARCH_LIMIT {
                return Err(CoreError::guard(
                    "orbit start search",
                    tried as u128,
                    CONNECTOR_SEARCH_LIMIT as u128,
                ));
            }
            let mut x = p.to_vec();
            x[a0] += rho;
            let seg = residue_path(q0, &x, a0, s);
            if good_in(&seg, n0)? {
                long = Some(seg);
                return Ok(true);
            }
        }
        Ok(false)
    })?;
    let mut long = long.ok_or_else(|| CoreError::GoodSearch {
        n: n0,
        class: "long paths".into(),
        observed: format!("none of {tried} residue paths good"),
    })?;
    if let Some(r) = residue_record(ctx, n0, &long.anchor, a0, &lambda, &floor)? {
        cheb.push(r);
    }

    for n in n0..=n_max {
        let a = long.axis;
        drafts.push(Draft {
            n,
            role: SegmentRole::Long,
            generator: Some(if a == 0 { (2, 1) } else { (a + 2, a + 1) }),
            segment: long.clone(),
            exponent: alpha,
        });
        if n == n_max {
            break;
        }
        let qn = ctx.q(n + 1);
        let a2 = axis_of(n + 1);
        let mut tried = 0u64;
        let mut pick: Option<(Option<Segment>, Segment)> = None;
        'outer: for t in 0..long.count {
            let q = long.point(t);
            if !qn.contains(&q) {
                continue;
            }
            let reach = sigma(a2, &q)
                .min(qn.hi[a2] - q[a2] + 1)
                .min(qn.side(0) as i64)
                .max(1);
            for delta in 0..reach {
                tried += 1;
                if tried > CONNECTOR_SEARCH_LIMIT {
                    break 'outer;
                }
                let conn = (delta > 0).then(|| unit(q.0.clone(), a2, delta as u64 + 1));
                if let Some(c) = &conn {
                    if !good_in(c, n + 1)? {
                        continue;
                    }
                }
                let mut q2 = q.0.clone();
                q2[a2] += delta;
                let next = residue_path(qn, &q2, a2, sigma(a2, &q2));
                if good_in(&next, n + 1)? {
                    pick = Some((conn, next));
                    break 'outer;
                }
            }
        }
        let (conn, next) = pick.ok_or_else(|| CoreError::GoodSearch {
            n,
            class: "connector".into(),
            observed: format!("{tried} candidates, none good"),
        })?;
        if let Some(c) = conn {
            drafts.push(Draft {
                n: n + 1,
                role: SegmentRole::Connector,
                generator: Some((a2 + 2, 1)),
                segment: c,
                exponent: alpha,
            });
        }
        if let Some(r) = residue_record(ctx, n + 1, &next.anchor, a2, &lambda, &floor)? {
            cheb.push(r);
        }
        long = next;
    }
    let start = drafts[0].segment.anchor.clone();
    Ok(Assembly {
        kind: ChainKind::FFGeneral,
        lambda,
        lambda_prime: None,
        drafts,
        start,
        chebyshev: cheb,
        b_closed_form: None,
        budget_alpha: alpha,
    })
}
