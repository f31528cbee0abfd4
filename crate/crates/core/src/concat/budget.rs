//! Distortion budget of a certified chain: Hölder-power sums along the walked
//! path up to its entry N(n) into Q(n+1), against (ln N)^{1−α}.

use serde::Serialize;

use crate::boxes::BoxSequence;
use crate::error::{CoreError, Result};
use crate::lattice::{LatticeBox, LengthFamily, Segment};
use crate::num::{exponent_string, exponent_to_f64, Exponent, Wide};

use super::chain::ChainCertificate;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetRow {
    pub n: usize,
    /// N(n) + 1: path points up to and including the first one in Q(n+1).
    pub points: u64,
    pub budget: Wide,
    pub ln_points: f64,
    /// budget / (ln N)^{1−α}.
    pub normalized: f64,
    pub n_over_ln: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetReport {
    #[serde(with = "exponent_string")]
    pub alpha: Exponent,
    pub path_points: u64,
    pub rows: Vec<BudgetRow>,
    /// Largest normalized budget over n ≥ 2.
    pub a_prime: f64,
    /// max/min of the normalized budget over 4 ≤ n ≤ 12.
    pub spread: Option<f64>,
    pub n_over_ln_bracket: Option<(f64, f64)>,
}

struct Piece {
    seg: Segment,
    exponent: Exponent,
    /// Points this piece owns: all but the junction it hands over.
    owned: u64,
    offset: u64,
    sum: Wide,
}

/// First position t < limit with seg.point(t) in q.
fn first_inside(seg: &Segment, q: &LatticeBox, limit: u64) -> Option<u64> {
    if limit == 0 {
        return None;
    }
    for k in 0..q.dim() {
        if k != seg.axis && !(q.lo[k]..=q.hi[k]).contains(&seg.anchor[k]) {
            return None;
        }
    }
    let (a, s) = (seg.anchor[seg.axis], seg.step);
    let (lo, hi) = (q.lo[seg.axis], q.hi[seg.axis]);
    let need = if s > 0 { lo - a } else { a - hi };
    let t = if need <= 0 {
        0
    } else {
        ((need + s.abs() - 1) / s.abs()) as u64
    };
    if t >= limit {
        return None;
    }
    let x = a + s * t as i64;
    (lo..=hi).contains(&x).then_some(t)
}

pub fn distortion_budget(
    cert: &ChainCertificate,
    fam: &dyn LengthFamily,
    seq: &BoxSequence,
) -> Result<BudgetReport> {
    let walked: Vec<(&Segment, Exponent)> = cert
        .segments
        .iter()
        .filter(|s| s.traversed.count > 0)
        .map(|s| (&s.traversed, s.exponent))
        .collect();
    if walked.is_empty() {
        return Err(CoreError::Domain("the chain walks no points".into()));
    }
    let mut pieces = Vec::with_capacity(walked.len());
    let mut offset = 0u64;
    for (i, (seg, e)) in walked.iter().enumerate() {
        let owned = if i + 1 == walked.len() {
            seg.count
        } else {
            seg.count - 1
        };
        let sum = if owned == 0 {
            Wide::ZERO
        } else {
            fam.block_power_sum(&seg.between(0, owned - 1).to_block(), *e)?
        };
        pieces.push(Piece {
            seg: (*seg).clone(),
            exponent: *e,
            owned,
            offset,
            sum,
        });
        offset += owned;
    }
    let path_points = offset;
    let alpha = cert.budget_alpha;
    let expo = 1.0 - exponent_to_f64(alpha);

    let mut rows = Vec::new();
    for n in cert.first..=cert.n_max {
        let q = seq
            .get(n + 1)
            .ok_or_else(|| CoreError::Domain(format!("box {} missing", n + 1)))?;
        let Some((i, t)) = pieces
            .iter()
            .enumerate()
            .find_map(|(i, p)| first_inside(&p.seg, q, p.owned).map(|t| (i, t)))
        else {
            continue;
        };
        let p = &pieces[i];
        let mut budget: Wide = pieces[..i].iter().map(|p| p.sum).sum();
        budget += fam.block_power_sum(&p.seg.between(0, t).to_block(), p.exponent)?;
        let points = p.offset + t + 1;
        let ln = (points as f64).ln();
        rows.push(BudgetRow {
            n,
            points,
            budget,
            ln_points: ln,
            normalized: if ln > 0.0 {
                budget.to_f64() / ln.powf(expo)
            } else {
                f64::INFINITY
            },
            n_over_ln: if ln > 0.0 {
                n as f64 / ln
            } else {
                f64::INFINITY
            },
        });
    }
    let a_prime = rows
        .iter()
        .filter(|r| r.n >= 2)
        .map(|r| r.normalized)
        .fold(0.0, f64::max);
    let window: Vec<&BudgetRow> = rows.iter().filter(|r| (4..=12).contains(&r.n)).collect();
    let spread = (!window.is_empty()).then(|| {
        let hi = window.iter().map(|r| r.normalized).fold(0.0, f64::max);
        let lo = window
            .iter()
            .map(|r| r.normalized)
            .fold(f64::INFINITY, f64::min);
        hi / lo
    });
    let bracket = (!rows.is_empty()).then(|| {
        let v = rows.iter().map(|r| r.n_over_ln);
        (
            v.clone().fold(f64::INFINITY, f64::min),
            v.fold(0.0, f64::max),
        )
    });
    Ok(BudgetReport {
        alpha,
        path_points,
        rows,
        a_prime,
        spread,
        n_over_ln_bracket: bracket,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_positions() {
        let q = LatticeBox::new(vec![5, 0], vec![9, 3]).unwrap();
        let up = Segment {
            anchor: vec![0, 1].into(),
            axis: 0,
            step: 2,
            count: 10,
        };
        assert_eq!(first_inside(&up, &q, 10), Some(3));
        assert_eq!(first_inside(&up, &q, 3), None);
        let down = Segment {
            anchor: vec![20, 1].into(),
            axis: 0,
            step: -3,
            count: 10,
        };
        // 20, 17, 14, 11, 8
        assert_eq!(first_inside(&down, &q, 10), Some(4));
        let off = Segment {
            anchor: vec![0, 7].into(),
            axis: 0,
            step: 1,
            count: 10,
        };
        assert_eq!(first_inside(&off, &q, 10), None);
    }
}
