//! Reaching the vertical section through a fully good point by nested
//! strided segments, one generator per stage.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::boxes::SubdivisionTree;
use crate::error::{CoreError, Result};
use crate::lattice::{LengthFamily, Progression, Segment, ENUM_LIMIT};
use crate::num::{int, ratio_string, Mass};

use super::{big, fraction, fully_good_point_ratio, mean_good};

/// Stage thresholds λ_1, …, λ_{d−1} for group dimension d.
///
/// λ_1 = μ 2^{d−2} A^{3d−6} and λ_t = μ 2^{d−1−t} A^{3d−5−t} λ′ for t ≥ 2,
/// with λ′ = 2(d−2)/(1−κ).
pub fn lambda_cascade(
    mu: &BigRational,
    a: &BigRational,
    kappa: &BigRational,
    d: usize,
) -> Result<Vec<BigRational>> {
    if d < 3 {
        return Err(CoreError::Domain("the section cascade needs d ≥ 3".into()));
    }
    if *kappa <= BigRational::zero() || *kappa >= BigRational::one() {
        return Err(CoreError::Domain(format!(
            "κ = {kappa} must lie strictly between 0 and 1"
        )));
    }
    let pow = |b: &BigRational, e: usize| (0..e).fold(BigRational::one(), |acc, _| acc * b);
    let lp = int(2 * (d as i64 - 2)) / (BigRational::one() - kappa);
    let two = int(2);
    let mut out = vec![mu * pow(&two, d - 2) * pow(a, 3 * d - 6)];
    for t in 2..d {
        out.push(mu * pow(&two, d - 1 - t) * pow(a, 3 * d - 5 - t) * &lp);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    /// 1-based stage; stage t uses the generator f_{d,t}.
    pub stage: usize,
    pub generator: (usize, usize),
    pub stride: i64,
    /// Last-axis range of the piece the stage works in.
    pub range: (i64, i64),
    #[serde(with = "ratio_string")]
    pub lambda: BigRational,
    pub paths_total: u64,
    pub paths_good: u64,
    pub paths_used: u64,
    /// Largest point count over the paths used.
    pub max_points: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerticalReach {
    pub d: usize,
    pub point: Vec<i64>,
    pub section: Segment,
    pub stages: Vec<StageReport>,
    pub reached_count: u64,
    #[serde(with = "ratio_string")]
    pub fraction: BigRational,
    #[serde(with = "ratio_string")]
    pub kappa: BigRational,
    pub meets_kappa: bool,
    /// Largest used path length over 1 + y_1 − x_1.
    pub d_prime: f64,
    pub point_ratio: f64,
    #[serde(skip)]
    reached: Vec<Option<usize>>,
    #[serde(skip)]
    paths: Vec<PathRec>,
}

#[derive(Clone, Debug)]
struct PathRec {
    seg: Segment,
    parent: Option<usize>,
}

impl VerticalReach {
    pub fn is_reached(&self, last: i64) -> bool {
        self.section
            .position(&self.with_last(last))
            .is_some_and(|t| self.reached[t as usize].is_some())
    }

    fn with_last(&self, last: i64) -> Vec<i64> {
        let mut v = self.point.clone();
        *v.last_mut().unwrap() = last;
        v
    }

    /// Segments from the stage-1 segment to one holding the level `last`.
    pub fn chain_to(&self, last: i64) -> Option<Vec<Segment>> {
        let t = self.section.position(&self.with_last(last))?;
        let mut k = self.reached[t as usize]?;
        let mut out = vec![self.paths[k].seg.clone()];
        while let Some(p) = self.paths[k].parent {
            k = p;
            out.push(self.paths[k].seg.clone());
        }
        out.reverse();
        Some(out)
    }
}

/// Reach the section V∩Q through `p` (all coordinates but the last fixed).
///
/// Stage 1 is the unit segment of the leaf piece holding p. Stage t ≥ 2
/// splits the depth d−1−t piece into residue paths of stride p_{t−1} (the
/// generator f_{d,t}) and keeps the good ones meeting the points reached so
/// far.
pub fn reach_vertical_section(
    fam: &dyn LengthFamily,
    tree: &SubdivisionTree,
    p: &[i64],
    kappa: &BigRational,
    mu: &BigRational,
) -> Result<VerticalReach> {
    let q = &tree.root;
    let axes = q.dim();
    let d = axes + 1;
    let last = axes - 1;
    if !q.contains(p) {
        return Err(CoreError::Domain(format!("point {p:?} outside the box")));
    }
    if q.side(last) > ENUM_LIMIT {
        return Err(CoreError::guard(
            "vertical section",
            q.side(last),
            ENUM_LIMIT,
        ));
    }
    let chain = tree.chain(p[last]).unwrap();
    if !chain.admissible {
        return Err(CoreError::pre(
            "boxes.admissible",
            format!("level {} lies in a trailing piece", p[last]),
        ));
    }
    let (worst, _) = fully_good_point_ratio(fam, tree, p)?;
    if !worst.le(&Mass::Exact(mu.clone())) {
        return Err(CoreError::pre(
            "concat.fully_good",
            format!(
                "point {p:?} has chain ratio {} above μ = {mu}",
                worst.to_f64()
            ),
        ));
    }
    let lambdas = lambda_cascade(mu, &tree.a, kappa, d)?;
    let root = q.to_block();
    let (root_mass, root_count) = (fam.block_mass(&root)?, root.count());
    let section = Segment::line_in(q, p, last);
    let lo = q.lo[last];
    let mut reached: Vec<Option<usize>> = vec![None; q.side(last) as usize];
    let mut paths: Vec<PathRec> = Vec::new();
    let mut stages = Vec::with_capacity(d - 1);
    let s = q.side(0) as f64;
    let mut d_prime: f64 = 0.0;

    for stage in 1..d {
        // Stage t works in the piece of depth d−1−t.
        let depth = d - 1 - stage;
        let piece = tree.piece(&chain.path[..depth]);
        let (plo, phi) = (piece.lo[last], piece.hi[last]);
        let stride = if stage == 1 { 1 } else { p[stage - 2] };
        if stride < 1 {
            return Err(CoreError::Domain(format!(
                "stride {stride} at stage {stage} is not positive"
            )));
        }
        let lambda = &lambdas[stage - 1];
        let len = phi - plo + 1;
        let residues: Vec<i64> = if stage == 1 {
            vec![plo]
        } else {
            (plo..plo + stride.min(len)).collect()
        };
        let mut rep = StageReport {
            stage,
            generator: (d, stage),
            stride,
            range: (plo, phi),
            lambda: lambda.clone(),
            paths_total: residues.len() as u64,
            paths_good: 0,
            paths_used: 0,
            max_points: 0,
        };
        let snapshot: Vec<Option<usize>> = reached.clone();
        for start in residues {
            let prog = Progression {
                start,
                stride,
                count: ((phi - start) / stride + 1) as u64,
            };
            let mut anchor = p.to_vec();
            anchor[last] = start;
            let seg = Segment::new(anchor.into(), last, stride, prog.count)?;
            let m = fam.block_mass(&seg.to_block())?;
            if !mean_good(&m, prog.count as u128, &root_mass, root_count, lambda) {
                continue;
            }
            rep.paths_good += 1;
            let hit = if stage == 1 {
                Some(None)
            } else {
                (0..prog.count)
                    .map(|t| prog.term(t))
                    .find_map(|x| snapshot[(x - lo) as usize])
                    .map(Some)
            };
            let Some(parent) = hit else { continue };
            let id = paths.len();
            paths.push(PathRec { seg, parent });
            rep.paths_used += 1;
            rep.max_points = rep.max_points.max(prog.count);
            for t in 0..prog.count {
                let slot = &mut reached[(prog.term(t) - lo) as usize];
                if slot.is_none() {
                    *slot = Some(id);
                }
            }
        }
        d_prime = d_prime.max(rep.max_points as f64 / s);
        stages.push(rep);
    }
    let reached_count = reached.iter().filter(|r| r.is_some()).count() as u64;
    let frac = fraction(reached_count as u128, reached.len() as u128);
    Ok(VerticalReach {
        d,
        point: p.to_vec(),
        section,
        stages,
        reached_count,
        meets_kappa: big(reached_count as u128) >= kappa * big(reached.len() as u128),
        fraction: frac,
        kappa: kappa.clone(),
        d_prime,
        point_ratio: worst.to_f64(),
        reached,
        paths,
    })
}
