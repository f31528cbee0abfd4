//! Floating-point checks on closed-form interval diffeomorphisms: derivative
//! growth of iterates, Hölder constants of log Dg, and wandering intervals.
//!
//! All maxima are taken over finite grids, so they bound the true supremum
//! from below.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

const FIXED_TOL: f64 = 1e-10;
/// ln of the largest finite f64, roughly.
const LOG_LIMIT: f64 = 709.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapKind {
    Identity,
    /// x ↦ p + slope·(x − p).
    Affine {
        slope: f64,
        fixed: f64,
    },
    /// x + c·x²(1−x)².
    Parabolic {
        c: f64,
    },
    /// x + c·x².
    Quadratic {
        c: f64,
    },
    /// x + c·x(1−x).
    Logistic {
        c: f64,
    },
    /// λx / (1 + (λ−1)x), with Dg(0) = λ.
    Mobius {
        lambda: f64,
    },
    /// x ↦ (g(a + s·x) − a)/s.
    Rescaled {
        inner: Box<MapKind>,
        a: f64,
        s: f64,
    },
}

impl MapKind {
    fn eval(&self, x: f64) -> f64 {
        match self {
            MapKind::Identity => x,
            MapKind::Affine { slope, fixed } => fixed + slope * (x - fixed),
            MapKind::Parabolic { c } => x + c * x * x * (1.0 - x) * (1.0 - x),
            MapKind::Quadratic { c } => x + c * x * x,
            MapKind::Logistic { c } => x + c * x * (1.0 - x),
            MapKind::Mobius { lambda } => lambda * x / (1.0 + (lambda - 1.0) * x),
            MapKind::Rescaled { inner, a, s } => (inner.eval(a + s * x) - a) / s,
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match self {
            MapKind::Identity => 1.0,
            MapKind::Affine { slope, .. } => *slope,
            MapKind::Parabolic { c } => 1.0 + 2.0 * c * x * (1.0 - x) * (1.0 - 2.0 * x),
            MapKind::Quadratic { c } => 1.0 + 2.0 * c * x,
            MapKind::Logistic { c } => 1.0 + c * (1.0 - 2.0 * x),
            MapKind::Mobius { lambda } => {
                let q = 1.0 + (lambda - 1.0) * x;
                lambda / (q * q)
            }
            MapKind::Rescaled { inner, a, s } => inner.deriv(a + s * x),
        }
    }

    /// Fixed points with their derivatives, in the map's own coordinate.
    fn fixed_points(&self) -> Vec<f64> {
        match self {
            MapKind::Identity => Vec::new(),
            MapKind::Affine { slope, fixed } => {
                if *slope == 1.0 {
                    Vec::new()
                } else {
                    vec![*fixed]
                }
            }
            MapKind::Parabolic { .. } | MapKind::Logistic { .. } | MapKind::Mobius { .. } => {
                vec![0.0, 1.0]
            }
            MapKind::Quadratic { .. } => vec![0.0],
            MapKind::Rescaled { inner, a, s } => inner
                .fixed_points()
                .into_iter()
                .map(|p| (p - a) / s)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub derivative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothMap {
    pub kind: MapKind,
    pub lo: f64,
    pub hi: f64,
    pub fixed_points: Vec<FixedPoint>,
}

impl SmoothMap {
    pub fn new(kind: MapKind, lo: f64, hi: f64) -> Result<SmoothMap> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CoreError::Domain(format!(
                "[{lo}, {hi}] is not an interval"
            )));
        }
        let n = 1000;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let d = kind.deriv(x);
            if !(d > 0.0) {
                return Err(CoreError::Domain(format!("Dg({x}) = {d} is not positive")));
            }
        }
        let mut fixed_points = Vec::new();
        for x in kind.fixed_points() {
            if x < lo - FIXED_TOL || x > hi + FIXED_TOL {
                continue;
            }
            let gap = (kind.eval(x) - x).abs();
            if gap > FIXED_TOL {
                return Err(CoreError::Domain(format!(
                    "declared fixed point {x} moves by {gap}"
                )));
            }
            fixed_points.push(FixedPoint {
                x,
                derivative: kind.deriv(x),
            });
        }
        Ok(SmoothMap {
            kind,
            lo,
            hi,
            fixed_points,
        })
    }

    pub fn identity() -> SmoothMap {
        SmoothMap::new(MapKind::Identity, 0.0, 1.0).unwrap()
    }

    pub fn affine(slope: f64, fixed: f64, lo: f64, hi: f64) -> Result<SmoothMap> {
        SmoothMap::new(MapKind::Affine { slope, fixed }, lo, hi)
    }

    /// g_c(x) = x + c·x²(1−x)² on [0,1]: both endpoints parabolic, no interior fixed point.
    pub fn parabolic(c: f64) -> Result<SmoothMap> {
        if !(c > 0.0 && c < 4.0) {
            return Err(CoreError::Domain(format!(
                "parabolic family needs 0 < c < 4, got {c}"
            )));
        }
        SmoothMap::new(MapKind::Parabolic { c }, 0.0, 1.0)
    }

    pub fn quadratic(c: f64) -> Result<SmoothMap> {
        SmoothMap::new(MapKind::Quadratic { c }, 0.0, 1.0)
    }

    /// x + c·x(1−x): hyperbolic at both ends when c ≠ 0.
    pub fn logistic(c: f64) -> Result<SmoothMap> {
        SmoothMap::new(MapKind::Logistic { c }, 0.0, 1.0)
    }

    pub fn mobius(lambda: f64) -> Result<SmoothMap> {
        if !(lambda > 0.0) {
            return Err(CoreError::Domain(
                "Möbius multiplier must be positive".into(),
            ));
        }
        SmoothMap::new(MapKind::Mobius { lambda }, 0.0, 1.0)
    }

    /// Looks a built-in map up by name: identity, parabolic, quadratic, logistic, mobius, affine.
    pub fn by_name(name: &str, param: f64) -> Result<SmoothMap> {
        match name {
            "identity" => Ok(SmoothMap::identity()),
            "parabolic" => SmoothMap::parabolic(param),
            "quadratic" => SmoothMap::quadratic(param),
            "logistic" | "hyperbolic" => SmoothMap::logistic(param),
            "mobius" => SmoothMap::mobius(param),
            "affine" => SmoothMap::affine(param, 0.0, 0.0, 1.0),
            other => Err(CoreError::Parse(format!("unknown map {other:?}"))),
        }
    }

    /// The same formula on a subinterval.
    pub fn restricted(&self, lo: f64, hi: f64) -> Result<SmoothMap> {
        if lo < self.lo || hi > self.hi {
            return Err(CoreError::Domain("restriction leaves the domain".into()));
        }
        SmoothMap::new(self.kind.clone(), lo, hi)
    }

    /// Conjugate by the affine map [0,1] → [lo,hi].
    pub fn renormalized(&self) -> Result<SmoothMap> {
        let kind = MapKind::Rescaled {
            inner: Box::new(self.kind.clone()),
            a: self.lo,
            s: self.len(),
        };
        SmoothMap::new(kind, 0.0, 1.0)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.kind.deriv(x)
    }

    pub fn has_hyperbolic_fixed_point(&self) -> bool {
        self.fixed_points
            .iter()
            .any(|p| (p.derivative - 1.0).abs() > FIXED_TOL)
    }

    /// g⁻¹(y) by bisection on the domain, run until the bracket has no
    /// float strictly inside it, so tiny preimages keep full relative precision.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (mut a, mut b) = (self.lo, self.hi);
        let (ga, gb) = (self.eval(a), self.eval(b));
        if y < ga || y > gb {
            return Err(CoreError::Domain(format!(
                "{y} is outside g(I) = [{ga}, {gb}]"
            )));
        }
        // Each halving either shrinks the width or an exponent, so 2200 steps
        // exhaust the doubles in [lo, hi].
        for _ in 0..2200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let gm = self.eval(m);
            if gm == y {
                return Ok(m);
            }
            if gm < y {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(if y - self.eval(a) <= self.eval(b) - y {
            a
        } else {
            b
        })
    }

    /// ln Dg^k(x) along the forward orbit.
    pub fn log_iterate_derivative(&self, x: f64, k: u32) -> f64 {
        let mut x = x;
        let mut acc = 0.0;
        for _ in 0..k {
            acc += self.deriv(x).ln();
            x = self.eval(x);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    /// Rounds of zooming in around the current argmax.
    pub zoom_rounds: usize,
    pub zoom_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            points: 10_000,
            zoom_rounds: 3,
            zoom_points: 64,
        }
    }
}

impl Grid {
    pub fn uniform(points: usize) -> Grid {
        Grid {
            points,
            ..Grid::default()
        }
    }

    fn nodes(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.points.max(2) - 1;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeMax {
    pub k: u32,
    pub log_value: f64,
    pub argmax: f64,
}

impl DerivativeMax {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

fn best_on(g: &SmoothMap, xs: &[f64], k: u32) -> (f64, f64) {
    xs.par_iter()
        .map(|&x| (g.log_iterate_derivative(x, k), x))
        // Ties go to the smaller x so the result does not depend on the split.
        .reduce(
            || (f64::NEG_INFINITY, g.lo),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        )
}

fn zoom(g: &SmoothMap, grid: &Grid, k: u32, start: (f64, f64), h: f64) -> (f64, f64) {
    let mut best = start;
    let mut h = h;
    for _ in 0..grid.zoom_rounds {
        let lo = (best.1 - h).max(g.lo);
        let hi = (best.1 + h).min(g.hi);
        let xs = Grid::uniform(grid.zoom_points).nodes(lo, hi);
        let cand = best_on(g, &xs, k);
        if cand.0 > best.0 {
            best = cand;
        }
        h = (hi - lo) / (grid.zoom_points.max(2) - 1) as f64;
    }
    best
}

/// max over the grid of Dg^k, with zooming near the argmax.
pub fn iterate_derivative_max(g: &SmoothMap, k: u32, grid: &Grid) -> Result<DerivativeMax> {
    let xs = grid.nodes(g.lo, g.hi);
    let h = (g.hi - g.lo) / (xs.len() - 1) as f64;
    let (log_value, argmax) = zoom(g, grid, k, best_on(g, &xs, k), h);
    if !log_value.is_finite() || log_value.abs() > LOG_LIMIT {
        return Err(CoreError::Domain(format!(
            "ln Dg^{k} = {log_value} leaves the f64 range"
        )));
    }
    Ok(DerivativeMax {
        k,
        log_value,
        argmax,
    })
}

/// ln max Dg^k on the grid for every k in 1..=k_max, tracking all orbits at once.
/// No zooming, so each entry is a lower bound on the grid-refined value.
pub fn log_max_profile(g: &SmoothMap, k_max: u32, points: usize) -> Vec<f64> {
    let xs = Grid::uniform(points).nodes(g.lo, g.hi);
    let k = k_max as usize;
    xs.par_chunks(256)
        .fold(
            || vec![f64::NEG_INFINITY; k],
            |mut best, chunk| {
                for &x0 in chunk {
                    let (mut x, mut acc) = (x0, 0.0);
                    for b in best.iter_mut() {
                        acc += g.deriv(x).ln();
                        x = g.eval(x);
                        if acc > *b {
                            *b = acc;
                        }
                    }
                }
                best
            },
        )
        .reduce(
            || vec![f64::NEG_INFINITY; k],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub constant: f64,
    pub grid_points: usize,
    pub pairs: u64,
}

/// max over grid pairs of |ln Dg(x) − ln Dg(y)| / |x − y|^α.
pub fn holder_constant_estimate(
    g: &SmoothMap,
    alpha: f64,
    points: usize,
) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CoreError::Domain(format!(
            "Hölder exponent {alpha} is not in (0,1]"
        )));
    }
    let n = points.max(2);
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let xs: Vec<f64> = ts.iter().map(|t| g.lo + g.len() * t).collect();
    let logs: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = g.deriv(x);
            if d > 0.0 {
                Ok(d.ln())
            } else {
                Err(CoreError::Domain(format!("Dg({x}) = {d} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let constant = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut m: f64 = 0.0;
            for j in i + 1..n {
                // Distances from the unit grid, scaled, so rescaled maps see the same pairs.
                let dist = (ts[j] - ts[i]) * g.len();
                m = m.max((logs[j] - logs[i]).abs() / dist.powf(alpha));
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    Ok(HolderEstimate {
        alpha,
        constant,
        grid_points: n,
        pairs: (n * (n - 1) / 2) as u64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BorichevRow {
    pub k: u32,
    pub log_max: f64,
    /// 3·C_g·|I|^α·k^{1−α}.
    pub log_bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorichevReport {
    pub alpha: f64,
    pub holder: HolderEstimate,
    pub rows: Vec<BorichevRow>,
    pub all_hold: bool,
    /// min over k of log_bound − log_max.
    pub min_slack: f64,
    pub pass_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsGrid {
    /// Grid for the derivative maxima.
    pub orbit_points: usize,
    /// Grid for the Hölder constant.
    pub holder_points: usize,
}

impl Default for DynamicsGrid {
    fn default() -> Self {
        DynamicsGrid {
            orbit_points: 10_000,
            holder_points: 2_000,
        }
    }
}

/// Checks max Dg^k ≤ exp(3·C_g·|I|^α·k^{1−α}) for k = 1..=k_max.
pub fn borichev_check(
    g: &SmoothMap,
    alpha: f64,
    k_max: u32,
    grid: &DynamicsGrid,
) -> Result<BorichevReport> {
    if let Some(p) = g
        .fixed_points
        .iter()
        .find(|p| (p.derivative - 1.0).abs() > FIXED_TOL)
    {
        return Err(CoreError::pre(
            "smooth.no-hyperbolic-fixed-point",
            format!("Dg({}) = {} ≠ 1", p.x, p.derivative),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::Domain(format!("need 0 < α < 1, got {alpha}")));
    }
    let holder = holder_constant_estimate(g, alpha, grid.holder_points)?;
    let scale = 3.0 * holder.constant * g.len().powf(alpha);
    let profile = log_max_profile(g, k_max, grid.orbit_points);
    let rows: Vec<BorichevRow> = profile
        .iter()
        .enumerate()
        .map(|(i, &log_max)| {
            let k = i as u32 + 1;
            let log_bound = scale * (k as f64).powf(1.0 - alpha);
            BorichevRow {
                k,
                log_max,
                log_bound,
                holds: log_max <= log_bound + 1e-12,
            }
        })
        .collect();
    let passed = rows.iter().filter(|r| r.holds).count();
    Ok(BorichevReport {
        alpha,
        holder,
        all_hold: passed == rows.len(),
        min_slack: rows
            .iter()
            .map(|r| r.log_bound - r.log_max)
            .fold(f64::INFINITY, f64::min),
        pass_rate: if rows.is_empty() {
            1.0
        } else {
            passed as f64 / rows.len() as f64
        },
        rows,
    })
}

/// All k ≤ k_max with max Dg^k > k on the grid.
pub fn ps_scan(g: &SmoothMap, k_max: u32, points: usize) -> Vec<u32> {
    log_max_profile(g, k_max, points)
        .iter()
        .enumerate()
        .filter(|(i, &l)| l > ((*i + 1) as f64).ln())
        .map(|(i, _)| i as u32 + 1)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WanderingReport {
    pub x0: f64,
    /// |g^{−k}(J)| for k = 0..
    pub lengths: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Endpoints strictly monotone, so the intervals only touch at endpoints.
    pub disjoint: bool,
    pub bounded: bool,
    /// Set when g^{−k}(x0) left g(I) before k_max.
    pub stopped_at: Option<u32>,
}

/// Pulls J = [x0, g(x0)] back k_max times and sums the lengths.
pub fn wandering_sum_check(g: &SmoothMap, x0: f64, k_max: u32) -> Result<WanderingReport> {
    let gx = g.eval(x0);
    if (gx - x0).abs() <= FIXED_TOL {
        return Err(CoreError::pre(
            "smooth.wandering",
            format!("x0 = {x0} is fixed"),
        ));
    }
    // ends[k] = g^{−k+1}(x0), so g^{−k}(J) sits between ends[k+1] and ends[k].
    let mut ends = vec![gx, x0];
    let mut stopped_at = None;
    for k in 1..=k_max {
        match g.inverse(*ends.last().unwrap()) {
            Ok(y) => ends.push(y),
            Err(_) => {
                stopped_at = Some(k);
                break;
            }
        }
    }
    let increasing = gx > x0;
    let disjoint = ends
        .windows(2)
        .all(|w| if increasing { w[1] < w[0] } else { w[1] > w[0] });
    let lengths: Vec<f64> = ends.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = lengths
        .iter()
        .map(|l| {
            acc += l;
            acc
        })
        .collect();
    let bounded = partial_sums.last().is_none_or(|&s| s <= g.len());
    Ok(WanderingReport {
        x0,
        lengths,
        partial_sums,
        disjoint,
        bounded,
        stopped_at,
    })
}
