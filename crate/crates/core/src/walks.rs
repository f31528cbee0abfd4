//! The sphere-equidistributing Markov walk on ℕ₀^d.
//!
//! From a state with coordinate sum S the walk steps along axis j with
//! probability (1 + i_j)/(S + d). Arrival distributions are computed exactly;
//! sampled paths are certified against the cost bound
//! Σ ℓ^{1/d} ≤ B (log(n+1))^{1−1/d} and the terminal bound ℓ(end) ≤ B/(n+1)^{d−1}.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::lattice::{
    path_cost, sphere_size, CostExponents, LatticePath, LengthFamily, MultiIndex, MAX_DIM,
};
use crate::num::{int, ratio_string, Exponent, Wide};

/// Largest sphere the exact arrival distribution will handle.
pub const ARRIVAL_LIMIT: u128 = 1_000_000;

/// Largest number of lattice points the brute-force optimizer will visit.
pub const BRUTE_LIMIT: u128 = 10_000_000;

/// Default rejection cap for [`sample_and_certify`].
pub const DEFAULT_MAX_ATTEMPTS: u32 = 100;

/// Relative slack on the floating side of the cost comparison.
pub const COST_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WalkKernel {
    pub d: usize,
}

impl WalkKernel {
    pub fn new(d: usize) -> Result<WalkKernel> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(CoreError::Domain(format!(
                "walk dimension {d} outside 1..={MAX_DIM}"
            )));
        }
        Ok(WalkKernel { d })
    }

    fn check_state(&self, state: &[i64]) -> Result<()> {
        if state.len() != self.d {
            return Err(CoreError::Domain(format!(
                "state has dimension {}, kernel {}",
                state.len(),
                self.d
            )));
        }
        if state.iter().any(|&x| x < 0) {
            return Err(CoreError::Domain(format!(
                "state {state:?} has a negative coordinate"
            )));
        }
        Ok(())
    }

    /// (axis, probability) for every axis, exactly.
    pub fn transition_distribution(&self, state: &[i64]) -> Result<Vec<(usize, BigRational)>> {
        self.check_state(state)?;
        let total: i64 = state.iter().sum::<i64>() + self.d as i64;
        Ok((0..self.d)
            .map(|j| {
                (
                    j,
                    BigRational::new(BigInt::from(1 + state[j]), BigInt::from(total)),
                )
            })
            .collect())
    }

    /// Draws one step with exact integer arithmetic.
    pub fn sample_step<R: Rng + ?Sized>(&self, state: &[i64], rng: &mut R) -> usize {
        let total: u64 = state.iter().map(|&x| x as u64).sum::<u64>() + self.d as u64;
        let mut u = rng.gen_range(0..total);
        for (j, &x) in state.iter().enumerate() {
            let w = 1 + x as u64;
            if u < w {
                return j;
            }
            u -= w;
        }
        unreachable!("cumulative weights cover the range")
    }

    /// A walk of n steps from the origin.
    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LatticePath {
        let mut state = vec![0i64; self.d];
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(MultiIndex(state.clone()));
        for _ in 0..n {
            let j = self.sample_step(&state, rng);
            state[j] += 1;
            pts.push(MultiIndex(state.clone()));
        }
        LatticePath { points: pts }
    }

    /// Exact law of the position after n steps.
    pub fn arrival_distribution(&self, n: u64) -> Result<BTreeMap<MultiIndex, BigRational>> {
        let size = sphere_size(self.d, n);
        if size > ARRIVAL_LIMIT {
            return Err(CoreError::guard("arrival sphere", size, ARRIVAL_LIMIT));
        }
        let mut dist: BTreeMap<MultiIndex, BigRational> = BTreeMap::new();
        dist.insert(MultiIndex::zeros(self.d), BigRational::one());
        for _ in 0..n {
            let mut next: BTreeMap<MultiIndex, BigRational> = BTreeMap::new();
            for (state, p) in &dist {
                for (j, q) in self.transition_distribution(state)? {
                    let to = state.shifted(j, 1)?;
                    *next.entry(to).or_insert_with(BigRational::zero) += p * q;
                }
            }
            dist = next;
        }
        Ok(dist)
    }
}

/// A_d = 1/(d−1)!, the constant in |S_n| ≥ A_d (n+1)^{d−1}.
pub fn a_d(d: usize) -> BigRational {
    let f: BigInt = (1..d as u64).map(BigInt::from).product();
    BigRational::new(BigInt::one(), f)
}

/// The certificate constant B = max{3 (L/A_d)^{1/d}, 3L/A_d}, as a float
/// and as a rational rounded down.
pub fn bound_b(d: usize, total: &BigRational) -> (f64, BigRational) {
    let ratio = total / a_d(d);
    let linear = &ratio * int(3);
    let r = Wide::from_ratio(&ratio).to_f64();
    let root = 3.0 * r.powf(1.0 / d as f64);
    // Round the irrational branch down until its d-th power is certified.
    let target = num_traits::pow(int(3), d) * &ratio;
    let mut root_rat = BigRational::from_float(root).unwrap_or_else(BigRational::zero);
    let mut x = root;
    while num_traits::pow(root_rat.clone(), d) > target {
        x = f64::from_bits(x.to_bits() - 1);
        root_rat = BigRational::from_float(x).unwrap();
    }
    let lin_f = Wide::from_ratio(&linear).to_f64();
    let exact = if linear > root_rat { linear } else { root_rat };
    (root.max(lin_f), exact)
}

/// (L/A_d)^{1/d} (log(n+1))^{1−1/d}: the bound on the mean cost.
pub fn mean_cost_bound(d: usize, total: &BigRational, n: usize) -> f64 {
    let r = Wide::from_ratio(&(total / a_d(d))).to_f64();
    r.powf(1.0 / d as f64) * ((n as f64 + 1.0).ln()).powf(1.0 - 1.0 / d as f64)
}

/// The same bound with the harmonic number H_n in place of log(n+1).
pub fn mean_cost_bound_harmonic(d: usize, total: &BigRational, n: usize) -> f64 {
    let r = Wide::from_ratio(&(total / a_d(d))).to_f64();
    let h: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    r.powf(1.0 / d as f64) * h.powf(1.0 - 1.0 / d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathCertificate {
    pub d: usize,
    pub n: usize,
    pub path: LatticePath,
    /// Σ_{j<n} ℓ(γ(j))^{1/d}.
    pub cost: f64,
    #[serde(with = "ratio_string")]
    pub terminal_weight: BigRational,
    #[serde(with = "ratio_string")]
    pub bound_b: BigRational,
    pub bound_b_f64: f64,
    pub cost_bound: f64,
    #[serde(with = "ratio_string")]
    pub terminal_bound: BigRational,
    pub first_ok: bool,
    pub second_ok: bool,
    /// 1-based attempt index that produced the path.
    pub attempt: u32,
}

impl PathCertificate {
    pub fn ok(&self) -> bool {
        self.first_ok && self.second_ok
    }

    /// max of the two bound ratios; below 1 means certified.
    fn badness(&self) -> f64 {
        let t = Wide::from_ratio(&(&self.terminal_weight / &self.terminal_bound)).to_f64();
        (self.cost / self.cost_bound).max(t)
    }
}

/// Checks both bounds for a monotone path from the origin, from ℓ alone.
pub fn certify(path: &LatticePath, fam: &dyn LengthFamily) -> Result<PathCertificate> {
    let d = fam.dim();
    if path.start() != &MultiIndex::zeros(d) || !path.is_geodesic() {
        return Err(CoreError::Domain(
            "certificates need a monotone path from the origin".into(),
        ));
    }
    let n = path.len();
    let total = fam.total_mass()?;
    let tau = CostExponents::Single(Exponent::new(1, d as i64));
    let cost = path_cost(path, fam, &tau)?.to_f64();
    let terminal_weight = fam.weight(path.end())?;
    let (b_f, b_exact) = bound_b(d, &total);
    let cost_bound = b_f * ((n as f64 + 1.0).ln()).powf(1.0 - 1.0 / d as f64);
    let denom = num_traits::pow(int(n as i64 + 1), d - 1);
    let terminal_bound = &b_exact / denom;
    Ok(PathCertificate {
        d,
        n,
        path: path.clone(),
        cost,
        first_ok: cost <= cost_bound * (1.0 + COST_TOLERANCE),
        second_ok: terminal_weight <= terminal_bound,
        terminal_weight,
        bound_b: b_exact,
        bound_b_f64: b_f,
        cost_bound,
        terminal_bound,
        attempt: 0,
    })
}

/// Generator for attempt `t` (0-based) of a seeded search: stream t of the seed.
pub fn attempt_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

/// Rejection search for a path passing both bounds.
pub fn sample_and_certify(
    kernel: &WalkKernel,
    fam: &dyn LengthFamily,
    n: usize,
    seed: u64,
    max_attempts: u32,
) -> Result<PathCertificate> {
    if n == 0 {
        return Err(CoreError::Domain("n must be at least 1".into()));
    }
    if fam.dim() != kernel.d {
        return Err(CoreError::Domain(
            "family and kernel dimensions differ".into(),
        ));
    }
    let mut best: Option<PathCertificate> = None;
    for t in 0..max_attempts {
        let path = kernel.sample_path(n, &mut attempt_rng(seed, t as u64));
        let mut cert = certify(&path, fam)?;
        cert.attempt = t + 1;
        if cert.ok() {
            return Ok(cert);
        }
        if best.as_ref().is_none_or(|b| cert.badness() < b.badness()) {
            best = Some(cert);
        }
    }
    let best = best.ok_or_else(|| CoreError::Domain("max_attempts must be positive".into()))?;
    Err(CoreError::CertificateSearch {
        attempts: max_attempts,
        best_cost: best.cost,
        best: Box::new(best),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub d: usize,
    pub n: usize,
    pub samples: u32,
    pub seed: u64,
    pub first_fraction: f64,
    pub second_fraction: f64,
    pub success_fraction: f64,
    pub mean_cost: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    /// (L/A_d)^{1/d} (log(n+1))^{1−1/d}.
    pub mean_bound: f64,
    /// Same with H_n in place of log(n+1).
    pub mean_bound_harmonic: f64,
}

/// Certifies `samples` independent attempts (attempt t uses stream t) and
/// folds the results in attempt order.
pub fn batch_statistics(
    kernel: &WalkKernel,
    fam: &dyn LengthFamily,
    n: usize,
    seed: u64,
    samples: u32,
) -> Result<BatchStats> {
    if samples == 0 || n == 0 {
        return Err(CoreError::Domain("samples and n must be positive".into()));
    }
    let certs: Vec<(bool, bool, f64)> = (0..samples)
        .into_par_iter()
        .map(|t| {
            let path = kernel.sample_path(n, &mut attempt_rng(seed, t as u64));
            certify(&path, fam).map(|c| (c.first_ok, c.second_ok, c.cost))
        })
        .collect::<Result<_>>()?;
    let m = samples as f64;
    let count =
        |f: &dyn Fn(&(bool, bool, f64)) -> bool| certs.iter().filter(|c| f(c)).count() as f64 / m;
    let total = fam.total_mass()?;
    Ok(BatchStats {
        d: kernel.d,
        n,
        samples,
        seed,
        first_fraction: count(&|c| c.0),
        second_fraction: count(&|c| c.1),
        success_fraction: count(&|c| c.0 && c.1),
        mean_cost: certs.iter().map(|c| c.2).sum::<f64>() / m,
        min_cost: certs.iter().map(|c| c.2).fold(f64::INFINITY, f64::min),
        max_cost: certs.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max),
        mean_bound: mean_cost_bound(kernel.d, &total, n),
        mean_bound_harmonic: mean_cost_bound_harmonic(kernel.d, &total, n),
    })
}

/// Cheapest monotone path of n steps from the origin for Σ_{j<n} ℓ(γ(j))^{1/d},
/// by dynamic programming over spheres. Ties go to the lowest axis.
pub fn brute_min_cost(fam: &dyn LengthFamily, d: usize, n: usize) -> Result<(LatticePath, f64)> {
    if fam.dim() != d || n == 0 {
        return Err(CoreError::Domain(
            "brute_min_cost needs matching dimension and n ≥ 1".into(),
        ));
    }
    let visited: u128 = (0..=n as u64)
        .map(|k| sphere_size(d, k))
        .fold(0u128, |a, b| a.saturating_add(b));
    if visited > BRUTE_LIMIT {
        return Err(CoreError::guard(
            "brute-force lattice points",
            visited,
            BRUTE_LIMIT,
        ));
    }
    let tau = Exponent::new(1, d as i64);
    // best[v] = cheapest cost of the points strictly before v; parent axis.
    let mut layer: BTreeMap<MultiIndex, (f64, Option<usize>)> = BTreeMap::new();
    layer.insert(MultiIndex::zeros(d), (0.0, None));
    let mut history: Vec<BTreeMap<MultiIndex, (f64, Option<usize>)>> = Vec::new();
    for _ in 0..n {
        let mut next: BTreeMap<MultiIndex, (f64, Option<usize>)> = BTreeMap::new();
        for (v, &(c, _)) in &layer {
            let here = c + fam.weight_wide(v)?.powr(tau).to_f64();
            for j in 0..d {
                let to = v.shifted(j, 1)?;
                let e = next.entry(to).or_insert((f64::INFINITY, None));
                // Strict improvement keeps the lowest-axis parent on ties
                // because parents are visited in lexicographic order.
                if here < e.0 || (here == e.0 && e.1.is_none_or(|a| j < a)) {
                    *e = (here, Some(j));
                }
            }
        }
        history.push(layer);
        layer = next;
    }
    let (end, &(cost, _)) = layer
        .iter()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap().then(a.0.cmp(b.0)))
        .unwrap();
    let mut axes = Vec::with_capacity(n);
    let mut cur = end.clone();
    let mut parent = layer[&cur].1;
    for k in (0..n).rev() {
        let j = parent.unwrap();
        axes.push(j);
        cur = cur.shifted(j, -1)?;
        parent = history[k][&cur].1;
    }
    axes.reverse();
    Ok((LatticePath::from_steps(MultiIndex::zeros(d), &axes)?, cost))
}

/// Geometric-family shortcut: every monotone path has the same cost, since
/// ℓ depends only on the coordinate sum.
pub fn geometric_path_cost(d: usize, n: usize) -> f64 {
    (0..n)
        .map(|j| 2f64.powf(-((j + d) as f64) / d as f64))
        .sum()
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|j| 1.0 / j as f64).sum()
}

/// Converts the exact sphere count to f64 for reports.
pub fn sphere_size_f64(d: usize, n: u64) -> f64 {
    sphere_size(d, n).to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{geometric, ConstantFamily, LatticeBox};
    use crate::num::rat;

    #[test]
    fn transition_examples() {
        let k3 = WalkKernel::new(3).unwrap();
        let p = k3.transition_distribution(&[0, 0, 0]).unwrap();
        assert!(p.iter().all(|(_, q)| *q == rat(1, 3)));
        let k2 = WalkKernel::new(2).unwrap();
        let p = k2.transition_distribution(&[2, 0]).unwrap();
        assert_eq!(p[0].1, rat(3, 4));
        assert_eq!(p[1].1, rat(1, 4));
        let k1 = WalkKernel::new(1).unwrap();
        assert_eq!(
            k1.transition_distribution(&[17]).unwrap(),
            vec![(0, rat(1, 1))]
        );
        assert!(k2.transition_distribution(&[-1, 0]).is_err());
    }

    #[test]
    fn arrival_examples() {
        let k2 = WalkKernel::new(2).unwrap();
        let a = k2.arrival_distribution(2).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.values().all(|q| *q == rat(1, 3)));
        let k1 = WalkKernel::new(1).unwrap();
        let a = k1.arrival_distribution(7).unwrap();
        assert_eq!(a[&MultiIndex(vec![7])], rat(1, 1));
        assert!(WalkKernel::new(6)
            .unwrap()
            .arrival_distribution(10_000)
            .is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let k = WalkKernel::new(3).unwrap();
        let a = k.sample_path(50, &mut attempt_rng(9, 4));
        let b = k.sample_path(50, &mut attempt_rng(9, 4));
        let c = k.sample_path(50, &mut attempt_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_geodesic());
    }

    #[test]
    fn bound_b_rounds_down() {
        for d in 1..=4 {
            let (f, r) = bound_b(d, &rat(1, 1));
            let target = num_traits::pow(int(3), d) / a_d(d);
            assert!(num_traits::pow(r.clone(), d) <= target || r == int(3) / a_d(d));
            assert!((Wide::from_ratio(&r).to_f64() - f).abs() <= 1e-12 * f);
        }
    }

    #[test]
    fn uniform_family_certifies_immediately() {
        let b = LatticeBox::cube(2, 0, 1000).unwrap();
        let fam = ConstantFamily::uniform(b);
        let k = WalkKernel::new(2).unwrap();
        let c = sample_and_certify(&k, &fam, 4, 1, 100).unwrap();
        assert_eq!(c.attempt, 1);
    }

    #[test]
    fn geometric_cost_is_path_independent() {
        let g = geometric(2);
        let k = WalkKernel::new(2).unwrap();
        for t in 0..5 {
            let c = certify(&k.sample_path(10, &mut attempt_rng(3, t)), &g).unwrap();
            assert!((c.cost - geometric_path_cost(2, 10)).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_matches_constant_family() {
        let fam = ConstantFamily::cone(3, rat(1, 1));
        let (p, c) = brute_min_cost(&fam, 3, 6).unwrap();
        assert_eq!(p.len(), 6);
        assert!((c - 6.0).abs() < 1e-12);
    }
}
