use std::fmt;

use num_traits::Zero;
use rand::Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use critreg_core::boxes::{
    build_sequence, d2_constants, ff_side_bracket, general_constants, minimal_roundness,
    sequence_multiplicity, to_f64, SequenceKind,
};
use critreg_core::concat::{
    build_chain, distortion_budget, verify_chain, ChainCertificate, ChainKind, LambdaPolicy,
};
use critreg_core::lattice::{
    geometric, sphere_size, symmetric_geometric, LatticeBox, LengthFamily, TableFamily,
};
use critreg_core::nilpotent::{
    center_and_commutators, conjugacy_distortion_check, IntervalPacking, Letter, Model, Word,
};
use critreg_core::num::{exponent_to_f64, parse_rational};
use critreg_core::smooth::{borichev_check, ps_scan, wandering_sum_check, DynamicsGrid, SmoothMap};
use critreg_core::walks::{attempt_rng, batch_statistics, sample_and_certify, WalkKernel};
use critreg_core::CoreError;

use crate::config::{ConfigError, ExperimentConfig, Kind, Resolved};
use crate::report::{Check, Curve, Report, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(CoreError),
    Io(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Runs one experiment. The output depends only on the configuration.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let r = config.resolve()?;
    let mut out = Out::default();
    match r.kind {
        Kind::Lemma1 => lemma1(&r, &mut out)?,
        Kind::Boxes => boxes(&r, &mut out)?,
        Kind::ChainB | Kind::ChainFf => chain(&r, &mut out)?,
        Kind::Identity => identity(&r, &mut out)?,
        Kind::Dynamics => dynamics(&r, &mut out)?,
    }
    Ok(Report {
        tool: "critreg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: r.kind.label().into(),
        config: serde_json::to_value(&r).expect("config serializes"),
        checks: out.checks,
        results: Value::Object(out.results),
        tables: out.tables,
        curves: out.curves,
    })
}

#[derive(Default)]
struct Out {
    checks: Vec<Check>,
    results: serde_json::Map<String, Value>,
    tables: Vec<Table>,
    curves: Vec<Curve>,
}

impl Out {
    fn result(&mut self, key: &str, v: impl serde::Serialize) {
        self.results.insert(
            key.into(),
            serde_json::to_value(v).expect("results serialize"),
        );
    }
}

#[derive(Deserialize)]
struct FamilyFile {
    name: String,
    lo: Vec<i64>,
    hi: Vec<i64>,
    /// Rationals in lexicographic order of the box points.
    weights: Vec<String>,
}

fn family(r: &Resolved, dim: usize) -> Result<Box<dyn LengthFamily>> {
    match r.family.as_deref().unwrap_or("geometric") {
        "geometric" => Ok(Box::new(geometric(dim))),
        "symmetric-geometric" => Ok(Box::new(symmetric_geometric(dim))),
        _ => {
            let path = r.family_file.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
            let f: FamilyFile = serde_json::from_str(&text).map_err(|e| ConfigError {
                field: "family-file",
                message: e.to_string(),
            })?;
            let b = LatticeBox::new(f.lo, f.hi)?;
            if b.dim() != dim {
                return Err(ConfigError {
                    field: "family-file",
                    message: format!("support has dimension {}, need {dim}", b.dim()),
                }
                .into());
            }
            if b.count() != f.weights.len() as u128 {
                return Err(ConfigError {
                    field: "family-file",
                    message: format!("{} weights for {} points", f.weights.len(), b.count()),
                }
                .into());
            }
            let w = f
                .weights
                .iter()
                .map(|s| parse_rational(s))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let b2 = b.clone();
            Ok(Box::new(TableFamily::raw(f.name, b, move |p| {
                w[b2.linear_index(p).unwrap()].clone()
            })?))
        }
    }
}

fn lemma1(r: &Resolved, out: &mut Out) -> Result<()> {
    let d = r.d.unwrap();
    let (seed, samples) = (r.seed.unwrap(), r.samples.unwrap());
    let kernel = WalkKernel::new(d)?;
    let fam = family(r, d)?;

    // Exact arrival laws on small spheres.
    let mut equi = true;
    let mut checked = 0;
    for n in 0..=8u64 {
        if sphere_size(d, n) > 10_000 {
            break;
        }
        let dist = kernel.arrival_distribution(n)?;
        let size = sphere_size(d, n);
        let target = critreg_core::num::rat(1, size as i64);
        equi &= dist.len() as u128 == size && dist.values().all(|p| *p == target);
        checked = n;
    }
    out.checks.push(Check::new(
        "walk.equidistribution",
        format!("arrival law uniform on the n-sphere for n ≤ {checked}"),
        equi,
    ));

    let mut table = Table::new(
        "lemma1",
        &[
            "n",
            "samples",
            "first",
            "second",
            "success",
            "mean_cost",
            "mean_bound",
            "mean_bound_harmonic",
        ],
    );
    let mut stats = Vec::new();
    let mut certs = Vec::new();
    for &n in &r.n {
        let s = batch_statistics(&kernel, fam.as_ref(), n, seed, samples)?;
        out.checks.push(Check::ge(
            "walk.success_fraction",
            format!("n={n}: joint success fraction"),
            s.success_fraction,
            0.33,
        ));
        out.checks.push(Check::le(
            "walk.mean_cost_bound",
            format!("n={n}: mean cost ≤ 1.05·(L/A_d)^(1/d)·log(n+1)^(1−1/d)"),
            s.mean_cost,
            1.05 * s.mean_bound,
        ));
        out.checks.push(Check::le(
            "walk.mean_cost_bound_harmonic",
            format!("n={n}: mean cost ≤ 1.05·(L/A_d)^(1/d)·H_n^(1−1/d)"),
            s.mean_cost,
            1.05 * s.mean_bound_harmonic,
        ));
        table.push(vec![
            n.to_string(),
            s.samples.to_string(),
            s.first_fraction.to_string(),
            s.second_fraction.to_string(),
            s.success_fraction.to_string(),
            s.mean_cost.to_string(),
            s.mean_bound.to_string(),
            s.mean_bound_harmonic.to_string(),
        ]);
        match sample_and_certify(&kernel, fam.as_ref(), n, seed, 100) {
            Ok(c) => certs.push(json!({ "n": n, "certificate": c })),
            Err(CoreError::CertificateSearch { attempts, best_cost, .. }) => {
                certs.push(json!({ "n": n, "certificate": null, "attempts": attempts, "best_cost": best_cost }))
            }
            Err(e) => return Err(e.into()),
        }
        stats.push(s);
    }
    out.result("statistics", &stats);
    out.result("certificates", &certs);
    out.tables.push(table);
    Ok(())
}

fn boxes(r: &Resolved, out: &mut Out) -> Result<()> {
    let d = r.d.unwrap();
    let kind = SequenceKind::parse(r.sequence.as_deref().unwrap())?;
    let n_max = r.n_max.unwrap();
    let seq = build_sequence(kind, d, &r.alpha, n_max)?;
    let m = sequence_multiplicity(&seq);
    match kind {
        SequenceKind::BD2 => out.checks.push(
            Check::new(
                "boxes.multiplicity",
                format!("multiplicity = 4 for n ≤ {n_max}"),
                m.value == 4,
            )
            .with_detail(format!("measured {}", m.value)),
        ),
        _ => out.checks.push(Check::le(
            "boxes.multiplicity",
            format!("multiplicity ≤ d+2 for n ≤ {n_max}"),
            m.value as f64,
            (d + 2) as f64,
        )),
    }
    let mut table = Table::new("boxes", &["n", "lo", "hi", "points", "min_roundness"]);
    for n in seq.indices() {
        let q = seq.get(n).unwrap();
        let join = |v: &[i64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        table.push(vec![
            n.to_string(),
            join(&q.lo),
            join(&q.hi),
            q.count().to_string(),
            minimal_roundness(q).map_or("none".into(), |a| to_f64(&a).to_string()),
        ]);
    }
    match kind {
        SequenceKind::BD2 => out.result("constants", d2_constants(&seq)?),
        SequenceKind::BGeneral => out.result("constants", general_constants(&seq)?),
        SequenceKind::FF => out.result("side_bracket", ff_side_bracket(&seq)?),
    }
    out.result("multiplicity", &m);
    out.result("sequence", &seq);
    out.tables.push(table);
    Ok(())
}

fn chain(r: &Resolved, out: &mut Out) -> Result<()> {
    let d = r.d.unwrap();
    let kind = ChainKind::parse(r.chain.as_deref().unwrap())?;
    let n_max = r.n_max.unwrap();
    let seq = build_sequence(kind.sequence_kind(), d, &r.alpha, n_max + 1)?;
    let fam = family(r, seq.box_dim())?;
    let policy = match &r.lambda {
        Some(l) => LambdaPolicy::Fixed(parse_rational(l)?),
        None => LambdaPolicy::Default,
    };
    let cert = build_chain(kind, fam.as_ref(), &seq, n_max, &policy)?;
    let verify = verify_chain(&cert, fam.as_ref(), &seq)?;
    let budget = distortion_budget(&cert, fam.as_ref(), &seq)?;

    out.checks.push(Check::new(
        "chain.segment_holder_bound",
        format!(
            "every segment sum ≤ B·bound, measured B = {}",
            cert.b_measured
        ),
        cert.all_hold,
    ));
    if let (Some(b), Some(within)) = (cert.b_closed_form, cert.within_closed_form) {
        out.checks.push(Check {
            pass: within,
            ..Check::le(
                "chain.closed_form",
                "measured B ≤ closed-form B",
                cert.b_measured,
                b,
            )
        });
    }
    out.checks.push(
        Check::new(
            "chain.verify",
            "independent recomputation of the certificate",
            verify.ok(),
        )
        .with_detail(format!(
            "{} quantities, {} mismatches",
            verify.checked,
            verify.mismatches.len()
        )),
    );
    out.checks.push(Check::new(
        "chain.chebyshev",
        "good fractions of every family meet their floors",
        cert.chebyshev_ok,
    ));
    let longs_ok = long_counts_ok(&cert);
    out.checks.push(Check::new(
        "chain.long_count",
        format!(
            "long segment of box n has ≥ growth(n)/D points, D = {}",
            cert.d_measured
        ),
        longs_ok,
    ));
    if kind.is_ff() {
        if let Some(spread) = budget.spread {
            out.checks.push(Check::le(
                "chain.budget_spread",
                "budget/(ln N)^(1−α) varies by less than a factor 2 over 4 ≤ n ≤ 12",
                spread,
                2.0,
            ));
        }
    }

    let mut segs = Table::new(
        "segments",
        &[
            "n",
            "k",
            "role",
            "anchor",
            "axis",
            "step",
            "count",
            "walked",
            "exponent",
            "holder_sum",
            "bound",
            "ratio",
            "goodness",
            "holds",
        ],
    );
    for s in &cert.segments {
        segs.push(vec![
            s.n.to_string(),
            s.k.to_string(),
            format!("{:?}", s.role).to_lowercase(),
            s.segment
                .anchor
                .0
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            s.segment.axis.to_string(),
            s.segment.step.to_string(),
            s.segment.count.to_string(),
            s.traversed.count.to_string(),
            s.exponent.to_string(),
            s.holder_sum.to_string(),
            s.bound_mass.to_string(),
            s.ratio.to_string(),
            s.goodness.to_string(),
            s.holds.to_string(),
        ]);
    }
    let mut b = Table::new(
        "budget",
        &[
            "n",
            "points",
            "budget",
            "ln_points",
            "normalized",
            "n_over_ln",
        ],
    );
    let mut curve = Curve {
        name: "budget".into(),
        x: "ln_points".into(),
        y: "normalized".into(),
        points: Vec::new(),
    };
    for row in &budget.rows {
        b.push(vec![
            row.n.to_string(),
            row.points.to_string(),
            row.budget.to_string(),
            row.ln_points.to_string(),
            row.normalized.to_string(),
            row.n_over_ln.to_string(),
        ]);
        curve.points.push((row.ln_points, row.normalized));
    }
    let mut cheb = Table::new(
        "chebyshev",
        &["n", "class", "good", "total", "fraction", "floor", "ok"],
    );
    for c in &cert.chebyshev {
        cheb.push(vec![
            c.n.to_string(),
            c.class.clone(),
            c.good.to_string(),
            c.total.to_string(),
            c.fraction.to_string(),
            c.floor.to_string(),
            c.ok.to_string(),
        ]);
    }
    out.result(
        "constants",
        json!({
            "B": cert.b_measured,
            "B_closed_form": cert.b_closed_form,
            "D": cert.d_measured,
            "K_d": cert.k_d,
            "A_prime": budget.a_prime,
            "lambda": cert.lambda.to_string(),
            "lambda_prime": cert.lambda_prime.as_ref().map(|l| l.to_string()),
        }),
    );
    out.result("certificate", &cert);
    out.result("verification", &verify);
    out.result("budget", &budget);
    out.tables.extend([segs, b, cheb]);
    out.curves.push(curve);
    Ok(())
}

fn long_counts_ok(cert: &ChainCertificate) -> bool {
    cert.long_counts
        .iter()
        .all(|&(n, full, _)| full as f64 * cert.d_measured >= cert.long_growth(n) * (1.0 - 1e-12))
}

fn identity(r: &Resolved, out: &mut Out) -> Result<()> {
    let d = r.d.unwrap();
    let model = match r.model.as_deref().unwrap() {
        "translation" => Model::Translation { dim: d },
        _ => Model::FarbFranks { d },
    };
    let (seed, samples, k_max) = (r.seed.unwrap(), r.samples.unwrap(), r.k_max.unwrap());
    let tau = r.alpha[0];
    let packing = IntervalPacking::symmetric(model)?;
    let g = Word::letter(model, model.center(), 1)?;
    let pool: Vec<Letter> = model.base_letters();
    let m = model.index_dim();

    if let Model::FarbFranks { d } = model {
        let t = center_and_commutators(d)?;
        out.checks.push(Check::new(
            "nilpotent.center",
            "f_{d+1,1} commutes with every generator",
            t.center_ok,
        ));
        out.result("commutators", &t);
    }

    let mut table = Table::new(
        "identity",
        &[
            "sample",
            "word",
            "k",
            "index",
            "residual_zero",
            "conjugacy",
            "distortion",
            "m_n",
        ],
    );
    let (mut zero, mut c_needed) = (0u32, 0f64);
    for t in 0..samples {
        let mut rng = attempt_rng(seed, t as u64);
        let len = rng.gen_range(1..=6);
        let h = Word::random(model, len, &pool, &mut rng);
        let k = rng.gen_range(1..=k_max);
        let v: Vec<i64> = (0..m).map(|_| rng.gen_range(-6..=6)).collect();
        let rep =
            conjugacy_distortion_check(&packing, &h, &g, k, std::slice::from_ref(&v), tau, 1.0)?;
        if rep.all_zero {
            zero += 1;
        }
        if rep.m_n > 0.0 {
            c_needed = c_needed.max(rep.distortion.ln() / rep.m_n);
        }
        let row = &rep.rows[0];
        table.push(vec![
            t.to_string(),
            h.to_string(),
            k.to_string(),
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            row.residual.is_zero().to_string(),
            row.conjugacy_holds.to_string(),
            rep.distortion.to_string(),
            rep.m_n.to_string(),
        ]);
    }
    out.checks.push(
        Check::new(
            "nilpotent.distortion_identity",
            "Dg^k(x) = Dh(x)/Dh(g^k x)·Dg^k(hx) exactly, and h g^k h⁻¹ = g^k pointwise",
            zero == samples,
        )
        .with_detail(format!("{zero}/{samples} samples exact")),
    );
    out.result("tau", exponent_to_f64(tau));
    out.result("smallest_C", c_needed);
    out.result("exact_samples", zero);
    out.tables.push(table);
    Ok(())
}

fn dynamics(r: &Resolved, out: &mut Out) -> Result<()> {
    let g = SmoothMap::by_name(r.map.as_deref().unwrap(), r.param.unwrap())?;
    let k_max = r.k_max.unwrap();
    let grid = DynamicsGrid {
        orbit_points: r.grid.unwrap(),
        ..DynamicsGrid::default()
    };
    out.result("map", &g);

    for &a in &r.alpha {
        let alpha = exponent_to_f64(a);
        let rep = borichev_check(&g, alpha, k_max, &grid)?;
        out.checks.push(
            Check::new(
                "dynamics.borichev",
                format!("α={a}: grid max Dg^k ≤ exp(3·C_g·|I|^α·k^(1−α)) for k ≤ {k_max} (grid maxima bound the sup from below)"),
                rep.all_hold,
            )
            .with_detail(format!("pass rate {}, C_g = {}, min log slack {}", rep.pass_rate, rep.holder.constant, rep.min_slack)),
        );
        let name = format!("borichev_{}", a.to_string().replace('/', "_"));
        let mut t = Table::new(&name, &["k", "log_max", "log_bound", "holds"]);
        let mut c = Curve {
            name: name.clone(),
            x: "k".into(),
            y: "log_max".into(),
            points: Vec::new(),
        };
        let mut cb = Curve {
            name: format!("{name}_bound"),
            x: "k".into(),
            y: "log_bound".into(),
            points: Vec::new(),
        };
        for row in &rep.rows {
            t.push(vec![
                row.k.to_string(),
                row.log_max.to_string(),
                row.log_bound.to_string(),
                row.holds.to_string(),
            ]);
            c.points.push((row.k as f64, row.log_max));
            cb.points.push((row.k as f64, row.log_bound));
        }
        out.result(
            &format!("{name}_summary"),
            json!({
                "alpha": a.to_string(),
                "holder": rep.holder,
                "all_hold": rep.all_hold,
                "pass_rate": rep.pass_rate,
                "min_slack": rep.min_slack,
            }),
        );
        out.tables.push(t);
        out.curves.extend([c, cb]);
    }

    let ps = ps_scan(&g, k_max, grid.orbit_points.min(2_000));
    out.result(
        "ps_scan",
        json!({ "k_max": k_max, "count": ps.len(), "first": ps.first(), "ks": ps }),
    );

    let x0 = r.x0.unwrap();
    let w = wandering_sum_check(&g, x0, k_max.min(1000))?;
    out.checks.push(Check::new(
        "dynamics.wandering_disjoint",
        "pulled-back intervals are pairwise disjoint",
        w.disjoint,
    ));
    out.checks.push(Check::le(
        "dynamics.wandering_sum",
        "Σ|g^(−k)(J)| ≤ |I|",
        *w.partial_sums.last().unwrap_or(&0.0),
        g.len(),
    ));
    let mut t = Table::new("wandering", &["k", "length", "partial_sum"]);
    for (k, (l, s)) in w.lengths.iter().zip(&w.partial_sums).enumerate() {
        t.push(vec![k.to_string(), l.to_string(), s.to_string()]);
    }
    out.tables.push(t);
    out.result("wandering", json!({ "x0": x0, "stopped_at": w.stopped_at, "disjoint": w.disjoint, "bounded": w.bounded }));
    Ok(())
}
