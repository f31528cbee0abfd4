use critreg_core::nilpotent::{
    act, generators, realize, star_generators, IntervalPacking, Letter, Model, UnipotentMatrix,
    Word,
};
use critreg_core::walks::attempt_rng;
use proptest::prelude::*;
use rand::Rng;

fn ff_letters(d: usize) -> Vec<Letter> {
    generators(d)
        .into_iter()
        .map(|(i, j)| Letter::Elementary { i, j })
        .collect()
}

fn shift_letters(dim: usize) -> Vec<Letter> {
    (1..=dim).map(|axis| Letter::Shift { axis }).collect()
}

fn small_index<R: Rng>(m: usize, rng: &mut R) -> Vec<i64> {
    (0..m).map(|_| rng.gen_range(-2..=2)).collect()
}

// Pointwise: evaluating b then a equals evaluating a at the image under b.
#[test]
fn realization_is_a_homomorphism() {
    let cases = [
        (Model::FarbFranks { d: 2 }, ff_letters(2)),
        (Model::Translation { dim: 2 }, shift_letters(2)),
    ];
    for (model, pool) in cases {
        let packing = IntervalPacking::symmetric(model).unwrap();
        let m = model.index_dim();
        let mut rng = attempt_rng(7, m as u64);
        for _ in 0..500 {
            let a = Word::random(model, rng.gen_range(0..4), &pool, &mut rng);
            let b = Word::random(model, rng.gen_range(0..4), &pool, &mut rng);
            let v = small_index(m, &mut rng);
            let (l, len) = packing.interval(&v).unwrap();
            let x = l + len * num_rational::BigRational::new(rng.gen_range(0..=8).into(), 8.into());
            let ab = realize(&packing, &b.then(&a))
                .unwrap()
                .eval(&v, &x)
                .unwrap();
            let eb = realize(&packing, &b).unwrap().eval(&v, &x).unwrap();
            let ea = realize(&packing, &a)
                .unwrap()
                .eval(&eb.index, &eb.point)
                .unwrap();
            assert_eq!(ab.index, ea.index, "{model:?} a={a} b={b}");
            assert_eq!(ab.point, ea.point);
            assert_eq!(ab.derivative, eb.derivative * ea.derivative);
            // A realization maps I_v onto I_{w·v}.
            let (w, lo, hi) = realize(&packing, &a).unwrap().image(&v).unwrap();
            let (wl, wlen) = packing.interval(&w).unwrap();
            assert_eq!((lo, hi), (wl.clone(), wl + wlen));
        }
    }
}

#[test]
fn letter_action_matches_the_matrix_action() {
    for d in 2..=4 {
        let model = Model::FarbFranks { d };
        let pool = ff_letters(d);
        let mut rng = attempt_rng(11, d as u64);
        for _ in 0..1000 {
            let a = Word::random(model, rng.gen_range(0..8), &pool, &mut rng);
            let b = Word::random(model, rng.gen_range(0..8), &pool, &mut rng);
            let v = small_index(d, &mut rng);
            let ma = a.to_matrix().unwrap();
            let mb = b.to_matrix().unwrap();
            assert_eq!(act(&ma, &v).unwrap(), a.act(&v).unwrap());
            assert_eq!(b.then(&a).to_matrix().unwrap(), ma.mul(&mb).unwrap());
            assert!(a.then(&a.inverse()).to_matrix().unwrap().is_identity());
        }
    }
}

#[test]
fn center_commutes_with_every_generator_on_intervals() {
    for model in [
        Model::FarbFranks { d: 2 },
        Model::FarbFranks { d: 3 },
        Model::Translation { dim: 3 },
    ] {
        let packing = IntervalPacking::symmetric(model).unwrap();
        let g = Word::letter(model, model.center(), 1).unwrap();
        let pool = match model {
            Model::FarbFranks { d } => ff_letters(d),
            Model::Translation { dim } => shift_letters(dim),
        };
        let mut rng = attempt_rng(13, model.index_dim() as u64);
        let idx: Vec<Vec<i64>> = (0..20)
            .map(|_| small_index(model.index_dim(), &mut rng))
            .collect();
        for l in pool {
            let f = Word::letter(model, l, 1).unwrap();
            let fg = realize(&packing, &g.then(&f)).unwrap();
            let gf = realize(&packing, &f.then(&g)).unwrap();
            assert!(fg.agrees_with(&gf, &idx).unwrap(), "{model:?} {l}");
        }
    }
}

// Two base words land on the same base index exactly when w1⁻¹w2 has a trivial first column.
#[test]
fn base_orbit_is_the_quotient_by_the_stabilizer() {
    for d in [3, 4] {
        let model = Model::FarbFranks { d };
        let pool: Vec<Letter> = star_generators(d)
            .into_iter()
            .map(|(i, j)| Letter::Elementary { i, j })
            .collect();
        assert_eq!(pool, model.base_letters());
        let origin = vec![0i64; d];
        let mut rng = attempt_rng(17, d as u64);
        let mut both = [0usize; 2];
        for _ in 0..1000 {
            let w1 = Word::random(model, rng.gen_range(0..6), &pool, &mut rng);
            // Half the time, append a stabilizer element so equal bases actually occur.
            let w2 = if rng.gen_bool(0.5) {
                let s = Word::random(model, 3, &pool, &mut rng);
                let fixes = s.to_matrix().unwrap().first_column_trivial();
                if fixes {
                    s.then(&w1)
                } else {
                    Word::random(model, rng.gen_range(0..6), &pool, &mut rng)
                }
            } else {
                Word::random(model, rng.gen_range(0..6), &pool, &mut rng)
            };
            let m = w2.then(&w1.inverse()).to_matrix().unwrap();
            assert!(m.in_star_subgroup());
            let same = w1.act(&origin).unwrap() == w2.act(&origin).unwrap();
            assert_eq!(same, m.first_column_trivial(), "d={d} w1={w1} w2={w2}");
            both[same as usize] += 1;
        }
        assert!(both[0] > 0 && both[1] > 0, "d={d}: {both:?}");
    }
}

#[test]
fn elementary_matrices_have_the_expected_shape() {
    for d in 1..=4 {
        for (i, j) in generators(d) {
            let e = UnipotentMatrix::elementary(d, i, j).unwrap();
            assert_eq!(e.entry(i, j), 1);
            assert!(e.inverse().unwrap().mul(&e).unwrap().is_identity());
        }
    }
}

fn arb_word(model: Model) -> impl Strategy<Value = Word> {
    let pool = match model {
        Model::FarbFranks { d } => ff_letters(d),
        Model::Translation { dim } => shift_letters(dim),
    };
    proptest::collection::vec((0..pool.len(), prop_oneof![-5i64..0, 1i64..6]), 0..8).prop_map(
        move |v| Word {
            model,
            letters: v.into_iter().map(|(k, e)| (pool[k], e)).collect(),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn words_round_trip_through_text(w in arb_word(Model::FarbFranks { d: 3 }), t in arb_word(Model::Translation { dim: 4 })) {
        prop_assert_eq!(Word::parse(w.model, &w.to_string()).unwrap(), w);
        prop_assert_eq!(Word::parse(t.model, &t.to_string()).unwrap(), t);
    }

    #[test]
    fn matrix_action_composes(
        a in arb_word(Model::FarbFranks { d: 3 }),
        b in arb_word(Model::FarbFranks { d: 3 }),
        v in proptest::collection::vec(-20i64..20, 3),
    ) {
        let ma = a.to_matrix().unwrap();
        let mb = b.to_matrix().unwrap();
        let ab = ma.mul(&mb).unwrap();
        prop_assert_eq!(act(&ab, &v).unwrap(), act(&ma, &act(&mb, &v).unwrap()).unwrap());
    }

    #[test]
    fn packing_follows_lexicographic_order(
        u in proptest::collection::vec(-4i64..4, 3),
        v in proptest::collection::vec(-4i64..4, 3),
    ) {
        let p = IntervalPacking::symmetric(Model::FarbFranks { d: 3 }).unwrap();
        let (lu, su) = p.interval(&u).unwrap();
        let (lv, sv) = p.interval(&v).unwrap();
        match u.cmp(&v) {
            std::cmp::Ordering::Less => prop_assert!(lu + su <= lv),
            std::cmp::Ordering::Greater => prop_assert!(lv + sv <= lu),
            std::cmp::Ordering::Equal => prop_assert_eq!(lu, lv),
        }
    }
}
