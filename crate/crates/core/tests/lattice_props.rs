use critreg_core::lattice::{
    geometric, path_cost, region_mass, sphere_points, sphere_size, symmetric_geometric, Block,
    CostExponents, LatticeBox, LatticePath, LengthFamily, MultiIndex, Progression, Region,
    TableFamily,
};
use critreg_core::num::{int, rat, Exponent, Mass};
use num_traits::One;
use proptest::prelude::*;

fn brute_sphere(d: usize, n: i64) -> u128 {
    fn rec(k: usize, left: i64) -> u128 {
        if k == 1 {
            return 1;
        }
        (0..=left).map(|x| rec(k - 1, left - x)).sum()
    }
    rec(d, n)
}

#[test]
fn sphere_size_matches_enumeration() {
    for d in 1..=4 {
        for n in 0..=12 {
            assert_eq!(sphere_size(d, n), brute_sphere(d, n as i64), "d={d} n={n}");
            assert_eq!(
                sphere_points(d, n).unwrap().len() as u128,
                sphere_size(d, n)
            );
        }
    }
}

#[test]
fn sphere_size_dominates_a_d_bound() {
    for d in 1..=4usize {
        let fact: u128 = (1..d as u128).product();
        for n in 0..=200u128 {
            // |S_n| (d−1)! ≥ (n+1)^{d−1}, in integers.
            assert!(
                sphere_size(d, n as u64) * fact >= (n + 1).pow(d as u32 - 1),
                "d={d} n={n}"
            );
        }
    }
}

#[test]
fn built_in_totals_are_exact() {
    for d in 1..=4 {
        assert_eq!(geometric(d).total_mass().unwrap(), int(1));
        assert_eq!(symmetric_geometric(d).total_mass().unwrap(), int(1));
    }
}

fn arb_box(d: usize) -> impl Strategy<Value = LatticeBox> {
    proptest::collection::vec((0i64..6, 1i64..6), d).prop_map(|v| {
        let lo = v.iter().map(|p| p.0).collect();
        let hi = v.iter().map(|p| p.0 + p.1 - 1).collect();
        LatticeBox::new(lo, hi).unwrap()
    })
}

fn split(b: &LatticeBox, axis: usize, at: i64) -> (Block, Block) {
    let mut left = b.to_block();
    let mut right = b.to_block();
    left.axes[axis] = Progression::interval(b.lo[axis], at - 1);
    right.axes[axis] = Progression::interval(at, b.hi[axis]);
    (left, right)
}

fn exact(m: Mass) -> num_rational::BigRational {
    m.as_exact().expect("small blocks stay exact").clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn region_mass_is_additive(b in arb_box(3), axis in 0usize..3, cut in 0i64..6, salt in 0i64..97) {
        prop_assume!(b.side(axis) >= 2);
        let at = b.lo[axis] + 1 + cut % (b.side(axis) as i64 - 1);
        let (l, r) = split(&b, axis, at);
        let families: Vec<Box<dyn LengthFamily>> = vec![
            Box::new(geometric(3)),
            Box::new(symmetric_geometric(3)),
            Box::new(TableFamily::raw("t", LatticeBox::cube(3, 0, 11).unwrap(), |p| {
                rat(1 + (p[0] * 31 + p[1] * 7 + p[2] * 3 + salt).rem_euclid(13), 1 + salt % 5)
            }).unwrap()),
        ];
        for f in &families {
            let whole = exact(region_mass(f.as_ref(), &Region::Box(b.clone())).unwrap().sum);
            let parts = exact(region_mass(f.as_ref(), &Region::Block(l.clone())).unwrap().sum)
                + exact(region_mass(f.as_ref(), &Region::Block(r.clone())).unwrap().sum);
            prop_assert_eq!(&whole, &parts);
            let pts = region_mass(f.as_ref(), &Region::Points(b.points().unwrap())).unwrap().sum;
            prop_assert_eq!(exact(pts), whole);
        }
    }

    #[test]
    fn linear_index_is_a_bijection(b in arb_box(3)) {
        let pts = b.points().unwrap();
        for (i, p) in pts.iter().enumerate() {
            prop_assert_eq!(b.linear_index(p), Some(i));
        }
        prop_assert_eq!(pts.len() as u128, b.count());
    }

    #[test]
    fn unit_cost_of_a_path_never_exceeds_its_box(
        start in proptest::collection::vec(0i64..4, 3),
        steps in proptest::collection::vec(0usize..3, 1..20),
    ) {
        let path = LatticePath::from_steps(MultiIndex(start.clone()), &steps).unwrap();
        prop_assert!(path.is_geodesic());
        let hi = path.end().0.clone();
        let b = LatticeBox::new(start, hi).unwrap();
        let one = CostExponents::Single(Exponent::one());
        for f in [&geometric(3) as &dyn LengthFamily, &symmetric_geometric(3)] {
            let c = path_cost(&path, f, &one).unwrap();
            let m = region_mass(f, &Region::Box(b.clone())).unwrap().sum;
            prop_assert!(c.le(&m));
        }
    }

    #[test]
    fn segments_stay_in_their_box(b in arb_box(3), axis in 0usize..3, pick in 0usize..1000) {
        let pts = b.points().unwrap();
        let p = &pts[pick % pts.len()];
        let s = critreg_core::lattice::Segment::line_in(&b, p, axis);
        prop_assert!(s.count >= 1);
        prop_assert!(s.within(&b));
        prop_assert!(s.contains(p));
        prop_assert_eq!(s.count as u128, b.side(axis));
    }
}
