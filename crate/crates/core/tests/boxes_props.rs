use critreg_core::boxes::{
    build_sequence, cover_count, ff_side_bracket, general_constants, minimal_roundness,
    sequence_multiplicity, vertical_subdivision, SequenceKind,
};
use critreg_core::lattice::LatticeBox;
use critreg_core::num::{int, Exponent};
use proptest::prelude::*;

fn uniform(d: usize) -> Vec<Exponent> {
    vec![Exponent::new(1, d as i64); d]
}

#[test]
fn ff_sides_stay_in_a_bracket() {
    for d in [3, 4] {
        let seq = build_sequence(SequenceKind::FF, d, &[], 20).unwrap();
        let c = ff_side_bracket(&seq).unwrap();
        assert!(c.is_finite() && c >= 1.0, "d={d} c={c}");
        for n in seq.indices() {
            let q = seq.get(n).unwrap();
            for k in 0..q.dim() {
                let r =
                    (q.hi[k] - q.lo[k]) as f64 / 4f64.powf(((k + 1) * n) as f64 / (d - 1) as f64);
                assert!(
                    r * c >= 1.0 - 1e-12 && r <= c * (1.0 + 1e-12),
                    "d={d} n={n} axis {k}: {r} vs {c}"
                );
            }
        }
    }
}

#[test]
fn boxes_are_well_formed_and_general_constants_positive() {
    for (kind, d) in [
        (SequenceKind::BD2, 2),
        (SequenceKind::BGeneral, 3),
        (SequenceKind::BGeneral, 4),
    ] {
        let alpha = uniform(d);
        let seq = build_sequence(kind, d, &alpha, 12).unwrap();
        for n in seq.indices() {
            let q = seq.get(n).unwrap();
            assert!(q.lo.iter().zip(&q.hi).all(|(x, y)| x <= y));
        }
        if kind == SequenceKind::BGeneral {
            let c = general_constants(&seq).unwrap();
            assert!(c.d2 > int(0));
            assert!(c.d1.is_finite());
        }
    }
}

#[test]
fn multiplicity_is_attained_at_its_witness() {
    for (kind, d) in [
        (SequenceKind::BD2, 2),
        (SequenceKind::BGeneral, 3),
        (SequenceKind::FF, 3),
    ] {
        let alpha = if kind == SequenceKind::FF {
            Vec::new()
        } else {
            uniform(d)
        };
        let seq = build_sequence(kind, d, &alpha, 10).unwrap();
        let m = sequence_multiplicity(&seq);
        let boxes: Vec<LatticeBox> = seq.indices().map(|n| seq.get(n).unwrap().clone()).collect();
        let w = m.witness.expect("nonempty sequences have a witness");
        assert_eq!(cover_count(&boxes, &w.0), m.value);
        assert_eq!(m.boxes.len(), m.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn subdivision_leaves_partition_the_box(
        lo in proptest::collection::vec(1i64..4, 3),
        sides in (1i64..5, 1i64..13, 1i64..40),
    ) {
        let hi = vec![lo[0] + sides.0 - 1, lo[1] + sides.1 - 1, lo[2] + sides.2 - 1];
        let q = LatticeBox::new(lo, hi).unwrap();
        let a = match minimal_roundness(&q) {
            Some(a) => a,
            None => return Ok(()),
        };
        let tree = match vertical_subdivision(&q, &a) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        let leaves: Vec<LatticeBox> = tree.leaves(1_000_000).unwrap().into_iter().map(|(_, b)| b).collect();
        prop_assert_eq!(leaves.iter().map(|b| b.count()).sum::<u128>(), q.count());
        for p in q.points().unwrap() {
            prop_assert_eq!(cover_count(&leaves, &p.0), 1);
        }
    }
}
