mod common;

use bifrac::measure::{average, conjugate, dyadic_maximal, lp_norm, weak_lq_norm, Atom};
use bifrac::testing::kolmogorov_sides;
use bifrac::{DiscreteMeasure, ExponentTuple, GridShift, SimpleFunction};
use proptest::prelude::*;

fn measure_and_values(dim: usize) -> impl Strategy<Value = (DiscreteMeasure, Vec<f64>)> {
    prop::collection::hash_set(common::point(dim), 1..12)
        .prop_flat_map(|pts| {
            let n = pts.len();
            (
                Just(pts),
                prop::collection::vec(0.01f64..100.0, n),
                prop::collection::vec(0.0f64..10.0, n),
            )
        })
        .prop_map(move |(pts, masses, values)| {
            let atoms = pts.into_iter().zip(masses).map(|(point, mass)| Atom { point, mass }).collect();
            (DiscreteMeasure::new(dim, atoms).unwrap(), values)
        })
}

/// Weak norm straight from the definition, scanning thresholds just below each value.
fn weak_by_levels(values: &[f64], q: f64, mu: &DiscreteMeasure) -> f64 {
    let mut best: f64 = 0.0;
    for &lambda in values {
        let level = lambda * (1.0 - 1e-12);
        let mass: f64 = values.iter().zip(mu.atoms()).filter(|(v, _)| **v > level).map(|(_, a)| a.mass).sum();
        best = best.max(level * mass.powf(1.0 / q));
    }
    best
}

proptest! {
    #[test]
    fn weak_norm_is_below_strong((mu, v) in measure_and_values(2), q in 1.1f64..6.0) {
        let g = SimpleFunction::new(v.clone()).unwrap();
        let weak = weak_lq_norm(&g, q, &mu);
        prop_assert!(weak <= lp_norm(&g, q, &mu) * (1.0 + 1e-12));
        prop_assert!(common::close(weak, weak_by_levels(&v, q, &mu), 1e-9));
    }

    #[test]
    fn norms_are_homogeneous((mu, v) in measure_and_values(1), p in 1.1f64..6.0, c in 0.01f64..100.0) {
        let f = SimpleFunction::new(v).unwrap();
        prop_assert!(common::close(lp_norm(&f.scaled(c), p, &mu), c * lp_norm(&f, p, &mu), 1e-12));
        prop_assert!(common::close(weak_lq_norm(&f.scaled(c), p, &mu), c * weak_lq_norm(&f, p, &mu), 1e-12));
        let heavier = mu.scaled(c).unwrap();
        prop_assert!(common::close(lp_norm(&f, p, &heavier), c.powf(1.0 / p) * lp_norm(&f, p, &mu), 1e-12));
    }

    #[test]
    fn maximal_function_dominates((mu, v) in measure_and_values(2), flags in prop::collection::vec(any::<bool>(), 2)) {
        let f = SimpleFunction::new(v).unwrap();
        // scale 13 separates any two lattice points of spacing 1/1024
        let m = dyadic_maximal(&f, &mu, &GridShift::from_flags(&flags), -3..=13);
        for (mv, fv) in m.values().iter().zip(f.values()) {
            prop_assert!(*mv >= fv * (1.0 - 1e-12));
        }
        let top = m.values().iter().cloned().fold(0.0, f64::max);
        let avg = f.values().iter().zip(mu.atoms()).map(|(v, a)| v * a.mass).sum::<f64>() / mu.total_mass();
        prop_assert!(top >= avg * (1.0 - 1e-12));
    }

    #[test]
    fn maximal_operator_is_bounded_by_the_conjugate((mu, v) in measure_and_values(2), p in prop_oneof![Just(1.5), Just(2.0), Just(3.0)]) {
        let f = SimpleFunction::new(v).unwrap();
        let m = dyadic_maximal(&f, &mu, &GridShift::zero(2), -3..=13);
        prop_assert!(lp_norm(&m, p, &mu) <= conjugate(p) * lp_norm(&f, p, &mu) * (1.0 + 1e-12));
    }

    #[test]
    fn kolmogorov_on_dyadic_cubes(
        (mu, v) in measure_and_values(1),
        k in -3i32..4,
        pick in any::<prop::sample::Index>(),
        q in prop_oneof![Just(1.5), Just(2.0), Just(4.0)],
    ) {
        let g = SimpleFunction::new(v).unwrap();
        let x = &mu.atoms()[pick.index(mu.len())].point;
        let cube = bifrac::DyadicCube::containing(x, k, &GridShift::zero(1));
        let (lhs, rhs) = kolmogorov_sides(&g, &mu, &cube, q);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        let local = g.restricted(&mu, &cube);
        let mass = mu.mass_of(&cube);
        let nu = mu.scaled(1.0 / mass).unwrap();
        prop_assert!(common::close(rhs, conjugate(q) * weak_lq_norm(&local, q, &nu), 1e-9));
        prop_assert!(common::close(lhs, average(&g, &mu, &cube), 1e-12));
    }

    #[test]
    fn average_is_linear((mu, v) in measure_and_values(2), c in 0.0f64..50.0) {
        let f = SimpleFunction::new(v).unwrap();
        let root = bifrac::DyadicCube::new(-3, &[-1, -1], GridShift::zero(2));
        prop_assert!(common::close(average(&f.scaled(c), &mu, &root), c * average(&f, &mu, &root), 1e-12));
    }

    #[test]
    fn conjugates_are_involutive(p in 1.01f64..50.0) {
        let pc = conjugate(p);
        prop_assert!(common::close(conjugate(pc), p, 1e-10));
        prop_assert!(common::close(1.0 / p + 1.0 / pc, 1.0, 1e-12));
    }
}

#[test]
fn exponent_admissibility() {
    assert!(ExponentTuple::validate(1.5, 3.0, 3.0).is_ok());
    assert!(ExponentTuple::validate(2.0, 2.0, 4.0).is_ok());
    assert!(ExponentTuple::validate(3.0, 3.0, 3.0).is_err());
    assert!(ExponentTuple::validate(2.0, 2.0, 1.5).is_err());
    assert!(ExponentTuple::validate(1.0, 2.0, 2.0).is_err());
    let forced = ExponentTuple::forced(3.0, 3.0, 3.0).unwrap();
    assert!(!forced.within_hypotheses);
}

#[test]
fn average_over_a_region() {
    let inst = common::demo();
    let one = SimpleFunction::constant(1, 2.0);
    let root = &inst.window.root;
    assert_eq!(average(&one, &inst.sigma1, root), 2.0);
    assert_eq!(average(&SimpleFunction::zero(1), &inst.sigma1, root), 0.0);
}
