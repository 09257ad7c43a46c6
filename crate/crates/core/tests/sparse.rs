mod common;

use bifrac::calibration::c_dom;
use bifrac::operators::{eval_dyadic, eval_sparse};
use bifrac::sparse::{build_sparse, verify_sparsity};
use bifrac::{DiscreteMeasure, DyadicCube, GridShift, SimpleFunction, SparseFamily, Weighted};
use proptest::prelude::*;

fn positive(len: usize) -> impl Strategy<Value = SimpleFunction> {
    prop::collection::vec(-3.0f64..3.0, len).prop_map(|e| SimpleFunction::new(e.into_iter().map(|x| 10f64.powf(x)).collect()).unwrap())
}

/// `|Q|^{-2} ∫_Q f1 dσ1 ∫_Q f2 dσ2`, summed atom by atom.
fn product_average(f1: &SimpleFunction, s1: &DiscreteMeasure, f2: &SimpleFunction, s2: &DiscreteMeasure, cube: &DyadicCube) -> f64 {
    let integral = |f: &SimpleFunction, s: &DiscreteMeasure| -> f64 {
        f.values().iter().zip(s.atoms()).filter(|(_, a)| cube.contains(&a.point)).map(|(v, a)| v * a.mass).sum()
    };
    integral(f1, s1) * integral(f2, s2) / (cube.volume() * cube.volume())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_families_are_sparse_and_dominate(
        (inst, f1, f2) in (any::<u64>(), 1usize..=2, 0usize..3)
            .prop_map(|(seed, dim, which)| (seed, dim, [0.5, 1.0, dim as f64][which]))
            .prop_flat_map(|(seed, dim, alpha)| (Just(common::instance(seed, dim, alpha, [8, 8, 8])), positive(8), positive(8)))
    ) {
        let p = &inst.params;
        let a = Weighted::new(&f1, &inst.sigma1);
        let b = Weighted::new(&f2, &inst.sigma2);
        let family = build_sparse(p, &inst.window, a, b).unwrap();
        let check = verify_sparsity(&family);
        prop_assert!(check.holds, "worst {} at {:?}", check.worst, check.worst_cube);
        prop_assert!(check.worst_f64() <= 0.5);
        let a_base = (2.0 * (p.dim + 1) as f64).exp2();
        for cube in family.cubes() {
            prop_assert!(inst.window.admits(cube));
            let (lo, hi) = family.levels(cube).unwrap();
            prop_assert!(lo <= hi);
            let pa = product_average(&f1, &inst.sigma1, &f2, &inst.sigma2, cube);
            prop_assert!(pa > a_base.powi(hi) * (1.0 - 1e-12));
            if *cube != inst.window.root {
                let parent = product_average(&f1, &inst.sigma1, &f2, &inst.sigma2, &cube.parent());
                prop_assert!(parent <= (2.0 * p.dim as f64).exp2() * a_base.powi(lo) * (1.0 + 1e-12));
            }
        }
        let bound = c_dom(p.dim, p.alpha);
        for x in inst.w.points() {
            let d = eval_dyadic(p, &inst.window, a, b, x);
            let s = eval_sparse(p, &family, a, b, x, None);
            prop_assert!(d <= bound * s * (1.0 + 1e-9), "D {} > C_dom S {}", d, bound * s);
        }
    }
}

#[test]
fn overfull_family_is_flagged() {
    let z = GridShift::zero(1);
    let family = SparseFamily::new([
        DyadicCube::new(0, &[0], z.clone()),
        DyadicCube::new(1, &[0], z.clone()),
        DyadicCube::new(1, &[1], z),
    ])
    .unwrap();
    let check = verify_sparsity(&family);
    assert!(!check.holds);
    assert_eq!(check.worst_f64(), 1.0);
    assert_eq!(check.worst_cube.unwrap().scale, 0);
}

#[test]
fn nested_chain_is_exactly_half_full() {
    let z = GridShift::zero(1);
    let family = SparseFamily::new((0..5).map(|k| DyadicCube::new(k, &[0], z.clone()))).unwrap();
    let check = verify_sparsity(&family);
    assert!(check.holds);
    assert_eq!(check.worst_f64(), 0.5);
}

#[test]
fn mixed_grids_are_rejected() {
    let cubes = [
        DyadicCube::new(0, &[0], GridShift::zero(1)),
        DyadicCube::new(1, &[0], GridShift::from_flags(&[true])),
    ];
    assert!(SparseFamily::new(cubes).is_err());
}
