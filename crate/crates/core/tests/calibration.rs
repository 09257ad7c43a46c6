use bifrac::calibration::{
    c1, c2, c2_bound, c_dom, calibrate, freeze, lattice_c2, pointwise_ratios, pointwise_ratios_of, pointwise_spec, r_max,
    CALIBRATION_ATOMS, EXPONENTS, ORDERS,
};
use bifrac::generate::{gen_instance, GenSpec, COORD_DENOM};
use bifrac::io::{AtomFile, InstanceFile};
use bifrac::testing::{Instance, OptimizerConfig};
use bifrac::Rational;

fn triple(dim: usize, alpha: f64, y1: &[i128], y2: &[i128], x: &[i128]) -> Instance {
    let atom = |p: &[i128]| {
        let point: Vec<Rational> = p.iter().map(|&c| Rational::new(c, COORD_DENOM)).collect();
        vec![AtomFile::new(&point, 1.0)]
    };
    InstanceFile {
        n: dim,
        alpha,
        p1: 2.0,
        p2: 2.0,
        q: 2.0,
        sigma1: atom(y1),
        sigma2: atom(y2),
        w: atom(x),
        window: None,
        sparse: None,
        seed: None,
        delta: None,
        force_exponents: false,
    }
    .to_instance()
    .unwrap()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn derived_constants_match_closed_forms() {
    // n = 2, α = 1: (2√2)^3 / (1 - 2^{-3}) = 128√2 / 7
    assert!((c1(2, 1.0) - 128.0 * 2f64.sqrt() / 7.0).abs() < 1e-9);
    // a = 2^6, 1 - 2^{-1/2}
    assert!((c_dom(2, 0.5) - 64.0 / (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
    assert!((c2_bound(2, 1.0) - 216.0).abs() < 1e-3);
}

#[test]
fn lattice_witness_realizes_the_supremum() {
    for (n, alpha) in ORDERS {
        let sup = lattice_c2(n, alpha);
        assert!(sup.value <= c2_bound(n, alpha), "n={n} α={alpha}: {} above derived bound", sup.value);
        assert_eq!(c2(n, alpha), Some(freeze(sup.value, 1.0)));
        let lo: Vec<i128> = sup.witness.iter().map(|w| w.0 as i128).collect();
        let hi: Vec<i128> = sup.witness.iter().map(|w| (w.0 + w.1) as i128).collect();
        let steps: Vec<usize> = sup.witness.iter().map(|w| w.1).collect();
        let g = steps.iter().fold(0, |a, &b| gcd(a, b));
        let x: Vec<i128> = lo.iter().zip(&steps).map(|(l, s)| l + (s / g) as i128).collect();
        let observed = pointwise_ratios_of(&triple(n, alpha, &lo, &hi, &x)).lower;
        if g >= 2 {
            assert!((observed - sup.value).abs() <= 1e-9 * sup.value, "n={n} α={alpha}: {observed} vs {}", sup.value);
        } else {
            assert!(observed <= sup.value * (1.0 + 1e-9));
        }
    }
}

#[test]
fn random_triples_stay_below_lattice_supremum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for (n, alpha) in ORDERS {
        let bound = c2(n, alpha).unwrap();
        for _ in 0..300 {
            let mut pick = || (0..n).map(|_| rng.gen_range(0..COORD_DENOM)).collect::<Vec<i128>>();
            let (a, b, x) = (pick(), pick(), pick());
            if a == b || a == x || b == x {
                continue;
            }
            let r = pointwise_ratios_of(&triple(n, alpha, &a, &b, &x));
            assert!(r.lower <= bound, "n={n}: {a:?} {b:?} {x:?} gives {}", r.lower);
            assert!(r.upper <= c1(n, alpha) * (1.0 + 1e-9));
        }
    }
}

#[test]
fn calibration_is_idempotent() {
    let cfg = OptimizerConfig::default();
    let a = calibrate(&[(1, 1.0)], 0..12, &cfg);
    let b = calibrate(&[(1, 1.0)], 0..12, &cfg);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.r_max.len(), EXPONENTS.len());
    assert!(a.rust_tables().contains("FROZEN_R_MAX"));
}

#[test]
fn frozen_tables_cover_every_configuration() {
    for (n, alpha) in ORDERS {
        for (p1, p2, q) in EXPONENTS {
            let (s, w) = r_max(n, alpha, p1, p2, q).expect("frozen");
            assert!(s > 0.0 && w > 0.0);
        }
    }
    assert_eq!(r_max(3, 1.0, 2.0, 2.0, 2.0), None);
}

#[test]
fn pointwise_upper_ratio_below_c1() {
    for seed in 0..40 {
        let spec = GenSpec {
            atoms: [CALIBRATION_ATOMS; 3],
            ..pointwise_spec(seed, 1 + seed as usize % 2, 0.5)
        };
        let r = pointwise_ratios(&spec);
        assert!(r.upper <= c1(spec.dim, 0.5) * (1.0 + 1e-9));
        assert!(gen_instance(&spec).is_ok());
    }
}
