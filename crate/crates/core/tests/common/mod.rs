#![allow(dead_code)]

use bifrac::generate::{gen_instance, GenSpec, COORD_DENOM};
use bifrac::io::InstanceFile;
use bifrac::testing::Instance;
use bifrac::Rational;
use proptest::prelude::*;

pub fn instance(seed: u64, dim: usize, alpha: f64, atoms: [usize; 3]) -> Instance {
    let spec = GenSpec {
        atoms,
        ..GenSpec::new(seed, dim, alpha)
    };
    gen_instance(&spec).unwrap().to_instance().unwrap()
}

pub fn demo() -> Instance {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/single_atom.json")).unwrap();
    InstanceFile::from_json(&text).unwrap().to_instance().unwrap()
}

/// Points of `[-4, 4)^dim` on the `1/COORD_DENOM` lattice.
pub fn point(dim: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(-4 * COORD_DENOM..4 * COORD_DENOM, dim)
        .prop_map(|c| c.into_iter().map(|v| Rational::new(v, COORD_DENOM)).collect())
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}
