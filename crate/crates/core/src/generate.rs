//! Seeded random instances.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::InstanceError;
use crate::geometry::{GridShift, Point, Rational};
use crate::io::{AtomFile, InstanceFile, WindowFile};
use crate::measure::ExponentTuple;
use crate::operators::{TruncationWindow, DEFAULT_K_MAX, DEFAULT_K_MIN};

/// Coordinates are multiples of `1 / COORD_DENOM`.
pub const COORD_DENOM: i128 = 1024;

/// Settings of one generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub seed: u64,
    pub dim: usize,
    pub alpha: f64,
    /// `(p1, p2, q)`.
    pub exponents: (f64, f64, f64),
    /// Atom counts of `σ1`, `σ2`, `w`.
    pub atoms: [usize; 3],
    /// Coordinates are drawn from `[0, spread)`.
    pub spread: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// Skip the admissibility check on the exponents.
    pub force: bool,
}

impl GenSpec {
    /// `(2, 2, 2)`, four atoms per measure in the unit cube, default scales.
    pub fn new(seed: u64, dim: usize, alpha: f64) -> Self {
        Self {
            seed,
            dim,
            alpha,
            exponents: (2.0, 2.0, 2.0),
            atoms: [4; 3],
            spread: 1.0,
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            force: false,
        }
    }
}

/// Draws an instance: distinct points across all three measures, masses
/// log-uniform in `[1e-2, 1e2]`, and the enclosing window of the standard grid.
pub fn gen_instance(spec: &GenSpec) -> Result<InstanceFile, InstanceError> {
    let (p1, p2, q) = spec.exponents;
    if spec.force {
        ExponentTuple::forced(p1, p2, q)?;
    } else {
        ExponentTuple::validate(p1, p2, q)?;
    }
    let cells = (spec.spread * COORD_DENOM as f64).floor();
    if cells.is_nan() || cells < 1.0 || cells > (1u64 << 40) as f64 {
        return Err(InstanceError::Format(format!("spread {} out of range", spec.spread)));
    }
    let cells = cells as i128;
    let total: usize = spec.atoms.iter().sum();
    let capacity = (cells as f64).powi(spec.dim as i32);
    if (total as f64) > capacity {
        return Err(InstanceError::Format(format!("{total} atoms do not fit in spread {}", spec.spread)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used: HashSet<Point> = HashSet::new();
    let mut measures: Vec<Vec<AtomFile>> = Vec::with_capacity(3);
    let mut points: Vec<Point> = Vec::with_capacity(total);
    for &count in &spec.atoms {
        let mut atoms = Vec::with_capacity(count);
        while atoms.len() < count {
            let point: Point = (0..spec.dim)
                .map(|_| Rational::new(rng.gen_range(0..cells), COORD_DENOM))
                .collect();
            if !used.insert(point.clone()) {
                continue;
            }
            let mass = 10f64.powf(rng.gen_range(-2.0..=2.0));
            atoms.push(AtomFile::new(&point, mass));
            points.push(point);
        }
        measures.push(atoms);
    }

    let window = TruncationWindow::enclosing(&GridShift::zero(spec.dim), &points, spec.k_min, spec.k_max)?;
    let w = measures.pop().unwrap_or_default();
    let sigma2 = measures.pop().unwrap_or_default();
    let sigma1 = measures.pop().unwrap_or_default();
    Ok(InstanceFile {
        n: spec.dim,
        alpha: spec.alpha,
        p1,
        p2,
        q,
        sigma1,
        sigma2,
        w,
        window: Some(WindowFile::from_window(&window)),
        sparse: None,
        seed: Some(spec.seed),
        delta: None,
        force_exponents: spec.force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_collision_free() {
        let spec = GenSpec {
            atoms: [8, 8, 8],
            ..GenSpec::new(42, 2, 1.0)
        };
        let a = gen_instance(&spec).unwrap();
        assert_eq!(a, gen_instance(&spec).unwrap());
        let inst = a.to_instance().unwrap();
        assert_eq!((inst.sigma1.len(), inst.sigma2.len(), inst.w.len()), (8, 8, 8));
        let all: HashSet<&Point> = inst.sigma1.points().chain(inst.sigma2.points()).chain(inst.w.points()).collect();
        assert_eq!(all.len(), 24);
        for a in inst.sigma1.atoms().iter().chain(inst.w.atoms()) {
            assert!((1e-2..=1e2).contains(&a.mass));
        }
    }

    #[test]
    fn rejects_inadmissible_exponents() {
        let spec = GenSpec {
            exponents: (3.0, 3.0, 3.0),
            ..GenSpec::new(0, 1, 1.0)
        };
        assert!(gen_instance(&spec).is_err());
        assert!(gen_instance(&GenSpec { force: true, ..spec }).is_ok());
    }
}
