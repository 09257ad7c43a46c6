//! Finite atomic measures, simple functions and the norms taken over them.
//!
//! Atom points are exact rationals (cube membership is a boundary test);
//! masses and function values are floats (they are only ever summed).
//! Every sum runs in atom index order so results are reproducible bit for bit.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{ExponentError, MeasureError};
use crate::geometry::{check_coordinate, DyadicCube, GridShift, Point, Region};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub mass: f64,
}

/// A finite positive combination of point masses in `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        let mut seen: BTreeMap<&Point, usize> = BTreeMap::new();
        for (index, atom) in atoms.iter().enumerate() {
            if atom.point.len() != dim {
                return Err(MeasureError::Dimension {
                    index,
                    expected: dim,
                    found: atom.point.len(),
                });
            }
            if !(atom.mass.is_finite() && atom.mass > 0.0) {
                return Err(MeasureError::BadMass {
                    index,
                    mass: atom.mass,
                });
            }
            for x in &atom.point {
                check_coordinate(x)?;
            }
            if let Some(&first) = seen.get(&atom.point) {
                return Err(MeasureError::DuplicatePoint { first, second: index });
            }
            seen.insert(&atom.point, index);
        }
        Ok(Self { dim, atoms })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.atoms.iter().map(|a| &a.point)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn mass_of<R: Region>(&self, region: &R) -> f64 {
        self.atoms
            .iter()
            .filter(|a| region.contains_point(&a.point))
            .map(|a| a.mass)
            .sum()
    }

    /// The measure `c·μ`.
    pub fn scaled(&self, c: f64) -> Result<Self, MeasureError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                point: a.point.clone(),
                mass: a.mass * c,
            })
            .collect();
        Self::new(self.dim, atoms)
    }

    /// Index of the atom located at `x`, if any.
    pub fn atom_at(&self, x: &[crate::geometry::Rational]) -> Option<usize> {
        self.atoms.iter().position(|a| a.point.as_slice() == x)
    }
}

/// Nonnegative values, one per atom of an associated measure.
///
/// `+∞` is admitted so operator outputs can carry the singular sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    values: Vec<f64>,
}

impl SimpleFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, MeasureError> {
        for (index, &value) in values.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(MeasureError::BadValue { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self::new(vec![c; len]).expect("constant must be nonnegative")
    }

    pub fn zero(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    /// `1_R` on the atoms of `mu`.
    pub fn indicator<R: Region>(mu: &DiscreteMeasure, region: &R) -> Self {
        Self {
            values: mu
                .atoms()
                .iter()
                .map(|a| if region.contains_point(&a.point) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// `1_R · self`.
    pub fn restricted<R: Region>(&self, mu: &DiscreteMeasure, region: &R) -> Self {
        assert_eq!(self.len(), mu.len());
        Self {
            values: self
                .values
                .iter()
                .zip(mu.atoms())
                .map(|(&v, a)| if region.contains_point(&a.point) { v } else { 0.0 })
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * c).collect()).expect("scale must be nonnegative")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_infinite(&self) -> bool {
        self.values.iter().any(|v| v.is_infinite())
    }
}

/// Hölder conjugate `p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Validated exponents `(p1, p2, q)` with their conjugates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    pub p1: f64,
    pub p2: f64,
    pub q: f64,
    pub p1_conj: f64,
    pub p2_conj: f64,
    pub q_conj: f64,
    /// `false` when built with [`ExponentTuple::forced`] outside the admissible range.
    pub within_hypotheses: bool,
}

/// Relative slack for the boundary case `p1 + p2 = p1 p2`.
const BOUNDARY_SLACK: f64 = 1e-12;

impl ExponentTuple {
    /// Accepts iff `q >= p1`, `q >= p2`, `p1, p2 > 1` and `p1 + p2 >= p1 p2`.
    pub fn validate(p1: f64, p2: f64, q: f64) -> Result<Self, ExponentError> {
        let tuple = Self::forced(p1, p2, q)?;
        if q < p1 {
            return Err(ExponentError::QBelowP1 { q, p1 });
        }
        if q < p2 {
            return Err(ExponentError::QBelowP2 { q, p2 });
        }
        let (sum, product) = (p1 + p2, p1 * p2);
        if sum < product * (1.0 - BOUNDARY_SLACK) {
            return Err(ExponentError::SumBelowProduct { sum, product });
        }
        Ok(tuple)
    }

    /// Only requires each exponent to exceed one; records whether the
    /// remaining constraints hold.
    pub fn forced(p1: f64, p2: f64, q: f64) -> Result<Self, ExponentError> {
        for (name, value) in [("p1", p1), ("p2", p2), ("q", q)] {
            if !(value.is_finite() && value > 1.0) {
                return Err(ExponentError::NotAboveOne { name, value });
            }
        }
        let within = q >= p1 && q >= p2 && p1 + p2 >= p1 * p2 * (1.0 - BOUNDARY_SLACK);
        Ok(Self {
            p1,
            p2,
            q,
            p1_conj: conjugate(p1),
            p2_conj: conjugate(p2),
            q_conj: conjugate(q),
            within_hypotheses: within,
        })
    }
}

/// `(Σ f^p · mass)^{1/p}`.
pub fn lp_norm(f: &SimpleFunction, p: f64, mu: &DiscreteMeasure) -> f64 {
    assert_eq!(f.len(), mu.len(), "function and measure sizes differ");
    let mut sum = 0.0;
    for (v, a) in f.values().iter().zip(mu.atoms()) {
        if *v > 0.0 {
            sum += v.powf(p) * a.mass;
        }
    }
    sum.powf(1.0 / p)
}

/// Weak-type quasinorm `sup_λ λ · w({g > λ})^{1/q}`, attained as
/// `max_v v · w({g >= v})^{1/q}` over the values of `g`.
pub fn weak_lq_norm(g: &SimpleFunction, q: f64, w: &DiscreteMeasure) -> f64 {
    assert_eq!(g.len(), w.len(), "function and measure sizes differ");
    weak_norm_of(g.values(), q, w.atoms().iter().map(|a| a.mass))
}

pub(crate) fn weak_norm_of(values: &[f64], q: f64, masses: impl Iterator<Item = f64>) -> f64 {
    let masses: Vec<f64> = masses.collect();
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut best = 0.0f64;
    let mut cumulative = 0.0;
    let mut i = 0;
    while i < order.len() {
        let level = values[order[i]];
        while i < order.len() && values[order[i]] == level {
            cumulative += masses[order[i]];
            i += 1;
        }
        best = best.max(level * cumulative.powf(1.0 / q));
    }
    best
}

/// `μ(Q)^{-1} Σ_{atoms in Q} f · mass`, or `0` when `μ(Q) = 0`.
pub fn average<R: Region>(f: &SimpleFunction, mu: &DiscreteMeasure, region: &R) -> f64 {
    assert_eq!(f.len(), mu.len(), "function and measure sizes differ");
    let mut mass = 0.0;
    let mut integral = 0.0;
    for (v, a) in f.values().iter().zip(mu.atoms()) {
        if region.contains_point(&a.point) {
            mass += a.mass;
            integral += v * a.mass;
        }
    }
    if mass > 0.0 {
        integral / mass
    } else {
        0.0
    }
}

/// Dyadic maximal function over the cubes of grid `shift` with scales in `scales`.
pub fn dyadic_maximal(
    f: &SimpleFunction,
    mu: &DiscreteMeasure,
    shift: &GridShift,
    scales: RangeInclusive<i32>,
) -> SimpleFunction {
    let values = mu
        .atoms()
        .iter()
        .map(|a| {
            scales
                .clone()
                .map(|k| average(f, mu, &DyadicCube::containing(&a.point, k, shift)))
                .fold(0.0, f64::max)
        })
        .collect();
    SimpleFunction::new(values).expect("averages are nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AxisCube, Rational};

    fn measure1(points: &[(i128, i128, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            1,
            points
                .iter()
                .map(|&(a, b, mass)| Atom {
                    point: vec![Rational::new(a, b)],
                    mass,
                })
                .collect(),
        )
        .unwrap()
    }

    fn f(values: &[f64]) -> SimpleFunction {
        SimpleFunction::new(values.to_vec()).unwrap()
    }

    #[test]
    fn lp_norm_examples() {
        let mu = measure1(&[(0, 1, 3.0)]);
        assert!((lp_norm(&f(&[2.0]), 2.0, &mu) - 12f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&f(&[0.0]), 2.0, &mu), 0.0);
        let mu = measure1(&[(0, 1, 1.0), (1, 1, 3.0)]);
        assert_eq!(lp_norm(&f(&[1.0, 1.0]), 2.0, &mu), 2.0);
    }

    #[test]
    fn weak_norm_examples() {
        assert_eq!(weak_lq_norm(&f(&[2.0]), 2.0, &measure1(&[(0, 1, 1.0)])), 2.0);
        let w = measure1(&[(0, 1, 1.0), (1, 1, 3.0)]);
        assert_eq!(weak_lq_norm(&f(&[2.0, 1.0]), 2.0, &w), 2.0);
        assert_eq!(weak_lq_norm(&f(&[0.0, 0.0]), 2.0, &w), 0.0);
        // ties are grouped into one superlevel set
        assert_eq!(weak_lq_norm(&f(&[1.0, 1.0]), 2.0, &w), 2.0);
    }

    #[test]
    fn average_examples() {
        let mu = measure1(&[(1, 4, 1.0), (3, 4, 3.0)]);
        let unit = AxisCube::new(vec![Rational::from_integer(0)], Rational::from_integer(1)).unwrap();
        assert_eq!(average(&f(&[8.0, 0.0]), &mu, &unit), 2.0);
        let far = AxisCube::new(vec![Rational::from_integer(5)], Rational::from_integer(1)).unwrap();
        assert_eq!(average(&f(&[8.0, 0.0]), &mu, &far), 0.0);
        assert_eq!(average(&f(&[0.5, 0.5]), &mu, &unit), 0.5);
    }

    #[test]
    fn dyadic_maximal_examples() {
        let mu = measure1(&[(1, 4, 1.0), (3, 4, 1.0)]);
        let m = dyadic_maximal(&f(&[4.0, 0.0]), &mu, &GridShift::zero(1), 0..=1);
        assert_eq!(m.values(), &[4.0, 2.0]);
        let m = dyadic_maximal(&f(&[1.5, 1.5]), &mu, &GridShift::zero(1), -2..=3);
        assert_eq!(m.values(), &[1.5, 1.5]);
    }

    #[test]
    fn exponent_examples() {
        let e = ExponentTuple::validate(2.0, 2.0, 2.0).unwrap();
        assert_eq!((e.p1_conj, e.p2_conj, e.q_conj), (2.0, 2.0, 2.0));
        let e = ExponentTuple::validate(1.5, 3.0, 3.0).unwrap();
        assert_eq!(e.p1_conj, 3.0);
        assert!(e.p1_conj >= e.p2);
        assert!(matches!(
            ExponentTuple::validate(3.0, 3.0, 3.0),
            Err(ExponentError::SumBelowProduct { .. })
        ));
        assert!(matches!(
            ExponentTuple::validate(2.0, 2.0, 1.5),
            Err(ExponentError::QBelowP1 { .. })
        ));
        assert!(matches!(
            ExponentTuple::validate(1.0, 2.0, 2.0),
            Err(ExponentError::NotAboveOne { name: "p1", .. })
        ));
        let forced = ExponentTuple::forced(3.0, 3.0, 3.0).unwrap();
        assert!(!forced.within_hypotheses);
    }

    #[test]
    fn measure_validation() {
        let p = vec![Rational::new(1, 2)];
        let dup = DiscreteMeasure::new(
            1,
            vec![
                Atom { point: p.clone(), mass: 1.0 },
                Atom { point: p, mass: 2.0 },
            ],
        );
        assert!(matches!(dup, Err(MeasureError::DuplicatePoint { first: 0, second: 1 })));
        let zero = DiscreteMeasure::new(1, vec![Atom { point: vec![Rational::new(0, 1)], mass: 0.0 }]);
        assert!(matches!(zero, Err(MeasureError::BadMass { .. })));
        let dim = DiscreteMeasure::new(2, vec![Atom { point: vec![Rational::new(0, 1)], mass: 1.0 }]);
        assert!(matches!(dim, Err(MeasureError::Dimension { .. })));
        assert!(SimpleFunction::new(vec![-1.0]).is_err());
        assert!(SimpleFunction::new(vec![f64::NAN]).is_err());
    }
}
