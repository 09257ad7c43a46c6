//! Sparse families: construction by product-average stopping and exact sparsity checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::SparseError;
use crate::geometry::{DyadicCube, GridShift};
use crate::measure::{DiscreteMeasure, SimpleFunction};
use crate::operators::{OperatorParams, TruncationWindow, Weighted, WindowTree};

/// The data a family was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub f1: SimpleFunction,
    pub sigma1: DiscreteMeasure,
    pub f2: SimpleFunction,
    pub sigma2: DiscreteMeasure,
}

/// A finite family of cubes from one grid.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseFamily {
    cubes: BTreeSet<DyadicCube>,
    levels: BTreeMap<DyadicCube, (i32, i32)>,
    provenance: Option<Box<Provenance>>,
}

impl SparseFamily {
    pub fn new(cubes: impl IntoIterator<Item = DyadicCube>) -> Result<Self, SparseError> {
        let cubes: BTreeSet<DyadicCube> = cubes.into_iter().collect();
        if let Some(first) = cubes.iter().next() {
            if let Some(bad) = cubes.iter().find(|c| c.shift != first.shift) {
                return Err(SparseError::MixedGrid(bad.clone()));
            }
        }
        Ok(Self {
            cubes,
            ..Self::default()
        })
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Cubes in scale-major order.
    pub fn cubes(&self) -> impl Iterator<Item = &DyadicCube> {
        self.cubes.iter()
    }

    pub fn contains(&self, cube: &DyadicCube) -> bool {
        self.cubes.contains(cube)
    }

    pub fn shift(&self) -> Option<&GridShift> {
        self.cubes.iter().next().map(|c| &c.shift)
    }

    /// Stopping levels `j` with `M(Q) <= a^j < PA(Q)` for built families.
    pub fn levels(&self, cube: &DyadicCube) -> Option<(i32, i32)> {
        self.levels.get(cube).copied()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_deref()
    }

    /// Cubes inside `root`.
    pub fn restricted(&self, root: &DyadicCube) -> Self {
        let cubes: BTreeSet<DyadicCube> = self.cubes.iter().filter(|c| root.contains_cube(c)).cloned().collect();
        let levels = self
            .levels
            .iter()
            .filter(|(c, _)| cubes.contains(*c))
            .map(|(c, l)| (c.clone(), *l))
            .collect();
        Self {
            cubes,
            levels,
            provenance: self.provenance.clone(),
        }
    }

    /// Nearest strict ancestor inside the family, per cube.
    pub fn nearest_ancestors(&self) -> HashMap<DyadicCube, Option<DyadicCube>> {
        let coarsest = self.cubes.iter().next().map(|c| c.scale);
        self.cubes
            .iter()
            .map(|c| {
                let mut up = None;
                if let Some(top) = coarsest {
                    let mut cur = c.clone();
                    while cur.scale > top {
                        cur = cur.parent();
                        if self.cubes.contains(&cur) {
                            up = Some(cur.clone());
                            break;
                        }
                    }
                }
                (c.clone(), up)
            })
            .collect()
    }
}

/// The stopping ratio `a = 2^{2(n+1)}`.
pub fn stopping_ratio(dim: usize) -> f64 {
    (2.0 * (dim as f64 + 1.0)).exp2()
}

/// `a^j` exactly (a power of two).
fn a_pow(dim: usize, j: i32) -> f64 {
    (j as f64 * 2.0 * (dim as f64 + 1.0)).exp2()
}

/// Smallest `j` with `a^j >= m`, for `m > 0`.
fn ceil_level(dim: usize, m: f64) -> i32 {
    let mut j = (m.log2() / (2.0 * (dim as f64 + 1.0))).ceil() as i32;
    while a_pow(dim, j - 1) >= m {
        j -= 1;
    }
    while a_pow(dim, j) < m {
        j += 1;
    }
    j
}

/// Largest `j` with `a^j < pa`, for `pa > 0`.
fn floor_level(dim: usize, pa: f64) -> i32 {
    let mut j = (pa.log2() / (2.0 * (dim as f64 + 1.0))).floor() as i32;
    while a_pow(dim, j) >= pa {
        j -= 1;
    }
    while a_pow(dim, j + 1) < pa {
        j += 1;
    }
    j
}

/// Builds the family of cubes that are maximal in `{PA > a^j}` for some `j`,
/// where `PA(Q) = Π_i |Q|^{-1} ∫_Q f_i dσ_i`.
///
/// Maximality is taken inside the window, so a cube enters when
/// `M(Q) <= a^j < PA(Q)` for some `j`, with `M(Q)` the largest product
/// average over its window ancestors (zero at the top scale).
pub fn build_sparse(
    params: &OperatorParams,
    window: &TruncationWindow,
    first: Weighted,
    second: Weighted,
) -> Result<SparseFamily, SparseError> {
    let n = params.dim;
    let (tree, inc) = WindowTree::new(window, &[first.measure, second.measure]);
    let a1 = tree.integrals(&inc[0], first.f.values(), first.measure);
    let a2 = tree.integrals(&inc[1], second.f.values(), second.measure);
    let mut ancestor_max = vec![0.0f64; tree.len()];
    let mut pa = vec![0.0f64; tree.len()];
    let mut family = SparseFamily::default();
    for id in 0..tree.len() {
        let cube = tree.node(id);
        let value = (2.0 * n as f64 * cube.scale as f64).exp2() * a1[id] * a2[id];
        if !value.is_finite() {
            return Err(SparseError::InfiniteAverage(cube.clone()));
        }
        pa[id] = value;
        let m = match tree.parent(id) {
            Some(p) => ancestor_max[p].max(pa[p]),
            None => 0.0,
        };
        ancestor_max[id] = m;
        if value <= 0.0 {
            continue;
        }
        let hi = floor_level(n, value);
        let lo = if m > 0.0 { ceil_level(n, m) } else { hi };
        if lo <= hi {
            family.cubes.insert(cube.clone());
            family.levels.insert(cube.clone(), (lo, hi));
        }
    }
    family.provenance = Some(Box::new(Provenance {
        f1: first.f.clone(),
        sigma1: first.measure.clone(),
        f2: second.f.clone(),
        sigma2: second.measure.clone(),
    }));
    Ok(family)
}

/// Outcome of [`verify_sparsity`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityCheck {
    pub holds: bool,
    /// Largest `|∪ strict descendants| / |Q|`, exact.
    pub worst: BigRational,
    pub worst_cube: Option<DyadicCube>,
}

impl SparsityCheck {
    pub fn worst_f64(&self) -> f64 {
        self.worst.to_f64().unwrap_or(f64::INFINITY)
    }
}

/// Computes `|∪{Q' ∈ S : Q' ⊊ Q}| / |Q|` for every `Q` and compares the
/// maximum with `1/2`. The union is the disjoint union of the maximal strict
/// descendants, so each ratio is a sum of powers `2^{-(k' - k)n}`.
pub fn verify_sparsity(family: &SparseFamily) -> SparsityCheck {
    let mut covered: BTreeMap<&DyadicCube, BigRational> = BTreeMap::new();
    let up = family.nearest_ancestors();
    for cube in family.cubes() {
        if let Some(Some(anc)) = up.get(cube) {
            let depth = ((cube.scale - anc.scale) as usize) * cube.dim();
            let term = BigRational::new(BigInt::from(1), BigInt::from(1) << depth);
            let slot = covered.entry(family.cubes.get(anc).expect("ancestor in family")).or_insert_with(BigRational::zero);
            *slot += term;
        }
    }
    let mut worst = BigRational::zero();
    let mut worst_cube = None;
    for (cube, ratio) in covered {
        if ratio > worst {
            worst = ratio;
            worst_cube = Some(cube.clone());
        }
    }
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    SparsityCheck {
        holds: worst <= half,
        worst,
        worst_cube,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rational;
    use crate::measure::Atom;

    fn std_cube(k: i32, m: i64) -> DyadicCube {
        DyadicCube::new(k, &[m], GridShift::zero(1))
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn sparsity_examples() {
        let full = SparseFamily::new([std_cube(0, 0), std_cube(1, 0), std_cube(1, 1)]).unwrap();
        let check = verify_sparsity(&full);
        assert!(!check.holds);
        assert_eq!(check.worst, ratio(1, 1));
        assert_eq!(check.worst_cube, Some(std_cube(0, 0)));

        let half = SparseFamily::new([std_cube(0, 0), std_cube(1, 0)]).unwrap();
        let check = verify_sparsity(&half);
        assert!(check.holds);
        assert_eq!(check.worst, ratio(1, 2));

        let empty = verify_sparsity(&SparseFamily::default());
        assert!(empty.holds);
        assert!(empty.worst.is_zero());
    }

    #[test]
    fn only_maximal_descendants_count() {
        let s = SparseFamily::new([std_cube(0, 0), std_cube(1, 0), std_cube(2, 0), std_cube(2, 2)]).unwrap();
        // [0,1/2) and [1/2,3/4) are maximal below [0,1); [0,1/4) sits inside [0,1/2)
        assert_eq!(verify_sparsity(&s).worst, ratio(3, 4));
    }

    #[test]
    fn mixed_grids_rejected() {
        let t = GridShift::from_flags(&[true]);
        assert!(SparseFamily::new([std_cube(0, 0), DyadicCube::new(0, &[0], t)]).is_err());
    }

    #[test]
    fn level_helpers() {
        assert_eq!(ceil_level(1, 1.0), 0);
        assert_eq!(ceil_level(1, 1.5), 1);
        assert_eq!(floor_level(1, 16.0), 0);
        assert_eq!(floor_level(1, 16.5), 1);
        assert_eq!(floor_level(1, 0.5), -1);
    }

    #[test]
    fn chain_example() {
        let params = OperatorParams::new(1, 1.0).unwrap();
        let sigma = DiscreteMeasure::new(1, vec![Atom { point: vec![Rational::from_integer(0)], mass: 1.0 }]).unwrap();
        let f = SimpleFunction::constant(1, 1.0);
        let window = TruncationWindow::new(0, 3, std_cube(0, 0)).unwrap();
        let s = build_sparse(&params, &window, Weighted::new(&f, &sigma), Weighted::new(&f, &sigma)).unwrap();
        let cubes: Vec<_> = s.cubes().cloned().collect();
        assert_eq!(cubes, vec![std_cube(0, 0), std_cube(1, 0), std_cube(3, 0)]);
        assert_eq!(s.levels(&std_cube(1, 0)), Some((0, 0)));
        assert_eq!(s.levels(&std_cube(3, 0)), Some((1, 1)));
        let check = verify_sparsity(&s);
        assert!(check.holds);
        assert_eq!(check.worst, ratio(1, 2));
        let below_top = verify_sparsity(&s.restricted(&std_cube(1, 0)));
        assert_eq!(below_top.worst, ratio(1, 4));

        let zero = SimpleFunction::zero(1);
        let s = build_sparse(&params, &window, Weighted::new(&zero, &sigma), Weighted::new(&f, &sigma)).unwrap();
        assert!(s.is_empty());

        let single = TruncationWindow::new(2, 2, std_cube(2, 0)).unwrap();
        let s = build_sparse(&params, &single, Weighted::new(&f, &sigma), Weighted::new(&f, &sigma)).unwrap();
        assert_eq!(s.cubes().cloned().collect::<Vec<_>>(), vec![std_cube(2, 0)]);
    }
}
