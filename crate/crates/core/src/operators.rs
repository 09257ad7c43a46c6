//! The bilinear fractional integral and its dyadic and sparse discretizations.
//!
//! Pointwise evaluators (`eval_kernel`, `eval_dyadic`, `eval_sparse`) follow the
//! defining sums literally and are used as references. [`WindowTree`] and
//! [`SparseOperator`] are the batch engines: they walk ancestor chains of atoms,
//! so a full evaluation costs O(atoms · scales) instead of a scan of the grid.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::OperatorError;
use crate::geometry::{DyadicCube, GridShift, Point, Rational, SCALE_LIMIT};
use crate::measure::{DiscreteMeasure, SimpleFunction};
use crate::sparse::SparseFamily;

pub const DEFAULT_K_MIN: i32 = -10;
pub const DEFAULT_K_MAX: i32 = 12;

/// Dimension `n` and order `α ∈ (0, 2n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub dim: usize,
    pub alpha: f64,
}

impl OperatorParams {
    pub fn new(dim: usize, alpha: f64) -> Result<Self, OperatorError> {
        if dim == 0 {
            return Err(OperatorError::ZeroDimension);
        }
        let bound = 2.0 * dim as f64;
        if !(alpha > 0.0 && alpha < bound) {
            return Err(OperatorError::BadOrder { alpha, bound });
        }
        Ok(Self { dim, alpha })
    }

    /// Exponent `2n - α` of the kernel.
    pub fn kernel_exponent(&self) -> f64 {
        2.0 * self.dim as f64 - self.alpha
    }

    /// `Π_i |Q|^{-(1 - α/2n)}` for a cube of scale `k`.
    pub fn weight(&self, scale: i32) -> f64 {
        (scale as f64 * self.kernel_exponent()).exp2()
    }
}

/// A function paired with the measure it integrates against, i.e. `f σ`.
#[derive(Clone, Copy, Debug)]
pub struct Weighted<'a> {
    pub f: &'a SimpleFunction,
    pub measure: &'a DiscreteMeasure,
}

impl<'a> Weighted<'a> {
    pub fn new(f: &'a SimpleFunction, measure: &'a DiscreteMeasure) -> Self {
        assert_eq!(f.len(), measure.len(), "function does not match its measure");
        Self { f, measure }
    }

    /// `∫_Q f dσ`, summed in atom order.
    pub fn integral_over(&self, cube: &DyadicCube) -> f64 {
        let mut sum = 0.0;
        for (v, a) in self.f.values().iter().zip(self.measure.atoms()) {
            if cube.contains(&a.point) {
                sum += v * a.mass;
            }
        }
        sum
    }
}

/// Admissible cubes: same grid as `root`, inside `root`, scale in `[k_min, k_max]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationWindow {
    pub k_min: i32,
    pub k_max: i32,
    pub root: DyadicCube,
}

impl TruncationWindow {
    pub fn new(k_min: i32, k_max: i32, root: DyadicCube) -> Result<Self, OperatorError> {
        if k_min > k_max || root.scale > k_max {
            return Err(OperatorError::BadWindow {
                k_min,
                k_max,
                root: root.scale,
            });
        }
        if k_min.abs() > SCALE_LIMIT || k_max.abs() > SCALE_LIMIT || root.scale.abs() > SCALE_LIMIT {
            return Err(OperatorError::ScaleRange { limit: SCALE_LIMIT });
        }
        Ok(Self { k_min, k_max, root })
    }

    /// Window whose root is the parent of the smallest grid cube (scale within
    /// `[k_min, k_max]`) containing every point, so all points share one child
    /// of the root.
    pub fn enclosing<'p>(
        shift: &GridShift,
        points: impl IntoIterator<Item = &'p Point>,
        k_min: i32,
        k_max: i32,
    ) -> Result<Self, OperatorError> {
        if k_min > k_max {
            return Err(OperatorError::BadWindow { k_min, k_max, root: k_min });
        }
        let points: Vec<&Point> = points.into_iter().collect();
        let Some(first) = points.first() else {
            let origin = vec![Rational::from_integer(0); shift.dim()];
            return Self::new(k_min, k_max, DyadicCube::containing(&origin, k_min, shift));
        };
        let mut cube = DyadicCube::containing(first, k_max, shift);
        loop {
            if points.iter().all(|p| cube.contains(p)) {
                let root = if cube.scale > k_min { cube.parent() } else { cube };
                return Self::new(k_min, k_max, root);
            }
            if cube.scale == k_min {
                return Err(OperatorError::NoEnclosingCube);
            }
            cube = cube.parent();
        }
    }

    pub fn shift(&self) -> &GridShift {
        &self.root.shift
    }

    /// Coarsest admitted scale.
    pub fn top_scale(&self) -> i32 {
        self.k_min.max(self.root.scale)
    }

    pub fn levels(&self) -> usize {
        (self.k_max - self.top_scale() + 1) as usize
    }

    pub fn contains_point(&self, x: &[Rational]) -> bool {
        self.root.contains(x)
    }

    pub fn admits(&self, cube: &DyadicCube) -> bool {
        cube.shift == self.root.shift
            && cube.scale >= self.top_scale()
            && cube.scale <= self.k_max
            && self.root.contains_cube(cube)
    }

    /// Admitted cubes containing `x`, coarse to fine (empty outside the root).
    pub fn chain(&self, x: &[Rational]) -> Vec<DyadicCube> {
        if !self.contains_point(x) {
            return Vec::new();
        }
        let mut cube = DyadicCube::containing(x, self.k_max, self.shift());
        let mut out = Vec::with_capacity(self.levels());
        loop {
            let done = cube.scale == self.top_scale();
            let parent = if done { None } else { Some(cube.parent()) };
            out.push(cube);
            match parent {
                Some(p) => cube = p,
                None => break,
            }
        }
        out.reverse();
        out
    }
}

fn euclidean(x: &[Rational], y: &[Rational]) -> (f64, bool) {
    let mut sq = 0.0;
    let mut same = true;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        if *d.numer() != 0 {
            same = false;
            let v = *d.numer() as f64 / *d.denom() as f64;
            sq += v * v;
        }
    }
    (sq.sqrt(), same)
}

/// `Σ_{a1, a2} f1 f2 m1 m2 / (|x - a1| + |x - a2|)^{2n - α}`; `+∞` when a
/// positive term sits on the diagonal `a1 = a2 = x`.
pub fn eval_kernel(params: &OperatorParams, first: Weighted, second: Weighted, x: &[Rational]) -> f64 {
    let exponent = params.kernel_exponent();
    let d2: Vec<(f64, bool)> = second.measure.points().map(|p| euclidean(x, p)).collect();
    let mut sum = 0.0;
    for (v1, a1) in first.f.values().iter().zip(first.measure.atoms()) {
        let c1 = v1 * a1.mass;
        if c1 == 0.0 {
            continue;
        }
        let (r1, on1) = euclidean(x, &a1.point);
        for ((v2, a2), &(r2, on2)) in second.f.values().iter().zip(second.measure.atoms()).zip(&d2) {
            let c = c1 * v2 * a2.mass;
            if c == 0.0 {
                continue;
            }
            if on1 && on2 {
                return f64::INFINITY;
            }
            sum += c / (r1 + r2).powf(exponent);
        }
    }
    sum
}

/// Truncated dyadic operator at `x`: the sum over admitted cubes `Q ∋ x`
/// of `|Q|^{α/n - 2} ∫_Q f1 dσ1 ∫_Q f2 dσ2`.
pub fn eval_dyadic(
    params: &OperatorParams,
    window: &TruncationWindow,
    first: Weighted,
    second: Weighted,
    x: &[Rational],
) -> f64 {
    let mut sum = 0.0;
    for cube in window.chain(x) {
        let a = first.integral_over(&cube);
        let b = second.integral_over(&cube);
        sum += params.weight(cube.scale) * a * b;
    }
    sum
}

/// Sparse operator at `x`, restricted to cubes inside `root` when given.
pub fn eval_sparse(
    params: &OperatorParams,
    family: &SparseFamily,
    first: Weighted,
    second: Weighted,
    x: &[Rational],
    root: Option<&DyadicCube>,
) -> f64 {
    let mut sum = 0.0;
    for cube in family.cubes() {
        if root.is_some_and(|r| !r.contains_cube(cube)) || !cube.contains(x) {
            continue;
        }
        let a = first.integral_over(cube);
        let b = second.integral_over(cube);
        sum += params.weight(cube.scale) * a * b;
    }
    sum
}

/// Atom-to-node incidence in compressed rows; row `i` lists node ids coarse to fine.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Incidence {
    offsets: Vec<u32>,
    ids: Vec<u32>,
}

impl Incidence {
    fn push_row(&mut self, row: impl IntoIterator<Item = u32>) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.ids.extend(row);
        self.offsets.push(self.ids.len() as u32);
    }

    pub fn rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ids[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// The admitted window cubes that contain at least one atom of the given measures.
#[derive(Clone, Debug)]
pub struct WindowTree {
    window: TruncationWindow,
    nodes: Vec<DyadicCube>,
    parent: Vec<Option<u32>>,
    index: HashMap<DyadicCube, u32>,
}

impl WindowTree {
    /// Builds the tree and one incidence per measure. Atoms outside the root get empty rows.
    pub fn new(window: &TruncationWindow, measures: &[&DiscreteMeasure]) -> (Self, Vec<Incidence>) {
        let chains: Vec<Vec<Vec<DyadicCube>>> = measures
            .iter()
            .map(|mu| mu.points().map(|p| window.chain(p)).collect())
            .collect();
        let set: BTreeSet<&DyadicCube> = chains.iter().flatten().flatten().collect();
        let nodes: Vec<DyadicCube> = set.into_iter().cloned().collect();
        let index: HashMap<DyadicCube, u32> =
            nodes.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();
        let top = window.top_scale();
        let parent = nodes
            .iter()
            .map(|c| (c.scale > top).then(|| index[&c.parent()]))
            .collect();
        let incidences = chains
            .iter()
            .map(|per_measure| {
                let mut inc = Incidence::default();
                inc.offsets.push(0);
                for chain in per_measure {
                    inc.push_row(chain.iter().map(|c| index[c]));
                }
                inc
            })
            .collect();
        (
            Self {
                window: window.clone(),
                nodes,
                parent,
                index,
            },
            incidences,
        )
    }

    pub fn window(&self) -> &TruncationWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DyadicCube] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &DyadicCube {
        &self.nodes[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id].map(|p| p as usize)
    }

    pub fn id_of(&self, cube: &DyadicCube) -> Option<usize> {
        self.index.get(cube).map(|&i| i as usize)
    }

    /// `∫_Q f dμ` for every node, accumulated in atom order.
    pub fn integrals(&self, inc: &Incidence, f: &[f64], mu: &DiscreteMeasure) -> Vec<f64> {
        let mut acc = vec![0.0; self.nodes.len()];
        for (i, atom) in mu.atoms().iter().enumerate() {
            let c = f[i] * atom.mass;
            for &node in inc.row(i) {
                acc[node as usize] += c;
            }
        }
        acc
    }

    /// Truncated dyadic operator at the atoms behind `eval`, from node integrals.
    pub fn dyadic_values(&self, params: &OperatorParams, eval: &Incidence, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..eval.rows())
            .map(|i| {
                let mut sum = 0.0;
                for &node in eval.row(i) {
                    let n = node as usize;
                    sum += params.weight(self.nodes[n].scale) * a[n] * b[n];
                }
                sum
            })
            .collect()
    }
}

/// Batch evaluator of `I^S` over a fixed family.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    cubes: Vec<DyadicCube>,
    weight: Vec<f64>,
    index: HashMap<DyadicCube, u32>,
    finest: Option<i32>,
    coarsest: Option<i32>,
}

impl SparseOperator {
    pub fn new(params: &OperatorParams, family: &SparseFamily, root: Option<&DyadicCube>) -> Self {
        let cubes: Vec<DyadicCube> = family
            .cubes()
            .filter(|c| root.is_none_or(|r| r.contains_cube(c)))
            .cloned()
            .collect();
        let weight = cubes.iter().map(|c| params.weight(c.scale)).collect();
        let index = cubes.iter().enumerate().map(|(i, c)| (c.clone(), i as u32)).collect();
        Self {
            finest: cubes.iter().map(|c| c.scale).max(),
            coarsest: cubes.iter().map(|c| c.scale).min(),
            cubes,
            weight,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weight[id]
    }

    pub fn id_of(&self, cube: &DyadicCube) -> Option<usize> {
        self.index.get(cube).map(|&i| i as usize)
    }

    /// Family cubes containing each atom, coarse to fine.
    pub fn incidence(&self, mu: &DiscreteMeasure) -> Incidence {
        let mut inc = Incidence::default();
        inc.offsets.push(0);
        let (Some(fine), Some(coarse)) = (self.finest, self.coarsest) else {
            for _ in 0..mu.len() {
                inc.push_row(std::iter::empty());
            }
            return inc;
        };
        let shift = &self.cubes[0].shift;
        for p in mu.points() {
            let mut row = Vec::new();
            let mut cube = DyadicCube::containing(p, fine, shift);
            loop {
                if let Some(&id) = self.index.get(&cube) {
                    row.push(id);
                }
                if cube.scale == coarse {
                    break;
                }
                cube = cube.parent();
            }
            row.reverse();
            inc.push_row(row);
        }
        inc
    }

    /// `∫_Q f dμ` for every family cube.
    pub fn integrals(&self, inc: &Incidence, f: &[f64], mu: &DiscreteMeasure) -> Vec<f64> {
        let mut acc = vec![0.0; self.cubes.len()];
        for (i, atom) in mu.atoms().iter().enumerate() {
            let c = f[i] * atom.mass;
            if c == 0.0 {
                continue;
            }
            for &id in inc.row(i) {
                acc[id as usize] += c;
            }
        }
        acc
    }

    /// `I^S` at the atoms behind `eval`, given per-cube integrals of both slots.
    pub fn values(&self, eval: &Incidence, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..eval.rows())
            .map(|i| {
                let mut sum = 0.0;
                for &id in eval.row(i) {
                    let j = id as usize;
                    sum += self.weight[j] * a[j] * b[j];
                }
                sum
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    fn r(a: i128, b: i128) -> Rational {
        Rational::new(a, b)
    }

    fn unit_atom(x: Rational) -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![Atom { point: vec![x], mass: 1.0 }]).unwrap()
    }

    fn one() -> SimpleFunction {
        SimpleFunction::constant(1, 1.0)
    }

    #[test]
    fn params_validation() {
        assert!(OperatorParams::new(1, 1.0).is_ok());
        assert!(OperatorParams::new(1, 2.0).is_err());
        assert!(OperatorParams::new(2, 0.0).is_err());
        assert!(OperatorParams::new(0, 0.5).is_err());
    }

    #[test]
    fn kernel_examples() {
        let params = OperatorParams::new(1, 1.0).unwrap();
        let at0 = unit_atom(r(0, 1));
        let f = one();
        let v = eval_kernel(&params, Weighted::new(&f, &at0), Weighted::new(&f, &at0), &[r(3, 4)]);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);

        let at1 = unit_atom(r(1, 1));
        let v = eval_kernel(&params, Weighted::new(&f, &at0), Weighted::new(&f, &at1), &[r(1, 2)]);
        assert_eq!(v, 1.0);

        let v = eval_kernel(&params, Weighted::new(&f, &at0), Weighted::new(&f, &at0), &[r(0, 1)]);
        assert_eq!(v, f64::INFINITY);

        // x on an atom of only one measure stays finite
        let v = eval_kernel(&params, Weighted::new(&f, &at0), Weighted::new(&f, &at1), &[r(0, 1)]);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn dyadic_examples() {
        let params = OperatorParams::new(1, 1.0).unwrap();
        let at0 = unit_atom(r(0, 1));
        let f = one();
        let pair = || (Weighted::new(&f, &at0), Weighted::new(&f, &at0));
        let root = DyadicCube::new(-3, &[0], GridShift::zero(1));
        let window = TruncationWindow::new(-3, 0, root).unwrap();
        let (a, b) = pair();
        assert_eq!(eval_dyadic(&params, &window, a, b, &[r(3, 4)]), 15.0 / 8.0);

        // the chain [0, 2^j) sums a geometric series converging to 2
        let mut previous = 0.0;
        for depth in [5, 10, 20, 40] {
            let root = DyadicCube::new(-depth, &[0], GridShift::zero(1));
            let window = TruncationWindow::new(-depth, 0, root).unwrap();
            let (a, b) = pair();
            let v = eval_dyadic(&params, &window, a, b, &[r(3, 4)]);
            assert!(v >= previous);
            assert!((2.0 - v - 2f64.powi(-depth)).abs() < 1e-12);
            previous = v;
        }

        let (a, b) = pair();
        assert_eq!(eval_dyadic(&params, &window, a, b, &[r(100, 1)]), 0.0);
        let (a, b) = pair();
        assert_eq!(eval_dyadic(&params, &window, a, b, &[r(-1, 2)]), 0.0);
    }

    #[test]
    fn sparse_examples() {
        let params = OperatorParams::new(1, 1.0).unwrap();
        let sigma = unit_atom(r(1, 10));
        let f = one();
        let s = SparseFamily::new(vec![
            DyadicCube::new(0, &[0], GridShift::zero(1)),
            DyadicCube::new(1, &[0], GridShift::zero(1)),
        ])
        .unwrap();
        let w = || Weighted::new(&f, &sigma);
        assert_eq!(eval_sparse(&params, &s, w(), w(), &[r(3, 10)], None), 3.0);
        assert_eq!(eval_sparse(&params, &s, w(), w(), &[r(6, 10)], None), 1.0);
        let root = DyadicCube::new(1, &[0], GridShift::zero(1));
        assert_eq!(eval_sparse(&params, &s, w(), w(), &[r(3, 10)], Some(&root)), 2.0);
        let empty = SparseFamily::new(vec![]).unwrap();
        assert_eq!(eval_sparse(&params, &empty, w(), w(), &[r(3, 10)], None), 0.0);
    }

    #[test]
    fn enclosing_window_puts_atoms_in_one_child() {
        let pts = vec![vec![r(1, 10)], vec![r(3, 10)]];
        let w = TruncationWindow::enclosing(&GridShift::zero(1), &pts, -10, 12).unwrap();
        // smallest cube containing both is [0, 1/2); the root is its parent
        assert_eq!(w.root, DyadicCube::new(0, &[0], GridShift::zero(1)));
        let straddle = vec![vec![r(-1, 10)], vec![r(1, 10)]];
        assert_eq!(
            TruncationWindow::enclosing(&GridShift::zero(1), &straddle, -10, 12),
            Err(OperatorError::NoEnclosingCube)
        );
        let shifted = GridShift::from_flags(&[true]);
        assert!(TruncationWindow::enclosing(&shifted, &straddle, -10, 12).is_ok());
    }

    #[test]
    fn tree_matches_pointwise_dyadic() {
        let params = OperatorParams::new(1, 0.5).unwrap();
        let mk = |pts: &[(i128, i128, f64)]| {
            DiscreteMeasure::new(
                1,
                pts.iter().map(|&(a, b, m)| Atom { point: vec![r(a, b)], mass: m }).collect(),
            )
            .unwrap()
        };
        let s1 = mk(&[(1, 8, 0.5), (5, 16, 2.0), (7, 9, 1.5)]);
        let s2 = mk(&[(1, 7, 1.0), (3, 5, 0.25)]);
        let w = mk(&[(1, 6, 1.0), (2, 3, 3.0), (1, 3, 0.5)]);
        let window = TruncationWindow::enclosing(&GridShift::zero(1), s1.points().chain(s2.points()).chain(w.points()), -4, 8).unwrap();
        let f1 = SimpleFunction::new(vec![1.0, 2.0, 0.5]).unwrap();
        let f2 = SimpleFunction::new(vec![3.0, 1.0]).unwrap();
        let (tree, inc) = WindowTree::new(&window, &[&s1, &s2, &w]);
        let a = tree.integrals(&inc[0], f1.values(), &s1);
        let b = tree.integrals(&inc[1], f2.values(), &s2);
        let batch = tree.dyadic_values(&params, &inc[2], &a, &b);
        for (x, v) in w.points().zip(&batch) {
            let direct = eval_dyadic(&params, &window, Weighted::new(&f1, &s1), Weighted::new(&f2, &s2), x);
            assert_eq!(direct, *v);
        }
    }
}
