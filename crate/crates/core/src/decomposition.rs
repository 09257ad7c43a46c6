//! Level sets of the truncated sparse operator and principal cubes.
//!
//! The truncated operator `I^{S(R)}` is a finite sum of cube indicators, so
//! every level set `Ω_k` is a union of family cubes. A cube's cumulative sum
//! `U(Q)` (its own term plus those of all family ancestors inside `R`) is the
//! operator value on `Q` outside its family descendants.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::error::InstanceError;
use crate::geometry::DyadicCube;
use crate::measure::{DiscreteMeasure, SimpleFunction};
use crate::operators::{eval_sparse, OperatorParams, SparseOperator, Weighted};
use crate::sparse::SparseFamily;

pub const DEFAULT_DELTA: f64 = 0.25;

/// Relative slack for threshold comparisons in the independent checks.
const CHECK_TOL: f64 = 1e-12;

/// One maximal cube `Q_j^k` of `Ω_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalCube {
    pub cube: DyadicCube,
    /// Sum over family cubes `Q ⊇ Q_j^k` inside the root.
    pub inclusive: f64,
    /// Sum over strict ancestors only.
    pub strict: f64,
    pub w_mass: f64,
    /// Atoms of `w` in `E(Q_j^k) = Q_j^k ∩ Ω_{k+1} \ Ω_{k+2}`.
    pub exceptional: Vec<usize>,
    pub exceptional_mass: f64,
    /// Atoms of `w` in `F_j^k = Q_j^k ∩ Ω_{k+1}`.
    pub weak: Vec<usize>,
    pub weak_mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub k: i32,
    pub cubes: Vec<MaximalCube>,
    /// `w(Ω_{k+1})`.
    pub w_next: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetDecomposition {
    pub root: DyadicCube,
    pub delta: f64,
    /// Operator values at the atoms of `w`.
    pub values: Vec<f64>,
    /// Levels in increasing `k`.
    pub levels: Vec<Level>,
    /// `𝕂` for even (index 0) and odd (index 1) levels, each with the admitting cube index.
    pub kappa: [Vec<(i32, usize)>; 2],
}

impl LevelSetDecomposition {
    pub fn level(&self, k: i32) -> Option<&Level> {
        self.levels.iter().find(|l| l.k == k)
    }

    /// Cubes of `𝒬_k`; empty outside the computed range except below it, where
    /// `Ω_k` is the whole support and equals the lowest computed level.
    pub fn maximal_cubes(&self, k: i32) -> Vec<&DyadicCube> {
        self.level(k)
            .map(|l| l.cubes.iter().map(|c| &c.cube).collect())
            .unwrap_or_default()
    }

    /// Union of `𝒬_k` over levels of the given parity.
    pub fn forest(&self, parity: usize) -> Vec<DyadicCube> {
        let set: BTreeSet<DyadicCube> = self
            .levels
            .iter()
            .filter(|l| l.k.rem_euclid(2) as usize == parity)
            .flat_map(|l| l.cubes.iter().map(|c| c.cube.clone()))
            .collect();
        set.into_iter().collect()
    }

    /// Pairwise disjointness of the exceptional sets within one parity class.
    pub fn exceptional_sets_disjoint(&self, parity: usize) -> bool {
        let mut seen = BTreeSet::new();
        self.levels
            .iter()
            .filter(|l| l.k.rem_euclid(2) as usize == parity)
            .flat_map(|l| &l.cubes)
            .flat_map(|c| &c.exceptional)
            .all(|&i| seen.insert(i))
    }

    /// `Σ_j w(E(Q_j^k)) <= w(Ω_{k+1})` on every level.
    pub fn exceptional_mass_bounded(&self) -> bool {
        self.levels.iter().all(|l| {
            let total: f64 = l.cubes.iter().map(|c| c.exceptional_mass).sum();
            total <= l.w_next * (1.0 + CHECK_TOL)
        })
    }

    /// Every `k ∈ 𝕂` passes the `δ` filter and its admitting cube is not in `𝒬_{k+2}`.
    pub fn kappa_consistent(&self) -> bool {
        self.kappa.iter().flatten().all(|&(k, j)| {
            let Some(level) = self.level(k) else { return false };
            let c = &level.cubes[j];
            c.exceptional_mass > self.delta * c.w_mass && !self.maximal_cubes(k + 2).contains(&&c.cube)
        })
    }
}

fn exp2i(k: i32) -> f64 {
    (k as f64).exp2()
}

/// Largest `k` with `2^k < v`, for `v > 0`.
fn level_below(v: f64) -> i32 {
    let mut k = v.log2().floor() as i32;
    while exp2i(k) >= v {
        k -= 1;
    }
    while exp2i(k + 1) < v {
        k += 1;
    }
    k
}

/// Decomposes `I^{S(R)}(f1 σ1, f2 σ2)` into level sets over the levels
/// `k` with `2^k` between the smallest positive and the largest value.
pub fn level_sets(
    params: &OperatorParams,
    family: &SparseFamily,
    root: &DyadicCube,
    first: Weighted,
    second: Weighted,
    w: &DiscreteMeasure,
    delta: f64,
) -> Result<LevelSetDecomposition, InstanceError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(InstanceError::BadDelta(delta));
    }
    let op = SparseOperator::new(params, family, Some(root));
    let a = op.integrals(&op.incidence(first.measure), first.f.values(), first.measure);
    let b = op.integrals(&op.incidence(second.measure), second.f.values(), second.measure);
    let inc_w = op.incidence(w);

    let ancestors = family.restricted(root).nearest_ancestors();
    let mut cumulative = vec![0.0; op.len()];
    let mut anc_id = vec![None; op.len()];
    for (id, cube) in op.cubes().iter().enumerate() {
        let own = op.weight(id) * a[id] * b[id];
        let up = ancestors[cube].as_ref().and_then(|c| op.id_of(c));
        anc_id[id] = up;
        cumulative[id] = own + up.map_or(0.0, |u| cumulative[u]);
    }

    let values: Vec<f64> = (0..w.len())
        .map(|i| inc_w.row(i).last().map_or(0.0, |&id| cumulative[id as usize]))
        .collect();
    let mut atoms_in: Vec<Vec<usize>> = vec![Vec::new(); op.len()];
    for i in 0..w.len() {
        for &id in inc_w.row(i) {
            atoms_in[id as usize].push(i);
        }
    }
    let mass = |idx: &[usize]| idx.iter().map(|&i| w.atoms()[i].mass).sum::<f64>();

    let positive = cumulative.iter().copied().filter(|&u| u > 0.0);
    let min_pos = positive.clone().fold(f64::INFINITY, f64::min);
    let max_val = positive.fold(0.0, f64::max);
    let mut levels = Vec::new();
    if max_val > 0.0 {
        for k in level_below(min_pos)..=level_below(max_val) {
            let (t0, t1, t2) = (exp2i(k), exp2i(k + 1), exp2i(k + 2));
            let mut cubes = Vec::new();
            for id in 0..op.len() {
                let strict = anc_id[id].map_or(0.0, |u| cumulative[u]);
                if cumulative[id] <= t0 || strict > t0 {
                    continue;
                }
                let inside = &atoms_in[id];
                let exceptional: Vec<usize> = inside
                    .iter()
                    .copied()
                    .filter(|&i| values[i] > t1 && values[i] <= t2)
                    .collect();
                let weak: Vec<usize> = inside.iter().copied().filter(|&i| values[i] > t1).collect();
                cubes.push(MaximalCube {
                    cube: op.cubes()[id].clone(),
                    inclusive: cumulative[id],
                    strict,
                    w_mass: mass(inside),
                    exceptional_mass: mass(&exceptional),
                    exceptional,
                    weak_mass: mass(&weak),
                    weak,
                });
            }
            let w_next = w
                .atoms()
                .iter()
                .zip(&values)
                .filter(|(_, &v)| v > t1)
                .map(|(a, _)| a.mass)
                .sum();
            levels.push(Level { k, cubes, w_next });
        }
    }

    let mut kappa: [Vec<(i32, usize)>; 2] = [Vec::new(), Vec::new()];
    for level in &levels {
        if let Some(j) = level.cubes.iter().position(|c| c.exceptional_mass > delta * c.w_mass) {
            kappa[level.k.rem_euclid(2) as usize].push((level.k, j));
        }
    }

    Ok(LevelSetDecomposition {
        root: root.clone(),
        delta,
        values,
        levels,
        kappa,
    })
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PrincipleViolation {
    #[error("level {k}: sum over family cubes containing {cube:?} is {sum}, not above 2^k")]
    Inclusive { k: i32, cube: DyadicCube, sum: f64 },
    #[error("level {k}: sum over strict ancestors of {cube:?} is {sum}, above 2^k")]
    Strict { k: i32, cube: DyadicCube, sum: f64 },
    #[error("level {k}: localized operator at w-atom {atom} in E({cube:?}) is {value}, not above 2^k")]
    LocalAtom { k: i32, cube: DyadicCube, atom: usize, value: f64 },
    #[error("level {k}: localized operator on the cell of {cell:?} in E({cube:?}) is {value}, not above 2^k")]
    LocalCell { k: i32, cube: DyadicCube, cell: DyadicCube, value: f64 },
}

/// Re-derives every maximal cube's ancestor sums from direct cube integrals
/// and checks the maximum principle, then checks the localized bound on
/// `E(Q_j^k)` at the atoms of `w` and on every family cell inside it.
pub fn check_maximum_principle(
    decomp: &LevelSetDecomposition,
    params: &OperatorParams,
    family: &SparseFamily,
    first: Weighted,
    second: Weighted,
    w: &DiscreteMeasure,
) -> Result<(), PrincipleViolation> {
    let root = &decomp.root;
    let local: Vec<DyadicCube> = family.cubes().filter(|c| root.contains_cube(c)).cloned().collect();
    let term: BTreeMap<&DyadicCube, f64> = local
        .iter()
        .map(|c| (c, params.weight(c.scale) * first.integral_over(c) * second.integral_over(c)))
        .collect();
    let sum_over = |pred: &dyn Fn(&DyadicCube) -> bool| -> f64 {
        local.iter().filter(|c| pred(c)).map(|c| term[c]).sum()
    };
    let cell_value: BTreeMap<&DyadicCube, f64> =
        local.iter().map(|p| (p, sum_over(&|c: &DyadicCube| c.contains_cube(p)))).collect();

    for level in &decomp.levels {
        let k = level.k;
        let (t0, t1, t2) = (exp2i(k), exp2i(k + 1), exp2i(k + 2));
        for mc in &level.cubes {
            let q = &mc.cube;
            let inclusive = sum_over(&|c: &DyadicCube| c.contains_cube(q));
            if inclusive <= t0 * (1.0 - CHECK_TOL) {
                return Err(PrincipleViolation::Inclusive { k, cube: q.clone(), sum: inclusive });
            }
            let strict = sum_over(&|c: &DyadicCube| c != q && c.contains_cube(q));
            if strict > t0 * (1.0 + CHECK_TOL) {
                return Err(PrincipleViolation::Strict { k, cube: q.clone(), sum: strict });
            }

            let g1 = first.f.restricted(first.measure, q);
            let g2 = second.f.restricted(second.measure, q);
            for &atom in &mc.exceptional {
                let value = eval_sparse(
                    params,
                    family,
                    Weighted::new(&g1, first.measure),
                    Weighted::new(&g2, second.measure),
                    &w.atoms()[atom].point,
                    Some(root),
                );
                if value <= t0 * (1.0 - CHECK_TOL) {
                    return Err(PrincipleViolation::LocalAtom { k, cube: q.clone(), atom, value });
                }
            }
            // On the cell of P ⊆ Q the localized operator keeps only the terms P ⊆ Q' ⊆ Q.
            for p in local.iter().filter(|p| q.contains_cube(p)) {
                let u = cell_value[p];
                if u <= t1 || u > t2 {
                    continue;
                }
                let value = u - strict;
                if value <= t0 * (1.0 - CHECK_TOL) {
                    return Err(PrincipleViolation::LocalCell {
                        k,
                        cube: q.clone(),
                        cell: p.clone(),
                        value,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Principal cubes of `f` over a finite cube collection.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PrincipalForest {
    pub generations: Vec<Vec<DyadicCube>>,
    /// `G(Q)`: the minimal principal cube containing each forest cube.
    pub stopping: BTreeMap<DyadicCube, DyadicCube>,
    /// `E_Q^σ f` for every forest cube.
    pub averages: BTreeMap<DyadicCube, f64>,
}

impl PrincipalForest {
    pub fn principal(&self) -> impl Iterator<Item = &DyadicCube> {
        self.generations.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `E_Q^σ f`, zero on null cubes.
pub fn expectation(f: &SimpleFunction, sigma: &DiscreteMeasure, cube: &DyadicCube) -> f64 {
    crate::measure::average(f, sigma, cube)
}

/// Builds `𝒢_0` (maximal cubes) and `𝒢_{n+1}` (maximal subcubes `G` of some
/// `G' ∈ 𝒢_n` with `E_G f > 4 E_{G'} f`), coarse to fine.
pub fn principal_cubes(f: &SimpleFunction, sigma: &DiscreteMeasure, forest: &[DyadicCube]) -> PrincipalForest {
    let cubes: BTreeSet<&DyadicCube> = forest.iter().collect();
    let coarsest = cubes.iter().next().map(|c| c.scale);
    let mut out = PrincipalForest::default();
    let mut generation: BTreeMap<DyadicCube, usize> = BTreeMap::new();
    for &cube in &cubes {
        let avg = expectation(f, sigma, cube);
        out.averages.insert(cube.clone(), avg);
        let mut ancestor = None;
        let mut cur = cube.clone();
        while coarsest.is_some_and(|top| cur.scale > top) {
            cur = cur.parent();
            if cubes.contains(&cur) {
                ancestor = Some(cur.clone());
                break;
            }
        }
        let (gen, stop) = match ancestor {
            None => (Some(0), cube.clone()),
            Some(a) => {
                let g = out.stopping[&a].clone();
                if avg > 4.0 * out.averages[&g] {
                    (Some(generation[&g] + 1), cube.clone())
                } else {
                    (None, g)
                }
            }
        };
        if let Some(n) = gen {
            if out.generations.len() <= n {
                out.generations.resize(n + 1, Vec::new());
            }
            out.generations[n].push(cube.clone());
            generation.insert(cube.clone(), n);
        }
        out.stopping.insert(cube.clone(), stop);
    }
    out
}

/// `Σ_{G ∈ 𝒢} (E_G^σ f)^p σ(G)`.
pub fn carleson_sum(forest: &PrincipalForest, f: &SimpleFunction, sigma: &DiscreteMeasure, p: f64) -> f64 {
    forest
        .principal()
        .map(|g| expectation(f, sigma, g).powf(p) * sigma.mass_of(g))
        .sum()
}

/// `(4/3) (p')^p ‖f‖_p^p`, the bound for [`carleson_sum`].
pub fn carleson_bound(f: &SimpleFunction, sigma: &DiscreteMeasure, p: f64) -> f64 {
    let pc = crate::measure::conjugate(p);
    4.0 / 3.0 * pc.powf(p) * crate::measure::lp_norm(f, p, sigma).powf(p)
}
