use serde::Serialize;

use super::{Engine, Instance};
use crate::geometry::DyadicCube;
use crate::measure::DiscreteMeasure;
use crate::operators::{Incidence, SparseOperator, WindowTree};

/// How a competitor pair was formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompetitorKind {
    /// `(1_Q, 1_Q)`, realizing the `T` ratio at `Q`.
    Indicator,
    /// `(h^{p1'-1} 1_Q, 1_Q)` with `h = I^S(1_Q w, 1_Q σ2)`, realizing `T1*` at `Q`.
    DualFirst,
    /// `(1_Q, h^{p2'-1} 1_Q)` with `h = I^S(1_Q σ1, 1_Q w)`, realizing `T2*` at `Q`.
    DualSecond,
}

/// A test pair whose objective values bound a testing ratio from above.
#[derive(Clone, Debug, PartialEq)]
pub struct Competitor {
    pub kind: CompetitorKind,
    pub cube: DyadicCube,
    /// Testing ratio the pair realizes.
    pub ratio: f64,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

/// Dyadic testing constants of an instance, with their maximizing cubes.
#[derive(Clone, Debug, PartialEq)]
pub struct TestingConstants {
    pub t: f64,
    pub t1_star: f64,
    pub t2_star: f64,
    pub t_cube: Option<DyadicCube>,
    pub t1_cube: Option<DyadicCube>,
    pub t2_cube: Option<DyadicCube>,
    /// Largest localized ratio `∫_Q I^S(1_Q σ1, 1_Q σ2) dw / (w(Q)^{1/q'} σ1(Q)^{1/p1} σ2(Q)^{1/p2})`.
    pub equi: f64,
    pub equi_cube: Option<DyadicCube>,
    /// Cubes of the window meeting some support.
    pub cubes_examined: usize,
    pub(crate) nodes: Vec<DyadicCube>,
    /// Per-node ratios for `T`, `T1*`, `T2*`; `None` where the denominator vanishes.
    pub(crate) ratios: [Vec<Option<f64>>; 3],
    pub(crate) chains: [Incidence; 3],
    pub(crate) top: i32,
}

impl TestingConstants {
    pub fn sum(&self) -> f64 {
        self.t + self.t1_star + self.t2_star
    }

    pub fn dual_sum(&self) -> f64 {
        self.t1_star + self.t2_star
    }

    /// Node ids ordered by decreasing ratio for constant `which` (0, 1, 2), ties by id.
    pub(crate) fn ranked(&self, which: usize, limit: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.ratios[which][i].is_some()).collect();
        ids.sort_by(|&a, &b| {
            let (ra, rb) = (self.ratios[which][a].unwrap(), self.ratios[which][b].unwrap());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        ids.truncate(limit);
        ids
    }

    /// `1_Q` on the atoms of measure `which` (0: σ1, 1: σ2, 2: w).
    pub(crate) fn indicator(&self, which: usize, node: usize) -> Vec<f64> {
        let pos = (self.nodes[node].scale - self.top) as usize;
        let chains = &self.chains[which];
        (0..chains.rows())
            .map(|i| {
                let row = chains.row(i);
                if row.get(pos).is_some_and(|&id| id as usize == node) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Slot masses on window nodes and on family cubes.
struct Slots<'a> {
    a_node: &'a [f64],
    b_node: &'a [f64],
    a_s: &'a [f64],
    b_s: &'a [f64],
}

/// For each window node `Q`, `Σ_{x ∈ Q} m_x · I^S(1_Q μa, 1_Q μb)(x)^r` for every `r` in `powers`.
///
/// For `x ∈ Q`, family cubes `P ∋ x` no finer than `Q` contain `Q`, so they
/// contribute `|P|-weight · μa(Q) μb(Q)`; finer ones lie inside `Q` and
/// contribute their full masses.
fn localized_moments(
    tree: &WindowTree,
    chains: &Incidence,
    op: &SparseOperator,
    rows: &Incidence,
    eval: &DiscreteMeasure,
    slots: &Slots,
    powers: &[f64],
) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; tree.len()]; powers.len()];
    let mut suffix = Vec::new();
    for (i, atom) in eval.atoms().iter().enumerate() {
        let row = rows.row(i);
        suffix.clear();
        suffix.resize(row.len() + 1, 0.0);
        for j in (0..row.len()).rev() {
            let id = row[j] as usize;
            suffix[j] = suffix[j + 1] + op.weight(id) * slots.a_s[id] * slots.b_s[id];
        }
        let mut prefix = 0.0;
        let mut ptr = 0;
        for &node in chains.row(i) {
            let node = node as usize;
            let k = tree.node(node).scale;
            while ptr < row.len() && op.cubes()[row[ptr] as usize].scale <= k {
                prefix += op.weight(row[ptr] as usize);
                ptr += 1;
            }
            let value = slots.a_node[node] * slots.b_node[node] * prefix + suffix[ptr];
            for (acc, &r) in out.iter_mut().zip(powers) {
                acc[node] += atom.mass * if r == 1.0 { value } else { value.powf(r) };
            }
        }
    }
    out
}

fn argmax(ratios: &[Option<f64>], nodes: &[DyadicCube]) -> (f64, Option<DyadicCube>) {
    let mut best = (0.0, None);
    for (i, r) in ratios.iter().enumerate() {
        if let Some(r) = *r {
            if best.1.is_none() || r > best.0 {
                best = (r, Some(nodes[i].clone()));
            }
        }
    }
    best
}

/// Computes `T^S`, `T1^{S,*}` and `T2^{S,*}` as maxima over the window cubes
/// meeting `supp σ1 ∪ supp σ2 ∪ supp w`, skipping zero denominators.
pub fn testing_constants(inst: &Instance) -> TestingConstants {
    let engine = Engine::new(inst);
    testing_constants_with(&engine)
}

pub(crate) fn testing_constants_with(engine: &Engine) -> TestingConstants {
    let inst = engine.inst;
    let e = inst.exponents;
    let (tree, chains) = WindowTree::new(&inst.window, &[&inst.sigma1, &inst.sigma2, &inst.w]);
    let ones = |mu: &DiscreteMeasure| vec![1.0; mu.len()];
    let node_mass = [
        tree.integrals(&chains[0], &ones(&inst.sigma1), &inst.sigma1),
        tree.integrals(&chains[1], &ones(&inst.sigma2), &inst.sigma2),
        tree.integrals(&chains[2], &ones(&inst.w), &inst.w),
    ];
    let s_mass = [
        engine.integrals1(&ones(&inst.sigma1)),
        engine.integrals2(&ones(&inst.sigma2)),
        engine.integrals_w(&ones(&inst.w)),
    ];
    let slots = |a: usize, b: usize| Slots {
        a_node: &node_mass[a],
        b_node: &node_mass[b],
        a_s: &s_mass[a],
        b_s: &s_mass[b],
    };
    let op = &engine.op;
    let t_moments = localized_moments(&tree, &chains[2], op, &engine.inc_w, &inst.w, &slots(0, 1), &[e.q, 1.0]);
    let t1_moments = localized_moments(&tree, &chains[0], op, &engine.inc1, &inst.sigma1, &slots(2, 1), &[e.p1_conj]);
    let t2_moments = localized_moments(&tree, &chains[1], op, &engine.inc2, &inst.sigma2, &slots(0, 2), &[e.p2_conj]);

    let n = tree.len();
    let ratio = |num: f64, r: f64, den: f64| (den > 0.0).then(|| num.powf(1.0 / r) / den);
    let s1 = |id: usize| node_mass[0][id].powf(1.0 / e.p1);
    let s2 = |id: usize| node_mass[1][id].powf(1.0 / e.p2);
    let wq = |id: usize| node_mass[2][id].powf(1.0 / e.q_conj);
    let t_r: Vec<Option<f64>> = (0..n).map(|i| ratio(t_moments[0][i], e.q, s1(i) * s2(i))).collect();
    let equi_r: Vec<Option<f64>> = (0..n).map(|i| ratio(t_moments[1][i], 1.0, wq(i) * s1(i) * s2(i))).collect();
    let t1_r: Vec<Option<f64>> = (0..n).map(|i| ratio(t1_moments[0][i], e.p1_conj, wq(i) * s2(i))).collect();
    let t2_r: Vec<Option<f64>> = (0..n).map(|i| ratio(t2_moments[0][i], e.p2_conj, s1(i) * wq(i))).collect();

    let nodes = tree.nodes().to_vec();
    let (t, t_cube) = argmax(&t_r, &nodes);
    let (t1_star, t1_cube) = argmax(&t1_r, &nodes);
    let (t2_star, t2_cube) = argmax(&t2_r, &nodes);
    let (equi, equi_cube) = argmax(&equi_r, &nodes);
    let [c0, c1, c2]: [Incidence; 3] = chains.try_into().expect("three measures");
    TestingConstants {
        t,
        t1_star,
        t2_star,
        t_cube,
        t1_cube,
        t2_cube,
        equi,
        equi_cube,
        cubes_examined: n,
        nodes,
        ratios: [t_r, t1_r, t2_r],
        chains: [c0, c1, c2],
        top: inst.window.top_scale(),
    }
}

/// Competitor pairs realizing the `limit` largest ratios of each constant.
pub(crate) fn competitors(engine: &Engine, tc: &TestingConstants, limit: usize) -> Vec<Competitor> {
    let e = engine.inst.exponents;
    let mut out = Vec::new();
    for node in tc.ranked(0, limit) {
        out.push(Competitor {
            kind: CompetitorKind::Indicator,
            cube: tc.nodes[node].clone(),
            ratio: tc.ratios[0][node].unwrap(),
            f1: tc.indicator(0, node),
            f2: tc.indicator(1, node),
        });
    }
    for node in tc.ranked(1, limit) {
        let (ind1, ind2, ind_w) = (tc.indicator(0, node), tc.indicator(1, node), tc.indicator(2, node));
        let h = engine.op.values(&engine.inc1, &engine.integrals_w(&ind_w), &engine.integrals2(&ind2));
        let f1 = h.iter().zip(&ind1).map(|(h, i)| i * h.powf(e.p1_conj - 1.0)).collect();
        out.push(Competitor {
            kind: CompetitorKind::DualFirst,
            cube: tc.nodes[node].clone(),
            ratio: tc.ratios[1][node].unwrap(),
            f1,
            f2: ind2,
        });
    }
    for node in tc.ranked(2, limit) {
        let (ind1, ind2, ind_w) = (tc.indicator(0, node), tc.indicator(1, node), tc.indicator(2, node));
        let h = engine.op.values(&engine.inc2, &engine.integrals1(&ind1), &engine.integrals_w(&ind_w));
        let f2 = h.iter().zip(&ind2).map(|(h, i)| i * h.powf(e.p2_conj - 1.0)).collect();
        out.push(Competitor {
            kind: CompetitorKind::DualSecond,
            cube: tc.nodes[node].clone(),
            ratio: tc.ratios[2][node].unwrap(),
            f1: ind1,
            f2,
        });
    }
    out
}
