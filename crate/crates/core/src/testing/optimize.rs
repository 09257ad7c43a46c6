use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::constants::{competitors, testing_constants_with, Competitor, CompetitorKind, TestingConstants};
use super::{lp_norm_raw, Engine, Instance};
use crate::measure::{weak_norm_of, DiscreteMeasure};
use crate::par;

/// Settings of the multi-start alternating ascent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Competitor pairs used as extra starting points.
    pub competitor_seeds: usize,
    /// Competitor pairs evaluated per testing constant.
    pub competitors_per_constant: usize,
    pub weak_iter: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 500,
            rel_tol: 1e-9,
            competitor_seeds: 4,
            competitors_per_constant: 8,
            weak_iter: 100,
        }
    }
}

/// A lower bound for a best constant together with the pair attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub source: String,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl NormEstimate {
    fn zero() -> Self {
        Self {
            value: 0.0,
            source: "none".into(),
            f1: Vec::new(),
            f2: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, source: impl FnOnce() -> String, f1: &[f64], f2: &[f64]) {
        if value > self.value {
            self.value = value;
            self.source = source();
            self.f1 = f1.to_vec();
            self.f2 = f2.to_vec();
        }
    }
}

/// Objective values of one competitor pair.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CompetitorEval {
    pub competitor: Competitor,
    pub strong: f64,
    pub weak: f64,
}

pub(crate) struct Estimates {
    pub strong: NormEstimate,
    pub weak: NormEstimate,
    pub competitors: Vec<CompetitorEval>,
}

fn normalized(mut f: Vec<f64>, p: f64, mu: &DiscreteMeasure) -> Option<Vec<f64>> {
    let norm = lp_norm_raw(&f, p, mu);
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    for v in &mut f {
        *v /= norm;
    }
    Some(f)
}

fn describe(c: &Competitor) -> String {
    let kind = match c.kind {
        CompetitorKind::Indicator => "indicator",
        CompetitorKind::DualFirst => "dual-first",
        CompetitorKind::DualSecond => "dual-second",
    };
    format!("{kind} {:?}", c.cube)
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    First,
    Second,
}

/// Ascent state for one start.
struct Ascent<'e, 'a> {
    engine: &'e Engine<'a>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

impl<'e, 'a> Ascent<'e, 'a> {
    fn p(&self, block: Block) -> f64 {
        let e = &self.engine.inst.exponents;
        match block {
            Block::First => e.p1,
            Block::Second => e.p2,
        }
    }

    fn mu(&self, block: Block) -> &DiscreteMeasure {
        match block {
            Block::First => &self.engine.inst.sigma1,
            Block::Second => &self.engine.inst.sigma2,
        }
    }

    fn current(&self, block: Block) -> &[f64] {
        match block {
            Block::First => &self.f1,
            Block::Second => &self.f2,
        }
    }

    fn with(&self, block: Block, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match block {
            Block::First => (f.to_vec(), self.f2.clone()),
            Block::Second => (self.f1.clone(), f.to_vec()),
        }
    }

    fn set(&mut self, block: Block, f: Vec<f64>) {
        match block {
            Block::First => self.f1 = f,
            Block::Second => self.f2 = f,
        }
    }

    /// `g_a / m_a = Σ_{P ∋ a} |P|-weight · (other slot)(P) · Σ_{x ∈ P} u_x`.
    fn direction(&self, block: Block, u: &[f64]) -> Vec<f64> {
        let eng = self.engine;
        let wu = eng.op.integrals(&eng.inc_w, u, &eng.inst.w);
        let (other, rows) = match block {
            Block::First => (eng.integrals2(&self.f2), &eng.inc1),
            Block::Second => (eng.integrals1(&self.f1), &eng.inc2),
        };
        let coef: Vec<f64> = (0..eng.op.len()).map(|j| eng.op.weight(j) * other[j] * wu[j]).collect();
        (0..rows.rows())
            .map(|i| rows.row(i).iter().map(|&j| coef[j as usize]).sum())
            .collect()
    }

    /// Replaces one block by an improving point if one is found; returns the new value.
    fn step(&mut self, block: Block, value: f64, u: &[f64], objective: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
        let p = self.p(block);
        let dir = self.direction(block, u);
        let power: Vec<f64> = dir.iter().map(|g| g.max(0.0).powf(1.0 / (p - 1.0))).collect();
        if let Some(cand) = normalized(power.clone(), p, self.mu(block)) {
            let (a, b) = self.with(block, &cand);
            let v = objective(&a, &b);
            if v > value {
                self.set(block, cand);
                return v;
            }
        }
        let cur = self.current(block).to_vec();
        let scale_f = cur.iter().copied().fold(0.0, f64::max);
        let scale_g = dir.iter().copied().fold(0.0, f64::max);
        if scale_g <= 0.0 {
            return value;
        }
        let mut eta = scale_f.max(1e-300) / scale_g;
        for _ in 0..12 {
            let stepped: Vec<f64> = cur.iter().zip(&dir).map(|(f, g)| (f + eta * g).max(0.0)).collect();
            if let Some(cand) = normalized(stepped, p, self.mu(block)) {
                let (a, b) = self.with(block, &cand);
                let v = objective(&a, &b);
                if v > value {
                    self.set(block, cand);
                    return v;
                }
            }
            eta *= 0.5;
        }
        value
    }
}

struct Outcome {
    value: f64,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

fn strong_ascent(engine: &Engine, f1: Vec<f64>, f2: Vec<f64>, cfg: &OptimizerConfig) -> Outcome {
    let e = engine.inst.exponents;
    let (Some(f1), Some(f2)) = (
        normalized(f1, e.p1, &engine.inst.sigma1),
        normalized(f2, e.p2, &engine.inst.sigma2),
    ) else {
        return Outcome { value: 0.0, f1: Vec::new(), f2: Vec::new() };
    };
    let objective = |a: &[f64], b: &[f64]| engine.strong(a, b);
    let mut state = Ascent { engine, f1, f2 };
    let mut value = objective(&state.f1, &state.f2);
    for _ in 0..cfg.max_iter {
        let old = value;
        for block in [Block::First, Block::Second] {
            let v = engine.values(&state.f1, &state.f2);
            let u: Vec<f64> = v.iter().map(|x| x.powf(e.q - 1.0)).collect();
            value = state.step(block, value, &u, &objective);
        }
        if value - old <= cfg.rel_tol * old {
            break;
        }
    }
    Outcome { value, f1: state.f1, f2: state.f2 }
}

/// Sensitivity weights of a soft minimum over the level set attaining the weak norm.
fn weak_weights(v: &[f64], w: &DiscreteMeasure, q: f64) -> Vec<f64> {
    let masses: Vec<f64> = w.atoms().iter().map(|a| a.mass).collect();
    let mut best = (0.0, 0.0);
    for &level in v {
        if level <= 0.0 {
            continue;
        }
        let mass: f64 = v.iter().zip(&masses).filter(|(x, _)| **x >= level).map(|(_, m)| m).sum();
        let val = level * mass.powf(1.0 / q);
        if val > best.0 {
            best = (val, level);
        }
    }
    let level = best.1;
    if level <= 0.0 {
        return vec![0.0; v.len()];
    }
    const SOFTNESS: i32 = 8;
    v.iter()
        .map(|&x| if x >= level { (x / level).powi(-SOFTNESS - 1) } else { 0.0 })
        .collect()
}

fn weak_ascent(engine: &Engine, f1: &[f64], f2: &[f64], cfg: &OptimizerConfig) -> Outcome {
    let e = engine.inst.exponents;
    let w = &engine.inst.w;
    let objective = |a: &[f64], b: &[f64]| engine.weak(a, b);
    let mut state = Ascent { engine, f1: f1.to_vec(), f2: f2.to_vec() };
    let mut value = objective(f1, f2);
    for _ in 0..cfg.weak_iter {
        let old = value;
        for block in [Block::First, Block::Second] {
            let v = engine.values(&state.f1, &state.f2);
            let u = weak_weights(&v, w, e.q);
            value = state.step(block, value, &u, &objective);
        }
        if value - old <= cfg.rel_tol * old {
            break;
        }
    }
    Outcome { value, f1: state.f1, f2: state.f2 }
}

fn random_start(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// All lower bounds for the strong and weak constants of one instance.
pub(crate) fn estimate_all(engine: &Engine, tc: &TestingConstants, cfg: &OptimizerConfig) -> Estimates {
    let inst = engine.inst;
    let e = inst.exponents;
    let mut strong = NormEstimate::zero();
    let mut weak = NormEstimate::zero();
    if inst.sigma1.is_empty() || inst.sigma2.is_empty() || inst.w.is_empty() {
        return Estimates { strong, weak, competitors: Vec::new() };
    }

    let evals: Vec<CompetitorEval> = competitors(engine, tc, cfg.competitors_per_constant)
        .into_iter()
        .map(|c| {
            let (s, w) = engine.both(&c.f1, &c.f2);
            CompetitorEval { competitor: c, strong: s, weak: w }
        })
        .collect();
    for c in &evals {
        strong.offer(c.strong, || describe(&c.competitor), &c.competitor.f1, &c.competitor.f2);
        weak.offer(c.weak, || describe(&c.competitor), &c.competitor.f1, &c.competitor.f2);
    }

    let mut by_strong: Vec<&CompetitorEval> = evals.iter().collect();
    by_strong.sort_by(|a, b| b.strong.total_cmp(&a.strong));
    let mut starts: Vec<(String, Vec<f64>, Vec<f64>)> = (0..cfg.restarts)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let f1 = random_start(inst.sigma1.len(), &mut rng);
            let f2 = random_start(inst.sigma2.len(), &mut rng);
            (format!("restart {r}"), f1, f2)
        })
        .collect();
    for c in by_strong.iter().take(cfg.competitor_seeds) {
        starts.push((format!("ascent from {}", describe(&c.competitor)), c.competitor.f1.clone(), c.competitor.f2.clone()));
    }
    let runs = par::map(&starts, |(_, f1, f2)| strong_ascent(engine, f1.clone(), f2.clone(), cfg));
    for ((label, _, _), run) in starts.iter().zip(&runs) {
        strong.offer(run.value, || label.clone(), &run.f1, &run.f2);
    }

    let mut weak_starts: Vec<(String, Vec<f64>, Vec<f64>)> = starts
        .iter()
        .zip(&runs)
        .filter(|(_, run)| !run.f1.is_empty())
        .map(|((label, _, _), run)| (format!("weak {label}"), run.f1.clone(), run.f2.clone()))
        .collect();
    let mut by_weak: Vec<&CompetitorEval> = evals.iter().collect();
    by_weak.sort_by(|a, b| b.weak.total_cmp(&a.weak));
    for c in by_weak.iter().take(cfg.competitor_seeds) {
        weak_starts.push((format!("weak ascent from {}", describe(&c.competitor)), c.competitor.f1.clone(), c.competitor.f2.clone()));
    }
    let weak_runs = par::map(&weak_starts, |(_, f1, f2)| weak_ascent(engine, f1, f2, cfg));
    for ((label, _, _), run) in weak_starts.iter().zip(&weak_runs) {
        weak.offer(run.value, || label.clone(), &run.f1, &run.f2);
    }

    // Kolmogorov: ∫_Q g dw <= q' w(Q)^{1/q'} ‖g‖_{L^{q,∞}(w)}, so localized ratios over q' bound N_weak.
    let kolmogorov = [
        (tc.equi, "localized average"),
        (tc.t1_star, "first dual form"),
        (tc.t2_star, "second dual form"),
    ];
    for (ratio, label) in kolmogorov {
        let bound = ratio / e.q_conj;
        if bound > weak.value {
            weak.value = bound;
            weak.source = format!("{label} / q'");
            weak.f1.clear();
            weak.f2.clear();
        }
    }
    // ‖g‖_{L^{q,∞}} <= ‖g‖_{L^q} pointwise in (f1, f2).
    if !weak.f1.is_empty() {
        let s = engine.strong(&weak.f1, &weak.f2);
        strong.offer(s, || format!("strong value at {}", weak.source), &weak.f1.clone(), &weak.f2.clone());
    }
    // Hölder: ∫_Q g dw <= w(Q)^{1/q'} ‖g‖_{L^q(w)}.
    if tc.equi > strong.value {
        strong.value = tc.equi;
        strong.source = "localized average".into();
        strong.f1.clear();
        strong.f2.clear();
    }
    Estimates { strong, weak, competitors: evals }
}

/// Certified lower bound for the best strong-type constant of `I^S`.
pub fn estimate_strong_norm(inst: &Instance, cfg: &OptimizerConfig) -> NormEstimate {
    let engine = Engine::new(inst);
    let tc = testing_constants_with(&engine);
    estimate_all(&engine, &tc, cfg).strong
}

/// Certified lower bound for the best weak-type constant of `I^S`.
pub fn estimate_weak_norm(inst: &Instance, cfg: &OptimizerConfig) -> NormEstimate {
    let engine = Engine::new(inst);
    let tc = testing_constants_with(&engine);
    estimate_all(&engine, &tc, cfg).weak
}

/// The weak norm of `values` against `w`, exposed for the probes.
pub(crate) fn weak_of(values: &[f64], q: f64, w: &DiscreteMeasure) -> f64 {
    weak_norm_of(values, q, w.atoms().iter().map(|a| a.mass))
}
