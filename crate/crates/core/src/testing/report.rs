use serde::{Deserialize, Serialize};

use super::constants::{testing_constants_with, CompetitorKind};
use super::optimize::estimate_all;
use super::{exhaustive_norm_oracle, kernel_probe, special_case_probe, Engine, Instance, OptimizerConfig};
use crate::calibration::c_dom;
use crate::decomposition::{check_maximum_principle, level_sets};
use crate::geometry::DyadicCube;
use crate::measure::SimpleFunction;
use crate::operators::{Weighted, WindowTree};
use crate::sparse::verify_sparsity;

/// Relative tolerance of the certified comparisons.
pub const REL_TOL: f64 = 1e-9;
/// Absolute tolerance of the certified comparisons.
pub const ABS_TOL: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + REL_TOL) + ABS_TOL
}

/// Extra work requested from [`verify_with`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    /// Run the exhaustive oracle at this resolution.
    pub oracle_resolution: Option<usize>,
}

/// A failed certified check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Sparsity {
        cube: Option<DyadicCube>,
        #[serde(with = "crate::num")]
        ratio: f64,
    },
    Necessity {
        constant: String,
        #[serde(with = "crate::num")]
        value: f64,
        #[serde(with = "crate::num")]
        bound: f64,
    },
    Competitor {
        constant: String,
        cube: DyadicCube,
        #[serde(with = "crate::num")]
        ratio: f64,
        #[serde(with = "crate::num")]
        objective: f64,
    },
    WeakAboveStrong {
        #[serde(with = "crate::num")]
        weak: f64,
        #[serde(with = "crate::num")]
        strong: f64,
    },
    MaximumPrinciple {
        detail: String,
    },
    Domination {
        atom: usize,
        #[serde(with = "crate::num")]
        ratio: f64,
        #[serde(with = "crate::num")]
        bound: f64,
    },
}

/// Outcome of each certified check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    /// `T <= N_lower`.
    pub necessity_strong: bool,
    /// `T1*, T2* <= N_lower`.
    pub necessity_dual_strong: bool,
    /// `T1*, T2* <= q' · Nweak_lower`.
    pub necessity_dual_weak: bool,
    /// Every competitor's objective dominates the testing ratio it realizes.
    pub competitors: bool,
    pub weak_below_strong: bool,
    pub sparsity: bool,
    pub maximum_principle: bool,
    /// `I^D <= C_dom · I^S` at the atoms of `w` for `f1 = f2 = 1`; only for built families.
    pub domination: Option<bool>,
    /// `|N_lower - N_exhaustive| <= gap`; informative, not certified.
    pub oracle_agreement: Option<bool>,
}

/// Window and settings a report was produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub seed: Option<u64>,
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub root: DyadicCube,
    pub family_size: usize,
    pub family_built: bool,
    pub cubes_examined: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub optimizer: OptimizerConfig,
}

/// Constants of one instance and the status of every certified check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(with = "crate::num")]
    pub t: f64,
    #[serde(with = "crate::num")]
    pub t1_star: f64,
    #[serde(with = "crate::num")]
    pub t2_star: f64,
    pub t_cube: Option<DyadicCube>,
    pub t1_cube: Option<DyadicCube>,
    pub t2_cube: Option<DyadicCube>,
    #[serde(with = "crate::num")]
    pub n_lower: f64,
    pub n_lower_source: String,
    #[serde(with = "crate::num")]
    pub nweak_lower: f64,
    pub nweak_source: String,
    #[serde(with = "crate::num::opt")]
    pub n_exhaustive: Option<f64>,
    #[serde(with = "crate::num::opt")]
    pub oracle_gap: Option<f64>,
    #[serde(with = "crate::num")]
    pub equi_max: f64,
    #[serde(with = "crate::num::opt")]
    pub ratio_strong: Option<f64>,
    #[serde(with = "crate::num::opt")]
    pub ratio_weak: Option<f64>,
    /// Localized probe at the `T` cube with `f2 = 1`, and its ratio to `T + T2*`.
    #[serde(with = "crate::num::opt")]
    pub special_case: Option<f64>,
    #[serde(with = "crate::num::opt")]
    pub special_case_ratio: Option<f64>,
    /// `‖I_α(σ1, σ2)‖_{L^q(w)} / (σ1(R)^{1/p1} σ2(R)^{1/p2})` for the kernel operator.
    #[serde(with = "crate::num")]
    pub kernel_probe: f64,
    #[serde(with = "crate::num::opt")]
    pub domination_max: Option<f64>,
    #[serde(with = "crate::num")]
    pub c_dom: f64,
    pub sparsity_worst: String,
    pub levels: usize,
    pub singular: bool,
    pub exhaustive_used: bool,
    pub ratios_defined: bool,
    pub checks: Checks,
    pub violations: Vec<Violation>,
    pub provenance: ReportProvenance,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// [`verify_with`] using the default optimizer and no oracle.
pub fn verify_theorem(inst: &Instance) -> VerificationReport {
    let cfg = OptimizerConfig {
        seed: inst.seed.unwrap_or(0),
        ..OptimizerConfig::default()
    };
    verify_with(inst, &cfg, &VerifyOptions::default())
}

/// Computes all constants of `inst` and checks every certified relation.
pub fn verify_with(inst: &Instance, cfg: &OptimizerConfig, opts: &VerifyOptions) -> VerificationReport {
    let e = inst.exponents;
    let engine = Engine::new(inst);
    let tc = testing_constants_with(&engine);
    let est = estimate_all(&engine, &tc, cfg);
    let (n_lower, nweak) = (est.strong.value, est.weak.value);
    let mut violations = Vec::new();
    let mut checks = Checks::default();

    let sparsity = verify_sparsity(&inst.family);
    checks.sparsity = sparsity.holds;
    if !sparsity.holds {
        violations.push(Violation::Sparsity {
            cube: sparsity.worst_cube.clone(),
            ratio: sparsity.worst_f64(),
        });
    }

    let mut necessity = |name: &str, value: f64, bound: f64, flag: &mut bool| {
        let ok = le(value, bound);
        *flag = ok;
        if !ok {
            violations.push(Violation::Necessity {
                constant: name.into(),
                value,
                bound,
            });
        }
    };
    let mut strong_ok = true;
    necessity("T", tc.t, n_lower, &mut strong_ok);
    checks.necessity_strong = strong_ok;
    let (mut d1, mut d2) = (true, true);
    necessity("T1*", tc.t1_star, n_lower, &mut d1);
    necessity("T2*", tc.t2_star, n_lower, &mut d2);
    checks.necessity_dual_strong = d1 && d2;
    let (mut w1, mut w2) = (true, true);
    necessity("T1* (weak)", tc.t1_star, e.q_conj * nweak, &mut w1);
    necessity("T2* (weak)", tc.t2_star, e.q_conj * nweak, &mut w2);
    checks.necessity_dual_weak = w1 && w2;

    checks.competitors = true;
    for c in &est.competitors {
        let comp = &c.competitor;
        let name = match comp.kind {
            CompetitorKind::Indicator => "T",
            CompetitorKind::DualFirst => "T1*",
            CompetitorKind::DualSecond => "T2*",
        };
        let mut bounds = vec![c.strong];
        if comp.kind != CompetitorKind::Indicator {
            bounds.push(e.q_conj * c.weak);
        }
        for objective in bounds {
            if !le(comp.ratio, objective) {
                checks.competitors = false;
                violations.push(Violation::Competitor {
                    constant: name.into(),
                    cube: comp.cube.clone(),
                    ratio: comp.ratio,
                    objective,
                });
            }
        }
    }

    checks.weak_below_strong = le(nweak, n_lower);
    if !checks.weak_below_strong {
        violations.push(Violation::WeakAboveStrong { weak: nweak, strong: n_lower });
    }

    let one1 = SimpleFunction::constant(inst.sigma1.len(), 1.0);
    let one2 = SimpleFunction::constant(inst.sigma2.len(), 1.0);
    let first = Weighted::new(&one1, &inst.sigma1);
    let second = Weighted::new(&one2, &inst.sigma2);
    let decomp = level_sets(&inst.params, &inst.family, &inst.window.root, first, second, &inst.w, inst.delta)
        .expect("instance delta is validated");
    let principle = check_maximum_principle(&decomp, &inst.params, &inst.family, first, second, &inst.w);
    checks.maximum_principle = principle.is_ok()
        && decomp.exceptional_sets_disjoint(0)
        && decomp.exceptional_sets_disjoint(1)
        && decomp.exceptional_mass_bounded()
        && decomp.kappa_consistent();
    if let Err(v) = principle {
        violations.push(Violation::MaximumPrinciple { detail: v.to_string() });
    } else if !checks.maximum_principle {
        violations.push(Violation::MaximumPrinciple {
            detail: "exceptional sets overlap or exceed their level set".into(),
        });
    }

    let bound = c_dom(inst.params.dim, inst.params.alpha);
    let mut domination_max = None;
    if inst.family_built {
        let (tree, inc) = WindowTree::new(&inst.window, &[&inst.sigma1, &inst.sigma2, &inst.w]);
        let a = tree.integrals(&inc[0], &vec![1.0; inst.sigma1.len()], &inst.sigma1);
        let b = tree.integrals(&inc[1], &vec![1.0; inst.sigma2.len()], &inst.sigma2);
        let dyadic = tree.dyadic_values(&inst.params, &inc[2], &a, &b);
        let sparse = engine.values(one1.values(), one2.values());
        let mut worst = 0.0f64;
        let mut ok = true;
        for (i, (d, s)) in dyadic.iter().zip(&sparse).enumerate() {
            if *d == 0.0 {
                continue;
            }
            let ratio = d / s;
            worst = worst.max(ratio);
            if !le(ratio, bound) {
                ok = false;
                violations.push(Violation::Domination { atom: i, ratio, bound });
            }
        }
        domination_max = Some(worst);
        checks.domination = Some(ok);
    }

    let (n_exhaustive, oracle_gap) = match opts.oracle_resolution {
        Some(res) => match exhaustive_norm_oracle(inst, res) {
            Ok(r) => {
                checks.oracle_agreement = Some((n_lower - r.value).abs() <= r.gap * (1.0 + REL_TOL) + ABS_TOL);
                (Some(r.value), Some(r.gap))
            }
            Err(_) => (None, None),
        },
        None => (None, None),
    };

    let (special_case, special_case_ratio) = match &tc.t_cube {
        Some(cube) => {
            let v = special_case_probe(inst, cube, &SimpleFunction::constant(inst.sigma2.len(), 1.0));
            let den = tc.t + tc.t2_star;
            (Some(v), (den > 0.0).then(|| v / den))
        }
        None => (None, None),
    };
    let probe = kernel_probe(inst);
    let ratios_defined = tc.sum() > 0.0 && tc.dual_sum() > 0.0;

    VerificationReport {
        t: tc.t,
        t1_star: tc.t1_star,
        t2_star: tc.t2_star,
        t_cube: tc.t_cube.clone(),
        t1_cube: tc.t1_cube.clone(),
        t2_cube: tc.t2_cube.clone(),
        n_lower,
        n_lower_source: est.strong.source,
        nweak_lower: nweak,
        nweak_source: est.weak.source,
        n_exhaustive,
        oracle_gap,
        equi_max: tc.equi,
        ratio_strong: (tc.sum() > 0.0).then(|| n_lower / tc.sum()),
        ratio_weak: (tc.dual_sum() > 0.0).then(|| nweak / tc.dual_sum()),
        special_case,
        special_case_ratio,
        kernel_probe: probe,
        domination_max,
        c_dom: bound,
        sparsity_worst: sparsity.worst.to_string(),
        levels: decomp.levels.len(),
        singular: probe.is_infinite(),
        exhaustive_used: n_exhaustive.is_some(),
        ratios_defined,
        checks,
        violations,
        provenance: ReportProvenance {
            seed: inst.seed,
            delta: inst.delta,
            k_min: inst.window.k_min,
            k_max: inst.window.k_max,
            root: inst.window.root.clone(),
            family_size: inst.family.len(),
            family_built: inst.family_built,
            cubes_examined: tc.cubes_examined,
            rel_tol: REL_TOL,
            abs_tol: ABS_TOL,
            optimizer: cfg.clone(),
        },
    }
}
