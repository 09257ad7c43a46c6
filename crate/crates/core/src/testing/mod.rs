//! Testing constants, norm-constant estimation and end-to-end verification.
//!
//! Every quantity here is computed for the sparse operator `I^S` of an
//! [`Instance`]. [`Engine`] caches the atom-to-cube incidences so that a full
//! operator evaluation is a pair of sparse sweeps.

mod constants;
mod optimize;
mod oracle;
mod probe;
mod report;

pub use constants::{testing_constants, Competitor, CompetitorKind, TestingConstants};
pub use optimize::{estimate_strong_norm, estimate_weak_norm, NormEstimate, OptimizerConfig};
pub use oracle::{exhaustive_norm_oracle, OracleResult, DEFAULT_RESOLUTION, ORACLE_ATOM_LIMIT};
pub use probe::{kernel_probe, kolmogorov_sides, special_case_probe};
pub use report::{verify_theorem, verify_with, Checks, ReportProvenance, VerificationReport, VerifyOptions, Violation, ABS_TOL, REL_TOL};

use crate::error::{InstanceError, OperatorError, SparseError};
use crate::measure::{weak_norm_of, DiscreteMeasure, ExponentTuple, SimpleFunction};
use crate::operators::{
    Incidence, OperatorParams, SparseOperator, TruncationWindow, Weighted, DEFAULT_K_MAX, DEFAULT_K_MIN,
};
use crate::sparse::{build_sparse, SparseFamily};
use crate::decomposition::DEFAULT_DELTA;

/// A complete verification problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub params: OperatorParams,
    pub exponents: ExponentTuple,
    pub sigma1: DiscreteMeasure,
    pub sigma2: DiscreteMeasure,
    pub w: DiscreteMeasure,
    pub window: TruncationWindow,
    pub family: SparseFamily,
    /// `true` when `family` came from [`build_sparse`] rather than the caller.
    pub family_built: bool,
    pub seed: Option<u64>,
    pub delta: f64,
}

impl Instance {
    /// Assembles an instance. Without a window, the enclosing window of the
    /// standard grid with the default scales is used; without a family, one
    /// is built from `f1 = f2 = 1`.
    pub fn new(
        params: OperatorParams,
        exponents: ExponentTuple,
        sigma1: DiscreteMeasure,
        sigma2: DiscreteMeasure,
        w: DiscreteMeasure,
        window: Option<TruncationWindow>,
        family: Option<SparseFamily>,
    ) -> Result<Self, InstanceError> {
        for mu in [&sigma1, &sigma2, &w] {
            if mu.dim() != params.dim {
                return Err(OperatorError::Dimension {
                    expected: params.dim,
                    found: mu.dim(),
                }
                .into());
            }
        }
        let all = || sigma1.points().chain(sigma2.points()).chain(w.points());
        let window = match window {
            Some(win) => win,
            None => TruncationWindow::enclosing(
                &crate::geometry::GridShift::zero(params.dim),
                all(),
                DEFAULT_K_MIN,
                DEFAULT_K_MAX,
            )?,
        };
        if window.root.dim() != params.dim {
            return Err(OperatorError::Dimension {
                expected: params.dim,
                found: window.root.dim(),
            }
            .into());
        }
        if let Some(p) = all().find(|p| !window.contains_point(p)) {
            let coords: Vec<String> = p.iter().map(crate::geometry::format_rational).collect();
            return Err(OperatorError::OutsideWindow(format!("({})", coords.join(", "))).into());
        }
        let (family, family_built) = match family {
            Some(s) => {
                if let Some(bad) = s.cubes().find(|c| !window.admits(c)) {
                    return Err(SparseError::OutsideWindow(bad.clone()).into());
                }
                (s, false)
            }
            None => {
                let one1 = SimpleFunction::constant(sigma1.len(), 1.0);
                let one2 = SimpleFunction::constant(sigma2.len(), 1.0);
                let s = build_sparse(
                    &params,
                    &window,
                    Weighted::new(&one1, &sigma1),
                    Weighted::new(&one2, &sigma2),
                )?;
                (s, true)
            }
        };
        Ok(Self {
            params,
            exponents,
            sigma1,
            sigma2,
            w,
            window,
            family,
            family_built,
            seed: None,
            delta: DEFAULT_DELTA,
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, InstanceError> {
        if !(0.0..1.0).contains(&delta) {
            return Err(InstanceError::BadDelta(delta));
        }
        self.delta = delta;
        Ok(self)
    }

    /// The same instance with `w` replaced.
    pub fn with_w(&self, w: DiscreteMeasure) -> Result<Self, InstanceError> {
        self.rebuilt(self.sigma1.clone(), self.sigma2.clone(), w)
    }

    /// The same instance with `σ1` replaced; a built family is rebuilt.
    pub fn with_sigma1(&self, sigma1: DiscreteMeasure) -> Result<Self, InstanceError> {
        self.rebuilt(sigma1, self.sigma2.clone(), self.w.clone())
    }

    fn rebuilt(&self, sigma1: DiscreteMeasure, sigma2: DiscreteMeasure, w: DiscreteMeasure) -> Result<Self, InstanceError> {
        let family = (!self.family_built).then(|| self.family.clone());
        let mut out = Self::new(self.params, self.exponents, sigma1, sigma2, w, Some(self.window.clone()), family)?;
        out.seed = self.seed;
        out.delta = self.delta;
        Ok(out)
    }
}

/// Cached incidences of an instance's sparse operator.
#[derive(Clone, Debug)]
pub struct Engine<'a> {
    pub inst: &'a Instance,
    pub op: SparseOperator,
    pub inc1: Incidence,
    pub inc2: Incidence,
    pub inc_w: Incidence,
}

impl<'a> Engine<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let op = SparseOperator::new(&inst.params, &inst.family, None);
        Self {
            inc1: op.incidence(&inst.sigma1),
            inc2: op.incidence(&inst.sigma2),
            inc_w: op.incidence(&inst.w),
            op,
            inst,
        }
    }

    pub fn integrals1(&self, f1: &[f64]) -> Vec<f64> {
        self.op.integrals(&self.inc1, f1, &self.inst.sigma1)
    }

    pub fn integrals2(&self, f2: &[f64]) -> Vec<f64> {
        self.op.integrals(&self.inc2, f2, &self.inst.sigma2)
    }

    pub fn integrals_w(&self, g: &[f64]) -> Vec<f64> {
        self.op.integrals(&self.inc_w, g, &self.inst.w)
    }

    /// `I^S(f1 σ1, f2 σ2)` at the atoms of `w`.
    pub fn values(&self, f1: &[f64], f2: &[f64]) -> Vec<f64> {
        self.op.values(&self.inc_w, &self.integrals1(f1), &self.integrals2(f2))
    }

    fn norms(&self, f1: &[f64], f2: &[f64]) -> f64 {
        let e = &self.inst.exponents;
        lp_norm_raw(f1, e.p1, &self.inst.sigma1) * lp_norm_raw(f2, e.p2, &self.inst.sigma2)
    }

    /// `‖I^S(f1 σ1, f2 σ2)‖_{L^q(w)} / (‖f1‖_{p1} ‖f2‖_{p2})`, zero when a norm vanishes.
    pub fn strong(&self, f1: &[f64], f2: &[f64]) -> f64 {
        let den = self.norms(f1, f2);
        if den == 0.0 {
            return 0.0;
        }
        lq_raw(&self.values(f1, f2), self.inst.exponents.q, &self.inst.w) / den
    }

    /// The weak-type analogue of [`Engine::strong`].
    pub fn weak(&self, f1: &[f64], f2: &[f64]) -> f64 {
        let den = self.norms(f1, f2);
        if den == 0.0 {
            return 0.0;
        }
        let v = self.values(f1, f2);
        weak_norm_of(&v, self.inst.exponents.q, self.inst.w.atoms().iter().map(|a| a.mass)) / den
    }

    /// Both objectives from one evaluation.
    pub fn both(&self, f1: &[f64], f2: &[f64]) -> (f64, f64) {
        let den = self.norms(f1, f2);
        if den == 0.0 {
            return (0.0, 0.0);
        }
        let v = self.values(f1, f2);
        let q = self.inst.exponents.q;
        let weak = weak_norm_of(&v, q, self.inst.w.atoms().iter().map(|a| a.mass));
        (lq_raw(&v, q, &self.inst.w) / den, weak / den)
    }
}

pub(crate) fn lp_norm_raw(f: &[f64], p: f64, mu: &DiscreteMeasure) -> f64 {
    let mut sum = 0.0;
    for (v, a) in f.iter().zip(mu.atoms()) {
        if *v > 0.0 {
            sum += v.powf(p) * a.mass;
        }
    }
    sum.powf(1.0 / p)
}

pub(crate) fn lq_raw(v: &[f64], q: f64, w: &DiscreteMeasure) -> f64 {
    lp_norm_raw(v, q, w)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::geometry::{DyadicCube, GridShift, Rational};
    use crate::measure::Atom;

    pub fn unit_atom(a: i128, b: i128) -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![Atom { point: vec![Rational::new(a, b)], mass: 1.0 }]).unwrap()
    }

    /// `σ1 = σ2 = δ_{1/10}`, `w = δ_{3/10}`, `S = {[0,1), [0,1/2)}`, `n = α = 1`, `p = q = 2`.
    pub fn single_atom() -> Instance {
        let params = OperatorParams::new(1, 1.0).unwrap();
        let exps = ExponentTuple::validate(2.0, 2.0, 2.0).unwrap();
        let zero = GridShift::zero(1);
        let window = TruncationWindow::new(0, 1, DyadicCube::new(0, &[0], zero.clone())).unwrap();
        let family = SparseFamily::new([DyadicCube::new(0, &[0], zero.clone()), DyadicCube::new(1, &[0], zero)]).unwrap();
        Instance::new(params, exps, unit_atom(1, 10), unit_atom(1, 10), unit_atom(3, 10), Some(window), Some(family)).unwrap()
    }
}
