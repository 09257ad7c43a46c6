use super::optimize::weak_of;
use super::{lp_norm_raw, Instance};
use crate::geometry::{DyadicCube, Region};
use crate::measure::{conjugate, DiscreteMeasure, SimpleFunction};
use crate::operators::{eval_kernel, eval_sparse, Weighted};

/// `(∫_Q I^S(1_Q σ1, 1_Q f2 σ2)^q dw)^{1/q} / (σ1(Q)^{1/p1} ‖f2‖_{L^{p2}(σ2)})`,
/// zero when the denominator vanishes.
pub fn special_case_probe(inst: &Instance, cube: &DyadicCube, f2: &SimpleFunction) -> f64 {
    let e = inst.exponents;
    let den = inst.sigma1.mass_of(cube).powf(1.0 / e.p1) * lp_norm_raw(f2.values(), e.p2, &inst.sigma2);
    if den == 0.0 {
        return 0.0;
    }
    let g1 = SimpleFunction::indicator(&inst.sigma1, cube);
    let g2 = f2.restricted(&inst.sigma2, cube);
    let mut sum = 0.0;
    for atom in inst.w.atoms().iter().filter(|a| cube.contains(&a.point)) {
        let v = eval_sparse(
            &inst.params,
            &inst.family,
            Weighted::new(&g1, &inst.sigma1),
            Weighted::new(&g2, &inst.sigma2),
            &atom.point,
            None,
        );
        sum += atom.mass * v.powf(e.q);
    }
    sum.powf(1.0 / e.q) / den
}

/// `‖I_α(1 σ1, 1 σ2)‖_{L^q(w)} / (σ1(R)^{1/p1} σ2(R)^{1/p2})` for the kernel
/// operator itself; `+∞` when a `w`-atom sits on a common atom of `σ1` and `σ2`.
pub fn kernel_probe(inst: &Instance) -> f64 {
    let e = inst.exponents;
    let one1 = SimpleFunction::constant(inst.sigma1.len(), 1.0);
    let one2 = SimpleFunction::constant(inst.sigma2.len(), 1.0);
    let den = inst.sigma1.total_mass().powf(1.0 / e.p1) * inst.sigma2.total_mass().powf(1.0 / e.p2);
    if den == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for atom in inst.w.atoms() {
        let v = eval_kernel(
            &inst.params,
            Weighted::new(&one1, &inst.sigma1),
            Weighted::new(&one2, &inst.sigma2),
            &atom.point,
        );
        if v.is_infinite() {
            return f64::INFINITY;
        }
        sum += atom.mass * v.powf(e.q);
    }
    sum.powf(1.0 / e.q) / den
}

/// Both sides of the Kolmogorov inequality on the normalized measure
/// `ν = 1_Q w / w(Q)`: `(∫ g dν, q' ‖g‖_{L^{q,∞}(ν)})`. Zero when `w(Q) = 0`.
pub fn kolmogorov_sides<R: Region>(g: &SimpleFunction, w: &DiscreteMeasure, region: &R, q: f64) -> (f64, f64) {
    let mut values = Vec::new();
    let mut masses = Vec::new();
    for (v, a) in g.values().iter().zip(w.atoms()) {
        if region.contains_point(&a.point) {
            values.push(*v);
            masses.push(a.mass);
        }
    }
    let total: f64 = masses.iter().sum();
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let average = values.iter().zip(&masses).map(|(v, m)| v * m).sum::<f64>() / total;
    let nu = DiscreteMeasure::new(
        w.dim(),
        w.atoms()
            .iter()
            .filter(|a| region.contains_point(&a.point))
            .map(|a| crate::measure::Atom {
                point: a.point.clone(),
                mass: a.mass / total,
            })
            .collect(),
    )
    .expect("restriction of a valid measure");
    (average, conjugate(q) * weak_of(&values, q, &nu))
}
