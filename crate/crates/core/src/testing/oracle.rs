use super::Instance;
use crate::error::InstanceError;
use crate::measure::DiscreteMeasure;
use crate::par;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const ORACLE_ATOM_LIMIT: usize = 3;

/// Grid maximum of the strong objective with a bracket for the true maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Largest objective on the grid of resolution `resolution`.
    pub value: f64,
    /// Upper bound for the true maximum.
    pub upper: f64,
    /// `upper - value`.
    pub gap: f64,
    pub resolution: usize,
    pub evaluations: u64,
}

/// All compositions of `total` into `parts` nonnegative integers, lexicographic.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for i in 0..=left {
            cur.push(i);
            rec(left - i, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Unit-sphere points `f_a = (i_a / (R m_a))^{1/p}` of `L^p(μ)`.
fn sphere_grid(mu: &DiscreteMeasure, p: f64, resolution: usize) -> Vec<Vec<f64>> {
    compositions(resolution, mu.len())
        .into_iter()
        .map(|c| {
            c.iter()
                .zip(mu.atoms())
                .map(|(&i, a)| (i as f64 / (resolution as f64 * a.mass)).powf(1.0 / p))
                .collect()
        })
        .collect()
}

/// `K[x][a][b] = Σ_{P ∈ S, P ∋ x, a, b} |P|-weight · m_a m_b`, from direct containment tests.
fn kernel_tensor(inst: &Instance) -> Vec<Vec<Vec<f64>>> {
    let cubes: Vec<_> = inst.family.cubes().collect();
    inst.w
        .atoms()
        .iter()
        .map(|x| {
            let around: Vec<_> = cubes.iter().filter(|c| c.contains(&x.point)).collect();
            inst.sigma1
                .atoms()
                .iter()
                .map(|a| {
                    inst.sigma2
                        .atoms()
                        .iter()
                        .map(|b| {
                            around
                                .iter()
                                .filter(|c| c.contains(&a.point) && c.contains(&b.point))
                                .map(|c| inst.params.weight(c.scale))
                                .sum::<f64>()
                                * a.mass
                                * b.mass
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn grid_max(inst: &Instance, k: &[Vec<Vec<f64>>], r1: usize, r2: usize) -> (f64, u64) {
    let e = inst.exponents;
    let g1 = sphere_grid(&inst.sigma1, e.p1, r1);
    let g2 = sphere_grid(&inst.sigma2, e.p2, r2);
    let masses: Vec<f64> = inst.w.atoms().iter().map(|a| a.mass).collect();
    let q = e.q;
    let best = par::map(&g2, |f2| {
        let u: Vec<Vec<f64>> = k
            .iter()
            .map(|kx| kx.iter().map(|row| row.iter().zip(f2).map(|(c, f)| c * f).sum()).collect())
            .collect();
        let mut best = 0.0f64;
        for f1 in &g1 {
            let mut total = 0.0;
            for (ux, m) in u.iter().zip(&masses) {
                let v: f64 = ux.iter().zip(f1).map(|(c, f)| c * f).sum();
                total += m * if q == 2.0 { v * v } else { v.powf(q) };
            }
            best = best.max(total);
        }
        best
    });
    let top = best.into_iter().fold(0.0, f64::max);
    (top.powf(1.0 / q), (g1.len() * g2.len()) as u64)
}

/// Exhaustive grid search of `‖I^S(f1 σ1, f2 σ2)‖_{L^q(w)}` over unit-norm
/// nonnegative pairs, for measures with at most [`ORACLE_ATOM_LIMIT`] atoms.
///
/// Rounding each coordinate share up to the grid and padding keeps the
/// objective from decreasing (it is monotone in `f`), so the true maximum is
/// at most `((R + d1 - 1)/R)^{1/p1} ((R + d2 - 1)/R)^{1/p2}` times the grid
/// maximum at resolutions `R + d_i - 1`.
pub fn exhaustive_norm_oracle(inst: &Instance, resolution: usize) -> Result<OracleResult, InstanceError> {
    for mu in [&inst.sigma1, &inst.sigma2] {
        if mu.len() > ORACLE_ATOM_LIMIT {
            return Err(InstanceError::OracleTooLarge {
                limit: ORACLE_ATOM_LIMIT,
                found: mu.len(),
            });
        }
    }
    let resolution = resolution.max(1);
    let (d1, d2) = (inst.sigma1.len(), inst.sigma2.len());
    if d1 == 0 || d2 == 0 || inst.w.is_empty() {
        return Ok(OracleResult {
            value: 0.0,
            upper: 0.0,
            gap: 0.0,
            resolution,
            evaluations: 0,
        });
    }
    let k = kernel_tensor(inst);
    let (value, n0) = grid_max(inst, &k, resolution, resolution);
    let (r1, r2) = (resolution + d1 - 1, resolution + d2 - 1);
    let (coarse_up, n1) = if (r1, r2) == (resolution, resolution) {
        (value, 0)
    } else {
        grid_max(inst, &k, r1, r2)
    };
    let e = inst.exponents;
    let factor = (r1 as f64 / resolution as f64).powf(1.0 / e.p1) * (r2 as f64 / resolution as f64).powf(1.0 / e.p2);
    let upper = (factor * coarse_up).max(value);
    Ok(OracleResult {
        value,
        upper,
        gap: upper - value,
        resolution,
        evaluations: n0 + n1,
    })
}
