//! Derived and calibrated comparison constants.
//!
//! `C1` and `C_dom` are closed forms. `C2` is the worst case over every point
//! configuration the generator can produce; `R_max` is measured over a declared
//! batch of generated instances. Both are frozen in the tables below and the
//! `calibrate` subcommand of the CLI regenerates them.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::generate::COORD_DENOM;
use crate::geometry::{grid_index, GridShift, Rational};
use crate::generate::{gen_instance, GenSpec};
use crate::measure::SimpleFunction;
use crate::operators::{eval_dyadic, eval_kernel, TruncationWindow, Weighted, DEFAULT_K_MAX, DEFAULT_K_MIN};
use crate::par;
use crate::testing::{verify_with, Instance, OptimizerConfig, VerifyOptions};

/// Seeds of the declared calibration batch.
pub const CALIBRATION_SEEDS: Range<u64> = 0..500;
/// Atom count per measure used to freeze `R_max`.
pub const CALIBRATION_ATOMS: usize = 4;
/// Allowed growth of the ratio maxima over `R_max` at larger atom counts.
pub const R_MAX_INFLATION: f64 = 1.25;

/// Dimension/order pairs covered by the frozen tables.
pub const ORDERS: [(usize, f64); 4] = [(1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0)];
/// Exponent triples `(p1, p2, q)` covered by the frozen tables.
pub const EXPONENTS: [(f64, f64, f64); 3] = [(2.0, 2.0, 2.0), (1.5, 3.0, 3.0), (2.0, 2.0, 4.0)];

/// `(2√n)^{2n-α} / (1 - 2^{α-2n})`: `I^D_t <= C1 · I_α` pointwise.
pub fn c1(dim: usize, alpha: f64) -> f64 {
    let e = 2.0 * dim as f64 - alpha;
    (2.0 * (dim as f64).sqrt()).powf(e) / (1.0 - (-e).exp2())
}

/// `a / (1 - 2^{-α})` with `a = 2^{2(n+1)}`: `I^D <= C_dom · I^S` for a built family.
pub fn c_dom(dim: usize, alpha: f64) -> f64 {
    crate::sparse::stopping_ratio(dim) / (1.0 - (-alpha).exp2())
}

/// `(6(1 + 2^{-20}))^{2n-α}`, an upper bound for `C2` on generated instances:
/// the three points `x, y1, y2` fit in an axis cube of side at most
/// `|x - y1| + |x - y2|`, which some shifted grid covers with a cube of side at most six times larger.
pub fn c2_bound(dim: usize, alpha: f64) -> f64 {
    (6.0 * (1.0 + 2f64.powi(-20))).powf(2.0 * dim as f64 - alpha)
}

/// Frozen `C2`, or `None` outside the calibrated pairs.
pub fn c2(dim: usize, alpha: f64) -> Option<f64> {
    FROZEN_C2.iter().find(|(n, a, _)| *n == dim && *a == alpha).map(|x| x.2)
}

/// Frozen `(R_max strong, R_max weak)`, or `None` outside the calibrated configurations.
pub fn r_max(dim: usize, alpha: f64, p1: f64, p2: f64, q: f64) -> Option<(f64, f64)> {
    FROZEN_R_MAX
        .iter()
        .find(|r| r.0 == dim && r.1 == alpha && r.2 == p1 && r.3 == p2 && r.4 == q)
        .map(|r| (r.5, r.6))
}

// Regenerate with `bifrac calibrate --rust`: C2 from the lattice sweep, R_max
// from seeds 0..500 with 4 atoms per measure.
const FROZEN_C2: [(usize, f64, f64); 4] = [
    (1, 0.5, 10.4),
    (1, 1.0, 3.77),
    (2, 0.5, 472.0),
    (2, 1.0, 187.0),
];

#[allow(clippy::type_complexity)]
const FROZEN_R_MAX: [(usize, f64, f64, f64, f64, f64, f64); 12] = [
    (1, 0.5, 2.0, 2.0, 2.0, 0.399, 0.511),
    (1, 0.5, 1.5, 3.0, 3.0, 0.385, 0.522),
    (1, 0.5, 2.0, 2.0, 4.0, 0.369, 0.513),
    (1, 1.0, 2.0, 2.0, 2.0, 0.392, 0.537),
    (1, 1.0, 1.5, 3.0, 3.0, 0.399, 0.585),
    (1, 1.0, 2.0, 2.0, 4.0, 0.369, 0.544),
    (2, 0.5, 2.0, 2.0, 2.0, 0.403, 0.504),
    (2, 0.5, 1.5, 3.0, 3.0, 0.371, 0.514),
    (2, 0.5, 2.0, 2.0, 4.0, 0.337, 0.504),
    (2, 1.0, 2.0, 2.0, 2.0, 0.399, 0.507),
    (2, 1.0, 1.5, 3.0, 3.0, 0.38, 0.516),
    (2, 1.0, 2.0, 2.0, 4.0, 0.348, 0.508),
];

/// Constants in force for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    #[serde(with = "crate::num::opt")]
    pub c2: Option<f64>,
    pub c2_bound: f64,
    pub c_dom: f64,
    #[serde(with = "crate::num::opt")]
    pub r_max_strong: Option<f64>,
    #[serde(with = "crate::num::opt")]
    pub r_max_weak: Option<f64>,
}

impl Constants {
    pub fn for_config(dim: usize, alpha: f64, p1: f64, p2: f64, q: f64) -> Self {
        let r = r_max(dim, alpha, p1, p2, q);
        Self {
            c1: c1(dim, alpha),
            c2: c2(dim, alpha),
            c2_bound: c2_bound(dim, alpha),
            c_dom: c_dom(dim, alpha),
            r_max_strong: r.map(|r| r.0),
            r_max_weak: r.map(|r| r.1),
        }
    }
}

/// Pointwise comparison of the kernel with its dyadic models at the atoms of `w`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointwiseRatios {
    /// `max_t max_x I^D_t(x) / I_α(x)`.
    pub upper: f64,
    /// `max_x I_α(x) / Σ_t I^D_t(x)`.
    pub lower: f64,
}

/// Evaluates both pointwise ratios for the generated instance of `spec`, with
/// `f1 = f2 = 1` and the enclosing default window of each shifted grid.
pub fn pointwise_ratios(spec: &GenSpec) -> PointwiseRatios {
    let file = gen_instance(spec).expect("calibration specs use valid exponents");
    pointwise_ratios_of(&file.to_instance().expect("generated instances are valid"))
}

/// [`pointwise_ratios`] for a given instance; its window is ignored.
pub fn pointwise_ratios_of(inst: &Instance) -> PointwiseRatios {
    let params = inst.params;
    let one1 = SimpleFunction::constant(inst.sigma1.len(), 1.0);
    let one2 = SimpleFunction::constant(inst.sigma2.len(), 1.0);
    let a = || Weighted::new(&one1, &inst.sigma1);
    let b = || Weighted::new(&one2, &inst.sigma2);
    let windows: Vec<TruncationWindow> = GridShift::all(params.dim)
        .iter()
        .map(|t| {
            let pts = inst.sigma1.points().chain(inst.sigma2.points()).chain(inst.w.points());
            TruncationWindow::enclosing(t, pts, DEFAULT_K_MIN, DEFAULT_K_MAX).expect("atoms lie in a bounded box")
        })
        .collect();
    let mut out = PointwiseRatios::default();
    for x in inst.w.points() {
        let kernel = eval_kernel(&params, a(), b(), x);
        let mut total = 0.0;
        for win in &windows {
            let d = eval_dyadic(&params, win, a(), b(), x);
            out.upper = out.upper.max(d / kernel);
            total += d;
        }
        out.lower = out.lower.max(kernel / total);
    }
    out
}

/// Generation settings of the calibration batch for one order.
pub fn pointwise_spec(seed: u64, dim: usize, alpha: f64) -> GenSpec {
    GenSpec {
        atoms: [CALIBRATION_ATOMS; 3],
        ..GenSpec::new(seed, dim, alpha)
    }
}

/// Largest `I_α / Σ_t I^D_t` over the declared batch.
pub fn sampled_c2(dim: usize, alpha: f64, seeds: Range<u64>) -> f64 {
    let seeds: Vec<u64> = seeds.collect();
    par::map(&seeds, |&s| pointwise_ratios(&pointwise_spec(s, dim, alpha)).lower)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Finest scale at most `k_max` whose cell of the one-dimensional grid
/// contains both `lo` and `hi`.
fn finest_common_scale(lo: &Rational, hi: &Rational, third: bool, k_max: i32) -> i32 {
    let mut k = k_max;
    while grid_index(lo, k, third) != grid_index(hi, k, third) {
        k -= 1;
    }
    k
}

/// Finest common scales `(standard grid, third grid)` of an interval and its start, in lattice units.
type IntervalClass = (i32, i32, usize);

/// Per side length (in lattice units), the componentwise-minimal pairs of
/// finest common scales over all placements in `[0, 1)`.
fn interval_classes(k_max: i32) -> Vec<Vec<IntervalClass>> {
    let cells = COORD_DENOM as usize;
    let lengths: Vec<usize> = (0..cells).collect();
    par::map(&lengths, |&len| {
        if len == 0 {
            return vec![(k_max, k_max, 0)];
        }
        let mut front: Vec<IntervalClass> = Vec::new();
        for start in 0..cells - len {
            let lo = Rational::new(start as i128, COORD_DENOM);
            let hi = Rational::new((start + len) as i128, COORD_DENOM);
            let (k0, k1) = (finest_common_scale(&lo, &hi, false, k_max), finest_common_scale(&lo, &hi, true, k_max));
            if front.iter().any(|f| f.0 <= k0 && f.1 <= k1) {
                continue;
            }
            front.retain(|f| !(k0 <= f.0 && k1 <= f.1));
            front.push((k0, k1, start));
        }
        front
    })
}

/// Result of [`lattice_c2`].
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSup {
    pub value: f64,
    /// Bounding box of a maximizing configuration: `(start, length)` per axis in lattice units.
    pub witness: Vec<(usize, usize)>,
}

/// Supremum of `I_α / Σ_t I^D_t` at a point of `w` over every instance of the
/// generator (coordinates in `[0, 1)` on the `1/1024` lattice, enclosing
/// windows of each grid, scales up to [`DEFAULT_K_MAX`]); exact for `n = 1`, an
/// upper bound for `n = 2`.
///
/// The ratio of sums is at most the largest single-triple ratio
/// `d^{α-2n} / Σ_t Σ_{Q ∋ x, y1, y2} 2^{k(2n-α)}` with `d = |x-y1| + |x-y2|`.
/// A cube contains the triple iff it contains its bounding box `B`, so the
/// finest such cube of grid `t` has scale `min_i k_{t_i}(B_i)`, and the window
/// root lies at least one scale above it. Minkowski's inequality gives
/// `d >= diam(B)`, with equality when `x` sits on the diagonal between the other two.
pub fn lattice_c2(dim: usize, alpha: f64) -> LatticeSup {
    assert!((1..=2).contains(&dim), "lattice sweep covers n = 1 and n = 2");
    let beta = 2.0 * dim as f64 - alpha;
    let classes = interval_classes(DEFAULT_K_MAX);
    let unit = 1.0 / COORD_DENOM as f64;
    let two_levels = 1.0 + (-beta).exp2();
    let ratio = |diam: f64, scales: &[i32]| {
        let den: f64 = scales.iter().map(|&k| (beta * k as f64).exp2()).sum::<f64>() * two_levels;
        diam.powf(-beta) / den
    };
    let mut best = LatticeSup {
        value: 0.0,
        witness: Vec::new(),
    };
    if dim == 1 {
        for (len, front) in classes.iter().enumerate().skip(2) {
            for &(k0, k1, start) in front {
                let r = ratio(len as f64 * unit, &[k0, k1]);
                if r > best.value {
                    best = LatticeSup {
                        value: r,
                        witness: vec![(start, len)],
                    };
                }
            }
        }
        return best;
    }
    let per_length = par::map_range(classes.len(), |a| {
        let mut best = (0.0f64, Vec::new());
        for (b, back) in classes.iter().enumerate() {
            if a + b < 2 {
                continue;
            }
            let diam = unit * ((a * a + b * b) as f64).sqrt();
            for &(x0, x1, sx) in &classes[a] {
                for &(y0, y1, sy) in back {
                    let r = ratio(diam, &[x0.min(y0), x0.min(y1), x1.min(y0), x1.min(y1)]);
                    if r > best.0 {
                        best = (r, vec![(sx, a), (sy, b)]);
                    }
                }
            }
        }
        best
    });
    for (value, witness) in per_length {
        if value > best.value {
            best = LatticeSup { value, witness };
        }
    }
    best
}

/// `observed · headroom`, rounded up to three significant digits.
pub fn freeze(observed: f64, headroom: f64) -> f64 {
    let v = observed * headroom;
    if v <= 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(2 - v.log10().floor() as i32);
    (v * scale).ceil() / scale
}

/// Largest strong and weak ratios over a batch for one configuration; the
/// optimizer of each instance is seeded with the instance seed.
pub fn ratio_maxima(
    dim: usize,
    alpha: f64,
    exponents: (f64, f64, f64),
    atoms: usize,
    seeds: Range<u64>,
    cfg: &OptimizerConfig,
) -> (f64, f64) {
    let seeds: Vec<u64> = seeds.collect();
    let ratios = par::map(&seeds, |&seed| {
        let spec = GenSpec {
            exponents,
            atoms: [atoms; 3],
            ..GenSpec::new(seed, dim, alpha)
        };
        let inst = gen_instance(&spec).and_then(|f| f.to_instance()).expect("generated instances are valid");
        let cfg = OptimizerConfig { seed, ..cfg.clone() };
        let report = verify_with(&inst, &cfg, &VerifyOptions::default());
        (report.ratio_strong.unwrap_or(0.0), report.ratio_weak.unwrap_or(0.0))
    });
    ratios
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, w)| (f64::max(a, s), f64::max(b, w)))
}

/// Calibrated `C2` for one order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Entry {
    pub n: usize,
    pub alpha: f64,
    /// Lattice supremum from [`lattice_c2`].
    pub observed: f64,
    /// Largest ratio seen on the random batch, for comparison.
    pub sampled: f64,
    pub frozen: f64,
    pub bound: f64,
}

/// Calibrated ratio maxima for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RMaxEntry {
    pub n: usize,
    pub alpha: f64,
    pub p1: f64,
    pub p2: f64,
    pub q: f64,
    pub observed_strong: f64,
    pub observed_weak: f64,
    pub r_max_strong: f64,
    pub r_max_weak: f64,
}

/// Output of one calibration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub seeds: (u64, u64),
    pub atoms: usize,
    pub c2: Vec<C2Entry>,
    pub r_max: Vec<RMaxEntry>,
}

impl CalibrationTable {
    /// The frozen tables as Rust array entries.
    pub fn rust_tables(&self) -> String {
        let mut out = String::from("const FROZEN_C2: [(usize, f64, f64); N] = [\n");
        for e in &self.c2 {
            out += &format!("    ({}, {:?}, {:?}),\n", e.n, e.alpha, e.frozen);
        }
        out += "];\n\nconst FROZEN_R_MAX: [(usize, f64, f64, f64, f64, f64, f64); N] = [\n";
        for e in &self.r_max {
            out += &format!(
                "    ({}, {:?}, {:?}, {:?}, {:?}, {:?}, {:?}),\n",
                e.n, e.alpha, e.p1, e.p2, e.q, e.r_max_strong, e.r_max_weak
            );
        }
        out + "];\n"
    }
}

/// Measures `C2` and `R_max` over `seeds` for every listed order and every exponent triple.
pub fn calibrate(orders: &[(usize, f64)], seeds: Range<u64>, cfg: &OptimizerConfig) -> CalibrationTable {
    let mut c2 = Vec::new();
    let mut r_max = Vec::new();
    for &(n, alpha) in orders {
        let observed = lattice_c2(n, alpha).value;
        c2.push(C2Entry {
            n,
            alpha,
            observed,
            sampled: sampled_c2(n, alpha, seeds.clone()),
            frozen: freeze(observed, 1.0),
            bound: c2_bound(n, alpha),
        });
        for (p1, p2, q) in EXPONENTS {
            let (s, w) = ratio_maxima(n, alpha, (p1, p2, q), CALIBRATION_ATOMS, seeds.clone(), cfg);
            r_max.push(RMaxEntry {
                n,
                alpha,
                p1,
                p2,
                q,
                observed_strong: s,
                observed_weak: w,
                r_max_strong: freeze(s, 1.0),
                r_max_weak: freeze(w, 1.0),
            });
        }
    }
    CalibrationTable {
        seeds: (seeds.start, seeds.end),
        atoms: CALIBRATION_ATOMS,
        c2,
        r_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        // n = 1, α = 1: 2 / (1 - 1/2)
        assert_eq!(c1(1, 1.0), 4.0);
        assert_eq!(c_dom(1, 1.0), 32.0);
        assert!((c2_bound(1, 1.0) - 6.0).abs() < 1e-4);
    }

    #[test]
    fn frozen_c2_within_bound() {
        for (n, a) in ORDERS {
            if let Some(c) = c2(n, a) {
                assert!(c <= c2_bound(n, a), "C2({n}, {a}) = {c}");
            }
        }
    }

    #[test]
    fn freezing_rounds_up() {
        assert_eq!(freeze(1.0, 1.25), 1.25);
        assert_eq!(freeze(1.2345, 1.0), 1.24);
        assert_eq!(freeze(123.41, 1.0), 124.0);
    }
}
