//! Shifted dyadic grids with exact rational coordinates.
//!
//! A grid `D_t` with `t ∈ {0, 1/3}^n` consists of the half-open cubes
//! `2^{-k}([0,1)^n + m + (-1)^k t)`. Every coordinate that appears here is an
//! exact rational, so boundary membership never depends on binary rounding.
//!
//! Cube positions are integers; the alternating sign on the shift is what
//! makes consecutive scales nest, and the integer parent/child maps below
//! encode that nesting without touching rationals at all.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::GeometryError;

/// Exact rational scalar used for every coordinate.
pub type Rational = Ratio<i128>;

/// A point of `R^n` with exact coordinates.
pub type Point = Vec<Rational>;

/// Largest accepted magnitude of a coordinate numerator or denominator.
pub const COORD_LIMIT: i128 = 1 << 60;

/// Largest accepted `|k|` for a dyadic scale.
pub const SCALE_LIMIT: i32 = 60;

/// Integer positions of a cube, one per coordinate.
pub type Position = SmallVec<[i64; 4]>;

/// Shift vector `t ∈ {0, 1/3}^n`, stored as one flag per coordinate
/// (`true` means one third).
/// Serialized as one `"0"` or `"1/3"` string per coordinate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct GridShift {
    thirds: SmallVec<[bool; 4]>,
}

impl GridShift {
    pub fn zero(dim: usize) -> Self {
        Self {
            thirds: smallvec::smallvec![false; dim],
        }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        Self {
            thirds: flags.iter().copied().collect(),
        }
    }

    /// All `2^n` shifts of dimension `dim`, in lexicographic order.
    pub fn all(dim: usize) -> Vec<GridShift> {
        (0..1u32 << dim)
            .map(|bits| {
                let flags: Vec<bool> = (0..dim).map(|i| bits >> (dim - 1 - i) & 1 == 1).collect();
                GridShift::from_flags(&flags)
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.thirds.len()
    }

    pub fn is_third(&self, axis: usize) -> bool {
        self.thirds[axis]
    }

    pub fn is_zero(&self) -> bool {
        self.thirds.iter().all(|t| !t)
    }

    /// Coordinate `axis` of `t` as an exact rational.
    pub fn component(&self, axis: usize) -> Rational {
        if self.thirds[axis] {
            Rational::new(1, 3)
        } else {
            Rational::zero()
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.thirds
    }
}

impl From<GridShift> for Vec<String> {
    fn from(t: GridShift) -> Self {
        t.thirds.iter().map(|&b| if b { "1/3" } else { "0" }.to_string()).collect()
    }
}

impl TryFrom<Vec<String>> for GridShift {
    type Error = String;

    fn try_from(parts: Vec<String>) -> Result<Self, String> {
        let flags = parts
            .iter()
            .map(|s| match s.trim() {
                "0" => Ok(false),
                "1/3" => Ok(true),
                other => Err(format!("shift component {other:?} is neither \"0\" nor \"1/3\"")),
            })
            .collect::<Result<Vec<bool>, String>>()?;
        Ok(GridShift::from_flags(&flags))
    }
}

impl fmt::Debug for GridShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .thirds
            .iter()
            .map(|&t| if t { "1/3" } else { "0" })
            .collect();
        write!(f, "t=({})", parts.join(","))
    }
}

/// `(-1)^k`.
fn scale_sign(scale: i32) -> i128 {
    if scale.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// `2^k` as an exact rational.
pub fn pow2(scale: i32) -> Rational {
    assert!(scale.abs() <= 120, "scale {scale} out of range");
    if scale >= 0 {
        Rational::from_integer(1i128 << scale)
    } else {
        Rational::new(1, 1i128 << (-scale))
    }
}

/// Index `m` of the cell of scale `k` containing `x` along one axis, i.e.
/// `floor(2^k x - (-1)^k t)`.
pub fn grid_index(x: &Rational, scale: i32, third: bool) -> i64 {
    let num = *x.numer();
    let den = *x.denom();
    let tau: i128 = if third { 1 } else { 0 };
    let s = scale_sign(scale);
    let (n, d) = if scale >= 0 {
        (3 * num * (1i128 << scale) - s * tau * den, 3 * den)
    } else {
        let e = 1i128 << (-scale);
        (3 * num - s * tau * den * e, 3 * den * e)
    };
    Integer::div_floor(&n, &d) as i64
}

/// A half-open cube of a shifted dyadic grid.
///
/// Ordering is scale-major (coarse first), then position, then shift.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub scale: i32,
    pub position: Position,
    pub shift: GridShift,
}

impl fmt::Debug for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "D(k={}, m={:?}, {:?})",
            self.scale,
            self.position.as_slice(),
            self.shift
        )
    }
}

impl DyadicCube {
    pub fn new(scale: i32, position: &[i64], shift: GridShift) -> Self {
        assert_eq!(position.len(), shift.dim(), "position/shift dimension mismatch");
        Self {
            scale,
            position: position.iter().copied().collect(),
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// The cube of scale `scale` in grid `shift` containing `x`.
    pub fn containing(x: &[Rational], scale: i32, shift: &GridShift) -> Self {
        let position = x
            .iter()
            .enumerate()
            .map(|(i, xi)| grid_index(xi, scale, shift.is_third(i)))
            .collect();
        Self {
            scale,
            position,
            shift: shift.clone(),
        }
    }

    /// Side length `2^{-k}`.
    pub fn side(&self) -> Rational {
        pow2(-self.scale)
    }

    /// Exact corner `2^{-k}(m + (-1)^k t)` and side.
    pub fn realize(&self) -> AxisCube {
        let side = self.side();
        let s = Rational::from_integer(scale_sign(self.scale));
        let corner = self
            .position
            .iter()
            .enumerate()
            .map(|(i, &m)| (Rational::from_integer(m as i128) + s * self.shift.component(i)) * side)
            .collect();
        AxisCube { corner, side }
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.position)
                .enumerate()
                .all(|(i, (xi, &m))| grid_index(xi, self.scale, self.shift.is_third(i)) == m)
    }

    pub fn parent(&self) -> Self {
        let s = scale_sign(self.scale) as i64;
        let position = self
            .position
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let tau = self.shift.is_third(i) as i64;
                (m + s * tau).div_euclid(2)
            })
            .collect();
        Self {
            scale: self.scale - 1,
            position,
            shift: self.shift.clone(),
        }
    }

    /// The ancestor of scale `scale` (which must not be finer than `self`).
    pub fn ancestor_at(&self, scale: i32) -> Self {
        assert!(scale <= self.scale, "ancestor must be coarser");
        let mut cube = self.clone();
        while cube.scale > scale {
            cube = cube.parent();
        }
        cube
    }

    /// The `2^n` cubes of the next finer scale partitioning `self`, in position order.
    pub fn children(&self) -> Vec<Self> {
        let child_scale = self.scale + 1;
        let s = scale_sign(child_scale) as i64;
        let n = self.dim();
        let base: Vec<i64> = self
            .position
            .iter()
            .enumerate()
            .map(|(i, &m)| 2 * m - s * self.shift.is_third(i) as i64)
            .collect();
        (0..1u32 << n)
            .map(|bits| {
                let position = (0..n)
                    .map(|i| base[i] + (bits >> (n - 1 - i) & 1) as i64)
                    .collect();
                Self {
                    scale: child_scale,
                    position,
                    shift: self.shift.clone(),
                }
            })
            .collect()
    }

    /// `true` when `other` is `self` or lies inside it.
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        other.shift == self.shift
            && other.scale >= self.scale
            && other.ancestor_at(self.scale).position == self.position
    }

    /// `|Q|^{α/n - 2} = 2^{k(2n - α)}`, the weight of this cube in the dyadic operators.
    pub fn operator_weight(&self, alpha: f64) -> f64 {
        let n = self.dim() as f64;
        (self.scale as f64 * (2.0 * n - alpha)).exp2()
    }

    /// Lebesgue measure `2^{-kn}` as a float.
    pub fn volume(&self) -> f64 {
        (-(self.scale as f64) * self.dim() as f64).exp2()
    }
}

/// Axis-parallel half-open cube `corner + [0, side)^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxisCube {
    pub corner: Point,
    pub side: Rational,
}

impl AxisCube {
    pub fn new(corner: Point, side: Rational) -> Result<Self, GeometryError> {
        if !side.is_positive() {
            return Err(GeometryError::NonPositiveSide);
        }
        Ok(Self { corner, side })
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.corner)
                .all(|(xi, ci)| xi >= ci && *xi < ci + self.side)
    }

    /// Half-open containment `other ⊆ self`.
    pub fn contains_cube(&self, other: &AxisCube) -> bool {
        other.dim() == self.dim()
            && other.corner.iter().zip(&self.corner).all(|(o, c)| {
                o >= c && *o + other.side <= *c + self.side
            })
    }
}

/// Membership test shared by axis and dyadic cubes.
pub trait Region {
    fn contains_point(&self, x: &[Rational]) -> bool;
}

impl Region for AxisCube {
    fn contains_point(&self, x: &[Rational]) -> bool {
        self.contains(x)
    }
}

impl Region for DyadicCube {
    fn contains_point(&self, x: &[Rational]) -> bool {
        self.contains(x)
    }
}

/// Finds a cube of one of the `2^n` shifted grids covering `q` with side at
/// most `6 l(q)`.
///
/// Scales with `l(q) <= 2^{-k} <= 6 l(q)` are scanned finest first; within a
/// scale, shifts are tried in lexicographic order. Only the cube containing
/// the corner of `q` can cover it, so the first hit is the smallest side,
/// then the lexicographically smallest `(t, m)`.
pub fn covering_cube(q: &AxisCube) -> Result<(GridShift, DyadicCube), GeometryError> {
    let dim = q.dim();
    let lo = q.side;
    let hi = q.side * Rational::from_integer(6);
    let approx = -q.side.to_f64().unwrap_or(1.0).log2();
    let k_fine = approx.floor() as i32 + 1;
    let k_coarse = (approx - 6f64.log2()).ceil() as i32 - 1;
    let shifts = GridShift::all(dim);
    for k in (k_coarse..=k_fine).rev() {
        let side = pow2(-k);
        if side < lo || side > hi {
            continue;
        }
        for t in &shifts {
            let cube = DyadicCube::containing(&q.corner, k, t);
            if cube.realize().contains_cube(q) {
                return Ok((t.clone(), cube));
            }
        }
    }
    Err(GeometryError::NoCover)
}

/// Parses `"a/b"`, `"a"` or a finite decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, GeometryError> {
    let s = s.trim();
    let bad = || GeometryError::BadRational(s.to_string());
    let value = if let Some((a, b)) = s.split_once('/') {
        let a: i128 = a.trim().parse().map_err(|_| bad())?;
        let b: i128 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        Rational::new(a, b)
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let int_part: i128 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10i128.pow(frac.len() as u32);
        let frac_part: i128 = frac.parse().map_err(|_| bad())?;
        let mag = int_part.abs() * scale + frac_part;
        Rational::new(if negative { -mag } else { mag }, scale)
    } else {
        Rational::from_integer(s.parse().map_err(|_| bad())?)
    };
    check_coordinate(&value)?;
    Ok(value)
}

/// Rejects coordinates whose numerator or denominator would overflow grid arithmetic.
pub fn check_coordinate(x: &Rational) -> Result<(), GeometryError> {
    if x.numer().abs() > COORD_LIMIT || *x.denom() > COORD_LIMIT {
        Err(GeometryError::CoordinateRange(format_rational(x)))
    } else {
        Ok(())
    }
}

/// `"a/b"`, or `"a"` for integers.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Lexicographic comparison of points, used to keep atom orders canonical.
pub fn cmp_points(a: &[Rational], b: &[Rational]) -> Ordering {
    a.cmp(b)
}
