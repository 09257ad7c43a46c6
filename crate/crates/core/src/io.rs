//! JSON instance and report files.
//!
//! Coordinates are exact fraction strings such as `"3/10"`; masses are plain
//! decimal numbers.

use serde::{Deserialize, Serialize};

use crate::calibration::Constants;
use crate::error::InstanceError;
use crate::geometry::{format_rational, parse_rational, DyadicCube, GridShift, Point};
use crate::measure::{Atom, DiscreteMeasure, ExponentTuple};
use crate::operators::{OperatorParams, TruncationWindow};
use crate::sparse::SparseFamily;
use crate::testing::{Instance, VerificationReport};

/// Version string written into every report.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub point: Vec<String>,
    pub mass: f64,
}

impl AtomFile {
    pub fn new(point: &[crate::geometry::Rational], mass: f64) -> Self {
        Self {
            point: point.iter().map(format_rational).collect(),
            mass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeFile {
    pub scale: i32,
    pub position: Vec<i64>,
    /// One of `"0"` or `"1/3"` per coordinate.
    pub shift: Vec<String>,
}

impl CubeFile {
    pub fn from_cube(cube: &DyadicCube) -> Self {
        Self {
            scale: cube.scale,
            position: cube.position.to_vec(),
            shift: cube.shift.clone().into(),
        }
    }

    pub fn to_cube(&self) -> Result<DyadicCube, InstanceError> {
        if self.position.len() != self.shift.len() {
            return Err(InstanceError::Format("cube position and shift lengths differ".into()));
        }
        let shift = GridShift::try_from(self.shift.clone()).map_err(InstanceError::Format)?;
        Ok(DyadicCube::new(self.scale, &self.position, shift))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFile {
    pub k_min: i32,
    pub k_max: i32,
    pub root: CubeFile,
}

impl WindowFile {
    pub fn from_window(w: &TruncationWindow) -> Self {
        Self {
            k_min: w.k_min,
            k_max: w.k_max,
            root: CubeFile::from_cube(&w.root),
        }
    }
}

/// On-disk form of an [`Instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub alpha: f64,
    pub p1: f64,
    pub p2: f64,
    pub q: f64,
    pub sigma1: Vec<AtomFile>,
    pub sigma2: Vec<AtomFile>,
    pub w: Vec<AtomFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowFile>,
    /// A supplied sparse family; built from `f1 = f2 = 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<Vec<CubeFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub force_exponents: bool,
}

fn measure(dim: usize, atoms: &[AtomFile]) -> Result<DiscreteMeasure, InstanceError> {
    let atoms = atoms
        .iter()
        .map(|a| {
            let point: Point = a.point.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>()?;
            Ok(Atom { point, mass: a.mass })
        })
        .collect::<Result<Vec<_>, InstanceError>>()?;
    Ok(DiscreteMeasure::new(dim, atoms)?)
}

fn atoms_of(mu: &DiscreteMeasure) -> Vec<AtomFile> {
    mu.atoms().iter().map(|a| AtomFile::new(&a.point, a.mass)).collect()
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        serde_json::from_str(text).map_err(|e| InstanceError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize") + "\n"
    }

    pub fn to_instance(&self) -> Result<Instance, InstanceError> {
        let params = OperatorParams::new(self.n, self.alpha)?;
        let exponents = if self.force_exponents {
            ExponentTuple::forced(self.p1, self.p2, self.q)?
        } else {
            ExponentTuple::validate(self.p1, self.p2, self.q)?
        };
        let window = match &self.window {
            Some(w) => Some(TruncationWindow::new(w.k_min, w.k_max, w.root.to_cube()?)?),
            None => None,
        };
        let family = match &self.sparse {
            Some(cubes) => Some(SparseFamily::new(cubes.iter().map(CubeFile::to_cube).collect::<Result<Vec<_>, _>>()?)?),
            None => None,
        };
        let inst = Instance::new(
            params,
            exponents,
            measure(self.n, &self.sigma1)?,
            measure(self.n, &self.sigma2)?,
            measure(self.n, &self.w)?,
            window,
            family,
        )?
        .with_seed(self.seed);
        match self.delta {
            Some(d) => inst.with_delta(d),
            None => Ok(inst),
        }
    }

    /// The file describing `inst`; the family is written only when it was supplied.
    pub fn from_instance(inst: &Instance) -> Self {
        let e = inst.exponents;
        Self {
            n: inst.params.dim,
            alpha: inst.params.alpha,
            p1: e.p1,
            p2: e.p2,
            q: e.q,
            sigma1: atoms_of(&inst.sigma1),
            sigma2: atoms_of(&inst.sigma2),
            w: atoms_of(&inst.w),
            window: Some(WindowFile::from_window(&inst.window)),
            sparse: (!inst.family_built).then(|| inst.family.cubes().map(CubeFile::from_cube).collect()),
            seed: inst.seed,
            delta: Some(inst.delta),
            force_exponents: !e.within_hypotheses,
        }
    }
}

/// A verification report with the constants in force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub report: VerificationReport,
    pub constants: Constants,
    /// Only written on request; reports stay byte-identical without it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl ReportFile {
    pub fn new(inst: &Instance, report: VerificationReport) -> Self {
        let e = inst.exponents;
        Self {
            version: TOOLKIT_VERSION.to_string(),
            constants: Constants::for_config(inst.params.dim, inst.params.alpha, e.p1, e.p2, e.q),
            report,
            wall_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}
