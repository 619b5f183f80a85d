//! Foliated model spacetimes `g = -N^2 dt^2 + h_t` on `R x Sigma`.
//!
//! Two Cauchy surfaces are available: an interval `[0, L]` with
//! `h_t = a(t, x)^2 dx^2`, and an annulus `[r_in, r_out] x S^1` with
//! `h_t = b(t, r)^2 dr^2 + f(t, r)^2 dtheta^2`. The radial scale `b` is one
//! for every named family; it only departs from one after a conformal
//! rescaling by a lapse that varies in the interior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::mesh::Mesh;
use crate::profile::Profile;

/// Tolerance for "exactly one" checks on sampled lapse values.
const UNIT_LAPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CauchySurface {
    Interval { length: f64 },
    Annulus { r_in: f64, r_out: f64 },
}

impl CauchySurface {
    pub fn dim(&self) -> usize {
        match self {
            CauchySurface::Interval { .. } => 1,
            CauchySurface::Annulus { .. } => 2,
        }
    }

    /// Range of the bounded coordinate.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            CauchySurface::Interval { length } => (0.0, length),
            CauchySurface::Annulus { r_in, r_out } => (r_in, r_out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryCondition {
    #[serde(rename = "APS")]
    Aps,
    #[serde(rename = "MIT")]
    Mit,
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Aps => f.write_str("APS"),
            BoundaryCondition::Mit => f.write_str("MIT"),
        }
    }
}

/// Which end of the bounded coordinate a boundary component sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `x = 0` or `r = r_in`; the outward normal is `-e_1`.
    Lower,
    /// `x = L` or `r = r_out`; the outward normal is `+e_1`.
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];

    /// Sign of the outward normal relative to `e_1`.
    pub fn normal_sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }

    pub fn name(self, surface: &CauchySurface) -> &'static str {
        match (surface, self) {
            (CauchySurface::Interval { .. }, Side::Lower) => "left",
            (CauchySurface::Interval { .. }, Side::Upper) => "right",
            (CauchySurface::Annulus { .. }, Side::Lower) => "inner",
            (CauchySurface::Annulus { .. }, Side::Upper) => "outer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryComponent {
    pub side: Side,
    pub condition: BoundaryCondition,
}

/// Spin structure on the angular circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinStructure {
    /// Bounding structure; spinors change sign around the circle.
    #[default]
    Antiperiodic,
    /// Trivial structure; gives the boundary operator a zero mode.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoliatedSpacetime {
    surface: CauchySurface,
    lapse: Profile,
    radial_scale: Profile,
    warp: Profile,
    window: (f64, f64),
    boundary: [BoundaryComponent; 2],
    spin_structure: SpinStructure,
}

impl FoliatedSpacetime {
    /// Interval `[0, length]` with metric `a(t, x)^2 dx^2`, unit lapse and APS at both ends.
    pub fn interval(length: f64, scale: Profile, window: (f64, f64)) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Geometry(format!("interval length must be positive, got {length}")));
        }
        Self::build(CauchySurface::Interval { length }, scale, Profile::one(), window)
    }

    /// Annulus with metric `dr^2 + f(t, r)^2 dtheta^2`, unit lapse and APS on both circles.
    pub fn annulus(r_in: f64, r_out: f64, warp: Profile, window: (f64, f64)) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::Geometry(format!(
                "annulus needs 0 < r_in < r_out, got [{r_in}, {r_out}]"
            )));
        }
        Self::build(CauchySurface::Annulus { r_in, r_out }, Profile::one(), warp, window)
    }

    fn build(surface: CauchySurface, radial_scale: Profile, warp: Profile, window: (f64, f64)) -> Result<Self> {
        if !(window.0 <= 0.0 && 0.0 <= window.1 && window.0 < window.1) {
            return Err(Error::Window(format!(
                "time window [{}, {}] must contain 0",
                window.0, window.1
            )));
        }
        let st = FoliatedSpacetime {
            surface,
            lapse: Profile::one(),
            radial_scale,
            warp,
            window,
            boundary: [
                BoundaryComponent { side: Side::Lower, condition: BoundaryCondition::Aps },
                BoundaryComponent { side: Side::Upper, condition: BoundaryCondition::Aps },
            ],
            spin_structure: SpinStructure::Antiperiodic,
        };
        st.check_positive()?;
        Ok(st)
    }

    pub fn with_lapse(mut self, lapse: Profile) -> Result<Self> {
        self.lapse = lapse;
        self.check_positive()?;
        Ok(self)
    }

    /// Replaces `b` (annulus) or `a` (interval).
    pub fn with_radial_scale(mut self, scale: Profile) -> Result<Self> {
        self.radial_scale = scale;
        self.check_positive()?;
        Ok(self)
    }

    pub fn with_boundary(mut self, lower: BoundaryCondition, upper: BoundaryCondition) -> Self {
        self.boundary = [
            BoundaryComponent { side: Side::Lower, condition: lower },
            BoundaryComponent { side: Side::Upper, condition: upper },
        ];
        self
    }

    pub fn with_spin_structure(mut self, spin: SpinStructure) -> Self {
        self.spin_structure = spin;
        self
    }

    pub fn surface(&self) -> CauchySurface {
        self.surface
    }

    pub fn spatial_dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn lapse(&self) -> &Profile {
        &self.lapse
    }

    pub fn radial_scale(&self) -> &Profile {
        &self.radial_scale
    }

    pub fn warp(&self) -> &Profile {
        &self.warp
    }

    pub fn boundary(&self) -> &[BoundaryComponent; 2] {
        &self.boundary
    }

    pub fn condition(&self, side: Side) -> BoundaryCondition {
        self.boundary[side.index()].condition
    }

    pub fn spin_structure(&self) -> SpinStructure {
        self.spin_structure
    }

    /// `sqrt(det h_t)` at bounded coordinate `x`.
    pub fn sqrt_det(&self, t: f64, x: f64) -> f64 {
        match self.surface {
            CauchySurface::Interval { .. } => self.radial_scale.value(t, x),
            CauchySurface::Annulus { .. } => self.radial_scale.value(t, x) * self.warp.value(t, x),
        }
    }

    /// `d/dt log sqrt(det h_t)`.
    pub fn dt_log_sqrt_det(&self, t: f64, x: f64) -> f64 {
        let b = &self.radial_scale;
        let mut v = b.dt(t, x) / b.value(t, x);
        if let CauchySurface::Annulus { .. } = self.surface {
            v += self.warp.dt(t, x) / self.warp.value(t, x);
        }
        v
    }

    /// True when no metric coefficient depends on time.
    pub fn is_static(&self) -> bool {
        self.radial_scale.is_static() && self.warp.is_static() && self.lapse.is_static()
    }

    /// True when `b` and `f` at the boundary do not depend on time.
    pub fn boundary_is_static(&self) -> bool {
        let (x0, x1) = self.surface.bounds();
        let (ta, tb) = self.window;
        let ts = sample_times(ta, tb, 9);
        [x0, x1].iter().all(|&x| {
            let s0 = (self.radial_scale.value(ta, x), self.warp.value(ta, x));
            ts.iter().all(|&t| (self.radial_scale.value(t, x), self.warp.value(t, x)) == s0)
        })
    }

    fn check_positive(&self) -> Result<()> {
        let (x0, x1) = self.surface.bounds();
        for t in sample_times(self.window.0, self.window.1, 17) {
            for x in sample_times(x0, x1, 65) {
                let n = self.lapse.value(t, x);
                let b = self.radial_scale.value(t, x);
                let f = self.warp.value(t, x);
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::Geometry(format!("lapse N({t}, {x}) = {n} is not positive")));
                }
                if !(b > 0.0 && f > 0.0 && b.is_finite() && f.is_finite()) {
                    return Err(Error::Geometry(format!(
                        "spatial metric is not positive definite at ({t}, {x}): b = {b}, f = {f}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest `|N - 1|` on the two boundary components over sampled times.
    pub fn boundary_lapse_violation(&self) -> f64 {
        let (x0, x1) = self.surface.bounds();
        sample_times(self.window.0, self.window.1, 33)
            .into_iter()
            .flat_map(|t| [(t, x0), (t, x1)])
            .map(|(t, x)| (self.lapse.value(t, x) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|N - 1|` over the whole sampled domain.
    pub fn lapse_violation(&self) -> f64 {
        if self.lapse.is_unit() {
            return 0.0;
        }
        let (x0, x1) = self.surface.bounds();
        let mut worst: f64 = 0.0;
        for t in sample_times(self.window.0, self.window.1, 33) {
            for x in sample_times(x0, x1, 129) {
                worst = worst.max((self.lapse.value(t, x) - 1.0).abs());
            }
        }
        worst
    }

    /// Rejects spacetimes whose lapse is not identically one.
    pub fn require_unit_lapse(&self) -> Result<()> {
        let violation = self.lapse_violation();
        if violation > UNIT_LAPSE_TOL {
            return Err(Error::NonUnitLapse { violation });
        }
        Ok(())
    }

    pub fn require_in_window(&self, t: f64) -> Result<()> {
        let (ta, tb) = self.window;
        let slack = 1e-12 * (tb - ta);
        if t < ta - slack || t > tb + slack {
            return Err(Error::Window(format!("t = {t} lies outside [{ta}, {tb}]")));
        }
        Ok(())
    }
}

/// `count` evenly spaced samples covering `[a, b]`.
pub(crate) fn sample_times(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count < 2 || a == b {
        return vec![a];
    }
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Converts a failed report into the error evolution entry points return.
    pub fn into_result(self) -> Result<Self> {
        if let Some(bad) = self.checks.iter().find(|c| !c.passed) {
            return Err(Error::Assumption(format!(
                "{} fails with violation {:e}",
                bad.name, bad.violation
            )));
        }
        Ok(self)
    }
}

/// Names of the checks in a [`ValidationReport`].
pub mod checks {
    pub const UNIT_BOUNDARY_LAPSE: &str = "unit_boundary_lapse";
    pub const NORMAL_PARALLEL: &str = "boundary_normal_parallel";
    pub const COMPACT_BOUNDARY: &str = "compact_boundary";
}

/// Checks the standing assumptions that evolution relies on.
///
/// `N = 1` on the boundary, the boundary normal `e_n` parallel along `e_0`
/// (measured as `|grad_n log N|` from one-sided differences, which is the
/// length of `nabla_{e_0} e_n` for these diagonal metrics), and compactness
/// of the boundary, which holds for both model surfaces.
pub fn validate_assumptions(spacetime: &FoliatedSpacetime) -> ValidationReport {
    let lapse_violation = spacetime.boundary_lapse_violation();

    let (x0, x1) = spacetime.surface.bounds();
    let h = 1e-5 * (x1 - x0);
    let n = &spacetime.lapse;
    let mut transport: f64 = 0.0;
    for t in sample_times(spacetime.window.0, spacetime.window.1, 33) {
        for (x, dir) in [(x0, 1.0), (x1, -1.0)] {
            let d = dir * (-3.0 * n.value(t, x) + 4.0 * n.value(t, x + dir * h) - n.value(t, x + 2.0 * dir * h))
                / (2.0 * h);
            let v = d.abs() / (n.value(t, x) * spacetime.radial_scale.value(t, x));
            transport = transport.max(v);
        }
    }

    ValidationReport {
        checks: vec![
            AssumptionCheck {
                name: checks::UNIT_BOUNDARY_LAPSE,
                passed: lapse_violation <= UNIT_LAPSE_TOL,
                violation: lapse_violation,
            },
            AssumptionCheck {
                name: checks::NORMAL_PARALLEL,
                passed: transport <= 1e-8,
                violation: transport,
            },
            AssumptionCheck { name: checks::COMPACT_BOUNDARY, passed: true, violation: 0.0 },
        ],
    }
}

/// Per-node geometric data on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricSample {
    pub t: f64,
    pub lapse: Vec<f64>,
    pub sqrt_det: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub density: Vec<f64>,
}

fn per_node(mesh: &Mesh, mut f: impl FnMut(f64) -> f64) -> Vec<f64> {
    let radial: Vec<f64> = mesh.radial_coords().iter().map(|&x| f(x)).collect();
    (0..mesh.node_count()).map(|node| radial[mesh.radial_index(node)]).collect()
}

/// `H_t = -(1/n) d/dt log sqrt|h_t|` at every node.
pub fn mean_curvature(spacetime: &FoliatedSpacetime, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    spacetime.require_unit_lapse()?;
    let n = spacetime.spatial_dim() as f64;
    Ok(per_node(mesh, |x| -spacetime.dt_log_sqrt_det(t, x) / n))
}

/// `rho_t = (|h_t| / |h_0|)^(1/4)` at every node.
pub fn density_factor(spacetime: &FoliatedSpacetime, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    spacetime.require_unit_lapse()?;
    Ok(per_node(mesh, |x| density_at(spacetime, t, x)))
}

pub(crate) fn density_at(spacetime: &FoliatedSpacetime, t: f64, x: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    (spacetime.sqrt_det(t, x) / spacetime.sqrt_det(0.0, x)).sqrt()
}

pub fn sample_geometry(spacetime: &FoliatedSpacetime, mesh: &Mesh, t: f64) -> Result<GeometricSample> {
    Ok(GeometricSample {
        t,
        lapse: per_node(mesh, |x| spacetime.lapse.value(t, x)),
        sqrt_det: per_node(mesh, |x| spacetime.sqrt_det(t, x)),
        mean_curvature: mean_curvature(spacetime, mesh, t)?,
        density: density_factor(spacetime, mesh, t)?,
    })
}

/// Spinor and source weights relating a spacetime to its unit-lapse rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMaps {
    dim: usize,
    lapse: Profile,
}

impl WeightMaps {
    pub fn identity(dim: usize) -> Self {
        WeightMaps { dim, lapse: Profile::one() }
    }

    pub fn is_identity(&self) -> bool {
        self.lapse.is_unit()
    }

    pub fn spinor_exponent(&self) -> f64 {
        (self.dim as f64 - 1.0) / 2.0
    }

    pub fn source_exponent(&self) -> f64 {
        (self.dim as f64 + 1.0) / 2.0
    }

    /// `N^((n-1)/2)`: physical spinor to rescaled spinor.
    pub fn spinor_weight(&self, t: f64, x: f64) -> f64 {
        self.lapse.value(t, x).powf(self.spinor_exponent())
    }

    /// `N^((n+1)/2)`: physical source to rescaled source.
    pub fn source_weight(&self, t: f64, x: f64) -> f64 {
        self.lapse.value(t, x).powf(self.source_exponent())
    }

    fn scaled(&self, field: &SpinorField, weight: impl Fn(f64) -> f64) -> SpinorField {
        if self.is_identity() {
            return field.clone();
        }
        let mut out = field.clone();
        let mesh = field.mesh().clone();
        for node in 0..mesh.node_count() {
            let w = weight(mesh.radial_coord(node));
            out.scale_node(node, w);
        }
        out
    }

    pub fn spinor_forward(&self, field: &SpinorField) -> SpinorField {
        let t = field.t();
        self.scaled(field, |x| self.spinor_weight(t, x))
    }

    pub fn spinor_backward(&self, field: &SpinorField) -> SpinorField {
        let t = field.t();
        self.scaled(field, |x| 1.0 / self.spinor_weight(t, x))
    }

    pub fn source_forward(&self, field: &SpinorField) -> SpinorField {
        let t = field.t();
        self.scaled(field, |x| self.source_weight(t, x))
    }

    pub fn source_backward(&self, field: &SpinorField) -> SpinorField {
        let t = field.t();
        self.scaled(field, |x| 1.0 / self.source_weight(t, x))
    }
}

/// Rescales `g` by `N^-2`, producing a unit-lapse spacetime plus the weight maps.
///
/// Requires `N = 1` on the boundary so that the boundary data of both pictures coincide.
pub fn conformal_reduce(spacetime: &FoliatedSpacetime) -> Result<(FoliatedSpacetime, WeightMaps)> {
    let violation = spacetime.boundary_lapse_violation();
    if violation > UNIT_LAPSE_TOL {
        return Err(Error::Assumption(format!(
            "conformal reduction needs N = 1 on the boundary (max |N - 1| = {violation:e})"
        )));
    }
    let dim = spacetime.spatial_dim();
    if spacetime.lapse.is_unit() {
        return Ok((spacetime.clone(), WeightMaps::identity(dim)));
    }
    let lapse = spacetime.lapse.clone();
    let mut reduced = spacetime.clone();
    reduced.lapse = Profile::one();
    reduced.radial_scale = Profile::quotient(spacetime.radial_scale.clone(), lapse.clone());
    if dim == 2 {
        reduced.warp = Profile::quotient(spacetime.warp.clone(), lapse.clone());
    }
    reduced.check_positive()?;
    Ok((reduced, WeightMaps { dim, lapse }))
}
