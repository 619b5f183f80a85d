//! TOML run configurations.
//!
//! Parsing fails closed: unknown keys are errors, and every semantic problem
//! is reported together with the line it was found on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Bump, BumpShape, BumpSource};
use crate::error::Error;
use crate::evolution::{EvolutionConfig, PicardConfig, Scheme};
use crate::geometry::{BoundaryCondition, FoliatedSpacetime, SpinStructure};
use crate::mesh::{Mesh, MIN_ANGULAR_NODES, MIN_RADIAL_NODES};
use crate::profile::Profile;
use crate::spin::{CliffordRep, Spinor};
use crate::C64;

/// Number of steps the default `dt` spreads over the window.
pub const DEFAULT_STEPS: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Interval,
    Annulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub family: Family,
    /// Interval length.
    pub length: Option<f64>,
    pub r_in: Option<f64>,
    pub r_out: Option<f64>,
    /// `a` for the interval, `f` for the annulus.
    #[serde(default)]
    pub warp: WarpSpec,
    #[serde(default)]
    pub lapse: LapseSpec,
    pub radial_nodes: usize,
    pub angular_nodes: Option<usize>,
    pub window: [f64; 2],
    #[serde(default)]
    pub spin_structure: SpinStructure,
}

/// Named metric coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpSpec {
    #[default]
    Flat,
    Constant { value: f64 },
    /// Coefficient equal to the coordinate (`f = r`).
    Radius,
    /// `exp(rate t)`
    Exp { rate: f64 },
    /// `exp(rate t) r`
    ExpRadius { rate: f64 },
    /// `1 + amp sin(freq t)`
    Breathing { amp: f64, freq: f64 },
}

impl WarpSpec {
    pub fn profile(&self) -> Profile {
        let r = Profile::Affine { c0: 0.0, c1: 1.0 };
        match *self {
            WarpSpec::Flat => Profile::one(),
            WarpSpec::Constant { value } => Profile::Const(value),
            WarpSpec::Radius => r,
            WarpSpec::Exp { rate } => Profile::ExpTime { rate },
            WarpSpec::ExpRadius { rate } => Profile::product(Profile::ExpTime { rate }, r),
            WarpSpec::Breathing { amp, freq } => Profile::SinTime { amp, freq },
        }
    }
}

/// Lapse families. Only `unit` evolves directly; the others go through the
/// conformal reduction, which needs `N = 1` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LapseSpec {
    #[default]
    Unit,
    /// `1 + amp sin^2(pi (x - x0) / (x1 - x0))`, equal to one with zero slope at both ends.
    InteriorBump { amp: f64 },
    /// `c0 + c1 x`
    Affine { c0: f64, c1: f64 },
}

impl LapseSpec {
    pub fn profile(&self, bounds: (f64, f64)) -> Profile {
        match *self {
            LapseSpec::Unit => Profile::one(),
            LapseSpec::InteriorBump { amp } => Profile::SinSqSpace { c0: 1.0, amp, x0: bounds.0, x1: bounds.1 },
            LapseSpec::Affine { c0, c1 } => Profile::Affine { c0, c1 },
        }
    }
}

/// A boundary condition tag as written in the config (`"APS"` or `"MIT"`, any case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BoundaryTag(pub BoundaryCondition);

impl TryFrom<String> for BoundaryTag {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "APS" => Ok(BoundaryTag(BoundaryCondition::Aps)),
            "MIT" => Ok(BoundaryTag(BoundaryCondition::Mit)),
            _ => Err(format!("unknown boundary condition \"{s}\" (expected \"APS\" or \"MIT\")")),
        }
    }
}

impl From<BoundaryTag> for String {
    fn from(t: BoundaryTag) -> String {
        t.0.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// `r = r_in` or `x = 0`.
    #[serde(alias = "inner", alias = "left")]
    pub lower: BoundaryTag,
    /// `r = r_out` or `x = L`.
    #[serde(alias = "outer", alias = "right")]
    pub upper: BoundaryTag,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { lower: BoundaryTag(BoundaryCondition::Aps), upper: BoundaryTag(BoundaryCondition::Aps) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeSpec {
    #[default]
    Gaussian,
    Smooth,
}

fn default_cutoff() -> f64 {
    6.0
}

fn default_polarization() -> Vec<[f64; 2]> {
    vec![[1.0, 0.0], [0.0, 0.0]]
}

fn default_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    /// `[x]` or `[r, theta]`.
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default)]
    pub shape: ShapeSpec,
    /// Gaussian truncation radius in widths.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Spinor components as `[re, im]` pairs.
    #[serde(default = "default_polarization")]
    pub polarization: Vec<[f64; 2]>,
    #[serde(default = "default_amplitude")]
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default)]
    pub shape: ShapeSpec,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_polarization")]
    pub polarization: Vec<[f64; 2]>,
    #[serde(default = "default_amplitude")]
    pub amplitude: [f64; 2],
    pub t_center: f64,
    pub half_width: f64,
}

impl SourceSpec {
    /// Spatial part of the source.
    pub fn bump(&self) -> BumpSpec {
        BumpSpec {
            center: self.center.clone(),
            width: self.width,
            shape: self.shape,
            cutoff: self.cutoff,
            polarization: self.polarization.clone(),
            amplitude: self.amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub initial: Option<BumpSpec>,
    pub source: Option<SourceSpec>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Defaults to `(t_b - t_a) / 200`.
    pub dt: Option<f64>,
    pub epsilon_schedule: Option<Vec<f64>>,
    pub picard_tol: Option<f64>,
    pub picard_max_iter: Option<usize>,
    pub contraction_target: Option<f64>,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_scheme() -> Scheme {
    Scheme::Midpoint
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            scheme: Scheme::Midpoint,
            dt: None,
            epsilon_schedule: None,
            picard_tol: None,
            picard_max_iter: None,
            contraction_target: None,
            parallel: false,
            snapshot_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    /// Reduced-norm drift; asserted only without a source.
    Norm,
    Energy,
    Flux,
    Support,
    Weak,
}

fn default_dir() -> String {
    "aps-dirac-out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn default_diagnostics() -> Vec<Diagnostic> {
    vec![Diagnostic::Norm, Diagnostic::Energy, Diagnostic::Flux]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write binary snapshots of the physical field.
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: Vec<Diagnostic>,
    /// Turn failed diagnostics into a failing exit status.
    #[serde(default = "yes")]
    pub assertions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
            snapshots: true,
            diagnostics: default_diagnostics(),
            assertions: true,
        }
    }
}

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Number of resolutions, each halving the previous mesh spacing and step.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Size of the perturbed data family for the continuity ratio (0 skips it).
    #[serde(default)]
    pub continuity_members: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { levels: 3, continuity_members: 0 }
    }
}

/// One problem found in a config, with the line it refers to when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// All problems found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[table]` (or of the table header when the key is absent).
fn locate(text: &str, table: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current != table {
            continue;
        }
        if let Some(k) = key {
            let name = line.split('=').next().unwrap_or("").trim();
            if name == k {
                return Some(i + 1);
            }
        }
    }
    header
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        }])
    })?;
    let issues = config.issues(text);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(issues))
    }
}

impl RunConfig {
    /// Semantic checks beyond the schema; `text` is only used for line numbers.
    pub fn issues(&self, text: &str) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut push = |table: &str, key: Option<&str>, message: String| {
            out.push(ConfigIssue { line: locate(text, table, key), message });
        };
        let g = &self.geometry;
        let [ta, tb] = g.window;
        if !(ta.is_finite() && tb.is_finite() && ta < tb) {
            push("geometry", Some("window"), format!("time window [{ta}, {tb}] must satisfy t_a < t_b"));
        } else if !(ta <= 0.0 && 0.0 <= tb) {
            push(
                "geometry",
                Some("window"),
                format!("time window [{ta}, {tb}] must contain 0 (the initial slice t = 0 lies in [t_a, t_b])"),
            );
        }
        match g.family {
            Family::Interval => {
                match g.length {
                    Some(l) if l > 0.0 => {}
                    Some(l) => push("geometry", Some("length"), format!("interval length must be positive, got {l}")),
                    None => push("geometry", None, "interval geometry needs `length`".into()),
                }
                for (k, v) in [("r_in", g.r_in.is_some()), ("r_out", g.r_out.is_some()), ("angular_nodes", g.angular_nodes.is_some())] {
                    if v {
                        push("geometry", Some(k), format!("`{k}` does not apply to the interval"));
                    }
                }
                if g.spin_structure != SpinStructure::Antiperiodic {
                    push("geometry", Some("spin_structure"), "the interval has no angular spin structure".into());
                }
            }
            Family::Annulus => {
                match (g.r_in, g.r_out) {
                    (Some(a), Some(b)) if 0.0 < a && a < b => {}
                    (Some(a), Some(b)) => push("geometry", Some("r_in"), format!("annulus needs 0 < r_in < r_out, got [{a}, {b}]")),
                    _ => push("geometry", None, "annulus geometry needs `r_in` and `r_out`".into()),
                }
                if g.length.is_some() {
                    push("geometry", Some("length"), "`length` does not apply to the annulus".into());
                }
                match g.angular_nodes {
                    Some(k) if k >= MIN_ANGULAR_NODES && k % 2 == 0 => {}
                    Some(k) => push(
                        "geometry",
                        Some("angular_nodes"),
                        format!("angular_nodes must be even and at least {MIN_ANGULAR_NODES}, got {k}"),
                    ),
                    None => push("geometry", None, "annulus geometry needs `angular_nodes`".into()),
                }
            }
        }
        if g.radial_nodes < MIN_RADIAL_NODES {
            push("geometry", Some("radial_nodes"), format!("radial_nodes must be at least {MIN_RADIAL_NODES}, got {}", g.radial_nodes));
        }

        let dim = match g.family {
            Family::Interval => 1,
            Family::Annulus => 2,
        };
        let mut check_bump = |table: &str, b: &BumpSpec| {
            if b.center.len() != dim {
                push(table, Some("center"), format!("center needs {dim} coordinates, got {}", b.center.len()));
            }
            if !(b.width > 0.0) {
                push(table, Some("width"), format!("width must be positive, got {}", b.width));
            }
            if !(b.cutoff > 0.0) {
                push(table, Some("cutoff"), format!("cutoff must be positive, got {}", b.cutoff));
            }
            if b.polarization.len() != 2 {
                push(table, Some("polarization"), format!("polarization needs 2 components, got {}", b.polarization.len()));
            } else if b.polarization.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
                push(table, Some("polarization"), "polarization must be nonzero".into());
            }
        };
        if let Some(b) = &self.data.initial {
            check_bump("data.initial", b);
        }
        if let Some(s) = &self.data.source {
            check_bump("data.source", &s.bump());
            if !(s.half_width > 0.0) {
                push("data.source", Some("half_width"), format!("half_width must be positive, got {}", s.half_width));
            } else if s.t_center - s.half_width < ta || s.t_center + s.half_width > tb {
                push(
                    "data.source",
                    Some("t_center"),
                    format!(
                        "source time support [{}, {}] must lie inside the window [{ta}, {tb}]",
                        s.t_center - s.half_width,
                        s.t_center + s.half_width
                    ),
                );
            }
        }

        let s = &self.scheme;
        if let Some(dt) = s.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                push("scheme", Some("dt"), format!("dt must be positive, got {dt}"));
            }
        }
        if s.snapshot_stride == 0 {
            push("scheme", Some("snapshot_stride"), "snapshot_stride must be at least 1".into());
        }
        if let Some(eps) = &s.epsilon_schedule {
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
                push("scheme", Some("epsilon_schedule"), format!("epsilon_schedule must be positive and strictly decreasing, got {eps:?}"));
            }
        }
        if let Some(tol) = s.picard_tol {
            if !(tol > 0.0) {
                push("scheme", Some("picard_tol"), format!("picard_tol must be positive, got {tol}"));
            }
        }
        if s.picard_max_iter == Some(0) {
            push("scheme", Some("picard_max_iter"), "picard_max_iter must be at least 1".into());
        }
        if let Some(c) = s.contraction_target {
            if !(c > 0.0 && c < 1.0) {
                push("scheme", Some("contraction_target"), format!("contraction_target must lie in (0, 1), got {c}"));
            }
        }
        if self.study.levels < 2 {
            push("study", Some("levels"), format!("a study needs at least 2 levels, got {}", self.study.levels));
        }
        if self.study.continuity_members == 1 {
            push("study", Some("continuity_members"), "a continuity family needs 0 or at least 2 members".into());
        }
        out
    }

    pub fn dim(&self) -> usize {
        match self.geometry.family {
            Family::Interval => 1,
            Family::Annulus => 2,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.geometry.window[0], self.geometry.window[1])
    }

    pub fn spacetime(&self) -> crate::Result<FoliatedSpacetime> {
        let g = &self.geometry;
        let window = self.window();
        let st = match g.family {
            Family::Interval => FoliatedSpacetime::interval(g.length.unwrap_or(0.0), g.warp.profile(), window)?,
            Family::Annulus => {
                FoliatedSpacetime::annulus(g.r_in.unwrap_or(0.0), g.r_out.unwrap_or(0.0), g.warp.profile(), window)?
                    .with_spin_structure(g.spin_structure)
            }
        };
        let bounds = st.surface().bounds();
        let st = st.with_boundary(self.boundary.lower.0, self.boundary.upper.0);
        match g.lapse {
            LapseSpec::Unit => Ok(st),
            lapse => st.with_lapse(lapse.profile(bounds)),
        }
    }

    pub fn rep(&self) -> crate::Result<CliffordRep> {
        CliffordRep::build(self.dim())
    }

    pub fn mesh(&self, spacetime: &FoliatedSpacetime) -> crate::Result<Arc<Mesh>> {
        Ok(Arc::new(Mesh::build(spacetime, self.geometry.radial_nodes, self.geometry.angular_nodes.unwrap_or(1))?))
    }

    pub fn dt(&self) -> f64 {
        let (ta, tb) = self.window();
        self.scheme.dt.unwrap_or((tb - ta) / DEFAULT_STEPS)
    }

    pub fn evolution(&self) -> EvolutionConfig {
        let s = &self.scheme;
        let d = PicardConfig::default();
        EvolutionConfig {
            dt: self.dt(),
            scheme: s.scheme,
            picard: PicardConfig {
                epsilon_schedule: s.epsilon_schedule.clone().unwrap_or(d.epsilon_schedule),
                tol: s.picard_tol.unwrap_or(d.tol),
                max_iter: s.picard_max_iter.unwrap_or(d.max_iter),
                contraction_target: s.contraction_target.unwrap_or(d.contraction_target),
            },
            parallel: s.parallel,
            snapshot_stride: s.snapshot_stride,
        }
    }

    pub fn initial_bump(&self, spacetime: &FoliatedSpacetime) -> crate::Result<Option<(Bump, C64)>> {
        self.data.initial.as_ref().map(|b| Ok((bump(spacetime, b)?, amplitude(b)))).transpose()
    }

    pub fn source(&self, spacetime: &FoliatedSpacetime) -> crate::Result<Option<BumpSource>> {
        self.data
            .source
            .as_ref()
            .map(|s| {
                let spec = s.bump();
                Ok(BumpSource {
                    bump: bump(spacetime, &spec)?,
                    t_center: s.t_center,
                    half_width: s.half_width,
                    amplitude: amplitude(&spec),
                })
            })
            .transpose()
    }
}

fn amplitude(b: &BumpSpec) -> C64 {
    C64::new(b.amplitude[0], b.amplitude[1])
}

fn bump(spacetime: &FoliatedSpacetime, b: &BumpSpec) -> crate::Result<Bump> {
    let shape = match b.shape {
        ShapeSpec::Gaussian => BumpShape::Gaussian { cutoff: b.cutoff },
        ShapeSpec::Smooth => BumpShape::Smooth,
    };
    let pol = match b.polarization.as_slice() {
        [a, c] => Spinor::new(C64::new(a[0], a[1]), C64::new(c[0], c[1])),
        _ => return Err(Error::Data(format!("polarization needs 2 components, got {}", b.polarization.len()))),
    };
    let mut center = b.center.clone();
    if center.len() == 2 {
        center[1] = center[1].rem_euclid(2.0 * PI);
    }
    Bump::new(spacetime, &center, b.width, shape, pol)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
family = "annulus"
r_in = 1.0
r_out = 3.0
radial_nodes = 16
angular_nodes = 16
window = [0.0, 1.0]
"#;

    #[test]
    fn minimal_annulus_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.dt(), 1.0 / 200.0);
        assert_eq!(c.boundary, BoundaryConfig::default());
        assert_eq!(c.scheme.scheme, Scheme::Midpoint);
        assert_eq!(c.evolution().picard, PicardConfig::default());
        assert!(c.data.initial.is_none());
        assert_eq!(c.output.formats, vec![Format::Csv, Format::Json]);
        let st = c.spacetime().unwrap();
        assert_eq!(st.window(), (0.0, 1.0));
        assert_eq!(c.mesh(&st).unwrap().node_count(), 256);
    }

    #[test]
    fn unknown_boundary_tag_is_rejected_with_its_line() {
        let text = format!("{MINIMAL}\n[boundary]\ninner = \"PERIODIC\"\nouter = \"APS\"\n");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown boundary condition"), "{msg}");
        assert_eq!(err.0[0].line, Some(11));
    }

    #[test]
    fn window_without_zero_cites_the_rule() {
        let text = MINIMAL.replace("window = [0.0, 1.0]", "window = [1.0, 2.0]");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].message.contains("must contain 0"));
        assert_eq!(err.0[0].line, Some(8));
    }

    #[test]
    fn unknown_keys_fail_closed() {
        let text = MINIMAL.replace("family", "colour = 1\nfamily");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        assert!(err.0[0].line.is_some());
        assert!(matches!(Error::from(err), Error::Config(_)));
    }

    #[test]
    fn several_problems_are_reported_together() {
        let text = MINIMAL.replace("angular_nodes = 16", "angular_nodes = 7").replace("radial_nodes = 16", "radial_nodes = 2");
        let err = parse_config(&format!("{text}\n[scheme]\ndt = -1.0\n")).unwrap_err();
        let lines: Vec<_> = err.0.iter().map(|i| i.line).collect();
        assert_eq!(err.0.len(), 3, "{err}");
        assert!(lines.contains(&Some(6)) && lines.contains(&Some(7)) && lines.contains(&Some(11)));
    }

    #[test]
    fn data_and_lapse_build() {
        let text = format!(
            "{MINIMAL}\n[boundary]\ninner = \"mit\"\nouter = \"APS\"\n\n[data.initial]\ncenter = [2.0, 3.0]\nwidth = 0.2\n\n\
             [data.source]\ncenter = [2.0, 1.0]\nwidth = 0.2\nshape = \"smooth\"\nt_center = 0.5\nhalf_width = 0.2\namplitude = [0.0, 2.0]\n"
        )
        .replace("window = [0.0, 1.0]", "window = [0.0, 1.0]\nlapse = { kind = \"interior_bump\", amp = 0.2 }");
        let c = parse_config(&text).unwrap();
        let st = c.spacetime().unwrap();
        assert_eq!(st.condition(crate::Side::Lower), BoundaryCondition::Mit);
        assert!(!st.lapse().is_unit());
        assert_eq!(st.boundary_lapse_violation(), 0.0);
        let (b, a) = c.initial_bump(&st).unwrap().unwrap();
        assert_eq!(a, C64::new(1.0, 0.0));
        assert_eq!(b.width, 0.2);
        let s = c.source(&st).unwrap().unwrap();
        assert_eq!(s.amplitude, C64::new(0.0, 2.0));
        assert_eq!(s.bump.shape, BumpShape::Smooth);
    }

    #[test]
    fn source_outside_window_is_rejected() {
        let text = format!("{MINIMAL}\n[data.source]\ncenter = [2.0, 1.0]\nwidth = 0.2\nt_center = 0.9\nhalf_width = 0.2\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("inside the window"), "{err}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = parse_config(MINIMAL).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
