//! Initial data and source families.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::geometry::{CauchySurface, FoliatedSpacetime};
use crate::mesh::Mesh;
use crate::spin::Spinor;
use crate::C64;

/// `exp(1 - 1 / (1 - s^2))` on `|s| < 1`, zero outside; smooth, compactly supported, peak 1.
pub fn smooth_bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// Derivative of [`smooth_bump`].
pub fn smooth_bump_derivative(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        smooth_bump(s) * (-2.0 * s / (q * q))
    }
}

/// Radial profile of a spatial bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpShape {
    /// `exp(-d^2 / (2 w^2))`, set to zero beyond `cutoff` widths.
    Gaussian { cutoff: f64 },
    /// [`smooth_bump`] of `d / w`, supported in the ball of radius `w`.
    Smooth,
}

/// Distance between a node and a point `(x)` or `(r, theta)`, with angular
/// differences wrapped to `[-pi, pi]` and scaled by `arc_scale`.
pub fn coordinate_distance(mesh: &Mesh, node: usize, center: &[f64], arc_scale: f64) -> f64 {
    let c = mesh.coords(node);
    let dr = c[0] - center[0];
    if c.len() == 1 {
        return dr.abs();
    }
    let dth = wrap_angle(c[1] - center[1]);
    (dr * dr + (arc_scale * dth).powi(2)).sqrt()
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut v = a.rem_euclid(2.0 * PI);
    if v > PI {
        v -= 2.0 * PI;
    }
    v
}

/// Spatial bump with a fixed spinor polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub shape: BumpShape,
    pub polarization: Spinor,
    /// Length of one radian of angle near the center, `f(0, r_c)`.
    pub arc_scale: f64,
}

impl Bump {
    /// Bump on `spacetime`; the polarization is normalized.
    pub fn new(
        spacetime: &FoliatedSpacetime,
        center: &[f64],
        width: f64,
        shape: BumpShape,
        polarization: Spinor,
    ) -> Result<Self> {
        let dim = spacetime.spatial_dim();
        if center.len() != dim {
            return Err(Error::Data(format!("bump center needs {dim} coordinates, got {}", center.len())));
        }
        if !(width > 0.0) {
            return Err(Error::Data(format!("bump width must be positive, got {width}")));
        }
        if let BumpShape::Gaussian { cutoff } = shape {
            if !(cutoff > 0.0) {
                return Err(Error::Data(format!("gaussian cutoff must be positive, got {cutoff}")));
            }
        }
        let norm = polarization.norm();
        if !(norm > 0.0) {
            return Err(Error::Data("bump polarization must be nonzero".into()));
        }
        let arc_scale = match spacetime.surface() {
            CauchySurface::Interval { .. } => 1.0,
            CauchySurface::Annulus { .. } => spacetime.warp().value(0.0, center[0]),
        };
        Ok(Bump { center: center.to_vec(), width, shape, polarization: polarization / C64::from(norm), arc_scale })
    }

    /// Radius of the closed support in coordinate distance.
    pub fn support_radius(&self) -> f64 {
        match self.shape {
            BumpShape::Gaussian { cutoff } => cutoff * self.width,
            BumpShape::Smooth => self.width,
        }
    }

    pub fn profile(&self, d: f64) -> f64 {
        match self.shape {
            BumpShape::Gaussian { cutoff } => {
                let s = d / self.width;
                if s > cutoff {
                    0.0
                } else {
                    (-0.5 * s * s).exp()
                }
            }
            BumpShape::Smooth => smooth_bump(d / self.width),
        }
    }

    pub fn field(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        SpinorField::from_fn(mesh.clone(), t, |node, _| {
            let d = coordinate_distance(mesh, node, &self.center, self.arc_scale);
            self.polarization * C64::from(self.profile(d))
        })
    }

    pub fn support(&self) -> SupportDescriptor {
        SupportDescriptor {
            center: self.center.clone(),
            radius: self.support_radius(),
            arc_scale: self.arc_scale,
            times: None,
        }
    }
}

/// Where data live: a coordinate ball, optionally limited to a time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDescriptor {
    pub center: Vec<f64>,
    pub radius: f64,
    pub arc_scale: f64,
    /// `None` for initial data sitting on `t = 0`.
    pub times: Option<(f64, f64)>,
}

/// Source term `f(t)` in the physical picture.
pub trait Source: Send + Sync {
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField;

    /// Closed time interval containing the support, `None` for the zero source.
    fn time_support(&self) -> Option<(f64, f64)>;

    /// Spatial support, when known.
    fn spatial_support(&self) -> Option<SupportDescriptor> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoSource;

impl Source for NoSource {
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        SpinorField::zeros(mesh.clone(), t)
    }

    fn time_support(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `amplitude * chi((t - t_center) / half_width) * bump(x)` with the smooth bump `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSource {
    pub bump: Bump,
    pub t_center: f64,
    pub half_width: f64,
    pub amplitude: C64,
}

impl BumpSource {
    pub fn temporal(&self, t: f64) -> f64 {
        smooth_bump((t - self.t_center) / self.half_width)
    }
}

impl Source for BumpSource {
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        let chi = self.temporal(t);
        if chi == 0.0 {
            return SpinorField::zeros(mesh.clone(), t);
        }
        self.bump.field(mesh, t).scaled(self.amplitude * chi)
    }

    fn time_support(&self) -> Option<(f64, f64)> {
        Some((self.t_center - self.half_width, self.t_center + self.half_width))
    }

    fn spatial_support(&self) -> Option<SupportDescriptor> {
        let mut s = self.bump.support();
        s.times = self.time_support();
        Some(s)
    }
}

/// Sum of sources.
pub struct SumSource(pub Vec<Box<dyn Source>>);

impl Source for SumSource {
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        let mut out = SpinorField::zeros(mesh.clone(), t);
        for s in &self.0 {
            out.axpy(C64::new(1.0, 0.0), &s.eval(mesh, t));
        }
        out
    }

    fn time_support(&self) -> Option<(f64, f64)> {
        self.0.iter().filter_map(|s| s.time_support()).fold(None, |acc, (a, b)| match acc {
            None => Some((a, b)),
            Some((x, y)) => Some((x.min(a), y.max(b))),
        })
    }
}

/// Source given by a closure.
pub struct FnSource<F> {
    pub support: Option<(f64, f64)>,
    pub f: F,
}

impl<F> Source for FnSource<F>
where
    F: Fn(&Arc<Mesh>, f64) -> SpinorField + Send + Sync,
{
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        (self.f)(mesh, t)
    }

    fn time_support(&self) -> Option<(f64, f64)> {
        self.support
    }
}

/// Scaled copy of another source.
pub struct ScaledSource<'a> {
    pub inner: &'a dyn Source,
    pub factor: C64,
}

impl Source for ScaledSource<'_> {
    fn eval(&self, mesh: &Arc<Mesh>, t: f64) -> SpinorField {
        self.inner.eval(mesh, t).scaled(self.factor)
    }

    fn time_support(&self) -> Option<(f64, f64)> {
        self.inner.time_support()
    }

    fn spatial_support(&self) -> Option<SupportDescriptor> {
        self.inner.spatial_support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;

    #[test]
    fn smooth_bump_derivative_matches_difference() {
        for s in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let h = 1e-6;
            let fd = (smooth_bump(s + h) - smooth_bump(s - h)) / (2.0 * h);
            assert!((fd - smooth_bump_derivative(s)).abs() < 1e-7);
        }
        assert_eq!(smooth_bump(1.0), 0.0);
        assert_eq!(smooth_bump(0.0), 1.0);
    }

    #[test]
    fn wrapped_distance_on_cylinder() {
        let st = FoliatedSpacetime::annulus(1.0, 4.0, Profile::one(), (0.0, 1.0)).unwrap();
        let mesh = Mesh::build(&st, 4, 8).unwrap();
        // node (0, 0) sits at r = 1, theta = 0; center at theta = 7 pi / 4 is pi/4 away.
        let d = coordinate_distance(&mesh, mesh.node(0, 0), &[1.0, 1.75 * PI], 1.0);
        assert!((d - 0.25 * PI).abs() < 1e-14);
    }

    #[test]
    fn bump_support_is_respected() {
        let st = FoliatedSpacetime::annulus(1.0, 4.0, Profile::one(), (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::build(&st, 16, 16).unwrap());
        let pol = Spinor::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        let bump = Bump::new(&st, &[2.5, PI], 0.5, BumpShape::Smooth, pol).unwrap();
        let f = bump.field(&mesh, 0.0);
        for node in 0..mesh.node_count() {
            let d = coordinate_distance(&mesh, node, &bump.center, 1.0);
            if d >= 0.5 {
                assert_eq!(f.get(node).norm(), 0.0);
            }
        }
        assert_eq!(f.max_abs_on_boundary(), 0.0);
        assert!(Bump::new(&st, &[2.5], 0.5, BumpShape::Smooth, pol).is_err());
    }
}
