//! Verification of computed solutions: energy, flux, support, uniqueness,
//! convergence and weak-solution checks.

mod convergence;
mod weak;

use nalgebra::DVector;
use serde::Serialize;

use crate::data::SupportDescriptor;
use crate::error::{Error, Result};
use crate::evolution::SolveResult;
use crate::field::SpinorField;
use crate::geometry::{sample_times, BoundaryCondition, CauchySurface, FoliatedSpacetime, Side};
use crate::mesh::Mesh;
use crate::C64;

pub use convergence::{
    continuity_study, convergence_study, linearity_residual, superposition_residual, ContinuityReport,
    ConvergenceReport, DataMember, Resolution, StudyTemplate,
};
pub use weak::{weak_identity, WeakReport};

/// Per-node weights of `L^2(Sigma_t)` for the physical metric.
pub fn slice_weights(spacetime: &FoliatedSpacetime, mesh: &Mesh, t: f64) -> Vec<f64> {
    let dth = mesh.angular_weight();
    (0..mesh.node_count())
        .map(|n| {
            let i = mesh.radial_index(n);
            mesh.radial_weights()[i] * spacetime.sqrt_det(t, mesh.radial_coords()[i]) * dth
        })
        .collect()
}

fn node_mass(values: &DVector<C64>, node: usize) -> f64 {
    values[2 * node].norm_sqr() + values[2 * node + 1].norm_sqr()
}

/// `||psi||_t^2` with the physical slice weights, restricted by `keep`.
pub fn slice_mass(spacetime: &FoliatedSpacetime, field: &SpinorField, keep: impl Fn(usize) -> bool) -> f64 {
    let mesh = field.mesh();
    let w = slice_weights(spacetime, mesh, field.t());
    (0..mesh.node_count()).filter(|&n| keep(n)).map(|n| w[n] * node_mass(field.values(), n)).sum()
}

/// Spatial region for energy checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    /// Nodes with bounded coordinate in `[lo, hi]`.
    RadiusWindow { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `int_{t_first}^{t} ||f||^2`.
    pub source_integral: Vec<f64>,
    /// Smallest `C >= 0` making every sampled pair feasible; infinite when none exists.
    pub fitted_c: f64,
    /// For each time `t1`, the smallest `rhs - lhs` over pairs ending at `t1` (zero for the first time).
    pub margins: Vec<f64>,
}

impl EnergyReport {
    pub fn feasible(&self) -> bool {
        self.fitted_c.is_finite() && self.margins.iter().all(|&m| m >= 0.0)
    }
}

fn gronwall_rhs(c: f64, dt: f64, f0: f64, s: f64) -> f64 {
    (c * dt).exp() * (f0 + c * s)
}

/// Smallest `C >= 0` with `f1 <= exp(C dt) (f0 + C s)`.
fn minimal_constant(dt: f64, f0: f64, f1: f64, s: f64) -> f64 {
    if f1 <= f0 {
        return 0.0;
    }
    if f0 <= 0.0 && s <= 0.0 {
        return f64::INFINITY;
    }
    let mut hi = 1e-12;
    while gronwall_rhs(hi, dt, f0, s) < f1 {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gronwall_rhs(mid, dt, f0, s) >= f1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Energy `F(t)` of a solve and the fitted Gronwall constant.
///
/// Pairs are taken over at most `max_samples` evenly spread grid times.
pub fn energy(result: &SolveResult, spacetime: &FoliatedSpacetime, region: Region) -> Result<EnergyReport> {
    energy_sampled(result, spacetime, region, 200)
}

pub fn energy_sampled(
    result: &SolveResult,
    spacetime: &FoliatedSpacetime,
    region: Region,
    max_samples: usize,
) -> Result<EnergyReport> {
    let (times, energy_all): (Vec<f64>, Vec<f64>) = match region {
        Region::All => result.records.iter().map(|r| (r.t, r.energy)).unzip(),
        Region::RadiusWindow { lo, hi } => {
            if result.snapshot_indices.len() != result.times.len() {
                return Err(Error::Data("region energies need a snapshot at every grid time".into()));
            }
            result
                .physical
                .iter()
                .map(|p| {
                    let mesh = p.mesh().clone();
                    let e = slice_mass(spacetime, p, |n| {
                        let x = mesh.radial_coord(n);
                        x >= lo && x <= hi
                    });
                    (p.t(), e)
                })
                .unzip()
        }
    };
    // Cumulative trapezoid of ||f||^2 on the full grid.
    let mut cumulative = vec![0.0; result.records.len()];
    for k in 1..result.records.len() {
        let (a, b) = (&result.records[k - 1], &result.records[k]);
        cumulative[k] = cumulative[k - 1] + 0.5 * (b.t - a.t) * (a.source_norm_sq + b.source_norm_sq);
    }
    let n = times.len();
    let picks: Vec<usize> = if n <= max_samples {
        (0..n).collect()
    } else {
        let mut v: Vec<usize> = sample_times(0.0, (n - 1) as f64, max_samples).iter().map(|x| x.round() as usize).collect();
        v.dedup();
        v
    };
    let mut c: f64 = 0.0;
    for (a, &i) in picks.iter().enumerate() {
        for &j in &picks[a + 1..] {
            let s = cumulative[j] - cumulative[i];
            c = c.max(minimal_constant(times[j] - times[i], energy_all[i], energy_all[j], s));
        }
    }
    let mut margins = vec![0.0; picks.len()];
    if c.is_finite() {
        for (b, &j) in picks.iter().enumerate() {
            let mut m = f64::INFINITY;
            for &i in &picks[..b] {
                let s = cumulative[j] - cumulative[i];
                m = m.min(gronwall_rhs(c, times[j] - times[i], energy_all[i], s) - energy_all[j]);
            }
            margins[b] = if m.is_finite() { m } else { 0.0 };
        }
    } else {
        margins.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
    }
    Ok(EnergyReport {
        times: picks.iter().map(|&i| times[i]).collect(),
        energy: picks.iter().map(|&i| energy_all[i]).collect(),
        source_integral: picks.iter().map(|&i| cumulative[i]).collect(),
        fitted_c: c,
        margins,
    })
}

/// Boundary flux at every grid time.
pub fn boundary_flux(result: &SolveResult) -> Vec<f64> {
    result.records.iter().map(|r| r.flux).collect()
}

/// Which boundary components may host mass injected by the boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportBound {
    /// `J(supp data) ∪ J(dSigma_0)` with every boundary component.
    Full,
    /// Only the APS components contribute a collar.
    Improved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub bound: SupportBound,
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    pub inside_cone: Vec<f64>,
    /// Mass in the collar but outside the cone.
    pub collar_only: Vec<f64>,
    pub outside: Vec<f64>,
    pub leakage: Vec<f64>,
    /// Safety margin added to every radius.
    pub margin: f64,
}

impl SupportReport {
    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }
}

/// Lower bounds for `b` and `f` over the window, used to bound distances from below.
fn metric_floor(spacetime: &FoliatedSpacetime, mesh: &Mesh) -> (f64, f64, f64, f64) {
    let (ta, tb) = spacetime.window();
    let ts = sample_times(ta, tb, 33);
    let (mut bmin, mut fmin, mut bmax, mut fmax) = (f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64);
    for &t in &ts {
        for &x in mesh.radial_coords() {
            let b = spacetime.radial_scale().value(t, x);
            bmin = bmin.min(b);
            bmax = bmax.max(b);
            if let CauchySurface::Annulus { .. } = spacetime.surface() {
                let f = spacetime.warp().value(t, x);
                fmin = fmin.min(f);
                fmax = fmax.max(f);
            }
        }
    }
    (bmin, if fmin.is_finite() { fmin } else { 1.0 }, bmax, fmax)
}

/// Mass of a solve outside the causal hull of the data support.
///
/// Distances use `sqrt((b_min dr)^2 + (f_min dtheta)^2)`, a lower bound for
/// the geodesic distance, and every radius is enlarged by one mesh cell.
pub fn support_mass(
    result: &SolveResult,
    spacetime: &FoliatedSpacetime,
    supports: &[SupportDescriptor],
    bound: SupportBound,
) -> Result<SupportReport> {
    let first = result.physical.first().ok_or_else(|| Error::Data("solve has no snapshots".into()))?;
    let mesh = first.mesh().clone();
    let (bmin, fmin, bmax, fmax) = metric_floor(spacetime, &mesh);
    let cell = match spacetime.surface() {
        CauchySurface::Interval { .. } => mesh.radial_step() * bmax,
        CauchySurface::Annulus { .. } => (mesh.radial_step() * bmax).max(mesh.angular_weight() * fmax),
    };
    let lower_bound = |node: usize, center: &[f64]| -> f64 {
        let c = mesh.coords(node);
        let dr = bmin * (c[0] - center[0]).abs();
        if c.len() == 1 {
            return dr;
        }
        let dth = fmin * crate::data::wrap_angle(c[1] - center[1]).abs();
        (dr * dr + dth * dth).sqrt()
    };
    let (x0, x1) = spacetime.surface().bounds();
    let collar_sides: Vec<(Side, f64)> = Side::BOTH
        .iter()
        .filter(|&&s| bound == SupportBound::Full || spacetime.condition(s) == BoundaryCondition::Aps)
        .map(|&s| (s, if s == Side::Lower { x0 } else { x1 }))
        .collect();

    let mut report = SupportReport {
        bound,
        times: Vec::new(),
        total: Vec::new(),
        inside_cone: Vec::new(),
        collar_only: Vec::new(),
        outside: Vec::new(),
        leakage: Vec::new(),
        margin: cell,
    };
    for field in &result.physical {
        let t = field.t();
        let w = slice_weights(spacetime, &mesh, t);
        let (mut total, mut cone, mut collar, mut out) = (0.0, 0.0, 0.0, 0.0);
        for node in 0..mesh.node_count() {
            let m = w[node] * node_mass(field.values(), node);
            total += m;
            let in_cone = supports.iter().any(|s| {
                let reach = match s.times {
                    None => t.abs(),
                    Some((a, b)) => (t - a).max(b - t),
                };
                lower_bound(node, &s.center) <= s.radius + reach + cell
            });
            let x = mesh.radial_coord(node);
            let in_collar = collar_sides.iter().any(|&(_, xb)| bmin * (x - xb).abs() <= t.abs() + cell);
            if in_cone {
                cone += m;
            } else if in_collar {
                collar += m;
            } else {
                out += m;
            }
        }
        report.times.push(t);
        report.total.push(total);
        report.inside_cone.push(cone);
        report.collar_only.push(collar);
        report.outside.push(out);
        report.leakage.push(if total > 0.0 { out / total } else { 0.0 });
    }
    Ok(report)
}

/// `sup_t ||psi_a(t) - psi_b(t)||_t` over the shared snapshots.
pub fn uniqueness_probe(a: &SolveResult, b: &SolveResult, spacetime: &FoliatedSpacetime) -> Result<f64> {
    if a.snapshot_times() != b.snapshot_times() {
        return Err(Error::Data("solves were recorded on different time grids".into()));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.physical.iter().zip(&b.physical) {
        if x.mesh().hash() != y.mesh().hash() {
            return Err(Error::Data("solves live on different meshes".into()));
        }
        worst = worst.max(slice_mass(spacetime, &x.sub(y), |_| true).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_constant_is_tight() {
        let (dt, f0, f1, s) = (0.5, 1.0, 1.3, 0.2);
        let c = minimal_constant(dt, f0, f1, s);
        assert!(gronwall_rhs(c, dt, f0, s) >= f1);
        assert!(gronwall_rhs(c * (1.0 - 1e-9), dt, f0, s) < f1);
        assert_eq!(minimal_constant(dt, 1.0, 0.9, 0.0), 0.0);
        assert!(minimal_constant(dt, 0.0, 1.0, 0.0).is_infinite());
    }
}
