use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::midpoint::{march, OperatorCache};
use super::{directed_grid, EvolutionConfig, Pipeline, Recorder, Scheme, SchemeMeta, SolveResult};
use crate::data::{smooth_bump, smooth_bump_derivative, FnSource, Source};
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::geometry::FoliatedSpacetime;
use crate::mesh::Mesh;
use crate::spin::CliffordRep;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenDirection {
    /// `G^+`: zero datum on a slice before the support of `f`.
    Retarded,
    /// `G^-`: zero datum on a slice after it.
    Advanced,
}

/// `G^+ f` or `G^- f` on the part of the window between the zero-datum slice
/// `t0` and the far end; the solution vanishes identically on the rest.
#[derive(Debug, Clone)]
pub struct GreenSolution {
    pub direction: GreenDirection,
    pub t0: f64,
    pub dt: f64,
    pub result: SolveResult,
    pipeline: Pipeline,
}

fn green(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    source: &dyn Source,
    config: &EvolutionConfig,
    direction: GreenDirection,
) -> Result<GreenSolution> {
    let mut config = config.clone();
    config.scheme = Scheme::Midpoint;
    config.snapshot_stride = 1;
    config.validate()?;
    let pipeline = Pipeline::new(spacetime, rep, mesh)?;
    let (ta, tb) = spacetime.window();
    let dt = config.dt;
    let slack = 1e-12 * (tb - ta);
    let (t0, far) = match (source.time_support(), direction) {
        (None, GreenDirection::Retarded) => (ta, tb),
        (None, GreenDirection::Advanced) => (tb, ta),
        (Some((a, _)), GreenDirection::Retarded) => (a - 2.0 * dt, tb),
        (Some((_, b)), GreenDirection::Advanced) => (b + 2.0 * dt, ta),
    };
    if t0 < ta - slack || t0 > tb + slack {
        return Err(Error::Window(format!(
            "cannot place the zero-datum slice at t0 = {t0}: it must lie in [{ta}, {tb}] two steps away from the source support"
        )));
    }
    let times = match direction {
        GreenDirection::Retarded => directed_grid(t0, far, dt),
        GreenDirection::Advanced => {
            let mut g = directed_grid(t0, far, dt);
            g.reverse();
            g
        }
    };
    let last = times.len() - 1;
    let (start, order): (usize, Vec<usize>) = match direction {
        GreenDirection::Retarded => (0, (0..=last).collect()),
        GreenDirection::Advanced => (last, (0..=last).rev().collect()),
    };
    let cache = OperatorCache::new(&pipeline)?;
    let zero = DVector::zeros(2 * mesh.node_count());
    let mut rec = Recorder::new(&pipeline, source, 1, last);
    rec.push(start, times[start], &zero, 0.0, None);
    let herm = march(&pipeline, &cache, &times, &order, zero, source, &config, &mut rec)?;
    let h = if last == 0 { 0.0 } else { (times[last] - times[0]) / last as f64 };
    let meta = SchemeMeta {
        scheme: Scheme::Midpoint,
        dt_backward: (direction == GreenDirection::Advanced).then_some(h),
        dt_forward: (direction == GreenDirection::Retarded).then_some(h),
        epsilon: None,
        picard: None,
        max_hermiticity_residual: herm,
    };
    let result = rec.finish(times, meta);
    Ok(GreenSolution { direction, t0, dt: h, result, pipeline })
}

/// Retarded Green operator applied to `f`.
pub fn green_plus(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    source: &dyn Source,
    config: &EvolutionConfig,
) -> Result<GreenSolution> {
    green(spacetime, rep, mesh, source, config, GreenDirection::Retarded)
}

/// Advanced Green operator applied to `f`.
pub fn green_minus(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    source: &dyn Source,
    config: &EvolutionConfig,
) -> Result<GreenSolution> {
    green(spacetime, rep, mesh, source, config, GreenDirection::Advanced)
}

/// `chi((t - t_center) / half_width) phi` with `phi` a fixed reduced field.
#[derive(Debug, Clone)]
pub struct SeparableHistory {
    pub profile: SpinorField,
    pub t_center: f64,
    pub half_width: f64,
}

impl SeparableHistory {
    pub fn chi(&self, t: f64) -> f64 {
        smooth_bump((t - self.t_center) / self.half_width)
    }

    pub fn chi_dot(&self, t: f64) -> f64 {
        smooth_bump_derivative((t - self.t_center) / self.half_width) / self.half_width
    }
}

impl GreenSolution {
    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn times(&self) -> &[f64] {
        &self.result.times
    }

    pub fn reduced(&self) -> &[SpinorField] {
        &self.result.reduced
    }

    pub fn physical(&self) -> &[SpinorField] {
        &self.result.physical
    }

    /// `||D_M G f - f|| / ||f||` over the interior grid times, with `D_M` discretized
    /// in the reduced picture as `-gamma(e_0)` times the central difference plus `i D~`.
    pub fn equation_residual(&self, source: &dyn Source) -> Result<f64> {
        let cache = OperatorCache::new(&self.pipeline)?;
        let red = self.pipeline.reduction();
        let times = &self.result.times;
        let psi = &self.result.reduced;
        let (mut num, mut den) = (0.0, 0.0);
        for n in 1..times.len().saturating_sub(1) {
            let t = times[n];
            let dc = cache.at(t)?;
            let h = times[n + 1] - times[n - 1];
            let mut r = (psi[n + 1].values() - psi[n - 1].values()) / C64::from(h);
            r += dc.lift(&dc.apply(&dc.project(psi[n].values()))) * C64::new(0.0, 1.0);
            let f = self.pipeline.reduced_source(&source.eval(self.pipeline.mesh(), t));
            r -= f.values();
            num += red.reference_norm(&r).powi(2);
            den += red.reference_norm(f.values()).powi(2);
        }
        Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
    }
}

/// Applies `G^+` or `G^-` to `D_M psi` for a separable `psi` and returns
/// `||G D_M psi - psi|| / ||psi||` over the grid.
pub fn left_inverse_error(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    history: &SeparableHistory,
    config: &EvolutionConfig,
    direction: GreenDirection,
) -> Result<f64> {
    let pipeline = Pipeline::new(spacetime, rep, mesh)?;
    let cache = OperatorCache::new(&pipeline)?;
    let dc0 = cache.at(history.t_center)?;
    let phi = SpinorField::from_values(mesh.clone(), 0.0, dc0.lift(&dc0.project(history.profile.values())));
    let support = (history.t_center - history.half_width, history.t_center + history.half_width);
    let d_m = |m: &Arc<Mesh>, t: f64| -> SpinorField {
        let chi = history.chi(t);
        if chi == 0.0 {
            return SpinorField::zeros(m.clone(), t);
        }
        let dc = cache.at(t).expect("operator assembled at the center time");
        let dphi = dc.lift(&dc.apply(&dc.project(phi.values())));
        let ft = phi.values() * C64::from(history.chi_dot(t)) + dphi * C64::new(0.0, chi);
        pipeline.physical_source(&SpinorField::from_values(m.clone(), t, ft))
    };
    let source = FnSource { support: Some(support), f: d_m };
    let solution = green(spacetime, rep, mesh, &source, config, direction)?;
    let red = pipeline.reduction();
    let (mut num, mut den) = (0.0, 0.0);
    for (t, field) in solution.result.times.iter().zip(&solution.result.reduced) {
        let exact = phi.values() * C64::from(history.chi(*t));
        num += red.reference_norm(&(field.values() - &exact)).powi(2);
        den += red.reference_norm(&exact).powi(2);
    }
    Ok((num / den).sqrt())
}
