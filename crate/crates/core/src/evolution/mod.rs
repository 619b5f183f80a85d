//! Time evolution of the reduced equation `(d_t + i D~_t) psi~ = f~`.

mod green;
mod midpoint;
mod mollifier;
mod reduction;

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Source;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::geometry::FoliatedSpacetime;
use crate::mesh::Mesh;
use crate::spin::CliffordRep;
use crate::C64;

pub use green::{green_minus, green_plus, left_inverse_error, GreenDirection, GreenSolution, SeparableHistory};
pub use midpoint::{midpoint_step, CayleyFactors};
pub use mollifier::{mollified_picard_solve, mollifier_apply, sup_reduced_distance, MollifiedResult, Mollifier, PicardLog, WindowLog};
pub use reduction::{hamiltonian_reduce, HamiltonianReduction, Pipeline};

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Midpoint,
    MollifiedPicard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Strictly decreasing, positive.
    pub epsilon_schedule: Vec<f64>,
    /// Stop once successive iterates differ by at most `tol` (relative sup norm).
    pub tol: f64,
    pub max_iter: usize,
    /// Target for `|tau| sup ||J D J||` when choosing window lengths.
    pub contraction_target: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { epsilon_schedule: vec![0.2, 0.1, 0.05, 0.025], tol: 1e-12, max_iter: 200, contraction_target: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub picard: PicardConfig,
    /// Run independent Fourier modes on the rayon pool.
    pub parallel: bool,
    /// Keep every `snapshot_stride`-th field (the first and last are always kept).
    pub snapshot_stride: usize,
}

impl EvolutionConfig {
    pub fn midpoint(dt: f64) -> Self {
        EvolutionConfig { dt, scheme: Scheme::Midpoint, picard: PicardConfig::default(), parallel: false, snapshot_stride: 1 }
    }

    pub fn mollified(dt: f64, picard: PicardConfig) -> Self {
        EvolutionConfig { scheme: Scheme::MollifiedPicard, picard, ..Self::midpoint(dt) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if self.scheme == Scheme::MollifiedPicard {
            let eps = &self.picard.epsilon_schedule;
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config(format!("epsilon_schedule must be positive and strictly decreasing, got {eps:?}")));
            }
            if !(self.picard.tol > 0.0) || self.picard.max_iter == 0 {
                return Err(Error::Config("picard_tol must be positive and picard_max_iter at least 1".into()));
            }
            let c = self.picard.contraction_target;
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Config(format!("contraction target must lie in (0, 1), got {c}")));
            }
        }
        Ok(())
    }
}

/// Uniform grid from `start` to `end` (either order) with steps no longer than `dt`.
pub fn directed_grid(start: f64, end: f64, dt: f64) -> Vec<f64> {
    let span = end - start;
    if span == 0.0 {
        return vec![start];
    }
    let n = ((span.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / n as f64;
    (0..=n).map(|k| if k == n { end } else { start + h * k as f64 }).collect()
}

/// Diagnostics recorded at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// `||psi~||` in the reference product.
    pub reduced_norm: f64,
    /// `F(t) = int_{Sigma_t} (psi, gamma(e_0) psi)` of the physical field.
    pub energy: f64,
    /// Boundary flux of the field.
    pub flux: f64,
    /// `||psi~ - Q Q^* W psi~|| / ||psi~||` when the field was re-expanded in a new basis.
    pub projection_residual: f64,
    /// `||f(t)||^2` on `Sigma_t`.
    pub source_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeMeta {
    pub scheme: Scheme,
    pub dt_backward: Option<f64>,
    pub dt_forward: Option<f64>,
    pub epsilon: Option<f64>,
    pub picard: Option<PicardLog>,
    pub max_hermiticity_residual: f64,
}

/// Output of one solve. `times` and `records` cover every grid time; fields
/// are kept at `snapshot_indices` (all of them with stride one).
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub times: Vec<f64>,
    pub snapshot_indices: Vec<usize>,
    pub reduced: Vec<SpinorField>,
    pub physical: Vec<SpinorField>,
    pub records: Vec<StepRecord>,
    pub meta: SchemeMeta,
}

impl SolveResult {
    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_indices.iter().map(|&i| self.times[i]).collect()
    }

    /// Index of the stored snapshot closest to `t`.
    pub fn nearest_snapshot(&self, t: f64) -> usize {
        (0..self.snapshot_indices.len())
            .min_by(|&a, &b| {
                let da = (self.times[self.snapshot_indices[a]] - t).abs();
                let db = (self.times[self.snapshot_indices[b]] - t).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    pub fn max_abs_flux(&self) -> f64 {
        self.records.iter().map(|r| r.flux.abs()).fold(0.0, f64::max)
    }

    pub fn max_energy(&self) -> f64 {
        self.records.iter().map(|r| r.energy).fold(0.0, f64::max)
    }

    /// Largest relative change of the reduced norm from its value at `t = 0`.
    pub fn norm_drift(&self) -> f64 {
        let origin = self.records.iter().find(|r| r.t == 0.0).map(|r| r.reduced_norm).unwrap_or(self.records[0].reduced_norm);
        if origin == 0.0 {
            return self.records.iter().map(|r| r.reduced_norm).fold(0.0, f64::max);
        }
        self.records.iter().map(|r| (r.reduced_norm - origin).abs() / origin).fold(0.0, f64::max)
    }
}

/// Collects records and snapshots as an engine produces states.
pub(crate) struct Recorder<'a> {
    pipeline: &'a Pipeline,
    source: &'a dyn Source,
    stride: usize,
    last_index: usize,
    entries: Vec<(usize, StepRecord, Option<(SpinorField, SpinorField)>)>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(pipeline: &'a Pipeline, source: &'a dyn Source, stride: usize, last_index: usize) -> Self {
        Recorder { pipeline, source, stride, last_index, entries: Vec::new() }
    }

    /// Records the reduced state at grid index `index`; `physical` overrides the
    /// back-transformed field (used for the exact initial datum).
    pub(crate) fn push(
        &mut self,
        index: usize,
        t: f64,
        values: &DVector<C64>,
        projection_residual: f64,
        physical: Option<&SpinorField>,
    ) {
        let mesh = self.pipeline.mesh().clone();
        let reduced = SpinorField::from_values(mesh.clone(), t, values.clone());
        let phys = match physical {
            Some(p) => p.clone(),
            None => self.pipeline.to_physical(&reduced),
        };
        let red = self.pipeline.reduction();
        let source_norm_sq = if self.source.time_support().is_some() {
            self.pipeline.energy(&self.source.eval(&mesh, t))
        } else {
            0.0
        };
        let record = StepRecord {
            t,
            reduced_norm: red.reference_norm(values),
            energy: self.pipeline.energy(&phys),
            flux: red.boundary_flux(values, t),
            projection_residual,
            source_norm_sq,
        };
        let keep = index % self.stride == 0 || index == self.last_index || physical.is_some();
        self.entries.push((index, record, keep.then_some((reduced, phys))));
    }

    pub(crate) fn finish(mut self, times: Vec<f64>, meta: SchemeMeta) -> SolveResult {
        self.entries.sort_by_key(|e| e.0);
        let mut out = SolveResult {
            times,
            snapshot_indices: Vec::new(),
            reduced: Vec::new(),
            physical: Vec::new(),
            records: Vec::with_capacity(self.entries.len()),
            meta,
        };
        for (index, record, fields) in self.entries {
            out.records.push(record);
            if let Some((r, p)) = fields {
                out.snapshot_indices.push(index);
                out.reduced.push(r);
                out.physical.push(p);
            }
        }
        out
    }
}

/// Checks that an initial datum vanishes on the boundary.
pub(crate) fn check_interior(field: &SpinorField, what: &str) -> Result<()> {
    let scale = field.max_abs();
    if field.max_abs_on_boundary() > 1e-12 * scale {
        return Err(Error::Data(format!("{what} must vanish near the boundary")));
    }
    if !field.is_finite() {
        return Err(Error::Data(format!("{what} has non-finite values")));
    }
    Ok(())
}

/// Solves `D_M psi = f` on the whole window with `psi|_{t=0} = psi_0`.
///
/// The boundary conditions are read from `spacetime`. The snapshot at `t = 0`
/// is `psi_0` itself; the other slices come back through the inverse maps.
pub fn solve_cauchy(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    psi0: &SpinorField,
    source: &dyn Source,
    config: &EvolutionConfig,
) -> Result<SolveResult> {
    config.validate()?;
    let pipeline = Pipeline::new(spacetime, rep, mesh)?;
    match config.scheme {
        Scheme::Midpoint => midpoint::solve(&pipeline, psi0, source, config),
        Scheme::MollifiedPicard => {
            let eps = *config.picard.epsilon_schedule.last().expect("validated schedule");
            mollifier::solve_single(&pipeline, psi0, source, config, eps)
        }
    }
}

/// Grid for a Cauchy solve: backward part, then forward part, meeting at 0.
pub(crate) struct SplitGrid {
    pub times: Vec<f64>,
    pub origin: usize,
}

pub(crate) fn split_grid(window: (f64, f64), dt: f64) -> Result<SplitGrid> {
    let (ta, tb) = window;
    if !(ta <= 0.0 && 0.0 <= tb) {
        return Err(Error::Window(format!("the window [{ta}, {tb}] must contain t = 0")));
    }
    let back = directed_grid(0.0, ta, dt);
    let fwd = directed_grid(0.0, tb, dt);
    let origin = back.len() - 1;
    let mut times: Vec<f64> = back.into_iter().rev().collect();
    times.extend_from_slice(&fwd[1..]);
    Ok(SplitGrid { times, origin })
}

pub(crate) fn step_of(times: &[f64], from: usize, to: usize) -> Option<f64> {
    (from != to).then(|| (times[to] - times[from]).abs() / (to as f64 - from as f64).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_cover_both_directions() {
        let g = split_grid((-0.25, 1.0), 0.1).unwrap();
        assert_eq!(g.times[g.origin], 0.0);
        assert_eq!(g.times[0], -0.25);
        assert_eq!(*g.times.last().unwrap(), 1.0);
        assert!(g.times.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.1 + 1e-12));
        assert!(split_grid((0.5, 1.0), 0.1).is_err());
        assert_eq!(directed_grid(0.0, 0.0, 0.1), vec![0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::midpoint(0.0).validate().is_err());
        let mut bad = PicardConfig::default();
        bad.epsilon_schedule = vec![0.1, 0.2];
        assert!(EvolutionConfig::mollified(0.01, bad).validate().is_err());
        assert!(EvolutionConfig::mollified(0.01, PicardConfig::default()).validate().is_ok());
    }
}
