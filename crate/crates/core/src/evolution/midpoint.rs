use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_interior, split_grid, step_of, EvolutionConfig, Pipeline, Recorder, Scheme, SchemeMeta, SolveResult};
use crate::banded::{BandedLu, BandedMatrix};
use crate::boundary::{ConstrainedDirac, Coords, ModeBasis};
use crate::data::Source;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::C64;

/// Factorized implicit-midpoint step `(1 + i dt/2 D) c+ = (1 - i dt/2 D) c + dt s`
/// for per-mode banded `D`.
#[derive(Debug, Clone)]
pub struct CayleyFactors {
    dt: f64,
    implicit: Vec<BandedLu>,
    explicit: Vec<BandedMatrix>,
}

impl CayleyFactors {
    pub fn new(operators: &[BandedMatrix], dt: f64, parallel: bool) -> Result<Self> {
        let half = C64::new(0.0, 0.5 * dt);
        let one = C64::new(1.0, 0.0);
        let factor = |m: &BandedMatrix| -> Result<(BandedLu, BandedMatrix)> {
            Ok((m.shifted(one, half).lu()?, m.shifted(one, -half)))
        };
        let pairs: Vec<(BandedLu, BandedMatrix)> = if parallel {
            operators.par_iter().map(factor).collect::<Result<_>>()?
        } else {
            operators.iter().map(factor).collect::<Result<_>>()?
        };
        let (implicit, explicit) = pairs.into_iter().unzip();
        Ok(CayleyFactors { dt, implicit, explicit })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, c: &Coords, source: Option<&Coords>, parallel: bool) -> Coords {
        let one_mode = |k: usize| {
            let mut rhs = self.explicit[k].mul_vec(&c[k]);
            if let Some(s) = source {
                rhs.axpy(C64::from(self.dt), &s[k], C64::new(1.0, 0.0));
            }
            self.implicit[k].solve(&rhs)
        };
        if parallel {
            (0..c.len()).into_par_iter().map(one_mode).collect()
        } else {
            (0..c.len()).map(one_mode).collect()
        }
    }
}

/// One midpoint step in node space: projects `psi` and `f_mid` onto the
/// constrained subspace of `dc`, advances the coordinates, and lifts back.
pub fn midpoint_step(
    dc: &ConstrainedDirac,
    psi: &DVector<C64>,
    f_mid: Option<&DVector<C64>>,
    dt: f64,
) -> Result<DVector<C64>> {
    let factors = CayleyFactors::new(dc.operators(), dt, false)?;
    let c = dc.project(psi);
    let s = f_mid.map(|f| dc.project(f));
    Ok(dc.lift(&factors.step(&c, s.as_ref(), false)))
}

/// Supplies `D_c` at arbitrary times, caching what does not change.
pub(crate) struct OperatorCache<'a> {
    pipeline: &'a Pipeline,
    fixed: Option<Arc<ConstrainedDirac>>,
    bases: Option<Vec<ModeBasis>>,
}

impl<'a> OperatorCache<'a> {
    pub(crate) fn new(pipeline: &'a Pipeline) -> Result<Self> {
        let red = pipeline.reduction();
        let t0 = red.spacetime().window().0.max(0.0).min(red.spacetime().window().1);
        if red.is_static() {
            return Ok(OperatorCache { pipeline, fixed: Some(Arc::new(red.constrained(t0)?)), bases: None });
        }
        let bases = if red.spacetime().boundary_is_static() { Some(red.bases(&red.operator(t0)?)?) } else { None };
        Ok(OperatorCache { pipeline, fixed: None, bases })
    }

    pub(crate) fn at(&self, t: f64) -> Result<Arc<ConstrainedDirac>> {
        if let Some(dc) = &self.fixed {
            return Ok(dc.clone());
        }
        let red = self.pipeline.reduction();
        Ok(Arc::new(match &self.bases {
            Some(b) => ConstrainedDirac::with_bases(&red.operator(t)?, b.clone())?,
            None => red.constrained(t)?,
        }))
    }

    /// True when the constrained basis is the same at every time.
    pub(crate) fn fixed_basis(&self) -> bool {
        self.fixed.is_some() || self.bases.is_some()
    }
}

/// Reduced source `f~(t)` projected onto `dc`, or `None` outside the support.
pub(crate) fn source_coords(pipeline: &Pipeline, source: &dyn Source, dc: &ConstrainedDirac, t: f64) -> Result<Option<Coords>> {
    match source.time_support() {
        Some((a, b)) if t >= a && t <= b => {
            let f = source.eval(pipeline.mesh(), t);
            check_interior(&f, "source")?;
            let ft = pipeline.reduced_source(&f);
            Ok(Some(dc.project(ft.values())))
        }
        _ => Ok(None),
    }
}

pub(crate) fn relative_projection_residual(pipeline: &Pipeline, v: &DVector<C64>, back: &DVector<C64>) -> f64 {
    let red = pipeline.reduction();
    let n = red.reference_norm(v);
    if n == 0.0 {
        0.0
    } else {
        red.reference_norm(&(v - back)) / n
    }
}

/// Marches the midpoint scheme along `order` (grid indices moving away from the start).
pub(crate) fn march(
    pipeline: &Pipeline,
    cache: &OperatorCache<'_>,
    times: &[f64],
    order: &[usize],
    start: DVector<C64>,
    source: &dyn Source,
    config: &EvolutionConfig,
    recorder: &mut Recorder<'_>,
) -> Result<f64> {
    let mut v = start;
    let mut herm: f64 = 0.0;
    let mut state: Option<(Arc<ConstrainedDirac>, CayleyFactors, Coords)> = None;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        let dt = times[j] - times[i];
        let tm = times[i] + 0.5 * dt;
        let dc = cache.at(tm)?;
        herm = herm.max(dc.hermiticity_residual());
        let reuse = matches!(&state, Some((prev, f, _)) if cache.fixed_basis() && Arc::ptr_eq(prev, &dc) && f.dt() == dt);
        let (factors, c, residual) = if reuse {
            let (_, f, c) = state.take().expect("checked above");
            (f, c, 0.0)
        } else {
            let c = match state.take() {
                Some((_, _, c)) if cache.fixed_basis() => c,
                _ => dc.project(&v),
            };
            let back = dc.lift(&c);
            let residual = relative_projection_residual(pipeline, &v, &back);
            (CayleyFactors::new(dc.operators(), dt, config.parallel)?, c, residual)
        };
        let s = source_coords(pipeline, source, &dc, tm)?;
        let next = factors.step(&c, s.as_ref(), config.parallel);
        v = dc.lift(&next);
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Solver(format!("non-finite state at t = {}", times[j])));
        }
        recorder.push(j, times[j], &v, residual, None);
        state = Some((dc, factors, next));
    }
    Ok(herm)
}

pub(crate) fn prepare_datum(pipeline: &Pipeline, psi0: &SpinorField) -> Result<SpinorField> {
    if psi0.mesh().hash() != pipeline.mesh().hash() {
        return Err(Error::Data("initial datum lives on a different mesh".into()));
    }
    check_interior(psi0, "initial datum")?;
    let mut psi0 = psi0.clone();
    psi0.set_t(0.0);
    Ok(psi0)
}

pub(super) fn solve(pipeline: &Pipeline, psi0: &SpinorField, source: &dyn Source, config: &EvolutionConfig) -> Result<SolveResult> {
    let psi0 = prepare_datum(pipeline, psi0)?;
    let grid = split_grid(pipeline.physical().window(), config.dt)?;
    let last = grid.times.len() - 1;
    let cache = OperatorCache::new(pipeline)?;
    let v0 = pipeline.to_reduced(&psi0).into_values();

    let mut rec = Recorder::new(pipeline, source, config.snapshot_stride, last);
    rec.push(grid.origin, 0.0, &v0, 0.0, Some(&psi0));
    let backward: Vec<usize> = (0..=grid.origin).rev().collect();
    let forward: Vec<usize> = (grid.origin..=last).collect();
    let h1 = march(pipeline, &cache, &grid.times, &backward, v0.clone(), source, config, &mut rec)?;
    let h2 = march(pipeline, &cache, &grid.times, &forward, v0, source, config, &mut rec)?;
    let meta = SchemeMeta {
        scheme: Scheme::Midpoint,
        dt_backward: step_of(&grid.times, grid.origin, 0),
        dt_forward: step_of(&grid.times, grid.origin, last),
        epsilon: None,
        picard: None,
        max_hermiticity_residual: h1.max(h2),
    };
    Ok(rec.finish(grid.times, meta))
}
