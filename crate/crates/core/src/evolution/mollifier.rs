use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::midpoint::{prepare_datum, source_coords, OperatorCache};
use super::{split_grid, step_of, EvolutionConfig, Pipeline, Recorder, Scheme, SchemeMeta, SolveResult};
use crate::boundary::{ConstrainedDirac, Coords};
use crate::data::Source;
use crate::dirac::DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::geometry::FoliatedSpacetime;
use crate::mesh::Mesh;
use crate::spin::CliffordRep;
use crate::C64;

/// Spectral calculus of `D_c`, one eigensystem per Fourier mode.
#[derive(Debug, Clone)]
pub struct Mollifier {
    values: Vec<DVector<f64>>,
    vectors: Vec<DMatrix<C64>>,
}

fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

impl Mollifier {
    pub fn new(dc: &ConstrainedDirac) -> Result<Self> {
        if let Some(&big) = dc.mode_dims().iter().find(|&&d| d > DENSE_LIMIT) {
            return Err(Error::Solver(format!("mode of size {big} exceeds the dense limit {DENSE_LIMIT}")));
        }
        let (values, vectors) = dc
            .dense_modes()
            .into_iter()
            .map(|m| {
                let e = m.symmetric_eigen();
                (e.eigenvalues, e.eigenvectors)
            })
            .unzip();
        Ok(Mollifier { values, vectors })
    }

    /// From explicit per-mode eigenvalues and unitary eigenvector matrices.
    pub fn from_eigensystems(values: Vec<DVector<f64>>, vectors: Vec<DMatrix<C64>>) -> Self {
        Mollifier { values, vectors }
    }

    fn spectral(&self, c: &Coords, g: impl Fn(f64) -> f64) -> Coords {
        c.iter()
            .zip(self.values.iter().zip(&self.vectors))
            .map(|(v, (lam, vecs))| {
                let mut w = vecs.adjoint() * v;
                for (wk, &l) in w.iter_mut().zip(lam.iter()) {
                    *wk *= g(l);
                }
                vecs * w
            })
            .collect()
    }

    /// `J^eps c = V diag(exp(-eps <lambda>)) V^* c`.
    pub fn apply(&self, eps: f64, c: &Coords) -> Coords {
        self.spectral(c, |l| (-eps * bracket(l)).exp())
    }

    /// Dense per-mode `J^eps D_c J^eps`.
    pub fn regularized(&self, eps: f64) -> Vec<DMatrix<C64>> {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(lam, vecs)| {
                let d = DVector::from_iterator(lam.len(), lam.iter().map(|&l| C64::from(l * (-2.0 * eps * bracket(l)).exp())));
                vecs * DMatrix::from_diagonal(&d) * vecs.adjoint()
            })
            .collect()
    }

    /// Operator norm of `J^eps D_c J^eps`.
    pub fn regularized_norm(&self, eps: f64) -> f64 {
        self.values.iter().flat_map(|l| l.iter()).map(|&l| l.abs() * (-2.0 * eps * bracket(l)).exp()).fold(0.0, f64::max)
    }
}

/// `J^eps c` for the constrained operator `dc`.
pub fn mollifier_apply(dc: &ConstrainedDirac, eps: f64, c: &Coords) -> Result<Coords> {
    Ok(Mollifier::new(dc)?.apply(eps, c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowLog {
    pub t_start: f64,
    pub t_end: f64,
    pub iterations: usize,
    /// Largest ratio of successive iterate differences.
    pub max_contraction: f64,
    pub final_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardLog {
    pub epsilon: f64,
    /// `sup_t ||J D J||` over the grid.
    pub generator_norm: f64,
    pub windows: Vec<WindowLog>,
}

impl PicardLog {
    pub fn max_contraction(&self) -> f64 {
        self.windows.iter().map(|w| w.max_contraction).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations).sum()
    }
}

/// Right-hand side pieces of the integral map at one grid time.
struct Slice {
    dc: Arc<ConstrainedDirac>,
    generator: Arc<Vec<DMatrix<C64>>>,
    source: Option<DVector<C64>>,
}

impl Slice {
    /// `f~ - i J D J u` in node space.
    fn integrand(&self, u: &DVector<C64>) -> DVector<C64> {
        let c = self.dc.project(u);
        let minus_i = C64::new(0.0, -1.0);
        let g: Coords = c.iter().zip(self.generator.iter()).map(|(ck, m)| m * ck * minus_i).collect();
        let mut out = self.dc.lift(&g);
        if let Some(f) = &self.source {
            out += f;
        }
        out
    }
}

/// Picard iteration of `(T u)_t = u_a + int_a^t [f~ - i J D J u]` along `order`.
#[allow(clippy::too_many_arguments)]
fn march(
    pipeline: &Pipeline,
    cache: &OperatorCache<'_>,
    times: &[f64],
    order: &[usize],
    start: DVector<C64>,
    source: &dyn Source,
    config: &EvolutionConfig,
    eps: f64,
    recorder: &mut Recorder<'_>,
    log: &mut PicardLog,
) -> Result<f64> {
    if order.len() < 2 {
        return Ok(0.0);
    }
    let red = pipeline.reduction();
    let mut herm: f64 = 0.0;
    let mut slices = Vec::with_capacity(order.len());
    let mut shared: Option<(Arc<ConstrainedDirac>, Arc<Vec<DMatrix<C64>>>, f64)> = None;
    for &j in order {
        let t = times[j];
        let dc = cache.at(t)?;
        herm = herm.max(dc.hermiticity_residual());
        let (generator, norm) = match &shared {
            Some((prev, g, n)) if Arc::ptr_eq(prev, &dc) => (g.clone(), *n),
            _ => {
                let m = Mollifier::new(&dc)?;
                let g = Arc::new(m.regularized(eps));
                let n = m.regularized_norm(eps);
                shared = Some((dc.clone(), g.clone(), n));
                (g, n)
            }
        };
        log.generator_norm = log.generator_norm.max(norm);
        let source = source_coords(pipeline, source, &dc, t)?.map(|s| dc.lift(&s));
        slices.push(Slice { dc, generator, source });
    }

    let dt = (times[order[1]] - times[order[0]]).abs();
    let target = config.picard.contraction_target;
    let per_window = if log.generator_norm == 0.0 {
        order.len() - 1
    } else {
        (target / (dt * log.generator_norm)).floor() as usize
    };
    if per_window == 0 {
        return Err(Error::Picard(format!(
            "no contraction even on a single step: dt * sup||JDJ|| = {:.3e} exceeds {target}",
            dt * log.generator_norm
        )));
    }

    let mut u: Vec<DVector<C64>> = vec![start];
    let mut a = 0;
    while a + 1 < order.len() {
        let b = (a + per_window).min(order.len() - 1);
        let ua = u[a].clone();
        let ga = slices[a].integrand(&ua);
        let mut iterate: Vec<DVector<C64>> = vec![ua.clone(); b - a];
        let mut prev_diff = f64::INFINITY;
        let mut window = WindowLog {
            t_start: times[order[a]],
            t_end: times[order[b]],
            iterations: 0,
            max_contraction: 0.0,
            final_difference: f64::INFINITY,
        };
        loop {
            window.iterations += 1;
            if window.iterations > config.picard.max_iter {
                return Err(Error::Picard(format!(
                    "window [{}, {}] did not converge in {} iterations (last difference {:e})",
                    window.t_start, window.t_end, config.picard.max_iter, window.final_difference
                )));
            }
            let mut next = Vec::with_capacity(b - a);
            let mut acc = ua.clone();
            let mut g_prev = ga.clone();
            let mut diff: f64 = 0.0;
            let mut scale = red.reference_norm(&ua);
            for k in 0..(b - a) {
                let h = times[order[a + k + 1]] - times[order[a + k]];
                let g_next = slices[a + k + 1].integrand(&iterate[k]);
                acc += (&g_prev + &g_next) * C64::from(0.5 * h);
                diff = diff.max(red.reference_norm(&(&acc - &iterate[k])));
                scale = scale.max(red.reference_norm(&acc));
                next.push(acc.clone());
                g_prev = g_next;
            }
            if prev_diff.is_finite() && prev_diff > 1e-13 * scale {
                window.max_contraction = window.max_contraction.max(diff / prev_diff);
            }
            iterate = next;
            window.final_difference = diff;
            if diff <= config.picard.tol * scale || scale == 0.0 {
                break;
            }
            prev_diff = diff;
        }
        for (k, v) in iterate.into_iter().enumerate() {
            let j = order[a + k + 1];
            recorder.push(j, times[j], &v, 0.0, None);
            u.push(v);
        }
        log.windows.push(window);
        a = b;
    }
    Ok(herm)
}

pub(super) fn solve_single(
    pipeline: &Pipeline,
    psi0: &SpinorField,
    source: &dyn Source,
    config: &EvolutionConfig,
    eps: f64,
) -> Result<SolveResult> {
    let psi0 = prepare_datum(pipeline, psi0)?;
    let grid = split_grid(pipeline.physical().window(), config.dt)?;
    let last = grid.times.len() - 1;
    let cache = OperatorCache::new(pipeline)?;
    let v0 = pipeline.to_reduced(&psi0).into_values();
    let mut rec = Recorder::new(pipeline, source, config.snapshot_stride, last);
    rec.push(grid.origin, 0.0, &v0, 0.0, Some(&psi0));
    let mut log = PicardLog { epsilon: eps, generator_norm: 0.0, windows: Vec::new() };
    let backward: Vec<usize> = (0..=grid.origin).rev().collect();
    let forward: Vec<usize> = (grid.origin..=last).collect();
    let h1 = march(pipeline, &cache, &grid.times, &backward, v0.clone(), source, config, eps, &mut rec, &mut log)?;
    let h2 = march(pipeline, &cache, &grid.times, &forward, v0, source, config, eps, &mut rec, &mut log)?;
    let meta = SchemeMeta {
        scheme: Scheme::MollifiedPicard,
        dt_backward: step_of(&grid.times, grid.origin, 0),
        dt_forward: step_of(&grid.times, grid.origin, last),
        epsilon: Some(eps),
        picard: Some(log),
        max_hermiticity_residual: h1.max(h2),
    };
    Ok(rec.finish(grid.times, meta))
}

/// Solutions of the regularized problems along the schedule.
#[derive(Debug, Clone)]
pub struct MollifiedResult {
    pub epsilons: Vec<f64>,
    pub results: Vec<SolveResult>,
    /// `sup_t ||psi~^{eps_j} - psi~^{eps_{j+1}}||`.
    pub differences: Vec<f64>,
    /// Linear extrapolation in `eps` from the last two members, per snapshot (reduced picture).
    pub limit: Vec<SpinorField>,
}

impl MollifiedResult {
    pub fn logs(&self) -> Vec<&PicardLog> {
        self.results.iter().filter_map(|r| r.meta.picard.as_ref()).collect()
    }
}

/// `sup` over shared snapshots of the reference-norm distance of the reduced fields.
pub fn sup_reduced_distance(pipeline: &Pipeline, a: &SolveResult, b: &SolveResult) -> f64 {
    let red = pipeline.reduction();
    a.reduced
        .iter()
        .zip(&b.reduced)
        .map(|(x, y)| red.reference_norm(&(x.values() - y.values())))
        .fold(0.0, f64::max)
}

/// Solves the regularized problem for every `eps` of the schedule.
pub fn mollified_picard_solve(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    psi0: &SpinorField,
    source: &dyn Source,
    config: &EvolutionConfig,
) -> Result<MollifiedResult> {
    let mut config = config.clone();
    config.scheme = Scheme::MollifiedPicard;
    config.validate()?;
    let pipeline = Pipeline::new(spacetime, rep, mesh)?;
    let eps = config.picard.epsilon_schedule.clone();
    let run = |&e: &f64| solve_single(&pipeline, psi0, source, &config, e);
    let results: Vec<SolveResult> = if config.parallel {
        eps.par_iter().map(run).collect::<Result<_>>()?
    } else {
        eps.iter().map(run).collect::<Result<_>>()?
    };
    let differences = results.windows(2).map(|w| sup_reduced_distance(&pipeline, &w[0], &w[1])).collect();
    let limit = match results.len() {
        1 => results[0].reduced.clone(),
        n => {
            let (e1, e2) = (eps[n - 2], eps[n - 1]);
            let (w1, w2) = (-e2 / (e1 - e2), e1 / (e1 - e2));
            results[n - 2]
                .reduced
                .iter()
                .zip(&results[n - 1].reduced)
                .map(|(a, b)| a.scaled(C64::from(w1)).add(&b.scaled(C64::from(w2))))
                .collect()
        }
    };
    Ok(MollifiedResult { epsilons: eps, results, differences, limit })
}
