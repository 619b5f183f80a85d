use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slice_mass, slice_weights};
use crate::data::{Bump, BumpSource, NoSource, Source};
use crate::error::{Error, Result};
use crate::evolution::{solve_cauchy, EvolutionConfig, SolveResult};
use crate::field::SpinorField;
use crate::geometry::{CauchySurface, FoliatedSpacetime};
use crate::mesh::Mesh;
use crate::spin::CliffordRep;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub radial: usize,
    pub angular: usize,
    pub dt: f64,
}

impl Resolution {
    /// Halves the mesh spacing and the time step.
    pub fn refined(&self, surface: CauchySurface) -> Self {
        let angular = match surface {
            CauchySurface::Interval { .. } => self.angular,
            CauchySurface::Annulus { .. } => 2 * self.angular,
        };
        Resolution { radial: 2 * (self.radial - 1) + 1, angular, dt: 0.5 * self.dt }
    }
}

/// Initial datum and source of one run, re-sampled on every mesh.
#[derive(Debug, Clone)]
pub struct DataMember {
    pub datum: Option<Bump>,
    pub amplitude: C64,
    pub source: Option<BumpSource>,
}

impl DataMember {
    pub fn scaled(&self, a: C64) -> Self {
        let mut out = self.clone();
        out.amplitude *= a;
        if let Some(s) = &mut out.source {
            s.amplitude *= a;
        }
        out
    }

    pub fn initial(&self, mesh: &Arc<Mesh>) -> SpinorField {
        match &self.datum {
            Some(b) => b.field(mesh, 0.0).scaled(self.amplitude),
            None => SpinorField::zeros(mesh.clone(), 0.0),
        }
    }

    pub fn source_ref(&self) -> &dyn Source {
        match &self.source {
            Some(s) => s,
            None => &NoSource,
        }
    }
}

/// Geometry, scheme and data shared by the runs of a study.
#[derive(Debug, Clone)]
pub struct StudyTemplate {
    pub spacetime: FoliatedSpacetime,
    pub rep: CliffordRep,
    pub data: DataMember,
    pub config: EvolutionConfig,
}

impl StudyTemplate {
    pub fn run(&self, member: &DataMember, res: Resolution, stride: usize) -> Result<SolveResult> {
        let mesh = Arc::new(Mesh::build(&self.spacetime, res.radial, res.angular)?);
        let mut config = self.config.clone();
        config.dt = res.dt;
        config.snapshot_stride = stride;
        solve_cauchy(&self.spacetime, &self.rep, &mesh, &member.initial(&mesh), member.source_ref(), &config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub resolutions: Vec<Resolution>,
    /// `sup_t ||u_l - u_{l+1}||` on the coarsest nodes and times.
    pub differences_l2: Vec<f64>,
    pub differences_max: Vec<f64>,
    /// `log2` of successive difference ratios.
    pub orders_l2: Vec<f64>,
    pub orders_max: Vec<f64>,
    /// `sup_t ||u_l||` per level.
    pub norms: Vec<f64>,
}

fn nesting_ratio(coarse: &Resolution, fine: &Resolution, surface: CauchySurface) -> Result<usize> {
    let r = (fine.radial - 1) / (coarse.radial - 1);
    let nested_radial = r >= 1 && (fine.radial - 1) == r * (coarse.radial - 1);
    let nested_angular = match surface {
        CauchySurface::Interval { .. } => true,
        CauchySurface::Annulus { .. } => fine.angular == r * coarse.angular,
    };
    let nested_time = ((coarse.dt / fine.dt) - r as f64).abs() < 1e-9 * r as f64;
    if !(nested_radial && nested_angular && nested_time) {
        return Err(Error::Config(format!("resolutions {coarse:?} and {fine:?} are not nested by a common factor")));
    }
    Ok(r)
}

/// Self-convergence study over nested resolutions (coarsest first).
pub fn convergence_study(template: &StudyTemplate, resolutions: &[Resolution]) -> Result<ConvergenceReport> {
    if resolutions.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two resolutions".into()));
    }
    let surface = template.spacetime.surface();
    let ratios = resolutions.iter().map(|r| nesting_ratio(&resolutions[0], r, surface)).collect::<Result<Vec<_>>>()?;
    let run = |(res, ratio): (&Resolution, &usize)| template.run(&template.data, *res, *ratio);
    let results: Vec<SolveResult> = if template.config.parallel {
        resolutions.par_iter().zip(ratios.par_iter()).map(run).collect::<Result<_>>()?
    } else {
        resolutions.iter().zip(ratios.iter()).map(run).collect::<Result<_>>()?
    };

    let coarse = &results[0];
    let cmesh = coarse.physical[0].mesh().clone();
    let n_times = coarse.physical.len();
    for (res, ratio) in results.iter().zip(&ratios) {
        if res.physical.len() != n_times
            || res.physical.iter().zip(&coarse.physical).any(|(a, b)| (a.t() - b.t()).abs() > 1e-9 * (1.0 + b.t().abs()))
        {
            return Err(Error::Config(format!(
                "time grids are not nested with ratio {ratio}; pick dt so that both window ends are whole multiples of it"
            )));
        }
    }
    // Restriction of each level onto the coarse nodes.
    let restrict = |field: &SpinorField, ratio: usize| -> SpinorField {
        let m = field.mesh();
        SpinorField::from_fn(cmesh.clone(), field.t(), |node, _| {
            let (i, k) = (cmesh.radial_index(node), cmesh.angular_index(node));
            let fine_k = if m.angular_count() == 1 { 0 } else { k * ratio };
            field.get(m.node(i * ratio, fine_k))
        })
    };
    let restricted: Vec<Vec<SpinorField>> =
        results.iter().zip(&ratios).map(|(r, &ratio)| r.physical.iter().map(|f| restrict(f, ratio)).collect()).collect();

    let mut report = ConvergenceReport {
        resolutions: resolutions.to_vec(),
        differences_l2: Vec::new(),
        differences_max: Vec::new(),
        orders_l2: Vec::new(),
        orders_max: Vec::new(),
        norms: Vec::new(),
    };
    for level in &restricted {
        report.norms.push(level.iter().map(|f| slice_mass(&template.spacetime, f, |_| true).sqrt()).fold(0.0, f64::max));
    }
    for w in restricted.windows(2) {
        let (mut l2, mut mx) = (0.0f64, 0.0f64);
        for (a, b) in w[0].iter().zip(&w[1]) {
            let d = a.sub(b);
            l2 = l2.max(slice_mass(&template.spacetime, &d, |_| true).sqrt());
            mx = mx.max(d.max_abs());
        }
        report.differences_l2.push(l2);
        report.differences_max.push(mx);
    }
    let order = |e: &[f64], k: usize| -> f64 {
        let r = (ratios[k + 1] as f64) / (ratios[k] as f64);
        (e[k] / e[k + 1]).ln() / r.ln()
    };
    for k in 0..report.differences_l2.len().saturating_sub(1) {
        report.orders_l2.push(order(&report.differences_l2, k));
        report.orders_max.push(order(&report.differences_max, k));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// `(i, j, ||psi_i - psi_j|| / ||data_i - data_j||)`.
    pub ratios: Vec<(usize, usize, f64)>,
    pub max_ratio: f64,
    /// `1 + sqrt(T)` with `T` the largest distance of the window from `t = 0`.
    pub bound: f64,
}

/// Lipschitz-type ratios of solution differences to data differences over a family.
pub fn continuity_study(template: &StudyTemplate, family: &[DataMember], res: Resolution) -> Result<ContinuityReport> {
    let run = |m: &DataMember| template.run(m, res, 1);
    let results: Vec<SolveResult> = if template.config.parallel {
        family.par_iter().map(run).collect::<Result<_>>()?
    } else {
        family.iter().map(run).collect::<Result<_>>()?
    };
    let st = &template.spacetime;
    let mesh = results[0].physical[0].mesh().clone();
    let times = results[0].times.clone();
    let mut ratios = Vec::new();
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let dpsi = results[i]
                .physical
                .iter()
                .zip(&results[j].physical)
                .map(|(a, b)| slice_mass(st, &a.sub(b), |_| true).sqrt())
                .fold(0.0, f64::max);
            let d0 = slice_mass(st, &family[i].initial(&mesh).sub(&family[j].initial(&mesh)), |_| true);
            let mut df = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for &t in &times {
                let diff = family[i].source_ref().eval(&mesh, t).sub(&family[j].source_ref().eval(&mesh, t));
                let w = slice_weights(st, &mesh, t);
                let v: f64 = (0..mesh.node_count())
                    .map(|n| w[n] * (diff.values()[2 * n].norm_sqr() + diff.values()[2 * n + 1].norm_sqr()))
                    .sum();
                if let Some((tp, vp)) = prev {
                    df += 0.5 * (t - tp) * (v + vp);
                }
                prev = Some((t, v));
            }
            let ddata = (d0 + df).sqrt();
            if ddata > 0.0 {
                ratios.push((i, j, dpsi / ddata));
            }
        }
    }
    let (ta, tb) = st.window();
    let max_ratio = ratios.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(ContinuityReport { ratios, max_ratio, bound: 1.0 + ta.abs().max(tb).sqrt() })
}

fn sup_norm(st: &FoliatedSpacetime, r: &SolveResult) -> f64 {
    r.physical.iter().map(|f| slice_mass(st, f, |_| true).sqrt()).fold(0.0, f64::max)
}

fn sup_distance(st: &FoliatedSpacetime, a: &SolveResult, b: &SolveResult, scale_b: C64) -> f64 {
    a.physical
        .iter()
        .zip(&b.physical)
        .map(|(x, y)| slice_mass(st, &x.sub(&y.scaled(scale_b)), |_| true).sqrt())
        .fold(0.0, f64::max)
}

/// `max_alpha sup_t ||psi[alpha d] - alpha psi[d]|| / sup_t ||alpha psi[d]||`.
pub fn linearity_residual(template: &StudyTemplate, res: Resolution, alphas: &[f64]) -> Result<f64> {
    let base = template.run(&template.data, res, 1)?;
    let scale = sup_norm(&template.spacetime, &base);
    let mut worst: f64 = 0.0;
    for &a in alphas {
        let scaled = template.run(&template.data.scaled(C64::from(a)), res, 1)?;
        let d = sup_distance(&template.spacetime, &scaled, &base, C64::from(a));
        if scale > 0.0 {
            worst = worst.max(d / (a.abs() * scale));
        } else {
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Relative residual of `psi[d1 + d2] - psi[d1] - psi[d2]`, with the sum
/// realised by summing the sampled data.
pub fn superposition_residual(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    a: (&SpinorField, &dyn Source),
    b: (&SpinorField, &dyn Source),
    config: &EvolutionConfig,
) -> Result<f64> {
    let ra = solve_cauchy(spacetime, rep, mesh, a.0, a.1, config)?;
    let rb = solve_cauchy(spacetime, rep, mesh, b.0, b.1, config)?;
    let sum_source = crate::data::FnSource {
        support: match (a.1.time_support(), b.1.time_support()) {
            (None, s) | (s, None) => s,
            (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
        },
        f: |m: &Arc<Mesh>, t: f64| a.1.eval(m, t).add(&b.1.eval(m, t)),
    };
    let rs = solve_cauchy(spacetime, rep, mesh, &a.0.add(b.0), &sum_source, config)?;
    let scale = sup_norm(spacetime, &ra).max(sup_norm(spacetime, &rb));
    let worst = rs
        .physical
        .iter()
        .zip(ra.physical.iter().zip(&rb.physical))
        .map(|(s, (x, y))| slice_mass(spacetime, &s.sub(&x.add(y)), |_| true).sqrt())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { worst / scale } else { worst })
}
