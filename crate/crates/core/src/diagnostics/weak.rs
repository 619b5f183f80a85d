use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{smooth_bump, smooth_bump_derivative, Source};
use crate::error::{Error, Result};
use crate::evolution::{Pipeline, SolveResult};
use crate::geometry::FoliatedSpacetime;
use crate::spin::CliffordRep;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakReport {
    /// `|(phi, f) - (D^dagger phi, psi)| / (||phi|| (||f|| + ||psi||))` per test field.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Tests the weak formulation against random fields `phi = chi(t) Q c`.
///
/// `chi` is a smooth bump vanishing on the outer fifth of the window at each
/// end, `c` has independent uniform entries, and both pairings are evaluated
/// in the reduced picture with the trapezoid rule over the grid, using
/// `D^dagger phi = -(d_t + i D~) phi` there.
pub fn weak_identity(
    result: &SolveResult,
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    source: &dyn Source,
    count: usize,
    seed: u64,
) -> Result<WeakReport> {
    if result.snapshot_indices.len() != result.times.len() {
        return Err(Error::Data("the weak identity needs a snapshot at every grid time".into()));
    }
    let mesh = result.reduced[0].mesh().clone();
    let pipeline = Pipeline::new(spacetime, rep, &mesh)?;
    let red = pipeline.reduction();
    let w_ref = red.reference_weights();
    let inner = |a: &DVector<C64>, b: &DVector<C64>| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..mesh.node_count() {
            let w = w_ref[mesh.radial_index(n)];
            acc += (a[2 * n].conj() * b[2 * n] + a[2 * n + 1].conj() * b[2 * n + 1]) * w;
        }
        acc
    };

    let times = &result.times;
    let nt = times.len();
    let mut quad = vec![0.0; nt];
    for k in 1..nt {
        let h = times[k] - times[k - 1];
        quad[k - 1] += 0.5 * h;
        quad[k] += 0.5 * h;
    }
    let (ta, tb) = (times[0], times[nt - 1]);
    let (center, half) = (0.5 * (ta + tb), 0.3 * (tb - ta));
    let chi = |t: f64| smooth_bump((t - center) / half);
    let chi_dot = |t: f64| smooth_bump_derivative((t - center) / half) / half;

    let dcs = times.iter().map(|&t| red.constrained(t)).collect::<Result<Vec<_>>>()?;
    let sources: Vec<DVector<C64>> =
        times.iter().map(|&t| pipeline.reduced_source(&source.eval(&mesh, t)).into_values()).collect();
    let f_norm = quad.iter().zip(&sources).map(|(q, f)| q * inner(f, f).re).sum::<f64>().sqrt();
    let psi_norm = quad.iter().zip(&result.reduced).map(|(q, p)| q * inner(p.values(), p.values()).re).sum::<f64>().sqrt();

    let dc_mid = red.constrained(center)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = Vec::with_capacity(count);
    for _ in 0..count {
        let c: Vec<DVector<C64>> = dc_mid
            .mode_dims()
            .into_iter()
            .map(|d| DVector::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        let phi0 = dc_mid.lift(&c);
        let phi0_sq = inner(&phi0, &phi0).re;
        let (mut lhs, mut rhs, mut phi_sq) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        for k in 0..nt {
            let t = times[k];
            let x = chi(t);
            if x == 0.0 && chi_dot(t) == 0.0 {
                continue;
            }
            let dc = &dcs[k];
            let dphi = dc.lift(&dc.apply(&dc.project(&phi0)));
            let adjoint = -(&phi0 * C64::from(chi_dot(t)) + dphi * C64::new(0.0, x));
            lhs += inner(&phi0, &sources[k]) * (quad[k] * x);
            rhs += inner(&adjoint, result.reduced[k].values()) * quad[k];
            phi_sq += quad[k] * x * x * phi0_sq;
        }
        let scale = phi_sq.sqrt() * (f_norm + psi_norm);
        residuals.push(if scale > 0.0 { (lhs - rhs).norm() / scale } else { (lhs - rhs).norm() });
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(WeakReport { residuals, max_residual })
}
