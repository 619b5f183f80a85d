use std::sync::Arc;

use nalgebra::DVector;

use crate::boundary::{boundary_spec, constrain_operator, mode_bases, ConstrainedDirac, ModeBasis};
use crate::dirac::{assemble_reduced_dirac, DiracAssembly};
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::geometry::{conformal_reduce, density_at, validate_assumptions, FoliatedSpacetime, Side, WeightMaps};
use crate::mesh::Mesh;
use crate::spin::{CliffordRep, SpinMatrix, Spinor};
use crate::C64;

/// The identification `U` of every slice with the reference slice `t = 0`.
///
/// `U psi = rho_t psi` with `rho_t = (|h_t| / |h_0|)^{1/4}`; on these diagonal
/// metrics the orthonormal frames `b^-1 d_r, f^-1 d_theta` are parallel along
/// `d_t`, so the frame part of the transport acts trivially on components.
#[derive(Debug, Clone)]
pub struct HamiltonianReduction {
    spacetime: FoliatedSpacetime,
    rep: CliffordRep,
    mesh: Arc<Mesh>,
    beta: SpinMatrix,
}

/// Builds the reduction for a unit-lapse spacetime.
pub fn hamiltonian_reduce(spacetime: &FoliatedSpacetime, rep: &CliffordRep, mesh: &Arc<Mesh>) -> Result<HamiltonianReduction> {
    spacetime.require_unit_lapse()?;
    validate_assumptions(spacetime).into_result()?;
    if rep.dim() != spacetime.spatial_dim() || mesh.dim() != spacetime.spatial_dim() {
        return Err(Error::UnsupportedDimension(rep.dim()));
    }
    Ok(HamiltonianReduction { spacetime: spacetime.clone(), rep: rep.clone(), mesh: mesh.clone(), beta: rep.gamma(0)? })
}

impl HamiltonianReduction {
    pub fn spacetime(&self) -> &FoliatedSpacetime {
        &self.spacetime
    }

    pub fn rep(&self) -> &CliffordRep {
        &self.rep
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn is_static(&self) -> bool {
        self.spacetime.is_static()
    }

    /// `rho_t` at each radial index.
    pub fn density(&self, t: f64) -> Vec<f64> {
        self.mesh.radial_coords().iter().map(|&x| density_at(&self.spacetime, t, x)).collect()
    }

    fn scale_by(&self, field: &SpinorField, factors: &[f64]) -> SpinorField {
        let mut out = field.clone();
        for node in 0..self.mesh.node_count() {
            out.scale_node(node, factors[self.mesh.radial_index(node)]);
        }
        out
    }

    /// `U psi` for a field on `Sigma_t` (time taken from the field).
    pub fn forward(&self, field: &SpinorField) -> SpinorField {
        if self.is_static() {
            return field.clone();
        }
        self.scale_by(field, &self.density(field.t()))
    }

    pub fn inverse(&self, field: &SpinorField) -> SpinorField {
        if self.is_static() {
            return field.clone();
        }
        let inv: Vec<f64> = self.density(field.t()).iter().map(|r| 1.0 / r).collect();
        self.scale_by(field, &inv)
    }

    /// `f~ = -gamma(e_0) U f`, the source of `(d_t + i D~) psi~ = f~`.
    pub fn reduce_source(&self, f: &SpinorField) -> SpinorField {
        self.forward(f).map_spinors(&(-self.beta))
    }

    /// Inverse of [`reduce_source`](Self::reduce_source), using `gamma(e_0)^2 = 1`.
    pub fn expand_source(&self, f: &SpinorField) -> SpinorField {
        self.inverse(&f.map_spinors(&(-self.beta)))
    }

    /// Weights of `L^2(Sigma_t)` per radial index.
    pub fn slice_weights(&self, t: f64) -> Vec<f64> {
        let h = self.mesh.radial_weights();
        let dth = self.mesh.angular_weight();
        self.mesh.radial_coords().iter().zip(h).map(|(&x, &hi)| hi * self.spacetime.sqrt_det(t, x) * dth).collect()
    }

    /// Weights of the fixed reference product.
    pub fn reference_weights(&self) -> Vec<f64> {
        self.slice_weights(0.0)
    }

    pub fn weighted_norm(&self, values: &DVector<C64>, weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        for node in 0..self.mesh.node_count() {
            let w = weights[self.mesh.radial_index(node)];
            acc += w * (values[2 * node].norm_sqr() + values[2 * node + 1].norm_sqr());
        }
        acc.sqrt()
    }

    /// `||psi||_t` on its own slice.
    pub fn slice_norm(&self, field: &SpinorField) -> f64 {
        self.weighted_norm(field.values(), &self.slice_weights(field.t()))
    }

    /// Norm of a reduced field in the reference product.
    pub fn reference_norm(&self, values: &DVector<C64>) -> f64 {
        self.weighted_norm(values, &self.reference_weights())
    }

    /// The reduced spatial operator `D~_t` on the reference slice.
    pub fn operator(&self, t: f64) -> Result<DiracAssembly> {
        assemble_reduced_dirac(&self.spacetime, &self.rep, &self.mesh, t)
    }

    /// Allowed boundary directions of the configured conditions at time `t`.
    pub fn bases(&self, assembly: &DiracAssembly) -> Result<Vec<ModeBasis>> {
        let specs = Side::BOTH
            .iter()
            .map(|&side| boundary_spec(assembly, side, self.spacetime.condition(side)))
            .collect::<Result<Vec<_>>>()?;
        mode_bases(assembly, &specs)
    }

    /// `D~_t` compressed onto the constrained subspace of the configured conditions.
    pub fn constrained(&self, t: f64) -> Result<ConstrainedDirac> {
        let assembly = self.operator(t)?;
        let specs = Side::BOTH
            .iter()
            .map(|&side| boundary_spec(&assembly, side, self.spacetime.condition(side)))
            .collect::<Result<Vec<_>>>()?;
        constrain_operator(&assembly, &specs)
    }

    /// `Im sum_bd w psi^* sigma_n psi` for a reduced field at time `t`; the
    /// discrete `int_{dSigma} (psi, gamma(e_n) psi)` up to the factor `i`.
    pub fn boundary_flux(&self, values: &DVector<C64>, t: f64) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        let dth = self.mesh.angular_weight();
        for side in Side::BOTH {
            let x = self.mesh.radial_coords()[self.mesh.boundary_radial_index(side)];
            let w = self.spacetime.sqrt_det(0.0, x) / self.spacetime.radial_scale().value(t, x) * dth;
            let sigma = self.rep.normal_symbol(side);
            for node in self.mesh.boundary_nodes(side) {
                let v = Spinor::new(values[2 * node], values[2 * node + 1]);
                acc += v.dotc(&(sigma * v)) * w;
            }
        }
        acc.im
    }
}

/// Conformal rescaling plus Hamiltonian reduction: everything needed to move
/// between the physical picture and the reduced equation on the reference slice.
#[derive(Debug, Clone)]
pub struct Pipeline {
    physical: FoliatedSpacetime,
    maps: WeightMaps,
    reduction: HamiltonianReduction,
}

impl Pipeline {
    pub fn new(spacetime: &FoliatedSpacetime, rep: &CliffordRep, mesh: &Arc<Mesh>) -> Result<Self> {
        validate_assumptions(spacetime).into_result()?;
        let (reduced, maps) = conformal_reduce(spacetime)?;
        let reduction = hamiltonian_reduce(&reduced, rep, mesh)?;
        Ok(Pipeline { physical: spacetime.clone(), maps, reduction })
    }

    pub fn physical(&self) -> &FoliatedSpacetime {
        &self.physical
    }

    pub fn reduction(&self) -> &HamiltonianReduction {
        &self.reduction
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.reduction.mesh()
    }

    pub fn to_reduced(&self, psi: &SpinorField) -> SpinorField {
        self.reduction.forward(&self.maps.spinor_forward(psi))
    }

    pub fn to_physical(&self, psi: &SpinorField) -> SpinorField {
        self.maps.spinor_backward(&self.reduction.inverse(psi))
    }

    pub fn reduced_source(&self, f: &SpinorField) -> SpinorField {
        self.reduction.reduce_source(&self.maps.source_forward(f))
    }

    /// Physical source whose reduced form is `f_reduced`.
    pub fn physical_source(&self, f_reduced: &SpinorField) -> SpinorField {
        self.maps.source_backward(&self.reduction.expand_source(f_reduced))
    }

    /// `int_{Sigma_t} (psi, gamma(e_0) psi)` for a physical field.
    pub fn energy(&self, psi: &SpinorField) -> f64 {
        let t = psi.t();
        let mesh = self.mesh();
        let dth = mesh.angular_weight();
        let w: Vec<f64> = mesh
            .radial_coords()
            .iter()
            .zip(mesh.radial_weights())
            .map(|(&x, &h)| h * self.physical.sqrt_det(t, x) * dth)
            .collect();
        self.reduction.weighted_norm(psi.values(), &w).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp_warp() -> FoliatedSpacetime {
        let f = Profile::product(Profile::ExpTime { rate: 1.0 }, Profile::Affine { c0: 0.0, c1: 1.0 });
        FoliatedSpacetime::annulus(1.0, 2.0, f, (0.0, 1.0)).unwrap()
    }

    fn random_field(mesh: &Arc<Mesh>, t: f64, rng: &mut ChaCha8Rng) -> SpinorField {
        SpinorField::from_fn(mesh.clone(), t, |_, _| {
            Spinor::new(C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
    }

    #[test]
    fn static_reduction_is_identity() {
        let st = FoliatedSpacetime::annulus(1.0, 2.0, Profile::Affine { c0: 0.0, c1: 1.0 }, (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::build(&st, 8, 8).unwrap());
        let red = hamiltonian_reduce(&st, &CliffordRep::build(2).unwrap(), &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_field(&mesh, 0.5, &mut rng);
        assert_eq!(red.forward(&psi).values(), psi.values());
        assert!(red.density(0.5).iter().all(|&r| r == 1.0));
    }

    #[test]
    fn forward_inverse_round_trip_and_isometry() {
        let st = exp_warp();
        let mesh = Arc::new(Mesh::build(&st, 12, 16).unwrap());
        let red = hamiltonian_reduce(&st, &CliffordRep::build(2).unwrap(), &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Oracle weights straight from sqrt|h_t| = r e^t.
        let oracle = |t: f64| -> Vec<f64> {
            let dth = mesh.angular_weight();
            mesh.radial_coords().iter().zip(mesh.radial_weights()).map(|(&r, &h)| h * r * t.exp() * dth).collect()
        };
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let psi = random_field(&mesh, 0.7, &mut rng);
            let back = red.inverse(&red.forward(&psi));
            let scale = psi.max_abs();
            assert!(back.sub(&psi).max_abs() <= 1e-12 * scale);
            let n_t = red.weighted_norm(psi.values(), &oracle(0.7));
            let n_0 = red.weighted_norm(red.forward(&psi).values(), &oracle(0.0));
            worst = worst.max((n_0 - n_t).abs() / n_t);
        }
        assert!(worst <= 1e-12, "isometry mismatch {worst:e}");
    }

    #[test]
    fn source_map_inverts() {
        let st = exp_warp();
        let mesh = Arc::new(Mesh::build(&st, 6, 8).unwrap());
        let red = hamiltonian_reduce(&st, &CliffordRep::build(2).unwrap(), &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&mesh, 0.3, &mut rng);
        assert!(red.expand_source(&red.reduce_source(&f)).sub(&f).max_abs() < 1e-14);
    }

    #[test]
    fn non_unit_lapse_is_rejected() {
        let st = exp_warp().with_lapse(Profile::Const(2.0)).unwrap();
        let mesh = Arc::new(Mesh::build(&st, 6, 8).unwrap());
        let err = hamiltonian_reduce(&st, &CliffordRep::build(2).unwrap(), &mesh).unwrap_err();
        assert!(matches!(err, Error::NonUnitLapse { .. }));
    }
}
