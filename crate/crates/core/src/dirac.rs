//! Summation-by-parts discretization of the spatial Dirac operator.
//!
//! In the bounded direction the operator is written in split form,
//! `R = S D1 S / mu` with `mu = sqrt|h|` per radial node and `S^2 = mu / b`,
//! which equals `(1/b)(d_r + f'/(2f))` on smooth functions and satisfies the
//! discrete Green identity exactly because `H D1` is an SBP operator. On the
//! annulus the angular derivative is spectral, so each Fourier mode gives an
//! independent block-tridiagonal radial operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::fourier::AngularTransform;
use crate::geometry::{CauchySurface, FoliatedSpacetime, Side};
use crate::mesh::Mesh;
use crate::spin::{CliffordRep, SpinMatrix, SPINOR_RANK};
use crate::C64;

/// Largest node-space problem for which [`DiracAssembly::dense`] will allocate.
pub const DENSE_LIMIT: usize = 10_000;

/// Block-tridiagonal operator on one Fourier mode, with 2x2 spinor blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBlock {
    /// `lower[i]` couples radial node `i + 1` to node `i`.
    pub lower: Vec<SpinMatrix>,
    pub diag: Vec<SpinMatrix>,
    /// `upper[i]` couples radial node `i` to node `i + 1`.
    pub upper: Vec<SpinMatrix>,
}

impl RadialBlock {
    pub fn radial_count(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        SPINOR_RANK * self.diag.len()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let n = self.diag.len();
        let mut out = DVector::zeros(SPINOR_RANK * n);
        let at = |i: usize| nalgebra::Vector2::new(v[2 * i], v[2 * i + 1]);
        for i in 0..n {
            let mut acc = self.diag[i] * at(i);
            if i > 0 {
                acc += self.lower[i - 1] * at(i - 1);
            }
            if i + 1 < n {
                acc += self.upper[i] * at(i + 1);
            }
            out[2 * i] = acc[0];
            out[2 * i + 1] = acc[1];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let mut put = |i: usize, j: usize, b: &SpinMatrix| {
            for a in 0..2 {
                for c in 0..2 {
                    m[(2 * i + a, 2 * j + c)] = b[(a, c)];
                }
            }
        };
        for i in 0..n {
            put(i, i, &self.diag[i]);
            if i + 1 < n {
                put(i, i + 1, &self.upper[i]);
                put(i + 1, i, &self.lower[i]);
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.diag.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for a in 0..2 {
                let mut s = 0.0;
                for c in 0..2 {
                    s += self.diag[i][(a, c)].norm();
                    if i > 0 {
                        s += self.lower[i - 1][(a, c)].norm();
                    }
                    if i + 1 < n {
                        s += self.upper[i][(a, c)].norm();
                    }
                }
                worst = worst.max(s);
            }
        }
        worst
    }
}

/// Discrete `D_t` on one slice, stored as per-mode radial blocks.
#[derive(Debug, Clone)]
pub struct DiracAssembly {
    mesh: Arc<Mesh>,
    rep: CliffordRep,
    t: f64,
    transform: AngularTransform,
    blocks: Vec<RadialBlock>,
    /// Quadrature weight of each node at radial index `i` (angular weight included).
    radial_weights: Vec<f64>,
    boundary_weights: [f64; 2],
    /// `1 / f(t, r_i)`; zero on the interval.
    angular_coefficients: Vec<f64>,
    /// Radial first-order part `R` in the bounded direction.
    radial_operator: DMatrix<f64>,
}

/// Assembles `D_t` on the physical slice `Sigma_t` with its own `L^2(Sigma_t)` weights.
pub fn assemble_spatial_dirac(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    t: f64,
) -> Result<DiracAssembly> {
    DiracAssembly::build(spacetime, rep, mesh, t, t)
}

/// Assembles the reduced operator `rho_t D_t rho_t^-1` acting on the reference
/// slice `t = 0`, with the fixed weights of `L^2(Sigma_0)`.
pub fn assemble_reduced_dirac(
    spacetime: &FoliatedSpacetime,
    rep: &CliffordRep,
    mesh: &Arc<Mesh>,
    t: f64,
) -> Result<DiracAssembly> {
    DiracAssembly::build(spacetime, rep, mesh, t, 0.0)
}

impl DiracAssembly {
    fn build(
        spacetime: &FoliatedSpacetime,
        rep: &CliffordRep,
        mesh: &Arc<Mesh>,
        t: f64,
        reference: f64,
    ) -> Result<Self> {
        if rep.dim() != spacetime.spatial_dim() || mesh.dim() != spacetime.spatial_dim() {
            return Err(Error::UnsupportedDimension(rep.dim()));
        }
        spacetime.require_unit_lapse()?;
        spacetime.require_in_window(t)?;

        let n_rad = mesh.radial_count();
        let xs = mesh.radial_coords();
        let dtheta = mesh.angular_weight();
        let annulus = matches!(spacetime.surface(), CauchySurface::Annulus { .. });

        let b: Vec<f64> = xs.iter().map(|&x| spacetime.radial_scale().value(t, x)).collect();
        let mu: Vec<f64> = xs.iter().map(|&x| spacetime.sqrt_det(reference, x)).collect();
        let s: Vec<f64> = (0..n_rad).map(|i| (mu[i] / b[i]).sqrt()).collect();
        let inv_f: Vec<f64> = if annulus {
            xs.iter().map(|&x| 1.0 / spacetime.warp().value(t, x)).collect()
        } else {
            vec![0.0; n_rad]
        };

        let d1 = mesh.sbp_derivative();
        let mut radial = DMatrix::zeros(n_rad, n_rad);
        for i in 0..n_rad {
            for j in i.saturating_sub(1)..(i + 2).min(n_rad) {
                radial[(i, j)] = s[i] * d1[(i, j)] * s[j] / mu[i];
            }
        }

        let g1 = rep.tangential_gamma(1)?;
        let g2 = if annulus { rep.tangential_gamma(2)? } else { SpinMatrix::zeros() };
        let transform = AngularTransform::new(mesh);
        let blocks = transform
            .derivative_symbols()
            .iter()
            .map(|&m| {
                let angular = g2 * C64::new(0.0, m);
                RadialBlock {
                    lower: (0..n_rad - 1).map(|i| g1 * C64::from(radial[(i + 1, i)])).collect(),
                    diag: (0..n_rad).map(|i| g1 * C64::from(radial[(i, i)]) + angular * C64::from(inv_f[i])).collect(),
                    upper: (0..n_rad - 1).map(|i| g1 * C64::from(radial[(i, i + 1)])).collect(),
                }
            })
            .collect();

        let h = mesh.radial_weights();
        let radial_weights = (0..n_rad).map(|i| h[i] * mu[i] * dtheta).collect();
        let boundary_weights = [s[0] * s[0] * dtheta, s[n_rad - 1] * s[n_rad - 1] * dtheta];

        Ok(DiracAssembly {
            mesh: mesh.clone(),
            rep: rep.clone(),
            t,
            transform,
            blocks,
            radial_weights,
            boundary_weights,
            angular_coefficients: inv_f,
            radial_operator: radial,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn rep(&self) -> &CliffordRep {
        &self.rep
    }

    pub fn transform(&self) -> &AngularTransform {
        &self.transform
    }

    pub fn blocks(&self) -> &[RadialBlock] {
        &self.blocks
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    /// Weight of the boundary sum on one component (`f dtheta` per node, `1` at a point).
    pub fn boundary_weight(&self, side: Side) -> f64 {
        self.boundary_weights[side.index()]
    }

    /// Coefficient of `gamma_Sigma(e_2) d_theta` at radial index `i`.
    pub fn angular_coefficient(&self, i: usize) -> f64 {
        self.angular_coefficients[i]
    }

    /// The bounded-direction first-order scalar operator.
    pub fn radial_operator(&self) -> &DMatrix<f64> {
        &self.radial_operator
    }

    /// Diagonal of the discrete `L^2` weight, one entry per node.
    pub fn node_weights(&self) -> Vec<f64> {
        (0..self.mesh.node_count()).map(|n| self.radial_weights[self.mesh.radial_index(n)]).collect()
    }

    /// Infinity-norm of `D` (the angular transform is unitary, and each block is
    /// bounded by its row sums).
    pub fn norm_estimate(&self) -> f64 {
        self.blocks.iter().map(RadialBlock::norm_inf).fold(0.0, f64::max)
    }

    pub fn apply(&self, values: &DVector<C64>) -> DVector<C64> {
        let blocks = self.transform.to_blocks(values);
        let out: Vec<DVector<C64>> = blocks.iter().zip(&self.blocks).map(|(v, b)| b.apply(v)).collect();
        self.transform.from_blocks(&out)
    }

    pub fn apply_field(&self, field: &SpinorField) -> SpinorField {
        SpinorField::from_values(field.mesh().clone(), field.t(), self.apply(field.values()))
    }

    /// Weighted product `<a, b> = sum_nodes w a^* b`.
    pub fn inner(&self, a: &DVector<C64>, b: &DVector<C64>) -> C64 {
        weighted_inner(&self.mesh, &self.radial_weights, a, b)
    }

    pub fn norm(&self, a: &DVector<C64>) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    /// `sum_{boundary nodes} w_bd psi^* sigma_n phi`, so that
    /// `<psi, D phi> - <D psi, phi>` equals this sum.
    pub fn boundary_term(&self, psi: &DVector<C64>, phi: &DVector<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for side in Side::BOTH {
            let sigma = self.rep.normal_symbol(side);
            let w = self.boundary_weights[side.index()];
            for node in self.mesh.boundary_nodes(side) {
                let a = nalgebra::Vector2::new(psi[2 * node], psi[2 * node + 1]);
                let b = nalgebra::Vector2::new(phi[2 * node], phi[2 * node + 1]);
                acc += a.dotc(&(sigma * b)) * w;
            }
        }
        acc
    }

    /// Node-space matrix assembled directly from the stencils (angular part via
    /// the dense spectral derivative), independent of the block route.
    pub fn dense(&self) -> Result<DMatrix<C64>> {
        let n = SPINOR_RANK * self.mesh.node_count();
        if n > DENSE_LIMIT {
            return Err(Error::MeshSize(format!("{n} unknowns exceed the dense limit {DENSE_LIMIT}")));
        }
        let k = self.mesh.angular_count();
        let n_rad = self.mesh.radial_count();
        let g1 = self.rep.tangential_gamma(1)?;
        let g2 = if self.mesh.dim() == 2 { self.rep.tangential_gamma(2)? } else { SpinMatrix::zeros() };
        let s_theta = self.transform.derivative_matrix();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n_rad {
            for j in i.saturating_sub(1)..(i + 2).min(n_rad) {
                let r = self.radial_operator[(i, j)];
                for a in 0..k {
                    let (p, q) = (self.mesh.node(i, a), self.mesh.node(j, a));
                    for s in 0..2 {
                        for u in 0..2 {
                            out[(2 * p + s, 2 * q + u)] += g1[(s, u)] * r;
                        }
                    }
                }
            }
            if self.mesh.dim() == 2 {
                let c = self.angular_coefficients[i];
                for a in 0..k {
                    for bb in 0..k {
                        let (p, q) = (self.mesh.node(i, a), self.mesh.node(i, bb));
                        for s in 0..2 {
                            for u in 0..2 {
                                out[(2 * p + s, 2 * q + u)] += g2[(s, u)] * s_theta[(a, bb)] * c;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Per-mode radial operators `D^(m)`, one per angular Fourier mode.
    pub fn fourier_block_decompose(&self) -> Result<Vec<DMatrix<C64>>> {
        if self.mesh.dim() != 2 {
            return Err(Error::UnsupportedDimension(self.mesh.dim()));
        }
        Ok(self.blocks.iter().map(RadialBlock::to_dense).collect())
    }

    /// Node-space matrix rebuilt from per-mode blocks by conjugation with the
    /// angular transform.
    pub fn reassemble(mesh: &Mesh, blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
        let transform = AngularTransform::new(mesh);
        let n = SPINOR_RANK * mesh.node_count();
        let mut out = DMatrix::zeros(n, n);
        let k = blocks.len();
        let nb = blocks[0].nrows();
        // Column by column: lift every unit block-vector and push it through.
        let mut hat = vec![DVector::zeros(nb); k];
        for col in 0..n {
            let mut e = DVector::zeros(n);
            e[col] = C64::new(1.0, 0.0);
            let coeffs = transform.to_blocks(&e);
            for (j, c) in coeffs.iter().enumerate() {
                hat[j] = &blocks[j] * c;
            }
            out.set_column(col, &transform.from_blocks(&hat));
        }
        out
    }
}

pub(crate) fn weighted_inner(mesh: &Mesh, radial_weights: &[f64], a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for node in 0..mesh.node_count() {
        let w = radial_weights[mesh.radial_index(node)];
        acc += (a[2 * node].conj() * b[2 * node] + a[2 * node + 1].conj() * b[2 * node + 1]) * w;
    }
    acc
}
