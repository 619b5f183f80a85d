//! Angular Fourier transform with half-integer (antiperiodic) or integer modes.
//!
//! `psi_hat_m(r) = K^{-1/2} sum_k exp(-i m theta_k) psi(r, theta_k)`, unitary, so the
//! weighted product of the mesh carries over unchanged to the mode blocks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};

use crate::geometry::SpinStructure;
use crate::mesh::Mesh;
use crate::spin::SPINOR_RANK;
use crate::C64;

#[derive(Clone)]
pub struct AngularTransform {
    k: usize,
    radial: usize,
    theta: Vec<f64>,
    modes: Vec<f64>,
    symbols: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AngularTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularTransform").field("k", &self.k).field("modes", &self.modes).finish()
    }
}

impl AngularTransform {
    pub fn new(mesh: &Mesh) -> Self {
        let k = mesh.angular_count();
        let mut planner = FftPlanner::new();
        let modes = mesh.modes().to_vec();
        let nyquist = k as f64 / 2.0;
        // The unpaired Nyquist mode of the periodic structure gets a zero derivative.
        let symbols = modes
            .iter()
            .map(|&m| {
                if k > 1 && mesh.spin_structure() == SpinStructure::Periodic && m == nyquist {
                    0.0
                } else {
                    m
                }
            })
            .collect();
        AngularTransform {
            k,
            radial: mesh.radial_count(),
            theta: mesh.angles().to_vec(),
            modes,
            symbols,
            forward: planner.plan_fft_forward(k),
            inverse: planner.plan_fft_inverse(k),
        }
    }

    pub fn block_count(&self) -> usize {
        self.k
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    /// Eigenvalue of `-i d/dtheta` on each mode.
    pub fn derivative_symbols(&self) -> &[f64] {
        &self.symbols
    }

    fn shift(&self, k: usize, sign: f64) -> C64 {
        C64::from_polar(1.0, sign * self.modes[0] * self.theta[k])
    }

    /// Node-space values (length `2 I K`) to per-mode radial blocks (length `2 I` each).
    pub fn to_blocks(&self, values: &DVector<C64>) -> Vec<DVector<C64>> {
        if self.k == 1 {
            return vec![values.clone()];
        }
        let k = self.k;
        let norm = 1.0 / (k as f64).sqrt();
        let mut blocks = vec![DVector::zeros(SPINOR_RANK * self.radial); k];
        let mut ring = vec![C64::new(0.0, 0.0); k];
        for i in 0..self.radial {
            for s in 0..SPINOR_RANK {
                for (j, slot) in ring.iter_mut().enumerate() {
                    *slot = values[(i * k + j) * SPINOR_RANK + s] * self.shift(j, -1.0);
                }
                self.forward.process(&mut ring);
                for (j, v) in ring.iter().enumerate() {
                    blocks[j][i * SPINOR_RANK + s] = v * norm;
                }
            }
        }
        blocks
    }

    /// Inverse of [`AngularTransform::to_blocks`].
    pub fn from_blocks(&self, blocks: &[DVector<C64>]) -> DVector<C64> {
        if self.k == 1 {
            return blocks[0].clone();
        }
        let k = self.k;
        let norm = 1.0 / (k as f64).sqrt();
        let mut values = DVector::zeros(SPINOR_RANK * self.radial * k);
        let mut ring = vec![C64::new(0.0, 0.0); k];
        for i in 0..self.radial {
            for s in 0..SPINOR_RANK {
                for (j, slot) in ring.iter_mut().enumerate() {
                    *slot = blocks[j][i * SPINOR_RANK + s];
                }
                self.inverse.process(&mut ring);
                for (j, v) in ring.iter().enumerate() {
                    values[(i * k + j) * SPINOR_RANK + s] = v * norm * self.shift(j, 1.0);
                }
            }
        }
        values
    }

    /// Unitary matrix `F[j, k] = exp(-i m_j theta_k) / sqrt(K)`.
    pub fn dft_matrix(&self) -> DMatrix<C64> {
        let norm = 1.0 / (self.k as f64).sqrt();
        DMatrix::from_fn(self.k, self.k, |j, k| C64::from_polar(norm, -self.modes[j] * self.theta[k]))
    }

    /// Spectral `d/dtheta` on the ring, `F^* diag(i m) F`.
    pub fn derivative_matrix(&self) -> DMatrix<C64> {
        let f = self.dft_matrix();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            self.k,
            self.symbols.iter().map(|&m| C64::new(0.0, m)),
        ));
        f.adjoint() * diag * f
    }

    /// `F` acting on ring vectors with spinor index innermost (`2 k + s`).
    pub fn ring_dft_matrix(&self) -> DMatrix<C64> {
        kron_identity(&self.dft_matrix(), SPINOR_RANK)
    }
}

/// `a (x) I_r`.
pub(crate) fn kron_identity(a: &DMatrix<C64>, r: usize) -> DMatrix<C64> {
    let (n, m) = a.shape();
    let mut out = DMatrix::zeros(n * r, m * r);
    for i in 0..n {
        for j in 0..m {
            for s in 0..r {
                out[(i * r + s, j * r + s)] = a[(i, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MaxNorm;
    use crate::geometry::FoliatedSpacetime;
    use crate::profile::Profile;

    fn mesh(spin: SpinStructure) -> Mesh {
        let st = FoliatedSpacetime::annulus(1.0, 2.0, Profile::one(), (0.0, 1.0))
            .unwrap()
            .with_spin_structure(spin);
        Mesh::build(&st, 5, 8).unwrap()
    }

    #[test]
    fn fft_blocks_match_dense_transform() {
        let mesh = mesh(SpinStructure::Antiperiodic);
        let tr = AngularTransform::new(&mesh);
        let n = 2 * mesh.node_count();
        let values = DVector::from_fn(n, |i, _| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
        let blocks = tr.to_blocks(&values);
        let f = tr.dft_matrix();
        for i in 0..mesh.radial_count() {
            for s in 0..2 {
                let ring = DVector::from_fn(8, |k, _| values[(i * 8 + k) * 2 + s]);
                let hat = &f * ring;
                for j in 0..8 {
                    assert!((hat[j] - blocks[j][i * 2 + s]).norm() < 1e-13);
                }
            }
        }
        let back = tr.from_blocks(&blocks);
        assert!((back - values).max_norm() < 1e-13);
    }

    #[test]
    fn derivative_is_real_and_antiperiodic_exact() {
        let mesh = mesh(SpinStructure::Antiperiodic);
        let tr = AngularTransform::new(&mesh);
        let d = tr.derivative_matrix();
        assert!(d.iter().all(|v| v.im.abs() < 1e-13));
        assert!((&d + d.transpose()).max_norm() < 1e-13);
        // exp(i theta / 2) is an exact mode with eigenvalue i/2.
        let v = DVector::from_fn(8, |k, _| C64::from_polar(1.0, 0.5 * mesh.angles()[k]));
        let dv = &d * &v;
        assert!((dv - v * C64::new(0.0, 0.5)).max_norm() < 1e-13);
    }

    #[test]
    fn periodic_structure_contains_zero_mode() {
        let mesh = mesh(SpinStructure::Periodic);
        let tr = AngularTransform::new(&mesh);
        assert!(tr.modes().contains(&0.0));
        assert_eq!(*tr.derivative_symbols().last().unwrap(), 0.0);
    }
}
