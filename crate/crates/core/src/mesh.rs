//! Tensor-product meshes with diagonal-norm summation-by-parts weights.

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{CauchySurface, FoliatedSpacetime, Side, SpinStructure};

pub const MIN_RADIAL_NODES: usize = 4;
pub const MIN_ANGULAR_NODES: usize = 8;

/// Nodes `x_i` (or `(r_i, theta_k)`) with SBP quadrature weights.
///
/// Node numbering is radial-major: `node = i * K + k`, with `K = 1` on the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    surface: CauchySurface,
    spin: SpinStructure,
    radial: Vec<f64>,
    radial_weights: Vec<f64>,
    theta: Vec<f64>,
    modes: Vec<f64>,
}

impl Mesh {
    /// `radial` nodes in the bounded direction and `angular` nodes on the circle
    /// (ignored for the interval).
    pub fn build(spacetime: &FoliatedSpacetime, radial: usize, angular: usize) -> Result<Self> {
        Self::for_surface(spacetime.surface(), spacetime.spin_structure(), radial, angular)
    }

    pub fn for_surface(surface: CauchySurface, spin: SpinStructure, radial: usize, angular: usize) -> Result<Self> {
        if radial < MIN_RADIAL_NODES {
            return Err(Error::MeshSize(format!(
                "need at least {MIN_RADIAL_NODES} nodes in the bounded direction, got {radial}"
            )));
        }
        let (x0, x1) = surface.bounds();
        let h = (x1 - x0) / (radial - 1) as f64;
        let coords: Vec<f64> = (0..radial)
            .map(|i| if i == radial - 1 { x1 } else { x0 + h * i as f64 })
            .collect();
        let mut weights = vec![h; radial];
        weights[0] = 0.5 * h;
        weights[radial - 1] = 0.5 * h;

        let (theta, modes) = match surface {
            CauchySurface::Interval { .. } => (vec![0.0], vec![0.0]),
            CauchySurface::Annulus { .. } => {
                if angular < MIN_ANGULAR_NODES || angular % 2 != 0 {
                    return Err(Error::MeshSize(format!(
                        "angular node count must be even and at least {MIN_ANGULAR_NODES}, got {angular}"
                    )));
                }
                let k = angular as f64;
                let theta = (0..angular).map(|j| 2.0 * std::f64::consts::PI * j as f64 / k).collect();
                // Half-integer modes for the bounding structure, integer modes otherwise.
                let first = match spin {
                    SpinStructure::Antiperiodic => 0.5 - k / 2.0,
                    SpinStructure::Periodic => 1.0 - k / 2.0,
                };
                let modes = (0..angular).map(|j| first + j as f64).collect();
                (theta, modes)
            }
        };
        Ok(Mesh { surface, spin, radial: coords, radial_weights: weights, theta, modes })
    }

    pub fn surface(&self) -> CauchySurface {
        self.surface
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn spin_structure(&self) -> SpinStructure {
        self.spin
    }

    pub fn radial_count(&self) -> usize {
        self.radial.len()
    }

    pub fn angular_count(&self) -> usize {
        self.theta.len()
    }

    pub fn node_count(&self) -> usize {
        self.radial.len() * self.theta.len()
    }

    pub fn radial_coords(&self) -> &[f64] {
        &self.radial
    }

    /// Diagonal SBP norm in the bounded direction, `h [1/2, 1, ..., 1, 1/2]`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn radial_step(&self) -> f64 {
        self.radial[1] - self.radial[0]
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    /// Angular quadrature weight, `2 pi / K` on the annulus and `1` on the interval.
    pub fn angular_weight(&self) -> f64 {
        match self.surface {
            CauchySurface::Interval { .. } => 1.0,
            CauchySurface::Annulus { .. } => 2.0 * std::f64::consts::PI / self.theta.len() as f64,
        }
    }

    /// Fourier modes carried by the angular transform (`[0]` on the interval).
    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn radial_index(&self, node: usize) -> usize {
        node / self.theta.len()
    }

    pub fn angular_index(&self, node: usize) -> usize {
        node % self.theta.len()
    }

    pub fn node(&self, radial: usize, angular: usize) -> usize {
        radial * self.theta.len() + angular
    }

    pub fn radial_coord(&self, node: usize) -> f64 {
        self.radial[self.radial_index(node)]
    }

    /// `[x]` on the interval, `[r, theta]` on the annulus.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        match self.surface {
            CauchySurface::Interval { .. } => vec![self.radial_coord(node)],
            CauchySurface::Annulus { .. } => vec![self.radial_coord(node), self.theta[self.angular_index(node)]],
        }
    }

    /// Radial index of a boundary component.
    pub fn boundary_radial_index(&self, side: Side) -> usize {
        match side {
            Side::Lower => 0,
            Side::Upper => self.radial.len() - 1,
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let i = self.radial_index(node);
        i == 0 || i + 1 == self.radial.len()
    }

    /// Nodes on one boundary component, in angular order.
    pub fn boundary_nodes(&self, side: Side) -> Vec<usize> {
        let i = self.boundary_radial_index(side);
        (0..self.theta.len()).map(|k| self.node(i, k)).collect()
    }

    /// Second-order SBP first derivative `D1 = H^-1 Q` with `Q + Q^T = diag(-1, 0, ..., 0, 1)`.
    pub fn sbp_derivative(&self) -> DMatrix<f64> {
        let n = self.radial.len();
        let mut q = DMatrix::zeros(n, n);
        q[(0, 0)] = -0.5;
        q[(n - 1, n - 1)] = 0.5;
        for i in 0..n - 1 {
            q[(i, i + 1)] = 0.5;
            q[(i + 1, i)] = -0.5;
        }
        for i in 0..n {
            let w = self.radial_weights[i];
            for j in 0..n {
                q[(i, j)] /= w;
            }
        }
        q
    }

    /// Stable 64-bit fingerprint of the mesh layout.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        h.update([match self.spin {
            SpinStructure::Antiperiodic => 0u8,
            SpinStructure::Periodic => 1u8,
        }]);
        let (x0, x1) = self.surface.bounds();
        for v in [x0, x1] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.radial.len() as u64).to_le_bytes());
        h.update((self.theta.len() as u64).to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}
