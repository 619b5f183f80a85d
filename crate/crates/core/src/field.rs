//! Spinor fields sampled on a mesh.

use std::sync::Arc;

use nalgebra::DVector;

use crate::mesh::Mesh;
use crate::spin::{Spinor, SPINOR_RANK};
use crate::C64;

/// Rank-2 spinor values at every node; `values[2 * node + s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    mesh: Arc<Mesh>,
    t: f64,
    values: DVector<C64>,
}

impl SpinorField {
    pub fn zeros(mesh: Arc<Mesh>, t: f64) -> Self {
        let n = SPINOR_RANK * mesh.node_count();
        SpinorField { mesh, t, values: DVector::zeros(n) }
    }

    /// Builds a field from `f(node, coords)`.
    pub fn from_fn(mesh: Arc<Mesh>, t: f64, mut f: impl FnMut(usize, &[f64]) -> Spinor) -> Self {
        let mut field = Self::zeros(mesh.clone(), t);
        for node in 0..mesh.node_count() {
            let v = f(node, &mesh.coords(node));
            field.set(node, v);
        }
        field
    }

    /// Wraps raw values; panics if the length does not match the mesh.
    pub fn from_values(mesh: Arc<Mesh>, t: f64, values: DVector<C64>) -> Self {
        assert_eq!(values.len(), SPINOR_RANK * mesh.node_count(), "field length does not match mesh");
        SpinorField { mesh, t, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn values(&self) -> &DVector<C64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<C64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<C64> {
        self.values
    }

    pub fn get(&self, node: usize) -> Spinor {
        Spinor::new(self.values[2 * node], self.values[2 * node + 1])
    }

    pub fn set(&mut self, node: usize, v: Spinor) {
        self.values[2 * node] = v[0];
        self.values[2 * node + 1] = v[1];
    }

    pub fn scale_node(&mut self, node: usize, w: f64) {
        self.values[2 * node] *= w;
        self.values[2 * node + 1] *= w;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry on the boundary nodes.
    pub fn max_abs_on_boundary(&self) -> f64 {
        (0..self.mesh.node_count())
            .filter(|&n| self.mesh.is_boundary(n))
            .map(|n| self.get(n).norm())
            .fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, a: C64, other: &SpinorField) {
        self.values.axpy(a, &other.values, C64::new(1.0, 0.0));
    }

    pub fn scaled(&self, a: C64) -> SpinorField {
        SpinorField { mesh: self.mesh.clone(), t: self.t, values: &self.values * a }
    }

    pub fn sub(&self, other: &SpinorField) -> SpinorField {
        SpinorField { mesh: self.mesh.clone(), t: self.t, values: &self.values - &other.values }
    }

    pub fn add(&self, other: &SpinorField) -> SpinorField {
        SpinorField { mesh: self.mesh.clone(), t: self.t, values: &self.values + &other.values }
    }

    /// Applies a fixed 2x2 matrix at every node.
    pub fn map_spinors(&self, m: &crate::spin::SpinMatrix) -> SpinorField {
        let mut out = self.clone();
        for node in 0..self.mesh.node_count() {
            out.set(node, m * self.get(node));
        }
        out
    }
}
