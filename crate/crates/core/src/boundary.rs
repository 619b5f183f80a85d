//! Adapted boundary operators, APS and MIT projectors, and the constrained Dirac operator.
//!
//! Boundary data live on the ring of boundary nodes, indexed `2 k + s` (one
//! point on the interval). Conditions are given as node-space projectors onto
//! the forbidden part of the trace. Because the model geometries are
//! rotationally symmetric, both projectors commute with the angular transform,
//! and the constrained operator is assembled mode by mode from the per-mode
//! allowed trace directions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::banded::BandedMatrix;
use crate::dirac::DiracAssembly;
use crate::error::{Error, Result};
use crate::fourier::AngularTransform;
use crate::geometry::{BoundaryCondition, CauchySurface, Side};
use crate::mesh::Mesh;
use crate::spin::{CliffordRep, SpinMatrix, Spinor, SPINOR_RANK};
use crate::{MaxNorm, C64};

/// Relative threshold below which an eigenvalue of `A` counts as zero.
pub const KERNEL_THRESHOLD: f64 = 1e-10;
/// Relative Hermiticity residual above which constraint assembly is rejected.
pub const HERMITICITY_LIMIT: f64 = 1e-9;
/// Largest coupling between different Fourier modes tolerated in a projector.
const MODE_LEAK_LIMIT: f64 = 1e-10;

/// Hermitian operator on one boundary component, with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct AdaptedBoundaryOperator {
    side: Side,
    name: &'static str,
    t: f64,
    matrix: DMatrix<C64>,
    symbol: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

/// Builds the canonical adapted operator on one component.
///
/// On the annulus this is the Hermitian part of `sigma_n^-1` times the
/// tangential part of `D` on the boundary ring; at an interval end it is
/// `sigma_n sigma_1`, Hermitian with eigenvalues `+-1` and anticommuting with
/// the diagonal `sigma_n`. A kernel aborts the construction.
pub fn assemble_adapted_operator(assembly: &DiracAssembly, side: Side) -> Result<AdaptedBoundaryOperator> {
    let op = adapted_operator_unchecked(assembly, side)?;
    let report = kernel_check(&op);
    if !report.passed {
        return Err(Error::BoundaryKernel {
            component: report.component,
            min_abs: report.min_abs,
            threshold: report.threshold,
        });
    }
    Ok(op)
}

/// Same as [`assemble_adapted_operator`] but leaves kernel detection to the caller.
pub fn adapted_operator_unchecked(assembly: &DiracAssembly, side: Side) -> Result<AdaptedBoundaryOperator> {
    let mesh = assembly.mesh();
    let rep = assembly.rep();
    let sigma = rep.normal_symbol(side);
    let k = mesh.angular_count();
    let symbol = repeat_diagonal(&sigma, k);
    let matrix = match mesh.surface() {
        CauchySurface::Interval { .. } => {
            let sigma1 = Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
            spin_dense(&(sigma * sigma1))
        }
        CauchySurface::Annulus { .. } => {
            let coef = assembly.angular_coefficient(mesh.boundary_radial_index(side));
            let d_theta = assembly.transform().derivative_matrix();
            let g2 = spin_dense(&rep.tangential_gamma(2)?);
            let mut tangential = DMatrix::zeros(2 * k, 2 * k);
            for a in 0..k {
                for b in 0..k {
                    for s in 0..2 {
                        for u in 0..2 {
                            tangential[(2 * a + s, 2 * b + u)] = g2[(s, u)] * d_theta[(a, b)] * coef;
                        }
                    }
                }
            }
            // sigma_n^2 = -1, so sigma_n^-1 = -sigma_n.
            let b = -(&symbol * tangential);
            (&b + b.adjoint()) * C64::new(0.5, 0.0)
        }
    };
    Ok(AdaptedBoundaryOperator::from_matrix(side, side.name(&mesh.surface()), assembly.t(), matrix, symbol))
}

fn spin_dense(m: &SpinMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// `1_k (x) m` on the ring basis `2 a + s`.
fn repeat_diagonal(m: &SpinMatrix, k: usize) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    for a in 0..k {
        for s in 0..2 {
            for u in 0..2 {
                out[(2 * a + s, 2 * a + u)] = m[(s, u)];
            }
        }
    }
    out
}

/// Eigenvalues ascending, eigenvectors with their largest entry real and positive.
fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let mut best = 0;
        for r in 0..n {
            if v[r].norm() > v[best].norm() + 1e-12 {
                best = r;
            }
        }
        let phase = if v[best].norm() > 0.0 { v[best].conj() / v[best].norm() } else { C64::new(1.0, 0.0) };
        vectors.set_column(col, &(v * phase));
    }
    (values, vectors)
}

impl AdaptedBoundaryOperator {
    /// Wraps a given matrix; it is symmetrized before the eigendecomposition.
    pub fn from_matrix(side: Side, name: &'static str, t: f64, matrix: DMatrix<C64>, symbol: DMatrix<C64>) -> Self {
        let matrix = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
        AdaptedBoundaryOperator { side, name, t, matrix, symbol, eigenvalues, eigenvectors }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn component(&self) -> &'static str {
        self.name
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `sigma_n` on the boundary ring.
    pub fn symbol(&self) -> &DMatrix<C64> {
        &self.symbol
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// Spectral radius.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Largest entry of `sigma_n A + A sigma_n`.
    pub fn anticommutator_residual(&self) -> f64 {
        (&self.symbol * &self.matrix + &self.matrix * &self.symbol).max_norm()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).max_norm()
    }

    /// `sum_{lambda < 0} v v^*`.
    pub fn negative_projector(&self) -> DMatrix<C64> {
        self.spectral_projector(|l| l < 0.0)
    }

    pub fn positive_projector(&self) -> DMatrix<C64> {
        self.spectral_projector(|l| l > 0.0)
    }

    fn spectral_projector(&self, keep: impl Fn(f64) -> bool) -> DMatrix<C64> {
        let n = self.matrix.nrows();
        let mut p = DMatrix::zeros(n, n);
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            if keep(l) {
                let v = self.eigenvectors.column(j);
                p += &v * v.adjoint();
            }
        }
        p
    }

    /// `(mode, eigenvalue)` pairs; every mode carries two eigenvalues on the annulus.
    pub fn mode_spectrum(&self, transform: &AngularTransform) -> Vec<(f64, f64)> {
        let blocks = mode_blocks(&self.matrix, transform);
        let mut out = Vec::new();
        for (m, block) in transform.modes().iter().zip(blocks.0) {
            let (vals, _) = hermitian_eigen(&spin_dense(&block));
            out.extend(vals.into_iter().map(|v| (*m, v)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub component: String,
    pub min_abs: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn kernel_check(op: &AdaptedBoundaryOperator) -> KernelReport {
    let min_abs = op.min_abs_eigenvalue();
    let threshold = KERNEL_THRESHOLD * op.norm();
    KernelReport { component: op.component().to_string(), min_abs, threshold, passed: min_abs > threshold }
}

/// Boundary condition on one component as a projector onto the forbidden trace.
#[derive(Debug, Clone)]
pub struct BoundaryConditionSpec {
    side: Side,
    condition: BoundaryCondition,
    t: f64,
    forbidden: DMatrix<C64>,
    /// APS only: `Pi_{<0}`.
    negative: Option<DMatrix<C64>>,
    symbol: DMatrix<C64>,
}

/// `Pi_{<0}` and `Pi_{>=0} = 1 - Pi_{<0}` of an adapted operator.
pub fn aps_projector(op: &AdaptedBoundaryOperator) -> Result<BoundaryConditionSpec> {
    let report = kernel_check(op);
    if !report.passed {
        return Err(Error::BoundaryKernel {
            component: report.component,
            min_abs: report.min_abs,
            threshold: report.threshold,
        });
    }
    let negative = op.negative_projector();
    let n = negative.nrows();
    let forbidden = DMatrix::identity(n, n) - &negative;
    Ok(BoundaryConditionSpec {
        side: op.side(),
        condition: BoundaryCondition::Aps,
        t: op.t(),
        forbidden,
        negative: Some(negative),
        symbol: op.symbol().clone(),
    })
}

/// The per-node projector `(1 + i gamma(e_n)) / 2` for a ring of `ring_nodes` points.
pub fn mit_point_projector(rep: &CliffordRep, side: Side) -> SpinMatrix {
    (SpinMatrix::identity() + rep.normal_gamma(side) * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0)
}

pub fn mit_projector(rep: &CliffordRep, mesh: &Mesh, side: Side, t: f64) -> BoundaryConditionSpec {
    let k = mesh.angular_count();
    BoundaryConditionSpec {
        side,
        condition: BoundaryCondition::Mit,
        t,
        forbidden: repeat_diagonal(&mit_point_projector(rep, side), k),
        negative: None,
        symbol: repeat_diagonal(&rep.normal_symbol(side), k),
    }
}

/// Builds the condition named by `condition` on `side` from an assembly.
pub fn boundary_spec(assembly: &DiracAssembly, side: Side, condition: BoundaryCondition) -> Result<BoundaryConditionSpec> {
    match condition {
        BoundaryCondition::Aps => aps_projector(&assemble_adapted_operator(assembly, side)?),
        BoundaryCondition::Mit => Ok(mit_projector(assembly.rep(), assembly.mesh(), side, assembly.t())),
    }
}

impl BoundaryConditionSpec {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn condition(&self) -> BoundaryCondition {
        self.condition
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `Pi_{>=0}` for APS, `(1 + i gamma(e_n)) / 2` for MIT.
    pub fn forbidden(&self) -> &DMatrix<C64> {
        &self.forbidden
    }

    pub fn negative(&self) -> Option<&DMatrix<C64>> {
        self.negative.as_ref()
    }

    pub fn allowed(&self) -> DMatrix<C64> {
        let n = self.forbidden.nrows();
        DMatrix::identity(n, n) - &self.forbidden
    }

    pub fn rank(&self) -> usize {
        self.forbidden.trace().re.round() as usize
    }

    /// Largest entry of `P^2 - P` and `P - P^*`.
    pub fn projector_residual(&self) -> f64 {
        let p = &self.forbidden;
        (p * p - p).max_norm().max((p - p.adjoint()).max_norm())
    }

    /// Largest `|<v, sigma_n w>|` over allowed traces `v`, `w`, i.e. the entries
    /// of `(1 - P) sigma_n (1 - P)`. Zero means the boundary flux vanishes.
    pub fn flip_residual(&self) -> f64 {
        let a = self.allowed();
        (&a * &self.symbol * &a).max_norm()
    }

    /// Allowed trace directions per Fourier mode (orthonormal, possibly empty).
    pub fn allowed_per_mode(&self, transform: &AngularTransform) -> Result<Vec<Vec<Spinor>>> {
        let (blocks, leak) = mode_blocks(&self.forbidden, transform);
        if leak > MODE_LEAK_LIMIT {
            return Err(Error::Data(format!(
                "boundary projector couples Fourier modes (off-block entry {leak:e})"
            )));
        }
        Ok(blocks
            .iter()
            .map(|p| {
                let (vals, vecs) = hermitian_eigen(&spin_dense(p));
                vals.iter()
                    .enumerate()
                    .filter(|(_, &v)| v < 0.5)
                    .map(|(j, _)| Spinor::new(vecs[(0, j)], vecs[(1, j)]))
                    .collect()
            })
            .collect())
    }
}

/// Diagonal 2x2 blocks of `F m F^*` and the largest off-block entry.
fn mode_blocks(m: &DMatrix<C64>, transform: &AngularTransform) -> (Vec<SpinMatrix>, f64) {
    let k = transform.block_count();
    let f = transform.ring_dft_matrix();
    let hat = &f * m * f.adjoint();
    let mut blocks = Vec::with_capacity(k);
    let mut leak: f64 = 0.0;
    for a in 0..k {
        blocks.push(Matrix2::new(
            hat[(2 * a, 2 * a)],
            hat[(2 * a, 2 * a + 1)],
            hat[(2 * a + 1, 2 * a)],
            hat[(2 * a + 1, 2 * a + 1)],
        ));
        for b in 0..k {
            if a != b {
                for s in 0..2 {
                    for u in 0..2 {
                        leak = leak.max(hat[(2 * a + s, 2 * b + u)].norm());
                    }
                }
            }
        }
    }
    (blocks, leak)
}

/// Constrained coordinates, one vector per Fourier mode.
pub type Coords = Vec<DVector<C64>>;

pub fn coords_norm(c: &Coords) -> f64 {
    c.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

pub fn coords_sub(a: &Coords, b: &Coords) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Allowed boundary trace directions of one Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub lower: Vec<Spinor>,
    pub upper: Vec<Spinor>,
}

/// The compression `D_c = Q^* W D Q` onto the constrained subspace.
///
/// Columns of `Q` are interior unit spinors and allowed boundary directions,
/// each scaled by `w^{-1/2}`, so `Q^* W Q = 1` by construction.
#[derive(Debug, Clone)]
pub struct ConstrainedDirac {
    t: f64,
    mesh: Arc<Mesh>,
    transform: AngularTransform,
    radial_weights: Vec<f64>,
    bases: Vec<ModeBasis>,
    operators: Vec<BandedMatrix>,
    hermiticity_residual: f64,
    norm: f64,
}

/// Builds the constrained operator from one condition per boundary component.
pub fn constrain_operator(assembly: &DiracAssembly, specs: &[BoundaryConditionSpec]) -> Result<ConstrainedDirac> {
    let bases = mode_bases(assembly, specs)?;
    ConstrainedDirac::with_bases(assembly, bases)
}

/// Per-mode allowed trace directions for the given conditions.
pub fn mode_bases(assembly: &DiracAssembly, specs: &[BoundaryConditionSpec]) -> Result<Vec<ModeBasis>> {
    let transform = assembly.transform();
    let mut per_side: [Option<Vec<Vec<Spinor>>>; 2] = [None, None];
    for spec in specs {
        if (spec.t - assembly.t()).abs() > 1e-12 * (1.0 + assembly.t().abs()) {
            return Err(Error::Data(format!(
                "boundary condition built at t = {} used with an assembly at t = {}",
                spec.t,
                assembly.t()
            )));
        }
        let slot = &mut per_side[spec.side.index()];
        if slot.is_some() {
            return Err(Error::Data(format!("two conditions given for side {:?}", spec.side)));
        }
        *slot = Some(spec.allowed_per_mode(transform)?);
    }
    let [lower, upper] = per_side;
    let (lower, upper) = match (lower, upper) {
        (Some(l), Some(u)) => (l, u),
        _ => return Err(Error::Data("one boundary condition per component is required".into())),
    };
    Ok(lower.into_iter().zip(upper).map(|(lower, upper)| ModeBasis { lower, upper }).collect())
}

impl ConstrainedDirac {
    /// Compresses `assembly` onto precomputed allowed directions.
    pub fn with_bases(assembly: &DiracAssembly, bases: Vec<ModeBasis>) -> Result<Self> {
        let radial_weights = assembly.radial_weights().to_vec();
        let mut operators = Vec::with_capacity(bases.len());
        let mut residual: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for (block, basis) in assembly.blocks().iter().zip(&bases) {
            let layout = Layout::new(block.radial_count(), basis);
            let mut m = BandedMatrix::zeros(layout.dim, 3, 3);
            for i in 0..layout.radial {
                for j in i.saturating_sub(1)..(i + 2).min(layout.radial) {
                    let b = if j == i {
                        block.diag[i]
                    } else if j > i {
                        block.upper[i]
                    } else {
                        block.lower[j]
                    };
                    let scale = (radial_weights[i] / radial_weights[j]).sqrt();
                    for (p, u) in layout.vectors(i, basis) {
                        for (q, v) in layout.vectors(j, basis) {
                            let e = u.dotc(&(b * v)) * scale;
                            if e != C64::new(0.0, 0.0) {
                                m.add(p, q, e);
                            }
                        }
                    }
                }
            }
            residual = residual.max(m.hermiticity_residual());
            norm = norm.max(m.max_abs());
            operators.push(m.hermitian_part());
        }
        let relative = if norm > 0.0 { residual / norm } else { 0.0 };
        if relative > HERMITICITY_LIMIT {
            return Err(Error::NotHermitian { residual: relative, limit: HERMITICITY_LIMIT });
        }
        Ok(ConstrainedDirac {
            t: assembly.t(),
            mesh: assembly.mesh().clone(),
            transform: assembly.transform().clone(),
            radial_weights,
            bases,
            operators,
            hermiticity_residual: relative,
            norm,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn bases(&self) -> &[ModeBasis] {
        &self.bases
    }

    /// Per-mode Hermitian compressed operators.
    pub fn operators(&self) -> &[BandedMatrix] {
        &self.operators
    }

    /// `max |D_c - D_c^*| / max |D_c|` before symmetrization.
    pub fn hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual
    }

    /// Largest entry of `D_c`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.operators.iter().map(BandedMatrix::n).collect()
    }

    /// Dimension of the constrained subspace.
    pub fn dim(&self) -> usize {
        self.mode_dims().iter().sum()
    }

    pub fn zero_coords(&self) -> Coords {
        self.mode_dims().into_iter().map(DVector::zeros).collect()
    }

    /// `Q^* W psi`.
    pub fn project(&self, values: &DVector<C64>) -> Coords {
        let blocks = self.transform.to_blocks(values);
        blocks
            .iter()
            .zip(&self.bases)
            .map(|(v, basis)| {
                let layout = Layout::new(self.mesh.radial_count(), basis);
                let mut c = DVector::zeros(layout.dim);
                for i in 0..layout.radial {
                    let sw = self.radial_weights[i].sqrt();
                    let x = Spinor::new(v[2 * i], v[2 * i + 1]);
                    for (p, u) in layout.vectors(i, basis) {
                        c[p] = u.dotc(&x) * sw;
                    }
                }
                c
            })
            .collect()
    }

    /// `Q c`.
    pub fn lift(&self, coords: &Coords) -> DVector<C64> {
        let blocks: Vec<DVector<C64>> = coords
            .iter()
            .zip(&self.bases)
            .map(|(c, basis)| {
                let layout = Layout::new(self.mesh.radial_count(), basis);
                let mut v = DVector::zeros(SPINOR_RANK * layout.radial);
                for i in 0..layout.radial {
                    let isw = 1.0 / self.radial_weights[i].sqrt();
                    for (p, u) in layout.vectors(i, basis) {
                        v[2 * i] += u[0] * c[p] * isw;
                        v[2 * i + 1] += u[1] * c[p] * isw;
                    }
                }
                v
            })
            .collect();
        self.transform.from_blocks(&blocks)
    }

    pub fn apply(&self, coords: &Coords) -> Coords {
        coords.iter().zip(&self.operators).map(|(c, m)| m.mul_vec(c)).collect()
    }

    /// Dense per-mode matrices (for eigendecompositions).
    pub fn dense_modes(&self) -> Vec<DMatrix<C64>> {
        self.operators.iter().map(BandedMatrix::to_dense).collect()
    }

    /// All eigenvalues of `D_c`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .dense_modes()
            .into_iter()
            .flat_map(|m| m.symmetric_eigenvalues().iter().copied().collect::<Vec<_>>())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

/// Index layout of the constrained coordinates of one mode.
struct Layout {
    radial: usize,
    dim: usize,
    n_lower: usize,
}

impl Layout {
    fn new(radial: usize, basis: &ModeBasis) -> Self {
        let n_lower = basis.lower.len();
        Layout { radial, dim: n_lower + 2 * (radial - 2) + basis.upper.len(), n_lower }
    }

    /// `(coordinate index, trace direction)` pairs living at radial node `i`.
    fn vectors<'a>(&self, i: usize, basis: &'a ModeBasis) -> Vec<(usize, Spinor)> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        if i == 0 {
            basis.lower.iter().enumerate().map(|(p, u)| (p, *u)).collect()
        } else if i + 1 == self.radial {
            let start = self.n_lower + 2 * (self.radial - 2);
            basis.upper.iter().enumerate().map(|(p, u)| (start + p, *u)).collect()
        } else {
            let start = self.n_lower + 2 * (i - 1);
            vec![(start, Spinor::new(one, zero)), (start + 1, Spinor::new(zero, one))]
        }
    }
}
