//! Concrete Clifford representations for `n = 1` and `n = 2`.
//!
//! Both representations act on rank-2 spinors with entries in `{0, +-1, +-i}`,
//! so the Clifford relations hold exactly in floating point. The pairing
//! matrix is `beta = gamma(e_0)`, which makes the positive pairing
//! `(phi, gamma(e_0) psi)` the Euclidean product.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::Side;
use crate::{MaxNorm, C64};

pub type Spinor = Vector2<C64>;
pub type SpinMatrix = Matrix2<C64>;

pub const SPINOR_RANK: usize = 2;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingKind {
    /// `phi^* beta psi`
    Indefinite,
    /// `phi^* beta gamma(e_0) psi`
    Positive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordRep {
    dim: usize,
    /// `gamma[j] = gamma(e_j)`, `j = 0..=n`.
    gamma: Vec<SpinMatrix>,
    beta: SpinMatrix,
}

impl CliffordRep {
    /// Shipped representation for spatial dimension `n`.
    ///
    /// `n = 2`: `gamma(e_0) = sigma_3`, `gamma(e_1) = i sigma_1`, `gamma(e_2) = i sigma_2`.
    /// `n = 1`: `gamma(e_0)` swaps the two copies of the rank-1 surface bundle and
    /// `gamma(e_1) = [[0, -1], [1, 0]]`, the odd-dimensional block form with `gamma_Sigma(e_1) = i`.
    pub fn build(n: usize) -> Result<Self> {
        let gamma = match n {
            1 => vec![
                Matrix2::new(ZERO, ONE, ONE, ZERO),
                Matrix2::new(ZERO, -ONE, ONE, ZERO),
            ],
            2 => vec![
                Matrix2::new(ONE, ZERO, ZERO, -ONE),
                Matrix2::new(ZERO, I, I, ZERO),
                Matrix2::new(ZERO, ONE, -ONE, ZERO),
            ],
            other => return Err(Error::UnsupportedDimension(other)),
        };
        let beta = gamma[0];
        Ok(CliffordRep { dim: n, gamma, beta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spinor_rank(&self) -> usize {
        SPINOR_RANK
    }

    pub fn beta(&self) -> &SpinMatrix {
        &self.beta
    }

    /// `gamma(e_j)` for `0 <= j <= n`.
    pub fn gamma(&self, j: usize) -> Result<SpinMatrix> {
        self.gamma
            .get(j)
            .copied()
            .ok_or_else(|| Error::Index(format!("gamma index {j} outside 0..={}", self.dim)))
    }

    /// `gamma_Sigma(e_j) = i gamma(e_0) gamma(e_j)` for `1 <= j <= n`.
    pub fn tangential_gamma(&self, j: usize) -> Result<SpinMatrix> {
        if j == 0 || j > self.dim {
            return Err(Error::Index(format!("tangential index {j} outside 1..={}", self.dim)));
        }
        Ok(self.gamma[0] * self.gamma[j] * I)
    }

    /// Spacetime Clifford action of the outward unit normal at `side`.
    pub fn normal_gamma(&self, side: Side) -> SpinMatrix {
        self.gamma[1] * C64::from(side.normal_sign())
    }

    /// Principal symbol of the spatial Dirac operator at the outward normal, `gamma_Sigma(e_n)`.
    pub fn normal_symbol(&self, side: Side) -> SpinMatrix {
        self.gamma[0] * self.normal_gamma(side) * I
    }

    pub fn pairing(&self, phi: &[C64], psi: &[C64], kind: PairingKind) -> Result<C64> {
        for v in [phi, psi] {
            if v.len() != SPINOR_RANK {
                return Err(Error::RankMismatch { expected: SPINOR_RANK, got: v.len() });
            }
        }
        let phi = Spinor::from_column_slice(phi);
        let psi = Spinor::from_column_slice(psi);
        Ok(self.pair(&phi, &psi, kind))
    }

    pub fn pair(&self, phi: &Spinor, psi: &Spinor, kind: PairingKind) -> C64 {
        let m = match kind {
            PairingKind::Indefinite => self.beta,
            PairingKind::Positive => self.beta * self.gamma[0],
        };
        phi.dotc(&(m * psi))
    }

    /// Largest residual of the Clifford relations, the beta-symmetry, and the
    /// skew-Hermiticity of the tangential gammas.
    pub fn invariant_residual(&self) -> f64 {
        let id = SpinMatrix::identity();
        let mut worst: f64 = 0.0;
        for j in 0..=self.dim {
            for k in 0..=self.dim {
                let metric = match (j, k) {
                    (0, 0) => -1.0,
                    (a, b) if a == b => 1.0,
                    _ => 0.0,
                };
                let anti = self.gamma[j] * self.gamma[k] + self.gamma[k] * self.gamma[j];
                worst = worst.max((anti + id * C64::from(2.0 * metric)).max_norm());
            }
            let bg = self.beta * self.gamma[j];
            worst = worst.max((bg - bg.adjoint()).max_norm());
        }
        for j in 1..=self.dim {
            let t = self.tangential_gamma(j).unwrap();
            worst = worst.max((t + t.adjoint()).max_norm());
        }
        worst
    }
}
