//! P2 Lagrange finite elements on structured 1D and 2D meshes.

mod assembly;
pub mod io;
mod mesh;
mod norms;
pub mod quadrature;
mod space;

use std::ops::{Deref, DerefMut};

use crate::coeffs::LinearCombination;
use crate::error::{Error, Result};

pub use assembly::{
    assemble_forcing_load, assemble_mass, assemble_nonlinear_load, assemble_stiffness, apply_boundary,
    constrain_dirichlet, integrate_pointwise, lift_dirichlet, BoundaryCondition, SparseMatrix, SparsityPattern,
};
pub use mesh::{build_mesh, Cells, Domain, Mesh};
pub use norms::{
    discrete_time_norm, error_norm, mass_inner, mass_norm, stiffness_norm, ErrorKind, ExactField, TimeNorm,
};
pub use quadrature::QuadratureRule;
pub use space::{BoundaryKind, FeSpace, RefTables};

/// Coefficients of a finite-element function, one entry per global dof.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_finite(&self, location: &str) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NumericalFailure {
                location: location.to_string(),
                message: format!("non-finite coefficient {} at dof {i}", self.0[i]),
            }),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        debug_assert_eq!(self.len(), x.len());
        for (s, &xi) in self.0.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_max(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Deref for FieldVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FieldVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl LinearCombination for FieldVector {
    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        let n = terms.first().map_or(0, |(_, v)| v.len());
        let mut out = vec![0.0; n];
        for (c, v) in terms {
            assert_eq!(v.len(), n, "length mismatch in linear combination");
            for (o, &x) in out.iter_mut().zip(v.iter()) {
                *o += c * x;
            }
        }
        Self(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
