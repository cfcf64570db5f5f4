//! Allen-Cahn model terms and the assembled problem shared by the steppers.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fem::{
    assemble_forcing_load, assemble_mass, assemble_stiffness, constrain_dirichlet, integrate_pointwise, BoundaryKind,
    FeSpace, FieldVector, SparseMatrix, SparsityPattern,
};

/// Double-well potential `F(u) = (u^2 - 1)^2 / 4`.
pub fn potential(u: f64) -> f64 {
    let s = u * u - 1.0;
    0.25 * s * s
}

/// `f = F' = u^3 - u`.
pub fn f(u: f64) -> f64 {
    u * u * u - u
}

/// Secant quotient `(F(a) - F(b)) / (a - b)` in expanded polynomial form,
/// which is exact for `a != b` and reduces to `f(a)` when `a == b`.
pub fn f_tilde(a: f64, b: f64) -> f64 {
    0.25 * (a * a * a + a * a * b + a * b * b + b * b * b) - 0.5 * (a + b)
}

/// Convex-splitting nonlinearity: secant of `F1 = (u^4 + 1)/4` between the
/// implicit value and the old value, minus the secant of `F2 = u^2/2`
/// between the extrapolated value and the old value.
pub fn f_hat_css(u_impl: f64, u_expl: f64, u_old: f64) -> f64 {
    let (a, b, c) = (u_impl, u_expl, u_old);
    0.25 * (a * a * a + a * a * c + a * c * c + c * c * c) - 0.5 * (b + c)
}

/// Function of space and time.
pub type SpaceTimeFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ModelParams {
    /// Interfacial parameter.
    pub epsilon: f64,
    pub forcing: Option<SpaceTimeFn>,
}

impl fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelParams")
            .field("epsilon", &self.epsilon)
            .field("forcing", &self.forcing.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl ModelParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(Self { epsilon, forcing: None })
    }

    pub fn with_forcing(mut self, g: SpaceTimeFn) -> Self {
        self.forcing = Some(g);
        self
    }
}

/// Boundary data matching the space's [`BoundaryKind`].
#[derive(Clone)]
pub enum BoundaryData {
    Natural,
    Periodic,
    /// Prescribed values `g(x, t)` on the boundary.
    Dirichlet(SpaceTimeFn),
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryData::Natural => write!(f, "Natural"),
            BoundaryData::Periodic => write!(f, "Periodic"),
            BoundaryData::Dirichlet(_) => write!(f, "Dirichlet(<fn>)"),
        }
    }
}

/// Per-step solver report.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Fixed-point iterations (0 for linear schemes).
    pub iterations: usize,
    /// Last fixed-point increment in the L2 norm.
    pub increment: f64,
    /// Linear solves performed.
    pub solves: usize,
}

/// A space with its assembled operators, model parameters and boundary data.
#[derive(Debug)]
pub struct Problem {
    pub space: FeSpace,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub params: ModelParams,
    pub boundary: BoundaryData,
}

impl Problem {
    pub fn new(space: FeSpace, params: ModelParams, boundary: BoundaryData) -> Result<Arc<Self>> {
        let ok = matches!(
            (&boundary, space.boundary),
            (BoundaryData::Natural, BoundaryKind::Natural)
                | (BoundaryData::Periodic, BoundaryKind::Periodic)
                | (BoundaryData::Dirichlet(_), BoundaryKind::Dirichlet)
        );
        if !ok {
            return invalid(format!("boundary data {boundary:?} does not match a {:?} space", space.boundary));
        }
        let pattern = Arc::new(SparsityPattern::for_space(&space));
        let mass = assemble_mass(&space, pattern.clone());
        let stiffness = assemble_stiffness(&space, pattern);
        Ok(Arc::new(Self { space, mass, stiffness, params, boundary }))
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    /// `E(u) = integral F(u)`.
    pub fn potential_energy(&self, u: &[f64]) -> Result<f64> {
        integrate_pointwise(&self.space, |v| potential(v[0]), &[u])
    }

    /// `||u||^2` in L2.
    pub fn mass_sq(&self, u: &[f64]) -> f64 {
        self.mass.inner(u, u)
    }

    /// `||grad u||^2`.
    pub fn grad_sq(&self, u: &[f64]) -> f64 {
        self.stiffness.inner(u, u)
    }

    /// Load vector of the forcing at time `t`, if any.
    pub fn forcing_load(&self, t: f64) -> Result<Option<FieldVector>> {
        match &self.params.forcing {
            None => Ok(None),
            Some(g) => assemble_forcing_load(&self.space, |x| g(x, t)).map(Some),
        }
    }

    /// Dirichlet values at time `t` on `space.boundary_dofs()`.
    pub fn boundary_values(&self, t: f64) -> Option<Vec<f64>> {
        match &self.boundary {
            BoundaryData::Dirichlet(g) => {
                let coords = self.space.dof_coords();
                Some(self.space.boundary_dofs().iter().map(|&d| g(coords[d], t)).collect())
            }
            _ => None,
        }
    }

    /// `a M + b K` with Dirichlet rows and columns replaced by identity.
    pub fn system_matrix(&self, a: f64, b: f64) -> Result<SparseMatrix> {
        let m = SparseMatrix::lincomb(&[(a, &self.mass), (b, &self.stiffness)])?;
        Ok(match self.boundary {
            BoundaryData::Dirichlet(_) => constrain_dirichlet(&m, self.space.boundary_dofs()),
            _ => m,
        })
    }

    /// Moves known boundary values of the unknown to the right-hand side of
    /// a system built by [`Problem::system_matrix`]`(a, b)`.
    pub fn lift(&self, rhs: &mut [f64], a: f64, b: f64, values: Option<&[f64]>) {
        let Some(values) = values else { return };
        let dofs = self.space.boundary_dofs();
        if values.iter().any(|&v| v != 0.0) {
            let mut ext = vec![0.0; self.n_dofs()];
            for (&d, &v) in dofs.iter().zip(values) {
                ext[d] = v;
            }
            let m = self.mass.mul_vec(&ext);
            let k = self.stiffness.mul_vec(&ext);
            for ((r, mi), ki) in rhs.iter_mut().zip(m.iter()).zip(k.iter()) {
                *r -= a * mi + b * ki;
            }
        }
        for (&d, &v) in dofs.iter().zip(values) {
            rhs[d] = v;
        }
    }

    /// Writes boundary values into a field.
    pub fn impose(&self, u: &mut [f64], values: Option<&[f64]>) {
        if let Some(values) = values {
            for (&d, &v) in self.space.boundary_dofs().iter().zip(values) {
                u[d] = v;
            }
        }
    }

    /// Values of `u` on the boundary dofs.
    pub fn boundary_part(&self, u: &[f64]) -> Vec<f64> {
        self.space.boundary_dofs().iter().map(|&d| u[d]).collect()
    }
}
