use super::assembly::SparseMatrix;
use super::quadrature;
use super::space::{FeSpace, RefTables};
use crate::error::{invalid, Result};

/// A function known pointwise together with its gradient.
pub trait ExactField {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

impl<F: Fn([f64; 2]) -> f64, G: Fn([f64; 2]) -> [f64; 2]> ExactField for (F, G) {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.0)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.1)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    L2,
    /// Full H1 norm: L2 part plus gradient part.
    H1,
}

/// `|| u_h - exact ||` in L2 or H1, integrated with a rule finer than the
/// assembly rule.
pub fn error_norm(space: &FeSpace, u: &[f64], exact: &dyn ExactField, kind: ErrorKind) -> Result<f64> {
    space.check_len(u, "error norm")?;
    let tables = if space.dimension() == 1 {
        RefTables::new(1, quadrature::gauss_legendre(8))
    } else {
        RefTables::new(2, quadrature::triangle_collapsed(7))
    };
    let nl = tables.n_local;
    let mut sum = 0.0;
    for c in 0..space.n_cells() {
        let geo = &space.geometry[c];
        let dofs = space.cell_dofs(c);
        for (q, p) in tables.rule.points.iter().enumerate() {
            let x = geo.map(*p);
            let phi = &tables.phi[q * nl..(q + 1) * nl];
            let uh: f64 = dofs.iter().zip(phi).map(|(&d, v)| u[d] * v).sum();
            let e = uh - exact.value(x);
            let mut local = e * e;
            if kind == ErrorKind::H1 {
                let mut g = [0.0; 2];
                for (a, &d) in dofs.iter().enumerate() {
                    let ga = geo.grad(tables.dphi[q * nl + a]);
                    g[0] += u[d] * ga[0];
                    g[1] += u[d] * ga[1];
                }
                let ge = exact.gradient(x);
                let (dx, dy) = (g[0] - ge[0], if space.dimension() == 1 { 0.0 } else { g[1] - ge[1] });
                local += dx * dx + dy * dy;
            }
            sum += tables.rule.weights[q] * geo.det * local;
        }
    }
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeNorm {
    Linf,
    L2,
}

/// Discrete-in-time norm of a sequence of per-step errors:
/// `max e_n` or `sqrt(sum k_n e_n^2)`.
pub fn discrete_time_norm(errors: &[f64], steps: &[f64], kind: TimeNorm) -> Result<f64> {
    match kind {
        TimeNorm::Linf => Ok(errors.iter().fold(0.0_f64, |m, e| m.max(e.abs()))),
        TimeNorm::L2 => {
            if errors.len() != steps.len() {
                return invalid(format!("{} errors but {} step sizes", errors.len(), steps.len()));
            }
            Ok(errors.iter().zip(steps).map(|(e, k)| k * e * e).sum::<f64>().sqrt())
        }
    }
}

/// `(u, v)` through the mass matrix.
pub fn mass_inner(m: &SparseMatrix, u: &[f64], v: &[f64]) -> f64 {
    m.inner(u, v)
}

pub fn mass_norm(m: &SparseMatrix, u: &[f64]) -> f64 {
    m.inner(u, u).max(0.0).sqrt()
}

/// `|| grad u ||` through the stiffness matrix.
pub fn stiffness_norm(k: &SparseMatrix, u: &[f64]) -> f64 {
    k.inner(u, u).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, BoundaryKind, Domain};

    #[test]
    fn time_norm_examples() {
        assert_eq!(discrete_time_norm(&[1.0, 2.0, 3.0], &[], TimeNorm::Linf).unwrap(), 3.0);
        assert_eq!(discrete_time_norm(&[1.0, 1.0], &[0.5, 0.5], TimeNorm::L2).unwrap(), 1.0);
        assert_eq!(discrete_time_norm(&[2.0, 0.0], &[0.25, 0.75], TimeNorm::L2).unwrap(), 1.0);
        assert!(discrete_time_norm(&[1.0], &[0.5, 0.5], TimeNorm::L2).is_err());
    }

    #[test]
    fn error_norm_examples() {
        let s = FeSpace::new(build_mesh(Domain::Interval { a: -2.0, b: 4.0 }, 5).unwrap(), BoundaryKind::Natural).unwrap();
        let one = (|_: [f64; 2]| 1.0, |_: [f64; 2]| [0.0, 0.0]);
        let e = error_norm(&s, &vec![0.0; s.n_dofs()], &one, ErrorKind::L2).unwrap();
        assert!((e - 6f64.sqrt()).abs() < 1e-13);

        let quad = (|x: [f64; 2]| 3.0 * x[0] * x[0] - x[0] + 0.5, |x: [f64; 2]| [6.0 * x[0] - 1.0, 0.0]);
        let u = s.interpolate(|x| quad.value(x));
        assert!(error_norm(&s, &u, &quad, ErrorKind::L2).unwrap() < 1e-12);
        assert!(error_norm(&s, &u, &quad, ErrorKind::H1).unwrap() < 1e-11);

        let sin = (|x: [f64; 2]| x[0].sin(), |x: [f64; 2]| [x[0].cos(), 0.0]);
        let u = s.interpolate(|x| x[0].sin());
        let l2 = error_norm(&s, &u, &sin, ErrorKind::L2).unwrap();
        let h1 = error_norm(&s, &u, &sin, ErrorKind::H1).unwrap();
        assert!(h1 >= l2 && l2 > 0.0);
    }

    #[test]
    fn quadratic_reproduced_in_2d() {
        let s = FeSpace::new(
            build_mesh(Domain::Rectangle { x0: 0.0, x1: 1.0, y0: -1.0, y1: 1.0 }, 3).unwrap(),
            BoundaryKind::Dirichlet,
        )
        .unwrap();
        let f = (
            |x: [f64; 2]| x[0] * x[1] - 2.0 * x[1] * x[1] + x[0],
            |x: [f64; 2]| [x[1] + 1.0, x[0] - 4.0 * x[1]],
        );
        let u = s.interpolate(|x| f.value(x));
        assert!(error_norm(&s, &u, &f, ErrorKind::H1).unwrap() < 1e-12);
    }
}
