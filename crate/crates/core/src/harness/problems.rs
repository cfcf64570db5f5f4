//! The three test problems: a 1D travelling wave, a 2D manufactured solution
//! and 2D relaxation from random data.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fem::{build_mesh, BoundaryKind, Domain, ExactField, FeSpace, FieldVector};
use crate::model::{BoundaryData, ModelParams, Problem};

/// Exact solution `u(x, t)` with its spatial gradient.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: [f64; 2], t: f64) -> f64;
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];

    /// The solution frozen at time `t`.
    fn at(&self, t: f64) -> AtTime<'_, Self>
    where
        Self: Sized,
    {
        AtTime { exact: self, t }
    }
}

pub struct AtTime<'a, E: ?Sized> {
    exact: &'a E,
    t: f64,
}

impl<'a, E: ?Sized> AtTime<'a, E> {
    pub fn new(exact: &'a E, t: f64) -> Self {
        Self { exact, t }
    }
}

impl<E: ExactSolution + ?Sized> ExactField for AtTime<'_, E> {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.exact.value(x, self.t)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.exact.gradient(x, self.t)
    }
}

/// `u = (1 - tanh((x - s t) / (2 sqrt(2) eps))) / 2`, `s = 3 eps / sqrt(2)`.
#[derive(Debug, Clone, Copy)]
pub struct TravellingWave {
    pub epsilon: f64,
}

impl TravellingWave {
    pub const DOMAIN: Domain = Domain::Interval { a: -2.0, b: 4.0 };

    pub fn speed(&self) -> f64 {
        3.0 * self.epsilon / SQRT_2
    }

    fn xi(&self, x: f64, t: f64) -> f64 {
        (x - self.speed() * t) / (2.0 * SQRT_2 * self.epsilon)
    }
}

impl ExactSolution for TravellingWave {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        0.5 * (1.0 - self.xi(x[0], t).tanh())
    }
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let th = self.xi(x[0], t).tanh();
        [-0.5 * (1.0 - th * th) / (2.0 * SQRT_2 * self.epsilon), 0.0]
    }
}

/// `u = 0.05 exp(-t/10) sin x sin y` on `[0, 2 pi]^2`.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub epsilon: f64,
}

impl Manufactured {
    pub const DOMAIN: Domain = Domain::Rectangle { x0: 0.0, x1: 2.0 * PI, y0: 0.0, y1: 2.0 * PI };

    fn amplitude(t: f64) -> f64 {
        0.05 * (-0.1 * t).exp()
    }

    /// Source making `u` an exact solution.
    pub fn forcing(&self, x: [f64; 2], t: f64) -> f64 {
        let u = self.value(x, t);
        (2.0 * self.epsilon * self.epsilon - 1.1) * u + u * u * u
    }
}

impl ExactSolution for Manufactured {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        Self::amplitude(t) * x[0].sin() * x[1].sin()
    }
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let a = Self::amplitude(t);
        [a * x[0].cos() * x[1].sin(), a * x[0].sin() * x[1].cos()]
    }
}

/// A discretized problem with its initial data.
pub struct TestProblem {
    pub problem: Arc<Problem>,
    pub exact: Option<Arc<dyn ExactSolution>>,
    pub u0: FieldVector,
    pub t0: f64,
}

impl TestProblem {
    /// Interpolant of the exact solution at time `t`, if there is one.
    pub fn exact_interpolant(&self, t: f64) -> Option<FieldVector> {
        let e = self.exact.as_ref()?;
        Some(self.problem.space.interpolate(|x| e.value(x, t)))
    }
}

pub fn wave1d(epsilon: f64, mesh_n: usize) -> Result<TestProblem> {
    let wave = TravellingWave { epsilon };
    let params = ModelParams::new(epsilon)?;
    let space = FeSpace::new(build_mesh(TravellingWave::DOMAIN, mesh_n)?, BoundaryKind::Dirichlet)?;
    let g = Arc::new(move |x: [f64; 2], t: f64| wave.value(x, t));
    let problem = Problem::new(space, params, BoundaryData::Dirichlet(g))?;
    let u0 = problem.space.interpolate(|x| wave.value(x, 0.0));
    Ok(TestProblem { problem, exact: Some(Arc::new(wave)), u0, t0: 0.0 })
}

pub fn manufactured2d(epsilon: f64, mesh_n: usize) -> Result<TestProblem> {
    let m = Manufactured { epsilon };
    let params = ModelParams::new(epsilon)?.with_forcing(Arc::new(move |x, t| m.forcing(x, t)));
    let space = FeSpace::new(build_mesh(Manufactured::DOMAIN, mesh_n)?, BoundaryKind::Dirichlet)?;
    let problem = Problem::new(space, params, BoundaryData::Dirichlet(Arc::new(|_, _| 0.0)))?;
    let u0 = problem.space.interpolate(|x| m.value(x, 0.0));
    Ok(TestProblem { problem, exact: Some(Arc::new(m)), u0, t0: 0.0 })
}

/// Periodic square with nodal values `0.1 U - 0.05`, `U` uniform on
/// `[0, 1)` from a ChaCha8 stream seeded with `seed`.
pub fn random2d(epsilon: f64, mesh_n: usize, seed: u64) -> Result<TestProblem> {
    let params = ModelParams::new(epsilon)?;
    let space = FeSpace::new(build_mesh(Manufactured::DOMAIN, mesh_n)?, BoundaryKind::Periodic)?;
    let problem = Problem::new(space, params, BoundaryData::Periodic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0 = FieldVector((0..problem.n_dofs()).map(|_| 0.1 * rng.random::<f64>() - 0.05).collect());
    Ok(TestProblem { problem, exact: None, u0, t0: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(e: &dyn ExactSolution, x: [f64; 2], t: f64) {
        let h = 1e-6;
        let g = e.gradient(x, t);
        for d in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[d] += h;
            xm[d] -= h;
            let fd = (e.value(xp, t) - e.value(xm, t)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-6 * (1.0 + g[d].abs()), "{fd} vs {}", g[d]);
        }
    }

    #[test]
    fn wave_solves_the_equation() {
        let w = TravellingWave { epsilon: 0.05 };
        check_gradient(&w, [0.03, 0.0], 0.4);
        // u_t - eps^2 u_xx + u^3 - u = 0 by finite differences
        let (x, t, h) = (0.1, 0.3, 1e-4);
        let u = |x: f64, t: f64| w.value([x, 0.0], t);
        let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
        let v = u(x, t);
        let res = ut - 0.05 * 0.05 * uxx + v * v * v - v;
        assert!(res.abs() < 1e-5, "{res}");
    }

    #[test]
    fn manufactured_forcing_matches() {
        let m = Manufactured { epsilon: 0.3 };
        check_gradient(&m, [0.7, 2.1], 1.3);
        let (x, t, h) = ([0.7, 2.1], 1.3, 1e-4);
        let u = |x: [f64; 2], t: f64| m.value(x, t);
        let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let mut lap = 0.0;
        for d in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[d] += h;
            xm[d] -= h;
            lap += (u(xp, t) - 2.0 * u(x, t) + u(xm, t)) / (h * h);
        }
        let v = u(x, t);
        let res = ut - 0.09 * lap + v * v * v - v - m.forcing(x, t);
        assert!(res.abs() < 1e-7, "{res}");
    }

    #[test]
    fn random_data_is_seeded() {
        let a = random2d(0.1, 4, 7).unwrap().u0;
        let b = random2d(0.1, 4, 7).unwrap().u0;
        let c = random2d(0.1, 4, 8).unwrap().u0;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| (-0.05..0.05).contains(v)));
    }
}
