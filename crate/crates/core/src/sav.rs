//! Linear DLN-SAV stepper. Each step is pre-process, one backward Euler SAV
//! substep solved with two SPD solves and a rank-one correction, and
//! post-process.

use std::sync::Arc;

use crate::coeffs::{combine, t_beta, CombineKind, DlnCoefficients, LinearCombination, RefactorCoefficients, StepPair, Theta};
use crate::error::{invalid, Error, Result};
use crate::fem::{dot, FieldVector};
use crate::linsolve::FactorCache;
use crate::model::{f, Problem, StepDiagnostics};

/// Floor on `E(u) + c0` below which the auxiliary variable is undefined.
pub const ENERGY_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavParams {
    /// Energy shift `C0 >= 0`.
    pub c0: f64,
}

impl Default for SavParams {
    fn default() -> Self {
        Self { c0: 0.0 }
    }
}

impl SavParams {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 >= 0.0 && c0.is_finite()) {
            return invalid(format!("c0 must be nonnegative, got {c0}"));
        }
        Ok(Self { c0 })
    }
}

/// Two trailing solutions and auxiliary values.
#[derive(Debug, Clone, PartialEq)]
pub struct SavState {
    pub u_curr: FieldVector,
    pub u_prev: FieldVector,
    pub r_curr: f64,
    pub r_prev: f64,
    pub t_curr: f64,
    pub t_prev: f64,
    pub k_prev: f64,
}

impl SavState {
    /// State with `r = sqrt(E(u) + c0)` at both levels.
    pub fn from_fields(
        problem: &Problem,
        params: SavParams,
        u_prev: FieldVector,
        u_curr: FieldVector,
        t_prev: f64,
        t_curr: f64,
    ) -> Result<Self> {
        if !(t_prev < t_curr) {
            return invalid(format!("state times must increase, got {t_prev} then {t_curr}"));
        }
        let r_prev = aux_value(problem, params, &u_prev)?;
        let r_curr = aux_value(problem, params, &u_curr)?;
        Ok(Self { u_curr, u_prev, r_curr, r_prev, t_curr, t_prev, k_prev: t_curr - t_prev })
    }

    pub fn advance(&self, u_next: FieldVector, r_next: f64, k_n: f64) -> Self {
        Self {
            u_prev: self.u_curr.clone(),
            u_curr: u_next,
            r_prev: self.r_curr,
            r_curr: r_next,
            t_prev: self.t_curr,
            t_curr: self.t_curr + k_n,
            k_prev: k_n,
        }
    }
}

/// `E(u) = integral F(u)`.
pub fn potential_energy(problem: &Problem, u: &[f64]) -> Result<f64> {
    problem.potential_energy(u)
}

fn shifted_energy(problem: &Problem, params: SavParams, u: &[f64]) -> Result<f64> {
    let e = problem.potential_energy(u)? + params.c0;
    if !(e >= ENERGY_FLOOR) {
        return Err(Error::InvalidState(format!(
            "E(u) + c0 = {e:.3e} is below the floor {ENERGY_FLOOR:e}; choose c0 > 0"
        )));
    }
    Ok(e)
}

/// `sqrt(E(u) + c0)`.
pub fn aux_value(problem: &Problem, params: SavParams, u: &[f64]) -> Result<f64> {
    Ok(shifted_energy(problem, params, u)?.sqrt())
}

/// Nodal interpolant of `f(u*) / sqrt(E(u*) + c0)` and the denominator.
pub fn phi_field(problem: &Problem, u_star: &[f64], params: SavParams) -> Result<(FieldVector, f64)> {
    problem.space.check_len(u_star, "u*")?;
    let denom = shifted_energy(problem, params, u_star)?.sqrt();
    Ok((FieldVector(u_star.iter().map(|&u| f(u) / denom).collect()), denom))
}

/// Backward Euler SAV substep of size `k`:
/// `(u - u_old)/k + eps^2 K u + r B = G`, `r - r_old = B^T (u - u_old) / 2`
/// with `B = M phi`. `boundary` holds the Dirichlet values of `u`.
pub struct BeSavInput<'a> {
    pub u_old: &'a [f64],
    pub r_old: f64,
    pub k: f64,
    pub phi: &'a [f64],
    pub forcing: Option<&'a [f64]>,
    pub boundary: Option<&'a [f64]>,
}

/// Solves one BE SAV substep; returns `(u_temp, r_temp)`.
pub fn be_sav_substep(problem: &Problem, cache: &mut FactorCache, input: &BeSavInput<'_>) -> Result<(FieldVector, f64)> {
    let BeSavInput { u_old, r_old, k, phi, forcing, boundary } = *input;
    if !(k > 0.0) {
        return invalid(format!("substep size must be positive, got {k}"));
    }
    problem.space.check_len(u_old, "u_old")?;
    problem.space.check_len(phi, "phi")?;
    let eps2 = problem.epsilon() * problem.epsilon();
    let fact = cache.get_or_factorize(&[k], || problem.system_matrix(1.0, k * eps2))?;

    let b_full = problem.mass.mul_vec(phi);
    let mut w = problem.mass.mul_vec(u_old);
    let coef = 0.5 * k * dot(&b_full, u_old) - k * r_old;
    w.axpy(coef, &b_full);
    if let Some(g) = forcing {
        w.axpy(k, g);
    }

    let mut b = b_full.clone();
    if let Some(values) = boundary {
        let dofs = problem.space.boundary_dofs();
        let bd: f64 = dofs.iter().zip(values).map(|(&d, &v)| b_full[d] * v).sum();
        for &d in dofs {
            b[d] = 0.0;
        }
        // rank-one coupling with the known boundary part
        w.axpy(-0.5 * k * bd, &b);
        problem.lift(&mut w, 1.0, k * eps2, Some(values));
    }

    let z1 = fact.solve(&b)?;
    let z2 = fact.solve(&w)?;
    let denom = 1.0 + 0.5 * k * dot(&b, &z1);
    if !(denom > 0.0) {
        return Err(Error::InvalidState(format!("rank-one denominator {denom:.3e} is not positive")));
    }
    let s = dot(&b, &z2) / denom;
    let mut u = z2;
    u.axpy(-0.5 * k * s, &z1);
    let du = FieldVector::lincomb(&[(1.0, &u), (-1.0, &FieldVector(u_old.to_vec()))]);
    let r = r_old + 0.5 * dot(&b_full, &du);
    Ok((u, r))
}

/// DLN-SAV stepper bound to one problem.
#[derive(Debug)]
pub struct DlnSav {
    problem: Arc<Problem>,
    theta: Theta,
    params: SavParams,
    cache: FactorCache,
}

impl DlnSav {
    pub fn new(problem: Arc<Problem>, theta: Theta, params: SavParams) -> Self {
        Self { problem, theta, params, cache: FactorCache::new() }
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn theta(&self) -> Theta {
        self.theta
    }

    pub fn params(&self) -> SavParams {
        self.params
    }

    pub fn step(&mut self, state: &SavState, k_n: f64) -> Result<(SavState, StepDiagnostics)> {
        let p = self.problem.clone();
        p.space.check_len(&state.u_curr, "u_n")?;
        p.space.check_len(&state.u_prev, "u_{n-1}")?;
        let steps = StepPair::new(k_n, state.k_prev)?;
        let c = DlnCoefficients::new(self.theta, steps)?;
        let rc = RefactorCoefficients::new(&c)?;
        let t_next = state.t_curr + k_n;
        let tb = t_beta([state.t_prev, state.t_curr, t_next], &c)?;
        let (u0, u1) = (&state.u_prev, &state.u_curr);

        let u_old = rc.pre(u1, u0);
        let r_old = rc.pre(&state.r_curr, &state.r_prev);
        let k_be = rc.be_step(&c);
        let u_star = combine([u0, u1, u1], CombineKind::Star, &c, steps);
        let (phi, _) = phi_field(&p, &u_star, self.params)?;
        let forcing = p.forcing_load(tb)?;
        let g_next = p.boundary_values(t_next);
        // the substep's unknown is u_beta, whose boundary values follow from the data
        let bd_beta = g_next.as_ref().map(|g| {
            let (b0, b1) = (p.boundary_part(u0), p.boundary_part(u1));
            let [c0, c1, c2] = c.beta;
            g.iter().zip(b1.iter().zip(&b0)).map(|(gn, (x1, x0))| c2 * gn + c1 * x1 + c0 * x0).collect::<Vec<_>>()
        });

        let input = BeSavInput {
            u_old: &u_old,
            r_old,
            k: k_be,
            phi: &phi,
            forcing: forcing.as_deref(),
            boundary: bd_beta.as_deref(),
        };
        let (u_temp, r_temp) = be_sav_substep(&p, &mut self.cache, &input)?;
        let mut u_next = rc.post(&u_temp, u1, u0);
        let r_next = rc.post(&r_temp, &state.r_curr, &state.r_prev);
        p.impose(&mut u_next, g_next.as_deref());
        u_next.check_finite("DLN-SAV step")?;
        if !r_next.is_finite() {
            return Err(Error::NumericalFailure { location: "DLN-SAV step".into(), message: format!("r = {r_next}") });
        }
        Ok((state.advance(u_next, r_next, k_n), StepDiagnostics { iterations: 0, increment: 0.0, solves: 2 }))
    }

    /// `|r_n - sqrt(E(u_n) + c0)|`.
    pub fn r_drift(&self, state: &SavState) -> Result<f64> {
        Ok((state.r_curr - aux_value(&self.problem, self.params, &state.u_curr)?).abs())
    }
}

/// `E = eps^2 ||(grad u_n, grad u_{n-1})||_G^2 + (1+theta)/2 r_n^2 + (1-theta)/2 r_{n-1}^2`.
pub fn energy_sav(problem: &Problem, state: &SavState, theta: Theta) -> f64 {
    let t = theta.value();
    let eps2 = problem.epsilon() * problem.epsilon();
    let grad = 0.25 * (1.0 + t) * problem.grad_sq(&state.u_curr) + 0.25 * (1.0 - t) * problem.grad_sq(&state.u_prev);
    eps2 * grad + 0.5 * (1.0 + t) * state.r_curr * state.r_curr + 0.5 * (1.0 - t) * state.r_prev * state.r_prev
}

/// `||u_alpha||^2/k_hat + E_{n+1} - E_n + eps^2 ||grad sum gamma u||^2 + 2 (sum gamma r)^2`.
pub fn dissipation_residual_sav(problem: &Problem, pre: &SavState, post: &SavState, theta: Theta) -> Result<f64> {
    if pre.u_curr != post.u_prev || pre.r_curr != post.r_prev {
        return invalid("states are not consecutive");
    }
    let steps = StepPair::new(post.k_prev, pre.k_prev)?;
    let c = DlnCoefficients::new(theta, steps)?;
    let window = [&pre.u_prev, &pre.u_curr, &post.u_curr];
    let u_alpha = combine(window, CombineKind::Alpha, &c, steps);
    let g = c.gamma;
    let u_gamma = FieldVector::lincomb(&[(g[0], window[0]), (g[1], window[1]), (g[2], window[2])]);
    let r_gamma = g[0] * pre.r_prev + g[1] * pre.r_curr + g[2] * post.r_curr;
    let eps2 = problem.epsilon() * problem.epsilon();
    Ok(problem.mass_sq(&u_alpha) / c.k_hat + energy_sav(problem, post, theta) - energy_sav(problem, pre, theta)
        + eps2 * problem.grad_sq(&u_gamma)
        + 2.0 * r_gamma * r_gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, BoundaryKind, Domain, FeSpace};
    use crate::model::{BoundaryData, ModelParams};

    fn problem_1d(n: usize) -> Arc<Problem> {
        let s = FeSpace::new(build_mesh(Domain::Interval { a: -2.0, b: 4.0 }, n).unwrap(), BoundaryKind::Natural).unwrap();
        Problem::new(s, ModelParams::new(0.1).unwrap(), BoundaryData::Natural).unwrap()
    }

    #[test]
    fn phi_examples() {
        let p = problem_1d(8);
        let (phi, d) = phi_field(&p, &p.space.ones(), SavParams::new(1.0).unwrap()).unwrap();
        assert!(phi.iter().all(|&v| v == 0.0));
        assert!((d - 1.0).abs() < 1e-15);
        let (phi, d) = phi_field(&p, &vec![0.0; p.n_dofs()], SavParams::default()).unwrap();
        assert!(phi.iter().all(|&v| v == 0.0));
        assert!((d - 1.5f64.sqrt()).abs() < 1e-14);
        assert!(matches!(phi_field(&p, &p.space.ones(), SavParams::default()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn heat_step_when_phi_vanishes() {
        let p = problem_1d(8);
        let u_old = p.space.interpolate(|x| x[0].sin());
        let phi = vec![0.0; p.n_dofs()];
        let mut cache = FactorCache::new();
        let input = BeSavInput { u_old: &u_old, r_old: 0.7, k: 0.1, phi: &phi, forcing: None, boundary: None };
        let (u, r) = be_sav_substep(&p, &mut cache, &input).unwrap();
        assert_eq!(r, 0.7);
        let a = crate::linsolve::factorize(&p.system_matrix(1.0, 0.1 * 0.01).unwrap()).unwrap();
        let heat = a.solve(&p.mass.mul_vec(&u_old)).unwrap();
        for (x, y) in u.iter().zip(heat.iter()) {
            assert!((x - y).abs() < 1e-14);
        }

        let tiny = BeSavInput { k: 1e-10, ..input };
        let (u, _) = be_sav_substep(&p, &mut cache, &tiny).unwrap();
        for (x, y) in u.iter().zip(u_old.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn steady_state_is_fixed() {
        let p = problem_1d(10);
        let params = SavParams::new(0.5).unwrap();
        let one = p.space.ones();
        let st = SavState::from_fields(&p, params, one.clone(), one, 0.0, 0.1).unwrap();
        let mut stepper = DlnSav::new(p.clone(), Theta::new(2.0 / 3.0).unwrap(), params);
        let (next, _) = stepper.step(&st, 0.15).unwrap();
        assert!(next.u_curr.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((next.r_curr - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let p = problem_1d(6);
        let zero = FieldVector::zeros(p.n_dofs());
        let st = SavState::from_fields(&p, SavParams::default(), zero.clone(), zero, 0.0, 0.1).unwrap();
        assert!((energy_sav(&p, &st, Theta::new(2.0 / 3.0).unwrap()) - 1.5).abs() < 1e-14);
        let mut s1 = st.clone();
        s1.r_prev = 100.0;
        assert_eq!(energy_sav(&p, &s1, Theta::MIDPOINT), energy_sav(&p, &st, Theta::MIDPOINT));
    }

    #[test]
    fn dissipation_identity_holds() {
        let p = problem_1d(40);
        let params = SavParams::default();
        for th in [2.0 / 3.0, 2.0 / 5f64.sqrt(), 1.0] {
            let th = Theta::new(th).unwrap();
            let u0 = p.space.interpolate(|x| 0.8 * (2.0 * x[0]).sin());
            let u1 = p.space.interpolate(|x| 0.78 * (2.0 * x[0]).sin());
            let mut st = SavState::from_fields(&p, params, u0, u1, 0.0, 0.05).unwrap();
            let mut stepper = DlnSav::new(p.clone(), th, params);
            for k in [0.05, 0.2, 0.04, 0.1] {
                let (next, _) = stepper.step(&st, k).unwrap();
                let r = dissipation_residual_sav(&p, &st, &next, th).unwrap();
                let e = energy_sav(&p, &st, th);
                assert!(r.abs() < 1e-12 * e.max(1.0), "residual {r}");
                assert!(energy_sav(&p, &next, th) <= e + 1e-12);
                st = next;
            }
        }
    }
}
