//! Modified DLN stepper: implicit in the secant nonlinearity, solved by a
//! fixed-point iteration around a step-constant SPD operator.

use std::sync::Arc;

use crate::coeffs::{combine, t_beta, CombineKind, DlnCoefficients, LinearCombination, StepPair, Theta};
use crate::error::{invalid, Error, Result};
use crate::fem::{assemble_nonlinear_load, FieldVector};
use crate::linsolve::FactorCache;
use crate::model::{f_hat_css, f_tilde, Problem, StepDiagnostics};

/// Two trailing solutions of a two-step scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub u_curr: FieldVector,
    pub u_prev: FieldVector,
    pub t_curr: f64,
    pub t_prev: f64,
    /// `t_curr - t_prev`, kept exactly as it was stepped.
    pub k_prev: f64,
}

impl SchemeState {
    pub fn new(u_prev: FieldVector, u_curr: FieldVector, t_prev: f64, t_curr: f64) -> Result<Self> {
        if u_prev.len() != u_curr.len() {
            return invalid("state fields differ in length");
        }
        if !(t_prev < t_curr) {
            return invalid(format!("state times must increase, got {t_prev} then {t_curr}"));
        }
        Ok(Self { u_curr, u_prev, t_curr, t_prev, k_prev: t_curr - t_prev })
    }

    /// State after accepting `u_next` at `t_curr + k_n`.
    pub fn advance(&self, u_next: FieldVector, k_n: f64) -> Self {
        Self {
            u_prev: self.u_curr.clone(),
            u_curr: u_next,
            t_prev: self.t_curr,
            t_curr: self.t_curr + k_n,
            k_prev: k_n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once the L2 norm of the increment is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

impl FixedPointConfig {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return invalid(format!("fixed-point tolerance must be positive and max_iter nonzero (tol = {tol}, max_iter = {max_iter})"));
        }
        Ok(Self { tol, max_iter })
    }
}

/// Treatment of the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    /// Secant quotient of `F` between the new and old theta-averages.
    #[default]
    Secant,
    /// Convex splitting: implicit secant of the quartic part, explicit
    /// secant of the quadratic part.
    ConvexSplit,
}

/// Modified DLN stepper bound to one problem. Keeps the factorization of
/// `(alpha_2/k_hat) M + eps^2 beta_2 K` while the step pair is unchanged.
#[derive(Debug)]
pub struct ModifiedDln {
    problem: Arc<Problem>,
    theta: Theta,
    fp: FixedPointConfig,
    variant: Nonlinearity,
    cache: FactorCache,
}

impl ModifiedDln {
    pub fn new(problem: Arc<Problem>, theta: Theta, fp: FixedPointConfig, variant: Nonlinearity) -> Self {
        Self { problem, theta, fp, variant, cache: FactorCache::new() }
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn theta(&self) -> Theta {
        self.theta
    }

    /// Computes `u_{n+1}` from `state` with step `k_n`.
    pub fn step(&mut self, state: &SchemeState, k_n: f64) -> Result<(FieldVector, StepDiagnostics)> {
        let p = self.problem.clone();
        p.space.check_len(&state.u_curr, "u_n")?;
        p.space.check_len(&state.u_prev, "u_{n-1}")?;
        let steps = StepPair::new(k_n, state.k_prev)?;
        let c = DlnCoefficients::new(self.theta, steps)?;
        let t_next = state.t_curr + k_n;
        let tb = t_beta([state.t_prev, state.t_curr, t_next], &c)?;
        let eps2 = p.epsilon() * p.epsilon();
        let (u0, u1) = (&state.u_prev, &state.u_curr);
        let [a0, a1, a2] = c.alpha;
        let [b0, b1, b2] = c.beta;

        let lhs_m = a2 / c.k_hat;
        let lhs_k = eps2 * b2;
        let fact = self.cache.get_or_factorize(&[k_n, state.k_prev], || p.system_matrix(lhs_m, lhs_k))?;

        // known part of the right-hand side
        let lower_m = FieldVector::lincomb(&[(a1 / c.k_hat, u1), (a0 / c.k_hat, u0)]);
        let lower_k = FieldVector::lincomb(&[(eps2 * b1, u1), (eps2 * b0, u0)]);
        let mut base = p.mass.mul_vec(&lower_m);
        let kl = p.stiffness.mul_vec(&lower_k);
        for (b, k) in base.iter_mut().zip(kl.iter()) {
            *b = -*b - k;
        }
        if let Some(g) = p.forcing_load(tb)? {
            base.axpy(1.0, &g);
        }
        let bvals = p.boundary_values(t_next);

        let [w0, w1] = self.theta.average_weights();
        let u_theta_old = FieldVector::lincomb(&[(w1, u1), (w0, u0)]);
        let u_expl = match self.variant {
            Nonlinearity::Secant => None,
            Nonlinearity::ConvexSplit => {
                let tau = steps.ratio();
                Some(FieldVector::lincomb(&[(w1 * (1.0 + tau) + w0, u1), (-w1 * tau, u0)]))
            }
        };

        let mut w = u1.clone();
        let mut rhs = vec![0.0; w.len()];
        let mut increment = f64::INFINITY;
        for it in 1..=self.fp.max_iter {
            let u_theta_new = FieldVector::lincomb(&[(w1, &w), (w0, u1)]);
            let load = match &u_expl {
                None => assemble_nonlinear_load(&p.space, |v| f_tilde(v[0], v[1]), &[&u_theta_new, &u_theta_old])?,
                Some(ex) => {
                    assemble_nonlinear_load(&p.space, |v| f_hat_css(v[0], v[1], v[2]), &[&u_theta_new, ex, &u_theta_old])?
                }
            };
            for ((r, b), l) in rhs.iter_mut().zip(base.iter()).zip(load.iter()) {
                *r = b - l;
            }
            p.lift(&mut rhs, lhs_m, lhs_k, bvals.as_deref());
            let w_new = fact.solve(&rhs)?;
            let diff = FieldVector::lincomb(&[(1.0, &w_new), (-1.0, &w)]);
            increment = p.mass_sq(&diff).max(0.0).sqrt();
            w = w_new;
            if !increment.is_finite() {
                return Err(Error::NumericalFailure {
                    location: format!("modified DLN step at t = {}", state.t_curr),
                    message: "fixed-point iteration diverged".into(),
                });
            }
            if increment <= self.fp.tol {
                return Ok((w, StepDiagnostics { iterations: it, increment, solves: it }));
            }
        }
        Err(Error::Convergence { iterations: self.fp.max_iter, increment, last_iterate: Box::new(w) })
    }
}

/// One modified DLN step with a fresh factorization.
pub fn step_modified(
    problem: &Arc<Problem>,
    state: &SchemeState,
    k_n: f64,
    theta: Theta,
    fp: FixedPointConfig,
    variant: Nonlinearity,
) -> Result<(FieldVector, StepDiagnostics)> {
    ModifiedDln::new(problem.clone(), theta, fp, variant).step(state, k_n)
}

/// One-step implicit midpoint scheme with the secant nonlinearity:
/// `(w - u)/k + eps^2 K (w + u)/2 + f_tilde(w, u) = g(t + k/2)`.
/// Used to produce the second starting value and as the `theta = 1`
/// reference.
pub fn midpoint_step(
    problem: &Problem,
    u: &FieldVector,
    t: f64,
    k: f64,
    fp: FixedPointConfig,
) -> Result<(FieldVector, StepDiagnostics)> {
    if !(k > 0.0) {
        return invalid(format!("step must be positive, got {k}"));
    }
    problem.space.check_len(u, "u")?;
    let eps2 = problem.epsilon() * problem.epsilon();
    let (lm, lk) = (1.0 / k, 0.5 * eps2);
    let fact = crate::linsolve::factorize(&problem.system_matrix(lm, lk)?)?;
    let mu = problem.mass.mul_vec(u);
    let ku = problem.stiffness.mul_vec(u);
    let mut base: Vec<f64> = mu.iter().zip(ku.iter()).map(|(m, s)| m / k - lk * s).collect();
    if let Some(g) = problem.forcing_load(t + 0.5 * k)? {
        for (b, gi) in base.iter_mut().zip(g.iter()) {
            *b += gi;
        }
    }
    let bvals = problem.boundary_values(t + k);
    let mut w = u.clone();
    let mut rhs = vec![0.0; u.len()];
    let mut increment = f64::INFINITY;
    for it in 1..=fp.max_iter {
        let load = assemble_nonlinear_load(&problem.space, |v| f_tilde(v[0], v[1]), &[&w, u])?;
        for ((r, b), l) in rhs.iter_mut().zip(&base).zip(load.iter()) {
            *r = b - l;
        }
        problem.lift(&mut rhs, lm, lk, bvals.as_deref());
        let w_new = fact.solve(&rhs)?;
        let diff = FieldVector::lincomb(&[(1.0, &w_new), (-1.0, &w)]);
        increment = problem.mass_sq(&diff).max(0.0).sqrt();
        w = w_new;
        if !increment.is_finite() {
            return Err(Error::NumericalFailure {
                location: format!("midpoint step at t = {t}"),
                message: "fixed-point iteration diverged".into(),
            });
        }
        if increment <= fp.tol {
            return Ok((w, StepDiagnostics { iterations: it, increment, solves: it }));
        }
    }
    Err(Error::Convergence { iterations: fp.max_iter, increment, last_iterate: Box::new(w) })
}

/// `E = eps^2 ||(grad u_n, grad u_{n-1})||_G^2 + integral F(u_{n,theta})`.
pub fn energy_mod(problem: &Problem, state: &SchemeState, theta: Theta) -> Result<f64> {
    let t = theta.value();
    let eps2 = problem.epsilon() * problem.epsilon();
    let grad = 0.25 * (1.0 + t) * problem.grad_sq(&state.u_curr) + 0.25 * (1.0 - t) * problem.grad_sq(&state.u_prev);
    let [w0, w1] = theta.average_weights();
    let u_theta = FieldVector::lincomb(&[(w1, &state.u_curr), (w0, &state.u_prev)]);
    Ok(eps2 * grad + problem.potential_energy(&u_theta)?)
}

/// `E_{n+1} - E_n + ||u_alpha||^2 / k_hat + eps^2 ||grad sum gamma_l u||^2`,
/// which vanishes for an exact step without forcing.
pub fn dissipation_residual_mod(problem: &Problem, pre: &SchemeState, post: &SchemeState, theta: Theta) -> Result<f64> {
    if pre.u_curr != post.u_prev {
        return invalid("states are not consecutive");
    }
    let steps = StepPair::new(post.k_prev, pre.k_prev)?;
    let c = DlnCoefficients::new(theta, steps)?;
    let window = [&pre.u_prev, &pre.u_curr, &post.u_curr];
    let u_alpha = combine(window, CombineKind::Alpha, &c, steps);
    let g = c.gamma;
    let u_gamma = FieldVector::lincomb(&[(g[0], window[0]), (g[1], window[1]), (g[2], window[2])]);
    let eps2 = problem.epsilon() * problem.epsilon();
    let de = energy_mod(problem, post, theta)? - energy_mod(problem, pre, theta)?;
    Ok(de + problem.mass_sq(&u_alpha) / c.k_hat + eps2 * problem.grad_sq(&u_gamma))
}
