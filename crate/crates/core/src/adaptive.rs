//! Step-size adaptivity: an explicit AB2-like prediction from the last four
//! accepted solutions is compared with the DLN solution to estimate the
//! local truncation error, and a controller picks the next step.

use std::collections::VecDeque;
use std::io::Write;
use std::ops::ControlFlow;

use crate::coeffs::{alpha, beta, DlnCoefficients, LinearCombination, StepPair, Theta};
use crate::error::{invalid, Error, Result};
use crate::fem::FieldVector;
use crate::model::Problem;
use crate::modified::{energy_mod, ModifiedDln, SchemeState};
use crate::sav::{energy_sav, DlnSav, SavState};

/// Growth and shrink limits of the controller factor.
pub const MAX_FACTOR: f64 = 1.5;
pub const MIN_FACTOR: f64 = 0.2;
/// Relative threshold for the singular estimator denominator.
pub const GUARD_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorKind {
    #[default]
    Absolute,
    /// Divided by the L2 norm of the DLN solution.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    pub tol: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Safety factor in (0, 1].
    pub kappa: f64,
    pub estimator: EstimatorKind,
    /// Rejections allowed on a single step before giving up.
    pub max_rejections: usize,
    /// Constant step used until four solutions exist.
    pub k0: f64,
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.k_min > 0.0 && self.k_min < self.k_max && self.k_max.is_finite()) {
            return invalid(format!("need 0 < k_min < k_max, got [{}, {}]", self.k_min, self.k_max));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return invalid(format!("kappa must lie in (0, 1], got {}", self.kappa));
        }
        if !(self.k0 >= self.k_min && self.k0 <= self.k_max) {
            return invalid(format!("k0 = {} outside [k_min, k_max]", self.k0));
        }
        if self.max_rejections == 0 {
            return invalid("max_rejections must be positive");
        }
        Ok(())
    }
}

/// The four most recent accepted solutions with their step sizes and the
/// DLN slopes at the two previous beta-points.
#[derive(Debug, Clone)]
pub struct AdaptHistory {
    theta: Theta,
    /// oldest first, at most four
    solutions: VecDeque<FieldVector>,
    /// `steps[i]` separates `solutions[i]` and `solutions[i + 1]`
    steps: VecDeque<f64>,
    t_last: f64,
    /// `[g at t_{n-2,beta}, g at t_{n-1,beta}]` once available
    slopes: Option<[FieldVector; 2]>,
}

impl AdaptHistory {
    pub fn new(theta: Theta, u0: FieldVector, t0: f64) -> Self {
        Self {
            theta,
            solutions: VecDeque::from([u0]),
            steps: VecDeque::new(),
            t_last: t0,
            slopes: None,
        }
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.solutions.len() == 4
    }

    pub fn t_last(&self) -> f64 {
        self.t_last
    }

    /// Trailing steps, most recent first: `[k_{n-1}, k_{n-2}, k_{n-3}]`.
    pub fn recent_steps(&self) -> Vec<f64> {
        self.steps.iter().rev().copied().collect()
    }

    pub fn solutions(&self) -> impl Iterator<Item = &FieldVector> {
        self.solutions.iter()
    }

    pub fn slopes(&self) -> Option<&[FieldVector; 2]> {
        self.slopes.as_ref()
    }

    /// Appends an accepted solution reached with step `k`.
    pub fn push(&mut self, u: FieldVector, k: f64) -> Result<()> {
        if !(k > 0.0) {
            return invalid(format!("accepted step must be positive, got {k}"));
        }
        if let Some(last) = self.solutions.back() {
            if last.len() != u.len() {
                return invalid("history fields differ in length");
            }
        }
        self.solutions.push_back(u);
        self.steps.push_back(k);
        self.t_last += k;
        while self.solutions.len() > 4 {
            self.solutions.pop_front();
            self.steps.pop_front();
        }
        while self.steps.len() > 3 {
            self.steps.pop_front();
        }
        if self.is_ready() {
            let g_old = self.slope(0)?;
            let g_new = self.slope(1)?;
            self.slopes = Some([g_old, g_new]);
        }
        Ok(())
    }

    /// `y_alpha / k_hat` over the window starting at `solutions[i]`.
    fn slope(&self, i: usize) -> Result<FieldVector> {
        let steps = StepPair::new(self.steps[i + 1], self.steps[i])?;
        let c = DlnCoefficients::new(self.theta, steps)?;
        let a = c.alpha;
        let s = &self.solutions;
        Ok(FieldVector::lincomb(&[
            (a[0] / c.k_hat, &s[i]),
            (a[1] / c.k_hat, &s[i + 1]),
            (a[2] / c.k_hat, &s[i + 2]),
        ]))
    }

    /// Slopes recomputed from the stored solutions (for consistency checks).
    pub fn recompute_slopes(&self) -> Result<[FieldVector; 2]> {
        if !self.is_ready() {
            return Err(Error::NotReady(format!("{} of 4 solutions stored", self.len())));
        }
        Ok([self.slope(0)?, self.slope(1)?])
    }

    /// AB2-like prediction of `y_{n+1}` at `t_n + k_n`.
    pub fn predict(&self, k_n: f64) -> Result<FieldVector> {
        let Some([g2, g1]) = &self.slopes else {
            return Err(Error::NotReady(format!("{} of 4 solutions stored", self.len())));
        };
        if !(k_n > 0.0) {
            return invalid(format!("step must be positive, got {k_n}"));
        }
        let (k1, k2, k3) = (self.steps[2], self.steps[1], self.steps[0]);
        // beta-points relative to t_n
        let b1 = beta(self.theta, (k1 - k2) / (k1 + k2));
        let b2 = beta(self.theta, (k2 - k3) / (k2 + k3));
        let tb1 = -k1 + b1[2] * k1 - b1[0] * k2;
        let tb2 = -k1 - k2 + b2[2] * k2 - b2[0] * k3;
        if tb1 == tb2 {
            return invalid("coincident beta-points in the predictor");
        }
        let c = k_n / (2.0 * (tb1 - tb2));
        let c1 = c * (k_n - 2.0 * tb2);
        let c2 = -c * (k_n - 2.0 * tb1);
        Ok(FieldVector::lincomb(&[(1.0, &self.solutions[3]), (c1, g1), (c2, g2)]))
    }
}

/// Standalone form of [`AdaptHistory::predict`].
pub fn ab2_like_predict(history: &AdaptHistory, k_n: f64) -> Result<FieldVector> {
    history.predict(k_n)
}

/// Error-constant coefficients `(G, R)` of the DLN step and the AB2-like
/// prediction for step ratios `tau_m = k_m / k_{m-1}`.
pub fn lte_coefficients(tau_n: f64, tau_nm1: f64, tau_nm2: f64, theta: Theta) -> Result<(f64, f64)> {
    for t in [tau_n, tau_nm1, tau_nm2] {
        if !(t > 0.0 && t.is_finite()) {
            return invalid(format!("step ratios must be positive, got {t}"));
        }
    }
    let a = alpha(theta);
    let eps = |tau: f64| (tau - 1.0) / (tau + 1.0);
    let bn = beta(theta, eps(tau_n));
    let b1 = beta(theta, eps(tau_nm1));
    let b2 = beta(theta, eps(tau_nm2));
    let r = a[0] / a[2];
    let (i0, i1, i2) = (1.0 / tau_n, 1.0 / tau_nm1, 1.0 / tau_nm2);

    let s = bn[2] - bn[0] * i0;
    let g = (0.5 - 0.5 * r * i0) * s * s + r / 6.0 * i0 * i0 * i0 - 1.0 / 6.0;

    let p1 = 1.0 - b2[2] * i1 + b2[0] * i2 * i1;
    let p2 = 1.0 - b1[2] * i0 + b1[0] * i1 * i0;
    let p3 = 1.0 + i0 - b2[2] * i1 * i0 + b2[0] * i2 * i1 * i0;
    let p4 = -b1[2] + b1[0] * i1;
    let rr = (2.0 + 3.0 * i0 * p1 * p2 + 3.0 * i0 * p3 * p4) / 12.0;
    Ok((g, rr))
}

/// LTE estimate and whether the singular-denominator fallback was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LteEstimate {
    pub value: f64,
    pub guarded: bool,
}

/// `|G| / |G + R| * ||u_dln - u_ab2||`, optionally relative to `||u_dln||`.
/// When `|G + R| < GUARD_THRESHOLD * max(|G|, |R|, 1)` the factor is dropped.
pub fn estimate_lte(
    problem: &Problem,
    u_dln: &[f64],
    u_ab2: &[f64],
    g: f64,
    r: f64,
    kind: EstimatorKind,
) -> Result<LteEstimate> {
    problem.space.check_len(u_dln, "DLN solution")?;
    problem.space.check_len(u_ab2, "AB2-like solution")?;
    let diff: Vec<f64> = u_dln.iter().zip(u_ab2).map(|(a, b)| a - b).collect();
    let mut norm = problem.mass_sq(&diff).max(0.0).sqrt();
    if kind == EstimatorKind::Relative {
        let n = problem.mass_sq(u_dln).max(0.0).sqrt();
        if n == 0.0 {
            return Err(Error::InvalidState("relative estimator with a zero solution".into()));
        }
        norm /= n;
    }
    Ok(scaled_estimate(norm, g, r))
}

/// The coefficient scaling of [`estimate_lte`] applied to a difference norm.
pub fn scaled_estimate(diff_norm: f64, g: f64, r: f64) -> LteEstimate {
    if guard_triggers(g, r) {
        LteEstimate { value: diff_norm, guarded: true }
    } else {
        LteEstimate { value: g.abs() / (g + r).abs() * diff_norm, guarded: false }
    }
}

pub fn guard_triggers(g: f64, r: f64) -> bool {
    (g + r).abs() < GUARD_THRESHOLD * g.abs().max(r.abs()).max(1.0)
}

/// Multiplicative step factor `min(1.5, max(0.2, kappa (tol/T)^(1/3)))`.
pub fn controller_factor(t_hat: f64, tol: f64, kappa: f64) -> f64 {
    if t_hat <= 0.0 {
        return MAX_FACTOR;
    }
    (kappa * (tol / t_hat).cbrt()).clamp(MIN_FACTOR, MAX_FACTOR)
}

/// Next step after an accepted step, clamped to `[k_min, k_max]`.
pub fn controller_next_step(k_n: f64, t_hat: f64, cfg: &AdaptConfig) -> f64 {
    (k_n * controller_factor(t_hat, cfg.tol, cfg.kappa)).clamp(cfg.k_min, cfg.k_max)
}

/// A two-step scheme the adaptive loop can drive.
pub trait AdaptiveStepper {
    type State: Clone;
    /// State holding two starting levels.
    fn initial_state(&self, u_prev: FieldVector, u_curr: FieldVector, t_prev: f64, t_curr: f64) -> Result<Self::State>;
    fn step(&mut self, state: &Self::State, k: f64) -> Result<Self::State>;
    fn solution(state: &Self::State) -> &FieldVector;
    fn time(state: &Self::State) -> f64;
    fn energy(&self, state: &Self::State) -> Result<f64>;
    fn theta(&self) -> Theta;
    fn problem(&self) -> &Problem;
}

impl AdaptiveStepper for ModifiedDln {
    type State = SchemeState;
    fn initial_state(&self, u_prev: FieldVector, u_curr: FieldVector, t_prev: f64, t_curr: f64) -> Result<SchemeState> {
        SchemeState::new(u_prev, u_curr, t_prev, t_curr)
    }
    fn step(&mut self, state: &SchemeState, k: f64) -> Result<SchemeState> {
        let (u, _) = ModifiedDln::step(self, state, k)?;
        Ok(state.advance(u, k))
    }
    fn solution(state: &SchemeState) -> &FieldVector {
        &state.u_curr
    }
    fn time(state: &SchemeState) -> f64 {
        state.t_curr
    }
    fn energy(&self, state: &SchemeState) -> Result<f64> {
        energy_mod(self.problem(), state, self.theta())
    }
    fn theta(&self) -> Theta {
        ModifiedDln::theta(self)
    }
    fn problem(&self) -> &Problem {
        ModifiedDln::problem(self)
    }
}

impl AdaptiveStepper for DlnSav {
    type State = SavState;
    fn initial_state(&self, u_prev: FieldVector, u_curr: FieldVector, t_prev: f64, t_curr: f64) -> Result<SavState> {
        SavState::from_fields(self.problem(), self.params(), u_prev, u_curr, t_prev, t_curr)
    }
    fn step(&mut self, state: &SavState, k: f64) -> Result<SavState> {
        Ok(DlnSav::step(self, state, k)?.0)
    }
    fn solution(state: &SavState) -> &FieldVector {
        &state.u_curr
    }
    fn time(state: &SavState) -> f64 {
        state.t_curr
    }
    fn energy(&self, state: &SavState) -> Result<f64> {
        Ok(energy_sav(self.problem(), state, self.theta()))
    }
    fn theta(&self) -> Theta {
        DlnSav::theta(self)
    }
    fn problem(&self) -> &Problem {
        DlnSav::problem(self)
    }
}

/// One attempted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Index of the solution this attempt would produce.
    pub n: usize,
    /// Time reached if accepted.
    pub t: f64,
    pub k: f64,
    /// LTE estimate; NaN during warm-up.
    pub t_hat: f64,
    pub accepted: bool,
    /// Rejections of this step so far.
    pub rejections: usize,
    /// Energy after the step (accepted steps only, otherwise NaN).
    pub energy: f64,
    pub guarded: bool,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "n,t_n,k_n,t_hat,accepted,rejections,energy";

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.6e},{},{},{:.17e}",
            self.n, self.t, self.k, self.t_hat, self.accepted as u8, self.rejections, self.energy
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptStats {
    /// Accepted steps, counting the bootstrap and warm-up steps.
    pub accepted: usize,
    pub rejections: usize,
    /// Steps whose estimate used the singular-denominator fallback.
    pub guard_events: usize,
    /// Fixed-point failures handled as rejections.
    pub solver_failures: usize,
    /// Steps accepted above the tolerance because shrinking `k_n` stopped
    /// reducing the estimate.
    pub stalled: usize,
    pub k_min_used: f64,
    pub k_max_used: f64,
}

pub struct AdaptRun<S> {
    pub final_state: S,
    pub stats: AdaptStats,
    pub records: Vec<StepRecord>,
}

/// Chooses the next trial step so the run ends exactly on `t_final` without
/// leaving a sliver shorter than a quarter step.
fn trial_step(t: f64, k: f64, t_final: f64) -> f64 {
    debug_assert!(k > 0.0);
    let remaining = t_final - t;
    if k >= remaining {
        remaining
    } else if remaining < 1.25 * k {
        0.5 * remaining
    } else {
        k
    }
}

/// Accumulated times may miss the end point by a few ulps.
fn reached(t: f64, t_final: f64) -> bool {
    t_final - t <= 1e-12 * t_final.abs().max(1.0)
}

/// Runs the accept/reject loop from a two-level initial state whose first
/// step was `k0`. `observer` sees every accepted state and may end the run
/// early by returning `ControlFlow::Break`.
pub fn adaptive_loop<S: AdaptiveStepper>(
    stepper: &mut S,
    initial: (FieldVector, S::State),
    cfg: &AdaptConfig,
    t_final: f64,
    mut observer: impl FnMut(&StepRecord, &S::State) -> Result<ControlFlow<()>>,
) -> Result<AdaptRun<S::State>> {
    cfg.validate()?;
    let (u0, mut state) = initial;
    let t1 = S::time(&state);
    if !(t_final > t1) {
        return invalid(format!("final time {t_final} is not after the start {t1}"));
    }
    let theta = stepper.theta();
    let mut history = AdaptHistory::new(theta, u0, t1 - cfg.k0);
    history.push(S::solution(&state).clone(), cfg.k0)?;
    let mut stats = AdaptStats { accepted: 1, k_min_used: cfg.k0, k_max_used: cfg.k0, ..Default::default() };
    let mut records = Vec::new();
    let mut n = 1;

    // constant warm-up steps until the predictor has four solutions
    while !history.is_ready() && !reached(S::time(&state), t_final) {
        let k = trial_step(S::time(&state), cfg.k0, t_final);
        state = stepper.step(&state, k)?;
        n += 1;
        history.push(S::solution(&state).clone(), k)?;
        stats.accepted += 1;
        let rec = StepRecord {
            n,
            t: S::time(&state),
            k,
            t_hat: f64::NAN,
            accepted: true,
            rejections: 0,
            energy: stepper.energy(&state)?,
            guarded: false,
        };
        let flow = observer(&rec, &state)?;
        records.push(rec);
        if flow.is_break() {
            return Ok(AdaptRun { final_state: state, stats, records });
        }
    }

    let mut k_next = cfg.k0;
    while !reached(S::time(&state), t_final) {
        let t = S::time(&state);
        let mut k = trial_step(t, k_next, t_final);
        let mut rejections = 0;
        let mut last_est = f64::INFINITY;
        loop {
            let attempt = stepper.step(&state, k);
            let (accept, factor, est, new_state) = match attempt {
                Ok(new_state) => {
                    let steps = history.recent_steps();
                    let (g, r) = lte_coefficients(k / steps[0], steps[0] / steps[1], steps[1] / steps[2], theta)?;
                    let pred = history.predict(k)?;
                    let est = estimate_lte(stepper.problem(), S::solution(&new_state), &pred, g, r, cfg.estimator)?;
                    let factor = controller_factor(est.value, cfg.tol, cfg.kappa);
                    // For theta < 1 the error of a short step after a long one is
                    // set by k_{n-1}; once shrinking stops helping, take the step.
                    let stalled = est.value >= cfg.tol && est.value >= last_est;
                    if stalled {
                        stats.stalled += 1;
                    }
                    last_est = est.value;
                    (est.value < cfg.tol || stalled, factor, Some(est), Some(new_state))
                }
                Err(Error::Convergence { .. }) => {
                    stats.solver_failures += 1;
                    (false, 0.5, None, None)
                }
                Err(e) => return Err(e),
            };
            let mut rec = StepRecord {
                n: n + 1,
                t: t + k,
                k,
                t_hat: est.map_or(f64::NAN, |e| e.value),
                accepted: accept,
                rejections,
                energy: f64::NAN,
                guarded: est.is_some_and(|e| e.guarded),
            };
            if accept {
                let new_state = new_state.expect("accepted state");
                if rec.guarded {
                    stats.guard_events += 1;
                }
                rec.energy = stepper.energy(&new_state)?;
                history.push(S::solution(&new_state).clone(), k)?;
                state = new_state;
                n += 1;
                stats.accepted += 1;
                stats.k_min_used = stats.k_min_used.min(k);
                stats.k_max_used = stats.k_max_used.max(k);
                let flow = observer(&rec, &state)?;
                records.push(rec);
                if flow.is_break() {
                    return Ok(AdaptRun { final_state: state, stats, records });
                }
                k_next = (k * factor).clamp(cfg.k_min, cfg.k_max);
                break;
            }
            records.push(rec);
            rejections += 1;
            stats.rejections += 1;
            if rejections > cfg.max_rejections {
                return Err(Error::TooManyRejections { rejections, time: t });
            }
            let shrunk = k * factor;
            if shrunk < cfg.k_min {
                return Err(Error::StepFloor { step: shrunk, k_min: cfg.k_min, time: t });
            }
            k = shrunk;
        }
    }
    Ok(AdaptRun { final_state: state, stats, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(v: f64) -> Theta {
        Theta::new(v).unwrap()
    }

    #[test]
    fn midpoint_uniform_coefficients() {
        let (g, r) = lte_coefficients(1.0, 1.0, 1.0, Theta::MIDPOINT).unwrap();
        assert!((g + 1.0 / 24.0).abs() < 1e-15);
        assert!((r - 1.0 / 24.0).abs() < 1e-15);
        assert!(guard_triggers(g, r));
        let (g, r) = lte_coefficients(1.0, 1.0, 1.0, th(2.0 / 3.0)).unwrap();
        assert!(!guard_triggers(g, r));
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(scaled_estimate(0.0, -1.0 / 24.0, 1.0 / 12.0).value, 0.0);
        assert_eq!(scaled_estimate(0.5, -1.0, 0.0).value, 0.5);
        let e = scaled_estimate(0.3, -1.0 / 24.0, 1.0 / 12.0);
        assert!((e.value - 0.3).abs() < 1e-15 && !e.guarded);
    }

    #[test]
    fn controller_examples() {
        assert!((controller_factor(1e-6, 1e-6, 0.8) - 0.8).abs() < 1e-15);
        assert_eq!(controller_factor(0.0, 1e-6, 0.8), 1.5);
        assert_eq!(controller_factor(1e-20, 1e-6, 0.8), 1.5);
        assert_eq!(controller_factor(1.0, 1e-6, 0.8), 0.2);
        let cfg = AdaptConfig {
            tol: 1e-6,
            k_min: 1e-5,
            k_max: 0.1,
            kappa: 0.8,
            estimator: EstimatorKind::Absolute,
            max_rejections: 20,
            k0: 1e-3,
        };
        assert_eq!(controller_next_step(0.09, 0.0, &cfg), 0.1);
        assert_eq!(controller_next_step(2e-5, 1.0, &cfg), 1e-5);
    }

    #[test]
    fn trial_step_lands_on_final_time() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert_eq!(trial_step(0.0, 0.3, 1.0), 0.3);
        assert!(close(trial_step(0.8, 0.3, 1.0), 0.2));
        assert!(close(trial_step(0.6, 0.35, 1.0), 0.2));
    }

    fn scalar_history(theta: Theta, y: impl Fn(f64) -> f64, ks: &[f64]) -> (AdaptHistory, f64) {
        let mut t = 0.0;
        let mut h = AdaptHistory::new(theta, FieldVector(vec![y(t)]), t);
        for &k in ks {
            t += k;
            h.push(FieldVector(vec![y(t)]), k).unwrap();
        }
        (h, t)
    }

    #[test]
    fn predictor_is_exact_on_linear_data() {
        let (h, t) = scalar_history(th(0.7), |t| 3.0 * t - 1.0, &[0.1, 0.13, 0.08]);
        let p = h.predict(0.11).unwrap();
        assert!((p[0] - (3.0 * (t + 0.11) - 1.0)).abs() < 1e-14);
        let (h, _) = scalar_history(th(0.7), |_| 2.5, &[0.1, 0.13, 0.08]);
        assert!((h.predict(0.2).unwrap()[0] - 2.5).abs() < 1e-14);
        let (h, _) = scalar_history(th(0.7), |t| t, &[0.1, 0.13]);
        assert!(matches!(h.predict(0.1), Err(Error::NotReady(_))));
    }

    #[test]
    fn predictor_desk_check() {
        // theta = 1, uniform k = 0.1, data y = exp(t) at t = 0, .1, .2, .3:
        // beta-points are midpoints, slopes are difference quotients
        let k: f64 = 0.1;
        let (h, _) = scalar_history(Theta::MIDPOINT, f64::exp, &[k, k, k]);
        let y = |t: f64| t.exp();
        let g1 = (y(0.3) - y(0.2)) / k; // at t = 0.25
        let g2 = (y(0.2) - y(0.1)) / k; // at t = 0.15
        let (tn, tn1) = (0.3, 0.4);
        let c = (tn1 - tn) / (2.0 * (0.25 - 0.15));
        let expect = y(0.3) + c * ((tn1 + tn - 2.0 * 0.15) * g1 - (tn1 + tn - 2.0 * 0.25) * g2);
        assert!((h.predict(k).unwrap()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn cached_slopes_match_recomputation() {
        let (h, _) = scalar_history(th(2.0 / 3.0), |t| (2.0 * t).sin(), &[0.1, 0.05, 0.12, 0.07, 0.09]);
        let cached = h.slopes().unwrap();
        let fresh = h.recompute_slopes().unwrap();
        for i in 0..2 {
            assert!((cached[i][0] - fresh[i][0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn predictor_is_solver_free() {
        let (h, _) = scalar_history(th(2.0 / 3.0), |t| t * t, &[0.1, 0.1, 0.1]);
        let before = crate::linsolve::solve_count();
        h.predict(0.1).unwrap();
        assert_eq!(crate::linsolve::solve_count(), before);
    }
}
