//! Step-coefficient algebra for the two-step DLN family.
//!
//! Windows of three consecutive values are always ordered oldest first,
//! `[z_{n-1}, z_n, z_{n+1}]`, and every coefficient triple follows the same
//! index convention (`[c_0, c_1, c_2]`).

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Error, Result};

/// Smallest and largest admissible ratio `k_n / k_{n-1}`.
pub const MIN_STEP_RATIO: f64 = 1e-3;
pub const MAX_STEP_RATIO: f64 = 1e3;

/// The DLN family parameter, `0 <= theta <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Theta(f64);

impl Theta {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return invalid(format!("theta must lie in [0, 1], got {value}"));
        }
        Ok(Self(value))
    }

    /// `theta = 1`, the implicit midpoint rule.
    pub const MIDPOINT: Theta = Theta(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Weights `[(1 - theta)/2, (1 + theta)/2]` of the theta-average.
    pub fn average_weights(self) -> [f64; 2] {
        [0.5 * (1.0 - self.0), 0.5 * (1.0 + self.0)]
    }
}

/// Current and previous step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPair {
    pub k_n: f64,
    pub k_prev: f64,
}

impl StepPair {
    pub fn new(k_n: f64, k_prev: f64) -> Result<Self> {
        for (name, k) in [("k_n", k_n), ("k_prev", k_prev)] {
            if !(k.is_finite() && k > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {k}"));
            }
        }
        Ok(Self { k_n, k_prev })
    }

    pub fn uniform(k: f64) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn ratio(&self) -> f64 {
        self.k_n / self.k_prev
    }
}

/// `eps_n = (k_n - k_{n-1}) / (k_n + k_{n-1})`.
pub fn step_variability(steps: StepPair) -> Result<f64> {
    let steps = StepPair::new(steps.k_n, steps.k_prev)?;
    Ok((steps.k_n - steps.k_prev) / (steps.k_n + steps.k_prev))
}

/// Per-step coefficient bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlnCoefficients {
    pub theta: Theta,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub gamma: [f64; 3],
    pub eps_n: f64,
    pub k_hat: f64,
}

/// `[alpha_0, alpha_1, alpha_2]`; independent of the step sizes.
pub fn alpha(theta: Theta) -> [f64; 3] {
    let t = theta.value();
    [0.5 * (t - 1.0), -t, 0.5 * (t + 1.0)]
}

/// `[beta_0, beta_1, beta_2]` for a given step variability.
pub fn beta(theta: Theta, eps_n: f64) -> [f64; 3] {
    let t = theta.value();
    let denom = (1.0 + eps_n * t).powi(2);
    let q = (1.0 - t * t) / denom;
    let p = eps_n * eps_n * t * (1.0 - t * t) / denom;
    [
        0.25 * (1.0 + q - p - t),
        0.5 * (1.0 - q),
        0.25 * (1.0 + q + p + t),
    ]
}

/// `[gamma_0, gamma_1, gamma_2]` of the G-stability identity.
pub fn gamma(theta: Theta, eps_n: f64) -> [f64; 3] {
    let t = theta.value();
    let g1 = -(t * (1.0 - t * t)).max(0.0).sqrt() / (SQRT_2 * (1.0 + eps_n * t));
    [-0.5 * (1.0 + eps_n) * g1, g1, -0.5 * (1.0 - eps_n) * g1]
}

impl DlnCoefficients {
    /// Evaluates all coefficients for one step. Step ratios outside
    /// `[MIN_STEP_RATIO, MAX_STEP_RATIO]` are rejected.
    pub fn new(theta: Theta, steps: StepPair) -> Result<Self> {
        let eps_n = step_variability(steps)?;
        let ratio = steps.ratio();
        if !(MIN_STEP_RATIO..=MAX_STEP_RATIO).contains(&ratio) {
            return invalid(format!(
                "step ratio k_n/k_prev = {ratio:.3e} outside [{MIN_STEP_RATIO:e}, {MAX_STEP_RATIO:e}] \
                 (k_n = {:.3e}, k_prev = {:.3e})",
                steps.k_n, steps.k_prev
            ));
        }
        let alpha = alpha(theta);
        let k_hat = alpha[2] * steps.k_n - alpha[0] * steps.k_prev;
        Ok(Self {
            theta,
            alpha,
            beta: beta(theta, eps_n),
            gamma: gamma(theta, eps_n),
            eps_n,
            k_hat,
        })
    }
}

/// Same as [`DlnCoefficients::new`].
pub fn dln_coefficients(theta: Theta, steps: StepPair) -> Result<DlnCoefficients> {
    DlnCoefficients::new(theta, steps)
}

/// Coefficients that turn one DLN step into pre-process, a backward Euler
/// step of size `b * k_hat`, and post-process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefactorCoefficients {
    pub a1: f64,
    pub a0: f64,
    pub b: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl RefactorCoefficients {
    pub fn new(coeffs: &DlnCoefficients) -> Result<Self> {
        let [a_0, a_1, a_2] = coeffs.alpha;
        let [b_0, b_1, b_2] = coeffs.beta;
        if b_2 == 0.0 || !b_2.is_finite() {
            return Err(Error::DegenerateCoefficients(format!(
                "beta_2 = {b_2} for theta = {}, eps_n = {}",
                coeffs.theta.value(),
                coeffs.eps_n
            )));
        }
        Ok(Self {
            a1: b_1 - a_1 * b_2 / a_2,
            a0: b_0 - a_0 * b_2 / a_2,
            b: b_2 / a_2,
            c2: 1.0 / b_2,
            c1: -b_1 / b_2,
            c0: -b_0 / b_2,
        })
    }

    /// Backward Euler step size for this DLN step.
    pub fn be_step(&self, coeffs: &DlnCoefficients) -> f64 {
        self.b * coeffs.k_hat
    }

    /// `a_1 z_n + a_0 z_{n-1}`.
    pub fn pre<T: LinearCombination>(&self, z_n: &T, z_prev: &T) -> T {
        T::lincomb(&[(self.a1, z_n), (self.a0, z_prev)])
    }

    /// `c_2 z_temp + c_1 z_n + c_0 z_{n-1}`.
    pub fn post<T: LinearCombination>(&self, z_temp: &T, z_n: &T, z_prev: &T) -> T {
        T::lincomb(&[(self.c2, z_temp), (self.c1, z_n), (self.c0, z_prev)])
    }
}

pub fn refactor_coefficients(coeffs: &DlnCoefficients) -> Result<RefactorCoefficients> {
    RefactorCoefficients::new(coeffs)
}

/// Anything that supports weighted sums: scalars and field vectors.
pub trait LinearCombination: Sized {
    fn lincomb(terms: &[(f64, &Self)]) -> Self;
}

impl LinearCombination for f64 {
    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        terms.iter().map(|(c, z)| c * **z).sum()
    }
}

impl LinearCombination for Vec<f64> {
    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        let n = terms.first().map_or(0, |(_, z)| z.len());
        let mut out = vec![0.0; n];
        for (c, z) in terms {
            assert_eq!(z.len(), n, "length mismatch in linear combination");
            for (o, v) in out.iter_mut().zip(z.iter()) {
                *o += c * v;
            }
        }
        out
    }
}

/// Which sequence combination [`combine`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineKind {
    /// `sum alpha_l z_{n-1+l}`
    Alpha,
    /// `sum beta_l z_{n-1+l}`
    Beta,
    /// `(1+theta)/2 z_n + (1-theta)/2 z_{n-1}`
    ThetaAvg,
    /// explicit second-order extrapolation of `z` to `t_{n,beta}`
    Star,
}

/// Evaluates a sequence combination on the window `[z_{n-1}, z_n, z_{n+1}]`.
/// `ThetaAvg` and `Star` never read `z_{n+1}`.
pub fn combine<T: LinearCombination>(
    window: [&T; 3],
    kind: CombineKind,
    coeffs: &DlnCoefficients,
    steps: StepPair,
) -> T {
    let [z0, z1, z2] = window;
    match kind {
        CombineKind::Alpha => {
            let a = coeffs.alpha;
            T::lincomb(&[(a[0], z0), (a[1], z1), (a[2], z2)])
        }
        CombineKind::Beta => {
            let b = coeffs.beta;
            T::lincomb(&[(b[0], z0), (b[1], z1), (b[2], z2)])
        }
        CombineKind::ThetaAvg => {
            let [w0, w1] = coeffs.theta.average_weights();
            T::lincomb(&[(w0, z0), (w1, z1)])
        }
        CombineKind::Star => {
            let [c0, c1] = star_weights(coeffs, steps);
            T::lincomb(&[(c0, z0), (c1, z1)])
        }
    }
}

/// Weights `[w_{n-1}, w_n]` of the star extrapolation.
pub fn star_weights(coeffs: &DlnCoefficients, steps: StepPair) -> [f64; 2] {
    let tau = steps.ratio();
    let [b0, b1, b2] = coeffs.beta;
    [-b2 * tau + b0, b2 * (1.0 + tau) + b1]
}

/// `||(u, v)||_G^2 = (1+theta)/4 ||u||^2 + (1-theta)/4 ||v||^2`.
pub fn g_norm_sq<T, F>(u_new: &T, u_old: &T, theta: Theta, inner: F) -> f64
where
    F: Fn(&T, &T) -> f64,
{
    let t = theta.value();
    0.25 * (1.0 + t) * inner(u_new, u_new) + 0.25 * (1.0 - t) * inner(u_old, u_old)
}

/// Left minus right side of the G-stability identity
/// `(y_alpha, y_beta) = G(y_{n+1}, y_n) - G(y_n, y_{n-1}) + ||sum gamma_l y||^2`.
pub fn g_identity_residual<T, F>(window: [&T; 3], theta: Theta, steps: StepPair, inner: F) -> Result<f64>
where
    T: LinearCombination,
    F: Fn(&T, &T) -> f64,
{
    let coeffs = DlnCoefficients::new(theta, steps)?;
    let y_alpha = combine(window, CombineKind::Alpha, &coeffs, steps);
    let y_beta = combine(window, CombineKind::Beta, &coeffs, steps);
    let [y0, y1, y2] = window;
    let g = coeffs.gamma;
    let y_gamma = T::lincomb(&[(g[0], y0), (g[1], y1), (g[2], y2)]);
    let lhs = inner(&y_alpha, &y_beta);
    let rhs = g_norm_sq(y2, y1, theta, &inner) - g_norm_sq(y1, y0, theta, &inner)
        + inner(&y_gamma, &y_gamma);
    Ok(lhs - rhs)
}

/// `t_{n,beta} = sum beta_l t_{n-1+l}` for strictly increasing times.
pub fn t_beta(times: [f64; 3], coeffs: &DlnCoefficients) -> Result<f64> {
    if !(times[0] < times[1] && times[1] < times[2]) {
        return invalid(format!("times must be strictly increasing, got {times:?}"));
    }
    let b = coeffs.beta;
    // Shifted to t_n so the affine combination does not lose digits at large t.
    Ok(times[1] + b[0] * (times[0] - times[1]) + b[2] * (times[2] - times[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn th(v: f64) -> Theta {
        Theta::new(v).unwrap()
    }

    #[test]
    fn variability_examples() {
        let k = 0.3;
        assert_eq!(step_variability(StepPair { k_n: k, k_prev: k }).unwrap(), 0.0);
        assert_relative_eq!(step_variability(StepPair { k_n: 2.0 * k, k_prev: k }).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(step_variability(StepPair { k_n: k, k_prev: 2.0 * k }).unwrap(), -1.0 / 3.0, epsilon = 1e-15);
        assert!(step_variability(StepPair { k_n: 0.0, k_prev: k }).is_err());
        assert!(step_variability(StepPair { k_n: f64::NAN, k_prev: k }).is_err());
        assert!(StepPair::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn midpoint_degeneration() {
        for (kn, kp) in [(0.1, 0.1), (0.3, 0.1), (0.01, 0.05)] {
            let c = DlnCoefficients::new(Theta::MIDPOINT, StepPair::new(kn, kp).unwrap()).unwrap();
            assert_eq!(c.alpha, [0.0, -1.0, 1.0]);
            assert_eq!(c.beta, [0.0, 0.5, 0.5]);
            assert_eq!(c.gamma.map(f64::abs), [0.0, 0.0, 0.0]);
            assert_eq!(c.k_hat, kn);
        }
    }

    #[test]
    fn uniform_two_thirds() {
        let c = DlnCoefficients::new(th(2.0 / 3.0), StepPair::uniform(0.1).unwrap()).unwrap();
        let expect_b = [2.0 / 9.0, 2.0 / 9.0, 5.0 / 9.0];
        let expect_a = [-1.0 / 6.0, -2.0 / 3.0, 5.0 / 6.0];
        for i in 0..3 {
            assert_relative_eq!(c.beta[i], expect_b[i], epsilon = 1e-15);
            assert_relative_eq!(c.alpha[i], expect_a[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn theta_zero_uniform() {
        let c = DlnCoefficients::new(th(0.0), StepPair::uniform(1.0).unwrap()).unwrap();
        assert_eq!(c.alpha, [-0.5, 0.0, 0.5]);
        assert_eq!(c.beta, [0.5, 0.0, 0.5]);
        assert_eq!(c.gamma.map(f64::abs), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_simplification() {
        for t in [0.0, 0.2, 2.0 / 3.0, 2.0 / 5f64.sqrt(), 1.0] {
            let c = DlnCoefficients::new(th(t), StepPair::uniform(0.7).unwrap()).unwrap();
            let simple = [0.25 * (2.0 - t - t * t), 0.5 * t * t, 0.25 * (2.0 + t - t * t)];
            for (b, s) in c.beta.iter().zip(simple) {
                assert_relative_eq!(*b, s, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn step_ratio_guardrail() {
        assert!(DlnCoefficients::new(th(0.5), StepPair::new(1.0, 1e-4).unwrap()).is_err());
        assert!(DlnCoefficients::new(th(0.5), StepPair::new(1e-4, 1.0).unwrap()).is_err());
        assert!(DlnCoefficients::new(th(0.5), StepPair::new(1.0, 1e-3).unwrap()).is_ok());
        assert!(Theta::new(1.5).is_err());
        assert!(Theta::new(-0.1).is_err());
    }

    #[test]
    fn refactor_examples() {
        let c = DlnCoefficients::new(Theta::MIDPOINT, StepPair::uniform(0.1).unwrap()).unwrap();
        let r = RefactorCoefficients::new(&c).unwrap();
        assert_eq!((r.b, r.c2, r.c1, r.c0), (0.5, 2.0, -1.0, 0.0));
        // u_old reduces to u_n at theta = 1
        assert_eq!((r.a1, r.a0), (1.0, 0.0));

        let c = DlnCoefficients::new(th(2.0 / 3.0), StepPair::uniform(0.1).unwrap()).unwrap();
        let r = RefactorCoefficients::new(&c).unwrap();
        assert_relative_eq!(r.b, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(r.c2 * c.beta[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn combine_examples() {
        let c = DlnCoefficients::new(th(0.4), StepPair::new(0.3, 0.2).unwrap()).unwrap();
        let s = StepPair::new(0.3, 0.2).unwrap();
        let v = 2.5;
        assert_relative_eq!(combine([&v, &v, &v], CombineKind::Alpha, &c, s), 0.0, epsilon = 1e-15);
        assert_relative_eq!(combine([&v, &v, &v], CombineKind::Beta, &c, s), v, epsilon = 1e-15);
        assert_relative_eq!(combine([&v, &v, &v], CombineKind::ThetaAvg, &c, s), v, epsilon = 1e-15);

        // linear data reproduces t_{n, beta}
        let times = [1.0, 1.2, 1.5];
        let star = combine([&times[0], &times[1], &f64::NAN], CombineKind::Star, &c, s);
        assert_relative_eq!(star, t_beta(times, &c).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn t_beta_examples() {
        let k = 0.25;
        let c1 = DlnCoefficients::new(Theta::MIDPOINT, StepPair::uniform(k).unwrap()).unwrap();
        assert_relative_eq!(t_beta([0.0, k, 2.0 * k], &c1).unwrap(), 1.5 * k, epsilon = 1e-15);
        let c0 = DlnCoefficients::new(th(0.0), StepPair::uniform(k).unwrap()).unwrap();
        assert_relative_eq!(t_beta([0.0, k, 2.0 * k], &c0).unwrap(), k, epsilon = 1e-15);
        assert!(t_beta([0.0, 0.0, 1.0], &c0).is_err());
        let shift = 7.0;
        assert_relative_eq!(
            t_beta([shift, shift + k, shift + 2.0 * k], &c0).unwrap(),
            shift + k,
            epsilon = 1e-14
        );
    }

    #[test]
    fn g_norm_examples() {
        let dot = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let u = vec![1.0, 2.0];
        let v = vec![-3.0, 0.5];
        assert_relative_eq!(g_norm_sq(&u, &v, Theta::MIDPOINT, dot), 0.5 * 5.0);
        assert_relative_eq!(g_norm_sq(&u, &u, th(0.0), dot), 0.5 * 5.0);
        let z = vec![0.0, 0.0];
        assert_eq!(g_norm_sq(&z, &z, th(0.3), dot), 0.0);
    }

    #[test]
    fn g_identity_zero_window() {
        let dot = |a: &f64, b: &f64| a * b;
        let r = g_identity_residual([&0.0, &0.0, &0.0], th(2.0 / 3.0), StepPair::new(0.1, 0.2).unwrap(), dot)
            .unwrap();
        assert_eq!(r, 0.0);
    }

    proptest! {
        #[test]
        fn coefficient_invariants(t in 0.0f64..=1.0, kp in 1e-3f64..1.0, log_ratio in -6.9f64..6.9) {
            let kn = kp * log_ratio.exp();
            let steps = StepPair::new(kn, kp).unwrap();
            let c = DlnCoefficients::new(th(t), steps).unwrap();
            prop_assert!(c.alpha.iter().sum::<f64>().abs() <= 1e-14);
            prop_assert!((c.beta.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            prop_assert!(c.k_hat > 0.0);
            prop_assert!(c.eps_n.abs() < 1.0);
            prop_assert_eq!(c.gamma[2], -0.5 * (1.0 - c.eps_n) * c.gamma[1]);
            prop_assert_eq!(c.gamma[0], -0.5 * (1.0 + c.eps_n) * c.gamma[1]);
            // alpha-weighted time nodes reproduce k_hat
            let times = [0.0, kp, kp + kn];
            let lhs = c.alpha[2] * times[2] + c.alpha[1] * times[1] + c.alpha[0] * times[0];
            prop_assert!((lhs - c.k_hat).abs() <= 1e-13 * c.k_hat.max(kn));
        }

        #[test]
        fn refactor_round_trip(t in 0.0f64..=1.0, kp in 1e-3f64..1.0, ratio in 0.2f64..5.0,
                               z0 in -10.0f64..10.0, z1 in -10.0f64..10.0, z2 in -10.0f64..10.0) {
            let steps = StepPair::new(kp * ratio, kp).unwrap();
            let c = DlnCoefficients::new(th(t), steps).unwrap();
            let r = RefactorCoefficients::new(&c).unwrap();
            let slope = combine([&z0, &z1, &z2], CombineKind::Alpha, &c, steps) / c.k_hat;
            let old = r.pre(&z1, &z0);
            let temp = old + r.be_step(&c) * slope;
            let back = r.post(&temp, &z1, &z0);
            let scale = z0.abs().max(z1.abs()).max(z2.abs()).max(1.0);
            prop_assert!((back - z2).abs() <= 1e-12 * scale);
            let beta = combine([&z0, &z1, &z2], CombineKind::Beta, &c, steps);
            prop_assert!((temp - beta).abs() <= 1e-12 * scale);
        }
    }
}
