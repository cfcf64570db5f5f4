//! Step-size sequences for fixed-policy runs and observed convergence rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Constant { k: f64 },
    /// `k_n = k (1 + U_n)` with `U_n` uniform on `[0, 1)`.
    Random { k: f64, seed: u64 },
    /// `k, 2k, k, 2k, ...`
    Alternating { k: f64 },
}

impl StepPolicy {
    pub fn reference_step(&self) -> f64 {
        match *self {
            StepPolicy::Constant { k } | StepPolicy::Random { k, .. } | StepPolicy::Alternating { k } => k,
        }
    }
}

/// Endless step generator for a policy.
pub struct StepSequence {
    policy: StepPolicy,
    rng: ChaCha8Rng,
    n: usize,
}

impl Iterator for StepSequence {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        let k = match self.policy {
            StepPolicy::Constant { k } => k,
            StepPolicy::Random { k, .. } => k + k * self.rng.random::<f64>(),
            StepPolicy::Alternating { k } => {
                if self.n.is_multiple_of(2) {
                    k
                } else {
                    2.0 * k
                }
            }
        };
        self.n += 1;
        Some(k)
    }
}

pub fn step_sequence(policy: StepPolicy) -> Result<StepSequence> {
    let k = policy.reference_step();
    if !(k > 0.0 && k.is_finite()) {
        return invalid(format!("reference step must be positive, got {k}"));
    }
    let seed = match policy {
        StepPolicy::Random { seed, .. } => seed,
        _ => 0,
    };
    Ok(StepSequence { policy, rng: ChaCha8Rng::seed_from_u64(seed), n: 0 })
}

/// Steps covering `span` exactly. The last drawn step is cut to fit; a
/// remainder below a quarter of the step before it is merged into that step.
pub fn steps_covering(policy: StepPolicy, span: f64) -> Result<Vec<f64>> {
    if !(span > 0.0 && span.is_finite()) {
        return invalid(format!("time span must be positive, got {span}"));
    }
    let mut out: Vec<f64> = Vec::new();
    let mut t = 0.0;
    for k in step_sequence(policy)? {
        let rest = span - t;
        if k < rest * (1.0 - 1e-12) {
            out.push(k);
            t += k;
            continue;
        }
        match out.last_mut() {
            Some(last) if rest < 0.25 * *last => *last += rest,
            _ => out.push(rest),
        }
        break;
    }
    Ok(out)
}

/// One line of a convergence table. `size` is `k_max` for temporal
/// studies and `h` for spatial ones; errors are in the order
/// `[l_inf(L2), l_2(L2), l_2(H1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub size: f64,
    pub errors: [f64; 3],
    /// Absent on the first row.
    pub rates: Option<[f64; 3]>,
}

/// `rate = ln(E1 / E2) / ln(s1 / s2)` for each adjacent pair of rows.
pub fn rate_table(rows: &[(f64, [f64; 3])]) -> Result<Vec<RateRow>> {
    if rows.len() < 2 {
        return invalid("a rate table needs at least two rows");
    }
    if rows.windows(2).any(|w| !(w[1].0 < w[0].0) || !(w[1].0 > 0.0)) {
        return invalid("ladder sizes must be positive and strictly decreasing");
    }
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, &(size, errors))| {
            let rates = (i > 0).then(|| {
                let (s0, e0) = rows[i - 1];
                std::array::from_fn(|j| observed_rate(e0[j], errors[j], s0, size))
            });
            RateRow { size, errors, rates }
        })
        .collect())
}

pub fn observed_rate(e1: f64, e2: f64, s1: f64, s2: f64) -> f64 {
    if e1 == e2 {
        return 0.0;
    }
    (e1 / e2).ln() / (s1 / s2).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sequences() {
        let alt: Vec<f64> = step_sequence(StepPolicy::Alternating { k: 0.1 }).unwrap().take(4).collect();
        assert_eq!(alt, [0.1, 0.2, 0.1, 0.2]);
        let c: Vec<f64> = step_sequence(StepPolicy::Constant { k: 0.3 }).unwrap().take(3).collect();
        assert_eq!(c, [0.3; 3]);
        let p = StepPolicy::Random { k: 0.1, seed: 3 };
        let a: Vec<f64> = step_sequence(p).unwrap().take(50).collect();
        let b: Vec<f64> = step_sequence(p).unwrap().take(50).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&k| (0.1..=0.2).contains(&k)));
        assert!(step_sequence(StepPolicy::Constant { k: 0.0 }).is_err());
    }

    #[test]
    fn rate_examples() {
        let t = rate_table(&[(0.2, [4e-4; 3]), (0.1, [1e-4; 3])]).unwrap();
        assert!((t[1].rates.unwrap()[0] - 2.0).abs() < 1e-12);
        assert!(t[0].rates.is_none());
        let t = rate_table(&[(0.04, [1.84e-5; 3]), (0.02, [4.64e-6; 3])]).unwrap();
        assert!((t[1].rates.unwrap()[0] - 1.98).abs() < 1e-2);
        let t = rate_table(&[(0.04, [1e-5; 3]), (0.02, [1e-5; 3])]).unwrap();
        assert_eq!(t[1].rates.unwrap()[0], 0.0);
        assert!(rate_table(&[(0.1, [1.0; 3]), (0.2, [1.0; 3])]).is_err());
        assert!(rate_table(&[(0.1, [1.0; 3])]).is_err());
    }

    proptest! {
        #[test]
        fn covering_sums_to_span(k in 0.01f64..0.3, span in 0.5f64..3.0, seed in 0u64..100, which in 0usize..3) {
            let policy = match which {
                0 => StepPolicy::Constant { k },
                1 => StepPolicy::Random { k, seed },
                _ => StepPolicy::Alternating { k },
            };
            let steps = steps_covering(policy, span).unwrap();
            let total: f64 = steps.iter().sum();
            prop_assert!((total - span).abs() < 1e-12 * span);
            prop_assert!(steps.iter().all(|&s| s > 0.0 && s <= 2.5 * k + 1e-15));
        }
    }
}
