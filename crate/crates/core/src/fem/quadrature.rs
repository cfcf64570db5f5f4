//! Gauss-Legendre rules on `[0, 1]` and collapsed (Duffy) product rules on
//! the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.

use std::f64::consts::PI;

/// Points and weights on a reference cell. One-dimensional rules store the
/// abscissa in `points[i][0]` with `points[i][1] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre_symmetric(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre_symmetric(n);
    QuadratureRule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0]).collect(),
        weights: w.iter().map(|wi| 0.5 * wi).collect(),
    }
}

/// Collapsed `n x n` product rule on the reference triangle, exact for total
/// degree `2n - 2`.
pub fn triangle_collapsed(n: usize) -> QuadratureRule {
    let g = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (ps, ws) in g.points.iter().zip(&g.weights) {
        let s = ps[0];
        for (pt, wt) in g.points.iter().zip(&g.weights) {
            let t = pt[0];
            points.push([s, (1.0 - s) * t]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadratureRule { points, weights }
}

/// Default interval rule: 5 points, degree 9.
pub fn default_interval_rule() -> QuadratureRule {
    gauss_legendre(5)
}

/// Default triangle rule: 25 points, degree 8.
pub fn default_triangle_rule() -> QuadratureRule {
    triangle_collapsed(5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn interval_rule_exactness() {
        for n in 1..=8 {
            let rule = gauss_legendre(n);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for p in 0..(2 * n as i32) {
                let q: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x[0].powi(p)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 2e-15, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        let rule = default_triangle_rule();
        for a in 0..=8u32 {
            for b in 0..=(8 - a) {
                // int x^a y^b over the unit triangle = a! b! / (a + b + 2)!
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                assert!((q - exact).abs() < 1e-15 * exact.max(1e-3) * 10.0, "a={a} b={b}");
            }
        }
    }
}
