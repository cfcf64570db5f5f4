use crate::error::{invalid, Result};

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }
}

/// Cell-to-vertex connectivity.
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Intervals(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// Uniform structured mesh. In 2D each of the `n x n` squares is cut along
/// its lower-left to upper-right diagonal, giving `2 n^2` triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub domain: Domain,
    /// Subdivisions per side.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    pub cells: Cells,
    /// `true` for vertices on the domain boundary.
    pub boundary: Vec<bool>,
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn n_cells(&self) -> usize {
        match &self.cells {
            Cells::Intervals(c) => c.len(),
            Cells::Triangles(c) => c.len(),
        }
    }

    /// Side length of one structured square (or interval) in x.
    pub fn h(&self) -> f64 {
        match self.domain {
            Domain::Interval { a, b } => (b - a) / self.n as f64,
            Domain::Rectangle { x0, x1, .. } => (x1 - x0) / self.n as f64,
        }
    }
}

pub fn build_mesh(domain: Domain, n: usize) -> Result<Mesh> {
    if n == 0 {
        return invalid("mesh needs at least one subdivision per side");
    }
    match domain {
        Domain::Interval { a, b } => {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return invalid(format!("degenerate interval [{a}, {b}]"));
            }
            let h = (b - a) / n as f64;
            let vertices = (0..=n)
                .map(|i| [if i == n { b } else { a + i as f64 * h }, 0.0])
                .collect();
            let cells = (0..n).map(|i| [i, i + 1]).collect();
            let mut boundary = vec![false; n + 1];
            boundary[0] = true;
            boundary[n] = true;
            Ok(Mesh { domain, n, vertices, cells: Cells::Intervals(cells), boundary })
        }
        Domain::Rectangle { x0, x1, y0, y1 } => {
            if !([x0, x1, y0, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0) {
                return invalid(format!("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"));
            }
            let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
            let idx = |i: usize, j: usize| j * (n + 1) + i;
            let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
            let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([x0 + i as f64 * hx, y0 + j as f64 * hy]);
                    boundary.push(i == 0 || j == 0 || i == n || j == n);
                }
            }
            let mut cells = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                    cells.push([v00, v10, v11]);
                    cells.push([v00, v11, v01]);
                }
            }
            Ok(Mesh { domain, n, vertices, cells: Cells::Triangles(cells), boundary })
        }
    }
}
