use super::mesh::{Cells, Domain, Mesh};
use super::quadrature::{self, QuadratureRule};
use super::FieldVector;
use crate::error::{invalid, Result};

/// How the space treats the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Boundary dofs are constrained by the solver.
    Dirichlet,
    /// Nothing is constrained (homogeneous Neumann).
    Natural,
    /// Opposite boundary dofs are identified when the space is built.
    Periodic,
}

/// Affine map data for one cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellGeometry {
    /// |det J|
    pub det: f64,
    /// J^{-T}, applied to reference gradients.
    pub inv_t: [[f64; 2]; 2],
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct RefTables {
    pub rule: QuadratureRule,
    pub n_local: usize,
    /// `phi[q * n_local + a]`
    pub phi: Vec<f64>,
    /// reference gradient of basis `a` at point `q`
    pub dphi: Vec<[f64; 2]>,
}

impl RefTables {
    pub fn new(dimension: usize, rule: QuadratureRule) -> Self {
        let n_local = if dimension == 1 { 3 } else { 6 };
        let mut phi = Vec::with_capacity(rule.len() * n_local);
        let mut dphi = Vec::with_capacity(rule.len() * n_local);
        for p in &rule.points {
            if dimension == 1 {
                let (v, d) = p2_interval(p[0]);
                phi.extend_from_slice(&v);
                dphi.extend(d.iter().map(|&g| [g, 0.0]));
            } else {
                let (v, d) = p2_triangle(p[0], p[1]);
                phi.extend_from_slice(&v);
                dphi.extend_from_slice(&d);
            }
        }
        Self { rule, n_local, phi, dphi }
    }

    pub fn for_dimension(dimension: usize) -> Self {
        let rule = if dimension == 1 {
            quadrature::default_interval_rule()
        } else {
            quadrature::default_triangle_rule()
        };
        Self::new(dimension, rule)
    }
}

/// P2 basis on [0, 1], local order (left, mid, right).
fn p2_interval(x: f64) -> ([f64; 3], [f64; 3]) {
    (
        [(1.0 - x) * (1.0 - 2.0 * x), 4.0 * x * (1.0 - x), x * (2.0 * x - 1.0)],
        [4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0],
    )
}

/// P2 basis on the reference triangle, local order
/// `[v0, v1, v2, m01, m12, m20]` with barycentrics `l0 = 1-x-y, l1 = x, l2 = y`.
fn p2_triangle(x: f64, y: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let l = [1.0 - x - y, x, y];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut v = [0.0; 6];
    let mut d = [[0.0; 2]; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        d[i] = [s * dl[i][0], s * dl[i][1]];
    }
    for (m, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        v[3 + m] = 4.0 * l[i] * l[j];
        d[3 + m] = [
            4.0 * (dl[i][0] * l[j] + l[i] * dl[j][0]),
            4.0 * (dl[i][1] * l[j] + l[i] * dl[j][1]),
        ];
    }
    (v, d)
}

/// Continuous P2 Lagrange space on a structured mesh.
///
/// Dofs sit on a lattice with twice the mesh resolution: `2n + 1` nodes
/// per side (`2n` when periodic).
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub boundary: BoundaryKind,
    n_dofs: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<[f64; 2]>,
    /// Global dof for every lattice node, lattice in row-major order.
    lattice_dofs: Vec<usize>,
    lattice_coords: Vec<[f64; 2]>,
    boundary_dofs: Vec<usize>,
    pub(crate) geometry: Vec<CellGeometry>,
    pub(crate) tables: RefTables,
}

impl FeSpace {
    pub fn new(mesh: Mesh, boundary: BoundaryKind) -> Result<Self> {
        let n = mesh.n;
        if boundary == BoundaryKind::Periodic && n < 2 {
            return invalid("periodic identification needs at least two cells per side");
        }
        let periodic = boundary == BoundaryKind::Periodic;
        let side = 2 * n + 1;
        let wrap = |i: usize| if periodic { i % (2 * n) } else { i };
        let dim = mesh.dimension();

        let (lattice_coords, lattice_dofs, lattice_boundary): (Vec<[f64; 2]>, Vec<usize>, Vec<bool>) = match mesh.domain {
            Domain::Interval { a, b } => {
                let h2 = (b - a) / (2 * n) as f64;
                let coords = (0..side)
                    .map(|i| [if i == side - 1 { b } else { a + i as f64 * h2 }, 0.0])
                    .collect();
                let dofs = (0..side).map(wrap).collect();
                let bnd = (0..side).map(|i| i == 0 || i == side - 1).collect();
                (coords, dofs, bnd)
            }
            Domain::Rectangle { x0, x1, y0, y1 } => {
                let (hx, hy) = ((x1 - x0) / (2 * n) as f64, (y1 - y0) / (2 * n) as f64);
                let per_row = if periodic { 2 * n } else { side };
                let mut coords = Vec::with_capacity(side * side);
                let mut dofs = Vec::with_capacity(side * side);
                let mut bnd = Vec::with_capacity(side * side);
                for j in 0..side {
                    for i in 0..side {
                        let x = if i == side - 1 { x1 } else { x0 + i as f64 * hx };
                        let y = if j == side - 1 { y1 } else { y0 + j as f64 * hy };
                        coords.push([x, y]);
                        dofs.push(wrap(j) * per_row + wrap(i));
                        bnd.push(i == 0 || j == 0 || i == side - 1 || j == side - 1);
                    }
                }
                (coords, dofs, bnd)
            }
        };
        let n_dofs = if periodic { (2 * n).pow(dim as u32) } else { side.pow(dim as u32) };

        let mut dof_coords = vec![[f64::NAN; 2]; n_dofs];
        // first lattice node hit wins, so identified dofs take the lower-left copy
        for (l, &d) in lattice_dofs.iter().enumerate().rev() {
            dof_coords[d] = lattice_coords[l];
        }

        let boundary_dofs = if periodic {
            Vec::new()
        } else {
            let mut v: Vec<usize> = lattice_boundary
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(l, _)| lattice_dofs[l])
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };

        let (n_local, cell_dofs, geometry) = match &mesh.cells {
            Cells::Intervals(cells) => {
                let mut dofs = Vec::with_capacity(3 * cells.len());
                let mut geom = Vec::with_capacity(cells.len());
                for (e, c) in cells.iter().enumerate() {
                    dofs.extend([2 * e, 2 * e + 1, 2 * e + 2].map(|l| lattice_dofs[l]));
                    let (xa, xb) = (mesh.vertices[c[0]][0], mesh.vertices[c[1]][0]);
                    let h = xb - xa;
                    geom.push(CellGeometry {
                        det: h,
                        inv_t: [[1.0 / h, 0.0], [0.0, 0.0]],
                        origin: [xa, 0.0],
                        jac: [[h, 0.0], [0.0, 0.0]],
                    });
                }
                (3, dofs, geom)
            }
            Cells::Triangles(cells) => {
                // lattice offsets of [v0, v1, v2, m01, m12, m20] for the two triangles of a square
                const LOWER: [(usize, usize); 6] = [(0, 0), (2, 0), (2, 2), (1, 0), (2, 1), (1, 1)];
                const UPPER: [(usize, usize); 6] = [(0, 0), (2, 2), (0, 2), (1, 1), (1, 2), (0, 1)];
                let mut dofs = Vec::with_capacity(6 * cells.len());
                let mut geom = Vec::with_capacity(cells.len());
                for (e, c) in cells.iter().enumerate() {
                    let sq = e / 2;
                    let (p, q) = (sq % n, sq / n);
                    let offsets = if e % 2 == 0 { &LOWER } else { &UPPER };
                    dofs.extend(offsets.iter().map(|&(di, dj)| lattice_dofs[(2 * q + dj) * side + 2 * p + di]));
                    let [a, b, cc] = c.map(|v| mesh.vertices[v]);
                    let jac = [[b[0] - a[0], cc[0] - a[0]], [b[1] - a[1], cc[1] - a[1]]];
                    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                    // J^{-T} = (1/det) [[d, -c], [-b, a]] for J = [[a, b], [c, d]]
                    let inv_t = [
                        [jac[1][1] / det, -jac[1][0] / det],
                        [-jac[0][1] / det, jac[0][0] / det],
                    ];
                    geom.push(CellGeometry { det: det.abs(), inv_t, origin: a, jac });
                }
                (6, dofs, geom)
            }
        };

        let tables = RefTables::for_dimension(dim);
        Ok(Self {
            mesh,
            boundary,
            n_dofs,
            n_local,
            cell_dofs,
            dof_coords,
            lattice_dofs,
            lattice_coords,
            boundary_dofs,
            geometry,
            tables,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mesh.dimension()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_cells(&self) -> usize {
        self.geometry.len()
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.n_local..(cell + 1) * self.n_local]
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.dof_coords
    }

    /// Dofs on the domain boundary; empty for periodic spaces.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Lattice nodes (with periodic copies) and their global dofs, for output.
    pub fn lattice(&self) -> (&[[f64; 2]], &[usize]) {
        (&self.lattice_coords, &self.lattice_dofs)
    }

    /// Lattice nodes per side (`2n + 1`).
    pub fn lattice_side(&self) -> usize {
        2 * self.mesh.n + 1
    }

    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> FieldVector {
        FieldVector(self.dof_coords.iter().map(|&x| f(x)).collect())
    }

    pub fn ones(&self) -> FieldVector {
        FieldVector(vec![1.0; self.n_dofs])
    }

    pub(crate) fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.n_dofs {
            return invalid(format!("{what}: expected {} coefficients, got {}", self.n_dofs, v.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;

    fn square(n: usize, bc: BoundaryKind) -> FeSpace {
        let m = build_mesh(Domain::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 2.0 }, n).unwrap();
        FeSpace::new(m, bc).unwrap()
    }

    #[test]
    fn basis_is_nodal() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        for (a, p) in nodes.iter().enumerate() {
            let (v, _) = p2_triangle(p[0], p[1]);
            for (b, &vb) in v.iter().enumerate() {
                assert_eq!(vb, if a == b { 1.0 } else { 0.0 });
            }
        }
        for (a, x) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            let (v, _) = p2_interval(x);
            for (b, &vb) in v.iter().enumerate() {
                assert_eq!(vb, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn basis_gradients_match_finite_differences() {
        let (x, y, h) = (0.23, 0.41, 1e-6);
        let (_, d) = p2_triangle(x, y);
        let (px, _) = p2_triangle(x + h, y);
        let (mx, _) = p2_triangle(x - h, y);
        let (py, _) = p2_triangle(x, y + h);
        let (my, _) = p2_triangle(x, y - h);
        for a in 0..6 {
            assert!((d[a][0] - (px[a] - mx[a]) / (2.0 * h)).abs() < 1e-8);
            assert!((d[a][1] - (py[a] - my[a]) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn dof_counts() {
        assert_eq!(square(3, BoundaryKind::Dirichlet).n_dofs(), 49);
        assert_eq!(square(3, BoundaryKind::Periodic).n_dofs(), 36);
        assert_eq!(square(3, BoundaryKind::Dirichlet).boundary_dofs().len(), 24);
        let m = build_mesh(Domain::Interval { a: -2.0, b: 4.0 }, 5).unwrap();
        let s = FeSpace::new(m.clone(), BoundaryKind::Dirichlet).unwrap();
        // vertices + edges
        assert_eq!(s.n_dofs(), 6 + 5);
        assert_eq!(s.boundary_dofs(), &[0, 10]);
        assert_eq!(FeSpace::new(m, BoundaryKind::Periodic).unwrap().n_dofs(), 10);
    }

    #[test]
    fn cell_dofs_sit_at_their_nodes() {
        let s = square(4, BoundaryKind::Natural);
        let refs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        for c in 0..s.n_cells() {
            for (a, &d) in s.cell_dofs(c).iter().enumerate() {
                let x = s.geometry[c].map(refs[a]);
                let y = s.dof_coords()[d];
                assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let m = build_mesh(Domain::Interval { a: -2.0, b: 4.0 }, 6).unwrap();
        let s = FeSpace::new(m, BoundaryKind::Natural).unwrap();
        assert!(s.interpolate(|_| 1.0).iter().all(|&v| v == 1.0));
        let lin = s.interpolate(|x| x[0]);
        for (i, v) in lin.iter().enumerate() {
            assert!((v - (-2.0 + 0.5 * i as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_rejects_single_cell() {
        let m = build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 1).unwrap();
        assert!(FeSpace::new(m, BoundaryKind::Periodic).is_err());
    }
}
