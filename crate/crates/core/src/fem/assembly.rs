use std::sync::Arc;

use super::space::FeSpace;
use super::FieldVector;
use crate::error::{invalid, Error, Result};

/// Row-compressed nonzero layout. Shared between matrices assembled on the
/// same space so that linear combinations and factorizations can reuse it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    fn from_pairs(n: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0; n + 1];
        for &(i, _) in &pairs {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = pairs.into_iter().map(|(_, j)| j).collect();
        Self { n, row_ptr, col_idx }
    }

    pub fn for_space(space: &FeSpace) -> Self {
        let nl = space.n_local();
        let mut pairs = Vec::with_capacity(space.n_cells() * nl * nl);
        for c in 0..space.n_cells() {
            let dofs = space.cell_dofs(c);
            for &i in dofs {
                for &j in dofs {
                    pairs.push((i, j));
                }
            }
        }
        Self::from_pairs(space.n_dofs(), pairs)
    }
}

/// Square sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub pattern: Arc<SparsityPattern>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix"));
        }
        let pattern = Arc::new(SparsityPattern::from_pairs(n, triplets.iter().map(|&(i, j, _)| (i, j)).collect()));
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let p = m.pattern.find(i, j).expect("entry in pattern");
            m.values[p] += v;
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return invalid("dense matrix is not square");
            }
            t.extend(r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(n, &t)
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> FieldVector {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        FieldVector(y)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n(), "matrix-vector length mismatch");
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `x^T A y`
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        super::dot(x, &self.mul_vec(y))
    }

    /// `sum c_i A_i` over matrices that share one pattern.
    pub fn lincomb(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let Some((_, first)) = terms.first() else {
            return invalid("empty matrix combination");
        };
        let mut out = SparseMatrix::zeros(first.pattern.clone());
        for (c, m) in terms {
            if !Arc::ptr_eq(&m.pattern, &first.pattern) && m.pattern != first.pattern {
                return invalid("matrices in a combination must share a sparsity pattern");
            }
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n()).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n()]; self.n()];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn assemble_bilinear(
    space: &FeSpace,
    pattern: Arc<SparsityPattern>,
    integrand: impl Fn(usize, usize, usize, usize) -> f64,
) -> SparseMatrix {
    let nl = space.n_local();
    let nq = space.tables.rule.len();
    let mut m = SparseMatrix::zeros(pattern);
    let mut local = vec![0.0; nl * nl];
    for c in 0..space.n_cells() {
        // upper triangle only, mirrored so the result is bitwise symmetric
        for a in 0..nl {
            for b in a..nl {
                let mut s = 0.0;
                for q in 0..nq {
                    s += integrand(c, q, a, b);
                }
                local[a * nl + b] = s;
                local[b * nl + a] = s;
            }
        }
        let dofs = space.cell_dofs(c);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                let p = m.pattern.find(i, j).expect("cell pair in pattern");
                m.values[p] += local[a * nl + b];
            }
        }
    }
    m
}

/// Mass matrix `M_ij = (psi_j, psi_i)`.
pub fn assemble_mass(space: &FeSpace, pattern: Arc<SparsityPattern>) -> SparseMatrix {
    let t = &space.tables;
    let nl = t.n_local;
    assemble_bilinear(space, pattern, |c, q, a, b| {
        t.rule.weights[q] * space.geometry[c].det * t.phi[q * nl + a] * t.phi[q * nl + b]
    })
}

/// Stiffness matrix `K_ij = (grad psi_j, grad psi_i)`.
pub fn assemble_stiffness(space: &FeSpace, pattern: Arc<SparsityPattern>) -> SparseMatrix {
    let t = &space.tables;
    let nl = t.n_local;
    assemble_bilinear(space, pattern, |c, q, a, b| {
        let g = &space.geometry[c];
        let ga = g.grad(t.dphi[q * nl + a]);
        let gb = g.grad(t.dphi[q * nl + b]);
        t.rule.weights[q] * g.det * (ga[0] * gb[0] + ga[1] * gb[1])
    })
}

/// Load vector `(f(u_1, .., u_m), psi_i)` where the FE functions `args` are
/// evaluated at quadrature points and combined pointwise by `f`.
pub fn assemble_nonlinear_load(space: &FeSpace, f: impl Fn(&[f64]) -> f64, args: &[&[f64]]) -> Result<FieldVector> {
    const MAX_ARGS: usize = 4;
    if args.is_empty() || args.len() > MAX_ARGS {
        return invalid(format!("nonlinear load takes 1 to {MAX_ARGS} fields, got {}", args.len()));
    }
    for a in args {
        space.check_len(a, "nonlinear load argument")?;
    }
    let t = &space.tables;
    let nl = t.n_local;
    let mut out = vec![0.0; space.n_dofs()];
    let mut vals = [0.0; MAX_ARGS];
    let m = args.len();
    for c in 0..space.n_cells() {
        let dofs = space.cell_dofs(c);
        let det = space.geometry[c].det;
        for q in 0..t.rule.len() {
            let phi = &t.phi[q * nl..(q + 1) * nl];
            for (v, arg) in vals.iter_mut().zip(args) {
                *v = dofs.iter().zip(phi).map(|(&d, p)| arg[d] * p).sum();
            }
            let fv = f(&vals[..m]);
            if !fv.is_finite() {
                return Err(Error::NumericalFailure {
                    location: format!("nonlinear load, cell {c}, quadrature point {q}"),
                    message: format!("pointwise function returned {fv} for arguments {:?}", &vals[..m]),
                });
            }
            let w = t.rule.weights[q] * det * fv;
            for (&d, p) in dofs.iter().zip(phi) {
                out[d] += w * p;
            }
        }
    }
    Ok(FieldVector(out))
}

/// `integral f(u_1, .., u_m) dx` with the FE functions evaluated at the
/// assembly quadrature points, so it pairs exactly with
/// [`assemble_nonlinear_load`].
pub fn integrate_pointwise(space: &FeSpace, f: impl Fn(&[f64]) -> f64, args: &[&[f64]]) -> Result<f64> {
    const MAX_ARGS: usize = 4;
    if args.is_empty() || args.len() > MAX_ARGS {
        return invalid(format!("pointwise integral takes 1 to {MAX_ARGS} fields, got {}", args.len()));
    }
    for a in args {
        space.check_len(a, "pointwise integral argument")?;
    }
    let t = &space.tables;
    let nl = t.n_local;
    let mut vals = [0.0; MAX_ARGS];
    let m = args.len();
    let mut sum = 0.0;
    for c in 0..space.n_cells() {
        let dofs = space.cell_dofs(c);
        let mut cell = 0.0;
        for q in 0..t.rule.len() {
            let phi = &t.phi[q * nl..(q + 1) * nl];
            for (v, arg) in vals.iter_mut().zip(args) {
                *v = dofs.iter().zip(phi).map(|(&d, p)| arg[d] * p).sum();
            }
            cell += t.rule.weights[q] * f(&vals[..m]);
        }
        sum += space.geometry[c].det * cell;
    }
    if !sum.is_finite() {
        return Err(Error::NumericalFailure { location: "pointwise integral".into(), message: format!("integral is {sum}") });
    }
    Ok(sum)
}

/// Load vector `(g(x), psi_i)` for a function given pointwise in space.
pub fn assemble_forcing_load(space: &FeSpace, g: impl Fn([f64; 2]) -> f64) -> Result<FieldVector> {
    let t = &space.tables;
    let nl = t.n_local;
    let mut out = vec![0.0; space.n_dofs()];
    for c in 0..space.n_cells() {
        let geo = &space.geometry[c];
        let dofs = space.cell_dofs(c);
        for (q, p) in t.rule.points.iter().enumerate() {
            let gv = g(geo.map(*p));
            if !gv.is_finite() {
                return Err(Error::NumericalFailure {
                    location: format!("forcing load, cell {c}, quadrature point {q}"),
                    message: format!("forcing returned {gv}"),
                });
            }
            let w = t.rule.weights[q] * geo.det * gv;
            for (&d, phi) in dofs.iter().zip(&t.phi[q * nl..(q + 1) * nl]) {
                out[d] += w * phi;
            }
        }
    }
    Ok(FieldVector(out))
}

/// Replaces rows and columns of the constrained dofs by identity rows.
/// The pattern is kept, so the result still combines with the originals.
pub fn constrain_dirichlet(a: &SparseMatrix, dofs: &[usize]) -> SparseMatrix {
    let n = a.n();
    let mut mask = vec![false; n];
    for &d in dofs {
        mask[d] = true;
    }
    let mut out = a.clone();
    let p = &a.pattern;
    for i in 0..n {
        for k in p.row_ptr[i]..p.row_ptr[i + 1] {
            let j = p.col_idx[k];
            if mask[i] || mask[j] {
                out.values[k] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    out
}

/// Adjusts `rhs` for a system constrained by [`constrain_dirichlet`]:
/// subtracts the columns of the unconstrained matrix `a` times the boundary
/// values and writes the values into the constrained rows.
pub fn lift_dirichlet(a: &SparseMatrix, rhs: &mut [f64], dofs: &[usize], values: &[f64]) -> Result<()> {
    if dofs.len() != values.len() {
        return invalid("boundary dof and value lists differ in length");
    }
    if values.iter().any(|&v| v != 0.0) {
        let mut ext = vec![0.0; a.n()];
        for (&d, &v) in dofs.iter().zip(values) {
            ext[d] = v;
        }
        let corr = a.mul_vec(&ext);
        for (r, c) in rhs.iter_mut().zip(corr.iter()) {
            *r -= c;
        }
    }
    for (&d, &v) in dofs.iter().zip(values) {
        rhs[d] = v;
    }
    Ok(())
}

/// Boundary condition attached to one linear solve.
#[derive(Debug, Clone, Copy)]
pub enum BoundaryCondition<'a> {
    Natural,
    Periodic,
    /// Values on `space.boundary_dofs()` in the same order.
    Dirichlet(&'a [f64]),
}

/// Applies `bc` to the system `(a, rhs)` in place.
pub fn apply_boundary(space: &FeSpace, a: &mut SparseMatrix, rhs: &mut [f64], bc: BoundaryCondition<'_>) -> Result<()> {
    use super::space::BoundaryKind;
    match (bc, space.boundary) {
        (BoundaryCondition::Natural, BoundaryKind::Natural) | (BoundaryCondition::Periodic, BoundaryKind::Periodic) => Ok(()),
        (BoundaryCondition::Dirichlet(values), BoundaryKind::Dirichlet) => {
            let dofs = space.boundary_dofs();
            lift_dirichlet(a, rhs, dofs, values)?;
            *a = constrain_dirichlet(a, dofs);
            Ok(())
        }
        (bc, kind) => invalid(format!("boundary condition {bc:?} does not match a {kind:?} space")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, quadrature, BoundaryKind, Domain, RefTables};

    fn interval(a: f64, b: f64, n: usize, bc: BoundaryKind) -> FeSpace {
        FeSpace::new(build_mesh(Domain::Interval { a, b }, n).unwrap(), bc).unwrap()
    }

    fn square(n: usize, bc: BoundaryKind) -> FeSpace {
        let l = 2.0 * std::f64::consts::PI;
        FeSpace::new(build_mesh(Domain::Rectangle { x0: 0.0, x1: l, y0: 0.0, y1: l }, n).unwrap(), bc).unwrap()
    }

    fn mk(space: &FeSpace) -> (SparseMatrix, SparseMatrix) {
        let p = Arc::new(SparsityPattern::for_space(space));
        (assemble_mass(space, p.clone()), assemble_stiffness(space, p))
    }

    #[test]
    fn single_element_matrices() {
        let h = 0.7;
        let s = interval(1.0, 1.0 + h, 1, BoundaryKind::Natural);
        let (m, k) = mk(&s);
        let me = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
        let ke = [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((m.get(a, b) - h / 30.0 * me[a][b]).abs() < 1e-14);
                assert!((k.get(a, b) - ke[a][b] / (3.0 * h)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn partition_of_unity_and_kernel() {
        for s in [interval(-2.0, 4.0, 17, BoundaryKind::Natural), square(6, BoundaryKind::Natural), square(6, BoundaryKind::Periodic)] {
            let (m, k) = mk(&s);
            let area = s.mesh.domain.measure();
            assert!((m.sum() - area).abs() < 1e-10 * area);
            assert!(m.is_symmetric() && k.is_symmetric());
            let k1 = k.mul_vec(&s.ones());
            assert!(k1.norm_max() < 1e-11);
        }
    }

    #[test]
    fn stiffness_reproduces_laplacian_of_quadratic() {
        // -u'' = 2 for u = -x^2; (u', v') = (2, v) - boundary terms, check interior rows
        let s = interval(0.0, 1.0, 8, BoundaryKind::Natural);
        let (m, k) = mk(&s);
        let u = s.interpolate(|x| -x[0] * x[0]);
        let ku = k.mul_vec(&u);
        let m2 = m.mul_vec(&vec![2.0; s.n_dofs()]);
        for i in 1..s.n_dofs() - 1 {
            assert!((ku[i] - m2[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn nonlinear_load_examples() {
        let s = square(5, BoundaryKind::Dirichlet);
        let (m, _) = mk(&s);
        let z = assemble_nonlinear_load(&s, |_| 0.0, &[&s.ones()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let u = s.interpolate(|x| x[0].sin() * x[1]);
        let id = assemble_nonlinear_load(&s, |v| v[0], &[&u]).unwrap();
        let mu = m.mul_vec(&u);
        for (a, b) in id.iter().zip(mu.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = 0.7;
        let cu = s.interpolate(|_| c);
        let cube = assemble_nonlinear_load(&s, |v| v[0].powi(3), &[&cu]).unwrap();
        let expect = m.mul_vec(&s.ones());
        for (a, b) in cube.iter().zip(expect.iter()) {
            assert!((a - c * c * c * b).abs() < 1e-13);
        }
        assert!(matches!(
            assemble_nonlinear_load(&s, |_| f64::NAN, &[&cu]),
            Err(Error::NumericalFailure { .. })
        ));
    }

    #[test]
    fn cubic_load_is_integrated_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = square(4, BoundaryKind::Natural);
        let u = FieldVector((0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let lo = assemble_nonlinear_load(&s, |v| v[0].powi(3), &[&u]).unwrap();
        s.tables = RefTables::new(2, quadrature::triangle_collapsed(7));
        let hi = assemble_nonlinear_load(&s, |v| v[0].powi(3), &[&u]).unwrap();
        let scale = hi.norm_max();
        for (a, b) in lo.iter().zip(hi.iter()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }

        let mut s = interval(-2.0, 4.0, 7, BoundaryKind::Natural);
        let u = FieldVector((0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let lo = assemble_nonlinear_load(&s, |v| v[0].powi(3), &[&u]).unwrap();
        s.tables = RefTables::new(1, quadrature::gauss_legendre(7));
        let hi = assemble_nonlinear_load(&s, |v| v[0].powi(3), &[&u]).unwrap();
        let scale = hi.norm_max();
        for (a, b) in lo.iter().zip(hi.iter()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn forcing_load_of_constant() {
        let s = square(3, BoundaryKind::Natural);
        let (m, _) = mk(&s);
        let g = assemble_forcing_load(&s, |_| 2.5).unwrap();
        let e = m.mul_vec(&s.ones());
        for (a, b) in g.iter().zip(e.iter()) {
            assert!((a - 2.5 * b).abs() < 1e-13);
        }
    }

    #[test]
    fn dirichlet_constraint() {
        let s = interval(-2.0, 4.0, 4, BoundaryKind::Dirichlet);
        let (m, k) = mk(&s);
        let mut a = SparseMatrix::lincomb(&[(1.0, &m), (0.1, &k)]).unwrap();
        let mut rhs = vec![0.0; s.n_dofs()];
        let eps: f64 = 0.01;
        let left = 0.5 * (1.0 - (-2.0 / (2.0 * 2f64.sqrt() * eps)).tanh());
        assert!((left - 1.0).abs() < 1e-15);
        apply_boundary(&s, &mut a, &mut rhs, BoundaryCondition::Dirichlet(&[left, 0.0])).unwrap();
        assert!(a.is_symmetric());
        assert_eq!(rhs[0], left);
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(1, 0), 0.0);

        let mut unchanged = m.clone();
        let s_nat = interval(-2.0, 4.0, 4, BoundaryKind::Natural);
        let mut r = vec![1.0; s_nat.n_dofs()];
        apply_boundary(&s_nat, &mut unchanged, &mut r, BoundaryCondition::Natural).unwrap();
        assert_eq!(unchanged, m);
        assert!(apply_boundary(&s_nat, &mut unchanged, &mut r, BoundaryCondition::Periodic).is_err());
    }
}
