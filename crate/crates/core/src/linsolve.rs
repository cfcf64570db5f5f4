//! Sparse symmetric positive-definite solves via faer's supernodal Cholesky.

use std::cell::Cell;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{invalid, Error, Result};
use crate::fem::{FieldVector, SparseMatrix, SparsityPattern};

/// Target relative residual; refinement kicks in above it.
pub const RESIDUAL_TARGET: f64 = 1e-12;
/// Relative residual above which a solve is reported as failed.
pub const RESIDUAL_FAIL: f64 = 1e-8;
const MAX_REFINEMENT: usize = 4;

thread_local! {
    static SOLVES: Cell<u64> = const { Cell::new(0) };
}

/// Number of linear solves performed on this thread so far.
pub fn solve_count() -> u64 {
    SOLVES.with(|c| c.get())
}

/// Symbolic analysis for one sparsity pattern, reusable across numeric
/// factorizations with different values.
#[derive(Clone)]
pub struct SymbolicFactor {
    pattern: Arc<SparsityPattern>,
    symbolic: SymbolicLlt<usize>,
}

impl std::fmt::Debug for SymbolicFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolicFactor").field("n", &self.pattern.n).field("nnz", &self.pattern.nnz()).finish()
    }
}

impl SymbolicFactor {
    pub fn new(pattern: Arc<SparsityPattern>) -> Result<Self> {
        // the pattern is symmetric, so its CSR arrays double as CSC
        let sym = SymbolicSparseColMatRef::new_checked(pattern.n, pattern.n, &pattern.row_ptr, None, &pattern.col_idx);
        let symbolic =
            SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| Error::Decomposition(format!("symbolic analysis: {e:?}")))?;
        Ok(Self { pattern, symbolic })
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &a.pattern) || *self.pattern == *a.pattern
    }
}

/// A prepared solve for one SPD matrix.
pub struct Factorization {
    matrix: SparseMatrix,
    llt: Llt<usize, f64>,
    symbolic: SymbolicFactor,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.matrix.n()).finish()
    }
}

/// Factorizes a symmetric positive-definite matrix.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    let symbolic = SymbolicFactor::new(a.pattern.clone())?;
    factorize_with(&symbolic, a)
}

/// Numeric factorization reusing an existing symbolic analysis.
pub fn factorize_with(symbolic: &SymbolicFactor, a: &SparseMatrix) -> Result<Factorization> {
    if !symbolic.matches(a) {
        return invalid("matrix pattern differs from the symbolic factorization");
    }
    if let Some(i) = a.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Decomposition(format!("non-finite matrix entry at position {i}")));
    }
    let p = &a.pattern;
    let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.row_ptr, None, &p.col_idx);
    let mat = SparseColMatRef::new(sym, &a.values);
    let llt = Llt::try_new_with_symbolic(symbolic.symbolic.clone(), mat, Side::Lower).map_err(|e| {
        let min_diag = (0..p.n).map(|i| a.get(i, i)).fold(f64::INFINITY, f64::min);
        Error::Decomposition(format!("{e:?}; smallest diagonal entry {min_diag:.3e}, matrix not positive definite"))
    })?;
    Ok(Factorization { matrix: a.clone(), llt, symbolic: symbolic.clone() })
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn symbolic(&self) -> &SymbolicFactor {
        &self.symbolic
    }

    fn raw_solve(&self, x: &mut [f64]) {
        let n = x.len();
        flush_subnormals(x);
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, n, 1));
        flush_subnormals(x);
    }

    /// Solves `A x = b`, refining until the relative residual is at most
    /// [`RESIDUAL_TARGET`].
    pub fn solve(&self, rhs: &[f64]) -> Result<FieldVector> {
        if rhs.len() != self.n() {
            return invalid(format!("right-hand side has length {}, matrix is {}x{}", rhs.len(), self.n(), self.n()));
        }
        SOLVES.with(|c| c.set(c.get() + 1));
        let b_norm = norm2(rhs);
        let mut x = rhs.to_vec();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(FieldVector(x));
        }
        self.raw_solve(&mut x);
        let mut r = vec![0.0; rhs.len()];
        let mut rel = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENT {
            self.matrix.mul_vec_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
            }
            rel = norm2(&r) / b_norm;
            if rel <= RESIDUAL_TARGET || !rel.is_finite() {
                break;
            }
            self.raw_solve(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        if !(rel <= RESIDUAL_FAIL) {
            return Err(Error::NumericalFailure {
                location: "linear solve".into(),
                message: format!("relative residual {rel:.3e} after refinement"),
            });
        }
        Ok(FieldVector(x))
    }
}

/// Keeps one factorization keyed by the scalars that determine the matrix
/// (step sizes) and the symbolic analysis of its pattern. Changing the key
/// triggers a numeric refactorization only.
#[derive(Debug, Default)]
pub struct FactorCache {
    symbolic: Option<SymbolicFactor>,
    current: Option<(Vec<u64>, Factorization)>,
    refactorizations: usize,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the factorization for `key`, building the matrix with `build`
    /// on a miss.
    pub fn get_or_factorize(&mut self, key: &[f64], build: impl FnOnce() -> Result<SparseMatrix>) -> Result<&Factorization> {
        let bits: Vec<u64> = key.iter().map(|k| k.to_bits()).collect();
        if self.current.as_ref().is_none_or(|(k, _)| *k != bits) {
            let a = build()?;
            let symbolic = match &self.symbolic {
                Some(s) if s.matches(&a) => s.clone(),
                _ => SymbolicFactor::new(a.pattern.clone())?,
            };
            let f = factorize_with(&symbolic, &a)?;
            self.symbolic = Some(symbolic);
            self.current = Some((bits, f));
            self.refactorizations += 1;
        }
        Ok(&self.current.as_ref().expect("factorization present").1)
    }

    pub fn invalidate(&mut self) {
        self.current = None;
    }

    /// Numeric factorizations performed so far.
    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }
}

/// Subnormal entries (exponentially small wave tails, for instance) make the
/// triangular sweeps many times slower on x86 and carry no information at
/// the residual target, so they are set to zero.
fn flush_subnormals(v: &mut [f64]) {
    for x in v.iter_mut() {
        if x.is_subnormal() {
            *x = 0.0;
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
