//! Linear solvers behind a prepare-once, solve-many interface.

mod envelope;
mod iterative;
mod lu;

pub use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use lu::DenseLu;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{norm2, Real};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Jacobi-preconditioned conjugate gradients; symmetric systems only.
    CgJacobi,
    /// LU with partial pivoting on a dense copy.
    DenseDirect,
    /// Jacobi-preconditioned BiCGSTAB.
    GeneralIterative,
    /// Envelope Cholesky after reverse Cuthill–McKee ordering; symmetric systems only.
    #[default]
    SparseCholesky,
}

impl SolverMethod {
    pub fn requires_symmetry(self) -> bool {
        matches!(self, SolverMethod::CgJacobi | SolverMethod::SparseCholesky)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::default(),
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: SolverMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(SolverError::Config(format!("tolerance {} outside (0, 1)", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(SolverError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("{method:?} needs a symmetric matrix")]
    Dispatch { method: SolverMethod },
    #[error("matrix is singular or indefinite at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("dimension mismatch: matrix {rows}x{cols}, vector {len}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("invalid solver config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Relative residual; NaN when the direct solve was not checked.
    pub residual: f64,
}

enum Backend<T> {
    Cg,
    BiCgStab { transpose: Option<Csr<T>> },
    Lu(DenseLu<T>),
    Cholesky(EnvelopeCholesky<T>),
}

/// A matrix ready for repeated solves with `A` and `A^T`.
pub struct PreparedSolver<T> {
    a: Csr<T>,
    cfg: SolverConfig,
    inv_diag: Vec<T>,
    backend: Backend<T>,
    solves: AtomicUsize,
}

/// Direct solves verify their residual on the first few calls and then
/// periodically; the matrix product costs about as much as the solve itself.
const ALWAYS_CHECK: usize = 4;
const CHECK_EVERY: usize = 64;

impl<T: Real> PreparedSolver<T> {
    pub fn new(a: Csr<T>, cfg: SolverConfig) -> Result<Self, SolverError> {
        Self::with_orderings(a, cfg, &[])
    }

    /// Like [`PreparedSolver::new`]; the sparse Cholesky backend also tries
    /// the given fill-reducing orderings (`perm[new] = old`).
    pub fn with_orderings(a: Csr<T>, cfg: SolverConfig, orderings: &[Vec<usize>]) -> Result<Self, SolverError> {
        cfg.validate()?;
        if a.nrows != a.ncols {
            return Err(SolverError::Shape { rows: a.nrows, cols: a.ncols, len: a.nrows });
        }
        if cfg.method.requires_symmetry() && !a.symmetric {
            return Err(SolverError::Dispatch { method: cfg.method });
        }
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
            .collect();
        let backend = match cfg.method {
            SolverMethod::CgJacobi => Backend::Cg,
            SolverMethod::GeneralIterative => Backend::BiCgStab {
                transpose: (!a.symmetric).then(|| a.transpose()),
            },
            SolverMethod::DenseDirect => Backend::Lu(DenseLu::factor(&a)?),
            SolverMethod::SparseCholesky => Backend::Cholesky(EnvelopeCholesky::factor_with(&a, orderings)?),
        };
        Ok(Self { a, cfg, inv_diag, backend, solves: AtomicUsize::new(0) })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows
    }

    pub fn matrix(&self) -> &Csr<T> {
        &self.a
    }

    pub fn solve(&self, b: &[T]) -> Result<(Vec<T>, SolveInfo), SolverError> {
        self.solve_impl(b, false)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Result<(Vec<T>, SolveInfo), SolverError> {
        self.solve_impl(b, !self.a.symmetric)
    }

    fn solve_impl(&self, b: &[T], transpose: bool) -> Result<(Vec<T>, SolveInfo), SolverError> {
        let n = self.a.nrows;
        if b.len() != n {
            return Err(SolverError::Shape { rows: n, cols: n, len: b.len() });
        }
        let bnorm = norm2(b);
        if bnorm == T::zero() {
            return Ok((vec![T::zero(); n], SolveInfo { iterations: 0, residual: 0.0 }));
        }
        let tol = T::lit(self.cfg.tolerance);
        let maxit = self.cfg.max_iterations;
        let at;
        let op: &Csr<T> = if transpose {
            match &self.backend {
                Backend::BiCgStab { transpose: Some(t) } => t,
                _ => {
                    at = self.a.transpose();
                    &at
                }
            }
        } else {
            &self.a
        };
        let inv_diag = &self.inv_diag;
        let k = self.solves.fetch_add(1, Ordering::Relaxed);
        let check = k < ALWAYS_CHECK || k % CHECK_EVERY == 0;
        let unchecked = SolveInfo { iterations: 0, residual: f64::NAN };
        match &self.backend {
            Backend::Cg => iterative::pcg(op, b, inv_diag, tol, maxit),
            Backend::BiCgStab { .. } => iterative::bicgstab(op, b, inv_diag, tol, maxit),
            Backend::Lu(lu) if !check => Ok((lu.solve(b, transpose), unchecked)),
            Backend::Cholesky(ch) if !check => Ok((ch.solve(b), unchecked)),
            Backend::Lu(lu) => refine(op, b, tol, |r| Ok(lu.solve(r, transpose))),
            Backend::Cholesky(ch) => refine(op, b, tol, |r| Ok(ch.solve(r))),
        }
    }
}

/// Direct solve followed by a few steps of iterative refinement if needed.
fn refine<T: Real>(
    a: &Csr<T>,
    b: &[T],
    tol: T,
    direct: impl Fn(&[T]) -> Result<Vec<T>, SolverError>,
) -> Result<(Vec<T>, SolveInfo), SolverError> {
    let bnorm = norm2(b);
    let mut x = direct(b)?;
    let mut history = Vec::new();
    for step in 0..4 {
        let ax = a.apply(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let rel = norm2(&r) / bnorm;
        history.push(rel.as_f64());
        if rel <= tol {
            return Ok((x, SolveInfo { iterations: step, residual: rel.as_f64() }));
        }
        let dx = direct(&r)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    Err(SolverError::NotConverged {
        iterations: history.len(),
        residual: *history.last().unwrap(),
        history,
    })
}

/// One-shot solve.
pub fn solve<T: Real>(a: &Csr<T>, b: &[T], cfg: &SolverConfig) -> Result<(Vec<T>, SolveInfo), SolverError> {
    PreparedSolver::new(a.clone(), *cfg)?.solve(b)
}
