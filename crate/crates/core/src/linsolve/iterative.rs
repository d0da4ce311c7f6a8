use super::{SolveInfo, SolverError};
use crate::scalar::{axpy, dot_slices, norm2, Real};
use crate::sparse::Csr;

fn true_residual<T: Real>(a: &Csr<T>, x: &[T], b: &[T]) -> T {
    let ax = a.apply(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    norm2(&r) / norm2(b)
}

pub(super) fn pcg<T: Real>(a: &Csr<T>, b: &[T], inv_diag: &[T], tol: T, maxit: usize) -> Result<(Vec<T>, SolveInfo), SolverError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot_slices(&r, &z);
    let mut history = Vec::new();
    for it in 1..=maxit {
        a.matvec(&p, &mut ap);
        let pap = dot_slices(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolverError::Singular { pivot: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        history.push(rel.as_f64());
        if rel <= tol {
            let t = true_residual(a, &x, b);
            if t <= tol {
                return Ok((x, SolveInfo { iterations: it, residual: t.as_f64() }));
            }
            // recurrence drifted; restart from the current iterate
            let ax = a.apply(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot_slices(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged {
        iterations: maxit,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

pub(super) fn bicgstab<T: Real>(
    a: &Csr<T>,
    b: &[T],
    inv_diag: &[T],
    tol: T,
    maxit: usize,
) -> Result<(Vec<T>, SolveInfo), SolverError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut phat = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut shat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut history = Vec::new();
    for it in 1..=maxit {
        let rho_new = dot_slices(&r0, &r);
        if rho_new == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            phat[i] = p[i] * inv_diag[i];
        }
        a.matvec(&phat, &mut v);
        let r0v = dot_slices(&r0, &v);
        if r0v == T::zero() {
            break;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol {
            axpy(alpha, &phat, &mut x);
            let tr = true_residual(a, &x, b);
            history.push(tr.as_f64());
            if tr <= tol {
                return Ok((x, SolveInfo { iterations: it, residual: tr.as_f64() }));
            }
            r = b.iter().zip(a.apply(&x)).map(|(&bi, ai)| bi - ai).collect();
            continue;
        }
        for i in 0..n {
            shat[i] = s[i] * inv_diag[i];
        }
        a.matvec(&shat, &mut t);
        let tt = dot_slices(&t, &t);
        if tt == T::zero() {
            break;
        }
        omega = dot_slices(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm2(&r) / bnorm;
        history.push(rel.as_f64());
        if rel <= tol {
            let tr = true_residual(a, &x, b);
            if tr <= tol {
                return Ok((x, SolveInfo { iterations: it, residual: tr.as_f64() }));
            }
            r = b.iter().zip(a.apply(&x)).map(|(&bi, ai)| bi - ai).collect();
        }
        if omega == T::zero() {
            break;
        }
    }
    Err(SolverError::NotConverged {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
