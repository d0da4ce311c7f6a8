use super::SolverError;
use crate::scalar::Real;
use crate::sparse::Csr;

/// Dense LU with partial pivoting, row-major storage.
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor(a: &Csr<T>) -> Result<Self, SolverError> {
        let n = a.nrows;
        let mut lu = vec![T::zero(); n * n];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                lu[i * n + j as usize] += x;
            }
        }
        let scale = lu.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -T::one()), |best, c| if c.1 > best.1 { c } else { best });
            if !(pv > scale * T::epsilon() * T::lit(n as f64)) {
                return Err(SolverError::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let krow = &head[k * n..];
            for i in 0..n - k - 1 {
                let row = &mut tail[i * n..(i + 1) * n];
                let f = row[k] / d;
                row[k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        row[j] -= f * krow[j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A x = b`, or `A^T x = b` when `transpose` is set.
    pub fn solve(&self, b: &[T], transpose: bool) -> Vec<T> {
        let n = self.n;
        let lu = &self.lu;
        if !transpose {
            let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
            for i in 0..n {
                let s: T = (0..i).map(|j| lu[i * n + j] * y[j]).sum();
                y[i] -= s;
            }
            for i in (0..n).rev() {
                let s: T = (i + 1..n).map(|j| lu[i * n + j] * y[j]).sum();
                y[i] = (y[i] - s) / lu[i * n + i];
            }
            y
        } else {
            // P A = L U  =>  A^T = U^T L^T P
            let mut z = b.to_vec();
            for i in 0..n {
                let s: T = (0..i).map(|j| lu[j * n + i] * z[j]).sum();
                z[i] = (z[i] - s) / lu[i * n + i];
            }
            for i in (0..n).rev() {
                let s: T = (i + 1..n).map(|j| lu[j * n + i] * z[j]).sum();
                z[i] -= s;
            }
            let mut x = vec![T::zero(); n];
            for (k, &p) in self.perm.iter().enumerate() {
                x[p] = z[k];
            }
            x
        }
    }
}
