//! Block (3x3) and scalar compressed-row matrices.

use crate::scalar::Real;

pub type Block<T> = [[T; 3]; 3];

pub fn zero_block<T: Real>() -> Block<T> {
    [[T::zero(); 3]; 3]
}

/// Block-row compressed matrix over points/nodes with three dofs each.
#[derive(Debug, Clone)]
pub struct BlockCsr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub blocks: Vec<Block<T>>,
    /// Set by [`BlockCsr::check_symmetry`].
    pub symmetric: bool,
}

/// Spec-facing name of the assembled operator type.
pub type SparseOperator<T> = BlockCsr<T>;

impl<T: Real> BlockCsr<T> {
    /// Builds from per-row lists; each list must be sorted by column with unique columns.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, Block<T>)>>) -> Self {
        let nrows = rows.len();
        let mut ptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(|r| r.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut blocks = Vec::with_capacity(nnz);
        ptr.push(0);
        for r in rows {
            for (c, b) in r {
                cols.push(c);
                blocks.push(b);
            }
            ptr.push(cols.len());
        }
        Self { nrows, ncols, ptr, cols, blocks, symmetric: false }
    }

    pub fn dim(&self) -> usize {
        3 * self.nrows
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[Block<T>]) {
        let r = self.ptr[i]..self.ptr[i + 1];
        (&self.cols[r.clone()], &self.blocks[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Block<T>> {
        let (c, b) = self.row(i);
        c.binary_search(&(j as u32)).ok().map(|k| &b[k])
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), 3 * self.ncols);
        assert_eq!(y.len(), 3 * self.nrows);
        for i in 0..self.nrows {
            let mut acc = [T::zero(); 3];
            let (c, b) = self.row(i);
            for (&j, blk) in c.iter().zip(b) {
                let j = 3 * j as usize;
                for r in 0..3 {
                    acc[r] += blk[r][0] * x[j] + blk[r][1] * x[j + 1] + blk[r][2] * x[j + 2];
                }
            }
            y[3 * i..3 * i + 3].copy_from_slice(&acc);
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); 3 * self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn max_abs(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.iter().flatten())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Sum of the blocks in row `i`.
    pub fn row_sum(&self, i: usize) -> Block<T> {
        let mut s = zero_block();
        for b in self.row(i).1 {
            for r in 0..3 {
                for c in 0..3 {
                    s[r][c] += b[r][c];
                }
            }
        }
        s
    }

    /// `max |A - A^T| / max |A|`, infinite when the block pattern is not symmetric.
    pub fn asymmetry(&self) -> T {
        if self.nrows != self.ncols {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.nrows {
            let (c, b) = self.row(i);
            for (&j, blk) in c.iter().zip(b) {
                let Some(t) = self.get(j as usize, i) else {
                    if blk.iter().flatten().any(|v| *v != T::zero()) {
                        return T::infinity();
                    }
                    continue;
                };
                for r in 0..3 {
                    for s in 0..3 {
                        worst = worst.max((blk[r][s] - t[s][r]).abs());
                    }
                }
            }
        }
        let scale = self.max_abs();
        if scale == T::zero() {
            T::zero()
        } else {
            worst / scale
        }
    }

    /// Sets and returns the symmetry flag using the relative tolerance `tol`.
    pub fn check_symmetry(&mut self, tol: T) -> bool {
        self.symmetric = self.asymmetry() <= tol;
        self.symmetric
    }

    pub fn to_csr(&self) -> Csr<T> {
        let mut ptr = Vec::with_capacity(3 * self.nrows + 1);
        let mut cols = Vec::with_capacity(9 * self.nnz_blocks());
        let mut vals = Vec::with_capacity(9 * self.nnz_blocks());
        ptr.push(0);
        for i in 0..self.nrows {
            let (c, b) = self.row(i);
            for r in 0..3 {
                for (&j, blk) in c.iter().zip(b) {
                    for s in 0..3 {
                        cols.push(3 * j + s as u32);
                        vals.push(blk[r][s]);
                    }
                }
                ptr.push(cols.len());
            }
        }
        Csr {
            nrows: 3 * self.nrows,
            ncols: 3 * self.ncols,
            ptr,
            cols,
            vals,
            symmetric: self.symmetric,
        }
    }
}

/// Scalar compressed-row matrix.
#[derive(Debug, Clone)]
pub struct Csr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<T>,
    pub symmetric: bool,
}

impl<T: Real> Csr<T> {
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, T)>) -> Self {
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut ptr = vec![0usize; nrows + 1];
        let mut cols: Vec<u32> = Vec::with_capacity(t.len());
        let mut vals: Vec<T> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            assert!(i < nrows && j < ncols, "triplet out of range");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            cols.push(j as u32);
            vals.push(v);
            ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            ptr[i + 1] += ptr[i];
        }
        Self { nrows, ncols, ptr, cols, vals, symmetric: false }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one())).collect())
    }

    pub fn from_dense(a: &[Vec<T>]) -> Self {
        let n = a.len();
        let m = a.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, m, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for k in self.ptr[i]..self.ptr[i + 1] {
                d[i][self.cols[k] as usize] += self.vals[k];
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.ptr[i]..self.ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j as usize]).sum();
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `y = A^T x`
    pub fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                y[j as usize] += a * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let k = next[j as usize];
                cols[k] = i as u32;
                vals[k] = a;
                next[j as usize] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            ptr: counts,
            cols,
            vals,
            symmetric: self.symmetric,
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .find(|(&j, _)| j as usize == i)
                    .map_or(T::zero(), |(_, &a)| a)
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> T {
        if self.nrows != self.ncols {
            return T::infinity();
        }
        let t = self.transpose();
        let mut worst = T::zero();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (a, b) = match (ca.get(p), cb.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        (va[p - 1], vb[q - 1])
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        (va[p - 1], T::zero())
                    }
                    (Some(_), None) => {
                        p += 1;
                        (va[p - 1], T::zero())
                    }
                    _ => {
                        q += 1;
                        (T::zero(), vb[q - 1])
                    }
                };
                worst = worst.max((a - b).abs());
            }
        }
        let scale = self.max_abs();
        if scale == T::zero() {
            T::zero()
        } else {
            worst / scale
        }
    }

    pub fn check_symmetry(&mut self, tol: T) -> bool {
        self.symmetric = self.asymmetry() <= tol;
        self.symmetric
    }
}

/// Which block of a partition a dof belongs to, with its index inside that block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub part: u8,
    pub index: u32,
}

/// Splits the rows listed in `rows` (global scalar dofs) into one matrix per column part.
pub fn split_columns<T: Real>(a: &BlockCsr<T>, rows: &[usize], slots: &[Slot], part_sizes: &[usize]) -> Vec<Csr<T>> {
    let nparts = part_sizes.len();
    let mut ptrs: Vec<Vec<usize>> = vec![vec![0]; nparts];
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); nparts];
    let mut vals: Vec<Vec<T>> = vec![Vec::new(); nparts];
    let mut scratch: Vec<(u32, T)> = Vec::new();
    for &dof in rows {
        let (bi, r) = (dof / 3, dof % 3);
        let (c, b) = a.row(bi);
        for p in 0..nparts {
            scratch.clear();
            for (&j, blk) in c.iter().zip(b) {
                for s in 0..3 {
                    let slot = slots[3 * j as usize + s];
                    if slot.part as usize == p && blk[r][s] != T::zero() {
                        scratch.push((slot.index, blk[r][s]));
                    }
                }
            }
            scratch.sort_by_key(|e| e.0);
            for &(j, v) in scratch.iter() {
                cols[p].push(j);
                vals[p].push(v);
            }
            ptrs[p].push(cols[p].len());
        }
    }
    (0..nparts)
        .map(|p| Csr {
            nrows: rows.len(),
            ncols: part_sizes[p],
            ptr: std::mem::take(&mut ptrs[p]),
            cols: std::mem::take(&mut cols[p]),
            vals: std::mem::take(&mut vals[p]),
            symmetric: false,
        })
        .collect()
}
