use std::collections::VecDeque;

use super::SolverError;
use crate::scalar::{dot_slices, Real};
use crate::sparse::Csr;

/// Reverse Cuthill–McKee ordering of the (symmetrized) pattern; `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &Csr<T>) -> Vec<usize> {
    let n = a.nrows;
    let adj: Vec<&[u32]> = (0..n).map(|i| a.row(i).0).collect();
    let degree: Vec<usize> = adj.iter().map(|r| r.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    loop {
        let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) else {
            break;
        };
        let start = pseudo_peripheral(seed, &adj, &degree, &mut level);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().map(|&w| w as usize).filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adj: &[&[u32]], degree: &[usize], level: &mut [usize]) -> usize {
    let mut start = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let (far, d, touched) = bfs_levels(start, adj, level);
        let cand = far
            .into_iter()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(start);
        for v in touched {
            level[v] = usize::MAX;
        }
        if d <= depth {
            break;
        }
        depth = d;
        start = cand;
    }
    start
}

fn bfs_levels(start: usize, adj: &[&[u32]], level: &mut [usize]) -> (Vec<usize>, usize, Vec<usize>) {
    let mut touched = vec![start];
    level[start] = 0;
    let mut frontier = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in adj[v] {
                let w = w as usize;
                if level[w] == usize::MAX {
                    level[w] = depth + 1;
                    touched.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (frontier, depth, touched);
        }
        depth += 1;
        frontier = next;
    }
}

/// `P A P^T = L L^T` stored by rows over the lower envelope.
pub struct EnvelopeCholesky<T> {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<T>,
}

/// Row starts of the lower envelope of `P A P^T`.
fn envelope_firsts<T: Real>(a: &Csr<T>, perm: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let n = a.nrows;
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut first: Vec<usize> = (0..n).collect();
    for old in 0..n {
        let i = inv[old];
        for &c in a.row(old).0 {
            let j = inv[c as usize];
            if j < i {
                first[i] = first[i].min(j);
            } else if i < j {
                first[j] = first[j].min(i);
            }
        }
    }
    (inv, first)
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn factor(a: &Csr<T>) -> Result<Self, SolverError> {
        Self::factor_with(a, &[])
    }

    /// Factors with whichever of RCM and the candidate orderings
    /// (`perm[new] = old`) gives the smallest envelope.
    pub fn factor_with(a: &Csr<T>, candidates: &[Vec<usize>]) -> Result<Self, SolverError> {
        let n = a.nrows;
        let size = |f: &[usize]| f.iter().enumerate().map(|(i, &fi)| i - fi).sum::<usize>();
        let mut perm = reverse_cuthill_mckee(a);
        let (mut inv, mut first) = envelope_firsts(a, &perm);
        for cand in candidates.iter().filter(|c| is_permutation(c, n)) {
            let (ci, cf) = envelope_firsts(a, cand);
            log::debug!("candidate ordering envelope {} vs {}", size(&cf), size(&first));
            if size(&cf) < size(&first) {
                (perm, inv, first) = (cand.clone(), ci, cf);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut vals = vec![T::zero(); start[n]];
        for old in 0..n {
            let i = inv[old];
            let (c, v) = a.row(old);
            for (&cc, &x) in c.iter().zip(v) {
                let j = inv[cc as usize];
                if j <= i {
                    vals[start[i] + (j - first[i])] += x;
                }
            }
        }
        log::debug!("envelope cholesky: n = {n}, envelope = {}", start[n]);
        // Rows are factored in blocks: each finished row is streamed once per
        // block instead of once per row.
        const BLOCK: usize = 48;
        let mut b0 = 0;
        while b0 < n {
            let b1 = (b0 + BLOCK).min(n);
            let (done, block) = vals.split_at_mut(start[b0]);
            let block = &mut block[..start[b1] - start[b0]];
            let off = start[b0];
            let lowest = (b0..b1).map(|i| first[i]).min().unwrap_or(b0);
            for j in lowest..b0 {
                let fj = first[j];
                let row_j = &done[start[j]..start[j + 1]];
                let ljj = row_j[j - fj];
                for i in b0..b1 {
                    let fi = first[i];
                    if fi > j {
                        continue;
                    }
                    let row_i = &mut block[start[i] - off..start[i + 1] - off];
                    let lo = fi.max(fj);
                    let s = dot_slices(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
                    row_i[j - fi] = (row_i[j - fi] - s) / ljj;
                }
            }
            for i in b0..b1 {
                let fi = first[i];
                let (prev, rest) = block.split_at_mut(start[i] - off);
                let row_i = &mut rest[..i - fi + 1];
                for j in b0.max(fi)..i {
                    let fj = first[j];
                    let lo = fi.max(fj);
                    let row_j = &prev[start[j] - off..start[j + 1] - off];
                    let s = dot_slices(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
                    row_i[j - fi] = (row_i[j - fi] - s) / row_j[j - fj];
                }
                let d = row_i[i - fi] - dot_slices(&row_i[..i - fi], &row_i[..i - fi]);
                if !(d > T::zero()) {
                    return Err(SolverError::Singular { pivot: perm[i] });
                }
                row_i[i - fi] = d.sqrt();
            }
            b0 = b1;
        }
        Ok(Self { perm, first, start, vals })
    }

    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            let s = dot_slices(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, &l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
