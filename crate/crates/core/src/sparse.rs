//! Sparse symmetric matrices and an up-looking Cholesky
//! factorisation with nested-dissection ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix whose pattern is the union of the dense blocks
    /// `groups[k] x groups[k]`.
    pub fn from_blocks<'a>(n: usize, groups: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for g in groups {
            for &i in g {
                rows[i].extend_from_slice(g);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { nrows: n, ncols: n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet out of range");
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
            for &(j, v) in r.iter() {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn zero_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Position of entry `(i, j)` in `values`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` to an existing entry of the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self.position(i, j).expect("entry outside the sparsity pattern");
        self.values[p] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1]).map(|p| self.values[p] * x[self.col_idx[p]]).sum()
            })
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                m = m.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Rows and columns `keep` (ascending global ids), renumbered.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &g) in keep.iter().enumerate() {
            map[g] = k;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &g in keep {
            for p in self.row_ptr[g]..self.row_ptr[g + 1] {
                let c = map[self.col_idx[p]];
                if c != usize::MAX {
                    col_idx.push(c);
                    values.push(self.values[p]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: keep.len(), ncols: keep.len(), row_ptr, col_idx, values }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.col_idx[p])] += self.values[p];
            }
        }
        d
    }
}

/// Nested-dissection permutation `perm[new] = old` of a structurally
/// symmetric matrix. Separators are middle BFS level sets rooted at a
/// pseudo-peripheral node; parts of at most `LEAF` nodes are kept in BFS
/// order.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    const LEAF: usize = 64;
    let n = a.nrows;
    let adj = |v: usize| a.col_idx[a.row_ptr[v]..a.row_ptr[v + 1]].iter().copied().filter(move |&w| w != v);
    let mut part = vec![0usize; n];
    let mut level = vec![usize::MAX; n];
    let mut perm = vec![usize::MAX; n];
    let mut next_part = 1usize;

    // Work items: (part id, nodes, output slot start).
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..n).collect(), 0)];
    let bfs = |start: usize, id: usize, part: &[usize], level: &mut [usize], order: &mut Vec<usize>| {
        order.clear();
        let mut q = VecDeque::new();
        level[start] = 0;
        q.push_back(start);
        while let Some(v) = q.pop_front() {
            order.push(v);
            for w in adj(v) {
                if part[w] == id && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
    };
    let mut order = Vec::new();
    while let Some((id, nodes, slot)) = stack.pop() {
        if nodes.is_empty() {
            continue;
        }
        // Start from a minimum degree node and move to a pseudo-peripheral one.
        let mut start = *nodes.iter().min_by_key(|&&v| (adj(v).filter(|&w| part[w] == id).count(), v)).unwrap();
        let mut ecc = 0;
        for _ in 0..4 {
            bfs(start, id, &part, &mut level, &mut order);
            let last = *order.last().unwrap();
            let e = level[last];
            for &v in &order {
                level[v] = usize::MAX;
            }
            if e <= ecc && ecc > 0 {
                break;
            }
            ecc = e;
            start = last;
        }
        bfs(start, id, &part, &mut level, &mut order);
        if order.len() < nodes.len() {
            // Disconnected: split off the reached component.
            let reached: Vec<usize> = order.clone();
            for &v in &reached {
                level[v] = usize::MAX;
            }
            let a_id = next_part;
            let b_id = next_part + 1;
            next_part += 2;
            for &v in &reached {
                part[v] = a_id;
            }
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| part[v] == id).collect();
            for &v in &rest {
                part[v] = b_id;
            }
            let len_a = reached.len();
            stack.push((a_id, reached, slot));
            stack.push((b_id, rest, slot + len_a));
            continue;
        }
        if nodes.len() <= LEAF {
            for (k, &v) in order.iter().enumerate() {
                perm[slot + k] = v;
                level[v] = usize::MAX;
            }
            continue;
        }
        let max_level = level[*order.last().unwrap()];
        if max_level < 2 {
            for (k, &v) in order.iter().enumerate() {
                perm[slot + k] = v;
                level[v] = usize::MAX;
            }
            continue;
        }
        // Level whose cumulative count first reaches half the nodes.
        let mut counts = vec![0usize; max_level + 1];
        for &v in &order {
            counts[level[v]] += 1;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut sep = 1;
        for (l, c) in counts.iter().enumerate() {
            acc += c;
            if acc >= half {
                sep = l.clamp(1, max_level - 1);
                break;
            }
        }
        let a_id = next_part;
        let b_id = next_part + 1;
        next_part += 2;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut s = Vec::new();
        for &v in &order {
            let l = level[v];
            level[v] = usize::MAX;
            if l < sep {
                part[v] = a_id;
                lo.push(v);
            } else if l > sep {
                part[v] = b_id;
                hi.push(v);
            } else {
                part[v] = usize::MAX;
                s.push(v);
            }
        }
        let sep_slot = slot + lo.len() + hi.len();
        for (k, &v) in s.iter().enumerate() {
            perm[sep_slot + k] = v;
        }
        let len_lo = lo.len();
        stack.push((a_id, lo, slot));
        stack.push((b_id, hi, slot + len_lo));
    }
    debug_assert!(perm.iter().all(|&p| p != usize::MAX));
    perm
}

/// Symbolic Cholesky analysis: ordering, elimination tree and the column
/// structure of `L`, reusable for matrices with the same pattern.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    perm: Vec<usize>,
    parent: Vec<usize>,
    /// Upper triangle of `P A Pᵀ` by columns, as indices into the values of
    /// the original matrix.
    c_ptr: Vec<usize>,
    c_idx: Vec<usize>,
    c_src: Vec<usize>,
    l_ptr: Vec<usize>,
    pattern_hash: (usize, usize),
}

const NONE: usize = usize::MAX;

impl SymbolicCholesky {
    pub fn new(a: &CsrMatrix) -> Self {
        let perm = nested_dissection(a);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Self {
        let n = a.nrows;
        let mut pinv = vec![0; n];
        for (k, &o) in perm.iter().enumerate() {
            pinv[o] = k;
        }
        // Upper triangle of C = P A Pᵀ stored by columns. Row i of A in CSR is
        // column i of A, so column pinv[i] of C collects rows pinv[j] <= pinv[i].
        let mut counts = vec![0usize; n];
        for i in 0..n {
            let ci = pinv[i];
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                if pinv[a.col_idx[p]] <= ci {
                    counts[ci] += 1;
                }
            }
        }
        let mut c_ptr = vec![0; n + 1];
        for k in 0..n {
            c_ptr[k + 1] = c_ptr[k] + counts[k];
        }
        let mut fill = c_ptr.clone();
        let mut c_idx = vec![0; c_ptr[n]];
        let mut c_src = vec![0; c_ptr[n]];
        for i in 0..n {
            let ci = pinv[i];
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let r = pinv[a.col_idx[p]];
                if r <= ci {
                    c_idx[fill[ci]] = r;
                    c_src[fill[ci]] = p;
                    fill[ci] += 1;
                }
            }
        }
        // Elimination tree with path compression.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for p in c_ptr[k]..c_ptr[k + 1] {
                let mut i = c_idx[p];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                        break;
                    }
                    i = next;
                }
            }
        }
        // Column counts from the row patterns.
        let mut col_count = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0; n];
        for k in 0..n {
            let top = ereach(&c_ptr, &c_idx, &parent, k, &mut mark, &mut stack);
            for &i in &stack[top..] {
                col_count[i] += 1;
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + col_count[k];
        }
        Self { n, perm, parent, c_ptr, c_idx, c_src, l_ptr, pattern_hash: (a.nnz(), n) }
    }

    pub fn nnz_factor(&self) -> usize {
        self.l_ptr[self.n]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn factor(&self, a: &CsrMatrix) -> Result<CholeskyFactor> {
        assert_eq!((a.nnz(), a.nrows), self.pattern_hash, "pattern differs from the analysed matrix");
        let n = self.n;
        let nnz = self.l_ptr[n];
        let mut l_idx = vec![0usize; nnz];
        let mut l_val = vec![0.0; nnz];
        let mut next = self.l_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0; n];
        for k in 0..n {
            let top = ereach(&self.c_ptr, &self.c_idx, &self.parent, k, &mut mark, &mut stack);
            for p in self.c_ptr[k]..self.c_ptr[k + 1] {
                x[self.c_idx[p]] += a.values[self.c_src[p]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / l_val[self.l_ptr[i]];
                x[i] = 0.0;
                for p in self.l_ptr[i] + 1..next[i] {
                    x[l_idx[p]] -= l_val[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                l_idx[p] = k;
                l_val[p] = lki;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: self.perm[k], value: d });
            }
            let p = next[k];
            next[k] += 1;
            l_idx[p] = k;
            l_val[p] = d.sqrt();
        }
        Ok(CholeskyFactor { l_ptr: self.l_ptr.clone(), l_idx, l_val, perm: self.perm.clone() })
    }
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal) in
/// topological order, returned as `s[top..]`. `s` must have length `n`.
fn ereach(c_ptr: &[usize], c_idx: &[usize], parent: &[usize], k: usize, mark: &mut [usize], s: &mut [usize]) -> usize {
    let n = s.len();
    let mut top = n;
    mark[k] = k;
    for p in c_ptr[k]..c_ptr[k + 1] {
        let mut i = c_idx[p];
        if i >= k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            s[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            s[top] = s[len];
        }
    }
    top
}

/// `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    perm: Vec<usize>,
}

impl CholeskyFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let p0 = self.l_ptr[j];
            x[j] /= self.l_val[p0];
            let xj = x[j];
            for p in p0 + 1..self.l_ptr[j + 1] {
                x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let p0 = self.l_ptr[j];
            let mut s = x[j];
            for p in p0 + 1..self.l_ptr[j + 1] {
                s -= self.l_val[p] * x[self.l_idx[p]];
            }
            x[j] = s / self.l_val[p0];
        }
        let mut out = vec![0.0; n];
        for (k, &o) in self.perm.iter().enumerate() {
            out[o] = x[k];
        }
        out
    }
}

/// Relative residual `‖b - Ax‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = ax.iter().zip(b).map(|(u, v)| (v - u).abs()).fold(0.0, f64::max);
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let denom = a.norm_inf() * xn + bn;
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

/// Residual target of [`solve_with`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

/// Factor and solve with up to three steps of iterative refinement.
pub fn solve_with(symbolic: &SymbolicCholesky, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let f = symbolic.factor(a)?;
    let mut x = f.solve(b);
    let mut res = relative_residual(a, &x, b);
    for _ in 0..3 {
        if res <= RESIDUAL_TOLERANCE * 1e-2 {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let dx = f.solve(&r);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(u, v)| u + v).collect();
        let cres = relative_residual(a, &cand, b);
        if cres >= res {
            break;
        }
        x = cand;
        res = cres;
    }
    if res > RESIDUAL_TOLERANCE {
        return Err(Error::Residual { residual: res, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok(x)
}

/// Solves the symmetric positive definite system `A x = b`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_with(&SymbolicCholesky::new(a), a, b)
}
