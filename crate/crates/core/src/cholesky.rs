//! Sparse Cholesky factorization `P A P^T = L L^T` for symmetric positive
//! definite systems.
//!
//! Ordering is graph nested dissection with breadth-first level-set
//! separators; the numeric phase is an up-looking row-by-row factorization
//! driven by the elimination tree. Both phases are sequential and
//! deterministic, so the same matrix always produces bit-identical factors.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    NotSquare,
    /// Pivot of the given (original) row was not positive.
    NotPositiveDefinite(usize),
}

/// A computed factorization, reusable for any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    pub fn factor(a: &SparseOperator) -> Result<Self, FactorError> {
        if a.rows() != a.cols() {
            return Err(FactorError::NotSquare);
        }
        let n = a.rows();
        let perm = nested_dissection(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Upper triangle of the permuted matrix, column-compressed: column j
        // holds rows i <= j.
        let mut counts = vec![0usize; n + 1];
        for (r, c, _) in a.triplets() {
            let (i, j) = (inv[r], inv[c]);
            if i <= j {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let cp = counts.clone();
        let mut next = counts;
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![0.0; cp[n]];
        for (r, c, v) in a.triplets() {
            let (i, j) = (inv[r], inv[c]);
            if i <= j {
                let p = next[j];
                next[j] += 1;
                ci[p] = i;
                cx[p] = v;
            }
        }

        let parent = etree_upper(n, &cp, &ci);

        // Symbolic pass: count entries per column of L.
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut col_count = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                col_count[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + col_count[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);

        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut stack, &mut mark);
            x[k] = 0.0;
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] = cx[p];
            }
            let mut d = x[k];
            let akk = d;
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..fill[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = fill[i];
                fill[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            // A pivot that cancels to rounding level means a singular matrix.
            if !(d > 1e-13 * akk) || !d.is_finite() {
                return Err(FactorError::NotPositiveDefinite(perm[k]));
            }
            let p = fill[k];
            fill[k] += 1;
            row_idx[p] = k;
            values[p] = sqrt(d);
        }
        Ok(CholeskyFactor { n, perm, col_ptr, row_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for j in 0..self.n {
            let start = self.col_ptr[j];
            y[j] /= self.values[start];
            let yj = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        // L^T x = y
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut s = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[start];
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn etree_upper(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for p in cp[k]..cp[k + 1] {
            let mut i = ci[p];
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (excluding the diagonal), returned in
/// `stack[top..]` in topological order.
fn ereach(
    k: usize,
    cp: &[usize],
    ci: &[usize],
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    let mut path = Vec::new();
    for p in cp[k]..cp[k + 1] {
        let mut i = ci[p];
        if i > k {
            continue;
        }
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
            if i == usize::MAX {
                break;
            }
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

/// Fill-reducing ordering (`perm[new] = old`) of the adjacency graph of `a`.
pub fn nested_dissection(a: &SparseOperator) -> Vec<usize> {
    let n = a.rows();
    let mut adj_ptr = vec![0usize; n + 1];
    let mut adj = Vec::with_capacity(a.nnz());
    for r in 0..n {
        let (cols, _) = a.row(r);
        adj.extend(cols.iter().copied().filter(|&c| c != r && c < n));
        adj_ptr[r + 1] = adj.len();
    }
    let graph = Graph { ptr: adj_ptr, adj };
    let mut order = Vec::with_capacity(n);
    let mut state = NdState {
        stamp: vec![0u32; n],
        current: 0,
    };
    let all: Vec<usize> = (0..n).collect();
    dissect(&graph, all, &mut state, &mut order);
    debug_assert_eq!(order.len(), n);
    order
}

struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct NdState {
    stamp: Vec<u32>,
    current: u32,
}

const ND_LEAF: usize = 48;

fn dissect(g: &Graph, verts: Vec<usize>, st: &mut NdState, order: &mut Vec<usize>) {
    if verts.len() <= ND_LEAF {
        order.extend(verts);
        return;
    }
    st.current += 1;
    let member = st.current;
    for &v in &verts {
        st.stamp[v] = member;
    }
    // Split into connected components first.
    let mut components: Vec<Vec<usize>> = Vec::new();
    st.current += 1;
    let seen = st.current;
    for &v in &verts {
        if st.stamp[v] != member {
            continue;
        }
        let mut comp = vec![v];
        st.stamp[v] = seen;
        let mut head = 0;
        while head < comp.len() {
            let u = comp[head];
            head += 1;
            for &w in g.neighbors(u) {
                if st.stamp[w] == member {
                    st.stamp[w] = seen;
                    comp.push(w);
                }
            }
        }
        components.push(comp);
    }
    if components.len() > 1 {
        for comp in components {
            dissect(g, comp, st, order);
        }
        return;
    }
    let comp = components.pop().unwrap();
    if comp.len() <= ND_LEAF {
        order.extend(comp);
        return;
    }

    // Pseudo-peripheral start vertex: repeat BFS from the farthest vertex.
    let mut start = *comp.iter().min().unwrap();
    let mut levels = bfs_levels(g, &comp, start, st, seen);
    for _ in 0..4 {
        let far = *levels.last().unwrap().iter().min().unwrap();
        let next = bfs_levels(g, &comp, far, st, seen);
        if next.len() <= levels.len() {
            break;
        }
        start = far;
        levels = next;
    }
    let _ = start;
    if levels.len() < 3 {
        order.extend(comp);
        return;
    }
    let half = comp.len() / 2;
    let mut acc = 0;
    let mut mid = 1;
    for (l, lv) in levels.iter().enumerate() {
        acc += lv.len();
        if acc >= half {
            mid = l.clamp(1, levels.len() - 2);
            break;
        }
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (l, lv) in levels.iter().enumerate() {
        if l < mid {
            lower.extend_from_slice(lv);
        } else if l > mid {
            upper.extend_from_slice(lv);
        }
    }
    // Only separator vertices that actually touch the upper part are needed.
    let mut separator = Vec::new();
    st.current += 1;
    let up = st.current;
    for &v in &upper {
        st.stamp[v] = up;
    }
    for &v in &levels[mid] {
        if g.neighbors(v).iter().any(|&w| st.stamp[w] == up) {
            separator.push(v);
        } else {
            lower.push(v);
        }
    }
    lower.sort_unstable();
    upper.sort_unstable();
    dissect(g, lower, st, order);
    dissect(g, upper, st, order);
    order.extend(separator);
}

/// Level structure of the component whose vertices carry stamp `member`.
fn bfs_levels(
    g: &Graph,
    comp: &[usize],
    start: usize,
    st: &mut NdState,
    member: u32,
) -> Vec<Vec<usize>> {
    st.current += 1;
    let visit = st.current;
    let mut levels: Vec<Vec<usize>> = vec![vec![start]];
    st.stamp[start] = visit;
    let mut count = 1;
    loop {
        let mut next = Vec::new();
        for &u in levels.last().unwrap() {
            for &w in g.neighbors(u) {
                if st.stamp[w] == member {
                    st.stamp[w] = visit;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        count += next.len();
        levels.push(next);
    }
    debug_assert_eq!(count, comp.len());
    // Restore membership stamps for later passes.
    for &v in comp {
        st.stamp[v] = member;
    }
    levels
}
