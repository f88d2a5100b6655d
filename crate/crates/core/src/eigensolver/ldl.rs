//! Envelope (profile) LDLᵀ factorization of `A - sigma I` after a reverse
//! Cuthill-McKee reordering.
//!
//! The waveguide operators are long thin strips, so RCM level sets are arm
//! cross-sections and the envelope stays a few arm widths wide no matter how
//! long the arms are. No pivoting is done; the count of negative pivots gives
//! the inertia of `A - sigma I` (Sylvester), i.e. how many eigenvalues lie
//! below the shift.

use std::collections::VecDeque;

use crate::sparse::CsrMatrix;

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbors = Vec::new();

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node");
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            neighbors.clear();
            neighbors.extend(a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]));
            neighbors.sort_by_key(|&j| (degree[j], j));
            for &j in &neighbors {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// BFS level structure rooted at `root` within its component.
fn levels(a: &CsrMatrix, root: usize) -> Vec<Vec<usize>> {
    let n = a.dim();
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut current = vec![root];
    let mut out = Vec::new();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &v in &current {
            for (j, _) in a.row(v) {
                if !seen[j] {
                    seen[j] = true;
                    next.push(j);
                }
            }
        }
        out.push(current);
        current = next;
    }
    out
}

/// George-Liu search for a node of (nearly) maximal eccentricity.
fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let mut depth = levels(a, root).len();
    for _ in 0..16 {
        let lv = levels(a, root);
        let candidate = *lv
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&j| (degree[j], j))
            .unwrap();
        let d = levels(a, candidate).len();
        if d <= depth {
            break;
        }
        depth = d;
        root = candidate;
    }
    root
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyPivot {
    pub index: usize,
    pub pivot: f64,
}

/// Symbolic structure (ordering and envelope) reusable across shifts.
#[derive(Debug, Clone)]
pub struct EnvelopeStructure {
    perm: Vec<usize>,
    /// First stored column of each permuted row.
    first: Vec<usize>,
    /// Offset of row `i`'s envelope `first[i]..i` in the packed storage.
    start: Vec<usize>,
    /// Permuted lower triangle of `A`, packed like the factor.
    lower: Vec<f64>,
    diag: Vec<f64>,
    scale: f64,
}

impl EnvelopeStructure {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            first[new] = a.row(old).map(|(j, _)| inv[j]).filter(|&j| j <= new).min().unwrap_or(new);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i];
        }
        start.push(total);
        let mut lower = vec![0.0; total];
        let mut diag = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn < new {
                    lower[start[new] + jn - first[new]] = v;
                } else if jn == new {
                    diag[new] = v;
                }
            }
        }
        Self {
            perm,
            first,
            start,
            lower,
            diag,
            scale: a.norm_inf(),
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored sub-diagonal envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.dim()).map(|i| i - self.first[i]).max().unwrap_or(0)
    }

    /// Factors `A - shift I = L D Lᵀ` in the permuted ordering. A pivot below
    /// `1e-13 |A|` aborts the factorization.
    pub fn factor(&self, shift: f64) -> Result<LdlFactor<'_>, TinyPivot> {
        let n = self.dim();
        let mut l = self.lower.clone();
        let mut d = vec![0.0; n];
        // u[k] = l[i,k] * d[k] for the current row.
        let mut u: Vec<f64> = Vec::new();
        let tiny = 1e-13 * self.scale.max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            u.clear();
            u.resize(i - fi, 0.0);
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut t = l[si + j - fi];
                let row_i = &u[k0 - fi..j - fi];
                let row_j = &l[sj + k0 - fj..sj + j - fj];
                t -= row_i.iter().zip(row_j).map(|(a, b)| a * b).sum::<f64>();
                u[j - fi] = t;
                l[si + j - fi] = t / d[j];
            }
            let mut di = self.diag[i] - shift;
            for (k, &uk) in u.iter().enumerate() {
                di -= uk * l[si + k];
            }
            if !(di.abs() > tiny) {
                return Err(TinyPivot { index: i, pivot: di });
            }
            d[i] = di;
        }
        Ok(LdlFactor { structure: self, l, d })
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactor<'a> {
    structure: &'a EnvelopeStructure,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor<'_> {
    /// Number of negative pivots, which equals the number of eigenvalues of
    /// `A` below the shift.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    /// Solves `(A - shift I) x = b` in the original ordering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = self.structure;
        let n = s.dim();
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = s.first[i];
            let row = &self.l[s.start[i]..s.start[i + 1]];
            let acc: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] -= acc;
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for i in (0..n).rev() {
            let fi = s.first[i];
            let xi = y[i];
            let row = &self.l[s.start[i]..s.start[i + 1]];
            for (k, &lk) in row.iter().enumerate() {
                y[fi + k] -= lk * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian(w: usize, h: usize) -> CsrMatrix {
        let id = |x: usize, y: usize| y * w + x;
        let mut t = Vec::new();
        for y in 0..h {
            for x in 0..w {
                t.push((id(x, y), id(x, y), 4.0));
                if x + 1 < w {
                    t.push((id(x, y), id(x + 1, y), -1.0));
                    t.push((id(x + 1, y), id(x, y), -1.0));
                }
                if y + 1 < h {
                    t.push((id(x, y), id(x, y + 1), -1.0));
                    t.push((id(x, y + 1), id(x, y), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(w * h, &t)
    }

    #[test]
    fn rcm_is_a_permutation_with_narrow_band() {
        // Long strip stored in the "wrong" (row-major along the long side) order.
        let a = grid_laplacian(200, 6);
        let p = reverse_cuthill_mckee(&a);
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..a.dim()).collect::<Vec<_>>());
        let s = EnvelopeStructure::new(&a);
        assert!(s.bandwidth() <= 12, "bandwidth {}", s.bandwidth());
    }

    #[test]
    fn solve_matches_matvec() {
        let a = grid_laplacian(17, 9);
        let s = EnvelopeStructure::new(&a);
        let f = s.factor(0.3).unwrap();
        let x: Vec<f64> = (0..a.dim()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let mut b = a.mul_vec(&x);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi -= 0.3 * xi;
        }
        let y = f.solve(&b);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        // Eigenvalues of diag(1, 2, 3, 4, 5).
        let a = CsrMatrix::from_diagonal(&[3.0, 1.0, 5.0, 2.0, 4.0]);
        let s = EnvelopeStructure::new(&a);
        assert_eq!(s.factor(0.5).unwrap().negative_pivots(), 0);
        assert_eq!(s.factor(2.5).unwrap().negative_pivots(), 2);
        assert_eq!(s.factor(4.5).unwrap().negative_pivots(), 4);
        assert!(s.factor(3.0).is_err());
    }
}
