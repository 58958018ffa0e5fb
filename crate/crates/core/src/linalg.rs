//! Householder QR with column pivoting, and a thin QR that supports
//! appending and removing single columns.

use serde::{Deserialize, Serialize};

/// Relative threshold below which a pivoted column is treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Compact Householder QR of an `m × k` column-major panel.
///
/// `R` lives in the upper triangle of `a`, the essential parts of the
/// Householder vectors below it.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    m: usize,
    k: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn factor(panel: Vec<f64>, m: usize, k: usize, pivot: bool) -> Self {
        assert_eq!(panel.len(), m * k);
        let mut a = panel;
        let steps = m.min(k);
        let mut beta = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..k).collect();
        let mut norms: Vec<f64> = (0..k).map(|j| sq_norm(&a[j * m..(j + 1) * m])).collect();
        let max_norm = norms.iter().cloned().fold(0.0, f64::max).sqrt();
        let mut rank = 0;

        for s in 0..steps {
            if pivot {
                let (best, &bn) = norms[s..]
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1.total_cmp(y.1))
                    .map(|(i, v)| (i + s, v))
                    .unwrap();
                if bn.max(0.0).sqrt() <= RANK_TOL * max_norm.max(f64::MIN_POSITIVE) {
                    break;
                }
                if best != s {
                    swap_columns(&mut a, m, s, best);
                    norms.swap(s, best);
                    perm.swap(s, best);
                }
            }
            let col = &mut a[s * m..(s + 1) * m];
            let x = &mut col[s..];
            let alpha = sq_norm(x).sqrt();
            if alpha == 0.0 {
                if pivot {
                    break;
                }
                beta[s] = 0.0;
                continue;
            }
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            let v0 = x[0] + sign * alpha;
            // v = x + sign·α·e1, stored normalized so that v[0] = 1
            for xi in x[1..].iter_mut() {
                *xi /= v0;
            }
            let vtv = 1.0 + sq_norm(&x[1..]);
            beta[s] = 2.0 / vtv;
            x[0] = -sign * alpha;
            rank += 1;
            // apply H_s to the trailing columns
            let (head, tail) = a.split_at_mut((s + 1) * m);
            let v = &head[s * m + s..(s + 1) * m];
            for (c, col) in tail.chunks_mut(m).enumerate() {
                let dst = &mut col[s..];
                let mut d = dst[0];
                for (vi, di) in v[1..].iter().zip(&dst[1..]) {
                    d += vi * di;
                }
                d *= beta[s];
                dst[0] -= d;
                for (vi, di) in v[1..].iter().zip(dst[1..].iter_mut()) {
                    *di -= d * vi;
                }
                if pivot {
                    let jj = s + 1 + c;
                    norms[jj] = sq_norm(&col[s + 1..]);
                }
            }
        }
        if !pivot {
            rank = steps;
        }
        PivotedQr { m, k, a, beta, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column permutation: position `i` of the factor holds original column `perm()[i]`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Overwrite `v` (length m) with Qᵀv.
    pub fn apply_qt(&self, v: &mut [f64]) {
        assert_eq!(v.len(), self.m);
        for s in 0..self.beta.len() {
            if self.beta[s] == 0.0 {
                continue;
            }
            let h = &self.a[s * self.m + s..(s + 1) * self.m];
            let dst = &mut v[s..];
            let mut d = dst[0];
            for (hi, di) in h[1..].iter().zip(&dst[1..]) {
                d += hi * di;
            }
            d *= self.beta[s];
            dst[0] -= d;
            for (hi, di) in h[1..].iter().zip(dst[1..].iter_mut()) {
                *di -= d * hi;
            }
        }
    }

    /// Diagonal of R for the first `rank` pivots.
    pub fn r_diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.rank).map(move |s| self.a[s * self.m + s])
    }

    /// Squared length of the projection of `v` onto the column space.
    pub fn projection_sq(&self, v: &[f64]) -> f64 {
        let mut w = v.to_vec();
        self.apply_qt(&mut w);
        sq_norm(&w[..self.rank])
    }

    pub fn cols(&self) -> usize {
        self.k
    }
}

/// Thin QR `X = Q R` with explicit orthonormal `Q` (n × k) and upper-triangular `R` (k × k).
/// Only full-column-rank panels are represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinQr {
    n: usize,
    k: usize,
    q: Vec<f64>,
    r: Vec<f64>,
}

impl ThinQr {
    pub fn empty(n: usize) -> Self {
        ThinQr { n, k: 0, q: Vec::new(), r: Vec::new() }
    }

    /// Factor by repeated appends; `None` if a column is numerically dependent.
    pub fn from_columns<'a>(n: usize, cols: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut qr = ThinQr::empty(n);
        for c in cols {
            if !qr.append_column(c) {
                return None;
            }
        }
        Some(qr)
    }

    pub fn cols(&self) -> usize {
        self.k
    }

    /// Append a column at the right end. Returns false (leaving `self`
    /// unchanged) when the column lies in the current span.
    pub fn append_column(&mut self, col: &[f64]) -> bool {
        assert_eq!(col.len(), self.n);
        let n = self.n;
        let k = self.k;
        if k >= n {
            return false;
        }
        let mut w = col.to_vec();
        let mut coeff = vec![0.0; k];
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for (i, c) in coeff.iter_mut().enumerate() {
                let qi = &self.q[i * n..(i + 1) * n];
                let d = dot(qi, &w);
                *c += d;
                for (wv, qv) in w.iter_mut().zip(qi) {
                    *wv -= d * qv;
                }
            }
        }
        let rho = sq_norm(&w).sqrt();
        let cn = sq_norm(col).sqrt();
        if rho <= RANK_TOL * cn.max(f64::MIN_POSITIVE) || rho == 0.0 {
            return false;
        }
        w.iter_mut().for_each(|v| *v /= rho);
        self.q.extend_from_slice(&w);
        // grow R from k×k to (k+1)×(k+1), column-major
        let mut r = vec![0.0; (k + 1) * (k + 1)];
        for j in 0..k {
            for i in 0..=j {
                r[j * (k + 1) + i] = self.r[j * k + i];
            }
        }
        for i in 0..k {
            r[k * (k + 1) + i] = coeff[i];
        }
        r[k * (k + 1) + k] = rho;
        self.r = r;
        self.k = k + 1;
        true
    }

    /// Remove column `j` and restore triangularity with Givens rotations.
    pub fn remove_column(&mut self, j: usize) {
        let (n, k) = (self.n, self.k);
        assert!(j < k);
        // drop column j of R: R' is k × (k-1) upper Hessenberg
        let mut r: Vec<f64> = Vec::with_capacity(k * (k - 1));
        for c in (0..k).filter(|&c| c != j) {
            r.extend_from_slice(&self.r[c * k..(c + 1) * k]);
        }
        let km = k - 1;
        for c in j..km {
            // annihilate r[c+1, c]
            let a = r[c * k + c];
            let b = r[c * k + c + 1];
            let h = a.hypot(b);
            if h == 0.0 {
                continue;
            }
            let (cs, sn) = (a / h, b / h);
            for cc in c..km {
                let x = r[cc * k + c];
                let y = r[cc * k + c + 1];
                r[cc * k + c] = cs * x + sn * y;
                r[cc * k + c + 1] = -sn * x + cs * y;
            }
            let (qa, qb) = self.q.split_at_mut((c + 1) * n);
            let qc = &mut qa[c * n..];
            let qd = &mut qb[..n];
            for (x, y) in qc.iter_mut().zip(qd.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = cs * u + sn * v;
                *y = -sn * u + cs * v;
            }
        }
        // keep the leading (k-1)×(k-1) block and the first k-1 columns of Q
        let mut rr = vec![0.0; km * km];
        for c in 0..km {
            for i in 0..=c {
                rr[c * km + i] = r[c * k + i];
            }
        }
        self.r = rr;
        self.q.truncate(km * n);
        self.k = km;
    }

    /// ‖Qᵀv‖².
    pub fn projection_sq(&self, v: &[f64]) -> f64 {
        self.q.chunks(self.n).map(|qi| dot(qi, v).powi(2)).sum()
    }

    pub fn r_diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k).map(move |i| self.r[i * self.k + i])
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// In-place lower Cholesky factor of a symmetric `k × k` column-major matrix.
/// Returns false if the matrix is not numerically positive definite.
pub fn cholesky(a: &mut [f64], k: usize) -> bool {
    for j in 0..k {
        let mut d = a[j * k + j];
        for s in 0..j {
            d -= a[s * k + j] * a[s * k + j];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut v = a[j * k + i];
            for s in 0..j {
                v -= a[s * k + i] * a[s * k + j];
            }
            a[j * k + i] = v / d;
        }
        for i in 0..j {
            a[j * k + i] = 0.0;
        }
    }
    true
}

/// Solve `L Lᵀ x = b` given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut v = b[i];
        for s in 0..i {
            v -= l[s * k + i] * b[s];
        }
        b[i] = v / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut v = b[i];
        for s in i + 1..k {
            v -= l[i * k + s] * b[s];
        }
        b[i] = v / l[i * k + i];
    }
}

pub fn cholesky_log_det(l: &[f64], k: usize) -> f64 {
    (0..k).map(|i| 2.0 * l[i * k + i].ln()).sum()
}

fn swap_columns(a: &mut [f64], m: usize, i: usize, j: usize) {
    let (lo, hi) = (i.min(j), i.max(j));
    let (first, second) = a.split_at_mut(hi * m);
    first[lo * m..(lo + 1) * m].swap_with_slice(&mut second[..m]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_panel(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<f64> {
        (0..m * k).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    /// Q R P^T reconstructs the panel.
    #[test]
    fn pivoted_qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k) = (9, 4);
        let panel = random_panel(&mut rng, m, k);
        let qr = PivotedQr::factor(panel.clone(), m, k, true);
        assert_eq!(qr.rank(), 4);
        // project each original column: it lies in the span, so projection = norm
        for j in 0..k {
            let col = &panel[j * m..(j + 1) * m];
            let proj = qr.projection_sq(col);
            assert!((proj - sq_norm(col)).abs() < 1e-12);
        }
        // |det(XᵀX)| equals the product of squared diagonals
        let prod: f64 = qr.r_diag().map(|d| d * d).product();
        let g = gram(&panel, m, k);
        assert!((prod - det(&g, k)).abs() < 1e-10 * prod.max(1.0));
    }

    #[test]
    fn rank_deficient_panel_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, k) = (8, 3);
        let mut panel = random_panel(&mut rng, m, k);
        for i in 0..m {
            panel[2 * m + i] = panel[i] - 2.0 * panel[m + i];
        }
        let qr = PivotedQr::factor(panel, m, k, true);
        assert_eq!(qr.rank(), 2);
    }

    #[test]
    fn thin_qr_updates_match_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let cols: Vec<Vec<f64>> = (0..8).map(|_| random_panel(&mut rng, n, 1)).collect();
        let y = random_panel(&mut rng, n, 1);
        let mut qr = ThinQr::from_columns(n, cols.iter().map(|c| c.as_slice())).unwrap();
        qr.remove_column(3);
        qr.remove_column(0);
        let kept: Vec<&[f64]> =
            [1, 2, 4, 5, 6, 7].iter().map(|&i| cols[i].as_slice()).collect();
        let fresh = ThinQr::from_columns(n, kept.iter().copied()).unwrap();
        assert!((qr.projection_sq(&y) - fresh.projection_sq(&y)).abs() < 1e-12);
        let d1: f64 = qr.r_diag().map(|d| d.abs().ln()).sum();
        let d2: f64 = fresh.r_diag().map(|d| d.abs().ln()).sum();
        assert!((d1 - d2).abs() < 1e-12);
        assert!(qr.append_column(&cols[0]));
        let mut panel = Vec::new();
        for c in kept.iter().copied().chain(std::iter::once(cols[0].as_slice())) {
            panel.extend_from_slice(c);
        }
        let house = PivotedQr::factor(panel, n, 7, true);
        assert!((qr.projection_sq(&y) - house.projection_sq(&y)).abs() < 1e-12);
        // a dependent column is refused
        let dep: Vec<f64> = cols[1].iter().zip(&cols[2]).map(|(a, b)| a + b).collect();
        assert!(!qr.append_column(&dep));
        assert_eq!(qr.cols(), 7);
    }

    fn gram(panel: &[f64], m: usize, k: usize) -> Vec<f64> {
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                g[i * k + j] = dot(&panel[i * m..(i + 1) * m], &panel[j * m..(j + 1) * m]);
            }
        }
        g
    }

    #[test]
    fn cholesky_solves_and_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, k) = (12, 4);
        let panel = random_panel(&mut rng, m, k);
        let g = gram(&panel, m, k);
        let mut l = g.clone();
        assert!(cholesky(&mut l, k));
        assert!((cholesky_log_det(&l, k) - det(&g, k).ln()).abs() < 1e-10);
        let b: Vec<f64> = (0..k).map(|i| i as f64 - 1.5).collect();
        let mut x = b.clone();
        cholesky_solve(&l, k, &mut x);
        for i in 0..k {
            let gx: f64 = (0..k).map(|j| g[j * k + i] * x[j]).sum();
            assert!((gx - b[i]).abs() < 1e-10);
        }
        let mut neg = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky(&mut neg, 2));
    }

    fn det(a: &[f64], k: usize) -> f64 {
        let mut a = a.to_vec();
        let mut d = 1.0;
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| a[i * k + c].abs().total_cmp(&a[j * k + c].abs())).unwrap();
            if p != c {
                for j in 0..k {
                    a.swap(c * k + j, p * k + j);
                }
                d = -d;
            }
            d *= a[c * k + c];
            for i in c + 1..k {
                let f = a[i * k + c] / a[c * k + c];
                for j in c..k {
                    a[i * k + j] -= f * a[c * k + j];
                }
            }
        }
        d
    }
}
