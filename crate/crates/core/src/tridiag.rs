//! Real symmetric tridiagonal matrices.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration with a partially pivoted LU factorization, and the full
//! spectrum (when needed) from the implicit QL algorithm. The QL routine can
//! rotate an arbitrary set of row vectors, so `Z^T v` is available in
//! `O(n^2)` without forming the eigenvector matrix.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TridiagError {
    /// QL did not deflate eigenvalue `index` within the iteration budget.
    QlNoConvergence { index: usize },
    /// Inverse iteration did not settle.
    InverseIteration,
}

#[derive(Debug, Clone, Copy)]
pub struct SymTridiagonal<'a> {
    diag: &'a [f64],
    off: &'a [f64],
}

impl<'a> SymTridiagonal<'a> {
    /// `off[i]` couples rows `i` and `i + 1`.
    pub fn new(diag: &'a [f64], off: &'a [f64]) -> Self {
        assert!(
            diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(),
            "off-diagonal length must be one less than the diagonal length"
        );
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        self.diag
    }

    pub fn off(&self) -> &[f64] {
        self.off
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let max_e2 = self.off.iter().map(|e| e * e).fold(1.0, f64::max);
        f64::MIN_POSITIVE * max_e2
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        self.count_below_with(x, pivmin)
    }

    fn count_below_with(&self, x: f64, pivmin: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).max(f64::MIN_POSITIVE);
        lo -= 2.0 * f64::EPSILON * width + f64::MIN_POSITIVE;
        hi += 2.0 * f64::EPSILON * width + f64::MIN_POSITIVE;
        let pivmin = self.pivmin();
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below_with(mid, pivmin) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        (0..k.min(self.len())).map(|i| self.eigenvalue(i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// LU factorization of `T - shift I` with partial pivoting.
    pub fn factor_shifted(&self, shift: f64) -> ShiftedLu {
        ShiftedLu::new(self, shift)
    }

    /// Unit eigenvector for an accurate eigenvalue `lambda`, sign fixed so
    /// the largest-magnitude component is positive.
    pub fn inverse_iteration(&self, lambda: f64) -> Result<Vec<f64>, TridiagError> {
        let n = self.len();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let lu = self.factor_shifted(lambda);
        // deterministic start with no special symmetry
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
        normalize(&mut x);
        for _ in 0..12 {
            let mut y = x.clone();
            lu.solve_in_place(&mut y);
            normalize(&mut y);
            fix_sign(&mut y);
            let change = y
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = y;
            if change <= 1e-14 {
                return Ok(x);
            }
        }
        // accept if the residual is at rounding level
        let scale = self.norm_bound();
        let r = self.matvec(&x);
        let res = r
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0, f64::max);
        if res <= 1e-10 * scale.max(1.0) {
            Ok(x)
        } else {
            Err(TridiagError::InverseIteration)
        }
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Eigenvalues in ascending order together with `Z^T v` for each `v` in
    /// `rows`, where the columns of `Z` are the eigenvectors.
    pub fn eigen_projected(&self, rows: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>), TridiagError> {
        let mut d = self.diag.to_vec();
        let mut e = self.off.to_vec();
        e.push(0.0);
        let mut z = rows.to_vec();
        implicit_ql(&mut d, &mut e, &mut z)?;

        let mut order: Vec<usize> = (0..d.len()).collect();
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
        let values = order.iter().map(|&i| d[i]).collect();
        let projected = z
            .iter()
            .map(|row| order.iter().map(|&i| row[i]).collect())
            .collect();
        Ok((values, projected))
    }

    /// Full eigendecomposition; `vectors[k]` is the unit eigenvector of
    /// `values[k]`. Cubic cost, intended for small matrices.
    pub fn eigen_full(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>), TridiagError> {
        let n = self.len();
        let identity: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let (values, rows) = self.eigen_projected(&identity)?;
        // rows[i][k] = Z[i][k]; transpose into per-eigenvector storage
        let vectors = (0..n)
            .map(|k| {
                let mut v: Vec<f64> = (0..n).map(|i| rows[i][k]).collect();
                fix_sign(&mut v);
                v
            })
            .collect();
        Ok((values, vectors))
    }
}

/// Implicit QL with Wilkinson-type shifts. `e[n-1]` must be 0 on entry.
/// Every row of `z` receives the same column rotations as the eigenvector
/// matrix.
fn implicit_ql(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) -> Result<(), TridiagError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(TridiagError::QlNoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Partially pivoted LU of a shifted symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct ShiftedLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(t: &SymTridiagonal<'_>, shift: f64) -> Self {
        let n = t.len();
        let mut d: Vec<f64> = t.diag.iter().map(|x| x - shift).collect();
        let mut dl = t.off.to_vec();
        let mut du = t.off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // exact zero pivots only occur for a shift sitting on an eigenvalue
        let tiny = f64::EPSILON * t.norm_bound().max(f64::MIN_POSITIVE);
        for p in d.iter_mut() {
            if *p == 0.0 {
                *p = tiny;
            }
        }
        ShiftedLu {
            d,
            dl,
            du,
            du2,
            swapped,
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Makes the largest-magnitude component positive (first one on ties).
pub fn fix_sign(x: &mut [f64]) {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    if x.get(best).is_some_and(|v| *v < 0.0) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};

    fn random_tridiag(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let d = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let e = (0..n.saturating_sub(1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (d, e)
    }

    fn dense(d: &[f64], e: &[f64]) -> DMatrix<f64> {
        let n = d.len();
        DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                d[i]
            } else if i + 1 == k {
                e[i]
            } else if k + 1 == i {
                e[k]
            } else {
                0.0
            }
        })
    }

    fn dense_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(dense(d, e)).eigenvalues.iter().cloned().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn bisection_matches_dense_solver() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4), (101, 5)] {
            let (d, e) = random_tridiag(n, seed);
            let t = SymTridiagonal::new(&d, &e);
            let reference = dense_eigenvalues(&d, &e);
            for (k, r) in reference.iter().enumerate() {
                assert!((t.eigenvalue(k) - r).abs() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn ql_matches_dense_solver() {
        let (d, e) = random_tridiag(60, 9);
        let t = SymTridiagonal::new(&d, &e);
        let (vals, vecs) = t.eigen_full().unwrap();
        let reference = dense_eigenvalues(&d, &e);
        for (a, b) in vals.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        for (lambda, v) in vals.iter().zip(&vecs) {
            let r = t.matvec(v);
            for (x, y) in r.iter().zip(v) {
                assert!((x - lambda * y).abs() < 1e-12);
            }
            assert!((dot(v, v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_equals_explicit_overlaps() {
        let (d, e) = random_tridiag(30, 21);
        let t = SymTridiagonal::new(&d, &e);
        let v: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let (vals, proj) = t.eigen_projected(&[v.clone()]).unwrap();
        let (vals2, vecs) = t.eigen_full().unwrap();
        assert_eq!(vals, vals2);
        for (k, z) in vecs.iter().enumerate() {
            assert!((proj[0][k].abs() - dot(z, &v).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvectors() {
        let (d, e) = random_tridiag(200, 33);
        let t = SymTridiagonal::new(&d, &e);
        for k in [0, 1, 57, 199] {
            let lambda = t.eigenvalue(k);
            let v = t.inverse_iteration(lambda).unwrap();
            let r = t.matvec(&v);
            let res = r.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            assert!(res < 1e-12, "k={k}: residual {res}");
            let big = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn lu_solve_matches_dense() {
        let (d, e) = random_tridiag(50, 41);
        let t = SymTridiagonal::new(&d, &e);
        let b: Vec<f64> = (0..50).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let shift = 0.37;
        let x = t.factor_shifted(shift).solve(&b);
        let tx = t.matvec(&x);
        for i in 0..50 {
            assert!((tx[i] - shift * x[i] - b[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn sturm_count_is_monotone() {
        let (d, e) = random_tridiag(80, 55);
        let t = SymTridiagonal::new(&d, &e);
        let (lo, hi) = t.gershgorin();
        assert_eq!(t.count_below(lo - 1.0), 0);
        assert_eq!(t.count_below(hi + 1.0), 80);
        let mut prev = 0;
        for k in 0..=100 {
            let x = lo + (hi - lo) * k as f64 / 100.0;
            let c = t.count_below(x);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn decoupled_blocks_handled() {
        // zero off-diagonal splits the matrix
        let d = [3.0, 1.0, 2.0, -1.0];
        let e = [0.5, 0.0, 0.25];
        let t = SymTridiagonal::new(&d, &e);
        let reference = dense_eigenvalues(&d, &e);
        let (vals, _) = t.eigen_full().unwrap();
        for k in 0..4 {
            assert!((t.eigenvalue(k) - reference[k]).abs() < 1e-14);
            assert!((vals[k] - reference[k]).abs() < 1e-14);
        }
    }
}
