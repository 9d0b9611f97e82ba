use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &b) in self.off.iter().enumerate() {
            m[(i, i + 1)] = b;
            m[(i + 1, i)] = b;
        }
        m
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.to_dense());
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.len(), self.len(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Number of eigenvalues strictly below x (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// k-th smallest eigenvalue (0-based) by bisection.
    pub fn kth_eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..2100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Dominant |eigenvalue| of a symmetric operator by power iteration.
pub fn power_iteration<F: Fn(&[f64], &mut [f64])>(n: usize, apply: F, iters: usize) -> f64 {
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut y = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..iters {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        apply(&x, &mut y);
        est = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut y);
    }
    est
}

/// Least-squares line y = slope x + intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares coefficients for the given basis functions.
pub fn least_squares(rows: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let k = rows[0].len();
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-14).expect("svd solve with both factors");
    sol.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag { diag: vec![2.0; n], off: vec![-1.0; n - 1] }
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let (vals, _) = laplacian(n).eigen();
        for (k, v) in vals.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            assert_abs_diff_eq!(*v, 2.0 - 2.0 * theta.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn bisection_matches_dense() {
        let m = SymTridiag { diag: (0..40).map(|i| (i as f64 * 0.7).sin() + 3.0).collect(), off: (0..39).map(|i| 0.3 + 0.01 * i as f64).collect() };
        let (vals, _) = m.eigen();
        for k in [0, 1, 7, 39] {
            assert_abs_diff_eq!(m.kth_eigenvalue(k), vals[k], epsilon = 1e-12);
        }
        assert_eq!(m.count_below(vals[5] + 1e-9), 6);
    }

    #[test]
    fn matvec_and_power_iteration() {
        let m = laplacian(30);
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut y = vec![0.0; 30];
        m.matvec(&x, &mut y);
        let dense = m.to_dense() * nalgebra::DVector::from_vec(x);
        assert!(y.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let top = power_iteration(30, |x, out| m.matvec(x, out), 2000);
        assert_abs_diff_eq!(top, m.eigen().0[29], epsilon = 1e-6);
    }

    #[test]
    fn fits() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (slope, icpt) = linear_fit(&xs, &ys);
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(icpt, -1.0, epsilon = 1e-12);
        let rows: Vec<Vec<f64>> = xs.iter().map(|&a| vec![1.0, a, a * a]).collect();
        let q: Vec<f64> = xs.iter().map(|a| 0.5 + 0.25 * a + a * a).collect();
        let c = least_squares(&rows, &q);
        assert_abs_diff_eq!(c[2], 1.0, epsilon = 1e-10);
    }
}
