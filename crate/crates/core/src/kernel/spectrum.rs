use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::Grid;
use crate::kernel::generator::DiscretizedGenerator;

/// Eigen-decomposition of the discretized generator. Eigenfunctions are
/// orthonormal in L^2(mu) and the kernel is a density with respect to mu.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    pub grid: Grid,
    pub mu: Vec<f64>,
    pub u: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// lambda_0 as computed, before the ground state is pinned
    pub raw_lambda0: f64,
    /// column k holds phi_k at the nodes
    pub phi: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelTable {
    pub t: f64,
    pub values: DMatrix<f64>,
}

pub fn spectrum(generator: &DiscretizedGenerator) -> KernelSpectrum {
    let n = generator.len();
    let (eigenvalues, mut v) = generator.symmetrized().eigen();
    let raw_lambda0 = eigenvalues[0];
    let sqrt_m: Vec<f64> = generator.mu.iter().map(|m| m.sqrt()).collect();
    for i in 0..n {
        v[(i, 0)] = sqrt_m[i];
    }
    for k in 1..n {
        let dot: f64 = (0..n).map(|i| v[(i, k)] * sqrt_m[i]).sum();
        for i in 0..n {
            v[(i, k)] -= dot * sqrt_m[i];
        }
        let norm = v.column(k).norm();
        let imax = v.column(k).iamax();
        let sign = if v[(imax, k)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            v[(i, k)] *= sign / norm;
        }
    }
    let phi = DMatrix::from_fn(n, n, |i, k| v[(i, k)] / sqrt_m[i]);
    let mut eigenvalues = eigenvalues;
    eigenvalues[0] = 0.0;
    KernelSpectrum { grid: generator.grid.clone(), mu: generator.mu.clone(), u: generator.u.clone(), eigenvalues, raw_lambda0, phi }
}

impl KernelSpectrum {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[1]
    }

    fn check_t(t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::Input(format!("kernel time must be > 0, got {t}")))
        }
    }

    /// sum over k >= first of e^{-lambda_k t} phi_k(x) phi_k(y), exactly symmetric.
    fn kernel_from(&self, t: f64, first: usize) -> DMatrix<f64> {
        let n = self.len();
        let b = DMatrix::from_fn(n, n - first, |i, k| {
            self.phi[(i, k + first)] * (-0.5 * self.eigenvalues[k + first] * t).exp()
        });
        let mut p = &b * b.transpose();
        for i in 0..n {
            for j in i + 1..n {
                p[(j, i)] = p[(i, j)];
            }
        }
        p
    }

    pub fn heat_kernel(&self, t: f64) -> Result<KernelTable> {
        Self::check_t(t)?;
        Ok(KernelTable { t, values: self.kernel_from(t, 0) })
    }

    /// p_t - 1, summed over the nonconstant modes to avoid cancellation.
    pub fn deviation_kernel(&self, t: f64) -> Result<KernelTable> {
        Self::check_t(t)?;
        Ok(KernelTable { t, values: self.kernel_from(t, 1) })
    }

    pub fn heat_kernels(&self, ts: &[f64], exec: Execution) -> Result<Vec<KernelTable>> {
        ts.iter().try_for_each(|&t| Self::check_t(t))?;
        Ok(exec.map_slice(ts, |&t| KernelTable { t, values: self.kernel_from(t, 0) }))
    }

    /// p_t(x_i, x_i) for every node.
    pub fn diagonal(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_t(t)?;
        let e: Vec<f64> = self.eigenvalues.iter().map(|l| (-l * t).exp()).collect();
        Ok((0..self.len())
            .map(|i| (0..self.len()).map(|k| e[k] * self.phi[(i, k)].powi(2)).sum())
            .collect())
    }

    /// p_t(x_i, .) at the nodes.
    pub fn row(&self, i: usize, t: f64) -> Result<Vec<f64>> {
        Self::check_t(t)?;
        let n = self.len();
        let c: Vec<f64> = (0..n).map(|k| (-self.eigenvalues[k] * t).exp() * self.phi[(i, k)]).collect();
        Ok((0..n).map(|j| (0..n).map(|k| c[k] * self.phi[(j, k)]).sum()).collect())
    }

    /// (P_t g)(x_i) for every node.
    pub fn apply_semigroup(&self, t: f64, g: &[f64]) -> Vec<f64> {
        let n = self.len();
        let c: Vec<f64> = (0..n)
            .map(|k| {
                let proj: f64 = (0..n).map(|j| self.mu[j] * self.phi[(j, k)] * g[j]).sum();
                (-self.eigenvalues[k] * t).exp() * proj
            })
            .collect();
        (0..n).map(|i| (0..n).map(|k| c[k] * self.phi[(i, k)]).sum()).collect()
    }

    pub fn invariants(&self, ts: &[f64], exec: Execution) -> Result<InvariantReport> {
        let n = self.len();
        let mut doubled: Vec<f64> = ts.iter().map(|t| 2.0 * t).collect();
        doubled.extend_from_slice(ts);
        let tables = self.heat_kernels(&doubled, exec)?;
        let (twice, once) = tables.split_at(ts.len());
        let mut rowsum: f64 = 0.0;
        let mut symmetry: f64 = 0.0;
        let mut ck: f64 = 0.0;
        for (p, p2) in once.iter().zip(twice) {
            for i in 0..n {
                let s: f64 = (0..n).map(|j| self.mu[j] * p.values[(i, j)]).sum();
                rowsum = rowsum.max((s - 1.0).abs());
                for j in 0..n {
                    symmetry = symmetry.max((p.values[(i, j)] - p.values[(j, i)]).abs());
                }
            }
            let scaled = DMatrix::from_fn(n, n, |i, j| p.values[(i, j)] * self.mu[j]);
            let composed = &scaled * &p.values;
            let scale = p2.values.amax();
            ck = ck.max((composed - &p2.values).amax() / scale);
        }
        let gram = self.phi.transpose() * DMatrix::from_fn(n, n, |i, k| self.mu[i] * self.phi[(i, k)]);
        let ortho = (gram - DMatrix::identity(n, n)).amax();
        Ok(InvariantReport {
            times: ts.to_vec(),
            row_stochasticity: rowsum,
            symmetry,
            chapman_kolmogorov: ck,
            orthonormality: ortho,
            lambda0: self.raw_lambda0.abs(),
            lambda1: self.lambda1(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub times: Vec<f64>,
    pub row_stochasticity: f64,
    pub symmetry: f64,
    /// relative to max p_{2t}
    pub chapman_kolmogorov: f64,
    pub orthonormality: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct InvariantTolerances {
    pub row_stochasticity: f64,
    pub chapman_kolmogorov: f64,
    pub orthonormality: f64,
    pub lambda0: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        InvariantTolerances { row_stochasticity: 1e-8, chapman_kolmogorov: 1e-8, orthonormality: 1e-10, lambda0: 1e-10 }
    }
}

impl InvariantReport {
    pub fn pass(&self, tol: &InvariantTolerances) -> bool {
        self.symmetry == 0.0
            && self.row_stochasticity <= tol.row_stochasticity
            && self.chapman_kolmogorov <= tol.chapman_kolmogorov
            && self.orthonormality <= tol.orthonormality
            && self.lambda0 <= tol.lambda0
            && self.lambda1 > 0.0
    }
}
