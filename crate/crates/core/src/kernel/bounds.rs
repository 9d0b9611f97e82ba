//! Numerical checks of the on-diagonal, off-diagonal and long-time heat
//! kernel envelopes against the weight V.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::spectrum::KernelSpectrum;
use crate::linalg::linear_fit;
use crate::potentials::Potential;
use crate::spi::Weight;

fn weights_at_nodes(spectrum: &KernelSpectrum, potential: &Potential, weight: &Weight) -> Result<Vec<f64>> {
    spectrum.grid.points.iter().map(|&x| weight.value(potential, x)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OnDiagReport {
    pub p: f64,
    pub slope: f64,
    pub slope_tol: f64,
    /// sup_t m(t) t^p
    pub constant: f64,
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub excluded_times: Vec<f64>,
    pub pass: bool,
}

/// Fits log m(t) against log(1/t) with m(t) = sup_x p_t(x,x) / V(x)^2.
pub fn verify_ondiag(
    spectrum: &KernelSpectrum,
    potential: &Potential,
    weight: &Weight,
    p: f64,
    t_grid: &[f64],
    slope_tol: f64,
    exec: Execution,
) -> Result<OnDiagReport> {
    if t_grid.len() < 3 {
        return Err(Error::Input("on-diagonal fit needs at least 3 times".into()));
    }
    let v = weights_at_nodes(spectrum, potential, weight)?;
    let m: Vec<f64> = exec
        .map_slice(t_grid, |&t| -> Result<f64> {
            let d = spectrum.diagonal(t)?;
            Ok(d.iter().zip(&v).map(|(p, v)| p / (v * v)).fold(0.0, f64::max))
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let mut excluded = Vec::new();
    for &k in order.iter().take(2) {
        let table = spectrum.heat_kernel(t_grid[k])?;
        let n = spectrum.len();
        let resid = (0..n)
            .map(|i| ((0..n).map(|j| spectrum.mu[j] * table.values[(i, j)]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if resid > 1e-6 {
            excluded.push(k);
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..t_grid.len())
        .filter(|k| !excluded.contains(k))
        .map(|k| ((1.0 / t_grid[k]).ln(), m[k].ln()))
        .unzip();
    let (slope, _) = linear_fit(&xs, &ys);
    let constant = t_grid.iter().zip(&m).map(|(t, m)| m * t.powf(p)).fold(0.0, f64::max);
    Ok(OnDiagReport {
        p,
        slope,
        slope_tol,
        constant,
        times: t_grid.to_vec(),
        m,
        excluded_times: excluded.iter().map(|&k| t_grid[k]).collect(),
        pass: slope.is_finite() && slope <= p + slope_tol,
    })
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct OffDiagOptions {
    pub epsilon: f64,
    /// allow epsilon = 0, meaningful only for the Gaussian baseline
    pub ultracontractive_baseline: bool,
    /// cells whose Gaussian factor is below this are excluded
    pub gaussian_floor: f64,
    pub blowup_factor: f64,
    /// node stride for the sampled CSV rows
    pub sample_stride: usize,
}

impl Default for OffDiagOptions {
    fn default() -> Self {
        OffDiagOptions { epsilon: 0.5, ultracontractive_baseline: false, gaussian_floor: 1e-12, blowup_factor: 3.0, sample_stride: 10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelRow {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub p_t: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagReport {
    pub p: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// sup over pairs of the ratio, per time
    pub sup_ratio: Vec<f64>,
    pub sup_small_decade: f64,
    pub sup_rest: f64,
    pub blowup_factor: f64,
    pub excluded_cells: usize,
    pub total_cells: usize,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<KernelRow>,
}

/// ratio = p_t(x,y) / [t^{-p} V(x) V(y) e^{-|x-y|^2 / (4(1+eps) t)}]. Passes
/// when every ratio is finite and the sup over the smallest decade of t is
/// at most blowup_factor times the sup over the remaining times.
pub fn verify_offdiag(
    spectrum: &KernelSpectrum,
    potential: &Potential,
    weight: &Weight,
    p: f64,
    opts: &OffDiagOptions,
    t_grid: &[f64],
    exec: Execution,
) -> Result<OffDiagReport> {
    let eps = opts.epsilon;
    if eps < 0.0 || (eps == 0.0 && !opts.ultracontractive_baseline) {
        return Err(Error::Parameter(format!(
            "epsilon must be > 0 for non-ultracontractive kernels (0 only for the Gaussian baseline), got {eps}"
        )));
    }
    let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if t_grid.len() < 4 || t_max <= 10.0 * t_min {
        return Err(Error::Input("off-diagonal check needs at least 4 times spanning more than a decade".into()));
    }
    let v = weights_at_nodes(spectrum, potential, weight)?;
    let x = &spectrum.grid.points;
    let n = spectrum.len();
    let stride = opts.sample_stride.max(1);
    let per_t = exec.map_slice(t_grid, |&t| -> Result<(f64, usize, Vec<KernelRow>)> {
        let table = spectrum.heat_kernel(t)?;
        let tp = t.powf(-p);
        let mut sup = f64::NEG_INFINITY;
        let mut excluded = 0usize;
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let d = x[i] - x[j];
                let gauss = (-d * d / (4.0 * (1.0 + eps) * t)).exp();
                let env = tp * v[i] * v[j] * gauss;
                let pt = table.values[(i, j)];
                let keep = gauss >= opts.gaussian_floor;
                if keep {
                    sup = sup.max(pt / env);
                } else {
                    excluded += 1;
                }
                if i % stride == 0 && j % stride == 0 {
                    rows.push(KernelRow { x: x[i], y: x[j], t, p_t: pt, envelope: env, ratio: if keep { pt / env } else { f64::NAN } });
                }
            }
        }
        Ok((sup, excluded, rows))
    });
    let mut sup_ratio = Vec::new();
    let mut excluded_cells = 0;
    let mut rows = Vec::new();
    for r in per_t {
        let (s, e, rw) = r?;
        sup_ratio.push(s);
        excluded_cells += e;
        rows.extend(rw);
    }
    let decade = 10.0 * t_min;
    let mut small = f64::NEG_INFINITY;
    let mut rest = f64::NEG_INFINITY;
    for (&t, &s) in t_grid.iter().zip(&sup_ratio) {
        if t <= decade {
            small = small.max(s);
        } else {
            rest = rest.max(s);
        }
    }
    let finite = sup_ratio.iter().all(|s| s.is_finite());
    Ok(OffDiagReport {
        p,
        epsilon: eps,
        times: t_grid.to_vec(),
        sup_ratio,
        sup_small_decade: small,
        sup_rest: rest,
        blowup_factor: opts.blowup_factor,
        excluded_cells,
        total_cells: n * n * t_grid.len(),
        pass: finite && small <= opts.blowup_factor * rest,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LongTimeReport {
    pub times: Vec<f64>,
    /// sup |p_t - 1| / (V(x) V(y))
    pub deviation: Vec<f64>,
    pub fitted_times: Vec<f64>,
    pub k_hat: f64,
    pub lambda1: f64,
    pub min_fraction: f64,
    pub pass: bool,
}

pub fn verify_longtime(
    spectrum: &KernelSpectrum,
    potential: &Potential,
    weight: &Weight,
    t_grid: &[f64],
    min_fraction: f64,
    exec: Execution,
) -> Result<LongTimeReport> {
    if t_grid.iter().any(|&t| !(1.0..=20.0).contains(&t)) {
        return Err(Error::Input("long-time checks use times in [1, 20]".into()));
    }
    if t_grid.len() < 2 {
        return Err(Error::Input("long-time fit needs at least 2 times".into()));
    }
    let v = weights_at_nodes(spectrum, potential, weight)?;
    let n = spectrum.len();
    let deviation: Vec<f64> = exec
        .map_slice(t_grid, |&t| -> Result<f64> {
            let dev = spectrum.deviation_kernel(t)?;
            let mut sup: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sup = sup.max(dev.values[(i, j)].abs() / (v[i] * v[j]));
                }
            }
            Ok(sup)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&deviation)
        .take_while(|(_, &d)| d >= 1e-12)
        .map(|(&t, &d)| (t, d.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::Input("fewer than 2 long-time values above the 1e-12 floor".into()));
    }
    let (slope, _) = linear_fit(&xs, &ys);
    let k_hat = -slope;
    let lambda1 = spectrum.lambda1();
    Ok(LongTimeReport {
        times: t_grid.to_vec(),
        deviation,
        fitted_times: xs,
        k_hat,
        lambda1,
        min_fraction,
        pass: k_hat >= min_fraction * lambda1,
    })
}
