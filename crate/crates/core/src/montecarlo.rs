//! Euler-Maruyama simulation of dX = -U'(X) dt + sqrt(2) dB and kernel
//! density comparison against the spectral kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::KernelSpectrum;
use crate::potentials::Potential;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub x0: f64,
    pub seed: u64,
    /// half width of the kernel box; paths reflect at 10x this
    pub box_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub n_paths: usize,
    pub steps: usize,
    pub reflected_paths: usize,
    pub reflect_at: f64,
    pub warnings: Vec<String>,
}

impl SimConfig {
    fn validate(&self, potential: &Potential) -> Result<Vec<String>> {
        if self.n_paths == 0 {
            return Err(Error::Sim("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0 && self.box_radius > 0.0) {
            return Err(Error::Sim(format!(
                "need dt > 0, t_final >= 0, box_radius > 0 (got {}, {}, {})",
                self.dt, self.t_final, self.box_radius
            )));
        }
        let mut warnings = Vec::new();
        let r = self.box_radius;
        let sup_upp = (0..=400)
            .map(|i| potential.eval1(-r + 2.0 * r * i as f64 / 400.0).map(|v| v.2.abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if sup_upp > 0.0 && self.dt > 0.01 / sup_upp {
            let msg = format!("dt = {} exceeds 0.01 / sup|U''| = {:.3e} on the box", self.dt, 0.01 / sup_upp);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }

    fn reflect_at(&self, potential: &Potential) -> f64 {
        potential.support().unwrap_or(10.0 * self.box_radius)
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64 + 1);
    rng
}

/// Paths started at x0.
pub fn simulate(potential: &Potential, cfg: &SimConfig, exec: Execution) -> Result<SimResult> {
    let init = vec![cfg.x0; cfg.n_paths];
    simulate_from(potential, &init, cfg, exec)
}

/// One path per initial state; chunk c of CHUNK paths uses stream c of the
/// seed, so results do not depend on the execution policy.
pub fn simulate_from(potential: &Potential, initial: &[f64], cfg: &SimConfig, exec: Execution) -> Result<SimResult> {
    let cfg = SimConfig { n_paths: initial.len(), ..*cfg };
    let warnings = cfg.validate(potential)?;
    if potential.dim() != 1 {
        return Err(Error::Sim("simulation is one dimensional".into()));
    }
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let dt = if steps > 0 { cfg.t_final / steps as f64 } else { 0.0 };
    let noise = (2.0 * dt).sqrt();
    let wall = cfg.reflect_at(potential);
    let n_chunks = initial.len().div_ceil(CHUNK);
    let chunks = exec.map_range(n_chunks, |c| -> Result<(Vec<f64>, usize)> {
        let mut rng = chunk_rng(cfg.seed, c);
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(initial.len());
        let mut out = Vec::with_capacity(hi - lo);
        let mut reflected = 0;
        for &start in &initial[lo..hi] {
            let mut x = start;
            let mut hit = false;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                x += -potential.drift1(x) * dt + noise * z;
                if x.abs() > wall {
                    hit = true;
                    x = (x.signum() * 2.0 * wall - x).clamp(-wall, wall);
                }
                if !x.is_finite() {
                    return Err(Error::Sim(format!("path diverged from x0 = {start}")));
                }
            }
            reflected += hit as usize;
            out.push(x);
        }
        Ok((out, reflected))
    });
    let mut samples = Vec::with_capacity(initial.len());
    let mut reflected_paths = 0;
    for c in chunks {
        let (s, r) = c?;
        samples.extend(s);
        reflected_paths += r;
    }
    if reflected_paths as f64 > 1e-3 * initial.len() as f64 {
        return Err(Error::Sim(format!(
            "{reflected_paths} of {} paths reached the reflecting wall at {wall}",
            initial.len()
        )));
    }
    Ok(SimResult { samples, n_paths: initial.len(), steps, reflected_paths, reflect_at: wall, warnings })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityComparison {
    pub t: f64,
    pub x0: f64,
    pub n: usize,
    pub bandwidth: f64,
    pub l1: f64,
    #[serde(skip)]
    pub kde: Vec<f64>,
    #[serde(skip)]
    pub spectral: Vec<f64>,
}

/// 0.9 min(sd, IQR / 1.34) n^{-1/5}
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Bandwidth(format!("need at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        if i + 1 < n {
            sorted[i] * (1.0 - f) + sorted[i + 1] * f
        } else {
            sorted[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * (n as f64).powf(-0.2);
    if !(bw > 0.0 && bw.is_finite()) {
        return Err(Error::Bandwidth(format!("bandwidth is {bw} (sd = {sd}, iqr = {iqr})")));
    }
    Ok(bw)
}

/// Gaussian KDE at the given points; samples beyond 8 bandwidths are skipped.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, at: &[f64], exec: Execution) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    exec.map_slice(at, |&y| {
        let lo = sorted.partition_point(|&s| s < y - 8.0 * bandwidth);
        let hi = sorted.partition_point(|&s| s <= y + 8.0 * bandwidth);
        let sum: f64 = sorted[lo..hi].iter().map(|&s| (-0.5 * ((y - s) / bandwidth).powi(2)).exp()).sum();
        sum * norm
    })
}

/// L^1(mu) distance between the KDE (divided by the density of mu) and
/// p_t(x0, .), with the kernel row interpolated linearly in x0.
pub fn compare_density(samples: &[f64], spectrum: &KernelSpectrum, t: f64, x0: f64, exec: Execution) -> Result<DensityComparison> {
    let bandwidth = silverman_bandwidth(samples)?;
    if samples.len() < 10_000 {
        log::warn!("density comparison with {} < 1e4 samples", samples.len());
    }
    let (i, frac) = spectrum
        .grid
        .locate(x0)
        .ok_or_else(|| Error::Input(format!("x0 = {x0} lies outside the kernel grid")))?;
    let r0 = spectrum.row(i, t)?;
    let r1 = spectrum.row(i + 1, t)?;
    let spectral: Vec<f64> = r0.iter().zip(&r1).map(|(a, b)| (1.0 - frac) * a + frac * b).collect();
    let kde = gaussian_kde(samples, bandwidth, &spectrum.grid.points, exec);
    let w = spectrum.grid.trapezoid_weights();
    let l1 = (0..spectrum.len())
        .map(|j| {
            let m = spectrum.mu[j];
            let density = m / w[j];
            m * (kde[j] / density - spectral[j]).abs()
        })
        .sum();
    Ok(DensityComparison { t, x0, n: samples.len(), bandwidth, l1, kde, spectral })
}

#[derive(Debug, Clone, Serialize)]
pub struct DetailedBalance {
    pub n_paths: usize,
    pub bins: usize,
    pub chi2: f64,
    pub dof: usize,
    pub z: f64,
}

/// Stationary start X_0 ~ mu (discrete mu on the spectrum grid with uniform
/// jitter), then a symmetry test of the joint histogram of (X_0, X_t).
pub fn detailed_balance(
    potential: &Potential,
    spectrum: &KernelSpectrum,
    cfg: &SimConfig,
    bins: usize,
    exec: Execution,
) -> Result<DetailedBalance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba1a_cede_0001);
    let mut cdf = Vec::with_capacity(spectrum.len());
    let mut acc = 0.0;
    for m in &spectrum.mu {
        acc += m;
        cdf.push(acc);
    }
    let h = spectrum.grid.step;
    let r = spectrum.grid.radius();
    let initial: Vec<f64> = (0..cfg.n_paths)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c < u).min(spectrum.len() - 1);
            let jitter: f64 = rng.random::<f64>() - 0.5;
            (spectrum.grid.points[k] + jitter * h).clamp(-r, r)
        })
        .collect();
    let out = simulate_from(potential, &initial, cfg, exec)?;
    let bin = |x: f64| ((((x + r) / (2.0 * r)) * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    let mut hist = vec![0usize; bins * bins];
    for (&a, &b) in initial.iter().zip(&out.samples) {
        hist[bin(a) * bins + bin(b)] += 1;
    }
    let mut chi2 = 0.0;
    let mut dof = 0;
    for i in 0..bins {
        for j in i + 1..bins {
            let (a, b) = (hist[i * bins + j] as f64, hist[j * bins + i] as f64);
            if a + b > 0.0 {
                chi2 += (a - b).powi(2) / (a + b);
                dof += 1;
            }
        }
    }
    let z = if dof > 0 { (chi2 - dof as f64) / (2.0 * dof as f64).sqrt() } else { 0.0 };
    Ok(DetailedBalance { n_paths: cfg.n_paths, bins, chi2, dof, z })
}
