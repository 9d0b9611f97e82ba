//! Discrete lower bound for the weighted super-Poincare function:
//! b*(s) = sup_f [mu(f^2) - s mu(omega |f'|^2)] / mu(|f| V)^2.
//!
//! In y = v f coordinates (v_i = mu-mass times V at node i) the constraint
//! set becomes the probability simplex and the problem is projected
//! gradient ascent on an indefinite quadratic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::Grid;
use crate::linalg::power_iteration;
use crate::potentials::Potential;
use crate::spi::Weight;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PgaSettings {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for PgaSettings {
    fn default() -> Self {
        PgaSettings { restarts: 20, max_iter: 10_000, rel_tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalB {
    pub s: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub best: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmpiricalProblem {
    /// m_i / v_i^2
    diag: Vec<f64>,
    inv_v: Vec<f64>,
    kappa: Vec<f64>,
}

impl EmpiricalProblem {
    pub fn new(potential: &Potential, grid: &Grid, omega: &dyn Fn(f64) -> f64, weight: &Weight) -> Result<Self> {
        if grid.len() < 200 {
            return Err(Error::Input(format!("empirical SPI grid needs >= 200 points, got {}", grid.len())));
        }
        let w = grid.trapezoid_weights();
        let mut diag = Vec::with_capacity(grid.len());
        let mut inv_v = Vec::with_capacity(grid.len());
        for (i, &x) in grid.points.iter().enumerate() {
            let (u, _, _) = potential.eval1(x)?;
            let m = w[i] * (-u).exp();
            let v = m * weight.value(potential, x)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Evaluation { x, what: format!("mu mass times V is {v}") });
            }
            diag.push(m / (v * v));
            inv_v.push(1.0 / v);
        }
        let mut kappa = Vec::with_capacity(grid.len() - 1);
        for x in grid.midpoints() {
            let (u, _, _) = potential.eval1(x)?;
            let om = omega(x);
            if !(om > 0.0 && om.is_finite()) {
                return Err(Error::Evaluation { x, what: format!("gradient weight is {om}") });
            }
            kappa.push(om * (-u).exp() / grid.step);
        }
        Ok(EmpiricalProblem { diag, inv_v, kappa })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// (mu(f^2), mu(omega |f'|^2)) at y.
    pub fn parts(&self, y: &[f64]) -> (f64, f64) {
        let mass: f64 = y.iter().zip(&self.diag).map(|(a, d)| d * a * a).sum();
        let mut energy = 0.0;
        for i in 0..self.kappa.len() {
            let df = y[i + 1] * self.inv_v[i + 1] - y[i] * self.inv_v[i];
            energy += self.kappa[i] * df * df;
        }
        (mass, energy)
    }

    /// out = (diag y) - s V^{-1} A V^{-1} y
    fn apply(&self, s: f64, y: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            out[i] = self.diag[i] * y[i];
        }
        for i in 0..n - 1 {
            let flux = self.kappa[i] * (y[i + 1] * self.inv_v[i + 1] - y[i] * self.inv_v[i]);
            out[i] += s * flux * self.inv_v[i];
            out[i + 1] -= s * flux * self.inv_v[i + 1];
        }
    }

    fn start(&self, restart: usize, seed: u64) -> Vec<f64> {
        let mut y: Vec<f64> = if restart == 0 {
            self.inv_v.iter().map(|iv| 1.0 / iv).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
            (0..self.len()).map(|_| rng.random::<f64>().powi(8)).collect()
        };
        let total: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= total);
        y
    }

    pub fn best_b(&self, s: f64, settings: &PgaSettings) -> EmpiricalB {
        let n = self.len();
        let lip = power_iteration(n, |x, out| self.apply(s, x, out), 300);
        let step = 1.0 / (1.05 * lip);
        let mut best = EmpiricalB { s, value: f64::NEG_INFINITY, converged: false, iterations: 0, best: Vec::new() };
        let mut grad = vec![0.0; n];
        let mut buf = Vec::with_capacity(n);
        // restart 0 is the constant function; the rest are random
        for restart in 0..=settings.restarts {
            let mut y = self.start(restart, settings.seed);
            let objective = |y: &[f64]| {
                let (m, e) = self.parts(y);
                m - s * e
            };
            let mut val = objective(&y);
            let mut converged = false;
            let mut iters = 0;
            while iters < settings.max_iter {
                self.apply(s, &y, &mut grad);
                for (a, g) in y.iter_mut().zip(&grad) {
                    *a += step * g;
                }
                project_simplex(&mut y, &mut buf);
                iters += 1;
                let next = objective(&y);
                let change = (next - val).abs();
                val = next;
                if change <= settings.rel_tol * val.abs() {
                    converged = true;
                    break;
                }
            }
            if val > best.value {
                best = EmpiricalB { s, value: val, converged, iterations: iters, best: y };
            }
        }
        best
    }
}

/// Euclidean projection onto {y >= 0, sum y = 1}.
pub fn project_simplex(y: &mut [f64], buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(y);
    buf.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in buf.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

pub fn empirical_best_b(
    s: f64,
    grid: &Grid,
    potential: &Potential,
    omega: &dyn Fn(f64) -> f64,
    weight: &Weight,
    settings: &PgaSettings,
) -> Result<EmpiricalB> {
    if !(s > 0.0) {
        return Err(Error::Input(format!("s must be > 0, got {s}")));
    }
    Ok(EmpiricalProblem::new(potential, grid, omega, weight)?.best_b(s, settings))
}

/// b* on a grid of s values. Every maximizer found is evaluated at every s,
/// which makes the returned curve nonincreasing in s.
pub fn empirical_curve(problem: &EmpiricalProblem, s_values: &[f64], settings: &PgaSettings, exec: Execution) -> Vec<EmpiricalB> {
    let mut runs = exec.map_slice(s_values, |&s| problem.best_b(s, settings));
    let candidates: Vec<(f64, f64, Vec<f64>)> = runs
        .iter()
        .map(|r| {
            let (m, e) = problem.parts(&r.best);
            (m, e, r.best.clone())
        })
        .collect();
    for run in runs.iter_mut() {
        for (m, e, y) in &candidates {
            let v = m - run.s * e;
            if v > run.value {
                run.value = v;
                run.best = y.clone();
            }
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn problem() -> (EmpiricalProblem, Grid, Potential) {
        let p = Potential::power_exponential(3.0, 1).unwrap();
        let g = Grid::symmetric(200, 3.0).unwrap();
        let prob = EmpiricalProblem::new(&p, &g, &|_| 1.0, &Weight { beta: 0.0 }).unwrap();
        (prob, g, p)
    }

    #[test]
    fn simplex_projection() {
        let mut buf = Vec::new();
        let mut y = vec![0.5, 0.5, 0.5];
        project_simplex(&mut y, &mut buf);
        assert!(y.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let mut y = vec![2.0, -1.0, 0.0];
        project_simplex(&mut y, &mut buf);
        assert_eq!(y, vec![1.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut y: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            project_simplex(&mut y, &mut buf);
            assert!(y.iter().all(|&v| v >= 0.0));
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_lower_bound_and_monotone() {
        let (prob, g, p) = problem();
        let w = g.trapezoid_weights();
        let (mut m, mut mv) = (0.0, 0.0);
        for (i, &x) in g.points.iter().enumerate() {
            let mi = w[i] * (-p.u1(x)).exp();
            m += mi;
            mv += mi * (0.5 * p.u1(x)).exp();
        }
        let floor = m / (mv * mv);
        let settings = PgaSettings { restarts: 3, max_iter: 3000, ..PgaSettings::default() };
        let s = [0.01, 0.03, 0.1, 0.3];
        let curve = empirical_curve(&prob, &s, &settings, Execution::Sequential);
        for c in &curve {
            assert!(c.value >= floor * (1.0 - 1e-12), "{} < {floor}", c.value);
        }
        for w in curve.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
    }

    #[test]
    fn absolute_value_lowers_energy() {
        let (prob, _, _) = problem();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f: Vec<f64> = (0..prob.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = f.iter().zip(&prob.inv_v).map(|(a, iv)| a / iv).collect();
            let ya: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            let (m, e) = prob.parts(&y);
            let (ma, ea) = prob.parts(&ya);
            assert!((m - ma).abs() <= 1e-12 * m);
            assert!(ea <= e * (1.0 + 1e-12));
        }
    }

    #[test]
    fn policies_agree() {
        let (prob, _, _) = problem();
        let settings = PgaSettings { restarts: 2, max_iter: 500, ..PgaSettings::default() };
        let a = empirical_curve(&prob, &[0.05, 0.2], &settings, Execution::Sequential);
        let b = empirical_curve(&prob, &[0.05, 0.2], &settings, Execution::Parallel);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
        }
    }

    #[test]
    fn input_checks() {
        let p = Potential::quadratic(1.0, 1).unwrap();
        let small = Grid::symmetric(100, 3.0).unwrap();
        assert!(EmpiricalProblem::new(&p, &small, &|_| 1.0, &Weight { beta: 0.0 }).is_err());
        let g = Grid::symmetric(200, 3.0).unwrap();
        assert!(empirical_best_b(0.0, &g, &p, &|_| 1.0, &Weight { beta: 0.0 }, &PgaSettings::default()).is_err());
    }
}
