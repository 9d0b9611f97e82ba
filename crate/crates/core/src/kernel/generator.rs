//! Finite-volume discretization of L f = f'' - U' f' on [-R, R] with
//! reflecting ends. Fluxes use midpoint conductances so that L 1 = 0 and L
//! is self-adjoint in the discrete L^2(mu) exactly.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SymTridiag;
use crate::potentials::Potential;

#[derive(Debug, Clone)]
pub struct DiscretizedGenerator {
    pub grid: Grid,
    /// node masses of mu, normalized to sum to 1
    pub mu: Vec<f64>,
    /// kappa_{i+1/2}, same normalization as mu
    pub conductance: Vec<f64>,
    /// U at the nodes
    pub u: Vec<f64>,
    /// mu([-R, R]) for the normalized potential
    pub box_mass: f64,
    pub warnings: Vec<String>,
}

pub fn build_generator(potential: &Potential, n: usize, radius: f64, tail_tol: f64) -> Result<DiscretizedGenerator> {
    build_weighted_generator(potential, n, radius, tail_tol, &|_| 1.0)
}

/// Generator of f -> e^U (omega e^{-U} f')'.
pub fn build_weighted_generator(
    potential: &Potential,
    n: usize,
    radius: f64,
    tail_tol: f64,
    omega: &dyn Fn(f64) -> f64,
) -> Result<DiscretizedGenerator> {
    if n < 100 {
        return Err(Error::Input(format!("generator needs N >= 100, got {n}")));
    }
    if potential.dim() != 1 {
        return Err(Error::Input("the generator is one dimensional".into()));
    }
    if let Some(l) = potential.support() {
        if radius > l * (1.0 + 1e-12) {
            return Err(Error::Input(format!("box radius {radius} exceeds the support half width {l}")));
        }
    }
    let grid = Grid::symmetric(n, radius)?;
    let mut warnings = Vec::new();

    let box_mass = simpson_mass(potential, radius, 8 * n)?;
    if box_mass < 1.0 - tail_tol {
        return Err(Error::Truncation { mass: box_mass, tol: tail_tol });
    }
    let edge = (-potential.u1(radius)).exp().max((-potential.u1(-radius)).exp());
    if potential.support().is_none() && edge > 1e-12 {
        let msg = format!("e^(-U(R)) = {edge:.2e} > 1e-12 at R = {radius}; mass on the box is {box_mass:.12}");
        warnings.push(msg);
    }

    let w = grid.trapezoid_weights();
    let mut u = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    for (i, &x) in grid.points.iter().enumerate() {
        let (ui, _, _) = potential.eval1(x)?;
        u.push(ui);
        mu.push(w[i] * (-ui).exp());
    }
    let z: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= z);
    let mut conductance = Vec::with_capacity(n - 1);
    for x in grid.midpoints() {
        let (um, _, _) = potential.eval1(x)?;
        let om = omega(x);
        if !(om > 0.0 && om.is_finite()) {
            return Err(Error::Evaluation { x, what: format!("gradient weight is {om}") });
        }
        conductance.push(om * (-um).exp() / (grid.step * z));
    }
    Ok(DiscretizedGenerator { grid, mu, conductance, u, box_mass, warnings })
}

fn simpson_mass(potential: &Potential, radius: f64, n: usize) -> Result<f64> {
    let n = n + n % 2;
    let h = 2.0 * radius / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = -radius + i as f64 * h;
        let (u, _, _) = potential.eval1(x)?;
        let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += c * (-u).exp();
    }
    Ok(s * h / 3.0)
}

impl DiscretizedGenerator {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &k) in self.conductance.iter().enumerate() {
            let flux = k * (f[i + 1] - f[i]);
            out[i] += flux;
            out[i + 1] -= flux;
        }
        out.iter_mut().zip(&self.mu).for_each(|(o, m)| *o /= m);
        out
    }

    /// Matrix entry L_{ij}.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        if i == j {
            let left = if i > 0 { self.conductance[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.conductance[i] } else { 0.0 };
            -(left + right) / self.mu[i]
        } else if j + 1 == i {
            self.conductance[j] / self.mu[i]
        } else if i + 1 == j {
            self.conductance[i] / self.mu[i]
        } else {
            0.0
        }
    }

    /// sum kappa (f_{i+1} - f_i)(g_{i+1} - g_i) = -<f, L g>_mu
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> f64 {
        self.conductance
            .iter()
            .enumerate()
            .map(|(i, k)| k * (f[i + 1] - f[i]) * (g[i + 1] - g[i]))
            .sum()
    }

    /// M^{1/2} (-L) M^{-1/2}
    pub fn symmetrized(&self) -> SymTridiag {
        let n = self.len();
        let diag = (0..n).map(|i| -self.entry(i, i)).collect();
        let off = (0..n - 1)
            .map(|i| -self.conductance[i] / (self.mu[i] * self.mu[i + 1]).sqrt())
            .collect();
        SymTridiag { diag, off }
    }
}
