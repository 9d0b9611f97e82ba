//! Exponentially twisted semigroup e^{a psi} V^{-1} P_t (e^{-a psi} V .)
//! with a bounded Lipschitz twist psi.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::spectrum::KernelSpectrum;
use crate::linalg::{least_squares, linear_fit};
use crate::potentials::Potential;
use crate::spi::Weight;

/// Odd twist: psi(x) = x on [-r, r], then psi' = 1 - smoothstep decays to 0
/// on [r, R'], constant beyond. |psi'| <= 1 and |psi''| <= 1.5 / (R' - r).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwistProfile {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl TwistProfile {
    pub fn for_box(radius: f64) -> TwistProfile {
        TwistProfile { r_inner: 0.25 * radius, r_outer: 0.75 * radius }
    }

    pub fn rho(&self) -> f64 {
        1.5 / (self.r_outer - self.r_inner)
    }

    pub fn sup_abs(&self) -> f64 {
        self.r_inner + 0.5 * (self.r_outer - self.r_inner)
    }

    /// (psi, psi', psi'')
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let s = x.signum();
        let r = x.abs();
        let len = self.r_outer - self.r_inner;
        if r <= self.r_inner {
            (x, 1.0, 0.0)
        } else if r >= self.r_outer {
            (s * (self.r_inner + 0.5 * len), 0.0, 0.0)
        } else {
            let u = (r - self.r_inner) / len;
            let h = self.r_inner + len * (u - u.powi(3) + 0.5 * u.powi(4));
            let dh = 1.0 - u * u * (3.0 - 2.0 * u);
            let d2h = -6.0 * u * (1.0 - u) / len;
            (s * h, dh, s * d2h)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistPoint {
    pub a: f64,
    /// max_t log(sup mass) / t
    pub k_hat: f64,
    /// sup over the grid of the closed-form growth rate
    pub k_formula: f64,
    pub y_slope: f64,
    pub y_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistReport {
    pub profile: TwistProfile,
    pub rho: f64,
    pub points: Vec<TwistPoint>,
    /// K(a) ~ k0 + k1 |a| + k2 a^2
    pub fit: [f64; 3],
    pub quad_range: [f64; 2],
    pub pass: bool,
}

/// 1/2 U'' - 1/4 U'^2 - beta <x>^-2 + beta(2+beta) <x>^-4 x^2
///   - a psi'' - 2 a beta <x>^-2 psi' x + a^2 psi'^2
pub fn growth_rate(potential: &Potential, beta: f64, profile: &TwistProfile, a: f64, x: f64) -> Result<f64> {
    let (_, du, d2u) = potential.eval1(x)?;
    let (_, dp, d2p) = profile.eval(x);
    let q = 1.0 + x * x;
    Ok(0.5 * d2u - 0.25 * du * du - beta / q + beta * (2.0 + beta) * x * x / (q * q) - a * d2p
        - 2.0 * a * beta * dp * x / q
        + a * a * dp * dp)
}

#[allow(clippy::too_many_arguments)]
pub fn davies_twist_check(
    spectrum: &KernelSpectrum,
    potential: &Potential,
    weight: &Weight,
    profile: &TwistProfile,
    a_values: &[f64],
    t_grid: &[f64],
    p: f64,
    quad_range: [f64; 2],
    exec: Execution,
) -> Result<TwistReport> {
    if a_values.len() < 3 {
        return Err(Error::Input("twist fit needs at least 3 values of a".into()));
    }
    let max_a = 170.0 / profile.sup_abs();
    if a_values.iter().any(|a| a.abs() > max_a) {
        return Err(Error::Twist { max_a });
    }
    let x = &spectrum.grid.points;
    let n = spectrum.len();
    let v: Vec<f64> = x.iter().map(|&xi| weight.value(potential, xi)).collect::<Result<_>>()?;
    let psi: Vec<f64> = x.iter().map(|&xi| profile.eval(xi).0).collect();
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);

    // mass[a][t] and y[a][t]
    let per_t = exec.map_slice(t_grid, |&t| -> Result<(Vec<f64>, Vec<f64>)> {
        let table = spectrum.heat_kernel(t)?;
        let mut mass = Vec::with_capacity(a_values.len());
        let mut ys = Vec::with_capacity(a_values.len());
        for &a in a_values {
            let g: Vec<f64> = (0..n).map(|j| (-a * psi[j]).exp() * v[j]).collect();
            let pg = spectrum.apply_semigroup(t, &g);
            mass.push((0..n).map(|i| pg[i] * (a * psi[i]).exp() / v[i]).fold(0.0, f64::max));
            let w: Vec<f64> = (0..n).map(|j| spectrum.mu[j] * (-2.0 * a * psi[j]).exp()).collect();
            let y = (0..n)
                .map(|i| {
                    let s: f64 = (0..n).map(|j| w[j] * table.values[(j, i)].powi(2)).sum();
                    s * (2.0 * a * psi[i]).exp() / (v[i] * v[i])
                })
                .fold(0.0, f64::max);
            ys.push(y);
        }
        Ok((mass, ys))
    });
    let per_t: Vec<(Vec<f64>, Vec<f64>)> = per_t.into_iter().collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(a_values.len());
    for (ai, &a) in a_values.iter().enumerate() {
        let k_hat = t_grid
            .iter()
            .zip(&per_t)
            .map(|(t, (m, _))| m[ai].ln() / t)
            .fold(f64::NEG_INFINITY, f64::max);
        let k_formula = x
            .iter()
            .map(|&xi| growth_rate(potential, weight.beta, profile, a, xi))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let (lx, ly): (Vec<f64>, Vec<f64>) = t_grid
            .iter()
            .zip(&per_t)
            .filter(|(&t, _)| t <= 0.5 * t_max)
            .map(|(&t, (_, y))| ((1.0 / t).ln(), y[ai].ln()))
            .unzip();
        let y_slope = if lx.len() >= 2 { linear_fit(&lx, &ly).0 } else { f64::NAN };
        let y_constant = t_grid
            .iter()
            .zip(&per_t)
            .map(|(&t, (_, y))| y[ai] * t.powf(p) * (-2.0 * k_hat * t).exp())
            .fold(0.0, f64::max);
        points.push(TwistPoint { a, k_hat, k_formula, y_slope, y_constant });
    }
    let rows: Vec<Vec<f64>> = a_values.iter().map(|&a| vec![1.0, a.abs(), a * a]).collect();
    let ks: Vec<f64> = points.iter().map(|pt| pt.k_hat).collect();
    let c = least_squares(&rows, &ks);
    let fit = [c[0], c[1], c[2]];
    let pass = fit.iter().all(|v| v.is_finite()) && fit[2] >= quad_range[0] && fit[2] <= quad_range[1];
    Ok(TwistReport { profile: *profile, rho: profile.rho(), points, fit, quad_range, pass })
}
