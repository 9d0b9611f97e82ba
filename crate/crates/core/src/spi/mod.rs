//! Weighted super-Poincare profiles built from a Lyapunov certificate.

pub mod ball;
pub mod empirical;
pub mod nash;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lyapunov::LyapunovCertificate;
use crate::potentials::Potential;

/// V(x) = (1+|x|^2)^{-beta/2} e^{U(x)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weight {
    pub beta: f64,
}

impl Weight {
    pub fn value(&self, potential: &Potential, x: f64) -> Result<f64> {
        Ok(self.log_value(potential, x)?.exp())
    }

    pub fn log_value(&self, potential: &Potential, x: f64) -> Result<f64> {
        let (u, _, _) = potential.eval1(x)?;
        Ok(-0.5 * self.beta * (1.0 + x * x).ln() + 0.5 * u)
    }

    /// V^2 e^{-U} is integrable iff 2 beta > d.
    pub fn integrable(&self, dim: usize) -> bool {
        2.0 * self.beta > dim as f64
    }
}

/// p = (beta v 0)/(alpha+gamma-1) + (d/2) max(1, delta/(alpha+gamma-1)).
pub fn exponent_p(alpha: f64, gamma: f64, delta: f64, beta: f64, dim: usize) -> Result<f64> {
    if !(alpha > 0.0 && gamma >= 0.0 && delta >= 0.0 && dim >= 1) {
        return Err(Error::Parameter(format!(
            "exponent needs alpha > 0, gamma >= 0, delta >= 0, d >= 1 (got {alpha}, {gamma}, {delta}, {dim})"
        )));
    }
    let e = alpha + gamma - 1.0;
    if !(e > 0.0) {
        return Err(Error::Parameter(format!(
            "gamma must satisfy gamma > 1 - alpha (got gamma = {gamma}, alpha = {alpha})"
        )));
    }
    Ok(beta.max(0.0) / e + 0.5 * dim as f64 * (delta.max(e) / e))
}

/// Heavy-tail exponent p = gamma beta + d max(1, delta gamma) / 2.
pub fn exponent_p_cauchy(alpha_tail: f64, gamma: f64, delta: f64, beta: f64, dim: usize) -> Result<f64> {
    if !(alpha_tail > 0.0 && gamma > 2.0 / alpha_tail) {
        return Err(Error::Parameter(format!(
            "gamma must satisfy gamma > 2 / alpha (got gamma = {gamma}, alpha = {alpha_tail})"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("heavy-tail weight needs beta > 0, got {beta}")));
    }
    if !(delta >= 0.0 && dim >= 1) {
        return Err(Error::Parameter(format!("need delta >= 0 and d >= 1 (got {delta}, {dim})")));
    }
    Ok(gamma * beta + 0.5 * dim as f64 * 1.0f64.max(delta * gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpiForm {
    /// c s^{-p}
    Power { c: f64, p: f64 },
    /// e^{c (1 + s^{-theta})}
    ExpPower { c: f64, theta: f64 },
}

impl SpiForm {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            SpiForm::Power { c, p } => c * s.powf(-p),
            SpiForm::ExpPower { c, theta } => (c * (1.0 + s.powf(-theta))).exp(),
        }
    }
}

/// theta = alpha / (2 alpha - 2) for the ultracontractive regime alpha > 2.
pub fn ultracontractive_theta(alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::Parameter(format!("exp-power profile needs alpha > 2, got {alpha}")));
    }
    Ok(alpha / (2.0 * alpha - 2.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpiProfile {
    pub form: SpiForm,
    pub p: f64,
    pub s0: f64,
    pub r0: f64,
    pub c_rate: f64,
    pub phi_exponent: f64,
    pub dim: usize,
    pub beta: f64,
    pub calibrated: bool,
    #[serde(skip)]
    abs_x: Vec<f64>,
    #[serde(skip)]
    grad_sq_sup: Vec<f64>,
}

impl SpiProfile {
    pub fn b(&self, s: f64) -> f64 {
        self.form.eval(s)
    }

    /// psi = phi^{-1}: psi(r) = (r / C)^{1/e}
    pub fn psi(&self, r: f64) -> f64 {
        (r / self.c_rate).powf(1.0 / self.phi_exponent)
    }

    pub fn g(&self, r: f64) -> f64 {
        if self.beta > 0.0 {
            (1.0 + r * r).powf(self.beta)
        } else {
            1.0
        }
    }

    /// sup of |U'|^2 over |x| <= r, from the sampled profile.
    pub fn h(&self, r: f64) -> f64 {
        let k = self.abs_x.partition_point(|&a| a <= r);
        if k == 0 {
            0.0
        } else {
            self.grad_sq_sup[k - 1]
        }
    }

    /// g(psi(4/s)) max(1/s, h(psi(4/s)))^{d/2} with r clamped to the sampled range.
    pub fn structural_b(&self, s: f64) -> f64 {
        let r = self.psi(4.0 / s);
        self.g(r) * (1.0 / s).max(self.h(r)).powf(0.5 * self.dim as f64)
    }

    /// Scale the constant so that b(s0) = 1.05 b_empirical(s0).
    pub fn calibrate(&mut self, b_empirical_s0: f64) {
        let target = 1.05 * b_empirical_s0;
        self.form = match self.form {
            SpiForm::Power { p, .. } => SpiForm::Power { c: target * self.s0.powf(p), p },
            SpiForm::ExpPower { theta, .. } => {
                SpiForm::ExpPower { c: target.ln() / (1.0 + self.s0.powf(-theta)), theta }
            }
        };
        self.calibrated = true;
    }
}

pub fn profile_from_certificate(
    potential: &Potential,
    cert: &LyapunovCertificate,
    weight: &Weight,
    p: f64,
    grid: &[f64],
) -> Result<SpiProfile> {
    if !cert.admissible {
        return Err(Error::Certificate("profile needs an admissible Lyapunov certificate".into()));
    }
    if !(cert.phi_exponent > 0.0) {
        return Err(Error::Certificate(format!("phi exponent must be > 0, got {}", cert.phi_exponent)));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &x in grid {
        let (_, du, _) = potential.eval1(x)?;
        pts.push((x.abs(), du * du));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut run: f64 = 0.0;
    let mut abs_x = Vec::with_capacity(pts.len());
    let mut grad_sq_sup = Vec::with_capacity(pts.len());
    for (r, g2) in pts {
        run = run.max(g2);
        abs_x.push(r);
        grad_sq_sup.push(run);
    }
    let min_positive = abs_x.iter().copied().find(|&r| r > 0.0).unwrap_or(1.0);
    let r0 = cert.r0.max(min_positive);
    let s0 = 4.0 / (cert.c_rate * r0.powf(cert.phi_exponent));
    Ok(SpiProfile {
        form: SpiForm::Power { c: 1.0, p },
        p,
        s0,
        r0: cert.r0,
        c_rate: cert.c_rate,
        phi_exponent: cert.phi_exponent,
        dim: potential.dim(),
        beta: weight.beta,
        calibrated: false,
        abs_x,
        grad_sq_sup,
    })
}
