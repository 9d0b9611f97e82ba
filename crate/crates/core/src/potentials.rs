//! Confining potentials U with e^{-U} a probability density, and the drift
//! hypothesis check.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::linear_fit;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied potential in one dimension. `support` restricts the measure
/// to [-support, support].
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub u: ScalarFn,
    pub du: ScalarFn,
    pub d2u: ScalarFn,
    pub support: Option<f64>,
    pub hessian_lb: Option<f64>,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    /// (1+|x|^2)^{alpha/2}
    PowerExponential { alpha: f64 },
    /// ((d+alpha)/2) log(1+|x|^2)
    GeneralizedCauchy { alpha: f64 },
    /// kappa |x|^2 / 2
    Quadratic { kappa: f64 },
    Custom(CustomPotential),
}

#[derive(Clone, Debug)]
pub struct Potential {
    family: Family,
    dim: usize,
    normalization: f64,
    hessian_lb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialValue {
    pub u: f64,
    pub grad: Vec<f64>,
    pub laplacian: f64,
}

fn half_gamma(d: usize) -> f64 {
    // Gamma(d/2)
    if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut k = 0.5;
        while k < d as f64 / 2.0 - 0.25 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

impl Potential {
    pub fn power_exponential(alpha: f64, dim: usize) -> Result<Potential> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Input(format!("power-exponential alpha must be > 0, got {alpha}")));
        }
        Potential::builtin(Family::PowerExponential { alpha }, dim)
    }

    pub fn generalized_cauchy(alpha: f64, dim: usize) -> Result<Potential> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Input(format!("Cauchy tail alpha must be > 0, got {alpha}")));
        }
        Potential::builtin(Family::GeneralizedCauchy { alpha }, dim)
    }

    pub fn quadratic(kappa: f64, dim: usize) -> Result<Potential> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Input(format!("quadratic kappa must be > 0, got {kappa}")));
        }
        Potential::builtin(Family::Quadratic { kappa }, dim)
    }

    /// Lebesgue measure restricted to [-half_width, half_width].
    pub fn flat(half_width: f64) -> Result<Potential> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Input(format!("flat half width must be > 0, got {half_width}")));
        }
        let zero: ScalarFn = Arc::new(|_| 0.0);
        Potential::custom(CustomPotential {
            name: "flat".into(),
            u: zero.clone(),
            du: zero.clone(),
            d2u: zero,
            support: Some(half_width),
            hessian_lb: Some(0.0),
        })
    }

    pub fn custom(c: CustomPotential) -> Result<Potential> {
        if let Some(l) = c.support {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Input(format!("custom support must be > 0, got {l}")));
            }
        }
        let lb = c.hessian_lb;
        let mut p = Potential { family: Family::Custom(c), dim: 1, normalization: 0.0, hessian_lb: lb };
        p.normalization = p.log_partition()?;
        Ok(p)
    }

    fn builtin(family: Family, dim: usize) -> Result<Potential> {
        if dim == 0 {
            return Err(Error::Input("dimension must be >= 1".into()));
        }
        let mut p = Potential { family, dim, normalization: 0.0, hessian_lb: None };
        p.normalization = p.log_partition()?;
        p.hessian_lb = Some(p.sampled_hessian_lb());
        Ok(p)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log of the integral of e^{-U_0}; subtracted so that e^{-U} has unit mass.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn hessian_lb(&self) -> Option<f64> {
        self.hessian_lb
    }

    pub fn support(&self) -> Option<f64> {
        match &self.family {
            Family::Custom(c) => c.support,
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            Family::PowerExponential { alpha } => format!("power_exponential(alpha={alpha})"),
            Family::GeneralizedCauchy { alpha } => format!("generalized_cauchy(alpha={alpha})"),
            Family::Quadratic { kappa } => format!("quadratic(kappa={kappa})"),
            Family::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// Unnormalized radial data at s = |x|^2: (U_0, g, laplacian) with grad U = g x.
    fn radial(&self, s: f64) -> (f64, f64, f64) {
        self.radial_d(s, self.dim as f64)
    }

    fn radial_d(&self, s: f64, d: f64) -> (f64, f64, f64) {
        match &self.family {
            Family::PowerExponential { alpha } => {
                let a = *alpha;
                let q = 1.0 + s;
                let u = q.powf(a / 2.0);
                let g = a * q.powf(a / 2.0 - 1.0);
                let lap = a * q.powf(a / 2.0 - 2.0) * (d * q + (a - 2.0) * s);
                (u, g, lap)
            }
            Family::GeneralizedCauchy { alpha } => {
                let k = d + alpha;
                let q = 1.0 + s;
                (0.5 * k * q.ln(), k / q, k * (d + (d - 2.0) * s) / (q * q))
            }
            Family::Quadratic { kappa } => (0.5 * kappa * s, *kappa, kappa * d),
            Family::Custom(_) => unreachable!("custom potentials are evaluated directly"),
        }
    }

    fn raw1(&self, x: f64) -> (f64, f64, f64) {
        match &self.family {
            Family::Custom(c) => ((c.u)(x), (c.du)(x), (c.d2u)(x)),
            _ => {
                let (u, g, lap) = self.radial(x * x);
                (u, g * x, lap)
            }
        }
    }

    /// (U, U', U'') in one dimension.
    pub fn eval1(&self, x: f64) -> Result<(f64, f64, f64)> {
        if self.dim != 1 {
            return Err(Error::Input(format!("eval1 needs a 1D potential, dimension is {}", self.dim)));
        }
        let (u, du, d2u) = self.raw1(x);
        let u = u + self.normalization;
        if !(u.is_finite() && du.is_finite() && d2u.is_finite()) {
            return Err(Error::Evaluation { x, what: format!("U={u}, U'={du}, U''={d2u}") });
        }
        Ok((u, du, d2u))
    }

    /// U' without checks, for inner loops that validate their own state.
    #[inline]
    pub fn drift1(&self, x: f64) -> f64 {
        match &self.family {
            Family::PowerExponential { alpha } => alpha * x * (1.0 + x * x).powf(alpha / 2.0 - 1.0),
            Family::GeneralizedCauchy { alpha } => (1.0 + alpha) * x / (1.0 + x * x),
            Family::Quadratic { kappa } => kappa * x,
            Family::Custom(c) => (c.du)(x),
        }
    }

    pub fn u1(&self, x: f64) -> f64 {
        self.raw1(x).0 + self.normalization
    }

    pub fn eval(&self, x: &[f64]) -> Result<PotentialValue> {
        if x.len() != self.dim {
            return Err(Error::Input(format!("point has dimension {}, potential has {}", x.len(), self.dim)));
        }
        if let Family::Custom(_) = self.family {
            let (u, du, d2u) = self.eval1(x[0])?;
            return Ok(PotentialValue { u, grad: vec![du], laplacian: d2u });
        }
        let s: f64 = x.iter().map(|v| v * v).sum();
        let (u, g, lap) = self.radial(s);
        let u = u + self.normalization;
        let grad: Vec<f64> = x.iter().map(|v| g * v).collect();
        if !(u.is_finite() && lap.is_finite() && grad.iter().all(|v| v.is_finite())) {
            return Err(Error::Evaluation { x: s.sqrt(), what: "non-finite potential data".into() });
        }
        Ok(PotentialValue { u, grad, laplacian: lap })
    }

    fn log_partition(&self) -> Result<f64> {
        if let Family::Custom(c) = &self.family {
            return match c.support {
                Some(l) => {
                    let n = 20001;
                    let h = 2.0 * l / (n - 1) as f64;
                    let mut z = 0.0;
                    for i in 0..n {
                        let x = -l + i as f64 * h;
                        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                        z += w * (-(c.u)(x)).exp();
                    }
                    finite_log(z * h)
                }
                None => {
                    // x = sinh(v) maps heavy tails to exponential decay.
                    let f = |v: f64| (-(c.u)(v.sinh())).exp() * v.cosh();
                    finite_log(sinh_trapezoid(f, -1.0) + sinh_trapezoid(f, 1.0) - f(0.0) * SINH_STEP)
                }
            };
        }
        let d = self.dim;
        let area = 2.0 * PI.powf(d as f64 / 2.0) / half_gamma(d);
        let f = |v: f64| {
            let r = v.sinh();
            let (u, _, _) = self.radial(r * r);
            (-u).exp() * r.powi(d as i32 - 1) * v.cosh()
        };
        // trapezoid on [0, inf) with half weight at the origin
        let half = sinh_trapezoid(f, 1.0) - 0.5 * f(0.0) * SINH_STEP;
        let z = if d == 1 { 2.0 * half } else { area * half };
        finite_log(z)
    }

    /// Smallest Hessian eigenvalue sampled on |x| <= 50: the radial one is
    /// the 1D second derivative, the tangential one is g.
    fn sampled_hessian_lb(&self) -> f64 {
        let mut lb = f64::INFINITY;
        for i in 0..=5000 {
            let r = i as f64 * 0.01;
            let (_, g, upp) = self.radial_d(r * r, 1.0);
            lb = lb.min(upp);
            if self.dim > 1 {
                lb = lb.min(g);
            }
        }
        lb
    }
}

const SINH_STEP: f64 = 0.002;

fn sinh_trapezoid<F: Fn(f64) -> f64>(f: F, sign: f64) -> f64 {
    let mut sum = 0.0;
    let mut peak: f64 = 0.0;
    let mut k = 0usize;
    loop {
        let v = sign * k as f64 * SINH_STEP;
        if v.abs() > 700.0 {
            break;
        }
        let y = f(v);
        let y = if y.is_finite() { y } else { 0.0 };
        sum += y;
        peak = peak.max(y);
        if k > 1000 && y < 1e-18 * peak {
            break;
        }
        k += 1;
    }
    sum * SINH_STEP
}

fn finite_log(z: f64) -> Result<f64> {
    if z > 0.0 && z.is_finite() {
        Ok(z.ln())
    } else {
        Err(Error::Input(format!("e^(-U) is not integrable (quadrature gave {z})")))
    }
}

/// Drift conditions: grad U . x >= |x|^alpha / c - c and
/// |grad U| <= c (1 v |x|^delta). In Cauchy mode the first condition is
/// replaced by liminf grad U . x >= d + alpha (the tail exponent).
#[derive(Debug, Clone, Serialize)]
pub struct DriftHypothesis {
    pub c: f64,
    pub alpha: f64,
    pub delta: f64,
    pub cauchy_mode: bool,
    pub eps_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyTail {
    pub liminf_target: f64,
    pub threshold: f64,
    pub tail_radius: Option<f64>,
    pub edge_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub pass: bool,
    pub growth_margin: f64,
    pub growth_worst_point: f64,
    pub gradient_margin: f64,
    pub gradient_worst_point: f64,
    pub smallest_c_growth: Option<f64>,
    pub smallest_c_gradient: f64,
    pub fitted_delta: Option<f64>,
    pub cauchy: Option<CauchyTail>,
}

pub fn check_drift_hypothesis(potential: &Potential, hyp: &DriftHypothesis, grid: &[f64]) -> Result<HypothesisReport> {
    if grid.is_empty() {
        return Err(Error::Input("empty verification grid".into()));
    }
    if !(hyp.c > 0.0) {
        return Err(Error::Parameter(format!("hypothesis constant c must be > 0, got {}", hyp.c)));
    }
    let radius = grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if radius < 5.0 {
        return Err(Error::Input(format!("verification grid must reach |x| >= 5, reaches {radius}")));
    }
    let mut pts = Vec::with_capacity(grid.len());
    for &x in grid {
        let (_, du, _) = potential.eval1(x)?;
        pts.push((x, du));
    }

    let gate = |x: f64| 1.0f64.max(x.abs().powf(hyp.delta));
    let mut gradient_margin = f64::INFINITY;
    let mut gradient_worst_point = 0.0;
    let mut smallest_c_gradient: f64 = 0.0;
    for &(x, du) in &pts {
        let m = hyp.c * gate(x) - du.abs();
        if m < gradient_margin {
            gradient_margin = m;
            gradient_worst_point = x;
        }
        smallest_c_gradient = smallest_c_gradient.max(du.abs() / gate(x));
    }

    let growth = |c: f64| {
        let mut worst = f64::INFINITY;
        let mut at = 0.0;
        for &(x, du) in &pts {
            let m = du * x - x.abs().powf(hyp.alpha) / c + c;
            if m < worst {
                worst = m;
                at = x;
            }
        }
        (worst, at)
    };

    let mut fitted = (Vec::new(), Vec::new());
    for &(x, du) in &pts {
        if x.abs() >= 0.5 * radius && du.abs() > 0.0 {
            fitted.0.push(x.abs().ln());
            fitted.1.push(du.abs().ln());
        }
    }
    let fitted_delta = (fitted.0.len() >= 2).then(|| linear_fit(&fitted.0, &fitted.1).0);

    if hyp.cauchy_mode {
        let target = potential.dim() as f64 + hyp.alpha;
        let threshold = target * (1.0 - hyp.eps_tol);
        let mut by_radius: Vec<(f64, f64)> = pts.iter().map(|&(x, du)| (x.abs(), du * x)).collect();
        by_radius.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut tail_radius = None;
        for &(r, v) in by_radius.iter().rev() {
            if v >= threshold {
                tail_radius = Some(r);
            } else {
                break;
            }
        }
        let edge_value = by_radius.last().map(|p| p.1).unwrap_or(f64::NAN);
        let tail_ok = matches!(tail_radius, Some(r) if r < radius);
        let (worst, at) = by_radius
            .iter()
            .filter(|p| tail_radius.is_some_and(|t| p.0 >= t))
            .map(|p| (p.1 - threshold, p.0))
            .fold((f64::INFINITY, radius), |a, b| if b.0 < a.0 { b } else { a });
        return Ok(HypothesisReport {
            pass: tail_ok && gradient_margin >= 0.0,
            growth_margin: if tail_ok { worst } else { edge_value - threshold },
            growth_worst_point: at,
            gradient_margin,
            gradient_worst_point,
            smallest_c_growth: None,
            smallest_c_gradient,
            fitted_delta,
            cauchy: Some(CauchyTail { liminf_target: target, threshold, tail_radius, edge_value }),
        });
    }

    let (growth_margin, growth_worst_point) = growth(hyp.c);
    // margin is increasing in c: bisection for the smallest admissible c
    let mut hi = 1e-6f64;
    while growth(hi).0 < 0.0 && hi < 1e12 {
        hi *= 2.0;
    }
    let smallest_c_growth = if growth(hi).0 >= 0.0 {
        let mut lo = hi / 2.0;
        if growth(lo).0 >= 0.0 {
            lo = 0.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if growth(mid).0 >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-10 * hi {
                break;
            }
        }
        Some(hi)
    } else {
        None
    };

    Ok(HypothesisReport {
        pass: growth_margin >= 0.0 && gradient_margin >= 0.0,
        growth_margin,
        growth_worst_point,
        gradient_margin,
        gradient_worst_point,
        smallest_c_growth,
        smallest_c_gradient,
        fitted_delta,
        cauchy: None,
    })
}
