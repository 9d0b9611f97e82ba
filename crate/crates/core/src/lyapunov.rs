//! Lyapunov functions W, the rate functions xi and phi, and certification of
//! LW <= -phi xi(W) + b on a grid.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{DriftHypothesis, Potential, ScalarFn};

#[derive(Clone)]
pub struct CustomLyapunov {
    pub name: String,
    pub w: ScalarFn,
    pub dw: ScalarFn,
    pub d2w: ScalarFn,
}

impl fmt::Debug for CustomLyapunov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLyapunov").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum LyapunovForm {
    /// e^{a |x|^alpha}
    ExpPower { a: f64, alpha: f64 },
    /// |x|^a
    PurePower { a_pow: f64 },
    Custom(CustomLyapunov),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Xi {
    Identity,
    /// u (log u)^{-2 gamma / alpha} above u* = e^{4 gamma / alpha}, linear below
    LogPower { gamma: f64, alpha: f64 },
    /// r^{1-b}
    PowerTail { b_exp: f64 },
}

/// phi(x) = c_rate |x|^exponent; `None` asks certify to fit the constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerRate {
    pub c_rate: Option<f64>,
    pub exponent: f64,
}

#[derive(Clone, Debug)]
pub struct LyapunovSpec {
    pub form: LyapunovForm,
    pub smoothing_radius: f64,
    pub xi: Xi,
    pub phi: PowerRate,
}

/// W, W'/W, W''/W at a point; log W avoids overflow far out.
#[derive(Clone, Copy, Debug)]
pub struct WEval {
    pub log_w: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Xi {
    fn exponent_k(gamma: f64, alpha: f64) -> f64 {
        2.0 * gamma / alpha
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Xi::Identity => Ok(()),
            Xi::LogPower { gamma, alpha } => {
                if gamma >= 0.0 && alpha > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("log-power xi needs gamma >= 0, alpha > 0 (got {gamma}, {alpha})")))
                }
            }
            Xi::PowerTail { b_exp } => {
                if (0.0..1.0).contains(&b_exp) {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("power-tail xi needs 0 <= b < 1, got {b_exp}")))
                }
            }
        }
    }

    /// Threshold below which the closed form is replaced by its tangent line.
    pub fn closed_form_threshold(&self) -> Option<f64> {
        match *self {
            Xi::LogPower { gamma, alpha } if gamma > 0.0 => Some((4.0 * gamma / alpha).exp()),
            _ => None,
        }
    }

    /// xi(u) / u given log u.
    pub fn ratio(&self, log_u: f64) -> f64 {
        match *self {
            Xi::Identity => 1.0,
            Xi::PowerTail { b_exp } => (-b_exp * log_u).exp(),
            Xi::LogPower { gamma, alpha } => {
                let k = Xi::exponent_k(gamma, alpha);
                if k == 0.0 {
                    return 1.0;
                }
                if log_u > 2.0 * k {
                    log_u.powf(-k)
                } else {
                    let us = (2.0 * k).exp();
                    let u = log_u.exp();
                    let lead = (2.0 * k).powf(-k);
                    (us * lead + 0.5 * lead * (u - us)) / u
                }
            }
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        u * self.ratio(u.ln())
    }

    /// xi'(u) given log u.
    pub fn derivative(&self, log_u: f64) -> f64 {
        match *self {
            Xi::Identity => 1.0,
            Xi::PowerTail { b_exp } => (1.0 - b_exp) * (-b_exp * log_u).exp(),
            Xi::LogPower { gamma, alpha } => {
                let k = Xi::exponent_k(gamma, alpha);
                if k == 0.0 {
                    return 1.0;
                }
                if log_u > 2.0 * k {
                    log_u.powf(-k) * (1.0 - k / log_u)
                } else {
                    0.5 * (2.0 * k).powf(-k)
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Xi::Identity => "identity".into(),
            Xi::LogPower { gamma, alpha } => format!("log_power(gamma={gamma}, alpha={alpha})"),
            Xi::PowerTail { b_exp } => format!("power_tail(b={b_exp})"),
        }
    }
}

/// A validated Lyapunov function, with the even sextic patch 1 + c2 x^2 +
/// c4 x^4 + c6 x^6 on |x| <= smoothing_radius matching W to second order.
#[derive(Clone, Debug)]
pub struct Lyapunov {
    pub spec: LyapunovSpec,
    patch: Option<[f64; 3]>,
}

impl Lyapunov {
    pub fn new(spec: LyapunovSpec) -> Result<Lyapunov> {
        spec.xi.validate()?;
        let rs = spec.smoothing_radius;
        if !(rs >= 0.0 && rs.is_finite()) {
            return Err(Error::Parameter(format!("smoothing radius must be >= 0, got {rs}")));
        }
        match spec.form {
            LyapunovForm::ExpPower { a, alpha } => {
                if !(a >= 0.0 && alpha > 0.0) {
                    return Err(Error::Parameter(format!("exp-power W needs a >= 0, alpha > 0 (got {a}, {alpha})")));
                }
                if rs == 0.0 && alpha < 2.0 {
                    return Err(Error::Parameter(format!(
                        "e^(a|x|^alpha) with alpha = {alpha} < 2 is not C2 at 0; set a positive smoothing radius"
                    )));
                }
            }
            LyapunovForm::PurePower { a_pow } => {
                if !(a_pow > 0.0) {
                    return Err(Error::Parameter(format!("pure-power W needs a > 0, got {a_pow}")));
                }
                if rs < 1.0 {
                    return Err(Error::Parameter(format!(
                        "|x|^a is below 1 inside the unit ball; smoothing radius must be >= 1, got {rs}"
                    )));
                }
            }
            LyapunovForm::Custom(_) => {}
        }
        let mut lyap = Lyapunov { spec, patch: None };
        if rs > 0.0 && !matches!(lyap.spec.form, LyapunovForm::Custom(_)) {
            lyap.patch = Some(lyap.fit_patch(rs)?);
        }
        Ok(lyap)
    }

    /// (W, W', W'') of the closed form at r > 0.
    fn outer(&self, r: f64) -> WEval {
        match self.spec.form {
            LyapunovForm::ExpPower { a, alpha } => {
                let g = a * alpha * r.powf(alpha - 1.0);
                WEval { log_w: a * r.powf(alpha), d1: g, d2: a * alpha * (alpha - 1.0) * r.powf(alpha - 2.0) + g * g }
            }
            LyapunovForm::PurePower { a_pow } => {
                WEval { log_w: a_pow * r.ln(), d1: a_pow / r, d2: a_pow * (a_pow - 1.0) / (r * r) }
            }
            LyapunovForm::Custom(_) => unreachable!(),
        }
    }

    fn fit_patch(&self, rs: f64) -> Result<[f64; 3]> {
        let e = self.outer(rs);
        let w = e.log_w.exp();
        // unknowns A, B, C with p = 1 + A y^2 + B y^4 + C y^6, y = x / rs
        let m = Matrix3::new(1.0, 1.0, 1.0, 2.0, 4.0, 6.0, 2.0, 12.0, 30.0);
        let rhs = Vector3::new(w - 1.0, rs * e.d1 * w, rs * rs * e.d2 * w);
        let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Certificate("singular patch system".into()))?;
        let coef = [sol[0] / rs.powi(2), sol[1] / rs.powi(4), sol[2] / rs.powi(6)];
        for i in 0..=400 {
            let x = rs * i as f64 / 400.0;
            let (p, dp, _) = patch_eval(&coef, x);
            if p < 1.0 - 1e-12 || dp < -1e-12 * w.max(1.0) {
                return Err(Error::Certificate(format!(
                    "smoothing patch on |x| <= {rs} violates W >= 1 or W' >= 0 at x = {x:.4}"
                )));
            }
        }
        Ok(coef)
    }

    pub fn eval(&self, x: f64) -> WEval {
        if let LyapunovForm::Custom(c) = &self.spec.form {
            let w = (c.w)(x);
            return WEval { log_w: w.ln(), d1: (c.dw)(x) / w, d2: (c.d2w)(x) / w };
        }
        let r = x.abs();
        if let Some(coef) = &self.patch {
            if r <= self.spec.smoothing_radius {
                let (p, dp, d2p) = patch_eval(coef, x);
                return WEval { log_w: p.ln(), d1: dp / p, d2: d2p / p };
            }
        }
        let e = self.outer(r);
        WEval { d1: e.d1 * x.signum(), ..e }
    }

    pub fn w(&self, x: f64) -> f64 {
        self.eval(x).log_w.exp()
    }

    /// LW / W = W''/W - U' W'/W.
    pub fn lw_over_w(&self, potential: &Potential, x: f64) -> Result<f64> {
        let (_, du, _) = potential.eval1(x)?;
        let e = self.eval(x);
        Ok(e.d2 - du * e.d1)
    }

    /// LW / xi(W).
    pub fn drift_ratio(&self, potential: &Potential, x: f64) -> Result<f64> {
        let e = self.eval(x);
        let q = self.lw_over_w(potential, x)? / self.spec.xi.ratio(e.log_w);
        if !q.is_finite() {
            return Err(Error::Evaluation { x, what: "LW / xi(W) is not finite".into() });
        }
        Ok(q)
    }

    /// Gradient weight omega(x) = 1 v 1/xi'(W(x)).
    pub fn gradient_weight(&self, x: f64) -> f64 {
        let e = self.eval(x);
        1.0f64.max(1.0 / self.spec.xi.derivative(e.log_w))
    }

    fn expected_phi_exponent(&self) -> Option<f64> {
        match (&self.spec.form, self.spec.xi) {
            (LyapunovForm::ExpPower { alpha, .. }, Xi::Identity) => Some(2.0 * (alpha - 1.0)),
            (LyapunovForm::ExpPower { alpha, .. }, Xi::LogPower { gamma, .. }) => Some(2.0 * (alpha + gamma - 1.0)),
            (LyapunovForm::PurePower { a_pow }, Xi::PowerTail { b_exp }) => Some(a_pow * b_exp - 2.0),
            _ => None,
        }
    }
}

fn patch_eval(c: &[f64; 3], x: f64) -> (f64, f64, f64) {
    let x2 = x * x;
    let p = 1.0 + x2 * (c[0] + x2 * (c[1] + x2 * c[2]));
    let dp = x * (2.0 * c[0] + x2 * (4.0 * c[1] + x2 * 6.0 * c[2]));
    let d2p = 2.0 * c[0] + x2 * (12.0 * c[1] + x2 * 30.0 * c[2]);
    (p, dp, d2p)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovCertificate {
    pub form: String,
    pub a: Option<f64>,
    pub xi: String,
    pub phi_exponent: f64,
    #[serde(rename = "C_rate")]
    pub c_rate: f64,
    pub b: f64,
    pub r0: f64,
    pub margin_min: f64,
    pub c_rate_fitted: bool,
    pub admissible: bool,
    pub grid_radius: f64,
    /// true when W fell below the threshold where xi uses its tangent line
    pub xi_extended: bool,
    #[serde(skip)]
    pub margin_profile: Vec<(f64, f64)>,
}

struct Scan {
    r0: f64,
    b: f64,
    margin_min: f64,
}

fn scan(grid: &[f64], q: &[f64], c: f64, e: f64) -> Scan {
    let mut r0: f64 = 0.0;
    for (&x, &qi) in grid.iter().zip(q) {
        if qi + c * x.abs().powf(e) > 0.0 {
            r0 = r0.max(x.abs());
        }
    }
    let mut b: f64 = 0.0;
    let mut margin_min = f64::INFINITY;
    for (&x, &qi) in grid.iter().zip(q) {
        let v = qi + c * x.abs().powf(e);
        if x.abs() <= r0 {
            b = b.max(v);
        } else {
            margin_min = margin_min.min(-v);
        }
    }
    Scan { r0, b, margin_min }
}

pub fn certify(potential: &Potential, spec: &LyapunovSpec, grid: &[f64]) -> Result<LyapunovCertificate> {
    if grid.len() < 2 {
        return Err(Error::Input("certification grid needs at least 2 points".into()));
    }
    if potential.dim() != 1 {
        return Err(Error::Input("certification is one dimensional".into()));
    }
    let lyap = Lyapunov::new(spec.clone())?;
    let e = spec.phi.exponent;
    if let Some(expected) = lyap.expected_phi_exponent() {
        if (expected - e).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::Certificate(format!(
                "phi exponent {e} does not match {expected} implied by W and xi"
            )));
        }
    }
    let q: Vec<f64> = grid.iter().map(|&x| lyap.drift_ratio(potential, x)).collect::<Result<_>>()?;
    let radius = grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let ok = |c: f64| scan(grid, &q, c, e).r0 <= 0.5 * radius;

    let (c_rate, fitted) = match spec.phi.c_rate {
        Some(c) => (c, false),
        None => {
            if !ok(1e-6) {
                log::warn!("no admissible rate: even C = 1e-6 leaves LW + phi xi(W) > 0 beyond half the grid radius {radius}");
                (1e-6, true)
            } else {
                let mut lo = 1e-6;
                let mut hi = 2e-6;
                while ok(hi) && hi < 1e12 {
                    lo = hi;
                    hi *= 2.0;
                }
                while hi - lo > 1e-3 * lo {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo, true)
            }
        }
    };
    let s = scan(grid, &q, c_rate, e);
    let admissible = c_rate >= 1e-6 && s.r0 <= 0.5 * radius;
    if !fitted && !admissible {
        log::warn!("fixed C_rate = {c_rate} leaves r0 = {} beyond half the grid radius", s.r0);
    }
    let threshold = spec.xi.closed_form_threshold();
    let xi_extended = threshold.is_some_and(|t| grid.iter().any(|&x| lyap.eval(x).log_w < t.ln()));
    let margin_profile = grid.iter().zip(&q).map(|(&x, &qi)| (x, -qi - c_rate * x.abs().powf(e))).collect();
    let (form, a) = match &spec.form {
        LyapunovForm::ExpPower { a, alpha } => (format!("exp_power(alpha={alpha})"), Some(*a)),
        LyapunovForm::PurePower { a_pow } => ("pure_power".to_string(), Some(*a_pow)),
        LyapunovForm::Custom(c) => (format!("custom({})", c.name), None),
    };
    Ok(LyapunovCertificate {
        form,
        a,
        xi: spec.xi.describe(),
        phi_exponent: e,
        c_rate,
        b: s.b,
        r0: s.r0,
        margin_min: if s.margin_min.is_finite() { s.margin_min + 0.0 } else { 0.0 },
        c_rate_fitted: fitted,
        admissible,
        grid_radius: radius,
        xi_extended,
        margin_profile,
    })
}

/// W = e^{a|x|^alpha} with a = 1/(4 c alpha), xi from gamma, and phi
/// exponent 2(alpha + gamma - 1).
pub fn suggest_exp_lyapunov(hyp: &DriftHypothesis, gamma: f64) -> Result<LyapunovSpec> {
    let alpha = hyp.alpha;
    if !(gamma >= 0.0 && gamma > 1.0 - alpha) {
        return Err(Error::Parameter(format!(
            "gamma must satisfy gamma >= 0 and gamma > 1 - alpha (got gamma = {gamma}, alpha = {alpha})"
        )));
    }
    if !(hyp.c > 0.0 && alpha > 0.0) {
        return Err(Error::Parameter(format!("need c > 0 and alpha > 0 (got {}, {alpha})", hyp.c)));
    }
    let xi = if gamma == 0.0 { Xi::Identity } else { Xi::LogPower { gamma, alpha } };
    Ok(LyapunovSpec {
        form: LyapunovForm::ExpPower { a: 1.0 / (4.0 * hyp.c * alpha), alpha },
        smoothing_radius: if alpha >= 2.0 { 0.0 } else { 1.0 },
        xi,
        phi: PowerRate { c_rate: None, exponent: 2.0 * (alpha + gamma - 1.0) },
    })
}

/// sup over the grid of omega(x) / (1 v |x|^{2 gamma}).
pub fn gradient_weight_constant(lyap: &Lyapunov, grid: &[f64], gamma: f64) -> f64 {
    grid.iter()
        .map(|&x| lyap.gradient_weight(x) / 1.0f64.max(x.abs().powf(2.0 * gamma)))
        .fold(0.0, f64::max)
}

pub fn custom_lyapunov(name: &str, w: ScalarFn, dw: ScalarFn, d2w: ScalarFn) -> LyapunovForm {
    LyapunovForm::Custom(CustomLyapunov { name: name.to_string(), w, dw, d2w })
}
