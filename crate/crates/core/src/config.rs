//! TOML run configuration with field-level validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::InvariantTolerances;

pub const PRESETS: [(&str, &str); 4] = [
    ("ou", include_str!("../presets/ou.toml")),
    ("subexp_alpha3", include_str!("../presets/subexp_alpha3.toml")),
    ("cauchy_a1", include_str!("../presets/cauchy_a1.toml")),
    ("heat_baseline", include_str!("../presets/heat_baseline.toml")),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    pub grid: GridConfig,
    pub hypothesis: Option<HypothesisConfig>,
    pub lyapunov: Option<LyapunovConfig>,
    pub spi: Option<SpiConfig>,
    pub kernel: Option<KernelConfig>,
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// quadratic | power_exponential | generalized_cauchy | flat
    pub family: String,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub half_width: Option<f64>,
    #[serde(default = "one_usize")]
    pub dim: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub radius: f64,
    #[serde(default = "default_tail_tol")]
    pub tail_mass_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    pub c: f64,
    pub alpha: f64,
    pub delta: f64,
    #[serde(default)]
    pub cauchy: bool,
    #[serde(default = "default_eps_tol")]
    pub eps_tol: f64,
    #[serde(default = "default_verify_radius")]
    pub verify_radius: f64,
    #[serde(default = "default_verify_points")]
    pub verify_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// exp_power | pure_power
    pub form: String,
    #[serde(default)]
    pub gamma: f64,
    /// exp_power coefficient; defaults to 1/(4 c alpha) from the hypothesis
    pub a: Option<f64>,
    pub alpha: Option<f64>,
    pub a_pow: Option<f64>,
    /// identity | log_power | power_tail; defaults follow the form
    pub xi: Option<String>,
    pub b_exp: Option<f64>,
    pub phi_exponent: Option<f64>,
    pub c_rate: Option<f64>,
    pub smoothing_radius: Option<f64>,
    #[serde(default = "default_verify_radius")]
    pub radius: f64,
    #[serde(default = "default_verify_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiConfig {
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_s_points")]
    pub s_points: usize,
    pub n: Option<usize>,
    pub radius: Option<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// envelope exponent; derived from the hypothesis when absent
    pub p: Option<f64>,
    pub n: Option<usize>,
    pub radius: Option<f64>,
    #[serde(default = "default_invariant_times")]
    pub invariant_times: Vec<f64>,
    pub ondiag: Option<TimeWindow>,
    pub offdiag: Option<OffDiagConfig>,
    pub longtime: Option<TimeWindow>,
    pub poincare: Option<PoincareConfig>,
    pub twist: Option<TwistConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(default)]
    pub log_spaced: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffDiagConfig {
    pub epsilon: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default = "default_gaussian_floor")]
    pub gaussian_floor: f64,
    #[serde(default = "default_sample_stride")]
    pub sample_stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    /// one | one_plus_x2 | lyapunov
    pub omega: String,
    pub radius: Option<f64>,
    /// grid sizes; the last two are compared for refinement stability
    pub n: Vec<usize>,
    #[serde(default = "default_refinement_tol")]
    pub refinement_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistConfig {
    pub a: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    #[serde(default = "default_quad_range")]
    pub quad_range: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t: f64,
    #[serde(default)]
    pub x0: f64,
    /// none | csv | binary
    #[serde(default = "default_samples_format")]
    pub samples: String,
    #[serde(default)]
    pub detailed_balance_paths: usize,
    #[serde(default = "default_db_bins")]
    pub detailed_balance_bins: usize,
}

/// Slack tolerances; `scaled` multiplies all of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_slope_tol")]
    pub slope: f64,
    #[serde(default = "default_blowup")]
    pub offdiag_factor: f64,
    #[serde(default = "default_longtime_fraction")]
    pub longtime_fraction: f64,
    #[serde(default = "default_mc_l1")]
    pub mc_l1: f64,
    #[serde(default = "default_db_z")]
    pub detailed_balance_z: f64,
    #[serde(default)]
    pub invariants: InvariantTolerances,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slope: default_slope_tol(),
            offdiag_factor: default_blowup(),
            longtime_fraction: default_longtime_fraction(),
            mc_l1: default_mc_l1(),
            detailed_balance_z: default_db_z(),
            invariants: InvariantTolerances::default(),
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, k: f64) -> Tolerances {
        Tolerances {
            slope: self.slope * k,
            offdiag_factor: self.offdiag_factor * k,
            longtime_fraction: self.longtime_fraction / k,
            mc_l1: self.mc_l1 * k,
            detailed_balance_z: self.detailed_balance_z * k,
            invariants: InvariantTolerances {
                row_stochasticity: self.invariants.row_stochasticity * k,
                chapman_kolmogorov: self.invariants.chapman_kolmogorov * k,
                orthonormality: self.invariants.orthonormality * k,
                lambda0: self.invariants.lambda0 * k,
            },
        }
    }
}

fn one_usize() -> usize {
    1
}
fn default_tail_tol() -> f64 {
    1e-6
}
fn default_eps_tol() -> f64 {
    0.05
}
fn default_verify_radius() -> f64 {
    10.0
}
fn default_verify_points() -> usize {
    2001
}
fn default_s_min() -> f64 {
    1e-3
}
fn default_s_max() -> f64 {
    1e-1
}
fn default_s_points() -> usize {
    9
}
fn default_restarts() -> usize {
    20
}
fn default_max_iter() -> usize {
    10_000
}
fn default_rel_tol() -> f64 {
    1e-8
}
fn default_invariant_times() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}
fn default_gaussian_floor() -> f64 {
    1e-12
}
fn default_sample_stride() -> usize {
    10
}
fn default_refinement_tol() -> f64 {
    0.1
}
fn default_quad_range() -> [f64; 2] {
    [0.5, 1.2]
}
fn default_samples_format() -> String {
    "none".into()
}
fn default_db_bins() -> usize {
    12
}
fn default_slope_tol() -> f64 {
    0.3
}
fn default_blowup() -> f64 {
    3.0
}
fn default_longtime_fraction() -> f64 {
    0.9
}
fn default_mc_l1() -> f64 {
    0.05
}
fn default_db_z() -> f64 {
    4.0
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(vec![format!("parse: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Config> {
        let text = preset(name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            Error::Config(vec![format!("unknown preset {name:?}; available: {}", names.join(", "))])
        })?;
        Config::from_toml(text)
    }

    /// sha256 of the canonical JSON form. The execution policy is left out
    /// since it does not change any result.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.execution = Execution::default();
        let json = serde_json::to_string(&canon).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let p = &self.potential;
        match p.family.as_str() {
            "quadratic" => need(p.kappa.is_some_and(|k| k > 0.0), "potential.kappa: required and > 0 for quadratic".into()),
            "power_exponential" | "generalized_cauchy" => need(
                p.alpha.is_some_and(|a| a > 0.0),
                format!("potential.alpha: required and > 0 for {}", p.family),
            ),
            "flat" => need(p.half_width.is_some_and(|l| l > 0.0), "potential.half_width: required and > 0 for flat".into()),
            other => need(false, format!(
                "potential.family: unknown {other:?} (quadratic, power_exponential, generalized_cauchy, flat)"
            )),
        }
        need(p.dim == 1, format!("potential.dim: numerics are one dimensional, got {}", p.dim));
        need(self.grid.n >= 100, format!("grid.n: must be >= 100, got {}", self.grid.n));
        need(self.grid.radius > 0.0, format!("grid.radius: must be > 0, got {}", self.grid.radius));
        need(
            self.grid.tail_mass_tol > 0.0 && self.grid.tail_mass_tol < 1.0,
            format!("grid.tail_mass_tol: must be in (0, 1), got {}", self.grid.tail_mass_tol),
        );
        if p.family == "flat" {
            if let Some(l) = p.half_width {
                need(self.grid.radius <= l, format!("grid.radius: {} exceeds potential.half_width {l}", self.grid.radius));
            }
        }
        if let Some(h) = &self.hypothesis {
            need(h.c > 0.0, format!("hypothesis.c: must be > 0, got {}", h.c));
            need(h.alpha > 0.0, format!("hypothesis.alpha: must be > 0, got {}", h.alpha));
            need(h.delta >= 0.0, format!("hypothesis.delta: must be >= 0, got {}", h.delta));
            need(h.eps_tol > 0.0 && h.eps_tol < 1.0, format!("hypothesis.eps_tol: must be in (0, 1), got {}", h.eps_tol));
            need(h.verify_radius >= 5.0, format!("hypothesis.verify_radius: must be >= 5, got {}", h.verify_radius));
            need(h.verify_points >= 2, "hypothesis.verify_points: must be >= 2".into());
        }
        if let Some(l) = &self.lyapunov {
            match l.form.as_str() {
                "exp_power" => {
                    let alpha = l.alpha.or(self.hypothesis.as_ref().map(|h| h.alpha));
                    match alpha {
                        Some(alpha) => need(
                            l.gamma >= 0.0 && l.gamma > 1.0 - alpha,
                            format!(
                                "lyapunov.gamma: must satisfy gamma >= 0 and gamma > 1 - alpha (got gamma = {}, alpha = {alpha})",
                                l.gamma
                            ),
                        ),
                        None => need(false, "lyapunov.alpha: required when there is no [hypothesis] section".into()),
                    }
                    need(
                        l.a.is_some() || self.hypothesis.is_some(),
                        "lyapunov.a: required when there is no [hypothesis] section".into(),
                    );
                }
                "pure_power" => {
                    need(l.a_pow.is_some_and(|a| a > 0.0), "lyapunov.a_pow: required and > 0 for pure_power".into());
                    need(l.b_exp.is_some_and(|b| (0.0..1.0).contains(&b)), "lyapunov.b_exp: required in [0, 1) for pure_power".into());
                }
                other => need(false, format!("lyapunov.form: unknown {other:?} (exp_power, pure_power)")),
            }
            if let Some(xi) = &l.xi {
                need(
                    matches!(xi.as_str(), "identity" | "log_power" | "power_tail"),
                    format!("lyapunov.xi: unknown {xi:?} (identity, log_power, power_tail)"),
                );
            }
            if let Some(c) = l.c_rate {
                need(c > 0.0, format!("lyapunov.c_rate: must be > 0, got {c}"));
            }
            need(l.points >= 2 && l.radius > 0.0, "lyapunov.radius/points: need radius > 0 and points >= 2".into());
        }
        if let Some(s) = &self.spi {
            need(self.lyapunov.is_some(), "spi: requires a [lyapunov] section".into());
            need(self.hypothesis.is_some(), "spi: requires a [hypothesis] section".into());
            need(s.s_min > 0.0 && s.s_min < s.s_max, format!("spi.s_min/s_max: need 0 < s_min < s_max, got {} / {}", s.s_min, s.s_max));
            need(s.s_points >= 3, format!("spi.s_points: must be >= 3, got {}", s.s_points));
            need(s.n.unwrap_or(self.grid.n) >= 200, "spi.n: empirical grid must have >= 200 points".into());
            need(s.restarts >= 1 && s.max_iter >= 1, "spi.restarts/max_iter: must be >= 1".into());
        }
        if let Some(k) = &self.kernel {
            need(k.n.unwrap_or(self.grid.n) >= 100, "kernel.n: must be >= 100".into());
            need(k.invariant_times.iter().all(|&t| t > 0.0), "kernel.invariant_times: must be > 0".into());
            let needs_p = k.ondiag.is_some() || k.offdiag.is_some() || k.twist.is_some();
            need(
                !needs_p || k.p.is_some() || self.hypothesis.is_some(),
                "kernel.p: required for ondiag/offdiag/twist when there is no [hypothesis] section".into(),
            );
            for (name, w) in [("ondiag", &k.ondiag), ("longtime", &k.longtime)] {
                if let Some(w) = w {
                    need(
                        w.t_min > 0.0 && w.t_min < w.t_max && w.points >= 3,
                        format!("kernel.{name}: need 0 < t_min < t_max and points >= 3"),
                    );
                }
            }
            if let Some(w) = &k.longtime {
                need(w.t_min >= 1.0 && w.t_max <= 20.0, "kernel.longtime: times must lie in [1, 20]".into());
            }
            if let Some(o) = &k.offdiag {
                need(
                    o.epsilon > 0.0 || (o.epsilon == 0.0 && o.baseline),
                    format!("kernel.offdiag.epsilon: must be > 0 (0 only with baseline = true), got {}", o.epsilon),
                );
                need(o.t_min > 0.0 && o.t_max > 10.0 * o.t_min, "kernel.offdiag: t range must span more than a decade".into());
                need(o.points >= 4, "kernel.offdiag.points: must be >= 4".into());
            }
            if let Some(pc) = &k.poincare {
                need(
                    matches!(pc.omega.as_str(), "one" | "one_plus_x2" | "lyapunov"),
                    format!("kernel.poincare.omega: unknown {:?} (one, one_plus_x2, lyapunov)", pc.omega),
                );
                need(!pc.n.is_empty() && pc.n.iter().all(|&n| n >= 100), "kernel.poincare.n: sizes must be >= 100".into());
                need(pc.omega != "lyapunov" || self.lyapunov.is_some(), "kernel.poincare.omega: lyapunov needs a [lyapunov] section".into());
            }
            if let Some(tw) = &k.twist {
                need(tw.a.len() >= 3, "kernel.twist.a: need at least 3 values".into());
                need(tw.t_min > 0.0 && tw.t_min < tw.t_max && tw.points >= 3, "kernel.twist: need 0 < t_min < t_max, points >= 3".into());
            }
        }
        if let Some(m) = &self.mc {
            need(self.kernel.is_some(), "mc: requires a [kernel] section for the reference density".into());
            need(m.n_paths >= 2, format!("mc.n_paths: must be >= 2, got {}", m.n_paths));
            need(m.dt > 0.0 && m.t > 0.0, format!("mc.dt/t: must be > 0, got {} / {}", m.dt, m.t));
            need(m.x0.abs() < self.grid.radius, format!("mc.x0: must lie inside the grid, got {}", m.x0));
            need(matches!(m.samples.as_str(), "none" | "csv" | "binary"), format!("mc.samples: unknown {:?} (none, csv, binary)", m.samples));
            need(m.detailed_balance_bins >= 2, "mc.detailed_balance_bins: must be >= 2".into());
        }
        let t = &self.tolerances;
        need(
            t.slope > 0.0 && t.offdiag_factor > 0.0 && t.longtime_fraction > 0.0 && t.mc_l1 > 0.0,
            "tolerances: all entries must be > 0".into(),
        );
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
