//! Runs the configured stages and collects pass flags, JSON results and
//! CSV tables.

use std::cell::OnceCell;
use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, TimeWindow, Tolerances};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{lin_space, log_space, Grid};
use crate::kernel::{self, KernelSpectrum, OffDiagOptions, TwistProfile};
use crate::lyapunov::{self, Lyapunov, LyapunovCertificate, LyapunovForm, LyapunovSpec, PowerRate, Xi};
use crate::montecarlo::{self, SimConfig};
use crate::potentials::{check_drift_hypothesis, DriftHypothesis, Potential};
use crate::spi::empirical::{empirical_curve, EmpiricalProblem, PgaSettings};
use crate::spi::{self, Weight};

pub const STAGES: [&str; 5] = ["hypothesis", "lyapunov", "spi", "kernel", "mc"];

#[derive(Debug, Clone)]
pub enum TableData {
    Numeric { header: Vec<String>, rows: Vec<Vec<f64>> },
    Binary(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub data: TableData,
}

impl Table {
    fn numeric(file: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Table {
        Table { file: file.into(), data: TableData::Numeric { header: header.iter().map(|h| h.to_string()).collect(), rows } }
    }

    pub fn bytes(&self) -> Vec<u8> {
        match &self.data {
            TableData::Binary(b) => b.clone(),
            TableData::Numeric { header, rows } => {
                let mut out = header.join(",");
                out.push('\n');
                for r in rows {
                    let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: String,
    pub checks: BTreeMap<String, bool>,
    pub result: Value,
    pub warnings: Vec<String>,
    pub tables: Vec<Table>,
}

impl StageReport {
    pub fn pass(&self) -> bool {
        self.checks.values().all(|&c| c)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn times(w: &TimeWindow) -> Vec<f64> {
    if w.log_spaced {
        log_space(w.t_min, w.t_max, w.points)
    } else {
        lin_space(w.t_min, w.t_max, w.points)
    }
}

pub struct Session {
    pub cfg: Config,
    pub tol: Tolerances,
    pub exec: Execution,
    potential: OnceCell<Potential>,
    spectrum: OnceCell<(KernelSpectrum, Vec<String>)>,
    certificate: OnceCell<(Lyapunov, LyapunovCertificate)>,
}

impl Session {
    pub fn new(cfg: Config, tol_scale: f64) -> Session {
        let tol = cfg.tolerances.scaled(tol_scale);
        let exec = cfg.execution;
        Session { cfg, tol, exec, potential: OnceCell::new(), spectrum: OnceCell::new(), certificate: OnceCell::new() }
    }

    pub fn potential(&self) -> Result<&Potential> {
        if let Some(p) = self.potential.get() {
            return Ok(p);
        }
        let pc = &self.cfg.potential;
        let p = match pc.family.as_str() {
            "quadratic" => Potential::quadratic(pc.kappa.unwrap_or(1.0), pc.dim)?,
            "power_exponential" => Potential::power_exponential(pc.alpha.unwrap_or(2.0), pc.dim)?,
            "generalized_cauchy" => Potential::generalized_cauchy(pc.alpha.unwrap_or(1.0), pc.dim)?,
            "flat" => Potential::flat(pc.half_width.unwrap_or(1.0))?,
            other => return Err(Error::Config(vec![format!("potential.family: unknown {other:?}")])),
        };
        Ok(self.potential.get_or_init(|| p))
    }

    fn weight(&self) -> Weight {
        Weight { beta: self.cfg.weight.beta }
    }

    fn hypothesis(&self) -> Result<DriftHypothesis> {
        let h = self.cfg.hypothesis.as_ref().ok_or_else(|| Error::Config(vec!["hypothesis: section missing".into()]))?;
        Ok(DriftHypothesis { c: h.c, alpha: h.alpha, delta: h.delta, cauchy_mode: h.cauchy, eps_tol: h.eps_tol })
    }

    pub fn lyapunov_spec(&self) -> Result<LyapunovSpec> {
        let l = self.cfg.lyapunov.as_ref().ok_or_else(|| Error::Config(vec!["lyapunov: section missing".into()]))?;
        let mut spec = match l.form.as_str() {
            "exp_power" => {
                let base = match (&self.cfg.hypothesis, l.a) {
                    (Some(_), _) => lyapunov::suggest_exp_lyapunov(&self.hypothesis()?, l.gamma)?,
                    (None, Some(a)) => {
                        let alpha = l.alpha.unwrap_or(2.0);
                        let xi = if l.gamma == 0.0 { Xi::Identity } else { Xi::LogPower { gamma: l.gamma, alpha } };
                        LyapunovSpec {
                            form: LyapunovForm::ExpPower { a, alpha },
                            smoothing_radius: if alpha >= 2.0 { 0.0 } else { 1.0 },
                            xi,
                            phi: PowerRate { c_rate: None, exponent: 2.0 * (alpha + l.gamma - 1.0) },
                        }
                    }
                    (None, None) => return Err(Error::Config(vec!["lyapunov.a: required without [hypothesis]".into()])),
                };
                let LyapunovForm::ExpPower { a, alpha } = base.form else { unreachable!() };
                LyapunovSpec { form: LyapunovForm::ExpPower { a: l.a.unwrap_or(a), alpha: l.alpha.unwrap_or(alpha) }, ..base }
            }
            "pure_power" => {
                let a_pow = l.a_pow.unwrap_or(2.0);
                let b_exp = l.b_exp.unwrap_or(0.0);
                LyapunovSpec {
                    form: LyapunovForm::PurePower { a_pow },
                    smoothing_radius: 1.0,
                    xi: Xi::PowerTail { b_exp },
                    phi: PowerRate { c_rate: None, exponent: a_pow * b_exp - 2.0 },
                }
            }
            other => return Err(Error::Config(vec![format!("lyapunov.form: unknown {other:?}")])),
        };
        if let Some(xi) = &l.xi {
            spec.xi = match xi.as_str() {
                "identity" => Xi::Identity,
                "log_power" => {
                    let alpha = match spec.form {
                        LyapunovForm::ExpPower { alpha, .. } => alpha,
                        _ => l.alpha.unwrap_or(1.0),
                    };
                    Xi::LogPower { gamma: l.gamma, alpha }
                }
                _ => Xi::PowerTail { b_exp: l.b_exp.unwrap_or(0.0) },
            };
        }
        if let Some(r) = l.smoothing_radius {
            spec.smoothing_radius = r;
        }
        if let Some(e) = l.phi_exponent {
            spec.phi.exponent = e;
        }
        spec.phi.c_rate = l.c_rate;
        Ok(spec)
    }

    fn certificate(&self) -> Result<&(Lyapunov, LyapunovCertificate)> {
        if let Some(c) = self.certificate.get() {
            return Ok(c);
        }
        let l = self.cfg.lyapunov.as_ref().ok_or_else(|| Error::Config(vec!["lyapunov: section missing".into()]))?;
        let spec = self.lyapunov_spec()?;
        let grid = lin_space(-l.radius, l.radius, l.points);
        let cert = lyapunov::certify(self.potential()?, &spec, &grid)?;
        let lyap = Lyapunov::new(spec)?;
        Ok(self.certificate.get_or_init(|| (lyap, cert)))
    }

    pub fn spectrum(&self) -> Result<&KernelSpectrum> {
        Ok(&self.spectrum_with_warnings()?.0)
    }

    fn spectrum_with_warnings(&self) -> Result<&(KernelSpectrum, Vec<String>)> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let (n, r) = self.kernel_box();
        let generator = kernel::build_generator(self.potential()?, n, r, self.cfg.grid.tail_mass_tol)?;
        let warnings = generator.warnings.clone();
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(self.spectrum.get_or_init(|| (kernel::spectrum(&generator), warnings)))
    }

    fn kernel_box(&self) -> (usize, f64) {
        let k = self.cfg.kernel.as_ref();
        (
            k.and_then(|k| k.n).unwrap_or(self.cfg.grid.n),
            k.and_then(|k| k.radius).unwrap_or(self.cfg.grid.radius),
        )
    }

    /// Envelope exponent p for the configured weight.
    pub fn exponent(&self) -> Result<f64> {
        if let Some(p) = self.cfg.kernel.as_ref().and_then(|k| k.p) {
            return Ok(p);
        }
        let h = self.hypothesis()?;
        let beta = self.cfg.weight.beta;
        let d = self.cfg.potential.dim;
        if h.cauchy_mode {
            let e = self.lyapunov_spec()?.phi.exponent;
            spi::exponent_p_cauchy(h.alpha, 2.0 / e, h.delta, beta, d)
        } else {
            let gamma = self.cfg.lyapunov.as_ref().map_or(0.0, |l| l.gamma);
            spi::exponent_p(h.alpha, gamma, h.delta, beta, d)
        }
    }

    pub fn run(&self, stage: &str) -> Result<StageReport> {
        match stage {
            "hypothesis" => self.run_hypothesis(),
            "lyapunov" => self.run_lyapunov(),
            "spi" => self.run_spi(),
            "kernel" => self.run_kernel(),
            "mc" => self.run_mc(),
            other => Err(Error::Input(format!("unknown stage {other:?}"))),
        }
    }

    pub fn configured(&self, stage: &str) -> bool {
        match stage {
            "hypothesis" => self.cfg.hypothesis.is_some(),
            "lyapunov" => self.cfg.lyapunov.is_some(),
            "spi" => self.cfg.spi.is_some(),
            "kernel" => self.cfg.kernel.is_some(),
            "mc" => self.cfg.mc.is_some(),
            _ => false,
        }
    }

    fn run_hypothesis(&self) -> Result<StageReport> {
        let h = self.cfg.hypothesis.as_ref().ok_or_else(|| Error::Config(vec!["hypothesis: section missing".into()]))?;
        let hyp = self.hypothesis()?;
        let potential = self.potential()?;
        let grid = lin_space(-h.verify_radius, h.verify_radius, h.verify_points);
        let report = check_drift_hypothesis(potential, &hyp, &grid)?;
        let mut rows = Vec::with_capacity(grid.len());
        for &x in &grid {
            let (_, du, _) = potential.eval1(x)?;
            let growth = du * x - x.abs().powf(hyp.alpha) / hyp.c + hyp.c;
            let gradient = hyp.c * 1.0f64.max(x.abs().powf(hyp.delta)) - du.abs();
            rows.push(vec![x, du, growth, gradient]);
        }
        Ok(StageReport {
            stage: "hypothesis".into(),
            checks: BTreeMap::from([("drift_hypothesis".to_string(), report.pass)]),
            result: json!({ "potential": potential.label(), "hypothesis": to_value(&hyp), "report": to_value(&report) }),
            warnings: Vec::new(),
            tables: vec![Table::numeric("hypothesis.csv", &["x", "grad_u", "growth_margin", "gradient_margin"], rows)],
        })
    }

    fn run_lyapunov(&self) -> Result<StageReport> {
        let (lyap, cert) = self.certificate()?;
        let gamma = self.cfg.lyapunov.as_ref().map_or(0.0, |l| l.gamma);
        let l = self.cfg.lyapunov.as_ref().expect("checked by certificate");
        let grid = lin_space(-l.radius, l.radius, l.points);
        let omega_constant = lyapunov::gradient_weight_constant(lyap, &grid, gamma);
        let mut warnings = Vec::new();
        if cert.xi_extended {
            warnings.push("W falls below the log-power threshold; xi uses its tangent-line extension there".into());
        }
        let rows = cert.margin_profile.iter().map(|&(x, m)| vec![x, m]).collect();
        Ok(StageReport {
            stage: "lyapunov".into(),
            checks: BTreeMap::from([("certificate_admissible".to_string(), cert.admissible)]),
            result: json!({ "certificate": to_value(cert), "gradient_weight_constant": omega_constant }),
            warnings,
            tables: vec![Table::numeric("lyapunov_margin.csv", &["x", "margin"], rows)],
        })
    }

    fn run_spi(&self) -> Result<StageReport> {
        let sc = self.cfg.spi.as_ref().ok_or_else(|| Error::Config(vec!["spi: section missing".into()]))?;
        let potential = self.potential()?;
        let (lyap, cert) = self.certificate()?;
        let weight = self.weight();
        let p = self.exponent()?;
        let l = self.cfg.lyapunov.as_ref().expect("checked by certificate");
        let profile_grid = lin_space(-l.radius, l.radius, l.points);
        let mut profile = spi::profile_from_certificate(potential, cert, &weight, p, &profile_grid)?;

        let n = sc.n.unwrap_or(self.cfg.grid.n);
        let radius = sc.radius.unwrap_or(self.cfg.grid.radius);
        let grid = Grid::symmetric(n, radius)?;
        let omega = |x: f64| lyap.gradient_weight(x);
        let problem = EmpiricalProblem::new(potential, &grid, &omega, &weight)?;
        let settings = PgaSettings { restarts: sc.restarts, max_iter: sc.max_iter, rel_tol: sc.rel_tol, seed: self.cfg.seed };
        let mut s_values = log_space(sc.s_min, sc.s_max, sc.s_points);
        let fit_count = s_values.len();
        s_values.push(profile.s0);
        let curve = empirical_curve(&problem, &s_values, &settings, self.exec);
        let b_s0 = curve[fit_count].value;
        profile.calibrate(b_s0);

        let (xs, ys): (Vec<f64>, Vec<f64>) =
            curve[..fit_count].iter().map(|e| ((1.0 / e.s).ln(), e.value.ln())).unzip();
        let slope = crate::linalg::linear_fit(&xs, &ys).0;
        let mut rows = Vec::new();
        let mut dominated = true;
        for e in &curve {
            let bt = profile.b(e.s);
            if e.s <= profile.s0 * (1.0 + 1e-12) && bt < e.value {
                dominated = false;
            }
            rows.push(vec![e.s, bt, e.value, e.value / bt]);
        }
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut warnings = Vec::new();
        let unconverged: Vec<f64> = curve.iter().filter(|e| !e.converged).map(|e| e.s).collect();
        if !unconverged.is_empty() {
            warnings.push(format!("projected gradient ascent hit the iteration cap at s = {unconverged:?}"));
        }
        let structural: Vec<(f64, f64)> = curve.iter().map(|e| (e.s, profile.structural_b(e.s))).collect();
        Ok(StageReport {
            stage: "spi".into(),
            checks: BTreeMap::from([
                ("slope".to_string(), slope.is_finite() && slope <= p + self.tol.slope),
                ("domination".to_string(), dominated),
            ]),
            result: json!({
                "p": p,
                "fitted_slope": slope,
                "slope_tol": self.tol.slope,
                "profile": to_value(&profile),
                "b_empirical_s0": b_s0,
                "empirical": to_value(&curve),
                "structural_b": structural,
                "grid": { "n": n, "radius": radius },
            }),
            warnings,
            tables: vec![Table::numeric("spi.csv", &["s", "b_theory", "b_empirical", "ratio"], rows)],
        })
    }

    fn run_kernel(&self) -> Result<StageReport> {
        let kc = self.cfg.kernel.as_ref().ok_or_else(|| Error::Config(vec!["kernel: section missing".into()]))?;
        let potential = self.potential()?;
        let (spectrum, generator_warnings) = self.spectrum_with_warnings()?;
        let generator_warnings = generator_warnings.clone();
        let weight = self.weight();
        let (n, r) = self.kernel_box();
        let mut checks = BTreeMap::new();
        let mut result = serde_json::Map::new();
        let mut tables = Vec::new();

        let inv = spectrum.invariants(&kc.invariant_times, self.exec)?;
        checks.insert("invariants".to_string(), inv.pass(&self.tol.invariants));
        result.insert("invariants".into(), to_value(&inv));
        result.insert("grid".into(), json!({ "n": n, "radius": r }));

        let needs_p = kc.ondiag.is_some() || kc.offdiag.is_some() || kc.twist.is_some();
        let p = if needs_p { Some(self.exponent()?) } else { None };
        result.insert("p".into(), json!(p));

        if let Some(w) = &kc.ondiag {
            let rep = kernel::verify_ondiag(spectrum, potential, &weight, p.unwrap_or(0.5), &times(w), self.tol.slope, self.exec)?;
            checks.insert("ondiag".into(), rep.pass);
            tables.push(Table::numeric("ondiag.csv", &["t", "m"], rep.times.iter().zip(&rep.m).map(|(t, m)| vec![*t, *m]).collect()));
            result.insert("ondiag".into(), to_value(&rep));
        }
        if let Some(o) = &kc.offdiag {
            let opts = OffDiagOptions {
                epsilon: o.epsilon,
                ultracontractive_baseline: o.baseline,
                gaussian_floor: o.gaussian_floor,
                blowup_factor: self.tol.offdiag_factor,
                sample_stride: o.sample_stride,
            };
            let rep = kernel::verify_offdiag(spectrum, potential, &weight, p.unwrap_or(0.5), &opts, &log_space(o.t_min, o.t_max, o.points), self.exec)?;
            checks.insert("offdiag".into(), rep.pass);
            let rows = rep.rows.iter().map(|r| vec![r.x, r.y, r.t, r.p_t, r.envelope, r.ratio]).collect();
            tables.push(Table::numeric("kernel.csv", &["x", "y", "t", "p_t", "envelope", "ratio"], rows));
            result.insert("offdiag".into(), to_value(&rep));
        }
        if let Some(w) = &kc.longtime {
            let rep = kernel::verify_longtime(spectrum, potential, &weight, &times(w), self.tol.longtime_fraction, self.exec)?;
            checks.insert("longtime".into(), rep.pass);
            tables.push(Table::numeric(
                "longtime.csv",
                &["t", "deviation"],
                rep.times.iter().zip(&rep.deviation).map(|(t, d)| vec![*t, *d]).collect(),
            ));
            result.insert("longtime".into(), to_value(&rep));
        }
        if let Some(pc) = &kc.poincare {
            let radius = pc.radius.unwrap_or(r);
            let lyap = if pc.omega == "lyapunov" { Some(&self.certificate()?.0) } else { None };
            let omega = |x: f64| match pc.omega.as_str() {
                "one_plus_x2" => 1.0 + x * x,
                "lyapunov" => lyap.map_or(1.0, |l| l.gradient_weight(x)),
                _ => 1.0,
            };
            let gaps = pc
                .n
                .iter()
                .map(|&m| kernel::poincare_gap(potential, &omega, m, radius, self.cfg.grid.tail_mass_tol))
                .collect::<Result<Vec<_>>>()?;
            let positive = gaps.iter().all(|g| g.lambda1 > 0.0);
            let change = if gaps.len() >= 2 {
                let (a, b) = (gaps[gaps.len() - 2].lambda1, gaps[gaps.len() - 1].lambda1);
                (b - a).abs() / b.abs()
            } else {
                0.0
            };
            checks.insert("poincare_gap".into(), positive && change <= pc.refinement_tol);
            result.insert("poincare".into(), json!({ "omega": pc.omega, "gaps": to_value(&gaps), "refinement_change": change }));
        }
        if let Some(tw) = &kc.twist {
            let profile = TwistProfile::for_box(r);
            let rep = kernel::davies_twist_check(
                spectrum,
                potential,
                &weight,
                &profile,
                &tw.a,
                &log_space(tw.t_min, tw.t_max, tw.points),
                p.unwrap_or(0.5),
                tw.quad_range,
                self.exec,
            )?;
            checks.insert("twist".into(), rep.pass);
            tables.push(Table::numeric(
                "twist.csv",
                &["a", "k_hat", "k_formula"],
                rep.points.iter().map(|pt| vec![pt.a, pt.k_hat, pt.k_formula]).collect(),
            ));
            result.insert("twist".into(), to_value(&rep));
        }
        Ok(StageReport { stage: "kernel".into(), checks, result: Value::Object(result), warnings: generator_warnings, tables })
    }

    fn run_mc(&self) -> Result<StageReport> {
        let mc = self.cfg.mc.as_ref().ok_or_else(|| Error::Config(vec!["mc: section missing".into()]))?;
        let potential = self.potential()?;
        let spectrum = self.spectrum()?;
        let (_, r) = self.kernel_box();
        let sim = SimConfig { n_paths: mc.n_paths, dt: mc.dt, t_final: mc.t, x0: mc.x0, seed: self.cfg.seed, box_radius: r };
        let out = montecarlo::simulate(potential, &sim, self.exec)?;
        let cmp = montecarlo::compare_density(&out.samples, spectrum, mc.t, mc.x0, self.exec)?;
        let mut checks = BTreeMap::from([("density_l1".to_string(), cmp.l1 <= self.tol.mc_l1)]);
        let mut result = json!({ "simulation": to_value(&out), "density": to_value(&cmp), "l1_tol": self.tol.mc_l1 });
        if mc.detailed_balance_paths > 0 {
            let db_cfg = SimConfig { n_paths: mc.detailed_balance_paths, ..sim };
            let db = montecarlo::detailed_balance(potential, spectrum, &db_cfg, mc.detailed_balance_bins, self.exec)?;
            checks.insert("detailed_balance".into(), db.z.abs() <= self.tol.detailed_balance_z);
            result["detailed_balance"] = to_value(&db);
        }
        let w = spectrum.grid.trapezoid_weights();
        let rows = spectrum
            .grid
            .points
            .iter()
            .enumerate()
            .map(|(j, &y)| vec![y, cmp.kde[j], cmp.spectral[j] * spectrum.mu[j] / w[j]])
            .collect();
        let mut tables = vec![Table::numeric("mc_density.csv", &["y", "kde", "spectral"], rows)];
        match mc.samples.as_str() {
            "csv" => tables.push(Table::numeric("samples.csv", &["x"], out.samples.iter().map(|&x| vec![x]).collect())),
            "binary" => tables.push(Table {
                file: "samples.f64le".into(),
                data: TableData::Binary(out.samples.iter().flat_map(|x| x.to_le_bytes()).collect()),
            }),
            _ => {}
        }
        Ok(StageReport { stage: "mc".into(), checks, result, warnings: out.warnings.clone(), tables })
    }
}
