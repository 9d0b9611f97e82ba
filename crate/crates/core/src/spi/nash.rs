//! Nash-type rates: n(t) = int_t^inf dx / Phi(x), rate = n^{-1}(t).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub enum Phi {
    /// c x^q
    Power { c: f64, q: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Power { c, q } => write!(f, "Power {{ c: {c}, q: {q} }}"),
            Phi::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NashProfile {
    pub phi: Phi,
}

impl NashProfile {
    /// Phi(x) = c x^{1 + 2/d}, the Euclidean Nash profile.
    pub fn euclidean(c: f64, d: usize) -> NashProfile {
        NashProfile { phi: Phi::Power { c, q: 1.0 + 2.0 / d as f64 } }
    }

    pub fn n(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Input(format!("n(t) needs t > 0, got {t}")));
        }
        match &self.phi {
            Phi::Power { c, q } => {
                if !(*q > 1.0) {
                    return Err(Error::Rate(format!("int dx / ({c} x^{q}) diverges at infinity")));
                }
                Ok(t.powf(1.0 - q) / (c * (q - 1.0)))
            }
            Phi::Custom(f) => integrate_tail(f.as_ref(), t),
        }
    }
}

/// int_t^inf dx / phi(x) with x = t e^v, in blocks until the blocks stop
/// contributing.
fn integrate_tail(phi: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    let h = 1e-3;
    let block = 2000;
    let f = |v: f64| {
        let x = t * v.exp();
        x / phi(x)
    };
    let mut total = 0.5 * f(0.0) * h;
    let mut k = 1usize;
    let mut prev_block = f64::INFINITY;
    for _ in 0..400 {
        let mut s = 0.0;
        for _ in 0..block {
            let y = f(k as f64 * h);
            if !(y.is_finite() && y >= 0.0) {
                return Err(Error::Rate(format!("1/Phi is not finite and positive at x = {}", t * (k as f64 * h).exp())));
            }
            s += y;
            k += 1;
        }
        s *= h;
        total += s;
        if s <= 1e-13 * total {
            return Ok(total);
        }
        if s > 0.999 * prev_block {
            return Err(Error::Rate("int dx / Phi(x) diverges: Phi grows too slowly".into()));
        }
        prev_block = s;
    }
    Err(Error::Rate("int dx / Phi(x) did not converge".into()))
}

/// n^{-1}(t), the Nash rate bounding ||P_t||_{1 -> inf}.
pub fn nash_rate(profile: &NashProfile, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Input(format!("nash rate needs t > 0, got {t}")));
    }
    match &profile.phi {
        Phi::Power { c, q } => {
            if !(*q > 1.0) {
                return Err(Error::Rate(format!("int dx / ({c} x^{q}) diverges at infinity")));
            }
            Ok((1.0 / (c * (q - 1.0) * t)).powf(1.0 / (q - 1.0)))
        }
        Phi::Custom(_) => {
            // n is decreasing; bisect in log x
            let (mut lo, mut hi) = (-50.0f64, 50.0f64);
            let n_lo = profile.n(lo.exp())?;
            let n_hi = profile.n(hi.exp())?;
            if !(n_lo >= t && n_hi <= t) {
                return Err(Error::Rate(format!("t = {t} outside the range of n on [e^-50, e^50]")));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if profile.n(mid.exp())? > t {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-12 {
                    break;
                }
            }
            Ok((0.5 * (lo + hi)).exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_phi() {
        let prof = NashProfile { phi: Phi::Power { c: 1.0, q: 2.0 } };
        for t in [0.01, 0.5, 1.0, 7.0] {
            assert_relative_eq!(prof.n(t).unwrap(), 1.0 / t, max_relative = 1e-14);
            assert_relative_eq!(nash_rate(&prof, t).unwrap(), 1.0 / t, max_relative = 1e-14);
        }
    }

    #[test]
    fn euclidean_rate() {
        for d in 1..=4 {
            for c in [0.5, 1.0, 3.0] {
                let prof = NashProfile::euclidean(c, d);
                for t in [0.01, 0.1, 1.0] {
                    let oracle = (d as f64 / (2.0 * c * t)).powf(d as f64 / 2.0);
                    assert_relative_eq!(nash_rate(&prof, t).unwrap(), oracle, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn custom_round_trip() {
        let prof = NashProfile { phi: Phi::Custom(Arc::new(|x: f64| x * x * (1.0 + x.ln_1p()))) };
        for k in -6..=6 {
            let t = 10f64.powi(k) * 0.5;
            let x = nash_rate(&prof, t).unwrap();
            let back = prof.n(x).unwrap();
            assert!((back - t).abs() <= 1e-6 * t, "t = {t}: {back}");
        }
    }

    #[test]
    fn custom_matches_power() {
        let prof = NashProfile { phi: Phi::Custom(Arc::new(|x: f64| 2.0 * x.powf(3.0))) };
        for t in [0.1, 1.0, 10.0] {
            // int_t^inf dx / (2 x^3) = 1 / (4 t^2)
            assert_relative_eq!(prof.n(t).unwrap(), 0.25 / (t * t), max_relative = 1e-6);
        }
    }

    #[test]
    fn slow_growth_is_rate_error() {
        let linear = NashProfile { phi: Phi::Custom(Arc::new(|x: f64| x)) };
        assert!(matches!(linear.n(1.0), Err(Error::Rate(_))));
        let power = NashProfile { phi: Phi::Power { c: 1.0, q: 1.0 } };
        assert!(matches!(nash_rate(&power, 1.0), Err(Error::Rate(_))));
    }
}
