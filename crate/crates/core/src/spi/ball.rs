//! Local super-Poincare inequality on the ball [-r, r] with Lebesgue measure.

use serde::Serialize;

use crate::error::{Error, Result};

pub type TestFunction<'a> = &'a dyn Fn(f64) -> (f64, f64);

#[derive(Debug, Clone, Serialize)]
pub struct BallCheck {
    pub r: f64,
    pub u: f64,
    /// [int g^2 - u int g'^2] / (int |g|)^2 per test function, None if skipped
    pub ratios: Vec<Option<f64>>,
    pub worst_ratio: f64,
    /// smallest c with ratio <= c (u^{-1/2} + r^{-1}) for every test function
    pub fitted_cd: f64,
    pub skipped: usize,
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n.is_multiple_of(2) { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn local_ball_spi_check(r: f64, u: f64, n_points: usize, tests: &[TestFunction]) -> Result<BallCheck> {
    if !(r > 0.0 && u > 0.0) {
        return Err(Error::Input(format!("ball check needs r > 0 and u > 0 (got {r}, {u})")));
    }
    if n_points < 16 {
        return Err(Error::Input(format!("ball check needs at least 16 quadrature points, got {n_points}")));
    }
    let scale = u.powf(-0.5) + 1.0 / r;
    let mut ratios = Vec::with_capacity(tests.len());
    let mut skipped = 0;
    for (k, g) in tests.iter().enumerate() {
        let l1 = simpson(|x| g(x).0.abs(), -r, r, n_points);
        if l1 <= 1e-300 {
            log::warn!("test function {k} vanishes on the ball; skipped");
            skipped += 1;
            ratios.push(None);
            continue;
        }
        let l2 = simpson(|x| g(x).0.powi(2), -r, r, n_points);
        let energy = simpson(|x| g(x).1.powi(2), -r, r, n_points);
        ratios.push(Some((l2 - u * energy) / (l1 * l1)));
    }
    let worst_ratio = ratios.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BallCheck { r, u, ratios, worst_ratio, fitted_cd: worst_ratio.max(0.0) / scale, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_function() {
        let one = |_: f64| (1.0, 0.0);
        let c = local_ball_spi_check(1.0, 1.0, 200, &[&one]).unwrap();
        assert_abs_diff_eq!(c.worst_ratio, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.fitted_cd, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn linear_function_is_negative() {
        let lin = |x: f64| (x, 1.0);
        let c = local_ball_spi_check(1.0, 1.0, 200, &[&lin]).unwrap();
        // (2/3 - 2) / 1
        assert_abs_diff_eq!(c.worst_ratio, -4.0 / 3.0, epsilon = 1e-9);
        assert_eq!(c.fitted_cd, 0.0);
    }

    #[test]
    fn scaling_in_r() {
        let bump = |x: f64| ((-x * x).exp() + 0.2, -2.0 * x * (-x * x).exp());
        let wide = |x: f64| {
            let (g, dg) = bump(x / 2.0);
            (g, dg / 2.0)
        };
        for u in [0.01, 0.1, 0.3] {
            let small = local_ball_spi_check(1.0, u, 400, &[&bump]).unwrap();
            let big = local_ball_spi_check(2.0, 4.0 * u, 400, &[&wide]).unwrap();
            let expect = small.worst_ratio / 2.0;
            assert!((big.worst_ratio - expect).abs() <= 0.01 * expect.abs());
            assert!((big.fitted_cd - small.fitted_cd).abs() <= 0.01 * small.fitted_cd);
        }
    }

    #[test]
    fn vanishing_function_skipped() {
        let zero = |_: f64| (0.0, 0.0);
        let one = |_: f64| (1.0, 0.0);
        let c = local_ball_spi_check(1.0, 1.0, 64, &[&zero, &one]).unwrap();
        assert_eq!(c.skipped, 1);
        assert_eq!(c.ratios[0], None);
        assert!(local_ball_spi_check(0.0, 1.0, 64, &[&one]).is_err());
    }
}
