use crate::error::{Error, Result};

/// Uniform grid x_i = -R + i h, i = 0..N-1.
#[derive(Debug, Clone)]
pub struct Grid {
    pub points: Vec<f64>,
    pub step: f64,
}

impl Grid {
    pub fn symmetric(n: usize, radius: f64) -> Result<Grid> {
        if n < 2 {
            return Err(Error::Input(format!("grid needs at least 2 points, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Input(format!("grid radius must be positive, got {radius}")));
        }
        let step = 2.0 * radius / (n - 1) as f64;
        let points = (0..n).map(|i| -radius + i as f64 * step).collect();
        Ok(Grid { points, step })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.points[self.len() - 1]
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * self.step } else { self.step })
            .collect()
    }

    /// Index i with x_i <= x < x_{i+1} and the interpolation fraction.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let r = self.radius();
        if !(x >= -r && x <= r) {
            return None;
        }
        let pos = (x + r) / self.step;
        let i = (pos.floor() as usize).min(self.len() - 2);
        Some((i, pos - i as f64))
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
