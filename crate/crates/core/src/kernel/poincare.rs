use serde::Serialize;

use crate::error::Result;
use crate::kernel::generator::build_weighted_generator;
use crate::potentials::Potential;

#[derive(Debug, Clone, Serialize)]
pub struct PoincareGap {
    pub lambda1: f64,
    pub n: usize,
    pub radius: f64,
}

/// Smallest nonzero eigenvalue of f -> -e^U (omega e^{-U} f')' on [-R, R].
pub fn poincare_gap(potential: &Potential, omega: &dyn Fn(f64) -> f64, n: usize, radius: f64, tail_tol: f64) -> Result<PoincareGap> {
    let generator = build_weighted_generator(potential, n, radius, tail_tol, omega)?;
    let lambda1 = generator.symmetrized().kth_eigenvalue(1);
    Ok(PoincareGap { lambda1, n, radius })
}
