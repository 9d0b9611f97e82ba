use std::sync::OnceLock;

use proptest::prelude::*;

use heatbound::kernel::{build_generator, spectrum, DiscretizedGenerator, KernelSpectrum};
use heatbound::potentials::Potential;
use heatbound::spi::empirical::project_simplex;
use heatbound::spi::exponent_p;

const N: usize = 100;

fn generator() -> &'static DiscretizedGenerator {
    static G: OnceLock<DiscretizedGenerator> = OnceLock::new();
    G.get_or_init(|| build_generator(&Potential::power_exponential(3.0, 1).unwrap(), N, 3.2, 1e-6).unwrap())
}

fn spec() -> &'static KernelSpectrum {
    static S: OnceLock<KernelSpectrum> = OnceLock::new();
    S.get_or_init(|| spectrum(generator()))
}

fn mu_inner(f: &[f64], g: &[f64]) -> f64 {
    generator().mu.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
}

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_on_simplex_and_is_nearest(y in prop::collection::vec(-3.0..3.0f64, 1..30)) {
        let mut p = y.clone();
        let mut buf = Vec::new();
        project_simplex(&mut p, &mut buf);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dist = |z: &[f64]| y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let d = dist(&p);
        // every vertex and the barycentre are feasible, so none can be closer
        for k in 0..y.len() {
            let mut e = vec![0.0; y.len()];
            e[k] = 1.0;
            prop_assert!(d <= dist(&e) + 1e-12);
        }
        let bary = vec![1.0 / y.len() as f64; y.len()];
        prop_assert!(d <= dist(&bary) + 1e-12);
        let mut again = p.clone();
        project_simplex(&mut again, &mut buf);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_like_growth_gives_half_dimension(alpha in 1.01..8.0f64, d in 1usize..6) {
        let p = exponent_p(alpha, 0.0, alpha - 1.0, 0.0, d).unwrap();
        prop_assert!((p - d as f64 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_grows_with_beta(alpha in 1.5..4.0f64, gamma in 0.0..1.0f64, beta in 0.0..3.0f64) {
        let lo = exponent_p(alpha, gamma, alpha - 1.0, beta, 1).unwrap();
        let hi = exponent_p(alpha, gamma, alpha - 1.0, beta + 0.5, 1).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn generator_is_symmetric_in_l2_mu(f in field(), g in field()) {
        let l = generator();
        let lf = l.apply(&f);
        let lg = l.apply(&g);
        let a = mu_inner(&f, &lg);
        let b = mu_inner(&lf, &g);
        let e = l.dirichlet_form(&f, &g);
        let scale = 1.0 + e.abs();
        prop_assert!((a - b).abs() <= 1e-9 * scale);
        prop_assert!((a + e).abs() <= 1e-9 * scale);
    }

    #[test]
    fn modulus_does_not_raise_energy(f in field()) {
        let l = generator();
        let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        prop_assert!(l.dirichlet_form(&abs, &abs) <= l.dirichlet_form(&f, &f) * (1.0 + 1e-12));
    }

    #[test]
    fn semigroup_is_markov(g in prop::collection::vec(0.0..1.0f64, N), t in 0.01..2.0f64) {
        let s = spec();
        let pg = s.apply_semigroup(t, &g);
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &pg {
            prop_assert!(*v >= lo - 1e-10 && *v <= hi + 1e-10);
        }
        // mass is conserved
        prop_assert!((mu_inner(&pg, &vec![1.0; N]) - mu_inner(&g, &vec![1.0; N])).abs() < 1e-10);
    }
}

#[test]
fn constants_are_annihilated() {
    let out = generator().apply(&[2.5; N]);
    assert!(out.iter().all(|v| v.abs() < 1e-9), "{out:?}");
}
