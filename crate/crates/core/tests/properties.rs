use gluing_core::fields::{integrate_values, mean_zero_values, psi_at};
use gluing_core::geometry::Cutoff;
use gluing_core::sampling::{rng, smooth_source};
use gluing_core::{CapPair, GluedGeometry, LinearSolver, SolveParams};
use proptest::prelude::*;

fn geometry(n: usize, eps: f64, v1: f64, v2: f64) -> GluedGeometry {
    CapPair::new(n, v1, v2)
        .build(eps, &SolveParams::default(), 1.0, 1.0)
        .unwrap()
}

fn scale(g: &GluedGeometry, f: &[f64]) -> f64 {
    f.iter()
        .zip(&g.vol_weight)
        .map(|(a, v)| (a * v).abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE)
}

fn random_field(seed: u64, len: usize) -> Vec<f64> {
    use rand::Rng;
    let mut r = rng(seed);
    (0..len).map(|_| r.gen_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_integrates_to_zero(n in 3usize..5, e in 2.5f64..6.0, seed: u64) {
        let g = geometry(n, (-e).exp(), 1.0, 2.0);
        let f = random_field(seed, g.len());
        let lf = g.laplacian().apply(&f);
        let s = scale(&g, &lf);
        prop_assert!(integrate_values(&g, &lf).abs() <= 1e-10 * s);
    }

    #[test]
    fn laplacian_is_self_adjoint(n in 3usize..5, e in 2.5f64..6.0, seed: u64) {
        let g = geometry(n, (-e).exp(), 1.0, 1.0);
        let f = random_field(seed, g.len());
        let h = random_field(seed ^ 0x5555, g.len());
        let lap = g.laplacian();
        let a = integrate_values(&g, &h.iter().zip(lap.apply(&f)).map(|(x, y)| x * y).collect::<Vec<_>>());
        let b = integrate_values(&g, &f.iter().zip(lap.apply(&h)).map(|(x, y)| x * y).collect::<Vec<_>>());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300));
        // Both equal minus the Dirichlet form.
        prop_assert!((a + lap.dirichlet_form(&f, &h)).abs() <= 1e-10 * a.abs().max(1e-300));
    }

    #[test]
    fn cutoffs_partition_unity(n in 3usize..5, e in 2.5f64..8.0) {
        let g = geometry(n, (-e).exp(), 1.0, 1.0);
        let (c1, c2, cp) = (g.cutoff(Cutoff::Chi1), g.cutoff(Cutoff::Chi2), g.cutoff(Cutoff::ChiP));
        for i in 0..g.len() {
            prop_assert!((c1[i] + c2[i] + cp[i] - 1.0).abs() <= 1e-15);
        }
        for c in Cutoff::ALL {
            prop_assert!(g.cutoff(c).iter().all(|x| (-1e-15..=1.0 + 1e-15).contains(x)));
        }
    }

    #[test]
    fn beta_has_zero_integral(n in 3usize..5, e in 2.5f64..8.0, v2 in 0.5f64..4.0) {
        let g = geometry(n, (-e).exp(), 1.0, v2);
        let s = LinearSolver::new(&g, 0.25).unwrap();
        let beta = &s.basis.beta.values;
        prop_assert!(integrate_values(&g, beta).abs() <= 1e-10 * scale(&g, beta));
    }

    #[test]
    fn weighted_norm_is_a_norm(n in 3usize..5, e in 2.5f64..6.0, seed: u64, c in -5.0f64..5.0, gamma in 0.05f64..0.45) {
        let g = geometry(n, (-e).exp(), 1.0, 1.0);
        let s = LinearSolver::new(&g, gamma).unwrap();
        let f = random_field(seed, g.len());
        let h = random_field(seed.wrapping_add(1), g.len());
        let w = &s.weight;
        let cf: Vec<f64> = f.iter().map(|x| c * x).collect();
        prop_assert!((w.norm(&cf, gamma) - c.abs() * w.norm(&f, gamma)).abs() <= 1e-12 * w.norm(&f, gamma) * (1.0 + c.abs()));
        let sum: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
        prop_assert!(w.norm(&sum, gamma) <= (w.norm(&f, gamma) + w.norm(&h, gamma)) * (1.0 + 1e-14));
    }

    #[test]
    fn mean_zero_projection_is_idempotent(n in 3usize..5, e in 2.5f64..6.0, seed: u64) {
        let g = geometry(n, (-e).exp(), 1.0, 3.0);
        let f = random_field(seed, g.len());
        let p = mean_zero_values(&g, &f);
        prop_assert!(integrate_values(&g, &p).abs() <= 1e-12 * scale(&g, &p));
        let pp = mean_zero_values(&g, &p);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn weight_is_even_and_bounded(e in 2.5f64..10.0, x in 0.0f64..1.0) {
        let eps = (-e).exp();
        let alpha = e / 2.0;
        let t = x * e;
        let (a, b) = (psi_at(eps, alpha, t), psi_at(eps, alpha, -t));
        prop_assert_eq!(a, b);
        prop_assert!(a >= eps * (1.0 - 1e-12) && a <= 1.0 + 1e-12);
        prop_assert!((psi_at(eps, alpha, e) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn projection_multiplier_is_linear(n in 3usize..5, e in 2.5f64..5.0, seed: u64, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = geometry(n, (-e).exp(), 1.0, 2.0);
        let s = LinearSolver::new(&g, (n as f64 - 2.0) / 2.0).unwrap();
        let mut r = rng(seed);
        let f = smooth_source(&g, &mut r, None);
        let h = smooth_source(&g, &mut r, None);
        let mix = mean_zero_values(&g, &f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect::<Vec<_>>());
        let lf = s.approximate_solve(&f).unwrap().lambda;
        let lh = s.approximate_solve(&h).unwrap().lambda;
        let lm = s.approximate_solve(&mix).unwrap().lambda;
        prop_assert!((lm - a * lf - b * lh).abs() <= 1e-10 * (1.0 + lf.abs() + lh.abs()) * (1.0 + a.abs() + b.abs()));
    }
}
