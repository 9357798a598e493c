//! Randomized invariants of the discrete operators.

use cahn_hilliard::grid::inner_l2;
use cahn_hilliard::operators::{d1_long, grad_inner_long, grad_norm_sq_long, laplace_long, laplace_std};
use cahn_hilliard::random::{random_trig_field, seeded};
use cahn_hilliard::{Axis, Field, GridSpec, SpectralPlan};
use proptest::prelude::*;

fn field(m: usize, length: f64, seed: u64, mean_zero: bool) -> (SpectralPlan, Field) {
    let plan = SpectralPlan::new(GridSpec::square(length, m).unwrap()).unwrap();
    let f = random_trig_field(&plan, m / 2, mean_zero, &mut seeded(seed)).unwrap();
    (plan, f)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_conservative_and_self_adjoint(seed in any::<u64>(), m in 5usize..24, l in 0.5f64..20.0) {
        let (_, f) = field(m, l, seed, false);
        let (_, g) = field(m, l, seed ^ 0x9e37, false);
        let lf = laplace_long(&f).unwrap();
        let scale = lf.norm_l2() * f.grid().volume().sqrt();
        prop_assert!(lf.sum().abs() * f.grid().cell_volume() <= 1e-12 * scale.max(1e-300));
        let a = inner_l2(&lf, &g).unwrap();
        let b = inner_l2(&f, &laplace_long(&g).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * (lf.norm_l2() * g.norm_l2()));
        // -Lap_(4) is non-negative and matches the gradient form
        let e = -inner_l2(&f, &lf).unwrap();
        prop_assert!(e >= -1e-12 * f.norm_l2().powi(2));
        prop_assert!(rel(e, grad_norm_sq_long(&f).unwrap()) < 1e-10 || e.abs() < 1e-12);
        prop_assert!(rel(-inner_l2(&lf, &g).unwrap(), grad_inner_long(&f, &g).unwrap()) < 1e-9
            || a.abs() < 1e-12);
    }

    #[test]
    fn operators_commute_with_shifts(seed in any::<u64>(), m in 5usize..20, sx in -7isize..7, sy in -7isize..7) {
        let (_, f) = field(m, 2.0, seed, false);
        let a = laplace_long(&f.shifted(sx, sy)).unwrap();
        let b = laplace_long(&f).unwrap().shifted(sx, sy);
        prop_assert!(a.zip_map(&b, |x, y| x - y).unwrap().norm_linf() <= 1e-12 * b.norm_linf().max(1.0));
        let a = d1_long(&f.shifted(sx, sy), Axis::Y).unwrap();
        let b = d1_long(&f, Axis::Y).unwrap().shifted(sx, sy);
        prop_assert!(a.zip_map(&b, |x, y| x - y).unwrap().norm_linf() <= 1e-12 * b.norm_linf().max(1.0));
    }

    #[test]
    fn first_derivative_is_skew(seed in any::<u64>(), m in 5usize..20) {
        let (_, f) = field(m, 3.0, seed, false);
        let (_, g) = field(m, 3.0, seed.wrapping_add(1), false);
        for axis in [Axis::X, Axis::Y] {
            let a = inner_l2(&d1_long(&f, axis).unwrap(), &g).unwrap();
            let b = inner_l2(&f, &d1_long(&g, axis).unwrap()).unwrap();
            prop_assert!((a + b).abs() <= 1e-11 * (f.norm_l2() * g.norm_l2()) * m as f64);
        }
    }

    #[test]
    fn cauchy_schwarz_and_norm_inequalities(seed in any::<u64>(), m in 8usize..32) {
        let (plan, f) = field(m, 6.4, seed, true);
        let (_, g) = field(m, 6.4, !seed, true);
        prop_assert!(inner_l2(&f, &g).unwrap().abs() <= f.norm_l2() * g.norm_l2() * (1.0 + 1e-14));
        let lhs = f.norm_l2().powi(2);
        let rhs = plan.hminus1_norm(&f).unwrap() * grad_norm_sq_long(&f).unwrap().sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        let a = laplace_std(&g).unwrap().norm_l2();
        let b = laplace_long(&g).unwrap().norm_l2();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_round_trip(seed in any::<u64>(), m in 5usize..33) {
        let (plan, f) = field(m, 1.0, seed, false);
        let back = plan.inverse(plan.forward(&f).unwrap()).unwrap();
        prop_assert!(back.zip_map(&f, |a, b| a - b).unwrap().norm_linf() <= 1e-13 * f.norm_linf().max(1.0));
    }
}
