use hmod_core::catalog::{self, annulus_horizontal, annulus_vertical, q0, random_annulus_point, triple_kernel};
use hmod_core::expr::{parse, Expr};
use hmod_core::foliation::{trace_trajectory, Foliation, TraceOptions};
use hmod_core::planar::{self, lambda_field_2d};
use hmod_core::qdiff::{OperatorTag, QuadDiff};
use hmod_core::quad::integrate_1d;
use hmod_core::HPoint;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

const TAGS: [OperatorTag; 3] = [OperatorTag::B2, OperatorTag::D2prime, OperatorTag::D2doubleprime];

fn shell_point() -> impl Strategy<Value = HPoint> {
    (0.2f64..1.8, 0.0f64..2.0 * PI, -1.5f64..1.5).prop_map(|(r, a, t)| HPoint::new(Complex64::from_polar(r, a), t))
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every operator is quadratic in q with one conjugate factor at most:
    /// B₂ picks up |c|², D′₂ and D″₂ pick up c².
    #[test]
    fn operator_scaling(re in -3.0f64..3.0, im in -3.0f64..3.0, p in shell_point()) {
        let c = Complex64::new(re, im);
        let base = parse("zb^2/(t + i*z*zb + 4)^2 + z*t").unwrap();
        let q = QuadDiff::new(base.clone()).unwrap();
        let cq = QuadDiff::new(Expr::constant(c) * base).unwrap();
        for tag in TAGS {
            let r = q.residual_of(tag, p).unwrap().value;
            let rc = cq.residual_of(tag, p).unwrap().value;
            let factor = if tag == OperatorTag::B2 { Complex64::from(c.norm_sqr()) } else { c * c };
            prop_assert!((rc - factor * r).norm() <= 1e-10 * (1.0 + rc.norm()), "{tag}");
        }
    }

    #[test]
    fn constants_and_triple_kernel_are_in_every_kernel(re in -5.0f64..5.0, im in -5.0f64..5.0, p in shell_point()) {
        let k = QuadDiff::new(Expr::constant(Complex64::new(re, im))).unwrap();
        let tk = triple_kernel();
        for tag in TAGS {
            prop_assert!(k.residual_of(tag, p).unwrap().value.norm() == 0.0);
            prop_assert!(tk.residual_of(tag, p).unwrap().value.norm() < 1e-9);
        }
    }

    #[test]
    fn q0_in_ker_b2_on_the_annulus(seed in any::<u64>()) {
        let p = random_annulus_point(&mut ChaCha8Rng::seed_from_u64(seed), 2.0);
        prop_assert!(q0().b2_residual(p).unwrap().value.norm() < 1e-9);
    }

    #[test]
    fn jacobian_identity_on_legendrian_families(s in 0.05f64..3.09, p1 in 0.0f64..1.38, p2 in 0.0f64..TAU) {
        let h = annulus_horizontal(2.0);
        let v = annulus_vertical(2.0);
        let sh = catalog::shear(2.0, 1.5, 3.0);
        for (fol, u) in [(&h, [s, p1, p2]), (&v, [p1, s, p2]), (&sh, [s * 0.6, p1, p2])] {
            let (a, b) = (fol.jac_det(u).unwrap(), fol.jac_via_a(u).unwrap());
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-300));
        }
    }

    #[test]
    fn jacobian_gap_is_residual_times_im(s in -1.0f64..1.0, p1 in -1.0f64..1.0, p2 in -1.0f64..1.0) {
        let f = Foliation::parse("s + p2 + i*p1", "s", (-1.0, 1.0), [(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let jet = f.jet([s, p1, p2]).unwrap();
        let gap = jet.jac_det() - jet.jac_via_a();
        let predicted = jet.legendrian_residual() * (jet.dp1_phi1.conj() * jet.dp2_phi1).im;
        prop_assert!((gap - predicted).abs() < 1e-12);
    }

    #[test]
    fn lambda_constant_along_annulus_leaves(p1 in 0.0f64..1.38, p2 in 0.0f64..TAU) {
        let (h, v) = (annulus_horizontal(2.0), annulus_vertical(2.0));
        let q = q0();
        let mq = QuadDiff::new(-q.coeff().clone()).unwrap();
        let samples = |n: usize, a: f64, b: f64| (1..n).map(move |k| a + (b - a) * k as f64 / n as f64);
        let lh: Vec<f64> = samples(40, 0.0, PI).map(|s| h.lambda_field(&q, [s, p1, p2]).unwrap()).collect();
        let y = 0.05 + p1 * 2.2;
        let lv: Vec<f64> = samples(40, 0.0, 2.0 * 2f64.ln()).map(|s| v.lambda_field(&mq, [s, y, p2]).unwrap()).collect();
        prop_assert!(spread(&lh) < 1e-6);
        prop_assert!(spread(&lv) < 1e-6);
    }

    #[test]
    fn traced_trajectories_stay_legendrian(seed in any::<u64>(), orientation in prop_oneof![Just(1.0), Just(-1.0)]) {
        let start = random_annulus_point(&mut ChaCha8Rng::seed_from_u64(seed), 2.0);
        let opts = TraceOptions { max_length: 0.3, guard: Some(catalog::axis_guard()), ..Default::default() };
        let path = trace_trajectory(&q0(), start, orientation, &opts).unwrap();
        prop_assert!(path.max_legendrian_residual() < 10.0 * opts.rk_tol);
        prop_assert!(path.unit_speed_defect(&q0()).unwrap() < 1e-8);
        for w in path.samples.windows(2) {
            prop_assert!(w[1].s > w[0].s);
        }
    }

    #[test]
    fn planar_radial_lambda_is_constant(r in 1.5f64..6.0, p in 0.0f64..TAU) {
        let (q, f) = planar::radial_annulus(r);
        let v: Vec<f64> = (1..50).map(|k| lambda_field_2d(&q, &f, 1.0 + (r - 1.0) * k as f64 / 50.0, p).unwrap()).collect();
        prop_assert!(spread(&v) < 1e-12);
    }

    #[test]
    fn quadrature_is_exact_on_polynomials(c in proptest::collection::vec(-2.0f64..2.0, 1..12), a in -2.0f64..0.0, b in 0.1f64..3.0) {
        let f = |x: f64| c.iter().rev().fold(0.0, |acc, k| acc * x + k);
        let exact: f64 = c.iter().enumerate().map(|(k, ck)| ck * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)).sum();
        let got = integrate_1d(f, a, b, 1e-12).unwrap().value;
        prop_assert!((got - exact).abs() <= 1e-11 * (1.0 + exact.abs()));
    }

    #[test]
    fn quadrature_handles_endpoint_singularities(alpha in 0.1f64..0.9) {
        let got = integrate_1d(|x| x.powf(-alpha), 0.0, 1.0, 1e-10).unwrap().value;
        prop_assert!((got - 1.0 / (1.0 - alpha)).abs() <= 1e-9 / (1.0 - alpha));
    }
}
