use ioncomm_core::estimation::{weighted_parity_fit, FitBasis, Parity};
use ioncomm_core::model::{ElectronicAmplitudes, ModelParams, MotionalSpec, VibronicState};
use ioncomm_core::pipeline::output::format_g;
use ioncomm_core::propagator::{block_coeffs, block_count, evolve, sigma22_exact};
use ioncomm_core::sampling::{sample_from_probabilities, SeedSpec};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn params(k: u32, eta: f64, detuning: f64, g: f64, dphi: f64) -> ModelParams {
    let mut p = ModelParams::trapped_ion(k)
        .with_fock_cutoff(20)
        .with_detuning(detuning)
        .with_coupling_scale(g);
    p.lamb_dicke = eta;
    p.trap_position_phase = dphi;
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_are_unitary(k in 0u32..4, eta in 0.01f64..0.8, detuning in -1.0f64..1.0,
                          g in -2.0f64..2.0, dphi in 0.0f64..6.3, t in 0.0f64..100.0) {
        let p = params(k, eta, detuning, g, dphi);
        for n in 0..block_count(&p) {
            let c = block_coeffs(&p, n, t);
            prop_assert!((c.a.norm_sqr() + c.b.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evolution_preserves_norm(k in 0u32..4, g in 0.0f64..2.0, t in 0.0f64..60.0,
                                re in -2.0f64..2.0, im in -2.0f64..2.0, mix in 0.0f64..1.0) {
        let p = params(k, 0.3, 0.2, g, 0.4).with_fock_cutoff(40);
        let el = ElectronicAmplitudes { gamma1: C64::new(mix.sqrt(), 0.0), gamma2: C64::new(0.0, (1.0 - mix).sqrt()) };
        let psi = VibronicState::product(&el, &MotionalSpec::Coherent(C64::new(re, im)), 40).unwrap();
        let out = evolve(&p, &psi, t);
        prop_assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn ground_state_population_is_even_in_coupling(k in 0u32..3, g in 0.0f64..1.0, t in 0.0f64..50.0, n in 0usize..6) {
        let el = ElectronicAmplitudes::ground();
        let m = MotionalSpec::Fock(n);
        let plus = sigma22_exact(&params(k, 0.2, 0.2, g, 0.0), &el, &m, t).unwrap();
        let minus = sigma22_exact(&params(k, 0.2, 0.2, -g, 0.0), &el, &m, t).unwrap();
        prop_assert!((plus - minus).abs() < 1e-14);
    }

    #[test]
    fn superposition_population_is_odd_about_half(g in 0.0f64..1.0, t in 0.0f64..50.0, n in 0usize..6) {
        let el = ElectronicAmplitudes::quarter_phase_superposition();
        let m = MotionalSpec::Fock(n);
        let plus = sigma22_exact(&params(0, 0.2, 0.2, g, 0.0), &el, &m, t).unwrap();
        let minus = sigma22_exact(&params(0, 0.2, 0.2, -g, 0.0), &el, &m, t).unwrap();
        prop_assert!((plus + minus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_weight_fit_is_linear(lambda in -10.0f64..10.0, c1 in -1.0f64..1.0, c3 in -1.0f64..1.0, wiggle in 0.0f64..0.01) {
        let g: Vec<f64> = (1..=15).map(|i| 0.03 * i as f64).collect();
        let y: Vec<f64> = g.iter().map(|x| c1 * x + c3 * x.powi(3) + wiggle * (30.0 * x).cos()).collect();
        let w: Vec<f64> = g.iter().map(|x| 500.0 + 1000.0 * x).collect();
        let basis = FitBasis::new(Parity::Odd, 5).unwrap();
        let a = weighted_parity_fit(&g, &y, &w, basis, 0.5).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| lambda * v).collect();
        let b = weighted_parity_fit(&g, &scaled, &w, basis, 0.5).unwrap();
        for (x, z) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((z - lambda * x).abs() <= 1e-9 * (1.0 + (lambda * x).abs()));
        }
        prop_assert_eq!(a.covariance, b.covariance);
    }

    #[test]
    fn records_respect_bounds(seed in any::<u64>(), shots in 1u64..5000, p in 0.0f64..=1.0) {
        let recs = sample_from_probabilities(&[p, 1.0 - p], &[0.1, 0.2], 1.0, shots, SeedSpec::new(seed)).unwrap();
        for r in recs {
            prop_assert!(r.successes <= r.shots);
            prop_assert!((0.0..=1.0).contains(&r.p_hat));
        }
    }

    #[test]
    fn csv_numbers_round_trip_to_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = format_g(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }
}
