use miub_core::gmd::ScenarioSpec;
use miub_core::objective::MiubEvaluator;
use miub_core::optimizer::{cosine_schedule, SearchSpace};
use miub_core::waveform::{convolution_matrix, wrap, PhaseVector, Waveform};
use proptest::prelude::*;

fn phases(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn waveforms_have_constant_modulus_and_energy(raw in phases(12), energy in 0.1f64..10.0) {
        let s = Waveform::with_energy(PhaseVector::wrap(&raw).unwrap(), energy).unwrap();
        let c = (energy / 12.0).sqrt();
        for x in s.samples() {
            prop_assert!((x.norm() - c).abs() < 1e-12);
        }
        prop_assert!((s.energy() - energy).abs() < 1e-12 * energy);
    }

    #[test]
    fn convolution_norm_is_sqrt_taps_times_code_norm(raw in phases(6), taps in 1usize..6) {
        let s = Waveform::with_energy(PhaseVector::wrap(&raw).unwrap(), 1.0).unwrap();
        let conv = convolution_matrix(&s, taps).unwrap().to_matrix();
        prop_assert!((conv.norm() - (taps as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn objective_ignores_global_phase(raw in phases(4), phi in -3.0f64..3.0) {
        let sc = ScenarioSpec::toy().build().unwrap();
        let space = SearchSpace::from(&sc);
        let ev = MiubEvaluator::new(&sc).unwrap();
        let s = space.waveform(PhaseVector::wrap(&raw).unwrap()).unwrap();
        let a = ev.breakdown(&s).unwrap().f_total;
        let b = ev.breakdown(&s.rotated(phi)).unwrap().f_total;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn schedule_is_non_increasing_in_unit_interval(total in 1usize..5000) {
        let mut prev = cosine_schedule(0, total).unwrap();
        prop_assert_eq!(prev, 1.0);
        for t in 1..=total.min(200) {
            let z = cosine_schedule(t * total / total.min(200), total).unwrap();
            prop_assert!((0.0..=1.0).contains(&z));
            prop_assert!(z <= prev);
            prev = z;
        }
    }

    #[test]
    fn wrap_lands_in_range(theta in -1e6f64..1e6) {
        let w = wrap(theta);
        prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
        prop_assert_eq!(wrap(w), w);
    }
}
