use std::path::PathBuf;

use proptest::prelude::*;

use nonrecip_cli::config::{EnsembleSection, SweepSection, TransmonSection};
use nonrecip_cli::ScenarioConfig;
use nonrecip_core::metrics::EnsembleMethod;
use nonrecip_core::ModelKind;

fn transmon() -> impl Strategy<Value = TransmonSection> {
    (1.0..400.0f64, 0.0..20.0f64).prop_map(|(alpha_mhz, gamma_khz)| TransmonSection { alpha_mhz, gamma_khz })
}

fn model() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Ideal),
        Just(ModelKind::SingleExcitation),
        Just(ModelKind::FullQubit),
        Just(ModelKind::FullThreeLevel),
    ]
}

prop_compose! {
    fn scenario()(
        model in model(),
        tau_ns in 1.0..500.0f64,
        phase_choice in prop_oneof![
            (0.01..3.0f64).prop_map(|l| (Some(l), None)),
            (-20.0..20.0f64).prop_map(|p| (None, Some(p))),
        ],
        noise in any::<bool>(),
        step_ns in prop::option::of(1e-4..0.1f64),
        record_stride in 1usize..1000,
        pulse_samples in 3usize..5000,
        saturation_tol in 0.0..0.01f64,
        initial in prop::sample::select(vec!["100", "010", "001", "A", "M", "B", "ensemble"]),
        out in "[a-z]{1,8}",
        couplings in (0.1..50.0f64, 0.1..50.0f64, -500.0..500.0f64, -500.0..500.0f64, 1.0..10.0f64),
        transmons in (transmon(), transmon(), transmon()),
        sweep in (0.01..1.0f64, 0.01..2.0f64, 2usize..200),
        ensemble in (2usize..2000, any::<bool>()),
    ) -> ScenarioConfig {
        let (g_a_mhz, g_b_mhz, delta_mhz, nu_mhz, omega_m_ghz) = couplings;
        ScenarioConfig {
            model,
            tau_ns,
            lambda: phase_choice.0,
            target_phase_rad: phase_choice.1,
            noise,
            step_ns,
            record_stride,
            pulse_samples,
            saturation_tol,
            initial: initial.to_string(),
            out_dir: PathBuf::from(out),
            g_a_mhz,
            g_b_mhz,
            delta_mhz,
            nu_mhz,
            omega_m_ghz,
            transmon_a: transmons.0,
            transmon_m: transmons.1,
            transmon_b: transmons.2,
            sweep: SweepSection { lo: sweep.0, hi: sweep.0 + sweep.1, n: sweep.2 },
            ensemble: EnsembleSection {
                count: ensemble.0,
                method: if ensemble.1 { EnsembleMethod::PerMember } else { EnsembleMethod::Superposition },
            },
        }
    }
}

proptest! {
    #[test]
    fn parse_serialize_parse(cfg in scenario()) {
        let text = cfg.to_toml();
        let once = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(&once, &cfg);
        let twice = ScenarioConfig::parse(&once.to_toml()).unwrap();
        prop_assert_eq!(twice, once);
    }
}

#[test]
fn written_keys_carry_units() {
    let text = ScenarioConfig::circulator().to_toml();
    for key in ["tau_ns", "g_a_mhz", "omega_m_ghz", "alpha_mhz", "gamma_khz"] {
        assert!(text.contains(key), "{key}");
    }
    assert!(text.contains("[transmon_a]"));
}
