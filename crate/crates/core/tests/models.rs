use nonrecip_core::devices::{lindblad_channels, ChainModel, ChainSpec, LindbladChannel, ModelKind};
use nonrecip_core::invariant::{AuxiliaryTrajectory, DEFAULT_SAMPLES};
use nonrecip_core::metrics::{circulator_target, transfer_fidelity};
use nonrecip_core::propagation::{propagate_lindblad, propagate_schrodinger, PropagationConfig, NORM_DRIFT_LIMIT};
use nonrecip_core::statespace::{Basis, PureState};

const TAU_NS: f64 = 145.0;

fn model(kind: ModelKind, product: bool) -> ChainModel {
    let traj = AuxiliaryTrajectory::new(0.4974, TAU_NS).unwrap();
    ChainModel::design(kind, ChainSpec::circulator_defaults(), &traj, DEFAULT_SAMPLES, product, 1e-3).unwrap()
}

fn start(m: &ChainModel) -> PureState {
    m.embed(&PureState::basis_state(Basis::single_excitation(), 0)).unwrap()
}

fn scaled(channels: &[LindbladChannel], factor: f64) -> Vec<LindbladChannel> {
    channels
        .iter()
        .map(|c| LindbladChannel {
            rate: c.rate * factor,
            ..c.clone()
        })
        .collect()
}

#[test]
fn vanishing_rates_approach_closed_system_linearly() {
    let m = model(ModelKind::Ideal, true);
    let cfg = PropagationConfig::new(0.05).with_stride(10_000);
    let psi = propagate_schrodinger(&m, &start(&m), TAU_NS, &cfg).unwrap();
    let closed = psi.final_state().to_density();
    let channels = lindblad_channels(m.chain(), 2);
    let distance = |factor: f64| {
        let run = propagate_lindblad(&m, &scaled(&channels, factor), &closed_start(&m), TAU_NS, &cfg).unwrap();
        (run.final_state().matrix() - closed.matrix()).norm()
    };
    let (d1, d2) = (distance(1e-2), distance(2e-2));
    assert!(d1 > 0.0);
    assert!((d2 / d1 - 2.0).abs() < 0.01, "ratio {}", d2 / d1);
}

fn closed_start(m: &ChainModel) -> nonrecip_core::DensityMatrix {
    start(m).to_density()
}

#[test]
fn lindblad_step_halving() {
    let m = model(ModelKind::SingleExcitation, true);
    let channels = m.lindblad_channels();
    let rho0 = closed_start(&m);
    let run = |step: f64| {
        propagate_lindblad(&m, &channels, &rho0, TAU_NS, &PropagationConfig::new(step).with_stride(100_000))
            .unwrap()
    };
    let coarse = run(0.01);
    let fine = run(0.005);
    assert!((coarse.final_state().matrix() - fine.final_state().matrix()).norm() < 1e-6);
    let d = fine.diagnostics;
    assert!(d.max_norm_drift < 1e-8 && d.max_hermitian_deviation < 1e-9 && d.min_eigenvalue > -1e-6);
}

#[test]
fn single_excitation_model_without_noise_keeps_populations_inside() {
    let m = model(ModelKind::SingleExcitation, true);
    let cfg = PropagationConfig::new(0.005).with_stride(500);
    let r = transfer_fidelity(&m, "100", &circulator_target(0), false, &cfg).unwrap();
    assert!(r.leakage.as_ref().unwrap().iter().all(|l| l.abs() < 1e-9));
    assert!(r.fidelity > 0.99);
}

#[test]
fn qubit_chain_leaks_only_through_counter_rotating_terms() {
    let m = model(ModelKind::FullQubit, true);
    let cfg = PropagationConfig::new(0.004).with_stride(1000);
    let r = transfer_fidelity(&m, "100", &circulator_target(0), false, &cfg).unwrap();
    let leak = r.final_leakage();
    assert!(leak > 0.0 && leak < 1e-4, "{leak}");
    for (k, _) in r.times.iter().enumerate() {
        let total: f64 = r.populations.iter().map(|p| p[k]).sum::<f64>() + r.leakage.as_ref().unwrap()[k];
        assert!((total - 1.0).abs() < 1e-6);
    }
}

#[test]
fn three_level_chain_runs_and_reports() {
    let m = model(ModelKind::FullThreeLevel, true);
    assert_eq!(m.dim(), 27);
    let cfg = PropagationConfig::new(0.004).with_stride(5000);
    let r = transfer_fidelity(&m, "100", &circulator_target(0), false, &cfg).unwrap();
    assert!(r.diagnostics.max_norm_drift < NORM_DRIFT_LIMIT);
    assert!(r.fidelity > 0.99, "{}", r.fidelity);
    assert!(r.final_leakage() < 1e-3);
}

#[test]
fn default_step_is_too_coarse_for_the_chain() {
    let m = model(ModelKind::FullQubit, true);
    let err = transfer_fidelity(&m, "100", &circulator_target(0), false, &PropagationConfig::new(0.005));
    assert!(err.is_err());
}
