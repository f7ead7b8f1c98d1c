//! Transfer fidelities, ensemble averages and transmission quantifiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::devices::ChainModel;
use crate::error::{Error, Result};
use crate::invariant::target_unitary;
use crate::propagation::{
    propagate_lindblad, propagate_schrodinger, Hamiltonian, PropagationConfig, RunDiagnostics,
};
use crate::statespace::{
    expectation, fidelity_pure_target, unitarity_deviation, Basis, CMatrix, CVector, DensityMatrix,
    Operator, PureState, C64, I, ONE, ZERO,
};

/// Labels of the single-excitation states, in `A, M, B` order.
pub const SE_LABELS: [&str; 3] = ["100", "010", "001"];

/// Index in `{|100>, |010>, |001>}` for a label like `"010"` or `"M"`.
pub fn se_index(label: &str) -> Result<usize> {
    match label {
        "100" | "A" | "a" => Ok(0),
        "010" | "M" | "m" => Ok(1),
        "001" | "B" | "b" => Ok(2),
        _ => Err(Error::InvalidParameter(format!(
            "unknown single-excitation label {label:?}"
        ))),
    }
}

/// Column `j` of the ideal final operator at `theta_plus`, as a state on
/// `{|100>, |010>, |001>}`.
pub fn design_target(theta_plus: f64, j: usize) -> PureState {
    let u = target_unitary(theta_plus);
    let col: Vec<C64> = (0..3).map(|i| u.get(i, j)).collect();
    PureState::from_slice(Basis::single_excitation(), &col).expect("unitary column")
}

/// Circulator image of a basis state: `|100> -> -|001>`, `|001> -> i|010>`,
/// `|010> -> i|100>`.
pub fn circulator_target(j: usize) -> PureState {
    design_target(1.5 * std::f64::consts::PI, j)
}

/// Text like `-|001>` or `i|010>` for a single-excitation basis state
/// scaled by a unit phase; generic states print as amplitude lists.
pub fn describe_state(psi: &PureState) -> String {
    let nonzero: Vec<usize> = (0..psi.dim()).filter(|&i| psi.amplitude(i).norm() > 1e-12).collect();
    if let [k] = nonzero[..] {
        let a = psi.amplitude(k);
        let name = psi.basis().name(k);
        let prefix = if (a - ONE).norm() < 1e-12 {
            ""
        } else if (a + ONE).norm() < 1e-12 {
            "-"
        } else if (a - I).norm() < 1e-12 {
            "i"
        } else if (a + I).norm() < 1e-12 {
            "-i"
        } else {
            return format!("({}{:+}i)|{name}>", a.re, a.im);
        };
        return format!("{prefix}|{name}>");
    }
    let parts: Vec<String> = (0..psi.dim())
        .map(|i| {
            let a = psi.amplitude(i);
            format!("({}{:+}i)|{}>", a.re, a.im, psi.basis().name(i))
        })
        .collect();
    parts.join(" + ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub model: String,
    pub noise: bool,
    pub initial: String,
    pub target: String,
    /// `(re, im)` amplitudes on `|100>, |010>, |001>`.
    pub target_amplitudes: Vec<(f64, f64)>,
    /// `F_s = <target|rho(tau)|target>`.
    pub fidelity: f64,
    pub times: Vec<f64>,
    /// One curve per single-excitation state, in `|100>, |010>, |001>` order.
    pub populations: Vec<Vec<f64>>,
    /// Population outside the single-excitation subspace; absent for
    /// three-state models.
    pub leakage: Option<Vec<f64>>,
    pub fidelity_curve: Vec<f64>,
    pub diagnostics: RunDiagnostics,
}

impl TransferReport {
    pub fn final_populations(&self) -> [f64; 3] {
        std::array::from_fn(|k| *self.populations[k].last().unwrap())
    }

    pub fn final_leakage(&self) -> f64 {
        self.leakage.as_ref().map_or(0.0, |l| *l.last().unwrap())
    }
}

fn se_target(model: &ChainModel, target: &PureState) -> Result<PureState> {
    if target.dim() == model.dim() {
        return Ok(target.clone());
    }
    model.embed(target)
}

struct Curves {
    populations: Vec<Vec<f64>>,
    leakage: Option<Vec<f64>>,
}

fn curves_from<'a>(model: &ChainModel, rhos: impl Iterator<Item = (C64, Vec<f64>)> + 'a) -> Curves {
    let idx = model.single_excitation_indices();
    let mut populations = vec![Vec::new(); 3];
    let mut leakage = model.is_product_space().then(Vec::new);
    for (trace, diag) in rhos {
        let mut inside = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            populations[k].push(diag[i]);
            inside += diag[i];
        }
        if let Some(l) = leakage.as_mut() {
            l.push(trace.re - inside);
        }
    }
    Curves { populations, leakage }
}

/// Prepares `initial` (a single-excitation label), propagates under `model`
/// with or without its Lindblad channels, and scores against `target`.
///
/// `target` may be given on `{|100>, |010>, |001>}` or in the model basis.
pub fn transfer_fidelity(
    model: &ChainModel,
    initial: &str,
    target: &PureState,
    noise: bool,
    cfg: &PropagationConfig,
) -> Result<TransferReport> {
    let j = se_index(initial)?;
    let target_full = se_target(model, target)?;
    let se_basis = Basis::single_excitation();
    let psi0 = model.embed(&PureState::basis_state(se_basis, j))?;
    let tau = model.tau();
    let (times, curves, fidelity_curve, diagnostics) = if noise {
        let channels = model.lindblad_channels();
        if channels.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "decoherence needs the product space; model {} is three-state",
                model.kind()
            )));
        }
        let run = propagate_lindblad(model, &channels, &psi0.to_density(), tau, cfg)?;
        let curves = curves_from(model, run.states.iter().map(|r| (r.trace(), r.populations())));
        let fid = run
            .states
            .iter()
            .map(|r| fidelity_pure_target(&target_full, r))
            .collect::<Result<Vec<_>>>()?;
        (run.times, curves, fid, run.diagnostics)
    } else {
        let run = propagate_schrodinger(model, &psi0, tau, cfg)?;
        let curves = curves_from(
            model,
            run.states.iter().map(|p| {
                let diag: Vec<f64> = p.amplitudes().iter().map(|a| a.norm_sqr()).collect();
                (C64::new(p.norm_sqr(), 0.0), diag)
            }),
        );
        let fid = run
            .states
            .iter()
            .map(|p| target_full.inner(p).norm_sqr().clamp(0.0, 1.0))
            .collect();
        (run.times, curves, fid, run.diagnostics)
    };
    let target_se: Vec<(f64, f64)> = model
        .single_excitation_indices()
        .iter()
        .map(|&i| {
            let a = target_full.amplitude(i);
            (a.re, a.im)
        })
        .collect();
    Ok(TransferReport {
        model: model.kind().to_string(),
        noise,
        initial: SE_LABELS[j].to_string(),
        target: describe_state(target),
        target_amplitudes: target_se,
        fidelity: *fidelity_curve.last().unwrap(),
        times,
        populations: curves.populations,
        leakage: curves.leakage,
        fidelity_curve,
        diagnostics,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    /// One propagation per sampled angle.
    PerMember,
    /// Three propagations combined by linearity of the dynamics.
    Superposition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub model: String,
    pub noise: bool,
    pub method: EnsembleMethod,
    pub count: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Trapezoidal average of the final fidelities.
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub times: Vec<f64>,
    pub fidelity_curve: Vec<f64>,
}

/// Angles `2 pi k / (count - 1)`, `k = 0..count`, and their trapezoidal weights.
pub fn ensemble_grid(count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if count < 2 {
        return Err(Error::InvalidParameter(format!("ensemble needs >= 2 members, got {count}")));
    }
    let m = (count - 1) as f64;
    let thetas = (0..count)
        .map(|k| {
            if k == count - 1 {
                std::f64::consts::TAU
            } else {
                std::f64::consts::TAU * k as f64 / m
            }
        })
        .collect();
    let weights = (0..count)
        .map(|k| if k == 0 || k == count - 1 { 0.5 / m } else { 1.0 / m })
        .collect();
    Ok((thetas, weights))
}

/// `(cos t |010> + sin t |001>, i cos t |100> + i sin t |010>)` on the
/// single-excitation basis.
pub fn ensemble_member(theta: f64) -> (PureState, PureState) {
    let (s, c) = theta.sin_cos();
    let basis = Basis::single_excitation();
    let initial = PureState::from_slice(basis.clone(), &[ZERO, C64::new(c, 0.0), C64::new(s, 0.0)]);
    let target = PureState::from_slice(basis, &[C64::new(0.0, c), C64::new(0.0, s), ZERO]);
    (initial.expect("normalized"), target.expect("normalized"))
}

fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// Uniform average over `count` input angles of the fidelity to the
/// circulator image of `cos t |010> + sin t |001>`. No renormalization of
/// leaked population is applied.
///
/// Per-member runs fan out over the current rayon pool; results are combined
/// in index order.
pub fn ensemble_fidelity(
    model: &ChainModel,
    count: usize,
    noise: bool,
    cfg: &PropagationConfig,
    method: EnsembleMethod,
) -> Result<EnsembleReport> {
    let (thetas, weights) = ensemble_grid(count)?;
    let (times, per_member) = match method {
        EnsembleMethod::PerMember => per_member_curves(model, &thetas, noise, cfg)?,
        EnsembleMethod::Superposition => superposed_curves(model, &thetas, noise, cfg)?,
    };
    let fidelity_curve: Vec<f64> = (0..times.len())
        .map(|r| {
            let column: Vec<f64> = per_member.iter().map(|curve| curve[r]).collect();
            weighted_sum(&column, &weights)
        })
        .collect();
    Ok(EnsembleReport {
        model: model.kind().to_string(),
        noise,
        method,
        count,
        theta_min: thetas[0],
        theta_max: *thetas.last().unwrap(),
        fidelity: *fidelity_curve.last().unwrap(),
        initial_fidelity: fidelity_curve[0],
        times,
        fidelity_curve,
    })
}

type Curves2 = (Vec<f64>, Vec<Vec<f64>>);

fn per_member_curves(
    model: &ChainModel,
    thetas: &[f64],
    noise: bool,
    cfg: &PropagationConfig,
) -> Result<Curves2> {
    let runs = thetas
        .par_iter()
        .map(|&theta| {
            let (initial, target) = ensemble_member(theta);
            let psi0 = model.embed(&initial)?;
            let target = model.embed(&target)?;
            if noise {
                let channels = model.lindblad_channels();
                let run = propagate_lindblad(model, &channels, &psi0.to_density(), model.tau(), cfg)?;
                let fid = run
                    .states
                    .iter()
                    .map(|r| fidelity_pure_target(&target, r))
                    .collect::<Result<Vec<_>>>()?;
                Ok((run.times, fid))
            } else {
                let run = propagate_schrodinger(model, &psi0, model.tau(), cfg)?;
                let fid = run.states.iter().map(|p| target.inner(p).norm_sqr()).collect();
                Ok((run.times, fid))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let times = runs[0].0.clone();
    Ok((times, runs.into_iter().map(|(_, f)| f).collect()))
}

fn superposed_curves(
    model: &ChainModel,
    thetas: &[f64],
    noise: bool,
    cfg: &PropagationConfig,
) -> Result<Curves2> {
    let idx = model.single_excitation_indices();
    let basis = model.basis().clone();
    let dim = model.dim();
    let unit = |i: usize| PureState::basis_state(basis.clone(), i);
    let targets: Vec<CVector> = thetas
        .iter()
        .map(|&t| model.embed(&ensemble_member(t).1).map(|p| p.amplitudes().clone()))
        .collect::<Result<_>>()?;
    let tau = model.tau();
    if noise {
        let channels = model.lindblad_channels();
        if channels.is_empty() {
            return Err(Error::InvalidParameter("decoherence needs the product space".into()));
        }
        let plus = {
            let mut v = CVector::zeros(dim);
            v[idx[1]] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v[idx[2]] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            PureState::new(basis.clone(), v)?
        };
        let starts = [unit(idx[1]).to_density(), unit(idx[2]).to_density(), plus.to_density()];
        let runs = starts
            .par_iter()
            .map(|rho0| propagate_lindblad(model, &channels, rho0, tau, cfg))
            .collect::<Result<Vec<_>>>()?;
        let records = runs[0].times.len();
        let per_member = thetas
            .iter()
            .zip(&targets)
            .map(|(&theta, target)| {
                let (s, c) = theta.sin_cos();
                (0..records)
                    .map(|r| {
                        let [mm, bb, pp] = [0, 1, 2].map(|k| runs[k].states[r].matrix());
                        let cross: CMatrix = pp * C64::new(2.0, 0.0) - mm - bb;
                        let rho = mm * C64::new(c * c, 0.0)
                            + bb * C64::new(s * s, 0.0)
                            + cross * C64::new(c * s, 0.0);
                        expectation(&rho, target).re.clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect();
        Ok((runs[0].times.clone(), per_member))
    } else {
        let starts = [unit(idx[1]), unit(idx[2])];
        let runs = starts
            .par_iter()
            .map(|psi0| propagate_schrodinger(model, psi0, tau, cfg))
            .collect::<Result<Vec<_>>>()?;
        let records = runs[0].times.len();
        let per_member = thetas
            .iter()
            .zip(&targets)
            .map(|(&theta, target)| {
                let (s, c) = theta.sin_cos();
                (0..records)
                    .map(|r| {
                        let psi = runs[0].states[r].amplitudes() * C64::new(c, 0.0)
                            + runs[1].states[r].amplitudes() * C64::new(s, 0.0);
                        target.dotc(&psi).norm_sqr().clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect();
        Ok((runs[0].times.clone(), per_member))
    }
}

/// `T[i][j] = |<i|u|j>|^2` for a unitary on three states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMatrix {
    pub probabilities: [[f64; 3]; 3],
}

impl TransmissionMatrix {
    /// Probability of ending in `to` when starting in `from`.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.probabilities[to][from]
    }

    pub fn column_sum_deviation(&self) -> f64 {
        (0..3)
            .map(|j| ((0..3).map(|i| self.probabilities[i][j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Tolerance on `|U^dagger U - I|_F` accepted by [`transmission_matrix`].
pub const UNITARITY_TOL: f64 = 1e-6;
/// Isolation values are clamped to `[-ISOLATION_FLOOR_DB, ISOLATION_FLOOR_DB]`.
pub const ISOLATION_FLOOR_DB: f64 = 120.0;

pub fn transmission_matrix(u: &Operator) -> Result<TransmissionMatrix> {
    if u.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: u.dim(),
        });
    }
    let deviation = unitarity_deviation(u.matrix());
    if deviation > UNITARITY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(TransmissionMatrix {
        probabilities: std::array::from_fn(|i| std::array::from_fn(|j| u.get(i, j).norm_sqr())),
    })
}

/// `10 log10(T[from <- to] / T[to <- from])`: backward over forward
/// transmission, so strong isolation is a large negative number.
pub fn isolation_db(t: &TransmissionMatrix, from: usize, to: usize) -> f64 {
    let forward = t.get(to, from);
    let backward = t.get(from, to);
    let db = match (backward > 0.0, forward > 0.0) {
        (false, false) => 0.0,
        (false, true) => -ISOLATION_FLOOR_DB,
        (true, false) => ISOLATION_FLOOR_DB,
        (true, true) => 10.0 * (backward / forward).log10(),
    };
    db.clamp(-ISOLATION_FLOOR_DB, ISOLATION_FLOOR_DB)
}

/// Density matrix of the leaked part, `1 - sum of single-excitation populations`.
pub fn leakage(model: &ChainModel, rho: &DensityMatrix) -> f64 {
    let inside: f64 = model.single_excitation_indices().iter().map(|&i| rho.population(i)).sum();
    rho.trace().re - inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{ChainSpec, ModelKind};
    use crate::invariant::{AuxiliaryTrajectory, DEFAULT_SAMPLES};
    use std::f64::consts::PI;

    fn ideal_model(product: bool) -> ChainModel {
        let traj = AuxiliaryTrajectory::new(0.497473, 145.0).unwrap();
        ChainModel::design(ModelKind::Ideal, ChainSpec::circulator_defaults(), &traj, DEFAULT_SAMPLES, product, 1e-3)
            .unwrap()
    }

    #[test]
    fn targets_read_off_the_design_operator() {
        let minus_b = circulator_target(0);
        assert_eq!(describe_state(&minus_b), "-|001>");
        assert_eq!(describe_state(&circulator_target(2)), "i|010>");
        assert_eq!(describe_state(&circulator_target(1)), "i|100>");
    }

    #[test]
    fn ideal_transfer_reaches_target() {
        let model = ideal_model(false);
        let cfg = PropagationConfig::new(0.05).with_stride(20);
        let report = transfer_fidelity(&model, "100", &circulator_target(0), false, &cfg).unwrap();
        assert!(report.fidelity >= 0.999);
        assert!(report.leakage.is_none());
        let p = report.final_populations();
        assert!(p[0] < 1e-3 && p[1] < 1e-3 && (p[2] - 1.0).abs() < 1e-3);
        for (k, _) in report.times.iter().enumerate() {
            let sum: f64 = (0..3).map(|s| report.populations[s][k]).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn reverse_transfer_is_forbidden() {
        let model = ideal_model(false);
        let cfg = PropagationConfig::new(0.05).with_stride(100);
        let minus_a = PureState::basis_state(Basis::single_excitation(), 0).scale(-ONE);
        let report = transfer_fidelity(&model, "001", &minus_a, false, &cfg).unwrap();
        assert!(report.fidelity <= 1e-3);
    }

    #[test]
    fn fidelity_ignores_global_phase_of_target() {
        let model = ideal_model(true);
        let cfg = PropagationConfig::new(0.05).with_stride(100);
        let t = circulator_target(2);
        let a = transfer_fidelity(&model, "001", &t, true, &cfg).unwrap();
        let b = transfer_fidelity(&model, "001", &t.scale(C64::from_polar(1.0, 1.3)), true, &cfg).unwrap();
        assert!((a.fidelity - b.fidelity).abs() < 1e-14);
    }

    #[test]
    fn noise_needs_product_space() {
        let model = ideal_model(false);
        let cfg = PropagationConfig::new(0.05);
        assert!(transfer_fidelity(&model, "100", &circulator_target(0), true, &cfg).is_err());
    }

    #[test]
    fn ensemble_grid_is_inclusive() {
        let (t, w) = ensemble_grid(1001).unwrap();
        assert_eq!(t.len(), 1001);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1000], 2.0 * PI);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(ensemble_grid(1).is_err());
    }

    #[test]
    fn ensemble_start_is_one_eighth() {
        let (t, w) = ensemble_grid(1001).unwrap();
        let f0: Vec<f64> = t
            .iter()
            .map(|&theta| {
                let (psi, target) = ensemble_member(theta);
                target.inner(&psi).norm_sqr()
            })
            .collect();
        assert!((weighted_sum(&f0, &w) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn ensemble_methods_agree_and_converge() {
        let model = ideal_model(false);
        let cfg = PropagationConfig::new(0.05).with_stride(290);
        let a = ensemble_fidelity(&model, 41, false, &cfg, EnsembleMethod::PerMember).unwrap();
        let b = ensemble_fidelity(&model, 41, false, &cfg, EnsembleMethod::Superposition).unwrap();
        assert_eq!(a.times, b.times);
        for (x, y) in a.fidelity_curve.iter().zip(&b.fidelity_curve) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(b.fidelity >= 0.999);
        assert!((b.initial_fidelity - 0.125).abs() < 1e-12);
        let fine = ensemble_fidelity(&model, 10001, false, &cfg, EnsembleMethod::Superposition).unwrap();
        let coarse = ensemble_fidelity(&model, 1001, false, &cfg, EnsembleMethod::Superposition).unwrap();
        assert!((fine.fidelity - coarse.fidelity).abs() < 1e-4);
    }

    #[test]
    fn ensemble_methods_agree_with_noise() {
        let model = ideal_model(true);
        let cfg = PropagationConfig::new(0.1).with_stride(725);
        let a = ensemble_fidelity(&model, 9, true, &cfg, EnsembleMethod::PerMember).unwrap();
        let b = ensemble_fidelity(&model, 9, true, &cfg, EnsembleMethod::Superposition).unwrap();
        for (x, y) in a.fidelity_curve.iter().zip(&b.fidelity_curve) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cyclic_and_reciprocal_transmission() {
        let t = transmission_matrix(&target_unitary(1.5 * PI)).unwrap();
        let (a, m, b) = (0, 1, 2);
        for (i, row) in t.probabilities.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let expected = matches!((i, j), (2, 0) | (0, 1) | (1, 2));
                assert!((p - f64::from(u8::from(expected))).abs() < 1e-15);
            }
        }
        assert!(t.column_sum_deviation() < 1e-9);
        assert_eq!(isolation_db(&t, a, b), -ISOLATION_FLOOR_DB);
        let r = transmission_matrix(&target_unitary(PI)).unwrap();
        assert!((r.get(a, b) - 1.0).abs() < 1e-15 && (r.get(b, a) - 1.0).abs() < 1e-15);
        assert!((r.get(m, m) - 1.0).abs() < 1e-15);
        assert!(isolation_db(&r, a, b).abs() < 1e-12);
    }

    #[test]
    fn isolation_of_partial_transfer() {
        let mut p = [[0.0; 3]; 3];
        p[2][0] = 0.999;
        p[0][2] = 1e-3;
        let t = TransmissionMatrix { probabilities: p };
        assert!((isolation_db(&t, 0, 2) - 10.0 * (1e-3f64 / 0.999).log10()).abs() < 1e-12);
        assert!(isolation_db(&t, 0, 2) <= -30.0 + 0.01);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = CMatrix::identity(3, 3) * C64::new(1.1, 0.0);
        let op = Operator::new(Basis::three_level(), m).unwrap();
        assert!(matches!(transmission_matrix(&op), Err(Error::NotUnitary { .. })));
    }
}
