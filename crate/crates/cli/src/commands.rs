use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use nonrecip_core::bessel::J1_MAX;
use nonrecip_core::devices::{invert_bessel_drive, ChainModel, DriveWaveform};
use nonrecip_core::export::{write_ensemble_csv, write_sweep_csv, write_transfer_csv};
use nonrecip_core::invariant::{
    classify_phase, lr_phase, solve_lambda, sweep_lambda, synthesize_pulses, AuxiliaryTrajectory, LambdaSolution,
    LambdaSweep, LrPhase, PulsePair, DEFAULT_LAMBDA_BRACKET,
};
use nonrecip_core::metrics::{design_target, ensemble_fidelity, se_index, transfer_fidelity, EnsembleReport, TransferReport, SE_LABELS};
use nonrecip_core::propagation::PropagationConfig;
use nonrecip_core::statespace::units;
use nonrecip_core::{Hamiltonian, ModelKind};

use crate::config::{ScenarioConfig, DESIGN_LAMBDA};
use crate::error::{CliError, CliResult};

/// Step candidates tried in order; the first one resolving the model's
/// fastest frequency is used.
pub const STEP_LADDER_NS: [f64; 7] = [0.005, 0.004, 0.0025, 0.002, 0.001, 0.0005, 0.00025];

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_with(path, |w| writeln!(w, "{text}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaChoice {
    pub lambda: f64,
    /// `given` or `solved`.
    pub source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_phase_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<LambdaSolution>,
}

pub fn resolve_lambda(cfg: &ScenarioConfig) -> CliResult<LambdaChoice> {
    match (cfg.lambda, cfg.target_phase_rad) {
        (Some(lambda), _) => Ok(LambdaChoice {
            lambda,
            source: "given",
            target_phase_rad: None,
            solver: None,
        }),
        (None, Some(phase)) => {
            let sol = solve_lambda(phase, cfg.tau_ns, DEFAULT_LAMBDA_BRACKET)?;
            Ok(LambdaChoice {
                lambda: sol.lambda,
                source: "solved",
                target_phase_rad: Some(phase),
                solver: Some(sol),
            })
        }
        (None, None) => Err(CliError::Config("no lambda or target_phase_rad".into())),
    }
}

/// Trajectory, pulses, drive envelopes and the phase they realise.
pub struct Design {
    pub choice: LambdaChoice,
    pub trajectory: AuxiliaryTrajectory,
    pub pulses: PulsePair,
    pub drives: DriveWaveform,
    pub phase: LrPhase,
}

pub fn build_design(cfg: &ScenarioConfig) -> CliResult<Design> {
    let choice = resolve_lambda(cfg)?;
    let trajectory = AuxiliaryTrajectory::new(choice.lambda, cfg.tau_ns)?;
    let pulses = synthesize_pulses(&trajectory, cfg.pulse_samples)?;
    let drives = invert_bessel_drive(&pulses, &cfg.chain()?, cfg.saturation_tol)?;
    let phase = lr_phase(&trajectory, &pulses)?;
    Ok(Design {
        choice,
        trajectory,
        pulses,
        drives,
        phase,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignSummary {
    pub lambda: LambdaChoice,
    pub tau_ns: f64,
    pub theta_plus_rad: f64,
    pub theta_plus_reduced_rad: f64,
    pub abs_theta_plus_rad: f64,
    pub theta_minus_rad: f64,
    pub theta_zero_rad: f64,
    /// `circulator`, `reciprocal` or `partial`.
    pub label: &'static str,
    pub pulse_peak_a_mhz: f64,
    pub pulse_peak_b_mhz: f64,
    pub drive_peak_ratio: (f64, f64),
    pub bessel_limit: f64,
    pub saturated_samples: (usize, usize),
    pub files: Vec<String>,
}

fn file_names(paths: &[&Path]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect()
}

pub fn summarize_design(cfg: &ScenarioConfig, d: &Design, files: Vec<String>) -> DesignSummary {
    let (peak_a, peak_b) = d.pulses.peak();
    DesignSummary {
        lambda: d.choice.clone(),
        tau_ns: cfg.tau_ns,
        theta_plus_rad: d.phase.theta_plus,
        theta_plus_reduced_rad: d.phase.reduced_plus(),
        abs_theta_plus_rad: d.phase.theta_plus.abs(),
        theta_minus_rad: d.phase.theta_minus,
        theta_zero_rad: d.phase.theta_zero,
        label: classify_phase(d.phase.theta_plus),
        pulse_peak_a_mhz: units::to_mhz(peak_a),
        pulse_peak_b_mhz: units::to_mhz(peak_b),
        drive_peak_ratio: d.drives.peak_ratio,
        bessel_limit: J1_MAX,
        saturated_samples: d.drives.saturated,
        files,
    }
}

/// Writes `pulses.csv`, `drives.csv` and `design.json`.
pub fn cmd_design(cfg: &ScenarioConfig, out: &Path) -> CliResult<DesignSummary> {
    let d = build_design(cfg)?;
    let pulses = out.join("pulses.csv");
    let drives = out.join("drives.csv");
    write_with(&pulses, |w| d.pulses.write_csv(w))?;
    write_with(&drives, |w| d.drives.write_csv(w))?;
    let summary = summarize_design(cfg, &d, file_names(&[&pulses, &drives]));
    write_json(&out.join("design.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub target_phase_rad: f64,
    pub tau_ns: f64,
    pub bracket: (f64, f64),
    pub solution: LambdaSolution,
    pub label: &'static str,
}

/// Writes `solve.json`. `phase` overrides the config.
pub fn cmd_solve_lambda(cfg: &ScenarioConfig, phase: Option<f64>, out: &Path) -> CliResult<SolveSummary> {
    let target = phase
        .or(cfg.target_phase_rad)
        .ok_or_else(|| CliError::Config("solve-lambda needs target_phase_rad".into()))?;
    let solution = solve_lambda(target, cfg.tau_ns, DEFAULT_LAMBDA_BRACKET)?;
    let summary = SolveSummary {
        target_phase_rad: target,
        tau_ns: cfg.tau_ns,
        bracket: DEFAULT_LAMBDA_BRACKET,
        solution,
        label: classify_phase(solution.theta_plus),
    };
    write_json(&out.join("solve.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub tau_ns: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub monotonic_decreasing: bool,
    pub monotonic_increasing: bool,
    /// Interpolated `theta_plus` at the circulator λ when inside the range.
    pub theta_plus_at_design_lambda: Option<f64>,
    pub files: Vec<String>,
}

fn sweep_summary(cfg: &ScenarioConfig, sweep: &LambdaSweep, files: Vec<String>) -> SweepSummary {
    SweepSummary {
        tau_ns: cfg.tau_ns,
        lo: cfg.sweep.lo,
        hi: cfg.sweep.hi,
        n: cfg.sweep.n,
        monotonic_decreasing: sweep.monotonic_decreasing,
        monotonic_increasing: sweep.monotonic_increasing,
        theta_plus_at_design_lambda: sweep.theta_at(DESIGN_LAMBDA),
        files,
    }
}

/// Writes `sweep.csv` and `sweep.json`.
pub fn cmd_sweep_lambda(cfg: &ScenarioConfig, out: &Path) -> CliResult<SweepSummary> {
    let sweep = sweep_lambda(cfg.tau_ns, cfg.sweep.lo, cfg.sweep.hi, cfg.sweep.n)?;
    let csv = out.join("sweep.csv");
    write_with(&csv, |w| write_sweep_csv(&sweep, w))?;
    let summary = sweep_summary(cfg, &sweep, file_names(&[&csv]));
    write_json(&out.join("sweep.json"), &summary)?;
    Ok(summary)
}

pub fn auto_step(model: &ChainModel) -> CliResult<f64> {
    let limit = PropagationConfig::max_step(model.fastest_frequency());
    STEP_LADDER_NS
        .into_iter()
        .find(|&s| s <= limit)
        .ok_or_else(|| CliError::Config(format!("no ladder step resolves this model (limit {limit} ns)")))
}

pub fn build_model(cfg: &ScenarioConfig, design: &Design) -> CliResult<ChainModel> {
    let kind = cfg.model;
    let drives = kind.needs_drives().then(|| design.drives.clone());
    Ok(ChainModel::new(
        kind,
        cfg.chain()?,
        design.pulses.clone(),
        drives,
        cfg.noise || kind.is_full(),
    )?)
}

pub fn propagation_config(cfg: &ScenarioConfig, model: &ChainModel) -> CliResult<PropagationConfig> {
    let step = match cfg.step_ns {
        Some(s) => s,
        None => auto_step(model)?,
    };
    Ok(PropagationConfig::new(step).with_stride(cfg.record_stride))
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimulationResult {
    Transfer(TransferReport),
    Ensemble(EnsembleReport),
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub model: ModelKind,
    pub noise: bool,
    pub lambda: f64,
    pub theta_plus_rad: f64,
    pub step_ns: f64,
    /// `F_s` for a basis transfer, `F_m` for the ensemble.
    pub final_fidelity: f64,
    pub files: Vec<String>,
    pub report: SimulationResult,
}

fn run_transfer(model: &ChainModel, theta: f64, label: &str, noise: bool, pc: &PropagationConfig) -> CliResult<TransferReport> {
    let j = se_index(label)?;
    Ok(transfer_fidelity(model, SE_LABELS[j], &design_target(theta, j), noise, pc)?)
}

/// Writes `transfer_<label>.csv` or `ensemble.csv`, and `simulate.json`.
pub fn cmd_simulate(cfg: &ScenarioConfig, out: &Path) -> CliResult<SimulateSummary> {
    let design = build_design(cfg)?;
    let model = build_model(cfg, &design)?;
    let pc = propagation_config(cfg, &model)?;
    let theta = design.phase.theta_plus;
    let (csv, report, fidelity) = if cfg.initial == "ensemble" {
        let r = ensemble_fidelity(&model, cfg.ensemble.count, cfg.noise, &pc, cfg.ensemble.method)?;
        let csv = out.join("ensemble.csv");
        write_with(&csv, |w| write_ensemble_csv(&r, w))?;
        let f = r.fidelity;
        (csv, SimulationResult::Ensemble(r), f)
    } else {
        let r = run_transfer(&model, theta, &cfg.initial, cfg.noise, &pc)?;
        let csv = out.join(format!("transfer_{}.csv", r.initial));
        write_with(&csv, |w| write_transfer_csv(&r, w))?;
        let f = r.fidelity;
        (csv, SimulationResult::Transfer(r), f)
    };
    let summary = SimulateSummary {
        model: cfg.model,
        noise: cfg.noise,
        lambda: design.choice.lambda,
        theta_plus_rad: theta,
        step_ns: pc.step,
        final_fidelity: fidelity,
        files: file_names(&[&csv]),
        report,
    };
    write_json(&out.join("simulate.json"), &summary)?;
    Ok(summary)
}

pub const REFERENCE_LAMBDA: f64 = 0.4974;
pub const REFERENCE_FS: [f64; 3] = [0.9908, 0.9925, 0.9928];
pub const REFERENCE_FM: f64 = 0.9923;
pub const LAMBDA_TOL: f64 = 5e-4;
pub const FIDELITY_TOL: f64 = 0.005;
pub const INITIAL_ENSEMBLE: f64 = 0.125;
pub const INITIAL_ENSEMBLE_TOL: f64 = 0.01;
/// Lower bound on every fidelity once decoherence is switched off, and the
/// slack allowed below it.
pub const NOISELESS_FLOOR: f64 = 0.997;
pub const NOISELESS_TOL: f64 = 0.003;
/// Initial states of the three basis transfers, in panel order d, e, f.
pub const TRANSFER_ORDER: [&str; 3] = ["100", "001", "010"];

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    pub computed: Option<f64>,
    /// `|computed - reference| <= tolerance`, or `computed >= floor - slack`.
    pub rule: String,
    pub pass: bool,
}

impl Comparison {
    fn band(quantity: impl Into<String>, reference: f64, tol: f64, computed: Option<f64>) -> Self {
        Self {
            quantity: quantity.into(),
            reference: Some(reference),
            computed,
            rule: format!("within {tol} of {reference}"),
            pass: computed.is_some_and(|c| (c - reference).abs() <= tol),
        }
    }

    fn floor(quantity: impl Into<String>, reference: f64, floor: f64, tol: f64, computed: Option<f64>) -> Self {
        Self {
            quantity: quantity.into(),
            reference: Some(reference),
            computed,
            rule: format!(">= {floor} with slack {tol}"),
            pass: computed.is_some_and(|c| c >= floor - tol),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PanelStatus {
    pub panel: char,
    pub file: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig3Summary {
    pub model: ModelKind,
    pub noise: bool,
    pub tau_ns: f64,
    pub lambda: Option<f64>,
    pub theta_plus_rad: Option<f64>,
    pub step_ns: Option<f64>,
    pub panels: Vec<PanelStatus>,
    pub comparisons: Vec<Comparison>,
    pub all_pass: bool,
}

fn panel<T>(panels: &mut Vec<PanelStatus>, id: char, file: &Path, result: CliResult<T>) -> Option<T> {
    let status = |ok, error| PanelStatus {
        panel: id,
        file: file.file_name().unwrap().to_string_lossy().into_owned(),
        ok,
        error,
    };
    match result {
        Ok(v) => {
            panels.push(status(true, None));
            Some(v)
        }
        Err(e) => {
            panels.push(status(false, Some(e.to_string())));
            None
        }
    }
}

/// Panels a-f as six CSV files plus `fig3_summary.json`. A failing panel is
/// recorded and the remaining panels still run; the call then returns
/// [`CliError::PanelsFailed`].
pub fn cmd_reproduce_fig3(cfg: &ScenarioConfig, out: &Path) -> CliResult<Fig3Summary> {
    let mut panels = Vec::new();

    let path_a = out.join("fig3a_theta_vs_lambda.csv");
    let sweep = sweep_lambda(cfg.tau_ns, cfg.sweep.lo, cfg.sweep.hi, cfg.sweep.n)
        .map_err(CliError::from)
        .and_then(|s| write_with(&path_a, |w| write_sweep_csv(&s, w)).map(|_| s));
    let sweep = panel(&mut panels, 'a', &path_a, sweep);

    let path_b = out.join("fig3b_pulses.csv");
    let design = build_design(cfg).and_then(|d| write_with(&path_b, |w| d.pulses.write_csv(w)).map(|_| d));
    let design = panel(&mut panels, 'b', &path_b, design);

    let setup = design.as_ref().map(|d| {
        build_model(cfg, d).and_then(|m| propagation_config(cfg, &m).map(|pc| (m, pc)))
    });
    let path_c = out.join("fig3c_ensemble_fidelity.csv");
    let transfer_paths: Vec<PathBuf> = ["d", "e", "f"]
        .iter()
        .zip(TRANSFER_ORDER)
        .map(|(p, l)| out.join(format!("fig3{p}_transfer_{l}.csv")))
        .collect();
    let missing = || CliError::Config("design panel failed".into());

    let ensemble = match &setup {
        Some(Ok((m, pc))) => ensemble_fidelity(m, cfg.ensemble.count, cfg.noise, pc, cfg.ensemble.method)
            .map_err(CliError::from)
            .and_then(|r| write_with(&path_c, |w| write_ensemble_csv(&r, w)).map(|_| r)),
        Some(Err(e)) => Err(CliError::Config(e.to_string())),
        None => Err(missing()),
    };
    let ensemble = panel(&mut panels, 'c', &path_c, ensemble);

    let transfers: Vec<CliResult<TransferReport>> = match (&setup, &design) {
        (Some(Ok((m, pc))), Some(d)) => TRANSFER_ORDER
            .par_iter()
            .zip(&transfer_paths)
            .map(|(label, path)| {
                let r = run_transfer(m, d.phase.theta_plus, label, cfg.noise, pc)?;
                write_with(path, |w| write_transfer_csv(&r, w))?;
                Ok(r)
            })
            .collect(),
        (Some(Err(e)), _) => (0..3).map(|_| Err(CliError::Config(e.to_string()))).collect(),
        _ => (0..3).map(|_| Err(missing())).collect(),
    };
    let transfers: Vec<Option<TransferReport>> = transfers
        .into_iter()
        .zip(['d', 'e', 'f'].iter().zip(&transfer_paths))
        .map(|(r, (id, path))| panel(&mut panels, *id, path, r))
        .collect();

    let mut comparisons = Vec::new();
    let lambda = design.as_ref().map(|d| d.choice.lambda);
    comparisons.push(Comparison::band("lambda", REFERENCE_LAMBDA, LAMBDA_TOL, lambda));
    if let Some(s) = &sweep {
        comparisons.push(Comparison::band(
            "theta_plus_at_design_lambda",
            1.5 * PI,
            2e-3,
            s.theta_at(DESIGN_LAMBDA),
        ));
    }
    for ((label, reference), r) in TRANSFER_ORDER.iter().zip(REFERENCE_FS).zip(&transfers) {
        let name = format!("F_s[{label}]");
        let computed = r.as_ref().map(|r| r.fidelity);
        comparisons.push(if cfg.noise {
            Comparison::band(name, reference, FIDELITY_TOL, computed)
        } else {
            Comparison::floor(name, reference, NOISELESS_FLOOR, NOISELESS_TOL, computed)
        });
    }
    let fm = ensemble.as_ref().map(|r| r.fidelity);
    comparisons.push(if cfg.noise {
        Comparison::band("F_m", REFERENCE_FM, FIDELITY_TOL, fm)
    } else {
        Comparison::floor("F_m", REFERENCE_FM, NOISELESS_FLOOR, NOISELESS_TOL, fm)
    });
    comparisons.push(Comparison::band(
        "F_m at t = 0",
        INITIAL_ENSEMBLE,
        INITIAL_ENSEMBLE_TOL,
        ensemble.as_ref().map(|r| r.initial_fidelity),
    ));

    let summary = Fig3Summary {
        model: cfg.model,
        noise: cfg.noise,
        tau_ns: cfg.tau_ns,
        lambda,
        theta_plus_rad: design.as_ref().map(|d| d.phase.theta_plus),
        step_ns: match &setup {
            Some(Ok((_, pc))) => Some(pc.step),
            _ => None,
        },
        all_pass: comparisons.iter().all(|c| c.pass) && panels.iter().all(|p| p.ok),
        panels,
        comparisons,
    };
    write_json(&out.join("fig3_summary.json"), &summary)?;
    let failed = summary.panels.iter().filter(|p| !p.ok).count();
    if failed > 0 {
        return Err(CliError::PanelsFailed(failed));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_picks_coarsest_valid_step() {
        let cfg = ScenarioConfig::circulator();
        let d = build_design(&cfg).unwrap();
        let se = build_model(&cfg, &d).unwrap();
        assert_eq!(auto_step(&se).unwrap(), 0.005);
        let full = build_model(&ScenarioConfig { model: ModelKind::FullQubit, ..cfg }, &d).unwrap();
        assert_eq!(auto_step(&full).unwrap(), 0.004);
    }

    #[test]
    fn comparisons() {
        assert!(Comparison::band("x", 1.0, 0.1, Some(1.05)).pass);
        assert!(!Comparison::band("x", 1.0, 0.1, Some(1.2)).pass);
        assert!(!Comparison::band("x", 1.0, 0.1, None).pass);
        assert!(Comparison::floor("x", 1.0, 0.9, 0.0, Some(0.95)).pass);
        assert!(Comparison::floor("x", 1.0, 0.9, 0.1, Some(0.85)).pass);
        assert!(!Comparison::floor("x", 1.0, 0.9, 0.0, Some(0.85)).pass);
    }

    #[test]
    fn given_lambda_skips_solver() {
        let c = resolve_lambda(&ScenarioConfig::circulator()).unwrap();
        assert_eq!(c.source, "given");
        assert!(c.solver.is_none());
    }
}
