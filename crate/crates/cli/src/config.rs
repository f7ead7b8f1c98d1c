//! Scenario files. Every dimensional key carries its unit in the name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nonrecip_core::devices::{ChainSpec, TransmonLabel, TransmonSpec};
use nonrecip_core::metrics::EnsembleMethod;
use nonrecip_core::statespace::units;
use nonrecip_core::ModelKind;

use crate::error::{CliError, CliResult};

/// Per-transmon section (`[transmon_a]`, `[transmon_m]`, `[transmon_b]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonSection {
    pub alpha_mhz: f64,
    pub gamma_khz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { lo: 0.1, hi: 1.0, n: 91 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub count: usize,
    pub method: EnsembleMethod,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            count: 1001,
            method: EnsembleMethod::Superposition,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub tau_ns: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_phase_rad: Option<f64>,
    pub noise: bool,
    /// Integrator step; when absent the largest step on a fixed ladder that
    /// resolves the model's fastest frequency is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_ns: Option<f64>,
    pub record_stride: usize,
    pub pulse_samples: usize,
    /// Relative overshoot of the Bessel maximum tolerated before a drive is
    /// reported unattainable.
    pub saturation_tol: f64,
    /// Initial state for `simulate`: `100`, `010`, `001`, `A`, `M`, `B` or `ensemble`.
    pub initial: String,
    pub out_dir: PathBuf,
    pub g_a_mhz: f64,
    pub g_b_mhz: f64,
    pub delta_mhz: f64,
    pub nu_mhz: f64,
    pub omega_m_ghz: f64,
    pub transmon_a: TransmonSection,
    pub transmon_m: TransmonSection,
    pub transmon_b: TransmonSection,
    pub sweep: SweepSection,
    pub ensemble: EnsembleSection,
}

/// Values of the three-transmon circulator, with no λ or phase chosen.
impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::SingleExcitation,
            tau_ns: 145.0,
            lambda: None,
            target_phase_rad: None,
            noise: true,
            step_ns: None,
            record_stride: 100,
            pulse_samples: nonrecip_core::invariant::DEFAULT_SAMPLES,
            saturation_tol: 1e-3,
            initial: "100".into(),
            out_dir: PathBuf::from("out"),
            g_a_mhz: 10.0,
            g_b_mhz: 10.0,
            delta_mhz: 345.0,
            nu_mhz: 345.0,
            omega_m_ghz: 5.0,
            transmon_a: TransmonSection {
                alpha_mhz: 220.0,
                gamma_khz: 3.0,
            },
            transmon_m: TransmonSection {
                alpha_mhz: 210.0,
                gamma_khz: 4.0,
            },
            transmon_b: TransmonSection {
                alpha_mhz: 230.0,
                gamma_khz: 5.0,
            },
            sweep: SweepSection::default(),
            ensemble: EnsembleSection::default(),
        }
    }
}

pub const DESIGN_LAMBDA: f64 = 0.4974;

impl ScenarioConfig {
    /// Defaults plus the circulator's λ.
    pub fn circulator() -> Self {
        Self {
            lambda: Some(DESIGN_LAMBDA),
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (self.lambda, self.target_phase_rad) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("exactly one of `lambda` and `target_phase_rad` must be given".into())
            }
            (Some(l), None) if !(l > 0.0 && l.is_finite()) => return bad(format!("lambda must be > 0, got {l}")),
            (None, Some(p)) if !p.is_finite() => return bad("target_phase_rad must be finite".into()),
            _ => {}
        }
        let positive = [
            ("tau_ns", self.tau_ns),
            ("g_a_mhz", self.g_a_mhz),
            ("g_b_mhz", self.g_b_mhz),
            ("omega_m_ghz", self.omega_m_ghz),
            ("transmon_a.alpha_mhz", self.transmon_a.alpha_mhz),
            ("transmon_m.alpha_mhz", self.transmon_m.alpha_mhz),
            ("transmon_b.alpha_mhz", self.transmon_b.alpha_mhz),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{key} must be positive, got {v}"));
            }
        }
        for (key, v) in [
            ("transmon_a.gamma_khz", self.transmon_a.gamma_khz),
            ("transmon_m.gamma_khz", self.transmon_m.gamma_khz),
            ("transmon_b.gamma_khz", self.transmon_b.gamma_khz),
            ("saturation_tol", self.saturation_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{key} must be non-negative, got {v}"));
            }
        }
        if !(self.delta_mhz.is_finite() && self.nu_mhz.is_finite()) {
            return bad("delta_mhz and nu_mhz must be finite".into());
        }
        if let Some(s) = self.step_ns {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step_ns must be positive, got {s}"));
            }
        }
        if self.record_stride == 0 {
            return bad("record_stride must be >= 1".into());
        }
        if self.pulse_samples < 3 {
            return bad("pulse_samples must be >= 3".into());
        }
        if self.ensemble.count < 2 {
            return bad("ensemble.count must be >= 2".into());
        }
        if !(self.sweep.lo > 0.0 && self.sweep.hi > self.sweep.lo) || self.sweep.n < 2 {
            return bad("sweep needs 0 < lo < hi and n >= 2".into());
        }
        if self.initial != "ensemble" {
            nonrecip_core::metrics::se_index(&self.initial).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn chain(&self) -> CliResult<ChainSpec> {
        let omega_m = units::ghz(self.omega_m_ghz);
        let delta = units::mhz(self.delta_mhz);
        let t = |label, omega, s: &TransmonSection| TransmonSpec {
            label,
            omega,
            alpha: units::mhz(s.alpha_mhz),
            gamma_decoherence: units::khz(s.gamma_khz),
        };
        let nu = units::mhz(self.nu_mhz);
        Ok(ChainSpec::new(
            [
                t(TransmonLabel::A, omega_m + delta, &self.transmon_a),
                t(TransmonLabel::M, omega_m, &self.transmon_m),
                t(TransmonLabel::B, omega_m + delta, &self.transmon_b),
            ],
            units::mhz(self.g_a_mhz),
            units::mhz(self.g_b_mhz),
            nu,
            nu,
            self.model.levels(),
        )?)
    }
}
