//! Concrete Hamiltonians for the transmon chain `A - M - B`.
//!
//! Three levels of description, from most to least idealized:
//!
//! * [`ideal_hamiltonian`]: the effective three-level model driven directly
//!   by the designed couplings `g'_A`, `g'_B`.
//! * [`single_excitation_hamiltonian`]: static couplings `g_j` dressed by the
//!   frequency-modulation phase `exp(i Delta_j t - i F_j(t))`, restricted to
//!   `{|100>, |010>, |001>}`. All Bessel sidebands are kept.
//! * [`full_chain_hamiltonian`]: the rotating-frame chain Hamiltonian on the
//!   full product space, counter-rotating terms included, for two- or
//!   three-level transmons.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::bessel::{invert_j1, Inversion, J1_ARGMAX, J1_MAX};
use crate::error::{Error, Result};
use crate::export::fmt_f64;
use crate::invariant::{synthesize_pulses, AuxiliaryTrajectory, Couplings, PulsePair};
use crate::numeric::interp_uniform;
use crate::propagation::Hamiltonian;
use crate::statespace::{units, Basis, CMatrix, Operator, PureState, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmonLabel {
    A,
    M,
    B,
}

impl TransmonLabel {
    pub const ALL: [TransmonLabel; 3] = [TransmonLabel::A, TransmonLabel::M, TransmonLabel::B];

    /// Position in the `A (x) M (x) B` product.
    pub fn site(self) -> usize {
        match self {
            TransmonLabel::A => 0,
            TransmonLabel::M => 1,
            TransmonLabel::B => 2,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            TransmonLabel::A => 'A',
            TransmonLabel::M => 'M',
            TransmonLabel::B => 'B',
        }
    }
}

impl fmt::Display for TransmonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    pub label: TransmonLabel,
    /// Qubit frequency, rad/ns.
    pub omega: f64,
    /// Anharmonicity (positive; level 2 sits `alpha` below harmonic), rad/ns.
    pub alpha: f64,
    /// Rate of the combined decay/dephasing channel, rad/ns.
    pub gamma_decoherence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// In `A, M, B` order.
    pub transmons: [TransmonSpec; 3],
    pub g_a: f64,
    pub g_b: f64,
    pub nu_a: f64,
    pub nu_b: f64,
    /// Levels kept per transmon, 2 or 3.
    pub levels: usize,
}

impl ChainSpec {
    pub fn new(
        transmons: [TransmonSpec; 3],
        g_a: f64,
        g_b: f64,
        nu_a: f64,
        nu_b: f64,
        levels: usize,
    ) -> Result<Self> {
        for (spec, label) in transmons.iter().zip(TransmonLabel::ALL) {
            if spec.label != label {
                return Err(Error::InvalidParameter(format!(
                    "transmon {} given in the slot of {label}",
                    spec.label
                )));
            }
            if !(spec.alpha > 0.0) || !(spec.gamma_decoherence >= 0.0) || !spec.omega.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "transmon {label}: need alpha > 0, gamma >= 0, finite omega"
                )));
            }
        }
        if !(g_a > 0.0 && g_b > 0.0 && nu_a.is_finite() && nu_b.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be positive".into()));
        }
        if !(2..=3).contains(&levels) {
            return Err(Error::InvalidParameter(format!(
                "transmon truncation must be 2 or 3, got {levels}"
            )));
        }
        Ok(Self {
            transmons,
            g_a,
            g_b,
            nu_a,
            nu_b,
            levels,
        })
    }

    /// Circulator parameters: `g = 2pi x 10 MHz`, `Delta = nu = 2pi x 345 MHz`,
    /// `alpha = 2pi x {220, 210, 230} MHz`, `Gamma = 2pi x {3, 4, 5} kHz`,
    /// `omega_M = 2pi x 5 GHz`.
    pub fn circulator_defaults() -> Self {
        let omega_m = units::ghz(5.0);
        let delta = units::mhz(345.0);
        let t = |label, omega, alpha_mhz, gamma_khz| TransmonSpec {
            label,
            omega,
            alpha: units::mhz(alpha_mhz),
            gamma_decoherence: units::khz(gamma_khz),
        };
        Self {
            transmons: [
                t(TransmonLabel::A, omega_m + delta, 220.0, 3.0),
                t(TransmonLabel::M, omega_m, 210.0, 4.0),
                t(TransmonLabel::B, omega_m + delta, 230.0, 5.0),
            ],
            g_a: units::mhz(10.0),
            g_b: units::mhz(10.0),
            nu_a: delta,
            nu_b: delta,
            levels: 2,
        }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    pub fn transmon(&self, label: TransmonLabel) -> &TransmonSpec {
        &self.transmons[label.site()]
    }

    pub fn delta_a(&self) -> f64 {
        self.transmons[0].omega - self.transmons[1].omega
    }

    pub fn delta_b(&self) -> f64 {
        self.transmons[2].omega - self.transmons[1].omega
    }

    /// Largest `|Delta_j - nu_j|`.
    pub fn resonance_mismatch(&self) -> f64 {
        (self.delta_a() - self.nu_a)
            .abs()
            .max((self.delta_b() - self.nu_b).abs())
    }

    pub fn check_resonance(&self, tol: f64) -> Result<()> {
        let m = self.resonance_mismatch();
        if m > tol {
            return Err(Error::InvalidParameter(format!(
                "drive frequencies miss the detunings by {m} rad/ns"
            )));
        }
        Ok(())
    }
}

/// Frequency-modulation envelopes `eta_j(t)` and the phases
/// `F_j(t) = eta_j(t) sin(nu_j t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub times: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub eta_b: Vec<f64>,
    pub nu_a: f64,
    pub nu_b: f64,
    /// Samples clamped at the J1 maximum (A, B).
    pub saturated: (usize, usize),
    /// Largest requested `g'_j / (2 g_j)` (A, B).
    pub peak_ratio: (f64, f64),
}

impl DriveWaveform {
    /// All-zero envelopes on a grid.
    pub fn zero(times: Vec<f64>, nu_a: f64, nu_b: f64) -> Self {
        let n = times.len();
        Self {
            times,
            eta_a: vec![0.0; n],
            eta_b: vec![0.0; n],
            nu_a,
            nu_b,
            saturated: (0, 0),
            peak_ratio: (0.0, 0.0),
        }
    }

    /// Constant envelopes; only useful away from the endpoints.
    pub fn constant(times: Vec<f64>, eta_a: f64, eta_b: f64, nu_a: f64, nu_b: f64) -> Self {
        let n = times.len();
        Self {
            times,
            eta_a: vec![eta_a; n],
            eta_b: vec![eta_b; n],
            nu_a,
            nu_b,
            saturated: (0, 0),
            peak_ratio: (0.0, 0.0),
        }
    }

    pub fn tau(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn step(&self) -> f64 {
        self.tau() / (self.times.len() - 1) as f64
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let tau = self.tau();
        if (0.0..=tau).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, tau })
        }
    }

    /// Interpolated `(eta_A, eta_B)`.
    pub fn eta_at(&self, t: f64) -> (f64, f64) {
        let dt = self.step();
        (
            interp_uniform(0.0, dt, &self.eta_a, t),
            interp_uniform(0.0, dt, &self.eta_b, t),
        )
    }

    /// `(F_A(t), F_B(t))`.
    pub fn phase_at(&self, t: f64) -> (f64, f64) {
        let (ea, eb) = self.eta_at(t);
        (ea * (self.nu_a * t).sin(), eb * (self.nu_b * t).sin())
    }

    /// Header `t_ns,eta_a,eta_b`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_ns,eta_a,eta_b")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.eta_a[k]),
                fmt_f64(self.eta_b[k])
            )?;
        }
        Ok(())
    }
}

/// Envelopes realizing `g'_j(t) = 2 g_j J1(eta_j(t))` on the principal branch.
///
/// Targets above the J1 maximum by no more than `saturation_tol` (relative)
/// are clamped to `eta = J1_ARGMAX` and counted in
/// [`DriveWaveform::saturated`]; larger ones fail with
/// [`Error::UnattainableDrive`] naming the worst sample.
pub fn invert_bessel_drive(
    pulses: &PulsePair,
    chain: &ChainSpec,
    saturation_tol: f64,
) -> Result<DriveWaveform> {
    let invert = |samples: &[f64], g: f64, label: TransmonLabel| -> Result<(Vec<f64>, usize, f64)> {
        let ratios: Vec<f64> = samples.iter().map(|x| x / (2.0 * g)).collect();
        let (worst_k, peak) = ratios
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, r)| if r > acc.1 { (k, r) } else { acc });
        if peak > J1_MAX * (1.0 + saturation_tol) {
            return Err(Error::UnattainableDrive {
                transmon: label.as_char(),
                t_ns: pulses.times[worst_k],
                ratio: peak,
                limit: J1_MAX,
            });
        }
        let last = samples.len() - 1;
        let mut saturated = 0;
        let mut etas = Vec::with_capacity(samples.len());
        for (k, &r) in ratios.iter().enumerate() {
            if k == 0 || k == last {
                etas.push(0.0);
                continue;
            }
            let inv = invert_j1(r, saturation_tol)?;
            if matches!(inv, Inversion::Saturated { .. }) {
                saturated += 1;
            }
            etas.push(inv.eta());
        }
        Ok((etas, saturated, peak))
    };
    let (eta_a, sat_a, peak_a) = invert(&pulses.g_a, chain.g_a, TransmonLabel::A)?;
    let (eta_b, sat_b, peak_b) = invert(&pulses.g_b, chain.g_b, TransmonLabel::B)?;
    debug_assert!(eta_a.iter().chain(&eta_b).all(|e| (0.0..=J1_ARGMAX).contains(e)));
    Ok(DriveWaveform {
        times: pulses.times.clone(),
        eta_a,
        eta_b,
        nu_a: chain.nu_a,
        nu_b: chain.nu_b,
        saturated: (sat_a, sat_b),
        peak_ratio: (peak_a, peak_b),
    })
}

fn effective_matrix(g_a: f64, g_b: f64) -> CMatrix {
    let a = C64::new(0.5 * g_a, 0.0);
    let b = C64::new(0.5 * g_b, 0.0);
    CMatrix::from_row_slice(3, 3, &[ZERO, a, ZERO, a, ZERO, b, ZERO, b, ZERO])
}

fn single_excitation_matrix(chain: &ChainSpec, drives: &DriveWaveform, t: f64) -> CMatrix {
    let (fa, fb) = drives.phase_at(t);
    let a = C64::from_polar(chain.g_a, chain.delta_a() * t - fa);
    let b = C64::from_polar(chain.g_b, chain.delta_b() * t - fb);
    CMatrix::from_row_slice(3, 3, &[ZERO, a, ZERO, a.conj(), ZERO, b.conj(), ZERO, b, ZERO])
}

fn full_chain_matrix(chain: &ChainSpec, drives: &DriveWaveform, t: f64) -> CMatrix {
    let d = chain.levels;
    let dim = d * d * d;
    let (fa, fb) = drives.phase_at(t);
    let omega_m = chain.transmons[1].omega;
    // lowering-step phases: a_j(t) = sum_n sqrt(n) |n-1><n| exp(-i phi_j)
    let phi_a = chain.transmons[0].omega * t - fa;
    let phi_b = chain.transmons[2].omega * t - fb;
    let phi_m = omega_m * t;
    // matrix of X = a + a^dagger with lowering phase phi
    let ladder = |phi: f64| -> CMatrix {
        let mut x = CMatrix::zeros(d, d);
        for n in 1..d {
            let amp = (n as f64).sqrt();
            x[(n - 1, n)] = C64::from_polar(amp, -phi);
            x[(n, n - 1)] = C64::from_polar(amp, phi);
        }
        x
    };
    let xa = ladder(phi_a);
    let xm = ladder(phi_m);
    let xb = ladder(phi_b);
    let idx = |a: usize, m: usize, b: usize| (a * d + m) * d + b;
    let mut h = CMatrix::zeros(dim, dim);
    for a in 0..d {
        for m in 0..d {
            for b in 0..d {
                let col = idx(a, m, b);
                for m2 in 0..d {
                    let xmv = xm[(m2, m)];
                    if xmv == ZERO {
                        continue;
                    }
                    for a2 in 0..d {
                        let v = xa[(a2, a)];
                        if v != ZERO {
                            h[(idx(a2, m2, b), col)] += v * xmv * chain.g_a;
                        }
                    }
                    for b2 in 0..d {
                        let v = xb[(b2, b)];
                        if v != ZERO {
                            h[(idx(a, m2, b2), col)] += v * xmv * chain.g_b;
                        }
                    }
                }
                if d > 2 {
                    // anharmonic shift relative to the harmonic frame
                    let shift: f64 = [a, m, b]
                        .iter()
                        .zip(&chain.transmons)
                        .map(|(&n, spec)| -spec.alpha * (n * n.saturating_sub(1)) as f64 / 2.0)
                        .sum();
                    h[(col, col)] += C64::new(shift, 0.0);
                }
            }
        }
    }
    h
}

/// Effective three-level Hamiltonian in `{|100>, |010>, |001>}`.
pub fn ideal_hamiltonian<C: Couplings + ?Sized>(pulses: &C, t: f64) -> Result<Operator> {
    let tau = pulses.duration();
    if !(0.0..=tau).contains(&t) {
        return Err(Error::TimeOutOfRange { t, tau });
    }
    let (a, b) = pulses.couplings(t);
    Operator::new(Basis::single_excitation(), effective_matrix(a, b))
}

/// Phase-modulated exchange Hamiltonian in `{|100>, |010>, |001>}`.
pub fn single_excitation_hamiltonian(
    chain: &ChainSpec,
    drives: &DriveWaveform,
    t: f64,
) -> Result<Operator> {
    drives.check_time(t)?;
    Operator::new(Basis::single_excitation(), single_excitation_matrix(chain, drives, t))
}

/// Rotating-frame chain Hamiltonian on the `levels^3` product space.
pub fn full_chain_hamiltonian(
    chain: &ChainSpec,
    drives: &DriveWaveform,
    t: f64,
) -> Result<Operator> {
    drives.check_time(t)?;
    Operator::new(product_basis(chain.levels), full_chain_matrix(chain, drives, t))
}

/// `A (x) M (x) B` product basis with labels like `"010"`.
pub fn product_basis(levels: usize) -> Basis {
    let single = Basis::levels(levels);
    single.tensor(&single).tensor(&single)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladChannel {
    pub transmon: TransmonLabel,
    pub operator: Operator,
    /// rad/ns
    pub rate: f64,
}

/// Single-transmon channel operator `|0><1| + |0><0| - |1><1|` on `levels`
/// levels; rows and columns of level 2 are zero.
pub fn channel_operator(levels: usize) -> Operator {
    let mut m = CMatrix::zeros(levels, levels);
    m[(0, 1)] = ONE;
    m[(0, 0)] = ONE;
    m[(1, 1)] = -ONE;
    Operator::new(Basis::levels(levels), m).expect("finite")
}

/// One combined decay/dephasing channel per transmon, embedded in the
/// `A (x) M (x) B` space with `levels` levels each.
pub fn lindblad_channels(chain: &ChainSpec, levels: usize) -> Vec<LindbladChannel> {
    let id = Operator::identity(Basis::levels(levels));
    let local = channel_operator(levels);
    TransmonLabel::ALL
        .iter()
        .map(|&label| {
            let factors = match label {
                TransmonLabel::A => [&local, &id, &id],
                TransmonLabel::M => [&id, &local, &id],
                TransmonLabel::B => [&id, &id, &local],
            };
            let op = crate::statespace::tensor_product(
                &crate::statespace::tensor_product(factors[0], factors[1]),
                factors[2],
            );
            LindbladChannel {
                transmon: label,
                operator: op,
                rate: chain.transmon(label).gamma_decoherence,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ideal,
    SingleExcitation,
    FullQubit,
    FullThreeLevel,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ideal => "ideal",
            ModelKind::SingleExcitation => "single_excitation",
            ModelKind::FullQubit => "full_qubit",
            ModelKind::FullThreeLevel => "full_three_level",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            ModelKind::Ideal,
            ModelKind::SingleExcitation,
            ModelKind::FullQubit,
            ModelKind::FullThreeLevel,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }

    pub fn levels(self) -> usize {
        match self {
            ModelKind::FullThreeLevel => 3,
            _ => 2,
        }
    }

    pub fn needs_drives(self) -> bool {
        !matches!(self, ModelKind::Ideal)
    }

    pub fn is_full(self) -> bool {
        matches!(self, ModelKind::FullQubit | ModelKind::FullThreeLevel)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A chain model ready for propagation.
///
/// The ideal and single-excitation models act on three states; with
/// `product_space` they are embedded into the `A (x) M (x) B` qubit space
/// so that decay out of the single-excitation subspace can be represented.
#[derive(Clone, Debug)]
pub struct ChainModel {
    kind: ModelKind,
    chain: ChainSpec,
    pulses: PulsePair,
    drives: Option<DriveWaveform>,
    basis: Basis,
    se_index: [usize; 3],
    embedded: bool,
}

impl ChainModel {
    pub fn new(
        kind: ModelKind,
        chain: ChainSpec,
        pulses: PulsePair,
        drives: Option<DriveWaveform>,
        product_space: bool,
    ) -> Result<Self> {
        if kind.needs_drives() && drives.is_none() {
            return Err(Error::InvalidParameter(format!("model {kind} needs drive envelopes")));
        }
        let chain = chain.with_levels(kind.levels());
        let (basis, embedded) = if kind.is_full() || product_space {
            (product_basis(chain.levels), !kind.is_full())
        } else {
            (Basis::single_excitation(), false)
        };
        let se_index = ["100", "010", "001"].map(|n| basis.index_of(n).expect("label present"));
        Ok(Self {
            kind,
            chain,
            pulses,
            drives,
            basis,
            se_index,
            embedded,
        })
    }

    /// Synthesizes pulses for `traj`, inverts them into drive envelopes when
    /// the model needs them, and assembles the model.
    pub fn design(
        kind: ModelKind,
        chain: ChainSpec,
        traj: &AuxiliaryTrajectory,
        samples: usize,
        product_space: bool,
        saturation_tol: f64,
    ) -> Result<Self> {
        let pulses = synthesize_pulses(traj, samples)?;
        let drives = if kind.needs_drives() {
            Some(invert_bessel_drive(&pulses, &chain, saturation_tol)?)
        } else {
            None
        };
        Self::new(kind, chain, pulses, drives, product_space)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn pulses(&self) -> &PulsePair {
        &self.pulses
    }

    pub fn drives(&self) -> Option<&DriveWaveform> {
        self.drives.as_ref()
    }

    pub fn tau(&self) -> f64 {
        self.pulses.tau()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Positions of `|100>`, `|010>`, `|001>` in the model basis.
    pub fn single_excitation_indices(&self) -> [usize; 3] {
        self.se_index
    }

    pub fn is_product_space(&self) -> bool {
        self.basis.len() > 3
    }

    /// Decoherence channels; empty unless the model lives in the product space.
    pub fn lindblad_channels(&self) -> Vec<LindbladChannel> {
        if self.is_product_space() {
            lindblad_channels(&self.chain, self.chain.levels)
        } else {
            Vec::new()
        }
    }

    /// Lifts a state on `{|100>, |010>, |001>}` into the model basis.
    pub fn embed(&self, state: &PureState) -> Result<PureState> {
        if state.dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: state.dim(),
            });
        }
        let mut amps = crate::statespace::CVector::zeros(self.dim());
        for (k, &i) in self.se_index.iter().enumerate() {
            amps[i] = state.amplitude(k);
        }
        PureState::new(self.basis.clone(), amps)
    }

    fn se_matrix(&self, t: f64) -> CMatrix {
        match self.kind {
            ModelKind::Ideal => {
                let (a, b) = self.pulses.couplings(t);
                effective_matrix(a, b)
            }
            _ => single_excitation_matrix(&self.chain, self.drives.as_ref().unwrap(), t),
        }
    }

    /// Hamiltonian at `t` as a labeled operator.
    pub fn hamiltonian(&self, t: f64) -> Result<Operator> {
        let tau = self.tau();
        if !(0.0..=tau).contains(&t) {
            return Err(Error::TimeOutOfRange { t, tau });
        }
        Operator::new(self.basis.clone(), self.matrix_at(t))
    }
}

impl Hamiltonian for ChainModel {
    fn basis(&self) -> &Basis {
        &self.basis
    }

    fn matrix_at(&self, t: f64) -> CMatrix {
        let t = t.clamp(0.0, self.tau());
        if self.kind.is_full() {
            return full_chain_matrix(&self.chain, self.drives.as_ref().unwrap(), t);
        }
        let small = self.se_matrix(t);
        if !self.embedded {
            return small;
        }
        let mut h = CMatrix::zeros(self.dim(), self.dim());
        for (r, &i) in self.se_index.iter().enumerate() {
            for (c, &j) in self.se_index.iter().enumerate() {
                h[(i, j)] = small[(r, c)];
            }
        }
        h
    }

    fn fastest_frequency(&self) -> f64 {
        let c = &self.chain;
        match self.kind {
            ModelKind::Ideal => {
                let (a, b) = self.pulses.peak();
                0.5 * a.max(b)
            }
            // instantaneous phase rate Delta_j - eta_j nu_j cos(nu_j t), eta_j <= J1_ARGMAX
            ModelKind::SingleExcitation => (c.delta_a().abs() + J1_ARGMAX * c.nu_a)
                .max(c.delta_b().abs() + J1_ARGMAX * c.nu_b),
            ModelKind::FullQubit | ModelKind::FullThreeLevel => {
                let wm = c.transmons[1].omega;
                (c.transmons[0].omega + wm + J1_ARGMAX * c.nu_a)
                    .max(c.transmons[2].omega + wm + J1_ARGMAX * c.nu_b)
            }
        }
    }
}
