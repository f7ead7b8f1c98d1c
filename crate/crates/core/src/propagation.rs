//! Fixed-step propagators for the Schrödinger and Lindblad equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statespace::{
    expm_hermitian, hermitian_deviation, mul_sparse_left, mul_sparse_right, spectral_norm,
    unitarity_deviation, Basis, CMatrix, CVector, DensityMatrix, Operator, PureState, C64, I, ZERO,
};
use crate::devices::LindbladChannel;

/// Time-dependent Hamiltonian in rad/ns on a fixed basis.
pub trait Hamiltonian: Sync {
    fn basis(&self) -> &Basis;

    /// Matrix at `t` (ns). Must be Hermitian.
    fn matrix_at(&self, t: f64) -> CMatrix;

    /// Largest angular frequency present in the matrix entries, rad/ns;
    /// zero means "no constraint".
    fn fastest_frequency(&self) -> f64 {
        0.0
    }
}

/// Wraps a closure as a [`Hamiltonian`].
pub struct FnHamiltonian<F> {
    basis: Basis,
    omega_max: f64,
    f: F,
}

impl<F: Fn(f64) -> CMatrix + Sync> FnHamiltonian<F> {
    pub fn new(basis: Basis, omega_max: f64, f: F) -> Self {
        Self { basis, omega_max, f }
    }
}

impl<F: Fn(f64) -> CMatrix + Sync> Hamiltonian for FnHamiltonian<F> {
    fn basis(&self) -> &Basis {
        &self.basis
    }

    fn matrix_at(&self, t: f64) -> CMatrix {
        (self.f)(t)
    }

    fn fastest_frequency(&self) -> f64 {
        self.omega_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    /// Midpoint matrix exponential per step.
    PiecewiseExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Largest step, ns. The run uses `tau / ceil(tau / step)`.
    pub step: f64,
    pub method: Method,
    /// Record every `record_stride` steps (first and last are always kept).
    pub record_stride: usize,
}

/// Samples per period of the fastest phase required by [`PropagationConfig::validate`].
pub const SAMPLES_PER_PERIOD: f64 = 20.0;

impl PropagationConfig {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            method: Method::Rk4,
            record_stride: 1,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Largest admissible step for a Hamiltonian whose fastest phase
    /// rotates at `omega_max` rad/ns.
    pub fn max_step(omega_max: f64) -> f64 {
        if omega_max > 0.0 {
            2.0 * std::f64::consts::PI / omega_max / SAMPLES_PER_PERIOD
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self, omega_max: f64) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {}", self.step)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record stride must be >= 1".into()));
        }
        let limit = Self::max_step(omega_max);
        if self.step > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "step {} ns does not resolve the fastest phase (need <= {limit:.6} ns)",
                self.step
            )));
        }
        Ok(())
    }

    fn grid(&self, tau: f64) -> Result<(usize, f64)> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("duration must be positive, got {tau}")));
        }
        let n = ((tau / self.step) - 1e-9).ceil().max(1.0) as usize;
        Ok((n, tau / n as f64))
    }
}

/// Worst-case validity measures over the recorded states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub step_ns: f64,
    /// `max |norm^2 - 1|` (pure) or `max |tr rho - 1|` (mixed).
    pub max_norm_drift: f64,
    pub max_hermitian_deviation: f64,
    /// Smallest eigenvalue seen (mixed runs), 0 otherwise.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: RunDiagnostics,
}

impl<S> Trajectory<S> {
    pub fn final_state(&self) -> &S {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Norm drift above this aborts a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Eigenvalues below `-POSITIVITY_LIMIT` abort a Lindblad run.
pub const POSITIVITY_LIMIT: f64 = 1e-6;

fn check_dims(basis: &Basis, found: usize) -> Result<()> {
    let expected = basis.len();
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    let deviation = hermitian_deviation(m);
    if deviation > 1e-9 {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

fn time_at(k: usize, n: usize, tau: f64) -> f64 {
    if k == n {
        tau
    } else {
        tau * k as f64 / n as f64
    }
}

fn recorded(k: usize, n: usize, stride: usize) -> bool {
    k % stride == 0 || k == n
}

/// Integrates `i d psi/dt = H(t) psi` over `[0, tau]`.
pub fn propagate_schrodinger<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &PureState,
    tau: f64,
    cfg: &PropagationConfig,
) -> Result<Trajectory<PureState>> {
    check_dims(h.basis(), psi0.dim())?;
    cfg.validate(h.fastest_frequency())?;
    let drift0 = (psi0.norm_sqr() - 1.0).abs();
    if drift0 > crate::statespace::STATE_TOL {
        return Err(Error::InvalidState(format!("initial state norm off by {drift0:e}")));
    }
    let (n, dt) = cfg.grid(tau)?;
    let basis = psi0.basis().clone();
    let mut psi = psi0.amplitudes().clone();
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut diag = RunDiagnostics {
        steps: n,
        step_ns: dt,
        ..Default::default()
    };
    let mut h_start = h.matrix_at(0.0);
    check_hermitian(&h_start)?;
    for k in 0..n {
        let t0 = time_at(k, n, tau);
        let t1 = time_at(k + 1, n, tau);
        let h_mid = h.matrix_at(0.5 * (t0 + t1));
        psi = match cfg.method {
            Method::Rk4 => {
                let h_end = h.matrix_at(t1);
                let f = |m: &CMatrix, v: &CVector| (m * v) * (-I);
                let k1 = f(&h_start, &psi);
                let k2 = f(&h_mid, &(&psi + &k1 * C64::new(0.5 * dt, 0.0)));
                let k3 = f(&h_mid, &(&psi + &k2 * C64::new(0.5 * dt, 0.0)));
                let k4 = f(&h_end, &(&psi + &k3 * C64::new(dt, 0.0)));
                let next = &psi + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
                h_start = h_end;
                next
            }
            Method::PiecewiseExponential => {
                check_hermitian(&h_mid)?;
                expm_hermitian(&h_mid, dt) * psi
            }
        };
        let norm_sqr = psi.norm_squared();
        if !norm_sqr.is_finite() {
            return Err(Error::NonFinite(format!("propagating at t = {t1} ns")));
        }
        let drift = (norm_sqr - 1.0).abs();
        diag.max_norm_drift = diag.max_norm_drift.max(drift);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::Integrator(format!(
                "norm drift {drift:e} at t = {t1} ns; step {dt} ns is too large"
            )));
        }
        if recorded(k + 1, n, cfg.record_stride) {
            times.push(t1);
            states.push(PureState::unnormalized(basis.clone(), psi.clone())?);
        }
    }
    Ok(Trajectory {
        times,
        states,
        diagnostics: diag,
    })
}

struct LindbladWork {
    h_eff_shift: CMatrix,
    jumps: Vec<(CMatrix, CMatrix, f64)>,
    x: CMatrix,
    y: CMatrix,
    z: CMatrix,
}

impl LindbladWork {
    fn new(dim: usize, channels: &[LindbladChannel]) -> Self {
        let mut shift = CMatrix::zeros(dim, dim);
        let mut jumps = Vec::new();
        for ch in channels {
            let l = ch.operator.matrix();
            let ld = l.adjoint();
            shift += (&ld * l) * C64::new(0.0, -0.5 * ch.rate);
            if ch.rate != 0.0 {
                jumps.push((l.clone(), ld, ch.rate));
            }
        }
        Self {
            h_eff_shift: shift,
            jumps,
            x: CMatrix::zeros(dim, dim),
            y: CMatrix::zeros(dim, dim),
            z: CMatrix::zeros(dim, dim),
        }
    }

    fn effective(&self, h: CMatrix) -> CMatrix {
        h + &self.h_eff_shift
    }

    /// `out = -i (H_eff rho - rho H_eff^dagger) + sum_k G_k L rho L^dagger`
    /// for Hermitian `rho`.
    fn rhs(&mut self, h_eff: &CMatrix, rho: &CMatrix, out: &mut CMatrix) {
        mul_sparse_left(h_eff, rho, &mut self.x);
        let n = rho.nrows();
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = (self.x[(i, j)] - self.x[(j, i)].conj()) * (-I);
            }
        }
        for (l, ld, rate) in &self.jumps {
            mul_sparse_left(l, rho, &mut self.y);
            mul_sparse_right(&self.y, ld, &mut self.z);
            *out += &self.z * C64::new(*rate, 0.0);
        }
    }
}

/// Integrates `rho' = -i[H, rho] + sum_k G_k (L rho L^dagger - {L^dagger L, rho}/2)`.
///
/// Only the fixed-step RK4 method is available for mixed states. Every
/// recorded state is checked for trace, Hermiticity and positivity.
pub fn propagate_lindblad<H: Hamiltonian + ?Sized>(
    h: &H,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    tau: f64,
    cfg: &PropagationConfig,
) -> Result<Trajectory<DensityMatrix>> {
    let dim = rho0.dim();
    check_dims(h.basis(), dim)?;
    for ch in channels {
        if ch.operator.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ch.operator.dim(),
            });
        }
        if !(ch.rate >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative rate on {}", ch.transmon)));
        }
    }
    if cfg.method != Method::Rk4 {
        return Err(Error::InvalidParameter(
            "mixed-state propagation supports the rk4 method only".into(),
        ));
    }
    cfg.validate(h.fastest_frequency())?;
    let (n, dt) = cfg.grid(tau)?;
    let basis = rho0.basis().clone();
    let mut work = LindbladWork::new(dim, channels);
    let mut rho = rho0.matrix().clone();
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut diag = RunDiagnostics {
        steps: n,
        step_ns: dt,
        min_eigenvalue: rho0.min_eigenvalue(),
        ..Default::default()
    };
    let h0 = h.matrix_at(0.0);
    check_hermitian(&h0)?;
    let mut h_start = work.effective(h0);
    let zeros = || CMatrix::zeros(dim, dim);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (zeros(), zeros(), zeros(), zeros(), zeros());
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    for k in 0..n {
        let t0 = time_at(k, n, tau);
        let t1 = time_at(k + 1, n, tau);
        let h_mid = work.effective(h.matrix_at(0.5 * (t0 + t1)));
        let h_end = work.effective(h.matrix_at(t1));
        work.rhs(&h_start, &rho, &mut k1);
        shifted(&rho, half, &k1, &mut tmp);
        work.rhs(&h_mid, &tmp, &mut k2);
        shifted(&rho, half, &k2, &mut tmp);
        work.rhs(&h_mid, &tmp, &mut k3);
        shifted(&rho, full, &k3, &mut tmp);
        work.rhs(&h_end, &tmp, &mut k4);
        k2 += &k3;
        k1 += &k4;
        tmp.copy_from(&rho);
        shifted(&tmp, C64::new(dt / 6.0, 0.0), &k1, &mut rho);
        tmp.copy_from(&rho);
        shifted(&tmp, C64::new(dt / 3.0, 0.0), &k2, &mut rho);
        h_start = h_end;

        if recorded(k + 1, n, cfg.record_stride) {
            let tr = rho.trace();
            if !tr.re.is_finite() {
                return Err(Error::NonFinite(format!("propagating at t = {t1} ns")));
            }
            let drift = (tr - C64::new(1.0, 0.0)).norm();
            let herm = hermitian_deviation(&rho);
            let state = DensityMatrix::from_raw(basis.clone(), rho.clone());
            let min_eig = state.min_eigenvalue();
            diag.max_norm_drift = diag.max_norm_drift.max(drift);
            diag.max_hermitian_deviation = diag.max_hermitian_deviation.max(herm);
            diag.min_eigenvalue = diag.min_eigenvalue.min(min_eig);
            if drift > NORM_DRIFT_LIMIT || herm > NORM_DRIFT_LIMIT {
                return Err(Error::Integrator(format!(
                    "trace drift {drift:e} / Hermiticity {herm:e} at t = {t1} ns"
                )));
            }
            if min_eig < -POSITIVITY_LIMIT {
                return Err(Error::Integrator(format!(
                    "density matrix eigenvalue {min_eig:e} at t = {t1} ns"
                )));
            }
            times.push(t1);
            states.push(state);
        }
    }
    Ok(Trajectory {
        times,
        states,
        diagnostics: diag,
    })
}

/// `out = base + a * x`
fn shifted(base: &CMatrix, a: C64, x: &CMatrix, out: &mut CMatrix) {
    for ((o, b), v) in out.iter_mut().zip(base.iter()).zip(x.iter()) {
        *o = b + a * v;
    }
}

/// Time-ordered product of midpoint exponentials `exp(-i H(t_k + dt/2) dt)`.
pub fn evolution_operator_oracle<H: Hamiltonian + ?Sized>(
    h: &H,
    tau: f64,
    cfg: &PropagationConfig,
) -> Result<Operator> {
    cfg.validate(h.fastest_frequency())?;
    let (n, dt) = cfg.grid(tau)?;
    let dim = h.basis().len();
    let mut u = CMatrix::identity(dim, dim);
    for k in 0..n {
        let t_mid = 0.5 * (time_at(k, n, tau) + time_at(k + 1, n, tau));
        let hm = h.matrix_at(t_mid);
        check_hermitian(&hm)?;
        u = expm_hermitian(&hm, dt) * u;
    }
    let deviation = unitarity_deviation(&u);
    if deviation > 1e-8 {
        return Err(Error::NotUnitary { deviation });
    }
    Operator::new(h.basis().clone(), u)
}

/// `min_phi |u1 - exp(i phi) u2|_2`, with `phi = arg tr(u2^dagger u1)`.
pub fn phase_aligned_distance(u1: &CMatrix, u2: &CMatrix) -> Result<f64> {
    if u1.shape() != u2.shape() {
        return Err(Error::DimensionMismatch {
            expected: u1.nrows(),
            found: u2.nrows(),
        });
    }
    let overlap = (u2.adjoint() * u1).trace();
    let phase = if overlap == ZERO {
        C64::new(1.0, 0.0)
    } else {
        overlap / overlap.norm()
    };
    Ok(spectral_norm(&(u1 - u2 * phase)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{channel_operator, TransmonLabel};
    use crate::invariant::{target_unitary, AuxiliaryTrajectory, Couplings};
    use crate::statespace::{ONE, STATE_TOL};
    use std::f64::consts::PI;

    fn zero_h(dim: usize) -> FnHamiltonian<impl Fn(f64) -> CMatrix + Sync> {
        let basis = Basis::levels(dim);
        FnHamiltonian::new(basis, 0.0, move |_| CMatrix::zeros(dim, dim))
    }

    fn rabi(omega: f64) -> FnHamiltonian<impl Fn(f64) -> CMatrix + Sync> {
        FnHamiltonian::new(Basis::three_level(), omega, move |_| {
            let mut m = CMatrix::zeros(3, 3);
            m[(0, 1)] = C64::new(0.5 * omega, 0.0);
            m[(1, 0)] = C64::new(0.5 * omega, 0.0);
            m
        })
    }

    fn ideal(lambda: f64) -> FnHamiltonian<impl Fn(f64) -> CMatrix + Sync> {
        let traj = AuxiliaryTrajectory::new(lambda, 145.0).unwrap();
        FnHamiltonian::new(Basis::three_level(), 0.1, move |t| {
            let (a, b) = traj.couplings(t);
            let (a, b) = (C64::new(0.5 * a, 0.0), C64::new(0.5 * b, 0.0));
            CMatrix::from_row_slice(3, 3, &[ZERO, a, ZERO, a, ZERO, b, ZERO, b, ZERO])
        })
    }

    fn ket(i: usize) -> PureState {
        PureState::basis_state(Basis::three_level(), i)
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = zero_h(3);
        let psi = PureState::from_slice(
            Basis::levels(3),
            &[C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO],
        )
        .unwrap();
        for method in [Method::Rk4, Method::PiecewiseExponential] {
            let cfg = PropagationConfig::new(0.1).with_method(method);
            let out = propagate_schrodinger(&h, &psi, 5.0, &cfg).unwrap();
            assert_eq!(out.final_state().amplitudes(), psi.amplitudes());
        }
        let u = evolution_operator_oracle(&h, 5.0, &PropagationConfig::new(0.1)).unwrap();
        assert_eq!(u.matrix(), &CMatrix::identity(3, 3));
    }

    #[test]
    fn rabi_period_returns_up_to_phase() {
        let omega = 0.5;
        let tau = 2.0 * PI / omega;
        let cfg = PropagationConfig::new(0.01);
        let out = propagate_schrodinger(&rabi(omega), &ket(0), tau, &cfg).unwrap();
        let overlap = ket(0).inner(out.final_state()).norm();
        assert!((overlap - 1.0).abs() < 1e-9);
        assert!((out.final_state().amplitude(0) + ONE).norm() < 1e-8);
        assert!(out.diagnostics.max_norm_drift < 1e-8);
    }

    #[test]
    fn ideal_design_sends_a_to_minus_b() {
        let h = ideal(0.4974);
        let out = propagate_schrodinger(&h, &ket(0), 145.0, &PropagationConfig::new(0.05)).unwrap();
        let b = out.final_state().amplitude(2);
        assert!((b + ONE).norm() < 1e-3, "amplitude on B: {b}");
        assert!(out.diagnostics.max_norm_drift < 1e-8);
    }

    #[test]
    fn oracle_matches_target_and_schrodinger_columns() {
        let h = ideal(0.497473);
        let cfg = PropagationConfig::new(0.05).with_method(Method::PiecewiseExponential);
        let u = evolution_operator_oracle(&h, 145.0, &cfg).unwrap();
        let target = target_unitary(1.5 * PI);
        assert!(phase_aligned_distance(u.matrix(), target.matrix()).unwrap() < 1e-3);
        for j in 0..3 {
            let out = propagate_schrodinger(&h, &ket(j), 145.0, &cfg).unwrap();
            for i in 0..3 {
                assert!((u.get(i, j) - out.final_state().amplitude(i)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn step_validation() {
        let cfg = PropagationConfig::new(0.005);
        let omega = 2.0 * PI * 10.69;
        assert!(cfg.validate(omega).is_err());
        assert!(PropagationConfig::new(0.004).validate(omega).is_ok());
        assert!(PropagationConfig::new(-1.0).validate(0.0).is_err());
        assert!(PropagationConfig::new(0.1).with_stride(0).validate(0.0).is_err());
    }

    #[test]
    fn too_large_step_is_reported() {
        let h = FnHamiltonian::new(Basis::three_level(), 0.0, |_| {
            let mut m = CMatrix::zeros(3, 3);
            m[(0, 1)] = C64::new(5.0, 0.0);
            m[(1, 0)] = C64::new(5.0, 0.0);
            m
        });
        let err = propagate_schrodinger(&h, &ket(0), 10.0, &PropagationConfig::new(0.2)).unwrap_err();
        assert!(matches!(err, Error::Integrator(_)));
    }

    #[test]
    fn dimension_mismatch() {
        let h = zero_h(2);
        assert!(matches!(
            propagate_schrodinger(&h, &ket(0), 1.0, &PropagationConfig::new(0.1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lindblad_without_channels_matches_schrodinger() {
        let h = ideal(0.4974);
        let cfg = PropagationConfig::new(0.05).with_stride(100);
        let psi = propagate_schrodinger(&h, &ket(0), 145.0, &cfg).unwrap();
        let rho = propagate_lindblad(&h, &[], &ket(0).to_density(), 145.0, &cfg).unwrap();
        assert_eq!(psi.times, rho.times);
        let expected = psi.final_state().to_density();
        assert!((rho.final_state().matrix() - expected.matrix()).norm() < 1e-8);
    }

    #[test]
    fn pure_decay_channel() {
        let h = zero_h(2);
        let rate = 0.05;
        let ch = LindbladChannel {
            transmon: TransmonLabel::A,
            operator: channel_operator(2),
            rate,
        };
        let rho0 = PureState::basis_state(Basis::levels(2), 1).to_density();
        let out = propagate_lindblad(&h, &[ch], &rho0, 40.0, &PropagationConfig::new(0.05)).unwrap();
        let pops: Vec<f64> = out.states.iter().map(|r| r.population(1)).collect();
        assert!(pops.windows(2).all(|w| w[1] < w[0]));
        for r in &out.states {
            assert!((r.trace().re - 1.0).abs() < 1e-12);
        }
        // exact solution from the exponentiated Liouvillian on column-stacked rho
        let o = channel_operator(2).into_matrix();
        let od = o.adjoint();
        let odo = &od * &o;
        let id = CMatrix::identity(2, 2);
        let liouvillian = (o.conjugate().kronecker(&o)
            - id.kronecker(&odo) * C64::new(0.5, 0.0)
            - odo.transpose().kronecker(&id) * C64::new(0.5, 0.0))
            * C64::new(rate * 40.0, 0.0);
        let vec0 = CVector::from_column_slice(rho0.matrix().as_slice());
        let exact = liouvillian.exp() * vec0;
        let got = out.final_state().matrix();
        for (k, z) in exact.iter().enumerate() {
            assert!((got[(k % 2, k / 2)] - z).norm() < 1e-9);
        }
    }

    #[test]
    fn lindblad_rejects_exponential_method() {
        let h = zero_h(2);
        let rho0 = PureState::basis_state(Basis::levels(2), 0).to_density();
        let cfg = PropagationConfig::new(0.1).with_method(Method::PiecewiseExponential);
        assert!(propagate_lindblad(&h, &[], &rho0, 1.0, &cfg).is_err());
    }

    #[test]
    fn rk4_is_fourth_order() {
        let h = ideal(0.4974);
        let reference = propagate_schrodinger(&h, &ket(0), 145.0, &PropagationConfig::new(0.05))
            .unwrap()
            .final_state()
            .amplitudes()
            .clone();
        let errors: Vec<f64> = [2.0, 1.0, 0.5]
            .iter()
            .map(|&step| {
                let out = propagate_schrodinger(&h, &ket(0), 145.0, &PropagationConfig::new(step)).unwrap();
                (out.final_state().amplitudes() - &reference).norm()
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 4.0).abs() < 0.3, "observed order {order} from {errors:?}");
        }
    }

    #[test]
    fn step_halving_converges() {
        let h = ideal(0.4974);
        let a = propagate_schrodinger(&h, &ket(1), 145.0, &PropagationConfig::new(0.1)).unwrap();
        let b = propagate_schrodinger(&h, &ket(1), 145.0, &PropagationConfig::new(0.05)).unwrap();
        assert!((a.final_state().amplitudes() - b.final_state().amplitudes()).norm() < 1e-6);
    }

    #[test]
    fn phase_alignment() {
        let u = target_unitary(1.5 * PI).into_matrix();
        let shifted = &u * C64::from_polar(1.0, 0.7);
        assert!(phase_aligned_distance(&u, &shifted).unwrap() < 1e-14);
        let other = target_unitary(PI).into_matrix();
        assert!(phase_aligned_distance(&u, &other).unwrap() > 0.5);
    }

    #[test]
    fn recorded_times_follow_stride() {
        let h = zero_h(2);
        let psi = PureState::basis_state(Basis::levels(2), 0);
        let out = propagate_schrodinger(&h, &psi, 1.0, &PropagationConfig::new(0.1).with_stride(3)).unwrap();
        assert_eq!(out.times.len(), 5);
        assert_eq!(*out.times.last().unwrap(), 1.0);
        assert!((out.times[1] - 0.3).abs() < 1e-15);
        assert!(out.final_state().norm_sqr() - 1.0 < STATE_TOL);
    }
}
