//! Invariant-based pulse design for the three-level `{A, M, B}` system.
//!
//! The polynomial auxiliary trajectory `(gamma(t), beta(t))` fixes the
//! dynamical invariant, the two coupling pulses that keep it invariant, and
//! the phase picked up by each invariant eigenstate. `lambda` is the single
//! tunable knob; it is chosen so that the `+` eigenstate accumulates the
//! phase that turns the transfer into a circulator.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{self, Write};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, integrate, interp_uniform};
use crate::statespace::{
    commutator, expectation, Basis, CMatrix, CVector, Operator, PureState, C64, I, ONE, ZERO,
};

/// Default number of samples in a pulse table.
pub const DEFAULT_SAMPLES: usize = 2001;
/// Absolute tolerance of the phase quadrature, in rad.
pub const PHASE_TOL: f64 = 1e-8;
/// Phase tolerance of the lambda root finder, in rad.
pub const LAMBDA_PHASE_TOL: f64 = 1e-6;
/// Number of points in the monotonicity pre-scan of a lambda bracket.
pub const PRESCAN_POINTS: usize = 32;
/// Search interval for [`solve_lambda`] when none is given.
pub const DEFAULT_LAMBDA_BRACKET: (f64, f64) = (0.1, 1.0);

/// `(gamma, beta)` and their time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryPoint {
    pub gamma: f64,
    pub beta: f64,
    pub gamma_dot: f64,
    pub beta_dot: f64,
}

/// Polynomial auxiliary trajectory
///
/// ```text
/// gamma(t) = lambda * t^2 (t - tau)^2 / (tau/2)^4
/// beta(t)  = pi * (-10 s^7 + 35 s^6 - 42 s^5 + 35/2 s^4),   s = t / tau
/// ```
///
/// satisfying `gamma(0) = gamma(tau) = 0`, `beta(0) = 0`, `beta(tau) = pi/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryTrajectory {
    lambda: f64,
    tau: f64,
}

impl AuxiliaryTrajectory {
    /// `gamma` peaks at `lambda` at `t = tau/2`. Any `lambda > 0` is
    /// accepted, but phases are only defined for [`is_regular`](Self::is_regular)
    /// trajectories.
    pub fn new(lambda: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidTrajectory(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda, tau })
    }

    /// `sin(gamma) > 0` on the open interval, i.e. `lambda < pi`.
    pub fn is_regular(&self) -> bool {
        self.lambda < PI
    }

    fn require_regular(&self) -> Result<()> {
        if self.is_regular() {
            Ok(())
        } else {
            Err(Error::InvalidTrajectory(format!(
                "lambda = {} drives gamma through pi; the phase integrand is singular",
                self.lambda
            )))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.tau).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, tau: self.tau })
        }
    }

    pub fn eval(&self, t: f64) -> Result<AuxiliaryPoint> {
        self.check_time(t)?;
        Ok(self.point(t))
    }

    pub(crate) fn point(&self, t: f64) -> AuxiliaryPoint {
        let s = t / self.tau;
        let u = 1.0 - s;
        let s2 = s * s;
        let s4 = s2 * s2;
        AuxiliaryPoint {
            gamma: 16.0 * self.lambda * s2 * u * u,
            beta: PI * s4 * (-10.0 * s2 * s + 35.0 * s2 - 42.0 * s + 17.5),
            gamma_dot: 32.0 * self.lambda / self.tau * s * u * (1.0 - 2.0 * s),
            beta_dot: 70.0 * PI / self.tau * s2 * s * u * u * u,
        }
    }

    /// `beta_dot / gamma`, a polynomial with no singularity at the ends.
    fn beta_dot_over_gamma(&self, t: f64) -> f64 {
        let s = t / self.tau;
        35.0 * PI * s * (1.0 - s) / (8.0 * self.lambda * self.tau)
    }

    /// `beta_dot * cot(gamma)`, finite everywhere; zero at both ends.
    pub(crate) fn beta_dot_cot_gamma(&self, t: f64) -> f64 {
        let p = self.point(t);
        self.beta_dot_over_gamma(t) * gamma_over_sin(p.gamma) * p.gamma.cos()
    }

    /// `beta_dot / sin(gamma)`, the rate of the `+` phase.
    pub fn phase_rate(&self, t: f64) -> f64 {
        let p = self.point(t);
        self.beta_dot_over_gamma(t) * gamma_over_sin(p.gamma)
    }
}

/// `x / sin(x)` with the removable singularity at zero filled in.
fn gamma_over_sin(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x / x.sin()
    }
}

/// A source of the two effective couplings `(g'_A(t), g'_B(t))` in rad/ns.
pub trait Couplings: Sync {
    fn duration(&self) -> f64;
    fn couplings(&self, t: f64) -> (f64, f64);
}

impl Couplings for AuxiliaryTrajectory {
    fn duration(&self) -> f64 {
        self.tau
    }

    /// Closed form of the invariant-preserving pulses:
    ///
    /// ```text
    /// g'_A = 2 [beta_dot cot(gamma) sin(beta) + gamma_dot cos(beta)]
    /// g'_B = 2 [beta_dot cot(gamma) cos(beta) - gamma_dot sin(beta)]
    /// ```
    fn couplings(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.tau);
        let p = self.point(t);
        let bcot = self.beta_dot_cot_gamma(t);
        let (sb, cb) = p.beta.sin_cos();
        (
            2.0 * (bcot * sb + p.gamma_dot * cb),
            2.0 * (bcot * cb - p.gamma_dot * sb),
        )
    }
}

/// Effective couplings sampled on a uniform grid over `[0, tau]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    pub times: Vec<f64>,
    pub g_a: Vec<f64>,
    pub g_b: Vec<f64>,
}

impl PulsePair {
    pub fn from_samples(times: Vec<f64>, g_a: Vec<f64>, g_b: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || g_a.len() != times.len() || g_b.len() != times.len() {
            return Err(Error::InvalidParameter(
                "pulse table needs >= 2 samples and matching column lengths".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter("pulse table must start at t = 0".into()));
        }
        let dt = times[1] - times[0];
        let uniform = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
        if !(dt > 0.0 && uniform) {
            return Err(Error::InvalidParameter("pulse table grid is not uniform".into()));
        }
        if g_a.iter().chain(&g_b).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("reading a pulse table".into()));
        }
        Ok(Self { times, g_a, g_b })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn tau(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn step(&self) -> f64 {
        self.tau() / (self.len() - 1) as f64
    }

    /// Interpolated couplings, erroring outside the table span.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let tau = self.tau();
        if !(0.0..=tau).contains(&t) {
            return Err(Error::TimeOutOfRange { t, tau });
        }
        Ok(self.couplings(t))
    }

    pub fn peak(&self) -> (f64, f64) {
        let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        (max_abs(&self.g_a), max_abs(&self.g_b))
    }

    /// Header `t_ns,gprime_a_rad_per_ns,gprime_b_rad_per_ns`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_ns,gprime_a_rad_per_ns,gprime_b_rad_per_ns")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                crate::export::fmt_f64(self.times[k]),
                crate::export::fmt_f64(self.g_a[k]),
                crate::export::fmt_f64(self.g_b[k])
            )?;
        }
        Ok(())
    }
}

impl Couplings for PulsePair {
    fn duration(&self) -> f64 {
        self.tau()
    }

    fn couplings(&self, t: f64) -> (f64, f64) {
        let dt = self.step();
        (
            interp_uniform(0.0, dt, &self.g_a, t),
            interp_uniform(0.0, dt, &self.g_b, t),
        )
    }
}

/// Samples the closed-form pulses on `n_samples` uniform points.
pub fn synthesize_pulses(traj: &AuxiliaryTrajectory, n_samples: usize) -> Result<PulsePair> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 pulse samples, got {n_samples}"
        )));
    }
    let tau = traj.tau();
    let last = n_samples - 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut g_a = Vec::with_capacity(n_samples);
    let mut g_b = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let t = if k == last { tau } else { tau * k as f64 / last as f64 };
        if k != 0 && k != last && !(traj.point(t).gamma > 0.0) {
            return Err(Error::InvalidTrajectory(format!("gamma({t}) is not positive")));
        }
        let (a, b) = traj.couplings(t);
        times.push(t);
        g_a.push(a);
        g_b.push(b);
    }
    PulsePair::from_samples(times, g_a, g_b)
}

/// Scale constant of the invariant, rad/ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSpec {
    mu: f64,
}

impl InvariantSpec {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu > 0.0 {
            Ok(Self { mu })
        } else {
            Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")))
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Default for InvariantSpec {
    fn default() -> Self {
        Self { mu: 1.0 }
    }
}

fn invariant_matrix(p: &AuxiliaryPoint, mu: f64) -> CMatrix {
    let (sg, cg) = p.gamma.sin_cos();
    let (sb, cb) = p.beta.sin_cos();
    let h = 0.5 * mu;
    let am = C64::new(h * cg * sb, 0.0);
    let mb = C64::new(h * cg * cb, 0.0);
    let ab = C64::new(0.0, -h * sg);
    CMatrix::from_row_slice(3, 3, &[ZERO, am, ab, am, ZERO, mb, ab.conj(), mb, ZERO])
}

fn invariant_derivative_matrix(p: &AuxiliaryPoint, mu: f64) -> CMatrix {
    let (sg, cg) = p.gamma.sin_cos();
    let (sb, cb) = p.beta.sin_cos();
    let h = 0.5 * mu;
    let am = C64::new(h * (-sg * sb * p.gamma_dot + cg * cb * p.beta_dot), 0.0);
    let mb = C64::new(h * (-sg * cb * p.gamma_dot - cg * sb * p.beta_dot), 0.0);
    let ab = C64::new(0.0, -h * cg * p.gamma_dot);
    CMatrix::from_row_slice(3, 3, &[ZERO, am, ab, am, ZERO, mb, ab.conj(), mb, ZERO])
}

/// Dynamical invariant `I(t)` in the `{A, M, B}` basis.
pub fn invariant_at(traj: &AuxiliaryTrajectory, spec: &InvariantSpec, t: f64) -> Result<Operator> {
    let p = traj.eval(t)?;
    Operator::new(Basis::three_level(), invariant_matrix(&p, spec.mu))
}

/// Closed-form `dI/dt`.
pub fn invariant_derivative(
    traj: &AuxiliaryTrajectory,
    spec: &InvariantSpec,
    t: f64,
) -> Result<Operator> {
    let p = traj.eval(t)?;
    Operator::new(Basis::three_level(), invariant_derivative_matrix(&p, spec.mu))
}

/// Eigenstates of the invariant for eigenvalues `0`, `+mu/2`, `-mu/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantEigenstates {
    pub zero: PureState,
    pub plus: PureState,
    pub minus: PureState,
}

fn eigenvectors(p: &AuxiliaryPoint) -> [Vector3<C64>; 3] {
    let (sg, cg) = p.gamma.sin_cos();
    let (sb, cb) = p.beta.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Vector3::new(C64::new(cg * cb, 0.0), C64::new(0.0, -sg), C64::new(-cg * sb, 0.0));
    let pm = |sign: f64| {
        Vector3::new(
            C64::new(r * sg * cb, sign * r * sb),
            C64::new(0.0, r * cg),
            C64::new(-r * sg * sb, sign * r * cb),
        )
    };
    [zero, pm(1.0), pm(-1.0)]
}

fn eigenvector_derivatives(p: &AuxiliaryPoint) -> [Vector3<C64>; 3] {
    let (sg, cg) = p.gamma.sin_cos();
    let (sb, cb) = p.beta.sin_cos();
    let (gd, bd) = (p.gamma_dot, p.beta_dot);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Vector3::new(
        C64::new(-sg * cb * gd - cg * sb * bd, 0.0),
        C64::new(0.0, -cg * gd),
        C64::new(sg * sb * gd - cg * cb * bd, 0.0),
    );
    let pm = |sign: f64| {
        Vector3::new(
            C64::new(r * (cg * cb * gd - sg * sb * bd), sign * r * cb * bd),
            C64::new(0.0, -r * sg * gd),
            C64::new(r * (-cg * sb * gd - sg * cb * bd), -sign * r * sb * bd),
        )
    };
    [zero, pm(1.0), pm(-1.0)]
}

pub fn invariant_eigenstates(traj: &AuxiliaryTrajectory, t: f64) -> Result<InvariantEigenstates> {
    let p = traj.eval(t)?;
    let basis = Basis::three_level();
    let to_state = |v: &Vector3<C64>| PureState::new(basis.clone(), CVector::from_column_slice(v.as_slice()));
    let [z, pl, mi] = eigenvectors(&p);
    Ok(InvariantEigenstates {
        zero: to_state(&z)?,
        plus: to_state(&pl)?,
        minus: to_state(&mi)?,
    })
}

/// Ideal three-level Hamiltonian `g1 |A><M| + g2 |B><M| + h.c.` with
/// `g_{1,2} = g'_{A,B} / 2`.
pub(crate) fn three_level_hamiltonian(g_a: f64, g_b: f64) -> Matrix3c {
    let a = C64::new(0.5 * g_a, 0.0);
    let b = C64::new(0.5 * g_b, 0.0);
    Matrix3c::new(ZERO, a, ZERO, a, ZERO, b, ZERO, b, ZERO)
}

pub(crate) type Matrix3c = nalgebra::Matrix3<C64>;

/// Phases `theta_n(tau)` in the convention
/// `U(tau) = sum_n exp(-i theta_n) |mu_n(tau)><mu_n(0)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrPhase {
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub theta_zero: f64,
}

impl LrPhase {
    /// `theta_plus` reduced into `[0, 2 pi)`.
    pub fn reduced_plus(&self) -> f64 {
        self.theta_plus.rem_euclid(TAU)
    }
}

/// Integrand `<mu_n|(i d/dt - H)|mu_n>` for `n = 0, +, -`.
fn phase_integrands<C: Couplings + ?Sized>(
    traj: &AuxiliaryTrajectory,
    couplings: &C,
    t: f64,
) -> [C64; 3] {
    let p = traj.point(t);
    let (ga, gb) = couplings.couplings(t);
    let h = three_level_hamiltonian(ga, gb);
    let vs = eigenvectors(&p);
    let ds = eigenvector_derivatives(&p);
    std::array::from_fn(|n| {
        let v = &vs[n];
        I * v.dotc(&ds[n]) - v.dotc(&(h * v))
    })
}

/// LR phases by quadrature of `theta_n = -int_0^tau <mu_n|(i d/dt - H)|mu_n> dt`.
///
/// The sign makes `theta_n` the phase appearing as `exp(-i theta_n)` in the
/// evolution operator; with the polynomial trajectory `theta_plus` comes out
/// positive and equal to `int beta_dot / sin(gamma) dt`.
pub fn lr_phase<C: Couplings + ?Sized>(traj: &AuxiliaryTrajectory, couplings: &C) -> Result<LrPhase> {
    check_same_span(traj, couplings)?;
    traj.require_regular()?;
    let [zero, plus, minus] = adaptive_simpson(
        |t| {
            let z = phase_integrands(traj, couplings, t);
            [z[0].re, z[1].re, z[2].re]
        },
        0.0,
        traj.tau(),
        PHASE_TOL,
    )?;
    Ok(LrPhase {
        theta_plus: -plus,
        theta_minus: -minus,
        theta_zero: -zero,
    })
}

/// `theta_plus` from the reduced form `int_0^tau beta_dot / sin(gamma) dt`.
pub fn theta_plus_closed_form(traj: &AuxiliaryTrajectory) -> Result<f64> {
    traj.require_regular()?;
    integrate(|t| traj.phase_rate(t), 0.0, traj.tau(), PHASE_TOL)
}

fn check_same_span<C: Couplings + ?Sized>(traj: &AuxiliaryTrajectory, couplings: &C) -> Result<()> {
    let d = couplings.duration();
    if (d - traj.tau()).abs() > 1e-9 * traj.tau() {
        return Err(Error::InvalidParameter(format!(
            "pulses span {d} ns but the trajectory spans {} ns",
            traj.tau()
        )));
    }
    Ok(())
}

fn theta_plus_of(lambda: f64, tau: f64) -> Result<f64> {
    let traj = AuxiliaryTrajectory::new(lambda, tau)?;
    Ok(lr_phase(&traj, &traj)?.theta_plus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub theta_plus: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds `lambda` in `bracket` with `theta_plus(lambda) = target_phase`.
///
/// The bracket is pre-scanned on [`PRESCAN_POINTS`] points; it must be
/// strictly monotonic there and contain exactly one crossing. Bisection then
/// runs to [`LAMBDA_PHASE_TOL`].
pub fn solve_lambda(target_phase: f64, tau: f64, bracket: (f64, f64)) -> Result<LambdaSolution> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi < PI) {
        return Err(Error::InvalidParameter(format!(
            "lambda bracket ({lo}, {hi}) must satisfy 0 < lo < hi < pi"
        )));
    }
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (PRESCAN_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&l| theta_plus_of(l, tau))
        .collect::<Result<_>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::RootFinding(format!(
            "theta_plus is not monotonic on ({lo}, {hi})"
        )));
    }
    let f: Vec<f64> = values.iter().map(|v| v - target_phase).collect();
    let Some(k) = (0..f.len() - 1).find(|&k| f[k] == 0.0 || f[k].signum() != f[k + 1].signum())
    else {
        return Err(Error::RootFinding(format!(
            "target {target_phase} rad not attained on ({lo}, {hi}); theta_plus spans [{}, {}]",
            values.iter().cloned().fold(f64::INFINITY, f64::min),
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        )));
    };
    let (mut a, mut fa) = (grid[k], f[k]);
    let mut b = grid[k + 1];
    let mut best = (a, fa);
    let mut iterations = 0;
    while iterations < 200 {
        if best.1.abs() < 0.1 * LAMBDA_PHASE_TOL || (b - a) < 1e-14 {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = theta_plus_of(m, tau)? - target_phase;
        iterations += 1;
        if fm.abs() < best.1.abs() {
            best = (m, fm);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    if best.1.abs() > LAMBDA_PHASE_TOL {
        return Err(Error::RootFinding(format!(
            "bisection stalled with residual {:e} rad",
            best.1
        )));
    }
    Ok(LambdaSolution {
        lambda: best.0,
        theta_plus: best.1 + target_phase,
        residual: best.1,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub theta_plus: f64,
    pub theta_plus_reduced: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub tau_ns: f64,
    pub points: Vec<SweepPoint>,
    pub monotonic_decreasing: bool,
    pub monotonic_increasing: bool,
}

impl LambdaSweep {
    /// Linear interpolation of the raw phase at `lambda`.
    pub fn theta_at(&self, lambda: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (p, q) = (w[0], w[1]);
            (p.lambda <= lambda && lambda <= q.lambda).then(|| {
                let f = (lambda - p.lambda) / (q.lambda - p.lambda);
                p.theta_plus + f * (q.theta_plus - p.theta_plus)
            })
        })
    }
}

/// `theta_plus(lambda)` on `n` uniformly spaced values in `[lo, hi]`.
///
/// Points are evaluated on the current rayon pool and returned in index order.
pub fn sweep_lambda(tau: f64, lo: f64, hi: f64, n: usize) -> Result<LambdaSweep> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "sweep needs 0 < lo < hi and n >= 2 (got {lo}, {hi}, {n})"
        )));
    }
    let points = (0..n)
        .into_par_iter()
        .map(|k| {
            let lambda = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let theta = theta_plus_of(lambda, tau).map_err(|e| {
                Error::InvalidTrajectory(format!("sweep failed at lambda = {lambda}: {e}"))
            })?;
            Ok(SweepPoint {
                lambda,
                theta_plus: theta,
                theta_plus_reduced: theta.rem_euclid(TAU),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotonic_decreasing = points.windows(2).all(|w| w[1].theta_plus < w[0].theta_plus);
    let monotonic_increasing = points.windows(2).all(|w| w[1].theta_plus > w[0].theta_plus);
    Ok(LambdaSweep {
        tau_ns: tau,
        points,
        monotonic_decreasing,
        monotonic_increasing,
    })
}

/// Final evolution operator in the `{A, M, B}` basis:
///
/// ```text
/// [ 0  -i sin(th)   cos(th)  ]
/// [ 0   cos(th)    -i sin(th)]
/// [-1   0           0        ]
/// ```
pub fn target_unitary(theta_plus: f64) -> Operator {
    let (s, c) = theta_plus.sin_cos();
    let m = CMatrix::from_row_slice(
        3,
        3,
        &[
            ZERO,
            C64::new(0.0, -s),
            C64::new(c, 0.0),
            ZERO,
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            -ONE,
            ZERO,
            ZERO,
        ],
    );
    Operator::new(Basis::three_level(), m).expect("finite entries")
}

/// `sum_n exp(-i theta_n) |mu_n(tau)><mu_n(0)|`.
pub fn lr_predicted_evolution<C: Couplings + ?Sized>(
    traj: &AuxiliaryTrajectory,
    couplings: &C,
) -> Result<Operator> {
    let phase = lr_phase(traj, couplings)?;
    let start = eigenvectors(&traj.point(0.0));
    let end = eigenvectors(&traj.point(traj.tau()));
    let thetas = [phase.theta_zero, phase.theta_plus, phase.theta_minus];
    let mut u = Matrix3c::zeros();
    for n in 0..3 {
        u += (end[n] * start[n].adjoint()) * C64::from_polar(1.0, -thetas[n]);
    }
    Operator::new(Basis::three_level(), CMatrix::from_column_slice(3, 3, u.as_slice()))
}

/// Invariant-condition diagnostics for a set of pulses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDiagnostics {
    /// `|[H(0), I(0)]|_F`
    pub commutator_start: f64,
    /// `|[H(tau), I(tau)]|_F`
    pub commutator_end: f64,
    /// `max_t |dI/dt + i[H, I]|_F` over the grid
    pub max_residual: f64,
    pub worst_time: f64,
    pub grid_points: usize,
}

pub fn check_boundary<C: Couplings + ?Sized>(
    traj: &AuxiliaryTrajectory,
    couplings: &C,
    spec: &InvariantSpec,
    grid_points: usize,
) -> Result<BoundaryDiagnostics> {
    check_same_span(traj, couplings)?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter("need at least 2 grid points".into()));
    }
    let tau = traj.tau();
    let hamiltonian = |t: f64| {
        let (a, b) = couplings.couplings(t);
        let h = three_level_hamiltonian(a, b);
        CMatrix::from_column_slice(3, 3, h.as_slice())
    };
    let comm_norm = |t: f64| {
        let p = traj.point(t);
        commutator(&hamiltonian(t), &invariant_matrix(&p, spec.mu)).norm()
    };
    let mut max_residual = 0.0_f64;
    let mut worst_time = 0.0;
    for k in 0..grid_points {
        let t = tau * k as f64 / (grid_points - 1) as f64;
        let p = traj.point(t);
        let inv = invariant_matrix(&p, spec.mu);
        let residual = (invariant_derivative_matrix(&p, spec.mu) + commutator(&hamiltonian(t), &inv) * I).norm();
        if residual > max_residual {
            max_residual = residual;
            worst_time = t;
        }
    }
    Ok(BoundaryDiagnostics {
        commutator_start: comm_norm(0.0),
        commutator_end: comm_norm(tau),
        max_residual,
        worst_time,
        grid_points,
    })
}

/// Rough classification of a designed phase.
pub fn classify_phase(theta_plus: f64) -> &'static str {
    let reduced = theta_plus.rem_euclid(TAU);
    let near = |x: f64| (reduced - x).abs() < 1e-3;
    if near(3.0 * FRAC_PI_2) || near(FRAC_PI_2) {
        "circulator"
    } else if near(PI) || near(0.0) || near(TAU) {
        "reciprocal"
    } else {
        "partial"
    }
}

/// `<mu_0|(i d/dt - H)|mu_0>` magnitude at `t`; vanishes identically.
pub fn zero_mode_integrand<C: Couplings + ?Sized>(
    traj: &AuxiliaryTrajectory,
    couplings: &C,
    t: f64,
) -> f64 {
    phase_integrands(traj, couplings, t)[0].norm()
}

/// Expectation `<psi|I(t)|psi>`; used to check eigenvalues.
pub fn invariant_expectation(
    traj: &AuxiliaryTrajectory,
    spec: &InvariantSpec,
    t: f64,
    psi: &PureState,
) -> Result<f64> {
    let inv = invariant_at(traj, spec, t)?;
    Ok(expectation(inv.matrix(), psi.amplitudes()).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{hermitian_eigenvalues, unitarity_deviation};

    const TAU_NS: f64 = 145.0;
    const REFERENCE_LAMBDA: f64 = 0.4974;

    fn traj() -> AuxiliaryTrajectory {
        AuxiliaryTrajectory::new(REFERENCE_LAMBDA, TAU_NS).unwrap()
    }

    fn sample_times(n: usize) -> Vec<f64> {
        // deterministic scatter over [0, tau]
        (0..n)
            .map(|k| TAU_NS * ((k as f64 * 0.618_033_988_749_895).fract()))
            .collect()
    }

    #[test]
    fn midpoint_values() {
        let p = traj().eval(TAU_NS / 2.0).unwrap();
        assert!((p.gamma - REFERENCE_LAMBDA).abs() < 1e-15);
        assert!((p.beta - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_values() {
        let tr = traj();
        let a = tr.eval(0.0).unwrap();
        let b = tr.eval(TAU_NS).unwrap();
        assert!(a.gamma.abs() < 1e-12 && b.gamma.abs() < 1e-12);
        assert!(a.beta.abs() < 1e-12);
        assert!((b.beta - FRAC_PI_2).abs() < 1e-12);
        assert!(tr.eval(-1e-9).is_err());
        assert!(tr.eval(TAU_NS + 1e-6).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let tr = traj();
        let h = 1e-5;
        for &t in &[3.0, 40.0, 72.5, 101.0, 140.0] {
            let p = tr.point(t);
            let fd_g = (tr.point(t + h).gamma - tr.point(t - h).gamma) / (2.0 * h);
            let fd_b = (tr.point(t + h).beta - tr.point(t - h).beta) / (2.0 * h);
            assert!((p.gamma_dot - fd_g).abs() < 1e-9, "gamma_dot at {t}");
            assert!((p.beta_dot - fd_b).abs() < 1e-9, "beta_dot at {t}");
        }
    }

    #[test]
    fn trajectory_validation() {
        assert!(AuxiliaryTrajectory::new(0.0, 145.0).is_err());
        let wide = AuxiliaryTrajectory::new(3.2, 145.0).unwrap();
        assert!(!wide.is_regular());
        assert!(matches!(lr_phase(&wide, &wide), Err(Error::InvalidTrajectory(_))));
        assert!(theta_plus_closed_form(&wide).is_err());
        assert!(AuxiliaryTrajectory::new(0.5, -1.0).is_err());
    }

    #[test]
    fn pulses_vanish_at_endpoints() {
        for lambda in [0.2, REFERENCE_LAMBDA, 1.3] {
            let tr = AuxiliaryTrajectory::new(lambda, TAU_NS).unwrap();
            let p = synthesize_pulses(&tr, DEFAULT_SAMPLES).unwrap();
            let n = p.len() - 1;
            for k in [0, n] {
                assert!(p.g_a[k].abs() < 1e-9 && p.g_b[k].abs() < 1e-9);
            }
            assert!(p.g_a.iter().chain(&p.g_b).all(|x| x.is_finite()));
        }
    }

    #[test]
    fn pulse_limit_is_continuous() {
        // the rearranged closed form matches the literal expression away from the ends
        let tr = traj();
        for &t in &[0.5, 7.0, 80.0, 144.0] {
            let p = tr.point(t);
            let bcot = p.beta_dot / p.gamma.tan();
            let (sb, cb) = p.beta.sin_cos();
            let literal = (
                2.0 * (bcot * sb + p.gamma_dot * cb),
                2.0 * (bcot * cb - p.gamma_dot * sb),
            );
            let (a, b) = tr.couplings(t);
            assert!((a - literal.0).abs() < 1e-14 && (b - literal.1).abs() < 1e-14);
        }
    }

    #[test]
    fn stokes_pulse_comes_first() {
        let p = synthesize_pulses(&traj(), 10_001).unwrap();
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        let ta = p.times[argmax(&p.g_a)];
        let tb = p.times[argmax(&p.g_b)];
        assert!(tb < ta, "g'_B peak {tb} should precede g'_A peak {ta}");
    }

    #[test]
    fn too_few_samples() {
        assert!(synthesize_pulses(&traj(), 1).is_err());
    }

    #[test]
    fn invariant_endpoints() {
        let tr = traj();
        let spec = InvariantSpec::new(2.0).unwrap();
        let i0 = invariant_at(&tr, &spec, 0.0).unwrap();
        let expected0 = {
            let b = Basis::three_level();
            let mut m = CMatrix::zeros(3, 3);
            m[(1, 2)] = ONE;
            m[(2, 1)] = ONE;
            Operator::new(b, m).unwrap()
        };
        assert!((i0.matrix() - expected0.matrix()).norm() < 1e-15);

        let it = invariant_at(&tr, &spec, TAU_NS).unwrap();
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 1)] = ONE;
        m[(1, 0)] = ONE;
        assert!((it.matrix() - m).norm() < 1e-15);
    }

    #[test]
    fn invariant_spectrum_is_time_independent() {
        let tr = traj();
        let spec = InvariantSpec::default();
        for t in sample_times(100) {
            let ev = hermitian_eigenvalues(invariant_at(&tr, &spec, t).unwrap().matrix());
            let expected = [-0.5, 0.0, 0.5];
            for (a, b) in ev.iter().zip(expected) {
                assert!((a - b).abs() < 1e-10, "t = {t}: {ev:?}");
            }
        }
    }

    #[test]
    fn eigenstates_at_start() {
        let e = invariant_eigenstates(&traj(), 0.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let close = |s: &PureState, v: [C64; 3]| {
            (0..3).all(|k| (s.amplitude(k) - v[k]).norm() < 1e-15)
        };
        assert!(close(&e.zero, [ONE, ZERO, ZERO]));
        assert!(close(&e.plus, [ZERO, C64::new(0.0, r), C64::new(0.0, r)]));
        assert!(close(&e.minus, [ZERO, C64::new(0.0, r), C64::new(0.0, -r)]));
    }

    #[test]
    fn zero_mode_ends_on_minus_b() {
        let e = invariant_eigenstates(&traj(), TAU_NS).unwrap();
        assert!((e.zero.amplitude(2) + ONE).norm() < 1e-15);
        assert!(e.zero.amplitude(0).norm() < 1e-15 && e.zero.amplitude(1).norm() < 1e-15);
    }

    #[test]
    fn eigen_residuals_and_orthonormality() {
        let tr = traj();
        let spec = InvariantSpec::new(0.7).unwrap();
        for t in sample_times(100) {
            let inv = invariant_at(&tr, &spec, t).unwrap();
            let e = invariant_eigenstates(&tr, t).unwrap();
            let states = [&e.zero, &e.plus, &e.minus];
            for (s, lam) in states.iter().zip([0.0, 0.35, -0.35]) {
                let r = inv.matrix() * s.amplitudes() - s.amplitudes() * C64::new(lam, 0.0);
                assert!(r.norm() < 1e-10);
            }
            for a in 0..3 {
                for b in 0..3 {
                    let ip = states[a].inner(states[b]);
                    let want = if a == b { ONE } else { ZERO };
                    assert!((ip - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigenvector_derivatives_match_finite_differences() {
        let tr = traj();
        let h = 1e-5;
        for &t in &[10.0, 60.0, 130.0] {
            let d = eigenvector_derivatives(&tr.point(t));
            let up = eigenvectors(&tr.point(t + h));
            let down = eigenvectors(&tr.point(t - h));
            for n in 0..3 {
                let fd = (up[n] - down[n]) / C64::new(2.0 * h, 0.0);
                assert!((fd - d[n]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn target_unitary_special_values() {
        let u = target_unitary(3.0 * FRAC_PI_2);
        let mut want = CMatrix::zeros(3, 3);
        want[(0, 1)] = I;
        want[(1, 2)] = I;
        want[(2, 0)] = -ONE;
        assert!((u.matrix() - &want).norm() < 1e-15);

        let u = target_unitary(PI);
        let mut want = CMatrix::zeros(3, 3);
        want[(1, 1)] = -ONE;
        want[(0, 2)] = -ONE;
        want[(2, 0)] = -ONE;
        assert!((u.matrix() - &want).norm() < 1e-15);
    }

    #[test]
    fn zero_mode_term_is_minus_b_a() {
        let tr = traj();
        let start = eigenvectors(&tr.point(0.0));
        let end = eigenvectors(&tr.point(TAU_NS));
        let term = end[0] * start[0].adjoint();
        let mut want = Matrix3c::zeros();
        want[(2, 0)] = -ONE;
        assert!((term - want).norm() < 1e-15);
    }

    #[test]
    fn classify() {
        assert_eq!(classify_phase(3.0 * FRAC_PI_2), "circulator");
        assert_eq!(classify_phase(PI), "reciprocal");
        assert_eq!(classify_phase(2.0), "partial");
    }

    #[test]
    fn lambda_bracket_errors() {
        assert!(matches!(
            solve_lambda(1.5 * PI, TAU_NS, (0.6, 1.0)),
            Err(Error::RootFinding(_))
        ));
        assert!(solve_lambda(1.5 * PI, TAU_NS, (0.0, 1.0)).is_err());
    }

    #[test]
    fn circulator_unitary_is_unitary_everywhere() {
        for k in 0..64 {
            let th = -7.0 + 14.0 * k as f64 / 63.0;
            assert!(unitarity_deviation(target_unitary(th).matrix()) < 1e-12);
        }
    }
}
