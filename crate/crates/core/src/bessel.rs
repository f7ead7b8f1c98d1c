//! First-order Bessel function and its inverse on the principal branch.
//!
//! A frequency-modulated qubit drive with envelope `eta` bridges a detuning
//! equal to the modulation frequency with strength `J1(eta)`. Turning a
//! designed effective coupling back into an envelope therefore means
//! inverting `J1` on `[0, J1_ARGMAX]`, where it is monotone.

use crate::error::{Error, Result};

/// First maximum of `J1` (first zero of `J1'`).
pub const J1_ARGMAX: f64 = 1.841_183_781_340_659_3;
/// `J1(J1_ARGMAX)`.
pub const J1_MAX: f64 = 0.581_865_224_281_596_4;

/// Relative overshoot above [`J1_MAX`] that is clamped to the maximum
/// instead of rejected.
pub const DEFAULT_SATURATION_TOL: f64 = 1e-3;

pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// `J1'(x) = J0(x) - J1(x) / x`.
pub fn bessel_j1_prime(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        0.5 - 3.0 * x * x / 16.0
    } else {
        libm::j0(x) - libm::j1(x) / x
    }
}

/// Outcome of inverting one value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inversion {
    Exact(f64),
    /// Target exceeded the maximum within tolerance; `eta = J1_ARGMAX`.
    Saturated { excess: f64 },
}

impl Inversion {
    pub fn eta(self) -> f64 {
        match self {
            Inversion::Exact(eta) => eta,
            Inversion::Saturated { .. } => J1_ARGMAX,
        }
    }
}

/// Solves `J1(eta) = y` with `eta` in `[0, J1_ARGMAX]`.
///
/// `y` above `J1_MAX` by at most `saturation_tol` (relative) saturates;
/// anything larger, or negative beyond rounding, is an error.
pub fn invert_j1(y: f64, saturation_tol: f64) -> Result<Inversion> {
    if !y.is_finite() {
        return Err(Error::NonFinite("inverting J1".into()));
    }
    if y <= 0.0 {
        if y < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "negative coupling {y} has no envelope on the principal branch"
            )));
        }
        return Ok(Inversion::Exact(0.0));
    }
    if y >= J1_MAX {
        let excess = y / J1_MAX - 1.0;
        if excess <= saturation_tol {
            return Ok(Inversion::Saturated { excess });
        }
        return Err(Error::InvalidParameter(format!(
            "J1 target {y} exceeds the maximum {J1_MAX}"
        )));
    }
    // Newton from the small-argument guess, safeguarded by the bracket.
    let (mut lo, mut hi) = (0.0, J1_ARGMAX);
    let mut x = (2.0 * y).min(0.5 * J1_ARGMAX);
    for _ in 0..100 {
        let f = bessel_j1(x) - y;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = bessel_j1_prime(x);
        let newton = x - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-16 * x.max(1.0) || hi - lo < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    Ok(Inversion::Exact(x))
}
