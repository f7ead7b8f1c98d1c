//! Small numerical helpers: adaptive Simpson quadrature and uniform-grid
//! linear interpolation.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
const INITIAL_PANELS: usize = 16;

/// Adaptive Simpson quadrature of a vector-valued integrand on `[a, b]`.
///
/// All components share one subdivision, refined until every component
/// meets `tol`. Components that are exact negatives of each other therefore
/// integrate to exact negatives.
pub fn adaptive_simpson<const N: usize, F>(f: F, a: f64, b: f64, tol: f64) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    let eval = |t: f64| -> Result<[f64; N]> {
        let v = f(t);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("integrating at t = {t}")))
        }
    };
    let mut total = [0.0; N];
    let width = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    for p in 0..INITIAL_PANELS {
        let lo = a + width * p as f64;
        let hi = if p + 1 == INITIAL_PANELS { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (eval(lo)?, eval(mid)?, eval(hi)?);
        let whole = simpson(lo, hi, &flo, &fmid, &fhi);
        let part = recurse(&eval, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH)?;
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total)
}

/// Scalar convenience wrapper around [`adaptive_simpson`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_simpson(|t| [f(t)], a, b, tol).map(|[v]| v)
}

fn simpson<const N: usize>(a: f64, b: f64, fa: &[f64; N], fm: &[f64; N], fb: &[f64; N]) -> [f64; N] {
    let h = (b - a) / 6.0;
    std::array::from_fn(|k| h * (fa[k] + 4.0 * fm[k] + fb[k]))
}

#[allow(clippy::too_many_arguments)]
fn recurse<const N: usize, E>(
    eval: &E,
    a: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
    tol: f64,
    depth: u32,
) -> Result<[f64; N]>
where
    E: Fn(f64) -> Result<[f64; N]>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = simpson(a, m, &fa, &flm, &fm);
    let right = simpson(m, b, &fm, &frm, &fb);
    let err = (0..N)
        .map(|k| (left[k] + right[k] - whole[k]).abs())
        .fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        // Richardson correction
        return Ok(std::array::from_fn(|k| {
            left[k] + right[k] + (left[k] + right[k] - whole[k]) / 15.0
        }));
    }
    let l = recurse(eval, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(eval, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(std::array::from_fn(|k| l[k] + r[k]))
}

/// Linear interpolation on a uniform grid starting at `t0` with spacing
/// `dt`. Arguments outside the grid are clamped to the end samples.
pub fn interp_uniform(t0: f64, dt: f64, samples: &[f64], t: f64) -> f64 {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let x = ((t - t0) / dt).clamp(0.0, (n - 1) as f64);
    let k = (x.floor() as usize).min(n - 2);
    let frac = x - k as f64;
    samples[k] + frac * (samples[k + 1] - samples[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|t| 3.0 * t * t - 2.0 * t + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 6.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_oscillatory() {
        let v = integrate(|t| (5.0 * t).sin() * t, 0.0, std::f64::consts::PI, 1e-11).unwrap();
        // int_0^pi t sin(5t) dt = pi / 5
        assert!((v - std::f64::consts::PI / 5.0).abs() < 1e-10);
    }

    #[test]
    fn antisymmetric_components_cancel_exactly() {
        let [a, b] = adaptive_simpson(|t| [t.exp().sin(), -t.exp().sin()], 0.0, 3.0, 1e-10).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|t| 1.0 / (t - 0.5), 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn interpolation_clamps_and_is_linear() {
        let s = [0.0, 2.0, 4.0, 0.0];
        assert_eq!(interp_uniform(0.0, 1.0, &s, 0.5), 1.0);
        assert_eq!(interp_uniform(0.0, 1.0, &s, 2.5), 2.0);
        assert_eq!(interp_uniform(0.0, 1.0, &s, -1.0), 0.0);
        assert_eq!(interp_uniform(0.0, 1.0, &s, 3.0), 0.0);
        assert_eq!(interp_uniform(0.0, 1.0, &s, 9.0), 0.0);
    }
}
