//! Adaptive Simpson quadrature for complex-valued integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;

/// Integrate `f` over `[a, b]` to the requested relative tolerance.
///
/// The tolerance is interpreted relative to the magnitude of the integral
/// itself, estimated from a coarse pass; an absolute floor keeps the target
/// meaningful near zero crossings of the result.
pub fn integrate_complex<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if !(b > a) {
        return Err(Error::domain(format!(
            "integration interval [{a}, {b}] is empty"
        )));
    }
    // Coarse composite pass to set the absolute error scale. 64 panels also
    // seed the recursion so oscillatory integrands cannot fool the first
    // Simpson estimate on the full interval.
    let n0 = 64usize;
    let h = (b - a) / n0 as f64;
    let mut scale = 0.0f64;
    for i in 0..n0 {
        let z = a + (i as f64 + 0.5) * h;
        scale += f(z).norm() * h;
    }
    let abs_tol = rel_tol * scale.max(1e-300);

    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..n0 {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fa = f(x0);
        let fm = f(0.5 * (x0 + x1));
        let fb = f(x1);
        let whole = simpson(fa, fm, fb, h);
        total += adapt(&f, x0, x1, fa, fm, fb, whole, abs_tol / n0 as f64, 0)?;
    }
    Ok(total)
}

fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
    (fa + 4.0 * fm + fb) * (h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let refined = left + right;
    let err = (refined - whole).norm();
    if err <= 15.0 * tol || (b - a) < 1e-15 {
        return Ok(refined + (refined - whole) / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Numerics(format!(
            "quadrature did not converge on [{a:.6e}, {b:.6e}]: residual {err:.3e} > {:.3e} at depth {depth}",
            15.0 * tol
        )));
    }
    let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
    let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        let j = integrate_complex(|x| Complex64::new(x * x, 0.0), 0.0, 3.0, 1e-10).unwrap();
        assert!((j.re - 9.0).abs() < 1e-9);
        assert!(j.im.abs() < 1e-12);
    }

    #[test]
    fn integrates_oscillatory_phase() {
        // integral of exp(i k x) over [-1, 1] = 2 sin(k)/k
        let k = 40.0;
        let j = integrate_complex(|x| Complex64::new(0.0, k * x).exp(), -1.0, 1.0, 1e-8).unwrap();
        let exact = 2.0 * (k).sin() / k;
        assert!((j.re - exact).abs() < 1e-7 * exact.abs().max(1.0));
        assert!(j.im.abs() < 1e-9);
    }

    #[test]
    fn integrates_lorentzian_window() {
        // integral of 1/(1+x^2) over [-t, t] = 2 atan(t)
        let t = 5.0;
        let j = integrate_complex(|x| Complex64::new(1.0 / (1.0 + x * x), 0.0), -t, t, 1e-9)
            .unwrap();
        assert!((j.re - 2.0 * t.atan()).abs() < 1e-8);
        let _ = PI;
    }

    #[test]
    fn empty_interval_rejected() {
        assert!(integrate_complex(|_| Complex64::new(1.0, 0.0), 1.0, 1.0, 1e-6).is_err());
    }
}
