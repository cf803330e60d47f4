//! Adaptive Simpson quadrature for smooth integrands on a finite interval.

/// `∫ₐᵇ f` to roughly `tol` absolute error.
///
/// Recursive bisection with the usual `|S₂ − S₁| ≤ 15 tol` acceptance test and
/// the Richardson correction `(S₂ − S₁)/15`. Recursion stops at `max_depth`,
/// so a non-smooth integrand degrades accuracy instead of hanging.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-14, 40) - 9.0).abs() < 1e-13);
        let got = adaptive_simpson(|x| (-2.0 * x).exp(), 0.0, 5.0, 1e-14, 50);
        assert!((got - (1.0 - (-10.0f64).exp()) / 2.0).abs() < 1e-13);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-12, 10), 0.0);
    }

    #[test]
    fn oscillatory() {
        let got = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-13, 50);
        assert!((got - 2.0).abs() < 1e-12);
    }
}
