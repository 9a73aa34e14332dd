//! Small numeric utilities: adaptive Simpson quadrature and the real
//! dilogarithm. Both are used by the kernel validation oracles, which need
//! integrals of log-singular densities to high accuracy.

/// Adaptive Simpson with interval-halving error control.
///
/// `tol` is an absolute tolerance for the whole interval; it is split
/// proportionally between halves. Integrands must be finite on [a, b];
/// singular endpoints should be handled by substitution before calling.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    debug_assert!(
        fa.is_finite() && fm.is_finite() && fb.is_finite(),
        "integrand must be finite on [{a}, {b}]"
    );
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 20)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
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
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Halving the tolerance per level is the textbook split, but below the
    // rounding scale of the piece it can never be met; floor it there or
    // the recursion only stops at the depth limit.
    let floor = f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Real dilogarithm Li₂(x) = Σ_{k≥1} x^k/k² for x ∈ [-1, 1].
///
/// Uses the raw series on [-1/2, 1/2] and the classical reflection
/// identities elsewhere, so every call converges geometrically.
pub fn li2(x: f64) -> f64 {
    const PI2_6: f64 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
    assert!(
        (-1.0..=1.0).contains(&x),
        "li2 defined here only on [-1, 1], got {x}"
    );
    if x == 1.0 {
        return PI2_6;
    }
    if x == -1.0 {
        return -PI2_6 / 2.0;
    }
    if x < 0.0 {
        // Li₂(-y) = -Li₂(y/(1+y)) - ln²(1+y)/2 for y > 0.
        let y = -x;
        let l = (1.0 + y).ln();
        return -li2_series(y / (1.0 + y)) - 0.5 * l * l;
    }
    if x > 0.5 {
        // Li₂(x) + Li₂(1-x) = π²/6 - ln(x)ln(1-x).
        return PI2_6 - x.ln() * (1.0 - x).ln() - li2_series(1.0 - x);
    }
    li2_series(x)
}

/// Series evaluation; caller guarantees |x| ≤ 1/2 so ~50 terms suffice.
fn li2_series(x: f64) -> f64 {
    debug_assert!(x.abs() <= 0.5 + 1e-12);
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0f64;
    while term.abs() > 1e-18 * (1.0 + sum.abs()) {
        term *= x;
        k += 1.0;
        sum += term / (k * k);
        if k > 200.0 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_handles_smooth_integrands() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn li2_known_values() {
        let pi2 = PI * PI;
        assert!((li2(1.0) - pi2 / 6.0).abs() < 1e-15);
        assert!((li2(-1.0) + pi2 / 12.0).abs() < 1e-15);
        let half = pi2 / 12.0 - 0.5 * (2.0f64.ln()).powi(2);
        assert!((li2(0.5) - half).abs() < 1e-14);
        assert!(li2(0.0).abs() < 1e-18);
    }

    #[test]
    fn li2_matches_quadrature_of_its_integral_form() {
        // Li₂(x) = -∫₀^x ln(1-t)/t dt, checked at a few interior points.
        for &x in &[0.13, 0.5, 0.77, 0.95, -0.3, -0.9] {
            let q = adaptive_simpson(
                &|t: f64| {
                    if t.abs() < 1e-12 {
                        1.0
                    } else {
                        -(1.0 - t).ln() / t
                    }
                },
                0.0,
                x,
                1e-13,
            );
            assert!((li2(x) - q).abs() < 1e-10, "x = {x}");
        }
    }
}
