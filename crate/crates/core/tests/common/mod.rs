//! Independent oracles for the acceptance suite.
//!
//! Nothing here shares code with the library's numerics: quadrature is
//! recursive adaptive Simpson (the library integrates with Gauss-Kronrod
//! panels), the kernel constant is restated from the Gamma formula, and
//! special values are hand simplifications frozen below.

use std::f64::consts::PI;

/// `C_{1,s}` restated: `π^{-1/2} 4^s s Γ(1/2+s) / Γ(1-s)`.
pub fn kernel_constant_oracle(s: f64) -> f64 {
    use statrs::function::gamma::gamma;
    PI.powf(-0.5) * 4f64.powf(s) * s * gamma(0.5 + s) / gamma(1.0 - s)
}

fn simpson_slice<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn simpson_rec<F: Fn(f64) -> f64>(
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
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson_slice(f, a, fa, m, fm, flm);
    let right = simpson_slice(f, m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Recursive adaptive Simpson with the usual Richardson acceptance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_slice(f, a, fa, b, fb, fm);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `(-Δ)^s` of the bump `u = (1-x²)_+²` at the center, by adaptive
/// quadrature of the defining integral. The symmetric difference
/// `D(r) = 2u(0) - u(r) - u(-r)` equals `4r² - 2r⁴` exactly for `r <= 1`
/// (the bump is an even quartic) and the constant `2` beyond, so the
/// singular head and the tail integrate in closed form and Simpson covers
/// the middle.
pub fn bump_center_frac_quadrature(s: f64) -> f64 {
    let delta = 1e-3;
    let near = 4.0 * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
        - 2.0 * delta.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s);
    let f = |r: f64| (4.0 * r * r - 2.0 * r.powi(4)) * r.powf(-1.0 - 2.0 * s);
    let mid = adaptive_simpson(&f, delta, 1.0, 1e-13);
    let tail = 1.0 / s; // ∫_1^∞ 2 r^{-1-2s} dr
    kernel_constant_oracle(s) * (near + mid + tail)
}

/// The same value with every piece hand-integrated:
/// `C_{1,s} (4/(2-2s) - 2/(4-2s) + 1/s)`.
pub fn bump_center_frac_closed(s: f64) -> f64 {
    kernel_constant_oracle(s) * (4.0 / (2.0 - 2.0 * s) - 2.0 / (4.0 - 2.0 * s) + 1.0 / s)
}

#[allow(dead_code)]
pub fn bump(x: f64) -> f64 {
    let t = (1.0 - x * x).max(0.0);
    t * t
}
