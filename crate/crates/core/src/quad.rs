//! Quadrature utilities: exact power-kernel integrals, adaptive
//! Gauss-Kronrod on intervals, adaptive tensor quadrature on square cells,
//! and a radial principal-value integrator for the fractional Laplacian of
//! analytically-given functions.

/// Exact `∫_{z0}^{z1} z^p dz` for `0 < z0 <= z1`, continuous in `p` across
/// the removable singularity at `p = -1` (which the kernel exponents hit at
/// `s = 1/2`).
pub fn power_integral(z0: f64, z1: f64, p: f64) -> f64 {
    debug_assert!(z0 > 0.0 && z1 >= z0);
    let q = p + 1.0;
    let l = (z1 / z0).ln();
    if q == 0.0 {
        return l;
    }
    z0.powf(q) * ((q * l).exp_m1() / q)
}

// Nodes and weights of the 15-point Kronrod rule (QUADPACK tables).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One 15-point Kronrod panel on `[a, b]`.
fn k15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = f(center) * WGK[7];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        sum += WGK[j] * (f(center - dx) + f(center + dx));
    }
    sum * half
}

/// Adaptive quadrature of a function that is smooth in the interior of
/// `[a, b]` (endpoint singularities are the caller's job; the
/// fractional-kernel entry points below split them off analytically first).
///
/// A panel is accepted when its 15-point value agrees with the sum over its
/// two halves — a Richardson-style comparison that stays honest where the
/// internal Gauss-Kronrod difference can accidentally vanish. The error
/// demand per panel is proportional to its length, with an f64-floor
/// escape: a mass-concentrated panel can never meet a length-proportional
/// demand below roundoff. Work is bounded by a split budget; deterministic
/// for fixed inputs.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let coarse = k15(f, a, b);
    let tol = abs_tol.max(rel_tol * coarse.abs());
    let density = tol / (b - a);
    let mut stack = vec![(a, b, coarse, 0u32)];
    let mut acc = crate::sum::Accumulator::new();
    let mut splits: u32 = 200_000;
    while let Some((a, b, v, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = k15(f, a, m);
        let right = k15(f, m, b);
        let fine = left + right;
        let err = (v - fine).abs();
        if err <= density * (b - a) || err <= 5e-15 * fine.abs() || depth >= 44 || splits == 0 {
            acc.add(fine);
            continue;
        }
        splits -= 1;
        stack.push((a, m, left, depth + 1));
        stack.push((m, b, right, depth + 1));
    }
    acc.value()
}

const GL4_X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// 4x4 tensor Gauss-Legendre on the rectangle `[x0,x1] x [y0,y1]`.
fn gl4_cell<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut sum = 0.0;
    for (i, &xi) in GL4_X.iter().enumerate() {
        for sx in [-1.0, 1.0] {
            let x = cx + sx * hx * xi;
            for (j, &yj) in GL4_X.iter().enumerate() {
                for sy in [-1.0, 1.0] {
                    let y = cy + sy * hy * yj;
                    sum += GL4_W[i] * GL4_W[j] * f(x, y);
                }
            }
        }
    }
    sum * hx * hy
}

fn cell_rec<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    coarse: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (mx, my) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let quads = [
        gl4_cell(f, x0, mx, y0, my),
        gl4_cell(f, mx, x1, y0, my),
        gl4_cell(f, x0, mx, my, y1),
        gl4_cell(f, mx, x1, my, y1),
    ];
    let fine: f64 = quads.iter().sum();
    if (fine - coarse).abs() <= tol || depth == 0 {
        return fine;
    }
    let mut sum = 0.0;
    let bounds = [
        (x0, mx, y0, my),
        (mx, x1, y0, my),
        (x0, mx, my, y1),
        (mx, x1, my, y1),
    ];
    for (q, &(a, b, c, d)) in quads.iter().zip(&bounds) {
        sum += cell_rec(f, a, b, c, d, *q, 0.25 * tol, depth - 1);
    }
    sum
}

/// Adaptive tensor quadrature on a square cell (16-point base rule with
/// quadrant refinement). `abs_tol` is the absolute error budget.
pub fn adaptive_cell_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    abs_tol: f64,
) -> f64 {
    let coarse = gl4_cell(f, x0, x1, y0, y1);
    cell_rec(f, x0, x1, y0, y1, coarse, abs_tol, 14)
}

/// Radial principal-value integral
///
/// ```text
///     ∫_0^∞ g(r) r^{-1-2s} dr,       g(r) = O(r^2) near 0,
/// ```
///
/// for `g` smooth with a known constant far field: `g(r) = g_inf` for
/// `r >= far` (up to negligible remainder). This is the 1D reduction the
/// symmetric-difference form of `(-Δ)^s` produces along any ray.
///
/// The `[0, delta]` piece uses an even Taylor fit `g ≈ a r^2 + b r^4`
/// through `g(delta/2)` and `g(delta)` integrated exactly; the middle is
/// adaptive Gauss-Kronrod; the tail is the exact power integral of the
/// constant `g_inf`.
pub fn pv_radial_with_tail<F: Fn(f64) -> f64>(
    g: &F,
    s: f64,
    delta: f64,
    far: f64,
    g_inf: f64,
    rel_tol: f64,
) -> f64 {
    pv_radial_split(g, s, delta, &[], far, g_inf, rel_tol)
}

/// As [`pv_radial_with_tail`] with interior breakpoints: the middle range
/// is integrated segment by segment so a caller who knows where `g` has
/// narrow features (sharper than a coarse panel) can pin them. Breakpoints
/// outside `(delta, far)` are ignored.
pub fn pv_radial_split<F: Fn(f64) -> f64>(
    g: &F,
    s: f64,
    delta: f64,
    breakpoints: &[f64],
    far: f64,
    g_inf: f64,
    rel_tol: f64,
) -> f64 {
    let delta = delta.min(0.25 * far);
    let near = near_taylor(g, s, delta);
    let integrand = |r: f64| g(r) * r.powf(-1.0 - 2.0 * s);
    let tail = g_inf * far.powf(-2.0 * s) / (2.0 * s);
    let scale = near.abs().max(tail.abs());

    let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(delta);
    for &b in breakpoints {
        if b > delta && b < far {
            cuts.push(b);
        }
    }
    cuts.push(far);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut mid = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            mid += adaptive_gk(&integrand, w[0], w[1], rel_tol, rel_tol * scale.max(1e-300));
        }
    }
    near + mid + tail
}

/// As [`pv_radial_with_tail`] but over the finite range `[0, upper]` only.
pub fn pv_radial_finite<F: Fn(f64) -> f64>(
    g: &F,
    s: f64,
    delta: f64,
    upper: f64,
    rel_tol: f64,
) -> f64 {
    let delta = delta.min(0.25 * upper);
    let near = near_taylor(g, s, delta);
    let integrand = |r: f64| g(r) * r.powf(-1.0 - 2.0 * s);
    let mid = adaptive_gk(&integrand, delta, upper, rel_tol, near.abs() * rel_tol + 1e-300);
    near + mid
}

/// Exact integral of the even quartic fit of `g` over `[0, delta]` against
/// the kernel. Exact whenever `g` is an even quartic there (the principal
/// value already removed the odd part).
fn near_taylor<F: Fn(f64) -> f64>(g: &F, s: f64, delta: f64) -> f64 {
    let g_half = g(0.5 * delta);
    let g_full = g(delta);
    let d2 = delta * delta;
    let a = (16.0 * g_half - g_full) / (3.0 * d2);
    let b = (g_full - a * d2) / (d2 * d2);
    a * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
        + b * delta.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integral_closed_form() {
        let p = -1.3;
        let exact = (2.0f64.powf(p + 1.0) - 0.5f64.powf(p + 1.0)) / (p + 1.0);
        assert!((power_integral(0.5, 2.0, p) - exact).abs() < 1e-14);
    }

    #[test]
    fn power_integral_continuous_at_log_case() {
        // p = -1 exactly is the logarithm; nearby p must approach it.
        let exact = (3.0f64 / 0.7).ln();
        assert!((power_integral(0.7, 3.0, -1.0) - exact).abs() < 1e-14);
        for dp in [1e-8, -1e-8, 1e-12] {
            let v = power_integral(0.7, 3.0, -1.0 + dp);
            assert!((v - exact).abs() < 1e-7 * exact.abs());
        }
    }

    #[test]
    fn gk_polynomial_and_trig() {
        let v = adaptive_gk(&|x: f64| x * x, 0.0, 1.0, 1e-13, 1e-15);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let v = adaptive_gk(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-15);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gk_steep_exponential() {
        // scale-1e-3 spike: forces refinement
        let v = adaptive_gk(&|x: f64| (-1000.0 * x).exp(), 0.0, 1.0, 1e-11, 1e-14);
        assert!((v - 1e-3 * (1.0 - (-1000.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn cell_2d_polynomial_exact_and_smooth() {
        let v = adaptive_cell_2d(&|x, y| x * x * y, 0.0, 1.0, 0.0, 2.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let v = adaptive_cell_2d(
            &|x, y| (-(x * x + y * y)).exp(),
            -1.0,
            1.0,
            -1.0,
            1.0,
            1e-11,
        );
        // (∫_{-1}^{1} e^{-t^2} dt)^2 via erf(1) = 0.842700792949715
        let one_d = 0.842_700_792_949_714_9 * std::f64::consts::PI.sqrt();
        assert!((v - one_d * one_d).abs() < 1e-9);
    }

    #[test]
    fn pv_radial_quartic_bump_closed_form() {
        // g(r) = 2u(0) - u(r) - u(-r) for u = (1-x^2)_+^2: equals 4r^2-2r^4
        // on [0,1] and the constant 2 beyond; the integral has the hand
        // closed form 4/(2-2s) - 2/(4-2s) + 1/s.
        for s in [0.2, 0.35, 0.5, 0.75] {
            let g = |r: f64| {
                if r < 1.0 {
                    4.0 * r * r - 2.0 * r * r * r * r
                } else {
                    2.0
                }
            };
            let exact = 4.0 / (2.0 - 2.0 * s) - 2.0 / (4.0 - 2.0 * s) + 1.0 / s;
            let v = pv_radial_with_tail(&g, s, 0.05, 1.0, 2.0, 1e-12);
            assert!(
                (v - exact).abs() < 1e-10 * exact,
                "s={s}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn pv_radial_matches_fourier_symbol_on_cosine() {
        // (-Δ)^s cos(kx) = |k|^{2s} cos(kx); the radial route must agree.
        // g(r) = 2cos(kx)(1 - cos(kr)) oscillates around g_inf = 2cos(kx);
        // a large cutoff makes the oscillatory remainder negligible.
        let (k, x, s): (f64, f64, f64) = (3.0, 0.2, 0.3);
        let g = |r: f64| 2.0 * (k * x).cos() * (1.0 - (k * r).cos());
        let g_inf = 2.0 * (k * x).cos();
        let raw = pv_radial_with_tail(&g, s, 1e-3, 4.0e3, g_inf, 1e-10);
        let c = crate::frac::kernel_constant(1, s).unwrap();
        let exact = k.powf(2.0 * s) * (k * x).cos();
        assert!(
            (c * raw - exact).abs() < 2e-5 * exact.abs(),
            "{} vs {exact}",
            c * raw
        );
    }
}
