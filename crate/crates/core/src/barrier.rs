//! Boundary barrier construction behind the Hopf lemma, verified
//! numerically.
//!
//! For a ball `B_r(x̄) ⊆ Ω` touching ∂Ω at `x₀`, the auxiliary function
//!
//! ```text
//!     v(x) = e^{-α κ(x)} - e^{-α (1+r²)^{1/2}},   κ(x) = (|x - x̄|² + 1)^{1/2},
//! ```
//!
//! vanishes on ∂B_r(x̄), is positive inside and negative outside, and for α
//! large enough satisfies `L v < 0` on the lens `K = B_r(x̄) ∩ B_{r/2}(x₀)`.
//! This module evaluates the discrete `L v` on the grid nodes of `K` — with
//! `v` globally defined, NOT zero-extended, because the argument evaluates
//! `Lv` where `v ≠ 0` outside Ω — and searches doubling exponents until the
//! sign certificate holds. The fractional term is computed by direct
//! quadrature against the analytic `v`, independent of the lattice weight
//! table.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frac::kernel_constant;
use crate::grid::{Dim, Grid};
use crate::operator::DriftField;
use crate::quad::{pv_radial_finite, pv_radial_split};
use crate::verdict::CheckVerdict;

/// Geometry and parameters of one barrier verification.
#[derive(Clone, Debug)]
pub struct BarrierConfig {
    /// Center of the touching ball (interior point).
    pub xbar: [f64; 2],
    /// Ball radius; `B_r(x̄)` must sit inside Ω and touch ∂Ω.
    pub r: f64,
    /// Barrier exponent. `None` runs the doubling search 1, 2, 4, …
    pub alpha: Option<f64>,
    /// Search cap (default 2^16).
    pub alpha_cap: f64,
    pub s: f64,
    pub q: DriftField,
}

impl BarrierConfig {
    pub fn new(xbar: [f64; 2], r: f64, s: f64, q: DriftField) -> Self {
        Self {
            xbar,
            r,
            alpha: None,
            alpha_cap: 65536.0,
            s,
            q,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BarrierReport {
    /// Numerical bound on the fractional term of the barrier argument over
    /// the lens: exact quadrature over the unit ball plus the bounded
    /// far-field term of the classical decomposition. (The raw far-field
    /// integral of the linearly-growing κ diverges for s <= 1/2, so the
    /// estimate mirrors the near/far split rather than brute-forcing it.)
    pub m_estimate: f64,
    /// The closed-form constant of the same decomposition with worst-case
    /// geometry; the numerical estimate sits below it.
    pub m_analytic: f64,
    pub alpha_used: f64,
    pub max_lv_on_k: f64,
    /// Sign certificate: `max_K Lv < 0`.
    pub pass: bool,
    pub x0: [f64; 2],
    pub lens_node_count: usize,
    /// Outward normal derivative of `v` at the touching point, by
    /// Richardson-extrapolated differencing and by the closed form
    /// `-α r e^{-α κ(x₀)} / κ(x₀)`.
    pub normal_derivative_numeric: f64,
    pub normal_derivative_formula: f64,
    /// `(α, max_K Lv)` per attempted exponent.
    pub search_trace: Vec<(f64, f64)>,
}

impl BarrierReport {
    pub fn verdict(&self) -> CheckVerdict {
        let nd_rel = (self.normal_derivative_numeric - self.normal_derivative_formula).abs()
            / self.normal_derivative_formula.abs().max(1e-300);
        CheckVerdict::new("barrier_sign_certificate", self.pass)
            .metric("alpha_used", self.alpha_used)
            .metric("max_lv_on_k", self.max_lv_on_k)
            .metric("m_estimate", self.m_estimate)
            .metric("m_analytic", self.m_analytic)
            .metric("lens_node_count", self.lens_node_count)
            .metric("normal_derivative_numeric", self.normal_derivative_numeric)
            .metric("normal_derivative_formula", self.normal_derivative_formula)
            .metric("normal_derivative_rel_diff", nd_rel)
    }
}

fn norm2(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Touching point of `B_r(x̄)` on ∂Ω. Faces are scanned in the fixed order
/// +x, -x, +y, -y and the first face at distance `r` wins, which makes the
/// centered-ball case (several touching faces) deterministic.
fn touching_point(grid: &Grid, xbar: [f64; 2], r: f64) -> Result<[f64; 2]> {
    let tol = 1e-9 * grid.spec.diameter();
    let bx = grid.spec.bounds[0];
    let mut faces: Vec<(f64, [f64; 2])> = vec![
        (bx[1] - xbar[0], [bx[1], xbar[1]]),
        (xbar[0] - bx[0], [bx[0], xbar[1]]),
    ];
    if grid.dim() == Dim::Two {
        let by = grid.spec.bounds[1];
        faces.push((by[1] - xbar[1], [xbar[0], by[1]]));
        faces.push((xbar[1] - by[0], [xbar[0], by[0]]));
    }
    for &(d, _) in &faces {
        if d < r - tol {
            return Err(Error::InvalidParam(format!(
                "ball of radius {r} at {xbar:?} is not contained in the domain"
            )));
        }
    }
    faces
        .iter()
        .find(|(d, _)| (d - r).abs() <= tol)
        .map(|&(_, p)| p)
        .ok_or_else(|| {
            Error::InvalidParam(format!(
                "ball of radius {r} at {xbar:?} does not touch the boundary"
            ))
        })
}

/// `κ` and the barrier `v` for a fixed configuration.
struct Barrier {
    xbar: [f64; 2],
    alpha: f64,
    /// `e^{-α (1+r²)^{1/2}}`, the constant making `v` vanish on ∂B_r.
    offset: f64,
}

impl Barrier {
    fn kappa(&self, p: [f64; 2]) -> f64 {
        let d = sub(p, self.xbar);
        (d[0] * d[0] + d[1] * d[1] + 1.0).sqrt()
    }

    /// Spike profile `w = e^{-α κ}`; `v = w - offset`.
    fn w(&self, p: [f64; 2]) -> f64 {
        (-self.alpha * self.kappa(p)).exp()
    }

    fn v(&self, p: [f64; 2]) -> f64 {
        self.w(p) - self.offset
    }
}

/// Discrete `L v` at one point: second differences and central drift on the
/// analytic `v` (global, no zero extension), fractional term by radial
/// principal-value quadrature of the analytic profile.
fn lv_at(
    b: &Barrier,
    x: [f64; 2],
    h: f64,
    dim: Dim,
    q: [f64; 2],
    s: f64,
    c_frac: f64,
) -> f64 {
    let axes: &[[f64; 2]] = match dim {
        Dim::One => &[[1.0, 0.0]],
        Dim::Two => &[[1.0, 0.0], [0.0, 1.0]],
    };
    let mut local = 0.0;
    let mut drift = 0.0;
    for (c, e) in axes.iter().enumerate() {
        let up = b.v([x[0] + h * e[0], x[1] + h * e[1]]);
        let dn = b.v([x[0] - h * e[0], x[1] - h * e[1]]);
        local += (2.0 * b.v(x) - up - dn) / (h * h);
        drift += q[c] * (up - dn) / (2.0 * h);
    }
    local + drift + c_frac * frac_radial(b, x, s, dim)
}

/// `∫ over rays of the symmetric difference of w` — the kernel constant is
/// applied by the caller. The spike of `w` along a ray towards x̄ sits at
/// the projection radius with width ~ 1/α; those radii are passed as
/// breakpoints so no panel can step over them.
fn frac_radial(b: &Barrier, x: [f64; 2], s: f64, dim: Dim) -> f64 {
    let rho = norm2(sub(x, b.xbar));
    let alpha_eff = b.alpha.max(1.0);
    let delta = (0.1 / alpha_eff).min(0.05);
    let far = rho + b.kappa(x) + 45.0 / alpha_eff + 1.0;
    let ray = |dir: [f64; 2]| {
        let g = move |r: f64| {
            2.0 * b.w(x) - b.w([x[0] + r * dir[0], x[1] + r * dir[1]])
                - b.w([x[0] - r * dir[0], x[1] - r * dir[1]])
        };
        // closest approach to the spike along ±dir
        let proj = dir[0] * (b.xbar[0] - x[0]) + dir[1] * (b.xbar[1] - x[1]);
        let spike = proj.abs();
        let width = 3.0 / alpha_eff;
        let cuts = [spike - width, spike, spike + width, spike + 1.0];
        pv_radial_split(&g, s, delta, &cuts, far, 2.0 * b.w(x), 1e-11)
    };
    match dim {
        Dim::One => ray([1.0, 0.0]),
        Dim::Two => {
            let n_theta = 32;
            let mut sum = 0.0;
            for j in 0..n_theta {
                let th = (j as f64 + 0.5) * std::f64::consts::PI / n_theta as f64;
                sum += ray([th.cos(), th.sin()]);
            }
            sum * std::f64::consts::PI / n_theta as f64
        }
    }
}

/// Verifies the barrier construction on the grid.
pub fn barrier_verify(cfg: &BarrierConfig, grid: &Grid) -> Result<BarrierReport> {
    if !(cfg.r > 0.0) {
        return Err(Error::InvalidParam("need r > 0".into()));
    }
    if !(cfg.s > 0.0 && cfg.s < 1.0) {
        return Err(Error::InvalidParam(format!(
            "need s in (0,1), got {}",
            cfg.s
        )));
    }
    if !grid.contains(cfg.xbar) {
        return Err(Error::InvalidParam(format!(
            "ball center {:?} is not interior",
            cfg.xbar
        )));
    }
    let dim = grid.dim();
    let n_dim = dim.as_usize();
    let x0 = touching_point(grid, cfg.xbar, cfg.r)?;
    let c_frac = kernel_constant(n_dim, cfg.s)?;

    // lens nodes K = B_r(x̄) ∩ B_{r/2}(x₀)
    let lens: Vec<usize> = (0..grid.interior_count())
        .filter(|&i| {
            let p = grid.node(i);
            norm2(sub(p, cfg.xbar)) < cfg.r && norm2(sub(p, x0)) < 0.5 * cfg.r
        })
        .collect();
    if lens.is_empty() {
        return Err(Error::InvalidParam(
            "lens region contains no grid nodes; refine the grid or move the ball".into(),
        ));
    }
    let q_at: Vec<[f64; 2]> = lens
        .iter()
        .map(|&i| cfg.q.eval(i, grid.node(i)))
        .collect::<Result<_>>()?;

    let alphas: Vec<f64> = match cfg.alpha {
        Some(a) => vec![a],
        None => {
            let mut v = Vec::new();
            let mut a = 1.0;
            while a <= cfg.alpha_cap {
                v.push(a);
                a *= 2.0;
            }
            v
        }
    };

    let mut search_trace = Vec::new();
    let mut found: Option<(f64, f64)> = None;
    for &alpha in &alphas {
        let b = Barrier {
            xbar: cfg.xbar,
            alpha,
            offset: (-alpha * (1.0 + cfg.r * cfg.r).sqrt()).exp(),
        };
        let max_lv = lens
            .par_iter()
            .zip(&q_at)
            .map(|(&i, &q)| lv_at(&b, grid.node(i), grid.h, dim, q, cfg.s, c_frac))
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        search_trace.push((alpha, max_lv));
        if max_lv < 0.0 {
            found = Some((alpha, max_lv));
            break;
        }
    }

    let (alpha_used, max_lv_on_k) = match (found, cfg.alpha) {
        (Some(hit), _) => hit,
        (None, Some(a)) => (a, search_trace[0].1),
        (None, None) => {
            return Err(Error::BarrierSearchFailed {
                cap: cfg.alpha_cap,
                trace: search_trace,
            })
        }
    };

    let b = Barrier {
        xbar: cfg.xbar,
        alpha: alpha_used,
        offset: (-alpha_used * (1.0 + cfg.r * cfg.r).sqrt()).exp(),
    };

    // outward normal derivative at the touching point, two routes
    let nu = {
        let d = sub(x0, cfg.xbar);
        [d[0] / cfg.r, d[1] / cfg.r]
    };
    let step = 1e-3 / alpha_used.max(1.0);
    let diff = |t: f64| {
        (b.v([x0[0] + t * nu[0], x0[1] + t * nu[1]])
            - b.v([x0[0] - t * nu[0], x0[1] - t * nu[1]]))
            / (2.0 * t)
    };
    let (d1, d2) = (diff(step), diff(0.5 * step));
    let normal_derivative_numeric = (4.0 * d2 - d1) / 3.0;
    let kappa0 = (1.0 + cfg.r * cfg.r).sqrt();
    let normal_derivative_formula =
        -alpha_used * cfg.r * (-alpha_used * kappa0).exp() / kappa0;

    // numerical counterpart of the fractional bound on κ over the lens:
    // exact near part, bounded far part of the classical split
    let omega = match dim {
        Dim::One => 2.0,
        Dim::Two => 2.0 * std::f64::consts::PI,
    };
    let sample_stride = (lens.len() / 16).max(1);
    let m_estimate = lens
        .iter()
        .step_by(sample_stride)
        .map(|&i| {
            let x = grid.node(i);
            let kappa_x = b.kappa(x);
            let near = kappa_near_part(&b, x, cfg.s, dim);
            0.5 * c_frac * (near + 2.0 * kappa_x * omega / (2.0 * cfg.s))
        })
        .fold(0.0f64, f64::max);
    let d_sup = domain_corner_norm(grid);
    let diam = grid.spec.diameter();
    let m_analytic = c_frac * (1.0 + (3.0 + d_sup) * d_sup) * omega / (2.0 - 2.0 * cfg.s)
        + 2.0 * omega * (diam * diam + 1.0) / (2.0 * cfg.s);

    Ok(BarrierReport {
        m_estimate,
        m_analytic,
        alpha_used,
        max_lv_on_k,
        pass: max_lv_on_k < 0.0,
        x0,
        lens_node_count: lens.len(),
        normal_derivative_numeric,
        normal_derivative_formula,
        search_trace,
    })
}

/// `∫_{B_1} [κ(x+y) + κ(x-y) - 2κ(x)] / |y|^{N+2s} dy` (nonnegative by
/// convexity of κ, so it equals the absolute integral).
fn kappa_near_part(b: &Barrier, x: [f64; 2], s: f64, dim: Dim) -> f64 {
    let ray = |dir: [f64; 2]| {
        let g = move |r: f64| {
            b.kappa([x[0] + r * dir[0], x[1] + r * dir[1]])
                + b.kappa([x[0] - r * dir[0], x[1] - r * dir[1]])
                - 2.0 * b.kappa(x)
        };
        pv_radial_finite(&g, s, 0.05, 1.0, 1e-11)
    };
    match dim {
        Dim::One => 2.0 * ray([1.0, 0.0]),
        Dim::Two => {
            let n_theta = 32;
            let mut sum = 0.0;
            for j in 0..n_theta {
                let th = (j as f64 + 0.5) * std::f64::consts::PI / n_theta as f64;
                sum += ray([th.cos(), th.sin()]);
            }
            2.0 * sum * std::f64::consts::PI / n_theta as f64
        }
    }
}

/// Largest coordinate-vector norm over the domain corners (the `D` of the
/// closed-form bound).
fn domain_corner_norm(grid: &Grid) -> f64 {
    let bx = grid.spec.bounds[0];
    match grid.dim() {
        Dim::One => bx[0].abs().max(bx[1].abs()),
        Dim::Two => {
            let by = grid.spec.bounds[1];
            let mut d: f64 = 0.0;
            for &x in &bx {
                for &y in &by {
                    d = d.max(norm2([x, y]));
                }
            }
            d
        }
    }
}
