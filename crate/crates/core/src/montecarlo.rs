//! Independent stochastic oracle for the principal eigenvalue.
//!
//! The operator is the negative generator of a killed drift-diffusion-jump
//! process: the semigroup `e^{-tL}` belongs to
//!
//! ```text
//!     X_{t+dt} = X_t - q(X_t) dt + sqrt(2 dt) ξ + J_dt ,
//! ```
//!
//! with `ξ` standard Gaussian (diffusion matrix `2·I`, so the local
//! generator part is exactly the Laplacian), drift `-q`, and `J_dt` an
//! isotropic 2s-stable increment with characteristic function
//! `exp(-dt |k|^{2s})` — the jump process generated by the fractional term
//! under the same normalization. A path dies the first step it lands
//! outside Ω; jumps may exit directly (exterior condition, not a boundary
//! one). The survival fraction then decays like `e^{-λ₁ t}`, which is the
//! cross-module check: none of this code touches the lattice machinery.
//!
//! Paths use counter-based streams (one ChaCha stream per path), so the
//! curve is bit-identical no matter how many workers run the simulation.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Dim, DomainSpec};
use crate::operator::DriftField;

/// Simulation parameters.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PathParams {
    pub dt: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl PathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::InvalidParam("need dt > 0 and horizon > 0".into()));
        }
        if self.n_paths < 1000 {
            return Err(Error::InvalidParam(format!(
                "need at least 1000 paths, got {}",
                self.n_paths
            )));
        }
        if self.dt > 1e-2 * self.horizon {
            return Err(Error::InvalidParam(format!(
                "dt = {} too coarse for horizon {}",
                self.dt, self.horizon
            )));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(Error::InvalidParam(format!(
                "horizon/dt = {steps} is not an integer number of steps"
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Exponential-decay fit of the survival curve.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DecayFit {
    pub lambda_hat: f64,
    /// 95% half-width from batch means over path blocks.
    pub ci_half_width: f64,
    pub fit_window: [f64; 2],
    pub points_in_window: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    /// Too few survivors inside the fit window for a trustworthy rate.
    InsufficientStatistics,
}

/// Monte-Carlo survival counts on a time grid with the fitted decay rate.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survivors: Vec<u64>,
    pub n_paths: usize,
    pub fit: Option<DecayFit>,
    pub status: FitStatus,
}

impl SurvivalCurve {
    pub fn fraction(&self, idx: usize) -> f64 {
        self.survivors[idx] as f64 / self.n_paths as f64
    }

    /// First recorded time at which the survival fraction drops below 1/2.
    pub fn median_survival_time(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.survivors)
            .find(|(_, &s)| (s as f64) < 0.5 * self.n_paths as f64)
            .map(|(&t, _)| t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,survivors,fraction")?;
        for (t, s) in self.times.iter().zip(&self.survivors) {
            writeln!(w, "{},{},{}", t, s, *s as f64 / self.n_paths as f64)?;
        }
        Ok(())
    }

    pub fn fit_summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_paths": self.n_paths,
            "status": self.status,
            "fit": self.fit.as_ref().map(|f| serde_json::json!({
                "lambda_hat": f.lambda_hat,
                "ci_half_width": f.ci_half_width,
                "fit_window": f.fit_window,
                "points_in_window": f.points_in_window,
            })),
        })
    }
}

/// One draw of a symmetric alpha-stable variate with characteristic
/// function `exp(-|scale·k|^alpha)`, by the Chambers-Mallows-Stuck
/// construction. The formula is continuous through `alpha = 1` (the Cauchy
/// case), which `alpha = 2s` hits at `s = 1/2`.
pub fn stable_increment<R: Rng + ?Sized>(
    alpha_stable: f64,
    scale: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(alpha_stable > 0.0 && alpha_stable < 2.0) {
        return Err(Error::InvalidParam(format!(
            "stable index must lie in (0,2), got {alpha_stable} \
             (the Gaussian endpoint is handled by the diffusion part)"
        )));
    }
    let v = std::f64::consts::FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
    let w = exp1(rng);
    let a = alpha_stable;
    let x = (a * v).sin() / v.cos().powf(1.0 / a)
        * ((v * (1.0 - a)).cos() / w).powf((1.0 - a) / a);
    Ok(scale * x)
}

/// One draw of a positive stable variate with Laplace transform
/// `E exp(-λ S) = exp(-λ^gamma)`, `0 < gamma < 1` (the subordinator driving
/// isotropic stable vectors in 2D).
pub fn positive_stable<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParam(format!(
            "subordinator index must lie in (0,1), got {gamma}"
        )));
    }
    let b = std::f64::consts::FRAC_PI_2;
    let v = b * (2.0 * rng.random::<f64>() - 1.0);
    let w = exp1(rng);
    // raw one-sided CMS draw: Laplace exponent is exactly λ^γ
    let x = (gamma * (v + b)).sin() / v.cos().powf(1.0 / gamma)
        * ((v - gamma * (v + b)).cos() / w).powf((1.0 - gamma) / gamma);
    Ok(x)
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln().max(f64::MIN_POSITIVE.ln())
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Simulates the killed process and estimates λ₁ from the survival decay.
/// `s = None` disables the jump part (pure drift-diffusion). Paths start at
/// the center of Ω.
pub fn simulate_survival(
    domain: &DomainSpec,
    s: Option<f64>,
    q: &DriftField,
    p: &PathParams,
) -> Result<SurvivalCurve> {
    domain.validate()?;
    p.validate()?;
    if let Some(s) = s {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParam(format!("need s in (0,1), got {s}")));
        }
    }
    // sampled drift tables are grid-bound; paths need pointwise evaluation
    q.eval_at(domain_center(domain))?;

    let steps = p.steps();
    let stride = (steps / 1024).max(1);
    let n_rec = steps / stride;
    let start = domain_center(domain);
    let dim = domain.dimension;
    let bounds = domain.bounds.clone();
    let sqrt_2dt = (2.0 * p.dt).sqrt();
    // per-step jump scales fixed by the characteristic exponent
    let jump_1d = s.map(|s| p.dt.powf(1.0 / (2.0 * s)));
    let sub_scale = s.map(|s| p.dt.powf(1.0 / s));

    let inside = |x: &[f64; 2]| -> bool {
        for (k, b) in bounds.iter().enumerate() {
            if x[k] <= b[0] || x[k] >= b[1] {
                return false;
            }
        }
        true
    };

    // exit step per path (steps+1 = survived the horizon)
    let exit_steps: Vec<u32> = (0..p.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(path as u64 + 1);
            let mut x = start;
            for step in 1..=steps {
                let qv = q.eval_at(x).expect("pointwise drift");
                x[0] += -qv[0] * p.dt + sqrt_2dt * gaussian(&mut rng);
                if dim == Dim::Two {
                    x[1] += -qv[1] * p.dt + sqrt_2dt * gaussian(&mut rng);
                }
                if let Some(s) = s {
                    match dim {
                        Dim::One => {
                            let j = stable_increment(2.0 * s, jump_1d.unwrap(), &mut rng)
                                .expect("validated alpha");
                            x[0] += j;
                        }
                        Dim::Two => {
                            let sub = sub_scale.unwrap()
                                * positive_stable(s, &mut rng).expect("validated gamma");
                            let amp = (2.0 * sub).sqrt();
                            x[0] += amp * gaussian(&mut rng);
                            x[1] += amp * gaussian(&mut rng);
                        }
                    }
                }
                if !inside(&x) {
                    return step as u32;
                }
            }
            steps as u32 + 1
        })
        .collect();

    // survivor counts on the recording grid (order-independent)
    let mut counts = vec![0u64; n_rec];
    for &e in &exit_steps {
        for (j, c) in counts.iter_mut().enumerate() {
            let t_step = ((j + 1) * stride) as u32;
            if e > t_step {
                *c += 1;
            }
        }
    }
    let times: Vec<f64> = (1..=n_rec).map(|j| (j * stride) as f64 * p.dt).collect();

    let (fit, status) = fit_decay(&times, &counts, &exit_steps, stride, p);
    Ok(SurvivalCurve {
        times,
        survivors: counts,
        n_paths: p.n_paths,
        fit,
        status,
    })
}

fn domain_center(domain: &DomainSpec) -> [f64; 2] {
    let mut c = [0.0, 0.0];
    for (k, b) in domain.bounds.iter().enumerate() {
        c[k] = 0.5 * (b[0] + b[1]);
    }
    c
}

/// Least squares on the log-survival over the window where the fraction
/// lies in [0.05, 0.5] (asymptotic regime with usable statistics). The
/// confidence interval comes from batch means over 20 path blocks.
fn fit_decay(
    times: &[f64],
    counts: &[u64],
    exit_steps: &[u32],
    stride: usize,
    p: &PathParams,
) -> (Option<DecayFit>, FitStatus) {
    let n = p.n_paths as f64;
    let window: Vec<usize> = (0..times.len())
        .filter(|&j| {
            let f = counts[j] as f64 / n;
            (0.05..=0.5).contains(&f)
        })
        .collect();
    let min_survivors = window.iter().map(|&j| counts[j]).min().unwrap_or(0);
    if window.len() < 2 || min_survivors < 50 {
        return (None, FitStatus::InsufficientStatistics);
    }
    let t_lo = times[window[0]];
    let t_hi = times[*window.last().unwrap()];

    let slope = |ts: &[f64], ys: &[f64]| -> f64 {
        let m = ts.len() as f64;
        let tbar = ts.iter().sum::<f64>() / m;
        let ybar = ys.iter().sum::<f64>() / m;
        let cov: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tbar) * (y - ybar)).sum();
        let var: f64 = ts.iter().map(|t| (t - tbar) * (t - tbar)).sum();
        cov / var
    };

    let ts: Vec<f64> = window.iter().map(|&j| times[j]).collect();
    let ys: Vec<f64> = window.iter().map(|&j| (counts[j] as f64 / n).ln()).collect();
    let lambda_hat = -slope(&ts, &ys);

    // batch means over contiguous path blocks, same window
    let n_batches = 20usize.min(p.n_paths / 200).max(2);
    let block = p.n_paths / n_batches;
    let mut batch_lambdas = Vec::new();
    for b in 0..n_batches {
        let lo = b * block;
        let hi = if b + 1 == n_batches {
            p.n_paths
        } else {
            lo + block
        };
        let bn = (hi - lo) as f64;
        let mut bts = Vec::new();
        let mut bys = Vec::new();
        for &j in &window {
            let t_step = ((j + 1) * stride) as u32;
            let alive = exit_steps[lo..hi].iter().filter(|&&e| e > t_step).count();
            if alive > 0 {
                bts.push(times[j]);
                bys.push((alive as f64 / bn).ln());
            }
        }
        if bts.len() >= 2 {
            batch_lambdas.push(-slope(&bts, &bys));
        }
    }
    let ci_half_width = if batch_lambdas.len() >= 2 {
        let m = batch_lambdas.len() as f64;
        let mean = batch_lambdas.iter().sum::<f64>() / m;
        let var = batch_lambdas
            .iter()
            .map(|l| (l - mean) * (l - mean))
            .sum::<f64>()
            / (m - 1.0);
        // t-quantile for ~19 degrees of freedom at 95%
        2.093 * (var / m).sqrt()
    } else {
        f64::INFINITY
    };

    if lambda_hat <= 0.0 {
        return (None, FitStatus::InsufficientStatistics);
    }
    (
        Some(DecayFit {
            lambda_hat,
            ci_half_width,
            fit_window: [t_lo, t_hi],
            points_in_window: window.len(),
        }),
        FitStatus::Ok,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stable_index_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(stable_increment(2.0, 1.0, &mut rng).is_err());
        assert!(stable_increment(0.0, 1.0, &mut rng).is_err());
        assert!(stable_increment(1.0, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn stable_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut signs = 0i64;
        for _ in 0..n {
            let x = stable_increment(1.2, 1.0, &mut rng).unwrap();
            signs += x.signum() as i64;
        }
        let bias = signs as f64 / n as f64;
        assert!(bias.abs() < 3.0 / (n as f64).sqrt(), "bias {bias}");
    }

    #[test]
    fn stable_tail_exponent() {
        // P(|X| > T) ~ C T^{-alpha}: regress the empirical tail over two
        // decades and recover the index.
        let alpha = 1.2;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| stable_increment(alpha, 1.0, &mut rng).unwrap().abs())
            .collect();
        let thresholds: Vec<f64> = (0..9).map(|i| 10.0f64 * 10f64.powf(i as f64 / 4.0)).collect();
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        for &t in &thresholds {
            let count = draws.iter().filter(|&&x| x > t).count();
            if count >= 100 {
                ts.push(t.ln());
                ys.push((count as f64 / n as f64).ln());
            }
        }
        assert!(ts.len() >= 6, "not enough tail points");
        let m = ts.len() as f64;
        let tbar = ts.iter().sum::<f64>() / m;
        let ybar = ys.iter().sum::<f64>() / m;
        let cov: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tbar) * (y - ybar)).sum();
        let var: f64 = ts.iter().map(|t| (t - tbar) * (t - tbar)).sum();
        let slope = cov / var;
        assert!(
            (slope + alpha).abs() < 0.1,
            "tail slope {slope} vs -{alpha}"
        );
    }

    #[test]
    fn positive_stable_laplace_transform() {
        for gamma in [0.35, 0.5, 0.75] {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let n = 200_000;
            for lam in [0.5f64, 1.0, 2.0] {
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for _ in 0..n {
                    let s = positive_stable(gamma, &mut rng).unwrap();
                    assert!(s > 0.0);
                    let e = (-lam * s).exp();
                    sum += e;
                    sumsq += e * e;
                }
                let mean = sum / n as f64;
                let sd = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
                let exact = (-lam.powf(gamma)).exp();
                assert!(
                    (mean - exact).abs() < 5.0 * sd + 1e-4,
                    "gamma={gamma} lambda={lam}: {mean} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn brownian_exit_rate_interval() {
        // generator Δ on (0,1): survival decays at rate π²
        let domain = DomainSpec::interval(0.0, 1.0, 3);
        let p = PathParams {
            dt: 2e-5,
            n_paths: 20_000,
            horizon: 0.6,
            seed: 99,
        };
        let curve = simulate_survival(&domain, None, &DriftField::zero(), &p).unwrap();
        let fit = curve.fit.as_ref().expect("fit available");
        let exact = PI * PI;
        assert!(
            (fit.lambda_hat - exact).abs() < 0.1 * exact,
            "lambda_hat {} vs {exact}",
            fit.lambda_hat
        );
    }

    #[test]
    fn survivors_non_increasing_and_deterministic() {
        let domain = DomainSpec::interval(-1.0, 1.0, 3);
        let p = PathParams {
            dt: 1e-3,
            n_paths: 2000,
            horizon: 1.0,
            seed: 5,
        };
        let c1 = simulate_survival(&domain, Some(0.4), &DriftField::zero(), &p).unwrap();
        for w in c1.survivors.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // bit-identical rerun, and bit-identical across pool sizes
        let c2 = simulate_survival(&domain, Some(0.4), &DriftField::zero(), &p).unwrap();
        assert_eq!(c1.survivors, c2.survivors);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c3 =
            pool.install(|| simulate_survival(&domain, Some(0.4), &DriftField::zero(), &p).unwrap());
        assert_eq!(c1.survivors, c3.survivors);
    }

    #[test]
    fn outward_drift_kills_faster() {
        // field pointing inward = process drift outward (the process moves
        // by -q dt): survival must decay faster than drift-free
        let domain = DomainSpec::interval(0.0, 1.0, 3);
        let p = PathParams {
            dt: 1e-4,
            n_paths: 4000,
            horizon: 0.4,
            seed: 3,
        };
        let q_out = DriftField::from_fn(
            |x| [-50.0 * (x[0] - 0.5).signum(), 0.0],
            "inward field, outward transport",
        );
        let free = simulate_survival(&domain, None, &DriftField::zero(), &p).unwrap();
        let pushed = simulate_survival(&domain, None, &q_out, &p).unwrap();
        let t_free = free.median_survival_time().unwrap();
        let t_pushed = pushed.median_survival_time().unwrap();
        assert!(
            t_pushed < t_free,
            "outward transport should kill faster: {t_pushed} vs {t_free}"
        );
    }

    #[test]
    fn larger_domain_survives_longer() {
        let p = PathParams {
            dt: 1e-3,
            n_paths: 3000,
            horizon: 1.0,
            seed: 0,
        };
        for seed in [1u64, 2, 3] {
            let p = PathParams { seed, ..p };
            let small = simulate_survival(
                &DomainSpec::interval(0.0, 1.0, 3),
                Some(0.3),
                &DriftField::zero(),
                &p,
            )
            .unwrap();
            let large = simulate_survival(
                &DomainSpec::interval(-0.5, 1.5, 3),
                Some(0.3),
                &DriftField::zero(),
                &p,
            )
            .unwrap();
            let ts = small.median_survival_time().unwrap_or(f64::INFINITY);
            let tl = large.median_survival_time().unwrap_or(f64::INFINITY);
            assert!(tl >= ts, "seed {seed}: {tl} < {ts}");
        }
    }

    #[test]
    fn dt_refinement_within_ci() {
        let domain = DomainSpec::interval(-1.0, 1.0, 3);
        let coarse = PathParams {
            dt: 4e-4,
            n_paths: 20_000,
            horizon: 1.6,
            seed: 17,
        };
        let fine = PathParams {
            dt: 2e-4,
            ..coarse
        };
        let c = simulate_survival(&domain, Some(0.5), &DriftField::zero(), &coarse).unwrap();
        let f = simulate_survival(&domain, Some(0.5), &DriftField::zero(), &fine).unwrap();
        let (cf, ff) = (c.fit.unwrap(), f.fit.unwrap());
        assert!(
            (cf.lambda_hat - ff.lambda_hat).abs() <= cf.ci_half_width + ff.ci_half_width,
            "{} vs {} (ci {} + {})",
            cf.lambda_hat,
            ff.lambda_hat,
            cf.ci_half_width,
            ff.ci_half_width
        );
    }

    #[test]
    fn rejects_bad_params() {
        let domain = DomainSpec::interval(0.0, 1.0, 3);
        let bad = PathParams {
            dt: 0.5,
            n_paths: 2000,
            horizon: 1.0,
            seed: 0,
        };
        assert!(simulate_survival(&domain, None, &DriftField::zero(), &bad).is_err());
        let few = PathParams {
            dt: 1e-3,
            n_paths: 10,
            horizon: 1.0,
            seed: 0,
        };
        assert!(simulate_survival(&domain, None, &DriftField::zero(), &few).is_err());
        let p = PathParams {
            dt: 1e-3,
            n_paths: 2000,
            horizon: 1.0,
            seed: 0,
        };
        assert!(simulate_survival(&domain, Some(1.5), &DriftField::zero(), &p).is_err());
        // sampled drift tables cannot be evaluated along paths
        let sampled = DriftField::sampled(vec![[0.0, 0.0]; 3], "table");
        assert!(simulate_survival(&domain, None, &sampled, &p).is_err());
    }

    #[test]
    fn csv_shape() {
        let domain = DomainSpec::interval(0.0, 1.0, 3);
        let p = PathParams {
            dt: 1e-3,
            n_paths: 1000,
            horizon: 0.5,
            seed: 2,
        };
        let c = simulate_survival(&domain, None, &DriftField::zero(), &p).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,survivors,fraction\n"));
        assert_eq!(text.lines().count(), c.times.len() + 1);
    }
}
