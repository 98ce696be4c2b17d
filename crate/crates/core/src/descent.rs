//! Retracted gradient descent on the sphere, per-trace checks of the
//! sufficient-decrease and relative-error conditions, and rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm};
use crate::loja::least_squares;
use crate::problem::{Problem, SpherePoint};
use crate::stationary::{enumerate_stationary, DEFAULT_TOL};

pub const MAX_HALVINGS: usize = 60;
/// All iterates up to this index are stored; later ones every
/// [`THIN_STRIDE`]-th.
pub const THIN_AFTER: usize = 10_000;
pub const THIN_STRIDE: usize = 10;
/// Final distance to `x*` required before a rate is fitted.
pub const RATE_CONVERGENCE_RADIUS: f64 = 0.05;

/// One retraction step `(x − α·grad)/‖x − α·grad‖`. The denominator is at
/// least 1 because the projected gradient is orthogonal to `x`.
pub fn rgd_step(p: &Problem, x: &SpherePoint, alpha: f64) -> Result<SpherePoint> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size {alpha} must be positive")));
    }
    let rg = p.riemannian_grad(x)?;
    SpherePoint::normalize(linalg::axpy(x.as_slice(), -alpha, &rg.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgdOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Initial trial step; `None` means `1/(‖A‖_F + 1)`.
    pub alpha0: Option<f64>,
    pub backtrack_ratio: f64,
    pub armijo_c: f64,
}

impl Default for RgdOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            grad_tol: 1e-12,
            alpha0: None,
            backtrack_ratio: 0.5,
            armijo_c: 1e-4,
        }
    }
}

impl RgdOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if let Some(a) = self.alpha0 {
            if !(a > 0.0 && a.is_finite()) {
                return bad("alpha0 must be positive");
            }
        }
        Ok(())
    }

    pub fn alpha0_for(&self, p: &Problem) -> f64 {
        self.alpha0.unwrap_or(1.0 / (p.a().frobenius_norm() + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    /// Stored iterates; `iterate_indices[i]` is the iteration of `iterates[i]`.
    pub iterates: Vec<SpherePoint>,
    pub iterate_indices: Vec<usize>,
    pub thin_after: usize,
    pub thin_stride: usize,
    /// `f(xᵏ)` for every iteration, accrued from `f(x⁰)` by the exact
    /// per-step decreases so that rounding can never make it increase.
    pub f_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// `‖xᵏ − xᵏ⁺¹‖`, one per step.
    pub step_norms: Vec<f64>,
    /// `f(xᵏ) − f(xᵏ⁺¹)` evaluated without cancellation.
    pub decreases: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub stop_reason: StopReason,
    pub options: RgdOptions,
    pub alpha0: f64,
}

impl DescentTrace {
    pub fn n_steps(&self) -> usize {
        self.step_norms.len()
    }

    pub fn final_iterate(&self) -> &SpherePoint {
        self.iterates.last().expect("trace holds x⁰")
    }

    /// Sum of the last `frac` of the step norms over the total.
    pub fn tail_step_fraction(&self, frac: f64) -> f64 {
        let k = self.step_norms.len();
        let start = k - ((k as f64 * frac).ceil() as usize).min(k);
        let total: f64 = self.step_norms.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.step_norms[start..].iter().sum::<f64>() / total
    }
}

/// `f(x) − f(x + s) = −(∇f(x)ᵀs + ½sᵀAs)`, exact for a quadratic.
fn exact_decrease(p: &Problem, x: &[f64], s: &[f64]) -> f64 {
    -(dot(&p.grad_raw(x), s) + 0.5 * p.a().quad_form(s))
}

/// Armijo backtracking on the retracted step: a trial `α` is accepted when
/// `f(x) − f(x⁺) ≥ c·α·‖grad‖²`.
pub fn solve_rgd(p: &Problem, x0: &SpherePoint, opts: RgdOptions) -> Result<DescentTrace> {
    opts.validate()?;
    if x0.dim() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: x0.dim(),
        });
    }
    let alpha0 = opts.alpha0_for(p);
    let mut x = x0.clone();
    let mut f = p.objective(&x)?;
    let mut rg = p.riemannian_grad(&x)?;
    let mut trace = DescentTrace {
        iterates: vec![x.clone()],
        iterate_indices: vec![0],
        thin_after: THIN_AFTER,
        thin_stride: THIN_STRIDE,
        f_values: vec![f],
        grad_norms: vec![rg.norm()],
        step_norms: Vec::new(),
        decreases: Vec::new(),
        step_sizes: Vec::new(),
        c1_hat: f64::INFINITY,
        c2_hat: 0.0,
        stop_reason: StopReason::MaxIters,
        options: opts,
        alpha0,
    };
    for k in 0..opts.max_iters {
        let gn = rg.norm();
        if gn <= opts.grad_tol {
            trace.stop_reason = StopReason::GradTol;
            break;
        }
        let mut alpha = alpha0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = SpherePoint::normalize(linalg::axpy(x.as_slice(), -alpha, &rg.value))?;
            let s = linalg::sub(trial.as_slice(), x.as_slice());
            let dec = exact_decrease(p, x.as_slice(), &s);
            if dec >= opts.armijo_c * alpha * gn * gn {
                accepted = Some((trial, norm(&s), dec));
                break;
            }
            alpha *= opts.backtrack_ratio;
        }
        let Some((next, step, dec)) = accepted else {
            trace.stop_reason = StopReason::Stalled;
            break;
        };
        x = next;
        f -= dec;
        rg = p.riemannian_grad(&x)?;
        let k1 = k + 1;
        if step > 0.0 {
            trace.c1_hat = trace.c1_hat.min(dec / (step * step));
            trace.c2_hat = trace.c2_hat.max(rg.norm() / step);
        }
        trace.f_values.push(f);
        trace.grad_norms.push(rg.norm());
        trace.step_norms.push(step);
        trace.decreases.push(dec);
        trace.step_sizes.push(alpha);
        if k1 <= THIN_AFTER || k1 % THIN_STRIDE == 0 {
            trace.iterates.push(x.clone());
            trace.iterate_indices.push(k1);
        }
    }
    let last = trace.step_norms.len();
    if *trace.iterate_indices.last().unwrap() != last {
        trace.iterates.push(x);
        trace.iterate_indices.push(last);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    #[serde(rename = "C1_hat")]
    pub c1_hat: f64,
    #[serde(rename = "C2_hat")]
    pub c2_hat: f64,
    /// Step indices where a ratio is non-finite or the step went uphill.
    pub violations: Vec<usize>,
}

/// Recomputes `(f(xᵏ)−f(xᵏ⁺¹))/‖xᵏ−xᵏ⁺¹‖²` and `‖grad f(xᵏ⁺¹)‖/‖xᵏ−xᵏ⁺¹‖`
/// for every nonzero step. Zero steps are skipped.
pub fn verify_conditions(trace: &DescentTrace) -> Result<ConditionReport> {
    let k = trace.step_norms.len();
    if k < 2 {
        return Err(Error::TraceTooShort(format!("{k} steps, need at least 2")));
    }
    if trace.decreases.len() != k || trace.grad_norms.len() != k + 1 {
        return Err(Error::InvalidArgument("trace columns have inconsistent lengths".into()));
    }
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut violations = Vec::new();
    let mut valid = 0;
    for i in 0..k {
        let s = trace.step_norms[i];
        if s == 0.0 {
            continue;
        }
        valid += 1;
        let r1 = trace.decreases[i] / (s * s);
        let r2 = trace.grad_norms[i + 1] / s;
        if !r1.is_finite() || !r2.is_finite() || r1 <= 0.0 {
            violations.push(i);
            continue;
        }
        c1 = c1.min(r1);
        c2 = c2.max(r2);
    }
    if valid == 0 {
        return Err(Error::TraceTooShort("every step is zero".into()));
    }
    Ok(ConditionReport {
        c1_hat: c1,
        c2_hat: c2,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Finite,
    Linear,
    SublinearPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeDescriptor {
    pub regime: Regime,
    /// `(1−θ)/(2θ−1)` in the sublinear regime.
    pub power: Option<f64>,
}

/// The convergence regime implied by a Łojasiewicz exponent.
pub fn theta_to_regime(theta: f64) -> Result<RegimeDescriptor> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("exponent {theta} outside [0, 1)")));
    }
    Ok(if theta == 0.0 {
        RegimeDescriptor {
            regime: Regime::Finite,
            power: None,
        }
    } else if theta <= 0.5 {
        RegimeDescriptor {
            regime: Regime::Linear,
            power: None,
        }
    } else {
        RegimeDescriptor {
            regime: Regime::SublinearPower,
            power: Some((1.0 - theta) / (2.0 * theta - 1.0)),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub regime: Regime,
    #[serde(rename = "fitted_Q")]
    pub fitted_q: Option<f64>,
    pub fitted_power: Option<f64>,
    #[serde(rename = "C3_hat")]
    pub c3_hat: Option<f64>,
    pub fit_window: (usize, usize),
    /// RMS residual of the selected model, in decades.
    pub residual: f64,
    pub linear_residual: f64,
    pub sublinear_residual: f64,
}

/// Fits `log d = log c + k·log Q` and `log d = log c − p·log k` over the
/// window that drops the first 10% of iterations, and keeps the better one.
pub fn classify_distances(ks: &[usize], ds: &[f64]) -> Result<RateReport> {
    if ks.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            found: ds.len(),
        });
    }
    let Some(&k_last) = ks.last() else {
        return Err(Error::InsufficientData { found: 0, needed: 3 });
    };
    let k_min = (k_last as f64 * 0.1).ceil() as usize;
    let window: Vec<(usize, f64)> = ks
        .iter()
        .zip(ds)
        .filter(|(k, _)| **k >= k_min.max(1))
        .map(|(k, d)| (*k, *d))
        .collect();
    if window.len() < 3 {
        return Err(Error::InsufficientData {
            found: window.len(),
            needed: 3,
        });
    }
    let fit_window = (window[0].0, window.last().unwrap().0);
    if window.iter().any(|(_, d)| *d == 0.0) {
        return Ok(RateReport {
            regime: Regime::Finite,
            fitted_q: None,
            fitted_power: None,
            c3_hat: None,
            fit_window,
            residual: 0.0,
            linear_residual: 0.0,
            sublinear_residual: 0.0,
        });
    }
    let logd: Vec<f64> = window.iter().map(|(_, d)| d.log10()).collect();
    let kf: Vec<f64> = window.iter().map(|(k, _)| *k as f64).collect();
    let logk: Vec<f64> = kf.iter().map(|k| k.log10()).collect();
    let lin = least_squares(&kf, &logd);
    let sub = least_squares(&logk, &logd);
    let (regime, residual) = if lin.rms <= sub.rms {
        (Regime::Linear, lin.rms)
    } else {
        (Regime::SublinearPower, sub.rms)
    };
    let mut report = RateReport {
        regime,
        fitted_q: None,
        fitted_power: None,
        c3_hat: None,
        fit_window,
        residual,
        linear_residual: lin.rms,
        sublinear_residual: sub.rms,
    };
    match regime {
        Regime::Linear => {
            let q = 10f64.powf(lin.slope);
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::NotConverged(format!("fitted contraction factor {q} is not below 1")));
            }
            report.fitted_q = Some(q);
        }
        _ => {
            let power = -sub.slope;
            if !(power > 0.0) {
                return Err(Error::NotConverged(format!("fitted power {power} is not positive")));
            }
            report.fitted_power = Some(power);
            if (power - 0.5).abs() <= 0.1 {
                report.c3_hat = Some(window.iter().map(|(k, d)| d * (*k as f64).sqrt()).fold(0.0, f64::max));
            }
        }
    }
    Ok(report)
}

/// Distances from the stored iterates to `x*`, with their iteration indices.
pub fn distances(trace: &DescentTrace, x_star: &SpherePoint) -> Vec<(usize, f64)> {
    trace
        .iterate_indices
        .iter()
        .zip(&trace.iterates)
        .map(|(k, x)| (*k, x.distance(x_star)))
        .collect()
}

/// Rate of the trace towards `x_star`. The final iterate must lie within
/// [`RATE_CONVERGENCE_RADIUS`] of `x_star` and closer than at the start of
/// the fit window.
pub fn classify_rate(trace: &DescentTrace, x_star: &SpherePoint) -> Result<RateReport> {
    if x_star.dim() != trace.final_iterate().dim() {
        return Err(Error::DimensionMismatch {
            expected: trace.final_iterate().dim(),
            found: x_star.dim(),
        });
    }
    let dist = distances(trace, x_star);
    let (k_last, d_last) = *dist.last().unwrap();
    let k_min = (k_last as f64 * 0.1).ceil() as usize;
    let d_start = dist.iter().find(|(k, _)| *k >= k_min.max(1)).map_or(f64::INFINITY, |(_, d)| *d);
    if d_last > RATE_CONVERGENCE_RADIUS || (d_last > 0.0 && d_last >= d_start) {
        return Err(Error::NotConverged(format!(
            "final distance {d_last:.3e} to x* (window start {d_start:.3e}); trace has not converged"
        )));
    }
    let (ks, ds): (Vec<usize>, Vec<f64>) = dist.into_iter().unzip();
    classify_distances(&ks, &ds)
}

/// A seeded start point, uniform on the sphere.
pub fn random_start(n: usize, seed: u64) -> Result<SpherePoint> {
    use rand::Rng;
    let mut rng = crate::seed::rng_for(seed, "x0");
    let z: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    SpherePoint::normalize(z)
}

/// The enumerated stationary point nearest to `x`.
pub fn resolve_x_star(p: &Problem, x: &SpherePoint) -> Result<SpherePoint> {
    let set = enumerate_stationary(p, DEFAULT_TOL)?;
    let i = set
        .nearest(x)
        .ok_or_else(|| Error::NotApplicable("problem has no isolated stationary points".into()))?;
    Ok(set.points[i].x.clone())
}
