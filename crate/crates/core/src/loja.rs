//! Measurement of the Łojasiewicz gradient inequality
//! `|f(x) − f(x*)|^θ ≤ C·‖(I − xxᵀ)∇f(x)‖` near a stationary point.
//!
//! Samples are drawn on spherical caps around `x*`; each yields a pair
//! `(L, R)`. The exponent is read off the lower envelope of the cloud
//! `(log L, log R)`, which is where the inequality binds.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, sym_eigh, tangent_basis, DEFAULT_EIG_TOL};
use crate::problem::{Problem, SpherePoint};
use crate::seed::rng_for;
use crate::stationary::{StationaryPoint, SINGULAR_TOL};

/// Samples with `L` or `R` at or below this are discarded.
pub const CULL: f64 = 1e-15;
pub const ENVELOPE_BINS: usize = 20;
pub const MIN_ENVELOPE_POINTS: usize = 5;
pub const DEFAULT_SAMPLES: usize = 2000;
/// Bins holding fewer samples than this give a noisy envelope value.
pub const MIN_BIN_COUNT: usize = 10;
/// Geodesic samples per level along each null direction of `Φ`.
pub const NULL_PROBES: usize = 64;

/// Geometric schedule from `hi` down to `lo` with `levels` entries.
pub fn geometric_radii(hi: f64, lo: f64, levels: usize) -> Vec<f64> {
    if levels <= 1 {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (levels - 1) as f64;
    (0..levels).map(|i| hi * (step * i as f64).exp()).collect()
}

/// `10⁻¹ … 10⁻⁴` in seven levels.
pub fn default_radii() -> Vec<f64> {
    geometric_radii(1e-1, 1e-4, 7)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LojaSample {
    pub x: SpherePoint,
    /// `|f(x) − f(x*)|`
    pub l: f64,
    /// `‖(I − xxᵀ)∇f(x)‖`
    pub r: f64,
    /// Norm of the minimum-norm subgradient of `f + δ_S`.
    pub r_subgrad: f64,
    /// `‖x − x*‖`
    pub radius: f64,
}

/// `m` points `cos(t)·x* + sin(t)·d` with `d` uniform on the unit tangent
/// sphere and chord length `‖x − x*‖` uniform on `(0, radius]`.
pub fn sample_cap(x_star: &SpherePoint, radius: f64, m: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(Error::InvalidArgument(format!("cap radius {radius} outside (0, 1]")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let tb = tangent_basis(x_star.as_slice())?;
    let mut rng = rng_for(seed, "cap-samples");
    let xs = x_star.as_slice();
    (0..m)
        .map(|_| {
            let z: Vec<f64> = (0..tb.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let u: f64 = 1.0 - rng.random::<f64>();
            let d = tb.embed(&linalg::scale(&z, 1.0 / norm(&z)));
            let chord = radius * u * (1.0 - 1e-12);
            let t = 2.0 * (0.5 * chord).asin();
            let x = linalg::axpy(&linalg::scale(xs, t.cos()), t.sin(), &d);
            SpherePoint::normalize(x)
        })
        .collect()
}

/// `(L, R)` at `x` relative to the stationary point. `L` uses the exact
/// identity `f(x) − f(x*) = ½ΔᵀΦΔ`, which avoids cancellation at small radii.
pub fn measure(p: &Problem, sp: &StationaryPoint, x: &SpherePoint) -> Result<LojaSample> {
    let delta = linalg::sub(x.as_slice(), sp.x.as_slice());
    let phi_delta = linalg::axpy(&p.a().matvec(&delta), -sp.lambda, &delta);
    let l = (0.5 * dot(&delta, &phi_delta)).abs();
    let r = p.riemannian_grad(x)?.norm();
    let r_subgrad = p.min_norm_subgradient(x)?.norm();
    Ok(LojaSample {
        x: x.clone(),
        l,
        r,
        r_subgrad,
        radius: norm(&delta),
    })
}

/// Samples along the geodesic `cos(t)·x* + sin(t)·d`, ordered by `t`.
pub fn directional_probe(p: &Problem, sp: &StationaryPoint, d: &[f64], ts: &[f64]) -> Result<Vec<LojaSample>> {
    let xs = sp.x.as_slice();
    if d.len() != xs.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: d.len(),
        });
    }
    if dot(d, xs).abs() > 1e-10 || (norm(d) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("probe direction must be a unit tangent vector".into()));
    }
    let mut ts = ts.to_vec();
    if ts.iter().any(|t| !(*t > 0.0 && *t < std::f64::consts::FRAC_PI_2)) {
        return Err(Error::InvalidArgument("probe parameters must lie in (0, π/2)".into()));
    }
    ts.sort_by(f64::total_cmp);
    ts.iter()
        .map(|t| {
            let x = SpherePoint::normalize(linalg::axpy(&linalg::scale(xs, t.cos()), t.sin(), d))?;
            measure(p, sp, &x)
        })
        .collect()
}

/// Samples from every level of a radius schedule, tagged by level.
#[derive(Debug, Clone)]
pub struct CapScan {
    pub radii: Vec<f64>,
    pub m_per_radius: usize,
    pub seed: u64,
    /// `(level, sample)` for every sample, culled or not.
    pub samples: Vec<(usize, LojaSample)>,
    /// Smallest `L` reached at the outer radius along a null direction. Past
    /// it the slow directions drop out and the envelope is no longer the
    /// worst case, so the fit ignores larger `L`.
    pub l_cut: Option<f64>,
}

/// Largest ratio `L^p/R` among a level's shell samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRatio {
    pub radius: f64,
    pub count: usize,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LojaEstimate {
    pub theta_hat: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    /// Standard error of the fitted envelope slope.
    pub slope_stderr: f64,
    /// `(log₁₀ L, log₁₀ R)` per bin.
    pub envelope: Vec<[f64; 2]>,
    #[serde(rename = "radii")]
    pub radii_schedule: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

fn retained(s: &LojaSample) -> bool {
    s.l > CULL && s.r > CULL
}

/// Unit tangent directions at `x*` spanned by the null space of `Φ`. Random
/// caps almost never hit these, yet they carry the slowest growth of `R`.
fn null_directions(p: &Problem, sp: &StationaryPoint) -> Result<Vec<Vec<f64>>> {
    if !sp.phi_singular {
        return Ok(Vec::new());
    }
    let eig = sym_eigh(&p.phi_matrix(sp.lambda), DEFAULT_EIG_TOL)?;
    let tol = SINGULAR_TOL * (1.0 + p.a().frobenius_norm());
    let xs = sp.x.as_slice();
    let mut out = Vec::new();
    for (i, mu) in eig.eigvals.iter().enumerate() {
        if mu.abs() > tol {
            continue;
        }
        let d = linalg::project_out(xs, &eig.eigvec(i));
        let nd = norm(&d);
        if nd > 1e-6 {
            let d = linalg::scale(&d, 1.0 / nd);
            out.push(linalg::scale(&d, -1.0));
            out.push(d);
        }
    }
    Ok(out)
}

/// Draws `m_per_radius` cap samples at every radius. All levels share one
/// stream of directions and chord fractions, so the levels are rescaled
/// copies of each other. At singular points each level also gets
/// [`NULL_PROBES`] geodesic samples along every null direction of `Φ`.
pub fn scan_caps(p: &Problem, sp: &StationaryPoint, radii: &[f64], m_per_radius: usize, seed: u64) -> Result<CapScan> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("radius schedule is empty".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("radii must be strictly decreasing".into()));
    }
    if radii[0] > 0.5 {
        return Err(Error::InvalidArgument("radii must not exceed 0.5".into()));
    }
    let nulls = null_directions(p, sp)?;
    let mut l_cut = None;
    let mut samples = Vec::with_capacity(radii.len() * m_per_radius);
    for (level, &radius) in radii.iter().enumerate() {
        let mut xs = sample_cap(&sp.x, radius, m_per_radius, seed)?;
        for d in &nulls {
            for j in 1..=NULL_PROBES {
                let chord = radius * j as f64 / NULL_PROBES as f64 * (1.0 - 1e-12);
                let t = 2.0 * (0.5 * chord).asin();
                xs.push(SpherePoint::normalize(linalg::axpy(
                    &linalg::scale(sp.x.as_slice(), t.cos()),
                    t.sin(),
                    d,
                ))?);
            }
        }
        let measured = xs
            .par_iter()
            .map(|x| measure(p, sp, x))
            .collect::<Result<Vec<_>>>()?;
        if level == 0 {
            // the last probe of each direction sits at the outer radius
            l_cut = (1..=nulls.len())
                .map(|k| measured[m_per_radius + k * NULL_PROBES - 1].l)
                .reduce(f64::min);
        }
        samples.extend(measured.into_iter().map(|s| (level, s)));
    }
    Ok(CapScan {
        radii: radii.to_vec(),
        m_per_radius,
        seed,
        samples,
        l_cut,
    })
}

impl CapScan {
    pub fn retained(&self) -> impl Iterator<Item = &LojaSample> {
        self.samples.iter().map(|(_, s)| s).filter(|s| retained(s))
    }

    fn shell(&self, level: usize) -> (f64, f64) {
        let hi = self.radii[level];
        let lo = if level + 1 < self.radii.len() {
            self.radii[level + 1]
        } else if level > 0 {
            hi * hi / self.radii[level - 1]
        } else {
            0.0
        };
        (lo, hi)
    }

    /// Per level, the maximum of `L^p/R` over retained samples whose chord
    /// lies in the shell between this radius and the next smaller one.
    pub fn ratio_profile(&self, p: f64) -> Vec<LevelRatio> {
        (0..self.radii.len())
            .map(|level| {
                let (lo, hi) = self.shell(level);
                let ratios: Vec<f64> = self
                    .samples
                    .iter()
                    .filter(|(lv, s)| *lv == level && retained(s) && s.radius > lo && s.radius <= hi)
                    .map(|(_, s)| s.l.powf(p) / s.r)
                    .collect();
                LevelRatio {
                    radius: self.radii[level],
                    count: ratios.len(),
                    max_ratio: ratios.iter().cloned().reduce(f64::max),
                }
            })
            .collect()
    }

    /// The ratio `L^p/R` stays bounded as the radius shrinks: no level
    /// exceeds the running maximum of the larger levels by more than 10%.
    pub fn ratio_bounded(&self, p: f64) -> bool {
        let mut running: Option<f64> = None;
        for lv in self.ratio_profile(p) {
            let Some(v) = lv.max_ratio else { continue };
            if !v.is_finite() {
                return false;
            }
            if let Some(m) = running {
                if v > 1.1 * m {
                    return false;
                }
            }
            running = Some(running.map_or(v, |m| m.max(v)));
        }
        running.is_some()
    }

    /// Lower-envelope regression `log L = a·log R + b`, giving `θ = 1/a`.
    pub fn estimate(&self) -> Result<LojaEstimate> {
        let pts: Vec<(f64, f64, &LojaSample)> = self
            .retained()
            .map(|s| (s.l.log10(), s.r.log10(), s))
            .collect();
        let cut = self.l_cut.map_or(f64::INFINITY, |c| c.log10());
        let fit_pts: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 <= cut).map(|p| (p.0, p.1)).collect();
        if fit_pts.is_empty() {
            return Err(Error::InsufficientData {
                found: 0,
                needed: MIN_ENVELOPE_POINTS,
            });
        }
        let lmin = fit_pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let lmax = fit_pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let width = (lmax - lmin) / ENVELOPE_BINS as f64;
        let mut bins: Vec<Option<(f64, f64)>> = vec![None; ENVELOPE_BINS];
        let mut counts = vec![0usize; ENVELOPE_BINS];
        for &(ll, lr) in &fit_pts {
            let b = if width > 0.0 {
                (((ll - lmin) / width) as usize).min(ENVELOPE_BINS - 1)
            } else {
                0
            };
            counts[b] += 1;
            match bins[b] {
                Some((_, best)) if best <= lr => {}
                _ => bins[b] = Some((ll, lr)),
            }
        }
        let envelope: Vec<[f64; 2]> = bins
            .into_iter()
            .zip(counts)
            .filter(|(_, c)| *c >= MIN_BIN_COUNT)
            .filter_map(|(b, _)| b.map(|(a, b)| [a, b]))
            .collect();
        if envelope.len() < MIN_ENVELOPE_POINTS {
            return Err(Error::InsufficientData {
                found: envelope.len(),
                needed: MIN_ENVELOPE_POINTS,
            });
        }
        let fit = least_squares(
            &envelope.iter().map(|e| e[1]).collect::<Vec<_>>(),
            &envelope.iter().map(|e| e[0]).collect::<Vec<_>>(),
        );
        let theta_hat = 1.0 / fit.slope;
        if !(theta_hat > 0.0 && theta_hat < 1.0) {
            return Err(Error::NotApplicable(format!(
                "envelope slope {:.4} gives an exponent outside (0, 1)",
                fit.slope
            )));
        }
        let c_hat = pts
            .iter()
            .map(|(_, _, s)| s.l.powf(theta_hat) / s.r)
            .fold(0.0, f64::max);
        Ok(LojaEstimate {
            theta_hat,
            c_hat,
            slope_stderr: fit.slope_stderr,
            envelope,
            radii_schedule: self.radii.clone(),
            n_samples: pts.len(),
            seed: self.seed,
        })
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Root mean square residual.
    pub rms: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if x.len() > 2 {
        (sse / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        rms: (sse / k).sqrt(),
    }
}

/// Scans the caps and fits the lower envelope.
pub fn estimate_exponent(
    p: &Problem,
    sp: &StationaryPoint,
    radii: &[f64],
    m_per_radius: usize,
    seed: u64,
) -> Result<LojaEstimate> {
    scan_caps(p, sp, radii, m_per_radius, seed)?.estimate()
}

/// Split of `Δ = x − x*` into `δ ∈ null(Φ)` and `η ∈ range(Φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDecomposition {
    pub delta_cap: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    /// `x*ᵀΦη` when `Φη` is parallel to `x*`.
    pub xi: Option<f64>,
    /// `‖(I − x*x*ᵀ)Φη‖`
    pub residual_perp: f64,
    /// `‖Φη‖`
    pub phi_eta_norm: f64,
}

/// Decomposes `x − x*` against the null space of `Φ = A − λ*I`.
pub fn case3_decompose(p: &Problem, sp: &StationaryPoint, x: &SpherePoint) -> Result<CaseDecomposition> {
    if !sp.phi_singular {
        return Err(Error::NotApplicable("Φ is nonsingular at this point".into()));
    }
    let phi = p.phi_matrix(sp.lambda);
    let eig = sym_eigh(&phi, DEFAULT_EIG_TOL)?;
    let tol = SINGULAR_TOL * (1.0 + p.a().frobenius_norm());
    let xs = sp.x.as_slice();
    let delta_cap = linalg::sub(x.as_slice(), xs);
    let mut delta = vec![0.0; xs.len()];
    for (i, mu) in eig.eigvals.iter().enumerate() {
        if mu.abs() <= tol {
            let u = eig.eigvec(i);
            delta = linalg::axpy(&delta, dot(&u, &delta_cap), &u);
        }
    }
    let eta = linalg::sub(&delta_cap, &delta);
    let phi_eta = phi.matvec(&eta);
    let phi_eta_norm = norm(&phi_eta);
    let residual_perp = norm(&linalg::project_out(xs, &phi_eta));
    let xi = (residual_perp <= 1e-8 * phi_eta_norm).then(|| dot(xs, &phi_eta));
    Ok(CaseDecomposition {
        delta_cap,
        delta,
        eta,
        xi,
        residual_perp,
        phi_eta_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    /// `(σ_max/2)‖η‖²`
    pub upper_l: f64,
    /// `√2·σ₊^{3/2}/σ_max·‖η‖^{3/2}`
    pub lower_r: f64,
    /// `(2σ₊/σ_max·‖η‖, 2‖η‖)`, bracketing `‖Δ‖²`.
    pub delta_bounds: (f64, f64),
}

/// Explicit bounds available when `Φη = ξx*` with `ξ ≠ 0`.
pub fn theoretical_bounds(_p: &Problem, sp: &StationaryPoint, decomp: &CaseDecomposition) -> Result<TheoreticalBounds> {
    let smax = sp.sigma_max;
    let splus = sp.sigma_plus;
    match decomp.xi {
        Some(xi) if xi.abs() > 1e-12 * smax => {}
        _ => {
            return Err(Error::NotApplicable(
                "direction is not in the Φη = ξx*, ξ ≠ 0 geometry".into(),
            ))
        }
    }
    let e = norm(&decomp.eta);
    Ok(TheoreticalBounds {
        upper_l: 0.5 * smax * e * e,
        lower_r: std::f64::consts::SQRT_2 * splus.powf(1.5) / smax * e.powf(1.5),
        delta_bounds: (2.0 * splus / smax * e, 2.0 * e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::problem::{make_case3, make_example1};
    use crate::stationary::{enumerate_stationary, DEFAULT_TOL};
    use proptest::prelude::*;

    fn point_near(p: &Problem, x: &[f64]) -> StationaryPoint {
        let set = enumerate_stationary(p, DEFAULT_TOL).unwrap();
        let target = SpherePoint::normalize(x.to_vec()).unwrap();
        set.points[set.nearest(&target).unwrap()].clone()
    }

    #[test]
    fn cap_samples_respect_radius_and_seed() {
        let xs = SpherePoint::basis(2, 1);
        let a = sample_cap(&xs, 1e-3, 50, 4).unwrap();
        let b = sample_cap(&xs, 1e-3, 50, 4).unwrap();
        assert_eq!(a, b);
        for x in &a {
            assert!(x.distance(&xs) <= 1e-3);
            assert!((norm(x.as_slice()) - 1.0).abs() < 1e-15);
        }
        assert!(sample_cap(&xs, 1.5, 5, 0).is_err());
        assert!(sample_cap(&xs, 0.1, 0, 0).is_err());
    }

    #[test]
    fn measure_at_star_is_zero() {
        let p = make_example1();
        let sp = point_near(&p, &[0.0, 1.0]);
        let s = measure(&p, &sp, &sp.x).unwrap();
        assert_eq!((s.l, s.r), (0.0, 0.0));
    }

    #[test]
    fn measure_example1_closed_form() {
        let p = make_example1();
        let sp = point_near(&p, &[0.0, 1.0]);
        let t: f64 = 0.1;
        let x = SpherePoint::normalize(vec![t.sin(), t.cos()]).unwrap();
        let s = measure(&p, &sp, &x).unwrap();
        let l = (1.0 - t.cos()).powi(2) / 2.0;
        let r = (1.0 - t.cos()) * t.sin();
        assert!((s.l - l).abs() <= 1e-12 * l);
        assert!((s.r - r).abs() <= 1e-10 * r);
        assert!((s.l - 1.2479e-5).abs() < 1e-9);
        assert!((s.r - 4.9875e-4).abs() < 1e-8);
        assert!(s.r_subgrad >= s.r);
    }

    #[test]
    fn probe_matches_curve() {
        let p = make_example1();
        let sp = point_near(&p, &[0.0, 1.0]);
        let ts = [0.3, 0.01, 0.1];
        let samples = directional_probe(&p, &sp, &[1.0, 0.0], &ts).unwrap();
        for (s, t) in samples.iter().zip([0.01f64, 0.1, 0.3]) {
            assert!((s.x.as_slice()[0] - t.sin()).abs() < 1e-15);
            assert!((s.l - (1.0 - t.cos()).powi(2) / 2.0).abs() < 1e-15);
        }
        assert!(directional_probe(&p, &sp, &[0.6, 0.8], &ts).is_err());
        assert!(directional_probe(&p, &sp, &[1.0, 0.0], &[2.0]).is_err());
    }

    #[test]
    fn probe_gzero_scaling() {
        let p = Problem::new(SymMatrix::from_diag(&[1.0, 2.0]), vec![0.0; 2]).unwrap();
        let sp = point_near(&p, &[1.0, 0.0]);
        for s in directional_probe(&p, &sp, &[0.0, 1.0], &[1e-3, 1e-2, 1e-1]).unwrap() {
            let st = s.x.as_slice()[1];
            let ct = s.x.as_slice()[0];
            assert!((s.l - 0.5 * st * st).abs() < 1e-15);
            assert!((s.r - (st * ct).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn null_direction_probe_has_zero_l() {
        // A = diag(1, 1, 3), g = 0: at e₁ the eigenspace of 1 is flat
        let p = Problem::new(SymMatrix::from_diag(&[1.0, 1.0, 3.0]), vec![0.0; 3]).unwrap();
        let sp = StationaryPoint {
            x: SpherePoint::basis(3, 0),
            ..point_near(&p, &[1.0, 0.0, 0.0])
        };
        for s in directional_probe(&p, &sp, &[0.0, 1.0, 0.0], &[1e-3, 0.1, 1.0]).unwrap() {
            assert!(s.l < 1e-16);
        }
    }

    #[test]
    fn example1_exponents() {
        let p = make_example1();
        let top = point_near(&p, &[0.0, 1.0]);
        let est = estimate_exponent(&p, &top, &[1e-1, 1e-2, 1e-3], 2000, 1).unwrap();
        assert!((est.theta_hat - 0.75).abs() <= 0.03, "{}", est.theta_hat);
        let bottom = point_near(&p, &[0.0, -1.0]);
        let est = estimate_exponent(&p, &bottom, &default_radii(), 2000, 1).unwrap();
        assert!((est.theta_hat - 0.5).abs() <= 0.03, "{}", est.theta_hat);
    }

    #[test]
    fn example1_constant_limit() {
        let p = make_example1();
        let top = point_near(&p, &[0.0, 1.0]);
        let scan = scan_caps(&p, &top, &default_radii(), 2000, 2).unwrap();
        let prof = scan.ratio_profile(0.75);
        let last = prof.iter().rev().find_map(|l| l.max_ratio).unwrap();
        assert!((last - 2f64.powf(-1.25)).abs() < 1e-3 * 2f64.powf(-1.25), "{last}");
        assert!(scan.ratio_bounded(0.75));
        assert!(!scan.ratio_bounded(0.5));
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let p = make_example1();
        let top = point_near(&p, &[0.0, 1.0]);
        assert!(matches!(
            estimate_exponent(&p, &point_near(&p, &[0.0, -1.0]), &[1e-1], 3, 0),
            Err(Error::InsufficientData { .. })
        ));
        assert!(estimate_exponent(&p, &top, &[1e-2, 1e-1], 10, 0).is_err());
    }

    #[test]
    fn example1_decomposition() {
        let p = make_example1();
        let top = point_near(&p, &[0.0, 1.0]);
        for t in [1e-3f64, 1e-2, 0.2] {
            let x = SpherePoint::normalize(vec![t.sin(), t.cos()]).unwrap();
            let d = case3_decompose(&p, &top, &x).unwrap();
            assert!((d.delta[0] - t.sin()).abs() < 1e-15 && d.delta[1] == 0.0);
            assert!(d.eta[0] == 0.0 && (d.eta[1] - (t.cos() - 1.0)).abs() < 1e-15);
            let xi = d.xi.unwrap();
            assert!((xi - (t.cos() - 1.0)).abs() < 1e-15);
            // −2ηᵀx* = ‖δ‖² + ‖η‖²
            let lhs = -2.0 * dot(&d.eta, top.x.as_slice());
            assert!((lhs - dot(&d.delta, &d.delta) - dot(&d.eta, &d.eta)).abs() < 1e-12);
            let b = theoretical_bounds(&p, &top, &d).unwrap();
            let e = norm(&d.eta);
            let dd = dot(&d.delta_cap, &d.delta_cap);
            assert!((dd - 2.0 * e).abs() < 1e-15);
            assert!((b.delta_bounds.0 - b.delta_bounds.1).abs() < 1e-18);
            let s = measure(&p, &top, &x).unwrap();
            assert!((b.upper_l - s.l).abs() <= 1e-12 * s.l);
            assert!(s.r >= b.lower_r * (1.0 - t));
        }
        let d = case3_decompose(&p, &top, &top.x).unwrap();
        assert!(d.delta.iter().chain(&d.eta).all(|v| *v == 0.0));
        assert!(theoretical_bounds(&p, &top, &d).is_err());
        let bottom = point_near(&p, &[0.0, -1.0]);
        assert!(case3_decompose(&p, &bottom, &bottom.x).is_err());
    }

    #[test]
    fn case3_worst_direction_bounds() {
        for seed in 0..3 {
            let inst = make_case3(4, seed, -0.4).unwrap();
            let sp = point_near(&inst.problem, inst.x_star.as_slice());
            let s = &directional_probe(&inst.problem, &sp, &inst.null_direction, &[1e-3]).unwrap()[0];
            let d = case3_decompose(&inst.problem, &sp, &s.x).unwrap();
            let b = theoretical_bounds(&inst.problem, &sp, &d).unwrap();
            assert!(s.l <= b.upper_l * (1.0 + 1e-8));
            assert!(s.r >= 0.8 * b.lower_r, "{} {}", s.r, b.lower_r);
        }
    }

    #[test]
    fn case3_exponent_and_tightness() {
        for seed in 0..2 {
            let inst = make_case3(4, seed, 0.3).unwrap();
            let sp = point_near(&inst.problem, inst.x_star.as_slice());
            assert_eq!(sp.predicted_theta, 0.75);
            let scan = scan_caps(&inst.problem, &sp, &geometric_radii(1e-1, 1e-3, 5), 1000, seed).unwrap();
            let est = scan.estimate().unwrap();
            assert!((est.theta_hat - 0.75).abs() < 0.03, "{}", est.theta_hat);
            let prof = scan.ratio_profile(0.5);
            let first = prof[0].max_ratio.unwrap();
            let last = prof.last().unwrap().max_ratio.unwrap();
            assert!(last >= 5.0 * first, "{first} {last}");
            assert!(scan.ratio_bounded(0.75));
            assert!(!scan.ratio_bounded(0.5));
        }
    }

    #[test]
    fn estimate_is_deterministic() {
        let p = crate::problem::make_random(5, 3, (-1.0, 1.0), 1.0).unwrap();
        let sp = point_near(&p, &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let a = estimate_exponent(&p, &sp, &default_radii(), 300, 9).unwrap();
        let b = estimate_exponent(&p, &sp, &default_radii(), 300, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.theta_hat > 0.0 && a.theta_hat < 1.0);
    }

    #[test]
    fn c_hat_dominates_every_retained_sample() {
        let p = make_example1();
        let sp = point_near(&p, &[0.0, 1.0]);
        let scan = scan_caps(&p, &sp, &default_radii(), 500, 5).unwrap();
        let est = scan.estimate().unwrap();
        for s in scan.retained() {
            assert!(s.l.powf(est.theta_hat) <= est.c_hat * (1.0 + 1e-6) * s.r);
        }
    }

    #[test]
    fn scan_rejects_bad_schedules() {
        let p = make_example1();
        let sp = point_near(&p, &[0.0, 1.0]);
        assert!(scan_caps(&p, &sp, &[], 10, 0).is_err());
        assert!(scan_caps(&p, &sp, &[0.6, 0.1], 10, 0).is_err());
        assert!(scan_caps(&p, &sp, &[0.1, 0.1], 10, 0).is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = least_squares(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_invariants(seed in 0u64..10_000, n in 3usize..7, lam in -1.0f64..1.0, r in 1e-4f64..0.3) {
            let inst = make_case3(n, seed, lam).unwrap();
            let sp = point_near(&inst.problem, inst.x_star.as_slice());
            let x = sample_cap(&sp.x, r, 1, seed).unwrap().pop().unwrap();
            let d = case3_decompose(&inst.problem, &sp, &x).unwrap();
            let phi = inst.problem.phi_matrix(sp.lambda);
            let scale = 1.0 + phi.frobenius_norm();
            for i in 0..n {
                prop_assert!((d.delta[i] + d.eta[i] - d.delta_cap[i]).abs() <= 1e-12);
            }
            for v in phi.matvec(&d.delta) {
                prop_assert!(v.abs() <= 1e-9 * scale);
            }
            prop_assert!(dot(&d.eta, &d.delta).abs() <= 1e-10);
            prop_assert!(norm(&phi.matvec(&d.eta)) >= sp.sigma_plus * norm(&d.eta) * (1.0 - 1e-8));
            let s = measure(&inst.problem, &sp, &x).unwrap();
            let f = inst.problem.objective(&x).unwrap() - inst.problem.objective(&sp.x).unwrap();
            let half = 0.5 * dot(&d.eta, &phi.matvec(&d.eta));
            prop_assert!((s.l - half.abs()).abs() <= 1e-10 * s.l.max(1e-300));
            prop_assert!((f - half).abs() <= 1e-10 * half.abs() + 1e-13, "{} {}", f, half);
            prop_assert!(s.r_subgrad >= s.r && s.radius <= r);
        }
    }
}
