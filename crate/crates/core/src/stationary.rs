//! Enumeration of all stationary points through the secular equation, and
//! their classification by the spectrum of the shifted matrix `Φ = A − λI`.
//!
//! In the eigenbasis `A = QΛQᵀ`, `ĝ = Qᵀg`, a stationary point satisfies
//! `(λᵢ − λ)x̂ᵢ = −ĝᵢ` with `‖x̂‖ = 1`. Eigenvalue clusters carrying some
//! weight of `ĝ` become poles of `ψ(λ) = Σ ĝᵢ²/(λ − λᵢ)²`, and each root of
//! `ψ(λ) = 1` gives one point. Clusters orthogonal to `g` additionally allow
//! `λ` to sit exactly on their eigenvalue (the hard case), where the
//! component inside the eigenspace is free up to a residual radius.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, restrict_to_tangent, sym_eigh, EigenDecomp, CLUSTER_GAP, DEFAULT_EIG_TOL};
use crate::problem::{Problem, SpherePoint};

/// Default enumeration tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// `|ĝᵢ| ≤ ZERO_WEIGHT·(1 + ‖g‖₂)` routes coordinate `i` to the degenerate branch.
pub const ZERO_WEIGHT: f64 = 1e-10;
/// Singularity threshold for `Φ`, scaled by `1 + ‖A‖_F`.
pub const SINGULAR_TOL: f64 = 1e-8;
/// Points closer than this are treated as one.
pub const DEDUP_DIST: f64 = 1e-6;
/// KKT residual bound, scaled by `1 + ‖A‖_F + ‖g‖₂`.
pub const KKT_TOL: f64 = 1e-9;

const POLE_GUARD: f64 = 1e-12;
const TANGENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    /// `Φ` nonsingular.
    #[serde(rename = "CaseI")]
    CaseI,
    /// `Φ` singular and `g ≠ 0`; the exponent-3/4 geometry is possible.
    #[serde(rename = "CaseIII_possible")]
    CaseIIIPossible,
    /// `Φ` singular with `g = 0`.
    #[serde(rename = "g_zero")]
    GZero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    #[serde(serialize_with = "ser_point")]
    pub x: SpherePoint,
    pub lambda: f64,
    pub f_value: f64,
    pub sigma_plus: f64,
    pub sigma_max: f64,
    pub phi_singular: bool,
    pub case_tag: CaseTag,
    pub corollary2_holds: bool,
    pub predicted_theta: f64,
    pub is_isolated: bool,
}

fn ser_point<S: serde::Serializer>(x: &SpherePoint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.as_slice())
}

impl StationaryPoint {
    pub fn kkt_residual(&self, p: &Problem) -> f64 {
        let g = p.grad_raw(self.x.as_slice());
        norm(&linalg::axpy(&g, -self.lambda, self.x.as_slice()))
    }
}

/// A non-isolated family `{center + r·u : u unit in span(basis)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuumFamily {
    pub eigenvalue: f64,
    pub basis: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ContinuumFamily {
    /// Euclidean distance from `x` to the family.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let rel = linalg::sub(x, &self.center);
        let coords: Vec<f64> = self.basis.iter().map(|b| linalg::dot(b, &rel)).collect();
        let mut inside = vec![0.0; x.len()];
        for (c, b) in coords.iter().zip(&self.basis) {
            inside = linalg::axpy(&inside, *c, b);
        }
        let outside = linalg::sub(&rel, &inside);
        let radial = norm(&coords) - self.radius;
        (linalg::dot(&outside, &outside) + radial * radial).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySet {
    pub points: Vec<StationaryPoint>,
    pub has_continuum: bool,
    pub continuum_descriptions: Vec<ContinuumFamily>,
}

impl StationarySet {
    pub fn global_minimizer(&self) -> Option<&StationaryPoint> {
        self.points.first()
    }

    /// Index of the point nearest to `x`.
    pub fn nearest(&self, x: &SpherePoint) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.x.distance(x).total_cmp(&b.1.x.distance(x)))
            .map(|(i, _)| i)
    }
}

/// A located stationary point awaiting classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: SpherePoint,
    pub is_isolated: bool,
}

/// Classifies stationary points of one problem, reusing the spectrum of `A`.
pub struct Classifier<'a> {
    problem: &'a Problem,
    eig: EigenDecomp,
    singular_tol: f64,
}

impl<'a> Classifier<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        let eig = sym_eigh(problem.a(), DEFAULT_EIG_TOL)?;
        Ok(Self::with_eigen(problem, eig))
    }

    pub fn with_eigen(problem: &'a Problem, eig: EigenDecomp) -> Self {
        let singular_tol = SINGULAR_TOL * (1.0 + problem.a().frobenius_norm());
        Self {
            problem,
            eig,
            singular_tol,
        }
    }

    pub fn singular_tol(&self) -> f64 {
        self.singular_tol
    }

    pub fn classify(&self, cand: Candidate) -> Result<StationaryPoint> {
        let p = self.problem;
        let lambda = p.multiplier(&cand.x)?;
        let f_value = p.objective(&cand.x)?;
        let tol = self.singular_tol;

        let abs_mu: Vec<f64> = self.eig.eigvals.iter().map(|l| (l - lambda).abs()).collect();
        let sigma_max = abs_mu.iter().cloned().fold(0.0, f64::max);
        let sigma_plus = abs_mu.iter().cloned().filter(|m| *m > tol).fold(f64::INFINITY, f64::min);
        let sigma_plus = if sigma_plus.is_finite() { sigma_plus } else { 0.0 };
        let phi_singular = abs_mu.iter().any(|m| *m <= tol);

        let phi = p.phi_matrix(lambda);
        let restricted = restrict_to_tangent(&phi, cand.x.as_slice())?;
        let rev = sym_eigh(&restricted, DEFAULT_EIG_TOL)?.eigvals;
        let corollary2_holds = rev.iter().all(|v| *v > tol) || rev.iter().all(|v| *v < -tol);

        let g_zero = p.g_is_zero();
        let case_tag = match (phi_singular, g_zero) {
            (false, _) => CaseTag::CaseI,
            (true, true) => CaseTag::GZero,
            (true, false) => CaseTag::CaseIIIPossible,
        };
        let predicted_theta = predicted_theta(phi_singular, g_zero, corollary2_holds);
        Ok(StationaryPoint {
            x: cand.x,
            lambda,
            f_value,
            sigma_plus,
            sigma_max,
            phi_singular,
            case_tag,
            corollary2_holds,
            predicted_theta,
            is_isolated: cand.is_isolated,
        })
    }
}

/// Exponent predicted for a stationary point: ½ when `Φ` is nonsingular,
/// `g = 0`, or `dᵀΦd ≠ 0` on the whole tangent space; ¾ otherwise.
pub fn predicted_theta(phi_singular: bool, g_zero: bool, corollary2_holds: bool) -> f64 {
    if !phi_singular || g_zero || corollary2_holds {
        0.5
    } else {
        0.75
    }
}

/// Classifies a single located point.
pub fn classify(p: &Problem, cand: Candidate) -> Result<StationaryPoint> {
    Classifier::new(p)?.classify(cand)
}

struct Secular<'a> {
    eigvals: &'a [f64],
    ghat: &'a [f64],
}

impl Secular<'_> {
    fn psi(&self, lambda: f64) -> f64 {
        self.eigvals
            .iter()
            .zip(self.ghat)
            .map(|(l, g)| {
                let d = lambda - l;
                g * g / (d * d)
            })
            .sum()
    }

    fn dpsi(&self, lambda: f64) -> f64 {
        self.eigvals
            .iter()
            .zip(self.ghat)
            .map(|(l, g)| {
                let d = lambda - l;
                -2.0 * g * g / (d * d * d)
            })
            .sum()
    }
}

/// Root of a monotone function on `[lo, hi]` with `f(lo)` and `f(hi)` of
/// opposite sign: bisection brackets with safeguarded Newton steps.
fn solve_bracketed(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let (a0, b0) = (lo, hi);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootNonConvergence { lo: a0, hi: b0 });
    }
    let lo_sign = flo.signum();
    let mut x = 0.5 * (lo + hi);
    let mut width = hi - lo;
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 || fx.abs() <= 4.0 * f64::EPSILON {
            return Ok(x);
        }
        if fx.signum() == lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(x);
        }
        let new_width = hi - lo;
        let d = df(x);
        let newton = x - fx / d;
        x = if d.is_finite() && d != 0.0 && newton > lo && newton < hi && new_width < 0.5 * width {
            newton
        } else {
            mid
        };
        width = new_width;
    }
    Err(Error::RootNonConvergence { lo: a0, hi: b0 })
}

/// Minimizer of the convex function `ψ` on `(lo, hi)` via bisection on `ψ'`.
fn psi_minimizer(sec: &Secular<'_>, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if sec.dpsi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn guard(v: f64) -> f64 {
    POLE_GUARD * (1.0 + v.abs())
}

/// All multipliers `λ` solving `ψ(λ) = 1`, given the spans of the weighted
/// eigenvalue clusters (ascending).
fn secular_roots(sec: &Secular<'_>, spans: &[(f64, f64)], wsum: f64) -> Result<Vec<f64>> {
    let mut roots = Vec::new();
    let h = |l: f64| sec.psi(l) - 1.0;
    let dh = |l: f64| sec.dpsi(l);
    let Some(&(first_lo, _)) = spans.first() else {
        return Ok(roots);
    };
    let &(_, last_hi) = spans.last().expect("nonempty");
    let reach = wsum.sqrt() * (1.0 + 1e-12) + guard(first_lo.abs().max(last_hi.abs()));

    // (−∞, first pole): ψ increases from 0 to ∞
    let lo = first_lo - reach;
    let hi = first_lo - guard(first_lo);
    roots.push(solve_bracketed(h, dh, lo, hi)?);

    for w in spans.windows(2) {
        let a = w[0].1 + guard(w[0].1);
        let b = w[1].0 - guard(w[1].0);
        if a >= b {
            continue;
        }
        let m = psi_minimizer(sec, a, b);
        let pm = sec.psi(m);
        if pm > 1.0 + TANGENCY_TOL {
            continue;
        }
        if pm >= 1.0 {
            roots.push(m);
            continue;
        }
        roots.push(solve_bracketed(h, dh, a, m)?);
        roots.push(solve_bracketed(h, dh, m, b)?);
    }

    // (last pole, ∞): ψ decreases from ∞ to 0
    let lo = last_hi + guard(last_hi);
    let hi = last_hi + reach;
    roots.push(solve_bracketed(h, dh, lo, hi)?);
    Ok(roots)
}

/// Enumerates every stationary point of `p`, sorted by objective value.
///
/// Continuum families (eigenspaces of dimension at least two orthogonal to
/// `g` with a positive residual radius) are reported by description plus
/// `2·dim` representative points marked non-isolated.
pub fn enumerate_stationary(p: &Problem, tol: f64) -> Result<StationarySet> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidArgument(format!("tolerance {tol:e} outside (0, 1e-6]")));
    }
    let n = p.n();
    let eig = sym_eigh(p.a(), DEFAULT_EIG_TOL)?;
    let anorm = p.a().frobenius_norm();
    let gnorm = norm(p.g());
    let mut ghat = eig.to_eigenbasis(p.g());
    let zero_thresh = ZERO_WEIGHT * (1.0 + gnorm);
    let clusters = eig.clusters(CLUSTER_GAP * (1.0 + anorm));

    let mut weighted = Vec::new();
    let mut degenerate = Vec::new();
    for c in &clusters {
        if ghat[c.clone()].iter().all(|v| v.abs() <= zero_thresh) {
            ghat[c.clone()].iter_mut().for_each(|v| *v = 0.0);
            degenerate.push(c.clone());
        } else {
            weighted.push(c.clone());
        }
    }

    let sec = Secular {
        eigvals: &eig.eigvals,
        ghat: &ghat,
    };
    let spans: Vec<(f64, f64)> = weighted
        .iter()
        .map(|c| (eig.eigvals[c.start], eig.eigvals[c.end - 1]))
        .collect();
    let wsum: f64 = ghat.iter().map(|g| g * g).sum();

    let mut candidates = Vec::new();
    for lambda in secular_roots(&sec, &spans, wsum)? {
        let xhat: Vec<f64> = (0..n)
            .map(|i| if ghat[i] == 0.0 { 0.0 } else { -ghat[i] / (eig.eigvals[i] - lambda) })
            .collect();
        candidates.push(Candidate {
            x: SpherePoint::normalize(eig.from_eigenbasis(&xhat))?,
            is_isolated: true,
        });
    }

    let mut families = Vec::new();
    for c in &degenerate {
        let k = c.len();
        let value = eig.eigvals[c.clone()].iter().sum::<f64>() / k as f64;
        let fixed: Vec<f64> = (0..n)
            .map(|i| if ghat[i] == 0.0 { 0.0 } else { -ghat[i] / (eig.eigvals[i] - value) })
            .collect();
        let r2 = 1.0 - linalg::dot(&fixed, &fixed);
        if r2 < -tol {
            continue;
        }
        if r2 <= tol {
            candidates.push(Candidate {
                x: SpherePoint::normalize(eig.from_eigenbasis(&fixed))?,
                is_isolated: true,
            });
            continue;
        }
        let r = r2.sqrt();
        let isolated = k < 2;
        for j in c.clone() {
            for s in [1.0, -1.0] {
                let mut xhat = fixed.clone();
                xhat[j] += s * r;
                candidates.push(Candidate {
                    x: SpherePoint::normalize(eig.from_eigenbasis(&xhat))?,
                    is_isolated: isolated,
                });
            }
        }
        if !isolated {
            families.push(ContinuumFamily {
                eigenvalue: value,
                basis: c.clone().map(|j| eig.eigvec(j)).collect(),
                center: eig.from_eigenbasis(&fixed),
                radius: r,
            });
        }
    }

    let classifier = Classifier::with_eigen(p, eig);
    let points = candidates
        .into_par_iter()
        .map(|c| classifier.classify(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(StationarySet {
        points: dedup_sorted(points),
        has_continuum: !families.is_empty(),
        continuum_descriptions: families,
    })
}

/// Sorts by objective (ties broken lexicographically on `x`) and merges
/// points within [`DEDUP_DIST`].
pub(crate) fn dedup_sorted(mut points: Vec<StationaryPoint>) -> Vec<StationaryPoint> {
    points.sort_by(|a, b| {
        a.f_value.total_cmp(&b.f_value).then_with(|| {
            a.x.as_slice()
                .iter()
                .zip(b.x.as_slice())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut kept: Vec<StationaryPoint> = Vec::with_capacity(points.len());
    for pt in points {
        if let Some(k) = kept.iter_mut().find(|k| k.x.distance(&pt.x) <= DEDUP_DIST) {
            k.is_isolated &= pt.is_isolated;
        } else {
            kept.push(pt);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::problem::{make_case3, make_example1, make_random};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn example1_has_two_points() {
        let p = make_example1();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        assert_eq!(set.points.len(), 2);
        let (a, b) = (&set.points[0], &set.points[1]);
        assert!(close(a.x.as_slice(), &[0.0, 1.0], 1e-12));
        assert!(a.lambda.abs() < 1e-12);
        assert!(a.f_value.abs() < 1e-12);
        assert!(close(b.x.as_slice(), &[0.0, -1.0], 1e-12));
        assert!((b.lambda - 2.0).abs() < 1e-12);
        assert!((b.f_value - a.f_value - 2.0).abs() < 1e-12);
        assert!(!set.has_continuum);
    }

    #[test]
    fn example1_classification() {
        let p = make_example1();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        let min = &set.points[0];
        assert!(min.phi_singular);
        assert_eq!(min.case_tag, CaseTag::CaseIIIPossible);
        assert!(!min.corollary2_holds);
        assert_eq!(min.predicted_theta, 0.75);
        let max = &set.points[1];
        assert!(!max.phi_singular);
        assert_eq!(max.case_tag, CaseTag::CaseI);
        assert_eq!(max.predicted_theta, 0.5);
        assert!((max.sigma_plus - 1.0).abs() < 1e-12);
        assert!((max.sigma_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gzero_points() {
        let p = Problem::new(SymMatrix::from_diag(&[1.0, 2.0]), vec![0.0; 2]).unwrap();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        assert_eq!(set.points.len(), 4);
        for pt in &set.points[..2] {
            assert!((pt.lambda - 1.0).abs() < 1e-14);
            assert!(pt.x.as_slice()[0].abs() > 1.0 - 1e-14);
            assert_eq!(pt.case_tag, CaseTag::GZero);
            assert_eq!(pt.predicted_theta, 0.5);
        }
        for pt in &set.points[2..] {
            assert!((pt.lambda - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_objective_points() {
        let p = Problem::new(SymMatrix::zeros(2), vec![1.0, 0.0]).unwrap();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        assert_eq!(set.points.len(), 2);
        // g = λx: the minimizer −e₁ carries λ = −1, the maximizer e₁ carries λ = 1
        assert!(close(set.points[0].x.as_slice(), &[-1.0, 0.0], 1e-12));
        assert!((set.points[0].lambda + 1.0).abs() < 1e-12);
        assert!(close(set.points[1].x.as_slice(), &[1.0, 0.0], 1e-12));
        assert!((set.points[1].lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_a_continuum() {
        let p = Problem::new(SymMatrix::identity(3), vec![0.0; 3]).unwrap();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        assert!(set.has_continuum);
        assert_eq!(set.points.len(), 6);
        assert!(set.points.iter().all(|pt| !pt.is_isolated));
        let fam = &set.continuum_descriptions[0];
        assert!((fam.radius - 1.0).abs() < 1e-14);
        let x = SpherePoint::normalize(vec![0.3, -0.2, 0.9]).unwrap();
        assert!(fam.distance(x.as_slice()) < 1e-12);
    }

    #[test]
    fn hard_case_with_linear_term() {
        // eigenspace of 1 is orthogonal to g, residual radius² = 1 − (0.5/2)²
        let p = Problem::new(SymMatrix::from_diag(&[1.0, 1.0, 3.0]), vec![0.0, 0.0, 1.0]).unwrap();
        let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
        assert!(set.has_continuum);
        let fam = &set.continuum_descriptions[0];
        assert!((fam.radius - (1.0f64 - 0.25).sqrt()).abs() < 1e-12);
        for pt in &set.points {
            assert!(pt.kkt_residual(&p) <= 1e-9 * 6.0);
        }
    }

    #[test]
    fn residuals_and_ordering_on_random_instances() {
        for seed in 0..30 {
            let p = make_random(8, seed, (-1.0, 1.0), 1.0).unwrap();
            let set = enumerate_stationary(&p, DEFAULT_TOL).unwrap();
            assert!(set.points.len() >= 2 && set.points.len() <= 16);
            let scale = 1.0 + p.a().frobenius_norm() + norm(p.g());
            for pt in &set.points {
                assert!(pt.kkt_residual(&p) <= KKT_TOL * scale);
                assert!(p.riemannian_grad(&pt.x).unwrap().norm() <= 1e-8);
                assert!((pt.lambda - p.multiplier(&pt.x).unwrap()).abs() <= 1e-10);
            }
            assert!(set.points.windows(2).all(|w| w[0].f_value <= w[1].f_value));
            let lmin = sym_eigh(p.a(), DEFAULT_EIG_TOL).unwrap().eigvals[0];
            assert!(set.points[0].lambda <= lmin + 1e-8);
        }
    }

    #[test]
    fn case3_point_is_found_and_classified() {
        for seed in 0..4 {
            let inst = make_case3(4, seed, 0.25).unwrap();
            let set = enumerate_stationary(&inst.problem, DEFAULT_TOL).unwrap();
            let i = set.nearest(&inst.x_star).unwrap();
            let pt = &set.points[i];
            assert!(pt.x.distance(&inst.x_star) < 1e-10);
            assert!(pt.phi_singular);
            assert!(!pt.corollary2_holds);
            assert_eq!(pt.predicted_theta, 0.75);
        }
    }

    #[test]
    fn truth_table() {
        assert_eq!(predicted_theta(false, false, false), 0.5);
        assert_eq!(predicted_theta(true, true, false), 0.5);
        assert_eq!(predicted_theta(true, false, true), 0.5);
        assert_eq!(predicted_theta(true, false, false), 0.75);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(enumerate_stationary(&make_example1(), 1e-3).is_err());
    }
}
