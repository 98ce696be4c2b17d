//! The quadratic problem `min ½xᵀAx + gᵀx` over the unit sphere, its
//! gradient measures, and instance generators.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, Matrix, SymMatrix};
use crate::seed::rng_for;

/// Inputs farther than this from the sphere are rejected by [`SpherePoint::new`].
pub const SPHERE_ACCEPT_TOL: f64 = 1e-8;

/// Provenance metadata carried with an instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemMeta {
    pub kind: String,
    pub seed: u64,
}

/// A problem instance `(A, g)` with an optional constant offset added to
/// reported objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    a: SymMatrix,
    g: Vec<f64>,
    offset: f64,
    pub meta: ProblemMeta,
}

/// A point on the unit sphere, `|xᵀx − 1| ≤ 1e−12`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Accepts vectors with `‖x‖ ∈ [1 − 1e−8, 1 + 1e−8]` and renormalizes them.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sphere point"));
        }
        let nx = norm(&x);
        if (nx - 1.0).abs() > SPHERE_ACCEPT_TOL {
            return Err(Error::NotUnit { norm: nx });
        }
        Ok(Self(linalg::scale(&x, 1.0 / nx)))
    }

    /// Projects any nonzero finite vector onto the sphere.
    pub fn normalize(x: Vec<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sphere point"));
        }
        let nx = norm(&x);
        if nx <= 1e-300 {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(Self(linalg::scale(&x, 1.0 / nx)))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        norm(&linalg::sub(&self.0, &other.0))
    }
}

impl AsRef<[f64]> for SpherePoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    Euclidean,
    Projected,
    MinNormSubgradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMeasure {
    pub value: Vec<f64>,
    pub kind: GradientKind,
}

impl GradientMeasure {
    pub fn norm(&self) -> f64 {
        norm(&self.value)
    }
}

impl Problem {
    pub fn new(a: SymMatrix, g: Vec<f64>) -> Result<Self> {
        let n = a.n();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
        }
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear term"));
        }
        Ok(Self {
            a,
            g,
            offset: 0.0,
            meta: ProblemMeta::default(),
        })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_meta(mut self, kind: &str, seed: u64) -> Self {
        self.meta = ProblemMeta {
            kind: kind.to_string(),
            seed,
        };
        self
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Exact test `g = 0`.
    pub fn g_is_zero(&self) -> bool {
        self.g.iter().all(|v| *v == 0.0)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `½xᵀAx + gᵀx + offset`
    pub fn objective(&self, x: &SpherePoint) -> Result<f64> {
        self.check(x.as_slice())?;
        Ok(self.objective_raw(x.as_slice()))
    }

    pub(crate) fn objective_raw(&self, x: &[f64]) -> f64 {
        0.5 * self.a.quad_form(x) + dot(&self.g, x) + self.offset
    }

    pub(crate) fn grad_raw(&self, x: &[f64]) -> Vec<f64> {
        linalg::add(&self.a.matvec(x), &self.g)
    }

    /// `∇f(x) = Ax + g`
    pub fn euclidean_grad(&self, x: &SpherePoint) -> Result<GradientMeasure> {
        self.check(x.as_slice())?;
        Ok(GradientMeasure {
            value: self.grad_raw(x.as_slice()),
            kind: GradientKind::Euclidean,
        })
    }

    /// `(I − xxᵀ)(Ax + g)`
    pub fn riemannian_grad(&self, x: &SpherePoint) -> Result<GradientMeasure> {
        self.check(x.as_slice())?;
        let g = self.grad_raw(x.as_slice());
        Ok(GradientMeasure {
            value: linalg::project_out(x.as_slice(), &g),
            kind: GradientKind::Projected,
        })
    }

    /// Minimum-norm element of the subdifferential of `f + δ_S`, following the
    /// closed form `(I − xxᵀ)∇f(x)` if `xᵀ∇f(x) ≤ 0`, else `∇f(x)`.
    pub fn min_norm_subgradient(&self, x: &SpherePoint) -> Result<GradientMeasure> {
        self.check(x.as_slice())?;
        let g = self.grad_raw(x.as_slice());
        let value = if dot(x.as_slice(), &g) <= 0.0 {
            linalg::project_out(x.as_slice(), &g)
        } else {
            g
        };
        Ok(GradientMeasure {
            value,
            kind: GradientKind::MinNormSubgradient,
        })
    }

    /// `λ = xᵀ(Ax + g)`
    pub fn multiplier(&self, x: &SpherePoint) -> Result<f64> {
        self.check(x.as_slice())?;
        Ok(dot(x.as_slice(), &self.grad_raw(x.as_slice())))
    }

    /// `Φ = A − λI`
    pub fn phi_matrix(&self, lambda: f64) -> SymMatrix {
        self.a.shifted(lambda)
    }
}

/// The two-dimensional instance `f(x) = ½(x₂ − 1)²`, i.e. `A = diag(0, 1)`,
/// `g = (0, −1)` and offset `½`.
pub fn make_example1() -> Problem {
    Problem::new(SymMatrix::from_diag(&[0.0, 1.0]), vec![0.0, -1.0])
        .expect("valid instance")
        .with_offset(0.5)
        .with_meta("example1", 0)
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Seeded orthogonal matrix built from `n − 1` Householder reflectors.
pub fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = rng_for(seed, "orthogonal-frame");
    let mut q = Matrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let mut v = gaussian_vec(&mut rng, n);
        v.iter_mut().take(k).for_each(|c| *c = 0.0);
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            continue;
        }
        // Q ← Q·(I − 2vvᵀ/vᵀv)
        for i in 0..n {
            let qv: f64 = (0..n).map(|j| q.get(i, j) * v[j]).sum();
            let f = 2.0 * qv / vtv;
            for j in 0..n {
                q.set(i, j, q.get(i, j) - f * v[j]);
            }
        }
    }
    q
}

/// `Q·diag(d)·Qᵀ`
fn spectral_matrix(q: &Matrix, d: &[f64]) -> SymMatrix {
    let n = d.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| q.get(i, k) * d[k] * q.get(j, k)).sum();
            m.set(i, j, v);
        }
    }
    SymMatrix::new(m).expect("finite spectral matrix")
}

/// Random instance with eigenvalues uniform on `eig_range` in a random
/// orthogonal frame and `g` uniform on the sphere of radius `g_scale`.
pub fn make_random(n: usize, seed: u64, eig_range: (f64, f64), g_scale: f64) -> Result<Problem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
    }
    let (lo, hi) = eig_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "invalid eigenvalue range [{lo}, {hi}]"
        )));
    }
    if !(g_scale.is_finite() && g_scale >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid g scale {g_scale}")));
    }
    let mut rng = rng_for(seed, "eigenvalues");
    let d: Vec<f64> = (0..n)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();
    let q = random_orthogonal(n, seed);
    let a = spectral_matrix(&q, &d);
    let g = if g_scale == 0.0 {
        vec![0.0; n]
    } else {
        let mut grng = rng_for(seed, "linear-term");
        let v = gaussian_vec(&mut grng, n);
        linalg::scale(&v, g_scale / norm(&v))
    };
    let kind = if g_scale == 0.0 { "gzero" } else { "random" };
    Ok(Problem::new(a, g)?.with_meta(kind, seed))
}

/// An instance with a designated stationary point whose shifted matrix is
/// singular along a tangent direction while `g ≠ 0`.
#[derive(Debug, Clone)]
pub struct Case3Instance {
    pub problem: Problem,
    pub x_star: SpherePoint,
    pub lambda_star: f64,
    /// Unit null direction of `A − λ*I`, tangent at `x_star`.
    pub null_direction: Vec<f64>,
}

/// Builds the instance in a given orthonormal frame `{u₁, …, u_n}` (columns
/// of `frame`): `A = λ*u₁u₁ᵀ + Σ_{i≥2} (λ* + offsets[i−2])·u_iu_iᵀ`,
/// `x* = u_n` and `g = −offsets[n−2]·u_n`.
pub fn case3_from_frame(frame: &Matrix, lambda_star: f64, offsets: &[f64]) -> Result<Case3Instance> {
    let n = frame.rows();
    if n < 2 || frame.cols() != n {
        return Err(Error::InvalidArgument("frame must be square with n >= 2".into()));
    }
    if offsets.len() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: offsets.len(),
        });
    }
    if offsets.iter().any(|o| *o == 0.0) {
        return Err(Error::InvalidArgument("offsets must be nonzero".into()));
    }
    let mut d = vec![lambda_star];
    d.extend(offsets.iter().map(|o| lambda_star + o));
    let a = spectral_matrix(frame, &d);
    let u_n = frame.column(n - 1);
    let g = linalg::scale(&u_n, lambda_star - d[n - 1]);
    let problem = Problem::new(a, g)?;
    Ok(Case3Instance {
        problem,
        x_star: SpherePoint::normalize(u_n)?,
        lambda_star,
        null_direction: frame.column(0),
    })
}

/// Seeded version of [`case3_from_frame`]: offsets for `u₂..u_{n−1}` have
/// magnitude at least 0.5, all eigenvalues are pairwise at least 0.1 apart,
/// and the offset on `x* = u_n` has magnitude in `[1, 2]`.
pub fn make_case3(n: usize, seed: u64, lambda_star: f64) -> Result<Case3Instance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
    }
    let mut rng = rng_for(seed, "case3-offsets");
    let span = 1.5 + 0.25 * n as f64;
    let mut offsets: Vec<f64> = Vec::with_capacity(n - 1);
    let spaced = |xs: &[f64], v: f64| xs.iter().all(|o| (o - v).abs() >= 0.1);
    let sign = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let last = sign(&mut rng) * rng.random_range(1.0..2.0);
    while offsets.len() < n - 2 {
        let v = sign(&mut rng) * rng.random_range(0.5..0.5 + span);
        if spaced(&offsets, v) && (v - last).abs() >= 0.1 {
            offsets.push(v);
        }
    }
    offsets.push(last);
    let frame = random_orthogonal(n, seed);
    let mut inst = case3_from_frame(&frame, lambda_star, &offsets)?;
    inst.problem = inst.problem.with_meta("case3", seed);
    Ok(inst)
}
