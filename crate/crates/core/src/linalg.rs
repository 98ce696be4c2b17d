//! Dense symmetric linear algebra used by the rest of the crate.
//!
//! Everything here is self-contained: a row-major [`Matrix`], a symmetrized
//! [`SymMatrix`], a cyclic Jacobi eigensolver, Householder tangent bases of the
//! unit sphere, and the restriction of a quadratic form to a tangent space.

use std::ops::Range;

use crate::error::{Error, Result};

/// Maximum number of full cyclic Jacobi sweeps before giving up.
pub const MAX_JACOBI_SWEEPS: usize = 30;

/// Default convergence tolerance for [`sym_eigh`], relative to `‖A‖_F`.
pub const DEFAULT_EIG_TOL: f64 = 1e-13;

/// Relative gap under which two eigenvalues are treated as one cluster,
/// scaled by `1 + ‖A‖_F`.
pub const CLUSTER_GAP: f64 = 1e-9;

const UNIT_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `(I − xxᵀ)v` for a unit vector `x`.
pub fn project_out(x: &[f64], v: &[f64]) -> Vec<f64> {
    axpy(v, -dot(x, v), x)
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            if col.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    found: col.len(),
                });
            }
            for (i, v) in col.iter().enumerate() {
                m.data[i * c + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        Ok(out)
    }

    /// `M·x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ·x`
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        }
    }
}

/// Dense symmetric `n×n` matrix in full row-major storage.
///
/// Construction symmetrizes the input as `(M + Mᵀ)/2`, so `get(i, j) ==
/// get(j, i)` holds bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
            });
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let n = m.rows;
        let mut s = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Ok(Self { inner: s })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        Self { inner: m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Matrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.matvec(x)
    }

    /// `xᵀMx`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    /// `M − λI`
    pub fn shifted(&self, lambda: f64) -> SymMatrix {
        let mut m = self.inner.clone();
        for i in 0..self.n() {
            let v = m.get(i, i) - lambda;
            m.set(i, i, v);
        }
        SymMatrix { inner: m }
    }

    /// `BᵀMB`, symmetrized.
    pub fn congruence(&self, b: &Matrix) -> Result<SymMatrix> {
        let mb = self.inner.matmul(b)?;
        SymMatrix::new(b.transpose().matmul(&mb)?)
    }
}

/// Eigendecomposition `A = Q·diag(λ)·Qᵀ` with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub eigvals: Vec<f64>,
    /// Column `i` is the eigenvector paired with `eigvals[i]`.
    pub eigvecs: Matrix,
}

impl EigenDecomp {
    pub fn n(&self) -> usize {
        self.eigvals.len()
    }

    pub fn eigvec(&self, i: usize) -> Vec<f64> {
        self.eigvecs.column(i)
    }

    /// `Q·diag(λ)·Qᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let mut scaled = self.eigvecs.clone();
        for i in 0..n {
            for j in 0..n {
                scaled.set(i, j, scaled.get(i, j) * self.eigvals[j]);
            }
        }
        scaled
            .matmul(&self.eigvecs.transpose())
            .expect("square factors")
    }

    /// `‖A − QΛQᵀ‖_F`
    pub fn reconstruction_residual(&self, a: &SymMatrix) -> f64 {
        a.as_matrix().sub(&self.reconstruct()).frobenius_norm()
    }

    /// `‖QᵀQ − I‖_F`
    pub fn orthogonality_residual(&self) -> f64 {
        let qtq = self
            .eigvecs
            .transpose()
            .matmul(&self.eigvecs)
            .expect("square factors");
        qtq.sub(&Matrix::identity(self.n())).frobenius_norm()
    }

    /// Groups consecutive eigenvalues whose gap is at most `gap_tol`.
    pub fn clusters(&self, gap_tol: f64) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.n() {
            if i == self.n() || self.eigvals[i] - self.eigvals[i - 1] > gap_tol {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// `Qᵀv`
    pub fn to_eigenbasis(&self, v: &[f64]) -> Vec<f64> {
        self.eigvecs.t_matvec(v)
    }

    /// `Qv`
    pub fn from_eigenbasis(&self, v: &[f64]) -> Vec<f64> {
        self.eigvecs.matvec(v)
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

const SIGN_EPS: f64 = 1e-12;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm drops to `tol·‖A‖_F`.
/// Eigenvalues are returned ascending; each eigenvector is signed so that its
/// first nonzero component (magnitude above `SIGN_EPS`) is positive.
pub fn sym_eigh(a: &SymMatrix, tol: f64) -> Result<EigenDecomp> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidArgument(format!(
            "eigensolver tolerance {tol:e} outside (0, 1e-6]"
        )));
    }
    let n = a.n();
    let mut m = a.as_matrix().data.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    let threshold = tol * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, n);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::EigenNonConvergence {
                sweeps,
                residual: off / scale,
            });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    m[r * n + p] = c * arp - s * arq;
                    m[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = m[p * n + r];
                    let aqr = m[q * n + r];
                    m[p * n + r] = c * apr - s * aqr;
                    m[q * n + r] = s * apr + c * aqr;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v.data[r * n + p];
                    let vrq = v.data[r * n + q];
                    v.data[r * n + p] = c * vrp - s * vrq;
                    v.data[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));

    let eigvals = order.iter().map(|&i| diag[i]).collect();
    let mut eigvecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        // rounding noise in a structurally zero entry must not decide the sign
        let lead = col.iter().position(|c| c.abs() > SIGN_EPS).unwrap_or(0);
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
        for (i, c) in col.into_iter().enumerate() {
            eigvecs.set(i, dst, c);
        }
    }
    Ok(EigenDecomp { eigvals, eigvecs })
}

/// Orthonormal basis of the tangent space `{d : dᵀx = 0}` of the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    pub base: Vec<f64>,
    /// `n×(n−1)`, orthonormal columns orthogonal to `base`.
    pub basis: Matrix,
}

impl TangentBasis {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Maps tangent coordinates to an ambient vector.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        self.basis.matvec(coords)
    }

    /// Tangent coordinates of an ambient vector.
    pub fn coords(&self, v: &[f64]) -> Vec<f64> {
        self.basis.t_matvec(v)
    }
}

/// Householder construction: with `k = argmax|x_k|`, the reflector `H`
/// sending `e_k` to `±x` has its other `n−1` columns orthonormal and
/// orthogonal to `x`.
pub fn tangent_basis(x: &[f64]) -> Result<TangentBasis> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "tangent basis needs n >= 2, got {n}"
        )));
    }
    let nx = norm(x);
    if (nx - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm: nx });
    }
    let mut k = 0;
    for (i, xi) in x.iter().enumerate() {
        if xi.abs() > x[k].abs() {
            k = i;
        }
    }
    let sign = if x[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = x.to_vec();
    v[k] += sign;
    let vtv = dot(&v, &v);

    let mut basis = Matrix::zeros(n, n - 1);
    let mut col = 0;
    for j in 0..n {
        if j == k {
            continue;
        }
        let f = 2.0 * v[j] / vtv;
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            basis.set(i, col, e - f * v[i]);
        }
        col += 1;
    }
    Ok(TangentBasis {
        base: x.to_vec(),
        basis,
    })
}

/// The quadratic form of `m` restricted to the tangent space at `x`, as an
/// `(n−1)×(n−1)` matrix in the Householder tangent basis.
pub fn restrict_to_tangent(m: &SymMatrix, x: &[f64]) -> Result<SymMatrix> {
    if x.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            found: x.len(),
        });
    }
    let tb = tangent_basis(x)?;
    m.congruence(&tb.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        SymMatrix::from_rows(&rows).unwrap()
    }

    fn random_unit(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        scale(&v, 1.0 / norm(&v))
    }

    #[test]
    fn construction_symmetrizes() {
        let s = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
        assert!(SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn eigh_diagonal() {
        let e = sym_eigh(&SymMatrix::from_diag(&[3.0, 1.0]), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigvals, vec![1.0, 3.0]);
        assert_eq!(e.eigvec(0), vec![0.0, 1.0]);
        assert_eq!(e.eigvec(1), vec![1.0, 0.0]);
    }

    #[test]
    fn eigh_identity() {
        let e = sym_eigh(&SymMatrix::identity(3), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigvals, vec![1.0; 3]);
        assert!(e.orthogonality_residual() == 0.0);
    }

    #[test]
    fn eigh_random_50() {
        let a = random_sym(50, 11);
        let e = sym_eigh(&a, DEFAULT_EIG_TOL).unwrap();
        assert!(e.reconstruction_residual(&a) <= 1e-10 * a.frobenius_norm());
        assert!(e.orthogonality_residual() <= 1e-10 * 50f64.sqrt());
        assert!(e.eigvals.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..50 {
            let v = e.eigvec(i);
            let lead = v.iter().find(|c| c.abs() > SIGN_EPS).unwrap();
            assert!(*lead > 0.0);
        }
    }

    #[test]
    fn eigh_is_deterministic() {
        let a = random_sym(12, 3);
        let e1 = sym_eigh(&a, DEFAULT_EIG_TOL).unwrap();
        let e2 = sym_eigh(&a, DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn eigh_rejects_bad_tolerance() {
        assert!(sym_eigh(&SymMatrix::identity(2), 0.0).is_err());
        assert!(sym_eigh(&SymMatrix::identity(2), 1e-3).is_err());
    }

    #[test]
    fn eigh_zero_matrix() {
        let e = sym_eigh(&SymMatrix::zeros(3), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigvals, vec![0.0; 3]);
    }

    #[test]
    fn clusters_group_repeated_eigenvalues() {
        let e = sym_eigh(&SymMatrix::from_diag(&[2.0, 1.0, 2.0, 5.0]), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.clusters(1e-9), vec![0..1, 1..3, 3..4]);
    }

    #[test]
    fn tangent_basis_axis() {
        let tb = tangent_basis(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(tb.dim(), 2);
        for j in 0..2 {
            let c = tb.basis.column(j);
            assert_eq!(c[0], 0.0);
        }
        let span: Vec<f64> = (0..2).map(|j| tb.basis.column(j)[1].abs() + tb.basis.column(j)[2].abs()).collect();
        assert_eq!(span, vec![1.0, 1.0]);
    }

    #[test]
    fn tangent_basis_diagonal_direction() {
        let s = 0.5f64.sqrt();
        let tb = tangent_basis(&[s, s]).unwrap();
        let c = tb.basis.column(0);
        assert!((c[0].abs() - s).abs() < 1e-15);
        assert!((c[0] + c[1]).abs() < 1e-15);
    }

    #[test]
    fn tangent_basis_random_residuals() {
        for seed in 0..20 {
            let x = random_unit(10, seed);
            let tb = tangent_basis(&x).unwrap();
            assert!(norm(&tb.coords(&x)) <= 1e-12);
            let btb = tb.basis.transpose().matmul(&tb.basis).unwrap();
            assert!(btb.sub(&Matrix::identity(9)).frobenius_norm() <= 1e-12 * 10.0);
            // B·Bᵀ = I − xxᵀ
            let bbt = tb.basis.matmul(&tb.basis.transpose()).unwrap();
            for i in 0..10 {
                for j in 0..10 {
                    let p = if i == j { 1.0 } else { 0.0 } - x[i] * x[j];
                    assert!((bbt.get(i, j) - p).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn tangent_basis_rejects_non_unit() {
        assert!(matches!(tangent_basis(&[1.0, 1.0]), Err(Error::NotUnit { .. })));
    }

    #[test]
    fn restrict_identity() {
        let x = random_unit(5, 2);
        let r = restrict_to_tangent(&SymMatrix::identity(5), &x).unwrap();
        assert!(r.as_matrix().sub(&Matrix::identity(4)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn restrict_example_shapes() {
        let r = restrict_to_tangent(&SymMatrix::from_diag(&[0.0, 1.0]), &[0.0, 1.0]).unwrap();
        assert_eq!(r.to_rows(), vec![vec![0.0]]);
        let r = restrict_to_tangent(&SymMatrix::from_diag(&[-2.0, -1.0]), &[0.0, 1.0]).unwrap();
        assert_eq!(r.to_rows(), vec![vec![-2.0]]);
    }

    #[test]
    fn restriction_spectrum_matches_projected_form() {
        for seed in 0..10 {
            let n = 6;
            let m = random_sym(n, 100 + seed);
            let x = random_unit(n, 200 + seed);
            let r = restrict_to_tangent(&m, &x).unwrap();
            let mut ev: Vec<f64> = sym_eigh(&r, DEFAULT_EIG_TOL).unwrap().eigvals;
            ev.push(0.0);
            ev.sort_by(f64::total_cmp);

            let mut p = Matrix::identity(n);
            for i in 0..n {
                for j in 0..n {
                    p.set(i, j, p.get(i, j) - x[i] * x[j]);
                }
            }
            let pmp = SymMatrix::new(p.matmul(m.as_matrix()).unwrap().matmul(&p).unwrap()).unwrap();
            let full = sym_eigh(&pmp, DEFAULT_EIG_TOL).unwrap().eigvals;
            for (a, b) in ev.iter().zip(&full) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }
}
