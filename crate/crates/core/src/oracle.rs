//! Brute-force stationary-point search for `n ∈ {2, 3}`.
//!
//! This is an independent cross-check of the secular-equation enumeration:
//! it never touches the eigendecomposition when locating points, only when
//! classifying them afterwards.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, tangent_basis};
use crate::problem::{Problem, SpherePoint};
use crate::stationary::{dedup_sorted, Candidate, Classifier, StationarySet};

/// Final residual bound for a refined candidate to count as stationary.
pub const ACCEPT_RESIDUAL: f64 = 1e-6;

fn circle(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

/// `d/dt f(cos t, sin t)`
fn circle_slope(p: &Problem, t: f64) -> f64 {
    let x = circle(t);
    let g = p.grad_raw(&x);
    -g[0] * t.sin() + g[1] * t.cos()
}

fn bisect_angle(p: &Problem, mut lo: f64, mut hi: f64) -> f64 {
    let slo = circle_slope(p, lo);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let s = circle_slope(p, mid);
        if s == 0.0 {
            return mid;
        }
        if (s < 0.0) == (slo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scan_circle(p: &Problem, density: usize) -> Vec<SpherePoint> {
    let ts: Vec<f64> = (0..density).map(|k| TAU * k as f64 / density as f64).collect();
    let slopes: Vec<f64> = ts.iter().map(|&t| circle_slope(p, t)).collect();
    let mut out = Vec::new();
    for k in 0..density {
        let (a, b) = (slopes[k], slopes[(k + 1) % density]);
        let t_hi = if k + 1 == density { TAU } else { ts[k + 1] };
        let t = if a == 0.0 {
            ts[k]
        } else if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            bisect_angle(p, ts[k], t_hi)
        } else {
            continue;
        };
        out.push(SpherePoint::normalize(circle(t).to_vec()).expect("unit circle point"));
    }
    out
}

fn sphere3(theta: f64, phi: f64) -> Vec<f64> {
    vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn residual_norm(p: &Problem, x: &[f64]) -> f64 {
    norm(&linalg::project_out(x, &p.grad_raw(x)))
}

/// Solves the small symmetric positive definite system `M v = b` by Cholesky.
fn spd_solve(m: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = m[i][j] - (0..j).map(|q| l[i][q] * l[j][q]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = (b[i] - (0..i).map(|q| l[i][q] * y[q]).sum::<f64>()) / l[i][i];
    }
    let mut v = vec![0.0; k];
    for i in (0..k).rev() {
        v[i] = (y[i] - ((i + 1)..k).map(|q| l[q][i] * v[q]).sum::<f64>()) / l[i][i];
    }
    Some(v)
}

/// Levenberg–Marquardt on the projected-gradient residual in tangent
/// coordinates. The linearization of `Bᵀ(I − xxᵀ)∇f` along the tangent
/// basis `B` is `BᵀAB − λ(x)I`.
fn refine(p: &Problem, start: Vec<f64>) -> Option<SpherePoint> {
    let mut x = start;
    let mut r = residual_norm(p, &x);
    let mut mu = 1e-3;
    for _ in 0..200 {
        if r <= 1e-14 {
            break;
        }
        let tb = tangent_basis(&x).ok()?;
        let k = tb.dim();
        let grad = p.grad_raw(&x);
        let lam = dot(&x, &grad);
        let rho = tb.coords(&linalg::project_out(&x, &grad));
        let cols: Vec<Vec<f64>> = (0..k).map(|j| tb.basis.column(j)).collect();
        let acols: Vec<Vec<f64>> = cols.iter().map(|c| p.a().matvec(c)).collect();
        let jac: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| dot(&cols[i], &acols[j]) - if i == j { lam } else { 0.0 }).collect())
            .collect();
        let jtj: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| (0..k).map(|q| jac[q][i] * jac[q][j]).sum()).collect())
            .collect();
        let jtr: Vec<f64> = (0..k).map(|i| -(0..k).map(|q| jac[q][i] * rho[q]).sum::<f64>()).collect();
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += mu;
            }
            let Some(v) = spd_solve(&m, &jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = linalg::add(&x, &tb.embed(&v));
            let trial = linalg::scale(&trial, 1.0 / norm(&trial));
            let rt = residual_norm(p, &trial);
            if rt < r {
                x = trial;
                r = rt;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (r <= ACCEPT_RESIDUAL).then(|| SpherePoint::normalize(x).ok()).flatten()
}

fn scan_sphere3(p: &Problem, density: usize) -> Vec<SpherePoint> {
    let nt = density.max(4);
    let nphi = 2 * nt;
    let theta = |i: usize| (i as f64 + 0.5) * PI / nt as f64;
    let phi = |j: usize| TAU * j as f64 / nphi as f64;
    let grid: Vec<Vec<f64>> = (0..nt)
        .map(|i| (0..nphi).map(|j| residual_norm(p, &sphere3(theta(i), phi(j)))).collect())
        .collect();
    // neighbor lookup, reflecting across the poles
    let at = |i: isize, j: isize| -> f64 {
        let (mut i, mut j) = (i, j);
        if i < 0 {
            i = -1 - i;
            j += nphi as isize / 2;
        } else if i >= nt as isize {
            i = 2 * nt as isize - 1 - i;
            j += nphi as isize / 2;
        }
        grid[i as usize][j.rem_euclid(nphi as isize) as usize]
    };
    let mut out = Vec::new();
    for i in 0..nt as isize {
        for j in 0..nphi as isize {
            let v = at(i, j);
            let is_min = (-1..=1)
                .flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
                .filter(|&(di, dj)| (di, dj) != (0, 0))
                .all(|(di, dj)| v <= at(i + di, j + dj));
            if is_min {
                if let Some(x) = refine(p, sphere3(theta(i as usize), phi(j as usize))) {
                    out.push(x);
                }
            }
        }
    }
    out
}

/// Grid-search oracle for the stationary set. For `n = 2` the angle is
/// scanned on `grid_density` points and sign changes of the tangential
/// derivative are bisected; for `n = 3` a `grid_density × 2·grid_density`
/// spherical grid supplies local minima of `‖(I − xxᵀ)∇f‖`, which are then
/// refined.
pub fn brute_force_stationary(p: &Problem, grid_density: usize) -> Result<StationarySet> {
    let located = match p.n() {
        2 => scan_circle(p, grid_density.max(8)),
        3 => scan_sphere3(p, grid_density),
        n => return Err(Error::UnsupportedDimension(n)),
    };
    let classifier = Classifier::new(p)?;
    let points = located
        .into_iter()
        .map(|x| classifier.classify(Candidate { x, is_isolated: true }))
        .collect::<Result<Vec<_>>>()?;
    Ok(StationarySet {
        points: dedup_sorted(points),
        has_continuum: false,
        continuum_descriptions: Vec::new(),
    })
}
