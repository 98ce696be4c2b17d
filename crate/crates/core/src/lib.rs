//! Exact stationary-point enumeration for `min ½xᵀAx + gᵀx` on the unit
//! sphere, numerical measurement of the Łojasiewicz gradient inequality at
//! those points, and convergence-rate diagnostics for Riemannian gradient
//! descent.

pub mod certify;
pub mod descent;
pub mod error;
pub mod io;
pub mod linalg;
pub mod loja;
pub mod oracle;
pub mod problem;
pub mod seed;
pub mod stationary;

pub use certify::{certify, CertifyOptions, CertifyReport};
pub use descent::{classify_rate, solve_rgd, theta_to_regime, verify_conditions, DescentTrace, RateReport, Regime, RgdOptions};
pub use error::{Error, Result};
pub use io::{parse_problem, ProblemFile, Provenance};
pub use linalg::{restrict_to_tangent, sym_eigh, tangent_basis, EigenDecomp, Matrix, SymMatrix, TangentBasis};
pub use loja::{case3_decompose, directional_probe, estimate_exponent, measure, sample_cap, theoretical_bounds, CaseDecomposition, LojaEstimate, LojaSample};
pub use oracle::brute_force_stationary;
pub use problem::{make_case3, make_example1, make_random, Case3Instance, GradientKind, GradientMeasure, Problem, SpherePoint};
pub use stationary::{classify, enumerate_stationary, CaseTag, StationaryPoint, StationarySet};
