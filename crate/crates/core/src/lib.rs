//! Desk-scale numerical laboratory for the restricted and spectral fractional
//! Laplacians and for nonlocal directional curvatures.
//!
//! The crate is organised around closed-form kernels on balls ([`kernels`]),
//! pointwise principal-value evaluation ([`pv_eval`]), a fractional
//! walk-on-spheres Monte Carlo solver ([`wos`]), deterministic ball solvers
//! ([`ball_solver`]), boundary-rate estimation ([`rates`]), Keller-Osserman
//! machinery for boundary blow-up ([`semilinear`]), eigen-expansion solvers
//! for the spectral operator on separable domains ([`spectral`]) and nonlocal
//! curvature integrals for graph surfaces ([`curvature`]).

pub mod ball_solver;
pub mod curvature;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod pv_eval;
pub mod quad;
pub mod rates;
pub mod semilinear;
pub mod special;
pub mod spectral;
pub mod wos;

pub use error::{Error, Result};
pub use geom::Point;
pub use kernels::{BallGeometry, KernelParams, NormalizingConstants};




