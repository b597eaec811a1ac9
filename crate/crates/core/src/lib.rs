//! Ladder schemes for parallel transport on Riemannian manifolds.
//!
//! The crate provides
//!
//! * closed-form geometry of the sphere S², of SPD(3) with the affine-invariant
//!   metric and of SE(3) with an anisotropic left-invariant metric
//!   ([`sphere`], [`spd`], [`se3`]);
//! * RK4 integration of the geodesic equation and its shooting inverse ([`ode`]);
//! * Schild's ladder, the pole ladder, averaged Schild and the fanning scheme,
//!   with exact or numerically integrated geodesics ([`ladder`]);
//! * a convergence harness that sweeps the rung count, fits convergence slopes
//!   and writes CSV/JSON reports ([`lab`]).

pub mod error;
pub mod geometry;
pub mod lab;
pub mod ladder;
pub mod ode;
pub mod se3;
pub mod spd;
pub mod sphere;

pub use error::{Error, Result};
pub use geometry::{CurvatureOracle, Manifold, TangentOf, TangentVector, ToleranceConfig};
pub use lab::{run_experiment, ConvergenceReport, ExperimentSpec};
pub use ladder::{transport, Backend, LadderConfig, Scheme, TransportResult};
pub use ode::{GeodesicFlow, RkCallCounter};
pub use se3::Se3;
pub use spd::Spd;
pub use sphere::Sphere;
