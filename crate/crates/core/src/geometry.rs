//! Manifold interface shared by the sphere, SPD and SE(3) modules, together with
//! the curvature oracles and the Taylor predictions of one ladder rung.
//!
//! Points and tangent vectors are stored in an ambient (embedding or matrix)
//! representation. Each manifold decides what that representation is:
//!
//! | manifold | point          | tangent                         |
//! |----------|----------------|---------------------------------|
//! | S²       | unit `Vector3` | `Vector3` orthogonal to the point |
//! | SPD(3)   | `Matrix3`      | symmetric `Matrix3`             |
//! | SE(3)    | homogeneous `Matrix4` | left-translated algebra coefficients `Vector6` |

use std::fmt::Debug;
use std::ops::{Neg, Sub};

use nalgebra::DVector;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::OdeState;

/// A point with an attached tangent vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector<P, V> {
    pub base: P,
    pub vec: V,
}

impl<P, V> TangentVector<P, V> {
    pub fn new(base: P, vec: V) -> Self {
        Self { base, vec }
    }
}

/// Tangent vector type of a manifold.
pub type TangentOf<M> = TangentVector<<M as Manifold>::Point, <M as Manifold>::Tangent>;

/// Tolerances used by the geometry checks and by the shooting inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub tol_point: f64,
    pub tol_tangent: f64,
    /// Residual target of the shooting inverse. `None` means `h^5` for step `h`.
    pub tol_log: Option<f64>,
    pub max_gd_iters: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            tol_point: 1e-9,
            tol_tangent: 1e-9,
            tol_log: None,
            max_gd_iters: 50,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.tol_point) || !positive(self.tol_tangent) {
            return Err(Error::InvalidSpec("tolerances must be positive".into()));
        }
        if let Some(t) = self.tol_log {
            if !positive(t) {
                return Err(Error::InvalidSpec("tol_log must be positive".into()));
            }
        }
        if self.max_gd_iters == 0 {
            return Err(Error::InvalidSpec("max_gd_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Shooting residual target for integrator step `h`.
    pub fn log_tolerance(&self, h: f64) -> f64 {
        self.tol_log.unwrap_or_else(|| h.powi(5))
    }
}

/// A Riemannian manifold embedded in a real vector space.
///
/// `exp`, `log` and `transport` are the closed-form maps. Manifolds without
/// closed forms return an error from them and are handled through
/// [`crate::ode::GeodesicFlow`] instead.
pub trait Manifold: Send + Sync {
    type Point: OdeState + Debug + PartialEq + Send + Sync + Sub<Output = Self::Point>;
    type Tangent: OdeState
        + Debug
        + PartialEq
        + Send
        + Sync
        + Sub<Output = Self::Tangent>
        + Neg<Output = Self::Tangent>;

    fn name(&self) -> &'static str;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Radius (in metric norm) inside which exp/log are treated as valid.
    fn safe_radius(&self) -> f64;

    /// Whether `exp`, `log` and `transport` are available in closed form.
    fn has_closed_form(&self) -> bool {
        true
    }

    /// Distance of `x` to the manifold in the ambient representation; zero on it.
    fn point_defect(&self, x: &Self::Point) -> f64;

    /// Distance of `v` to the tangent space at `x`; zero when tangent.
    fn tangent_defect(&self, x: &Self::Point, v: &Self::Tangent) -> f64;

    fn project_tangent(&self, x: &Self::Point, v: &Self::Tangent) -> Self::Tangent;

    /// Tangent representation of an ambient velocity `dx` at `x`.
    fn project_velocity(&self, x: &Self::Point, dx: &Self::Point) -> Self::Tangent;

    /// Re-attach a vector tangent near `from` to the nearby point `to`.
    fn rebase(&self, _from: &Self::Point, to: &Self::Point, v: &Self::Tangent) -> Self::Tangent {
        self.project_tangent(to, v)
    }

    fn zero_tangent(&self) -> Self::Tangent;

    fn inner(&self, x: &Self::Point, u: &Self::Tangent, v: &Self::Tangent) -> f64;

    fn norm(&self, x: &Self::Point, v: &Self::Tangent) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    fn exp(&self, x: &Self::Point, v: &Self::Tangent) -> Result<Self::Point>;

    fn log(&self, x: &Self::Point, y: &Self::Point) -> Result<Self::Tangent>;

    /// Parallel transport of `v` along `t -> exp_x(t w)` from `t = 0` to `t = 1`.
    fn transport(
        &self,
        x: &Self::Point,
        w: &Self::Tangent,
        v: &Self::Tangent,
    ) -> Result<Self::Tangent>;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> Result<f64> {
        Ok(self.norm(x, &self.log(x, y)?))
    }

    /// Flattened coordinates of a point in the global chart of the embedding.
    fn chart(&self, x: &Self::Point) -> DVector<f64>;

    /// Chart distance between two points.
    fn point_gap(&self, x: &Self::Point, y: &Self::Point) -> f64 {
        (self.chart(x) - self.chart(y)).norm()
    }

    /// Coordinates of `v` in the tangent basis at `x` (length [`Manifold::dim`]).
    fn tangent_coords(&self, x: &Self::Point, v: &Self::Tangent) -> DVector<f64>;

    fn tangent_from_coords(&self, x: &Self::Point, c: &DVector<f64>) -> Self::Tangent;

    /// Canonical base point used by the experiments.
    fn origin(&self) -> Self::Point;
}

/// Riemann curvature `R(u,v)w` and, where available, its covariant derivative
/// `(∇_u R)(v,w)z`.
///
/// Convention: `R(u,v) = ∇_u∇_v − ∇_v∇_u − ∇_[u,v]`, so that the sectional
/// curvature of the plane spanned by orthonormal `u, v` is `<R(v,u)u, v>`.
pub trait CurvatureOracle: Manifold {
    fn riemann(
        &self,
        x: &Self::Point,
        u: &Self::Tangent,
        v: &Self::Tangent,
        w: &Self::Tangent,
    ) -> Self::Tangent;

    fn nabla_riemann(
        &self,
        _x: &Self::Point,
        _u: &Self::Tangent,
        _v: &Self::Tangent,
        _w: &Self::Tangent,
        _z: &Self::Tangent,
    ) -> Result<Self::Tangent> {
        Err(Error::MissingDerivativeOracle)
    }
}

pub(crate) fn ensure_same_base<M: Manifold>(
    m: &M,
    a: &M::Point,
    b: &M::Point,
    tol: f64,
) -> Result<()> {
    if a == b || m.point_gap(a, b) <= tol {
        Ok(())
    } else {
        Err(Error::BasePointMismatch)
    }
}

/// Metric inner product of two tangent vectors attached to the same point.
pub fn inner<M: Manifold>(m: &M, u: &TangentOf<M>, v: &TangentOf<M>) -> Result<f64> {
    ensure_same_base(m, &u.base, &v.base, ToleranceConfig::default().tol_point)?;
    Ok(m.inner(&u.base, &u.vec, &v.vec))
}

/// Leading deviation `½ R(w,v)v` of one Schild rung, transported back to the base.
pub fn schild_error_prediction<M: CurvatureOracle>(
    m: &M,
    v: &TangentOf<M>,
    w: &TangentOf<M>,
) -> Result<TangentOf<M>> {
    ensure_same_base(m, &v.base, &w.base, ToleranceConfig::default().tol_point)?;
    let r = m.riemann(&v.base, &w.vec, &v.vec, &v.vec);
    Ok(TangentVector::new(v.base, r * 0.5))
}

/// Leading deviation of one pole rung centred at the midpoint:
/// `(1/12)((∇_w R)(w,v)(5v − w) + (∇_v R)(w,v)(2v − w))`.
pub fn pole_error_prediction<M: CurvatureOracle>(
    m: &M,
    v: &TangentOf<M>,
    w: &TangentOf<M>,
) -> Result<TangentOf<M>> {
    ensure_same_base(m, &v.base, &w.base, ToleranceConfig::default().tol_point)?;
    let x = &v.base;
    let (v, w) = (v.vec, w.vec);
    let a = m.nabla_riemann(x, &w, &w, &v, &(v * 5.0 - w))?;
    let b = m.nabla_riemann(x, &v, &w, &v, &(v * 2.0 - w))?;
    Ok(TangentVector::new(*x, (a + b) * (1.0 / 12.0)))
}

/// Double exponential `h_x(v, w) = log_x(exp_{x_v}(Π w))` from the closed-form maps.
pub fn double_exp<M: Manifold>(
    m: &M,
    x: &M::Point,
    v: &M::Tangent,
    w: &M::Tangent,
) -> Result<M::Tangent> {
    let xv = m.exp(x, v)?;
    let wt = m.transport(x, v, w)?;
    m.log(x, &m.exp(&xv, &wt)?)
}

/// Finite-difference estimate of `<R(v,u)u, v> / (|u|²|v|² − <u,v>²)` from the
/// cubic term of the double exponential, using steps `±eps`.
pub fn sectional_curvature_fd<M: Manifold>(
    m: &M,
    x: &M::Point,
    u: &M::Tangent,
    v: &M::Tangent,
    eps: f64,
) -> Result<f64> {
    let defect = |s: f64, t: f64| -> Result<M::Tangent> {
        let h = double_exp(m, x, &(*u * s), &(*v * t))?;
        Ok(h - *u * s - *v * t)
    };
    let d_plus = defect(eps, eps)?;
    let d_minus = defect(eps, -eps)?;
    // h(su, tv) = su + tv + (st/6) R(v,u)(su + 2tv) + O(4)
    let r_vuu = (d_plus - d_minus) * (3.0 / eps.powi(3));
    let uu = m.inner(x, u, u);
    let vv = m.inner(x, v, v);
    let uv = m.inner(x, u, v);
    let area = uu * vv - uv * uv;
    if area <= 0.0 {
        return Err(Error::DegenerateFit("tangent vectors are collinear"));
    }
    Ok(m.inner(x, &r_vuu, v) / area)
}

/// Random tangent vector at `x` with the given metric norm, drawn from an
/// isotropic Gaussian on the basis coordinates.
pub fn random_tangent<M: Manifold, R: rand::Rng + ?Sized>(
    m: &M,
    x: &M::Point,
    norm: f64,
    rng: &mut R,
) -> M::Tangent {
    let c = DVector::from_iterator(
        m.dim(),
        (0..m.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let v = m.tangent_from_coords(x, &c);
    let n = m.norm(x, &v);
    if n == 0.0 {
        v
    } else {
        v * (norm / n)
    }
}
