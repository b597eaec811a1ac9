//! The unit sphere S² ⊂ ℝ³ with the metric induced by the ambient dot product.

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureOracle, Manifold};
use crate::ode::GeodesicFlow;

/// `<x, y>` at or below `-1 + ANTIPODAL_MARGIN` is treated as antipodal.
pub const ANTIPODAL_MARGIN: f64 = 1e-10;

/// Below this norm the transport direction is undefined and `v` is returned unchanged.
const TRANSPORT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct Sphere {
    pub tol: f64,
}

impl Default for Sphere {
    fn default() -> Self {
        Self { tol: 1e-9 }
    }
}

impl Sphere {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_tangent(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> Result<()> {
        let defect = self.tangent_defect(x, v);
        if defect > self.tol * v.norm().max(1.0) {
            return Err(Error::NonTangentInput { defect });
        }
        Ok(())
    }

    /// Unit vectors spanning the tangent plane at `x`.
    pub fn tangent_basis(&self, x: &Vector3<f64>) -> [Vector3<f64>; 2] {
        let k = x.iamin();
        let e = Vector3::ith(k, 1.0);
        let b1 = (e - x * x.dot(&e)).normalize();
        [b1, x.cross(&b1)]
    }
}

/// `sin(t)/t`, accurate near zero.
fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

impl Manifold for Sphere {
    type Point = Vector3<f64>;
    type Tangent = Vector3<f64>;

    fn name(&self) -> &'static str {
        "sphere"
    }

    fn dim(&self) -> usize {
        2
    }

    fn safe_radius(&self) -> f64 {
        std::f64::consts::PI - 0.1
    }

    fn point_defect(&self, x: &Vector3<f64>) -> f64 {
        (x.norm() - 1.0).abs()
    }

    fn tangent_defect(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
        x.dot(v).abs()
    }

    fn project_tangent(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        v - x * x.dot(v)
    }

    fn project_velocity(&self, x: &Vector3<f64>, dx: &Vector3<f64>) -> Vector3<f64> {
        self.project_tangent(x, dx)
    }

    fn zero_tangent(&self) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn inner(&self, _x: &Vector3<f64>, u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
        u.dot(v)
    }

    fn exp(&self, x: &Vector3<f64>, w: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.check_tangent(x, w)?;
        let w = self.project_tangent(x, w);
        let t = w.norm();
        Ok(x * t.cos() + w * sinc(t))
    }

    fn log(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<Vector3<f64>> {
        let c = x.dot(y);
        if c <= -1.0 + ANTIPODAL_MARGIN {
            return Err(Error::AntipodalPoints);
        }
        let u = y - x * c;
        let s = u.norm();
        if s == 0.0 {
            return Ok(Vector3::zeros());
        }
        // atan2 keeps full relative accuracy for nearby points, unlike arccos(c)
        Ok(u * (s.atan2(c) / s))
    }

    fn transport(
        &self,
        x: &Vector3<f64>,
        w: &Vector3<f64>,
        v: &Vector3<f64>,
    ) -> Result<Vector3<f64>> {
        self.check_tangent(x, w)?;
        self.check_tangent(x, v)?;
        let t = w.norm();
        if t < TRANSPORT_EPS {
            return Ok(*v);
        }
        let u = w / t;
        let a = v.dot(&u);
        Ok((u * t.cos() - x * t.sin()) * a + (v - u * a))
    }

    fn chart(&self, x: &Vector3<f64>) -> DVector<f64> {
        DVector::from_column_slice(x.as_slice())
    }

    fn tangent_coords(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> DVector<f64> {
        let [b1, b2] = self.tangent_basis(x);
        DVector::from_vec(vec![b1.dot(v), b2.dot(v)])
    }

    fn tangent_from_coords(&self, x: &Vector3<f64>, c: &DVector<f64>) -> Vector3<f64> {
        let [b1, b2] = self.tangent_basis(x);
        b1 * c[0] + b2 * c[1]
    }

    fn origin(&self) -> Vector3<f64> {
        Vector3::x()
    }
}

impl CurvatureOracle for Sphere {
    /// Constant curvature one: `R(u,v)w = <v,w>u − <u,w>v`.
    fn riemann(
        &self,
        _x: &Vector3<f64>,
        u: &Vector3<f64>,
        v: &Vector3<f64>,
        w: &Vector3<f64>,
    ) -> Vector3<f64> {
        u * v.dot(w) - v * u.dot(w)
    }

    fn nabla_riemann(
        &self,
        _x: &Vector3<f64>,
        _u: &Vector3<f64>,
        _v: &Vector3<f64>,
        _w: &Vector3<f64>,
        _z: &Vector3<f64>,
    ) -> Result<Vector3<f64>> {
        Ok(Vector3::zeros())
    }
}

impl GeodesicFlow for Sphere {
    /// `ẍ = −|ẋ|² x`.
    fn geodesic_rhs(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        (*v, x * (-v.norm_squared()))
    }

    fn retract_state(&self, x: Vector3<f64>, v: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let x = x.normalize();
        let v = self.project_tangent(&x, &v);
        (x, v)
    }
}
