//! Symmetric positive-definite 3×3 matrices with the affine-invariant metric
//! `g_Σ(U, V) = tr(Σ⁻¹ U Σ⁻¹ V)`.

use nalgebra::{DVector, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureOracle, Manifold};
use crate::ode::GeodesicFlow;

/// Eigenvalues are clamped at this floor before taking logarithms or roots.
pub const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug)]
pub struct Spd {
    pub tol: f64,
}

impl Default for Spd {
    fn default() -> Self {
        Self { tol: 1e-9 }
    }
}

pub fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

fn asymmetry(m: &Matrix3<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Apply `f` to the eigenvalues of the symmetric part of `m`.
fn eig_map(m: &Matrix3<f64>, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
    let e = SymmetricEigen::new(symmetrize(m));
    let d = Matrix3::from_diagonal(&e.eigenvalues.map(f));
    symmetrize(&(e.eigenvectors * d * e.eigenvectors.transpose()))
}

pub fn sym_expm(m: &Matrix3<f64>) -> Matrix3<f64> {
    eig_map(m, f64::exp)
}

pub fn sym_logm(m: &Matrix3<f64>) -> Matrix3<f64> {
    eig_map(m, |l| l.max(EIGEN_FLOOR).ln())
}

pub fn sym_sqrtm(m: &Matrix3<f64>) -> Matrix3<f64> {
    eig_map(m, |l| l.max(EIGEN_FLOOR).sqrt())
}

pub fn sym_inv_sqrtm(m: &Matrix3<f64>) -> Matrix3<f64> {
    eig_map(m, |l| 1.0 / l.max(EIGEN_FLOOR).sqrt())
}

/// Tangent basis: the three diagonal units followed by `E12+E21, E13+E31, E23+E32`.
const OFF_DIAGONAL: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl Spd {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_symmetric(&self, m: &Matrix3<f64>) -> Result<()> {
        let defect = asymmetry(m);
        if defect > self.tol * m.norm().max(1.0) {
            return Err(Error::NonSymmetricInput { defect });
        }
        Ok(())
    }

    fn check_point(&self, s: &Matrix3<f64>) -> Result<()> {
        self.check_symmetric(s)?;
        let min = SymmetricEigen::new(symmetrize(s)).eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(())
    }

    /// `Σ^{1/2}` and `Σ^{-1/2}` from a single eigendecomposition.
    fn roots(&self, s: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
        let e = SymmetricEigen::new(symmetrize(s));
        let q = e.eigenvectors;
        let l = e.eigenvalues.map(|l| l.max(EIGEN_FLOOR).sqrt());
        let half = q * Matrix3::from_diagonal(&l) * q.transpose();
        let inv_half = q * Matrix3::from_diagonal(&l.map(|x| 1.0 / x)) * q.transpose();
        (symmetrize(&half), symmetrize(&inv_half))
    }

    /// Transport of `V` along `t -> exp_Σ(tW)` to time `t`.
    pub fn transport_to(
        &self,
        s: &Matrix3<f64>,
        w: &Matrix3<f64>,
        v: &Matrix3<f64>,
        t: f64,
    ) -> Result<Matrix3<f64>> {
        self.check_symmetric(w)?;
        self.check_symmetric(v)?;
        if t == 0.0 {
            return Ok(*v);
        }
        let (half, inv_half) = self.roots(s);
        let p = half * sym_expm(&(inv_half * w * inv_half * (0.5 * t))) * inv_half;
        Ok(symmetrize(&(p * v * p.transpose())))
    }
}

impl Manifold for Spd {
    type Point = Matrix3<f64>;
    type Tangent = Matrix3<f64>;

    fn name(&self) -> &'static str {
        "spd"
    }

    fn dim(&self) -> usize {
        6
    }

    fn safe_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn point_defect(&self, x: &Matrix3<f64>) -> f64 {
        let min = SymmetricEigen::new(symmetrize(x)).eigenvalues.min();
        asymmetry(x) + (-min).max(0.0)
    }

    fn tangent_defect(&self, _x: &Matrix3<f64>, v: &Matrix3<f64>) -> f64 {
        asymmetry(v)
    }

    fn project_tangent(&self, _x: &Matrix3<f64>, v: &Matrix3<f64>) -> Matrix3<f64> {
        symmetrize(v)
    }

    fn project_velocity(&self, _x: &Matrix3<f64>, dx: &Matrix3<f64>) -> Matrix3<f64> {
        symmetrize(dx)
    }

    fn zero_tangent(&self) -> Matrix3<f64> {
        Matrix3::zeros()
    }

    fn inner(&self, x: &Matrix3<f64>, u: &Matrix3<f64>, v: &Matrix3<f64>) -> f64 {
        let inv = x.try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN));
        (inv * u * inv * v).trace()
    }

    fn exp(&self, x: &Matrix3<f64>, w: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        self.check_symmetric(w)?;
        let (half, inv_half) = self.roots(x);
        Ok(symmetrize(&(half * sym_expm(&(inv_half * w * inv_half)) * half)))
    }

    fn log(&self, x: &Matrix3<f64>, y: &Matrix3<f64>) -> Result<Matrix3<f64>> {
        self.check_point(x)?;
        self.check_point(y)?;
        let (half, inv_half) = self.roots(x);
        Ok(symmetrize(&(half * sym_logm(&(inv_half * y * inv_half)) * half)))
    }

    fn transport(
        &self,
        x: &Matrix3<f64>,
        w: &Matrix3<f64>,
        v: &Matrix3<f64>,
    ) -> Result<Matrix3<f64>> {
        self.transport_to(x, w, v, 1.0)
    }

    /// The six unique entries `(a11, a22, a33, a12, a13, a23)`.
    fn chart(&self, x: &Matrix3<f64>) -> DVector<f64> {
        let mut c = vec![x[(0, 0)], x[(1, 1)], x[(2, 2)]];
        c.extend(OFF_DIAGONAL.iter().map(|&(i, j)| 0.5 * (x[(i, j)] + x[(j, i)])));
        DVector::from_vec(c)
    }

    fn tangent_coords(&self, _x: &Matrix3<f64>, v: &Matrix3<f64>) -> DVector<f64> {
        self.chart(v)
    }

    fn tangent_from_coords(&self, _x: &Matrix3<f64>, c: &DVector<f64>) -> Matrix3<f64> {
        let mut m = Matrix3::from_diagonal(&nalgebra::Vector3::new(c[0], c[1], c[2]));
        for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
            m[(i, j)] = c[3 + k];
            m[(j, i)] = c[3 + k];
        }
        m
    }

    fn origin(&self) -> Matrix3<f64> {
        Matrix3::identity()
    }
}

impl CurvatureOracle for Spd {
    /// `R(X,Y)Z = −¼[[X,Y],Z]` at the identity, moved to `Σ` by the congruence `Σ^{1/2}`.
    fn riemann(
        &self,
        x: &Matrix3<f64>,
        u: &Matrix3<f64>,
        v: &Matrix3<f64>,
        w: &Matrix3<f64>,
    ) -> Matrix3<f64> {
        let (half, inv_half) = self.roots(x);
        let white = |a: &Matrix3<f64>| inv_half * a * inv_half;
        let (a, b, c) = (white(u), white(v), white(w));
        let ab = a * b - b * a;
        let r = (ab * c - c * ab) * -0.25;
        symmetrize(&(half * r * half))
    }

    fn nabla_riemann(
        &self,
        _x: &Matrix3<f64>,
        _u: &Matrix3<f64>,
        _v: &Matrix3<f64>,
        _w: &Matrix3<f64>,
        _z: &Matrix3<f64>,
    ) -> Result<Matrix3<f64>> {
        Ok(Matrix3::zeros())
    }
}

impl GeodesicFlow for Spd {
    /// `Σ̇ = V`, `V̇ = V Σ⁻¹ V`.
    fn geodesic_rhs(&self, x: &Matrix3<f64>, v: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
        let inv = x.try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN));
        (*v, v * inv * v)
    }

    fn retract_state(&self, x: Matrix3<f64>, v: Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
        (symmetrize(&x), symmetrize(&v))
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{random_tangent, sectional_curvature_fd};

    fn random_spd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let s = Spd::new();
        let w = random_tangent(&s, &Matrix3::identity(), rng.random_range(0.1..2.0), rng);
        s.exp(&Matrix3::identity(), &w).unwrap()
    }

    #[test]
    fn inner_example() {
        let s = Spd::new();
        let u = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(s.inner(&Matrix3::identity(), &u, &u), 1.0);
    }

    #[test]
    fn exp_log_examples() {
        let s = Spd::new();
        let i = Matrix3::identity();
        let w = Matrix3::from_diagonal(&Vector3::new(0.5, -1.0, 2.0));
        let e = Matrix3::from_diagonal(&Vector3::new(0.5f64.exp(), (-1.0f64).exp(), 2.0f64.exp()));
        assert_abs_diff_eq!(s.exp(&i, &w).unwrap(), e, epsilon = 1e-13);
        assert_abs_diff_eq!(s.log(&i, &e).unwrap(), w, epsilon = 1e-13);
        let sigma = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0);
        assert_abs_diff_eq!(s.exp(&sigma, &Matrix3::zeros()).unwrap(), sigma, epsilon = 1e-14);
        assert_abs_diff_eq!(s.log(&sigma, &sigma).unwrap(), Matrix3::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn exp_rejects_asymmetric_tangent() {
        let s = Spd::new();
        let w = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(s.exp(&Matrix3::identity(), &w), Err(Error::NonSymmetricInput { .. })));
        assert!(matches!(s.transport(&Matrix3::identity(), &w, &w), Err(Error::NonSymmetricInput { .. })));
    }

    #[test]
    fn log_rejects_indefinite_point() {
        let s = Spd::new();
        let bad = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(matches!(
            s.log(&Matrix3::identity(), &bad),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn log_inverts_exp_randomized() {
        let s = Spd::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let x = random_spd(&mut rng);
            let w = random_tangent(&s, &x, rng.random_range(0.05..3.0), &mut rng);
            let y = s.exp(&x, &w).unwrap();
            assert!(s.point_defect(&y) < 1e-12);
            assert_abs_diff_eq!(s.log(&x, &y).unwrap(), w, epsilon = 1e-9 * (1.0 + w.norm()));
        }
    }

    #[test]
    fn transport_examples() {
        let s = Spd::new();
        let i = Matrix3::identity();
        let w = Matrix3::from_diagonal(&Vector3::new(0.3, -0.7, 1.1));
        let v = Matrix3::new(1.0, 0.2, 0.0, 0.2, 0.0, 0.5, 0.0, 0.5, -1.0);
        assert_eq!(s.transport_to(&i, &w, &v, 0.0).unwrap(), v);
        let expected = Matrix3::from_diagonal(&w.diagonal().map(|a| a * a.exp()));
        assert_abs_diff_eq!(s.transport(&i, &w, &w).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn transport_is_isometric_and_affine_invariant() {
        let s = Spd::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = random_spd(&mut rng);
            let w = random_tangent(&s, &x, 1.2, &mut rng);
            let v = random_tangent(&s, &x, 0.8, &mut rng);
            let y = s.exp(&x, &w).unwrap();
            let pv = s.transport(&x, &w, &v).unwrap();
            assert_abs_diff_eq!(s.norm(&y, &pv), s.norm(&x, &v), epsilon = 1e-12);

            let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0)) + Matrix3::identity() * 2.0;
            let act = |m: &Matrix3<f64>| a * m * a.transpose();
            let lhs = s.transport(&act(&x), &act(&w), &act(&v)).unwrap();
            assert_abs_diff_eq!(lhs, act(&pv), epsilon = 1e-10 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn sectional_curvature_is_non_positive() {
        let s = Spd::new();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let x = random_spd(&mut rng);
            let u = random_tangent(&s, &x, 1.0, &mut rng);
            let v = random_tangent(&s, &x, 1.0, &mut rng);
            let v = v - u * s.inner(&x, &u, &v);
            let v = v * (1.0 / s.norm(&x, &v));
            let k = sectional_curvature_fd(&s, &x, &u, &v, 1e-3).unwrap();
            assert!(k <= 1e-8, "kappa = {k}");
            // and it agrees with the analytic oracle
            let exact = s.inner(&x, &s.riemann(&x, &v, &u, &u), &v);
            assert!((k - exact).abs() < 1e-4, "fd {k} vs exact {exact}");
        }
    }

    #[test]
    fn curvature_of_default_plane_is_minus_quarter() {
        let s = Spd::new();
        let i = Matrix3::identity();
        let w = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
        let v = s.tangent_from_coords(&i, &DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
            * std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.norm(&i, &v), 1.0, epsilon = 1e-15);
        let k = s.inner(&i, &s.riemann(&i, &v, &w, &w), &v);
        assert_abs_diff_eq!(k, -0.25, epsilon = 1e-15);
    }

    #[test]
    fn tangent_coordinates_round_trip() {
        let s = Spd::new();
        let c = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let m = s.tangent_from_coords(&Matrix3::identity(), &c);
        assert_eq!(s.tangent_coords(&Matrix3::identity(), &m), c);
    }
}
