//! SE(3) with the left-invariant metric `G = diag(1, 1, 1, β, 1, 1)`.
//!
//! The Lie algebra is spanned by the orthonormal basis
//!
//! ```text
//! e1, e2, e3 = L_x/√2, L_y/√2, L_z/√2      (infinitesimal rotations)
//! e4, e5, e6 = T_x/√β, T_y,    T_z         (infinitesimal translations)
//! ```
//!
//! Indices in this module are zero-based: `E1 = 0`, …, `E6 = 5`. Tangent vectors
//! at `γ` are stored as the left-translated coefficients `ξ` of `γ⁻¹γ̇` on that
//! basis, so the metric is the plain dot product of coefficient vectors.
//!
//! Curvature quantities are evaluated at the identity and extended by
//! left-invariance. The geodesic equation is the Euler–Poincaré system
//! `γ̇ = γ ξ̂`, `ξ̇ = ad*_ξ ξ`. When `β = 1` the metric is the product of the
//! bi-invariant metric on SO(3) with the flat metric on ℝ³, and exp, log and
//! parallel transport are available in closed form.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Matrix4, Rotation3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureOracle, Manifold};
use crate::ode::{rk4_step, GeodesicFlow, OdeState};

/// Coefficients on the orthonormal basis `e1..e6`.
pub type AlgebraVector = Vector6<f64>;

pub const E1: usize = 0;
pub const E2: usize = 1;
pub const E3: usize = 2;
pub const E4: usize = 3;
pub const E5: usize = 4;
pub const E6: usize = 5;

type Table = [[[f64; 6]; 6]; 6];

/// `τ = √β + 1/√β`.
pub fn tau(beta: f64) -> f64 {
    beta.sqrt() + 1.0 / beta.sqrt()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveBeta(beta))
    }
}

/// Unit basis vector `e_{i+1}`.
pub fn basis(i: usize) -> AlgebraVector {
    AlgebraVector::ith(i, 1.0)
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    w.cross_matrix()
}

/// Matrix form `ξ̂ ∈ se(3)` of algebra coefficients.
pub fn hat(beta: f64, xi: &AlgebraVector) -> Matrix4<f64> {
    let (omega, d) = split(beta, xi);
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&omega));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&d);
    m
}

/// Algebra coefficients of a 4×4 matrix; the rotation block's symmetric part is discarded.
pub fn vee(beta: f64, m: &Matrix4<f64>) -> AlgebraVector {
    let a = m.fixed_view::<3, 3>(0, 0);
    let omega = Vector3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    );
    join(beta, &omega, &m.fixed_view::<3, 1>(0, 3).into_owned())
}

/// Angular velocity `ω` and body-frame linear velocity `d` of `ξ`.
pub fn split(beta: f64, xi: &AlgebraVector) -> (Vector3<f64>, Vector3<f64>) {
    let omega = Vector3::new(xi[0], xi[1], xi[2]) * FRAC_1_SQRT_2;
    let d = Vector3::new(xi[3] / beta.sqrt(), xi[4], xi[5]);
    (omega, d)
}

/// Inverse of [`split`].
pub fn join(beta: f64, omega: &Vector3<f64>, d: &Vector3<f64>) -> AlgebraVector {
    let r = omega * SQRT_2;
    AlgebraVector::new(r[0], r[1], r[2], d[0] * beta.sqrt(), d[1], d[2])
}

/// Structure constants `[e_i, e_j] = Σ_k C_ij^k e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTable {
    pub beta: f64,
    pub tau: f64,
    pub c: [[[f64; 6]; 6]; 6],
}

impl StructureTable {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[i][j][k]
    }

    /// Lie bracket in coefficients.
    pub fn bracket(&self, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
        contract(&self.c, a, b)
    }

    /// Co-adjoint action `(ad*_a c)^j = Σ_ik a^i c^k C_ij^k`, characterised by
    /// `<[a, b], c> = <ad*_a c, b>`.
    pub fn ad_star(&self, a: &AlgebraVector, c: &AlgebraVector) -> AlgebraVector {
        let mut out = AlgebraVector::zeros();
        for i in 0..6 {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..6 {
                for k in 0..6 {
                    out[j] += a[i] * c[k] * self.c[i][j][k];
                }
            }
        }
        out
    }
}

/// Levi-Civita connection on left-invariant fields: `∇_{e_i} e_j = Σ_k Γ_ij^k e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelTable {
    pub beta: f64,
    pub gamma: [[[f64; 6]; 6]; 6],
}

impl ChristoffelTable {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[i][j][k]
    }

    /// `∇_a b` for left-invariant fields with constant coefficients `a`, `b`.
    pub fn connection(&self, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
        contract(&self.gamma, a, b)
    }
}

fn contract(t: &Table, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
    let mut out = AlgebraVector::zeros();
    for i in 0..6 {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..6 {
            let s = a[i] * b[j];
            if s == 0.0 {
                continue;
            }
            for k in 0..6 {
                out[k] += s * t[i][j][k];
            }
        }
    }
    out
}

/// Structure constants of the normalised basis.
///
/// The rotation generators close on direct cycles of (1,2,3) with `1/√2`; the
/// mixed brackets are
/// `C15^6 = −C16^5 = −√β C24^6 = C26^4/√β = √β C34^5 = −C35^4/√β = 1/√2`.
pub fn structure_constants(beta: f64) -> Result<StructureTable> {
    check_beta(beta)?;
    let s = beta.sqrt();
    let c0 = FRAC_1_SQRT_2;
    let mut c = [[[0.0; 6]; 6]; 6];
    let mut set = |i: usize, j: usize, k: usize, val: f64| {
        c[i][j][k] = val;
        c[j][i][k] = -val;
    };
    set(E1, E2, E3, c0);
    set(E2, E3, E1, c0);
    set(E3, E1, E2, c0);
    set(E1, E5, E6, c0);
    set(E1, E6, E5, -c0);
    set(E2, E4, E6, -c0 / s);
    set(E2, E6, E4, c0 * s);
    set(E3, E4, E5, c0 / s);
    set(E3, E5, E4, -c0 * s);
    Ok(StructureTable {
        beta,
        tau: tau(beta),
        c,
    })
}

/// `Γ_ij^k = ½(C_ij^k − C_jk^i + C_ki^j)`.
pub fn christoffels(beta: f64) -> Result<ChristoffelTable> {
    let c = structure_constants(beta)?.c;
    let mut gamma = [[[0.0; 6]; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                gamma[i][j][k] = 0.5 * (c[i][j][k] - c[j][k][i] + c[k][i][j]);
            }
        }
    }
    Ok(ChristoffelTable { beta, gamma })
}

/// Structure constants, Christoffel symbols and derived curvature maps for one β.
#[derive(Clone, Debug)]
pub struct Se3Tables {
    pub structure: StructureTable,
    pub christoffel: ChristoffelTable,
}

impl Se3Tables {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            structure: structure_constants(beta)?,
            christoffel: christoffels(beta)?,
        })
    }

    fn nabla(&self, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
        self.christoffel.connection(a, b)
    }

    /// `R(u,v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_[u,v] w`.
    pub fn riemann(&self, u: &AlgebraVector, v: &AlgebraVector, w: &AlgebraVector) -> AlgebraVector {
        let uv = self.structure.bracket(u, v);
        self.nabla(u, &self.nabla(v, w)) - self.nabla(v, &self.nabla(u, w)) - self.nabla(&uv, w)
    }

    /// `(∇_u R)(v,w)z = ∇_u(R(v,w)z) − R(∇_u v,w)z − R(v,∇_u w)z − R(v,w)∇_u z`.
    pub fn nabla_riemann(
        &self,
        u: &AlgebraVector,
        v: &AlgebraVector,
        w: &AlgebraVector,
        z: &AlgebraVector,
    ) -> AlgebraVector {
        self.nabla(u, &self.riemann(v, w, z))
            - self.riemann(&self.nabla(u, v), w, z)
            - self.riemann(v, &self.nabla(u, w), z)
            - self.riemann(v, w, &self.nabla(u, z))
    }
}

/// `R(e_i, e_j)e_k` at the identity.
pub fn curvature_at_identity(beta: f64, i: usize, j: usize, k: usize) -> Result<AlgebraVector> {
    let t = Se3Tables::new(beta)?;
    Ok(t.riemann(&basis(i), &basis(j), &basis(k)))
}

/// `(∇_{e_i} R)(e_j, e_k)e_l` at the identity.
pub fn nabla_curvature_at_identity(
    beta: f64,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<AlgebraVector> {
    let t = Se3Tables::new(beta)?;
    Ok(t.nabla_riemann(&basis(i), &basis(j), &basis(k), &basis(l)))
}

/// All `6⁴` values of `(∇_{e_i} R)(e_j, e_k)e_l`, indexed `[((i*6 + j)*6 + k)*6 + l]`.
pub fn nabla_curvature_table(beta: f64) -> Result<Vec<AlgebraVector>> {
    let t = Se3Tables::new(beta)?;
    let mut out = Vec::with_capacity(1296);
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                for l in 0..6 {
                    out.push(t.nabla_riemann(&basis(i), &basis(j), &basis(k), &basis(l)));
                }
            }
        }
    }
    Ok(out)
}

/// Rotation by the axis-angle vector `w` (Rodrigues, with a series near zero).
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let t2 = w.norm_squared();
    let t = t2.sqrt();
    let (a, b) = if t < 1e-4 {
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / t2)
    };
    let k = skew(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Axis-angle vector of a rotation matrix, with angle in `[0, π]`.
///
/// Uses `atan2` on the skew and trace parts so the angle stays accurate near 0
/// and near π.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let c = 0.5 * (r.trace() - 1.0);
    let sn = s.norm();
    let theta = sn.atan2(c);
    if c > -0.9 {
        // s = sin θ · axis
        let f = if sn < 1e-8 { 1.0 + theta * theta / 6.0 } else { theta / sn };
        return s * f;
    }
    // near π: the symmetric part gives a aᵀ = (Sym(R) − c I) / (1 − c)
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let b = b / (1.0 - c);
    let k = b.diagonal().imax();
    let mut axis: Vector3<f64> = b.column(k).into_owned();
    axis /= axis.norm();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Closest rotation in the Frobenius sense.
pub fn project_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (mut u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    if (u * vt).determinant() < 0.0 {
        let c = -u.column(2);
        u.set_column(2, &c);
    }
    u * vt
}

fn rotation(x: &Matrix4<f64>) -> Matrix3<f64> {
    x.fixed_view::<3, 3>(0, 0).into_owned()
}

fn translation(x: &Matrix4<f64>) -> Vector3<f64> {
    x.fixed_view::<3, 1>(0, 3).into_owned()
}

/// Homogeneous matrix from rotation and translation.
pub fn compose(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

fn inverse(x: &Matrix4<f64>) -> Matrix4<f64> {
    let rt = rotation(x).transpose();
    compose(&rt, &(-rt * translation(x)))
}

#[derive(Clone, Debug)]
pub struct Se3 {
    pub beta: f64,
    pub tol: f64,
    tables: Arc<Se3Tables>,
}

impl Se3 {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            beta,
            tol: 1e-9,
            tables: Arc::new(Se3Tables::new(beta)?),
        })
    }

    pub fn tables(&self) -> &Se3Tables {
        &self.tables
    }

    pub fn is_symmetric(&self) -> bool {
        self.beta == 1.0
    }

    fn require_beta_one(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::BetaNotOne(self.beta))
        }
    }

    pub fn hat(&self, xi: &AlgebraVector) -> Matrix4<f64> {
        hat(self.beta, xi)
    }

    pub fn vee(&self, m: &Matrix4<f64>) -> AlgebraVector {
        vee(self.beta, m)
    }

    /// Ambient velocity `γ ξ̂` of a tangent vector.
    pub fn ambient(&self, x: &Matrix4<f64>, xi: &AlgebraVector) -> Matrix4<f64> {
        x * self.hat(xi)
    }

    /// Euler–Poincaré right-hand side `ad*_ξ ξ`.
    pub fn euler_poincare(&self, xi: &AlgebraVector) -> AlgebraVector {
        self.tables.structure.ad_star(xi, xi)
    }

    /// Parallel transport along the geodesic `exp_x(t w)`, `t ∈ [0, 1]`, for any β,
    /// by integrating `γ̇ = γŵ`, `Ẋ = ad*_X X`, `η̇ = −∇_X η` with RK4.
    pub fn transport_by_connection(
        &self,
        x: &Matrix4<f64>,
        w: &AlgebraVector,
        v: &AlgebraVector,
        steps: usize,
    ) -> Result<(Matrix4<f64>, AlgebraVector)> {
        if steps == 0 {
            return Err(Error::InvalidSpec("transport needs at least one step".into()));
        }
        let h = 1.0 / steps as f64;
        let mut s = TransportState { g: *x, xi: *w, eta: *v };
        for _ in 0..steps {
            s = rk4_step(s, h, |s| TransportState {
                g: s.g * self.hat(&s.xi),
                xi: self.euler_poincare(&s.xi),
                eta: -self.tables.christoffel.connection(&s.xi, &s.eta),
            })?;
            s.g = retract(&s.g);
        }
        Ok((s.g, s.eta))
    }
}

#[derive(Clone, Copy)]
struct TransportState {
    g: Matrix4<f64>,
    xi: AlgebraVector,
    eta: AlgebraVector,
}

impl std::ops::Add for TransportState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { g: self.g + o.g, xi: self.xi + o.xi, eta: self.eta + o.eta }
    }
}

impl std::ops::Mul<f64> for TransportState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { g: self.g * s, xi: self.xi * s, eta: self.eta * s }
    }
}

impl OdeState for TransportState {
    fn is_finite_state(&self) -> bool {
        self.g.is_finite_state() && self.xi.is_finite_state() && self.eta.is_finite_state()
    }
}

/// Re-project the rotation block onto SO(3) and reset the homogeneous row.
fn retract(x: &Matrix4<f64>) -> Matrix4<f64> {
    compose(&project_rotation(&rotation(x)), &translation(x))
}

impl Manifold for Se3 {
    type Point = Matrix4<f64>;
    type Tangent = AlgebraVector;

    fn name(&self) -> &'static str {
        "se3"
    }

    fn dim(&self) -> usize {
        6
    }

    fn safe_radius(&self) -> f64 {
        1.0
    }

    fn has_closed_form(&self) -> bool {
        self.is_symmetric()
    }

    fn point_defect(&self, x: &Matrix4<f64>) -> f64 {
        let r = rotation(x);
        let row = (x.row(3) - Matrix4::<f64>::identity().row(3)).norm();
        (r.transpose() * r - Matrix3::identity()).norm() + (r.determinant() - 1.0).abs() + row
    }

    fn tangent_defect(&self, _x: &Matrix4<f64>, _v: &AlgebraVector) -> f64 {
        0.0
    }

    fn project_tangent(&self, _x: &Matrix4<f64>, v: &AlgebraVector) -> AlgebraVector {
        *v
    }

    fn project_velocity(&self, x: &Matrix4<f64>, dx: &Matrix4<f64>) -> AlgebraVector {
        self.vee(&(inverse(x) * dx))
    }

    fn zero_tangent(&self) -> AlgebraVector {
        AlgebraVector::zeros()
    }

    fn inner(&self, _x: &Matrix4<f64>, u: &AlgebraVector, v: &AlgebraVector) -> f64 {
        u.dot(v)
    }

    fn exp(&self, x: &Matrix4<f64>, v: &AlgebraVector) -> Result<Matrix4<f64>> {
        self.require_beta_one()?;
        let (omega, d) = split(self.beta, v);
        let r = rotation(x);
        Ok(compose(&(r * so3_exp(&omega)), &(translation(x) + r * d)))
    }

    fn log(&self, x: &Matrix4<f64>, y: &Matrix4<f64>) -> Result<AlgebraVector> {
        self.require_beta_one()?;
        let rt = rotation(x).transpose();
        let omega = so3_log(&(rt * rotation(y)));
        let d = rt * (translation(y) - translation(x));
        Ok(join(self.beta, &omega, &d))
    }

    /// Product transport: rotation coefficients turn by `exp(−ω̂/2)`, the
    /// translation keeps its world-frame direction.
    fn transport(
        &self,
        _x: &Matrix4<f64>,
        w: &AlgebraVector,
        v: &AlgebraVector,
    ) -> Result<AlgebraVector> {
        self.require_beta_one()?;
        let (omega, _) = split(self.beta, w);
        let (eta, d) = split(self.beta, v);
        let eta = so3_exp(&(-omega * 0.5)) * eta;
        let d = so3_exp(&omega).transpose() * d;
        Ok(join(self.beta, &eta, &d))
    }

    /// The nine rotation entries (row-major) followed by the translation.
    fn chart(&self, x: &Matrix4<f64>) -> DVector<f64> {
        let r = rotation(x);
        let t = translation(x);
        DVector::from_iterator(12, (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).chain(t.iter().copied()))
    }

    fn tangent_coords(&self, _x: &Matrix4<f64>, v: &AlgebraVector) -> DVector<f64> {
        DVector::from_column_slice(v.as_slice())
    }

    fn tangent_from_coords(&self, _x: &Matrix4<f64>, c: &DVector<f64>) -> AlgebraVector {
        AlgebraVector::from_column_slice(c.as_slice())
    }

    fn origin(&self) -> Matrix4<f64> {
        Matrix4::identity()
    }
}

impl CurvatureOracle for Se3 {
    fn riemann(
        &self,
        _x: &Matrix4<f64>,
        u: &AlgebraVector,
        v: &AlgebraVector,
        w: &AlgebraVector,
    ) -> AlgebraVector {
        self.tables.riemann(u, v, w)
    }

    fn nabla_riemann(
        &self,
        _x: &Matrix4<f64>,
        u: &AlgebraVector,
        v: &AlgebraVector,
        w: &AlgebraVector,
        z: &AlgebraVector,
    ) -> Result<AlgebraVector> {
        Ok(self.tables.nabla_riemann(u, v, w, z))
    }
}

impl GeodesicFlow for Se3 {
    fn geodesic_rhs(&self, x: &Matrix4<f64>, v: &AlgebraVector) -> (Matrix4<f64>, AlgebraVector) {
        (self.ambient(x, v), self.euler_poincare(v))
    }

    fn retract_state(&self, x: Matrix4<f64>, v: AlgebraVector) -> (Matrix4<f64>, AlgebraVector) {
        (retract(&x), v)
    }
}

/// Rotation about `axis` by `angle` as a homogeneous matrix.
pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix4<f64> {
    let r = Rotation3::from_scaled_axis(axis.normalize() * angle);
    compose(r.matrix(), &Vector3::zeros())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::random_tangent;
    use crate::ode::{integrate_geodesic, RkCallCounter};

    const BETAS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

    /// Basis matrices written out from the generators.
    fn basis_matrix(beta: f64, i: usize) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        let r = FRAC_1_SQRT_2;
        match i {
            0 => {
                m[(2, 1)] = r;
                m[(1, 2)] = -r;
            }
            1 => {
                m[(0, 2)] = r;
                m[(2, 0)] = -r;
            }
            2 => {
                m[(1, 0)] = r;
                m[(0, 1)] = -r;
            }
            3 => m[(0, 3)] = 1.0 / beta.sqrt(),
            4 => m[(1, 3)] = 1.0,
            _ => m[(2, 3)] = 1.0,
        }
        m
    }

    /// Decompose a matrix on the basis by least squares on its entries.
    fn coefficients(beta: f64, m: &Matrix4<f64>) -> AlgebraVector {
        let mut out = AlgebraVector::zeros();
        for k in 0..6 {
            let e = basis_matrix(beta, k);
            out[k] = e.dot(m) / e.norm_squared();
        }
        out
    }

    /// Structure constants from explicit matrix commutators.
    fn brute_force_structure(beta: f64) -> Table {
        let mut c = [[[0.0; 6]; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                let (a, b) = (basis_matrix(beta, i), basis_matrix(beta, j));
                let k = coefficients(beta, &(a * b - b * a));
                for l in 0..6 {
                    c[i][j][l] = k[l];
                }
            }
        }
        c
    }

    #[test]
    fn hat_matches_basis_matrices() {
        for &beta in &BETAS {
            for i in 0..6 {
                assert_abs_diff_eq!(hat(beta, &basis(i)), basis_matrix(beta, i), epsilon = 1e-15);
                assert_abs_diff_eq!(vee(beta, &basis_matrix(beta, i)), basis(i), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn inner_example() {
        let s = Se3::new(2.0).unwrap();
        assert_eq!(s.inner(&Matrix4::identity(), &basis(E4), &basis(E4)), 1.0);
    }

    #[test]
    fn structure_constants_match_matrix_commutators() {
        for &beta in &BETAS {
            let table = structure_constants(beta).unwrap();
            let brute = brute_force_structure(beta);
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        assert_abs_diff_eq!(table.c[i][j][k], brute[i][j][k], epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn structure_constant_examples() {
        let c = structure_constants(2.0).unwrap();
        assert_abs_diff_eq!(c.get(E1, E2, E3), FRAC_1_SQRT_2);
        assert_abs_diff_eq!(c.get(E1, E5, E6), FRAC_1_SQRT_2);
        assert_abs_diff_eq!(c.get(E1, E6, E5), -FRAC_1_SQRT_2);
        let c1 = structure_constants(1.0).unwrap();
        assert_abs_diff_eq!(c1.get(E2, E4, E6), -FRAC_1_SQRT_2);
        assert!(matches!(structure_constants(0.0), Err(Error::NonPositiveBeta(_))));
        assert!(matches!(christoffels(-1.0), Err(Error::NonPositiveBeta(_))));
    }

    #[test]
    fn christoffel_examples_and_identities() {
        for &beta in &BETAS {
            let g = christoffels(beta).unwrap();
            let c = structure_constants(beta).unwrap();
            let t = tau(beta);
            assert_abs_diff_eq!(g.get(E1, E2, E3), 1.0 / (2.0 * SQRT_2), epsilon = 1e-15);
            assert_abs_diff_eq!(g.get(E2, E4, E6), -t / (2.0 * SQRT_2), epsilon = 1e-15);
            assert_abs_diff_eq!(g.get(E1, E5, E6), FRAC_1_SQRT_2, epsilon = 1e-15);
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        // metric compatibility
                        assert_eq!(g.gamma[i][j][k] + g.gamma[i][k][j], 0.0);
                        // torsion-free: Γ_ij − Γ_ji = C_ij
                        assert_abs_diff_eq!(
                            g.gamma[i][j][k] - g.gamma[j][i][k],
                            c.c[i][j][k],
                            epsilon = 1e-14
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn christoffels_follow_the_chained_equalities() {
        // Γ15^6 = −Γ16^5 = 1/√2 and the 2/τ-scaled chain on the mixed entries
        let beta = 2.0;
        let g = christoffels(beta).unwrap();
        let t = tau(beta);
        let r = FRAC_1_SQRT_2;
        assert_abs_diff_eq!(g.get(E1, E6, E5), -r, epsilon = 1e-15);
        assert_abs_diff_eq!(-(2.0 / t) * g.get(E2, E4, E6), r, epsilon = 1e-15);
        assert_abs_diff_eq!((2.0 / t) * g.get(E2, E6, E4), r, epsilon = 1e-15);
        assert_abs_diff_eq!((2.0 / t) * g.get(E3, E4, E5), r, epsilon = 1e-15);
        assert_abs_diff_eq!(-(2.0 / t) * g.get(E3, E5, E4), r, epsilon = 1e-15);
    }

    #[test]
    fn ad_star_satisfies_defining_identity() {
        let c = structure_constants(2.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    let (a, b, cc) = (basis(i), basis(j), basis(k));
                    let lhs = c.bracket(&a, &b).dot(&cc);
                    let rhs = c.ad_star(&a, &cc).dot(&b);
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);
                }
            }
        }
        assert_eq!(c.ad_star(&AlgebraVector::zeros(), &basis(E2)), AlgebraVector::zeros());
        let c1 = structure_constants(1.0).unwrap();
        assert_eq!(c1.ad_star(&basis(E1), &basis(E1)), AlgebraVector::zeros());
    }

    #[test]
    fn euler_poincare_examples() {
        let s1 = Se3::new(1.0).unwrap();
        let (dg, dx) = s1.geodesic_rhs(&Matrix4::identity(), &AlgebraVector::zeros());
        assert_eq!((dg, dx), (Matrix4::zeros(), AlgebraVector::zeros()));
        let (dg, dx) = s1.geodesic_rhs(&Matrix4::identity(), &basis(E5));
        assert_eq!(dx, AlgebraVector::zeros());
        assert_eq!(dg, basis_matrix(1.0, E5));
        let s2 = Se3::new(2.0).unwrap();
        let xi = basis(E2) + basis(E4);
        assert!(s2.euler_poincare(&xi).norm() > 0.1);
        // ad*_X X is orthogonal to X, and equals −∇_X X
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = AlgebraVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
            assert_abs_diff_eq!(s2.euler_poincare(&x).dot(&x), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(
                s2.euler_poincare(&x),
                -s2.tables().christoffel.connection(&x, &x),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn curvature_examples() {
        for &beta in &BETAS {
            let t = tau(beta);
            let r324 = curvature_at_identity(beta, E3, E2, E4).unwrap();
            assert!(r324.norm() < 1e-15);
            let r325 = curvature_at_identity(beta, E3, E2, E5).unwrap();
            assert_abs_diff_eq!(r325, basis(E6) * (0.5 * (1.0 - t * t / 4.0)), epsilon = 1e-15);
            for i in 0..6 {
                for k in 0..6 {
                    assert_eq!(curvature_at_identity(beta, i, i, k).unwrap(), AlgebraVector::zeros());
                }
            }
        }
    }

    #[test]
    fn curvature_symmetries() {
        for &beta in &BETAS {
            let t = Se3Tables::new(beta).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        let (a, b, c) = (basis(i), basis(j), basis(k));
                        assert_eq!(t.riemann(&a, &b, &c), -t.riemann(&b, &a, &c));
                        let bianchi = t.riemann(&a, &b, &c) + t.riemann(&b, &c, &a) + t.riemann(&c, &a, &b);
                        assert!(bianchi.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_subgroup_has_round_sphere_curvature() {
        // the bi-invariant SO(3) factor with this normalisation has sectional curvature 1/8
        let t = Se3Tables::new(1.0).unwrap();
        let k = t.riemann(&basis(E2), &basis(E1), &basis(E1)).dot(&basis(E2));
        assert_abs_diff_eq!(k, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn nabla_curvature_vanishes_iff_beta_is_one() {
        let table = nabla_curvature_table(1.0).unwrap();
        assert_eq!(table.len(), 1296);
        assert!(table.iter().all(|v| v.norm() <= 1e-12));
        for &beta in &[1.5, 2.0, 3.0] {
            let max = nabla_curvature_table(beta).unwrap().iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(max > 1e-3);
        }
    }

    #[test]
    fn nabla_curvature_witness() {
        let beta = 2.0;
        let t = tau(beta);
        let expected = basis(E6) * (-t / (4.0 * SQRT_2) * (1.0 - t * t / 4.0));
        let got = nabla_curvature_at_identity(beta, E3, E3, E2, E4).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    assert_eq!(nabla_curvature_at_identity(beta, i, j, j, k).unwrap(), AlgebraVector::zeros());
                }
            }
        }
    }

    #[test]
    fn so3_maps_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            let angle = rng.random_range(0.0..PI - 1e-6);
            let w = axis * angle;
            let r = so3_exp(&w);
            assert_abs_diff_eq!(r, *Rotation3::from_scaled_axis(w).matrix(), epsilon = 1e-14);
            assert_abs_diff_eq!(so3_log(&r), w, epsilon = 1e-9);
        }
        assert_eq!(so3_log(&Matrix3::identity()), Vector3::zeros());
        let tiny = Vector3::new(1e-9, -2e-9, 3e-10);
        assert_abs_diff_eq!(so3_log(&so3_exp(&tiny)), tiny, epsilon = 1e-20);
        let half_turn = so3_log(&so3_exp(&(Vector3::z() * PI)));
        assert_abs_diff_eq!(half_turn.norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let s = Se3::new(1.0).unwrap();
        let id = Matrix4::identity();
        let shift = s.exp(&id, &basis(E4)).unwrap();
        assert_abs_diff_eq!(shift, compose(&Matrix3::identity(), &Vector3::x()), epsilon = 1e-15);
        // a quarter turn about z
        let xi = join(1.0, &(Vector3::z() * FRAC_PI_2), &Vector3::zeros());
        let q = s.exp(&id, &xi).unwrap();
        assert_abs_diff_eq!(q, rotation_about(&Vector3::z(), FRAC_PI_2), epsilon = 1e-15);
        let b2 = Se3::new(2.0).unwrap();
        assert!(matches!(b2.exp(&id, &xi), Err(Error::BetaNotOne(_))));
        assert!(matches!(b2.log(&id, &q), Err(Error::BetaNotOne(_))));
        assert!(matches!(b2.transport(&id, &xi, &xi), Err(Error::BetaNotOne(_))));
    }

    #[test]
    fn closed_form_log_inverts_exp() {
        let s = Se3::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = s.exp(&Matrix4::identity(), &random_tangent(&s, &Matrix4::identity(), 1.5, &mut rng)).unwrap();
            let v = random_tangent(&s, &x, rng.random_range(0.0..1.0), &mut rng);
            let y = s.exp(&x, &v).unwrap();
            assert!(s.point_defect(&y) < 1e-13);
            assert_abs_diff_eq!(s.log(&x, &y).unwrap(), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn numerical_geodesics_match_closed_form_at_beta_one() {
        let s = Se3::new(1.0).unwrap();
        let id = Matrix4::identity();
        let v = AlgebraVector::new(0.3, -0.5, 0.4, 0.7, 0.2, -0.6);
        let exact = s.exp(&id, &v).unwrap();
        let (p, _) = integrate_geodesic(&s, &id, &v, 1.0, 100, &mut RkCallCounter::new()).unwrap();
        assert!(s.point_gap(&p, &exact) < 1e-7);
    }

    #[test]
    fn euler_poincare_conserves_speed() {
        let s = Se3::new(3.0).unwrap();
        let v = AlgebraVector::new(0.3, -0.5, 0.4, 0.7, 0.2, -0.6);
        let (_, u) = integrate_geodesic(&s, &Matrix4::identity(), &v, 1.0, 50, &mut RkCallCounter::new()).unwrap();
        assert_abs_diff_eq!(u.norm(), v.norm(), epsilon = 1e-7);
    }

    #[test]
    fn connection_transport_matches_closed_form_at_beta_one() {
        let s = Se3::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let x = s.exp(&Matrix4::identity(), &random_tangent(&s, &Matrix4::identity(), 1.0, &mut rng)).unwrap();
            let w = random_tangent(&s, &x, 0.9, &mut rng);
            let v = random_tangent(&s, &x, 1.0, &mut rng);
            let (end, pv) = s.transport_by_connection(&x, &w, &v, 200).unwrap();
            assert!(s.point_gap(&end, &s.exp(&x, &w).unwrap()) < 1e-9);
            assert_abs_diff_eq!(pv, s.transport(&x, &w, &v).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn connection_transport_is_isometric_for_any_beta() {
        let s = Se3::new(2.0).unwrap();
        let w = AlgebraVector::new(0.1, 0.2, 0.6, 0.3, -0.2, 0.1);
        let v = basis(E4) + basis(E1) * 0.5;
        let (_, pv) = s.transport_by_connection(&Matrix4::identity(), &w, &v, 100).unwrap();
        assert_abs_diff_eq!(pv.norm(), v.norm(), epsilon = 1e-9);
    }

    #[test]
    fn velocity_projection_recovers_coefficients() {
        let s = Se3::new(2.0).unwrap();
        let x = compose(&so3_exp(&Vector3::new(0.3, 0.1, -0.2)), &Vector3::new(1.0, 2.0, 3.0));
        let xi = AlgebraVector::new(0.3, -0.5, 0.4, 0.7, 0.2, -0.6);
        assert_abs_diff_eq!(s.project_velocity(&x, &s.ambient(&x, &xi)), xi, epsilon = 1e-14);
        assert!(s.point_defect(&x) < 1e-14);
        assert_eq!(s.chart(&x).len(), 12);
    }
}
