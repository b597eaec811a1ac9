//! Fourth-order Runge–Kutta stepping of the geodesic equation and its shooting
//! inverse.
//!
//! `rk_step(x, v, h)` advances the geodesic through `x` with velocity `v` by time
//! `h`; its position is written `rk₁(x, v, h)`. `rk_inverse(x, y, h)` returns the
//! velocity `v` with `rk₁(x, v, h) = y`, so `h · rk_inverse(x, y, h)` approximates
//! `log_x(y)`.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::error::{Error, Result};
use crate::geometry::Manifold;

/// A state vector that the Runge–Kutta update can combine linearly.
pub trait OdeState: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn is_finite_state(&self) -> bool;
}

impl OdeState for f64 {
    fn is_finite_state(&self) -> bool {
        self.is_finite()
    }
}

impl<const R: usize, const C: usize> OdeState for SMatrix<f64, R, C> {
    fn is_finite_state(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// Coupled position and velocity of the geodesic ODE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicState<P, V> {
    pub position: P,
    pub velocity: V,
}

impl<P, V> GeodesicState<P, V> {
    pub fn new(position: P, velocity: V) -> Self {
        Self { position, velocity }
    }
}

impl<P: OdeState, V: OdeState> Add for GeodesicState<P, V> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.position + o.position, self.velocity + o.velocity)
    }
}

impl<P: OdeState, V: OdeState> Mul<f64> for GeodesicState<P, V> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.position * s, self.velocity * s)
    }
}

impl<P: OdeState, V: OdeState> OdeState for GeodesicState<P, V> {
    fn is_finite_state(&self) -> bool {
        self.position.is_finite_state() && self.velocity.is_finite_state()
    }
}

/// Number of single RK4 steps taken during one transport run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RkCallCounter {
    calls: u64,
}

impl RkCallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self) {
        self.calls += 1;
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

/// One classical RK4 step of `ẏ = f(y)`.
pub fn rk4_step<S: OdeState>(y: S, h: f64, f: impl Fn(&S) -> S) -> Result<S> {
    let k1 = f(&y);
    let k2 = f(&(y + k1 * (0.5 * h)));
    let k3 = f(&(y + k2 * (0.5 * h)));
    let k4 = f(&(y + k3 * h));
    let out = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if out.is_finite_state() {
        Ok(out)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Manifolds whose geodesic equation can be integrated numerically.
pub trait GeodesicFlow: Manifold {
    /// Time derivative `(ẋ, v̇)` of the geodesic state.
    fn geodesic_rhs(&self, x: &Self::Point, v: &Self::Tangent) -> (Self::Point, Self::Tangent);

    /// Pull a state that drifted off the manifold after a step back onto it.
    fn retract_state(&self, x: Self::Point, v: Self::Tangent) -> (Self::Point, Self::Tangent) {
        (x, v)
    }
}

/// One RK4 step of the geodesic flow, followed by retraction. Counts one call.
pub fn rk_step<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    v: &M::Tangent,
    h: f64,
    counter: &mut RkCallCounter,
) -> Result<(M::Point, M::Tangent)> {
    counter.record();
    let out = rk4_step(GeodesicState::new(*x, *v), h, |s| {
        let (dx, dv) = m.geodesic_rhs(&s.position, &s.velocity);
        GeodesicState::new(dx, dv)
    })?;
    let (p, u) = m.retract_state(out.position, out.velocity);
    if p.is_finite_state() && u.is_finite_state() {
        Ok((p, u))
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Position after one RK4 step: `rk₁(x, v, h)`.
pub fn rk1<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    v: &M::Tangent,
    h: f64,
    counter: &mut RkCallCounter,
) -> Result<M::Point> {
    Ok(rk_step(m, x, v, h, counter)?.0)
}

/// Integrate the geodesic from `(x, v)` up to time `t` with `steps` equal steps.
pub fn integrate_geodesic<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    v: &M::Tangent,
    t: f64,
    steps: usize,
    counter: &mut RkCallCounter,
) -> Result<(M::Point, M::Tangent)> {
    if steps == 0 {
        return Err(Error::InvalidSpec("integration needs at least one step".into()));
    }
    if t == 0.0 {
        return Ok((*x, *v));
    }
    let h = t / steps as f64;
    let (mut p, mut u) = (*x, *v);
    for _ in 0..steps {
        (p, u) = rk_step(m, &p, &u, h, counter)?;
    }
    Ok((p, u))
}

/// Stopping rule of the shooting inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingOptions {
    /// Target chart residual. It is floored at a few ulps of the target point,
    /// since tiny steps ask for residuals below double precision.
    pub tol: f64,
    pub max_iters: usize,
}

impl ShootingOptions {
    pub fn effective_tol(&self, target_scale: f64) -> f64 {
        self.tol.max(32.0 * f64::EPSILON * (1.0 + target_scale))
    }
}

/// Residuals must shrink at least this much for the Jacobian to be reused.
const CHORD_CONTRACTION: f64 = 0.25;
const BACKTRACK_STEPS: usize = 5;

/// Initial velocity `v` such that integrating `(x, v)` to time `t` with `steps`
/// RK4 steps lands on `y`.
///
/// Damped Gauss–Newton on the tangent coordinates of `v`, minimizing the chart
/// residual. The Jacobian comes from central differences and is reused while the
/// residual keeps contracting quickly.
pub fn shoot<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    y: &M::Point,
    t: f64,
    steps: usize,
    opts: &ShootingOptions,
    counter: &mut RkCallCounter,
) -> Result<M::Tangent> {
    if !(t > 0.0) || steps == 0 {
        return Err(Error::InvalidSpec("shooting needs t > 0 and steps >= 1".into()));
    }
    let target = m.chart(y);
    let tol = opts.effective_tol(target.norm());
    let residual = |c: &DVector<f64>, counter: &mut RkCallCounter| -> Result<DVector<f64>> {
        let v = m.tangent_from_coords(x, c);
        let (p, _) = integrate_geodesic(m, x, &v, t, steps, counter)?;
        Ok(m.chart(&p) - &target)
    };

    let guess = m.project_velocity(x, &((*y - *x) * (1.0 / t)));
    let mut c = m.tangent_coords(x, &guess);
    let mut r = residual(&c, counter)?;
    let mut rn = r.norm();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut iterations = 0;
    let diverged = |iterations, best_residual| Error::ShootingDiverged {
        iterations,
        best_residual,
        tolerance: tol,
    };

    while rn > tol {
        if iterations == opts.max_iters {
            return Err(diverged(iterations, rn));
        }
        iterations += 1;
        let fresh = jac.is_none();
        let j = match jac.take() {
            Some(j) => j,
            None => jacobian(&residual, &c, counter)?,
        };
        let delta = gauss_newton_direction(&j, &r);

        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..BACKTRACK_STEPS {
            let trial = &c + &delta * step;
            if let Ok(rt) = residual(&trial, counter) {
                if rt.norm() < rn {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((ct, rt)) => {
                let rtn = rt.norm();
                if rtn <= CHORD_CONTRACTION * rn {
                    jac = Some(j);
                }
                c = ct;
                r = rt;
                rn = rtn;
            }
            // a fresh linearization that cannot reduce the residual means we are stuck
            None if fresh => return Err(diverged(iterations, rn)),
            None => {}
        }
    }
    Ok(m.tangent_from_coords(x, &c))
}

/// `rk⁻¹`: the velocity `v` with `rk₁(x, v, h) = y`.
pub fn rk_inverse<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    y: &M::Point,
    h: f64,
    opts: &ShootingOptions,
    counter: &mut RkCallCounter,
) -> Result<M::Tangent> {
    shoot(m, x, y, h, 1, opts, counter)
}

fn jacobian(
    residual: &impl Fn(&DVector<f64>, &mut RkCallCounter) -> Result<DVector<f64>>,
    c: &DVector<f64>,
    counter: &mut RkCallCounter,
) -> Result<DMatrix<f64>> {
    let d = 1e-6 * c.norm().max(1.0);
    let mut cols = Vec::with_capacity(c.len());
    for k in 0..c.len() {
        let mut cp = c.clone();
        let mut cm = c.clone();
        cp[k] += d;
        cm[k] -= d;
        cols.push((residual(&cp, counter)? - residual(&cm, counter)?) / (2.0 * d));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Least-squares Gauss–Newton step, or a scaled gradient step when the
/// linearization is unusable.
fn gauss_newton_direction(j: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    match svd.solve(&(-r), eps) {
        Ok(d) if d.iter().all(|x| x.is_finite()) => d,
        _ => {
            let g = j.transpose() * r;
            let scale = j.norm_squared().max(f64::MIN_POSITIVE);
            -g / scale
        }
    }
}
