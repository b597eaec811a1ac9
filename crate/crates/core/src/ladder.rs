//! Ladder constructions for parallel transport along a geodesic.
//!
//! Each elementary construction ("rung") maps a small vector `v` at `x` to an
//! approximation of its parallel transport to `x_w = exp_x(w)`:
//!
//! * Schild's ladder: close the geodesic parallelogram on `x, x_v, x_w` through
//!   the midpoint of the diagonal `x_v x_w`.
//! * Pole ladder: reflect `x_v` through the midpoint of the main geodesic.
//! * Averaged Schild: `(schild(v) − schild(−v)) / 2`, cancelling the curvature term.
//! * Fanning: central difference of two perturbed geodesics (a Jacobi field).
//!
//! [`transport`] iterates a rung `n` times along `t -> exp_x(t w)`, shrinking the
//! vector by `n^α` before each rung and growing it back afterwards. The geodesic
//! maps come either from the manifold's closed forms or from single RK4 steps and
//! their shooting inverse with `h = 1/n` ([`Backend::Infinitesimal`]).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, TangentOf, TangentVector, ToleranceConfig};
use crate::ode::{
    integrate_geodesic, rk1, rk_inverse, rk_step, shoot, GeodesicFlow, RkCallCounter,
    ShootingOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Schild,
    Pole,
    AveragedSchild,
    Fanning,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Schild, Scheme::Pole, Scheme::AveragedSchild, Scheme::Fanning];

    /// Scaling exponent used when none is given.
    pub fn default_alpha(self) -> f64 {
        match self {
            Scheme::Pole => 1.0,
            Scheme::Schild | Scheme::AveragedSchild | Scheme::Fanning => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Schild => "schild",
            Scheme::Pole => "pole",
            Scheme::AveragedSchild => "averaged_schild",
            Scheme::Fanning => "fanning",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schild" => Ok(Scheme::Schild),
            "pole" => Ok(Scheme::Pole),
            "averaged" | "averaged_schild" => Ok(Scheme::AveragedSchild),
            "fanning" => Ok(Scheme::Fanning),
            _ => Err(Error::InvalidSpec(format!(
                "unknown scheme `{s}` (expected schild, pole, averaged or fanning)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Closed-form exp, log and main geodesic.
    ClosedForm,
    /// One RK4 step per exp and its shooting inverse per log, with `h = 1/n`.
    Infinitesimal,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::ClosedForm => "closed_form",
            Backend::Infinitesimal => "infinitesimal",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" | "closed_form" => Ok(Backend::ClosedForm),
            "infinitesimal" => Ok(Backend::Infinitesimal),
            _ => Err(Error::InvalidSpec(format!(
                "unknown backend `{s}` (expected closed or infinitesimal)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub scheme: Scheme,
    /// Number of rungs.
    pub n: usize,
    /// Scaling exponent; `None` selects the scheme default. Ignored by fanning,
    /// whose step and perturbation sizes are both `1/n`.
    pub alpha: Option<f64>,
    pub backend: Backend,
    pub tolerances: ToleranceConfig,
}

impl LadderConfig {
    pub fn new(scheme: Scheme, n: usize, backend: Backend) -> Self {
        Self {
            scheme,
            n,
            alpha: None,
            backend,
            tolerances: ToleranceConfig::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    /// Effective scaling exponent.
    pub fn alpha(&self) -> f64 {
        match self.scheme {
            Scheme::Fanning => 2.0,
            s => self.alpha.unwrap_or(s.default_alpha()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("the rung count must be at least 1".into()));
        }
        let a = self.alpha();
        if !(1.0..=2.0).contains(&a) {
            return Err(Error::InvalidSpec(format!("alpha must lie in [1, 2], got {a}")));
        }
        self.tolerances.validate()
    }

    fn shooting(&self) -> ShootingOptions {
        ShootingOptions {
            tol: self.tolerances.log_tolerance(1.0 / self.n as f64),
            max_iters: self.tolerances.max_gd_iters,
        }
    }
}

/// Output of one ladder run.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportResult<P, V> {
    /// The transported vector, attached to `endpoint`.
    pub transported: TangentVector<P, V>,
    pub endpoint: P,
    /// Velocity of the main geodesic at the endpoint.
    pub endpoint_velocity: V,
    pub rk_calls: u64,
    pub wall_time: f64,
}

pub type TransportOf<M> = TransportResult<<M as Manifold>::Point, <M as Manifold>::Tangent>;

/// Exponential and logarithm used inside the rungs.
pub trait Geodesics<M: Manifold> {
    fn manifold(&self) -> &M;
    fn exp(&mut self, x: &M::Point, v: &M::Tangent) -> Result<M::Point>;
    fn log(&mut self, x: &M::Point, y: &M::Point) -> Result<M::Tangent>;
    /// RK4 steps taken so far (zero for closed forms).
    fn rk_calls(&self) -> u64 {
        0
    }
}

/// The manifold's closed-form maps.
pub struct ClosedForm<'a, M>(pub &'a M);

impl<M: Manifold> Geodesics<M> for ClosedForm<'_, M> {
    fn manifold(&self) -> &M {
        self.0
    }
    fn exp(&mut self, x: &M::Point, v: &M::Tangent) -> Result<M::Point> {
        self.0.exp(x, v)
    }
    fn log(&mut self, x: &M::Point, y: &M::Point) -> Result<M::Tangent> {
        self.0.log(x, y)
    }
}

/// `exp_x(u) ≈ rk₁(x, u/h, h)` and `log_x(y) ≈ h · rk⁻¹(x, y, h)`.
pub struct Infinitesimal<'a, M> {
    pub m: &'a M,
    pub h: f64,
    pub opts: ShootingOptions,
    pub counter: RkCallCounter,
}

impl<'a, M: GeodesicFlow> Infinitesimal<'a, M> {
    pub fn new(m: &'a M, h: f64, opts: ShootingOptions) -> Self {
        Self {
            m,
            h,
            opts,
            counter: RkCallCounter::new(),
        }
    }
}

impl<M: GeodesicFlow> Geodesics<M> for Infinitesimal<'_, M> {
    fn manifold(&self) -> &M {
        self.m
    }
    fn exp(&mut self, x: &M::Point, v: &M::Tangent) -> Result<M::Point> {
        rk1(self.m, x, &(*v * (1.0 / self.h)), self.h, &mut self.counter)
    }
    fn log(&mut self, x: &M::Point, y: &M::Point) -> Result<M::Tangent> {
        Ok(rk_inverse(self.m, x, y, self.h, &self.opts, &mut self.counter)? * self.h)
    }
    fn rk_calls(&self) -> u64 {
        self.counter.calls()
    }
}

/// Accurate numerical geodesics: `steps` RK4 steps per exp and multi-step
/// shooting per log. Used where no closed form exists but exact maps are wanted.
pub struct Shooting<'a, M> {
    pub m: &'a M,
    pub steps: usize,
    pub opts: ShootingOptions,
    pub counter: RkCallCounter,
}

impl<'a, M: GeodesicFlow> Shooting<'a, M> {
    pub fn new(m: &'a M, steps: usize, tol: f64) -> Self {
        Self {
            m,
            steps,
            opts: ShootingOptions { tol, max_iters: 50 },
            counter: RkCallCounter::new(),
        }
    }
}

impl<M: GeodesicFlow> Geodesics<M> for Shooting<'_, M> {
    fn manifold(&self) -> &M {
        self.m
    }
    fn exp(&mut self, x: &M::Point, v: &M::Tangent) -> Result<M::Point> {
        Ok(integrate_geodesic(self.m, x, v, 1.0, self.steps, &mut self.counter)?.0)
    }
    fn log(&mut self, x: &M::Point, y: &M::Point) -> Result<M::Tangent> {
        if x == y {
            return Ok(self.m.zero_tangent());
        }
        shoot(self.m, x, y, 1.0, self.steps, &self.opts, &mut self.counter)
    }
    fn rk_calls(&self) -> u64 {
        self.counter.calls()
    }
}

fn schild_rung<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    x_w: &M::Point,
    v: &M::Tangent,
) -> Result<M::Tangent> {
    let x_v = g.exp(x, v)?;
    let b = g.log(&x_v, x_w)?;
    let mid = g.exp(&x_v, &(b * 0.5))?;
    let a = g.log(x, &mid)?;
    let z = g.exp(x, &(a * 2.0))?;
    g.log(x_w, &z)
}

fn averaged_schild_rung<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    x_w: &M::Point,
    v: &M::Tangent,
) -> Result<M::Tangent> {
    let plus = schild_rung(g, x, x_w, v)?;
    let minus = schild_rung(g, x, x_w, &(-*v))?;
    Ok((plus - minus) * 0.5)
}

fn pole_rung<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    mid: &M::Point,
    x_w: &M::Point,
    v: &M::Tangent,
) -> Result<M::Tangent> {
    let x_v = g.exp(x, v)?;
    let a = g.log(mid, &x_v)?;
    let z = g.exp(mid, &(-a))?;
    Ok(-g.log(x_w, &z)?)
}

#[allow(clippy::too_many_arguments)]
fn fanning_rung<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    x_w: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    h: f64,
    eps: f64,
) -> Result<M::Tangent> {
    let p = g.exp(x, &((*w + *v * eps) * h))?;
    let q = g.exp(x, &((*w - *v * eps) * h))?;
    Ok(g.manifold().project_velocity(x_w, &((p - q) * (0.5 / (h * eps)))))
}

/// One Schild rung with the given geodesic maps; the result is attached to `exp_x(w)`.
pub fn schild_step_with<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    let x_w = g.exp(x, w)?;
    Ok(TangentVector::new(x_w, schild_rung(g, x, &x_w, v)?))
}

/// One pole rung, reflecting through `exp_x(w/2)`.
pub fn pole_step_with<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    let mid = g.exp(x, &(*w * 0.5))?;
    let x_w = g.exp(x, w)?;
    Ok(TangentVector::new(x_w, pole_rung(g, x, &mid, &x_w, v)?))
}

pub fn averaged_schild_step_with<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    let x_w = g.exp(x, w)?;
    Ok(TangentVector::new(x_w, averaged_schild_rung(g, x, &x_w, v)?))
}

/// Fanning approximation of the transport of `v` along `t -> exp_x(t w)` up to
/// `t = h`: `(exp_x(h(w + εv)) − exp_x(h(w − εv))) / (2hε)`, as a tangent at `exp_x(hw)`.
pub fn fanning_step_with<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    h: f64,
    eps: f64,
) -> Result<TangentOf<M>> {
    let x_w = g.exp(x, &(*w * h))?;
    Ok(TangentVector::new(x_w, fanning_rung(g, x, &x_w, w, v, h, eps)?))
}

pub fn schild_step<M: Manifold>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    schild_step_with(&mut ClosedForm(m), x, w, v)
}

pub fn pole_step<M: Manifold>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    pole_step_with(&mut ClosedForm(m), x, w, v)
}

pub fn averaged_schild_step<M: Manifold>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
) -> Result<TangentOf<M>> {
    averaged_schild_step_with(&mut ClosedForm(m), x, w, v)
}

pub fn fanning_step<M: Manifold>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    h: f64,
    eps: f64,
) -> Result<TangentOf<M>> {
    fanning_step_with(&mut ClosedForm(m), x, w, v, h, eps)
}

/// Points `x_i` and velocities `w_i` of the main geodesic at `t = i/n`, plus the
/// midpoints at `t = (i + ½)/n` when the pole ladder needs them.
struct MainGeodesic<P, V> {
    points: Vec<(P, V)>,
    mids: Vec<P>,
}

fn closed_form_main<M: Manifold>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    n: usize,
    with_mids: bool,
) -> Result<MainGeodesic<M::Point, M::Tangent>> {
    let nf = n as f64;
    let xs = (0..=n)
        .map(|i| if i == 0 { Ok(*x) } else { m.exp(x, &(*w * (i as f64 / nf))) })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..n {
        points.push((xs[i], m.log(&xs[i], &xs[i + 1])? * nf));
    }
    points.push((xs[n], -m.log(&xs[n], &xs[n - 1])? * nf));
    let mids = if with_mids {
        (0..n)
            .map(|i| m.exp(x, &(*w * ((i as f64 + 0.5) / nf))))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(MainGeodesic { points, mids })
}

fn integrated_main<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    n: usize,
    counter: &mut RkCallCounter,
) -> Result<MainGeodesic<M::Point, M::Tangent>> {
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity(n + 1);
    points.push((*x, *w));
    for i in 0..n {
        let (p, u) = points[i];
        points.push(rk_step(m, &p, &u, h, counter).map_err(|e| e.at_rung(i))?);
    }
    Ok(MainGeodesic { points, mids: Vec::new() })
}

/// Iterate the rung of `config.scheme` along a precomputed main geodesic.
fn iterate_rungs<M: Manifold, G: Geodesics<M>>(
    g: &mut G,
    main: &MainGeodesic<M::Point, M::Tangent>,
    v: &M::Tangent,
    config: &LadderConfig,
    limit: f64,
) -> Result<M::Tangent> {
    let n = config.n;
    let h = 1.0 / n as f64;
    let scale = (n as f64).powf(config.alpha());
    let mut vi = *v;
    for i in 0..n {
        let (xi, wi) = &main.points[i];
        let xn = &main.points[i + 1].0;
        let small = vi * (1.0 / scale);
        let next = match config.scheme {
            Scheme::Schild => schild_rung(g, xi, xn, &small).map(|u| u * scale),
            Scheme::AveragedSchild => averaged_schild_rung(g, xi, xn, &small).map(|u| u * scale),
            Scheme::Pole => pole_rung(g, xi, &main.mids[i], xn, &small).map(|u| u * scale),
            Scheme::Fanning => fanning_rung(g, xi, xn, wi, &vi, h, h),
        };
        vi = next.map_err(|e| e.at_rung(i))?;
        let norm = g.manifold().norm(xn, &vi);
        if !(norm <= limit) {
            return Err(Error::LadderDiverged { rung: i, norm, limit });
        }
    }
    Ok(vi)
}

/// Pole ladder with RK4 geodesics. Reflections through consecutive midpoints
/// are chained directly on the point `z`, so only one inverse step is needed per
/// rung; the alternating sign of the reflections is undone at the end.
fn infinitesimal_pole<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    config: &LadderConfig,
    counter: &mut RkCallCounter,
) -> Result<(M::Point, M::Tangent, M::Tangent)> {
    let n = config.n;
    let nf = n as f64;
    let h = 1.0 / nf;
    let alpha = config.alpha();
    let scale = nf.powf(alpha);
    let opts = config.shooting();
    let bound = 4.0 * (m.norm(x, v) + m.norm(x, w) * nf.powf(alpha - 1.0)) + 1e-12;

    let (mut mid, half) = rk_step(m, x, &(*w * 0.5), h, counter).map_err(|e| e.at_rung(0))?;
    let mut w_mid = half * 2.0;
    let mut z = rk1(m, x, &(*v * nf.powf(1.0 - alpha)), h, counter).map_err(|e| e.at_rung(0))?;
    for i in 0..n {
        let a = rk_inverse(m, &mid, &z, h, &opts, counter).map_err(|e| e.at_rung(i))?;
        let norm = scale * h * m.norm(&mid, &a);
        if !(norm <= bound) {
            return Err(Error::LadderDiverged { rung: i, norm, limit: bound });
        }
        z = rk1(m, &mid, &(-a), h, counter).map_err(|e| e.at_rung(i))?;
        if i + 1 < n {
            (mid, w_mid) = rk_step(m, &mid, &w_mid, h, counter).map_err(|e| e.at_rung(i))?;
        }
    }
    let (x_n, half) = rk_step(m, &mid, &(w_mid * 0.5), h, counter).map_err(|e| e.at_rung(n - 1))?;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let u = rk_inverse(m, &x_n, &z, h, &opts, counter).map_err(|e| e.at_rung(n - 1))?;
    Ok((x_n, u * (sign * scale * h), half * 2.0))
}

/// Transport `v` along the geodesic `t -> exp_x(t w)`, `t ∈ [0, 1]`, with `n` rungs.
pub fn transport<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    config: &LadderConfig,
) -> Result<TransportOf<M>> {
    let start = Instant::now();
    config.validate()?;
    let tol = config.tolerances.tol_tangent;
    for u in [v, w] {
        let defect = m.tangent_defect(x, u);
        if defect > tol * m.norm(x, u).max(1.0) {
            return Err(Error::NonTangentInput { defect });
        }
    }
    let limit = 4.0 * m.norm(x, v) + 1e-12;
    let n = config.n;

    let (endpoint, vn, wn, rk_calls) = match config.backend {
        Backend::ClosedForm => {
            let main = closed_form_main(m, x, w, n, config.scheme == Scheme::Pole)?;
            let vn = iterate_rungs(&mut ClosedForm(m), &main, v, config, limit)?;
            let (xn, wn) = main.points[n];
            (xn, vn, wn, 0)
        }
        Backend::Infinitesimal if config.scheme == Scheme::Pole => {
            let mut counter = RkCallCounter::new();
            let (xn, vn, wn) = infinitesimal_pole(m, x, w, v, config, &mut counter)?;
            (xn, vn, wn, counter.calls())
        }
        Backend::Infinitesimal => {
            let mut g = Infinitesimal::new(m, 1.0 / n as f64, config.shooting());
            let main = integrated_main(m, x, w, n, &mut g.counter)?;
            let vn = iterate_rungs(&mut g, &main, v, config, limit)?;
            let (xn, wn) = main.points[n];
            (xn, vn, wn, g.rk_calls())
        }
    };
    Ok(TransportResult {
        transported: TangentVector::new(endpoint, vn),
        endpoint,
        endpoint_velocity: wn,
        rk_calls,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Most accurate available transport of `v` along `exp_x(t w)`: the closed form
/// where it exists, otherwise the infinitesimal pole ladder with `n_ref` rungs.
pub fn transport_reference<M: GeodesicFlow>(
    m: &M,
    x: &M::Point,
    w: &M::Tangent,
    v: &M::Tangent,
    n_ref: usize,
) -> Result<TangentOf<M>> {
    if m.has_closed_form() {
        return Ok(TangentVector::new(m.exp(x, w)?, m.transport(x, w, v)?));
    }
    let config = LadderConfig::new(Scheme::Pole, n_ref, Backend::Infinitesimal);
    Ok(transport(m, x, w, v, &config)?.transported)
}
