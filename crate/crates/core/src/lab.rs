//! Convergence experiments: sweep the rung count, measure errors against a
//! reference transport, fit convergence slopes and write reports.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{ensure_same_base, random_tangent, Manifold, TangentOf, ToleranceConfig};
use crate::ladder::{transport, transport_reference, Backend, LadderConfig, Scheme};
use crate::ode::GeodesicFlow;
use crate::se3::Se3;
use crate::spd::Spd;
use crate::sphere::Sphere;

/// The rung counts used when none are given.
pub const DEFAULT_N_GRID: [usize; 7] = [5, 10, 20, 40, 80, 160, 320];

/// Shooting target used by experiments. The `h⁵` default of the library leaves an
/// `O(h³)` defect in the transported vector, which is of the same size as the
/// pole ladder's own error at moderate `n`; experiments instead shoot to the
/// round-off floor, at the price of about one extra RK call per rung.
pub const EXPERIMENT_TOL_LOG: f64 = 1e-15;

/// Number of smallest rung counts left out of the slope fits.
pub const FIT_DISCARD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Sphere,
    Spd,
    Se3,
}

impl ManifoldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Spd => "spd",
            ManifoldKind::Se3 => "se3",
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(ManifoldKind::Sphere),
            "spd" => Ok(ManifoldKind::Spd),
            "se3" => Ok(ManifoldKind::Se3),
            _ => Err(Error::InvalidSpec(format!(
                "unknown manifold `{s}` (expected sphere, spd or se3)"
            ))),
        }
    }
}

/// How the initial vectors `v` and `w` are chosen at the manifold's origin.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TangentData {
    /// The standard orthonormal pair of the manifold (see [`default_pair`]).
    #[default]
    Default,
    /// Unit-norm multiple of tangent basis vector `index`, scaled by `scale`.
    Basis { index: usize, scale: f64 },
    /// Explicit coordinates on the tangent basis.
    Coefficients { coefficients: Vec<f64> },
    /// Random direction with the given metric norm, drawn from the spec's seed.
    Random { norm: f64 },
}

/// Tangent basis indices of the default `(w, v)` pair:
/// S² at `(1,0,0)`: `w = e_y`, `v = e_z`; SPD(3) at `I`: `w = diag(1,0,0)`,
/// `v = (E12 + E21)/√2`; SE(3) at the identity: `w = e3`, `v = e4`.
pub fn default_pair(kind: ManifoldKind) -> (usize, usize) {
    match kind {
        ManifoldKind::Sphere => (0, 1),
        ManifoldKind::Spd => (0, 3),
        ManifoldKind::Se3 => (2, 3),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub manifold: ManifoldKind,
    /// Anisotropy of the SE(3) metric; ignored elsewhere.
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub scheme: Scheme,
    /// Scaling exponent; `None` selects the scheme default.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub backend: Backend,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub v: TangentData,
    #[serde(default)]
    pub w: TangentData,
    #[serde(default)]
    pub seed: u64,
    /// Rung count of the numerical reference; defaults to four times the largest `n`.
    #[serde(default)]
    pub n_ref: Option<usize>,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

fn default_beta() -> f64 {
    1.0
}

impl ExperimentSpec {
    pub fn new(manifold: ManifoldKind, scheme: Scheme, backend: Backend) -> Self {
        Self {
            manifold,
            beta: 1.0,
            scheme,
            alpha: None,
            backend,
            n_grid: DEFAULT_N_GRID.to_vec(),
            v: TangentData::Default,
            w: TangentData::Default,
            seed: 0,
            n_ref: None,
            tolerances: ToleranceConfig {
                tol_log: Some(EXPERIMENT_TOL_LOG),
                ..ToleranceConfig::default()
            },
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_grid(mut self, n_grid: impl Into<Vec<usize>>) -> Self {
        self.n_grid = n_grid.into();
        self
    }

    /// Geometric grid `n_min, 2 n_min, …` up to and including at most `n_max`.
    pub fn geometric_grid(n_min: usize, n_max: usize) -> Result<Vec<usize>> {
        if n_min < 2 || n_max < n_min {
            return Err(Error::InvalidSpec(format!(
                "need 2 <= n_min <= n_max, got n_min = {n_min}, n_max = {n_max}"
            )));
        }
        Ok(std::iter::successors(Some(n_min), |&n| n.checked_mul(2))
            .take_while(|&n| n <= n_max)
            .collect())
    }

    pub fn config(&self, n: usize) -> LadderConfig {
        LadderConfig {
            scheme: self.scheme,
            n,
            alpha: self.alpha,
            backend: self.backend,
            tolerances: self.tolerances,
        }
    }

    /// Effective scaling exponent.
    pub fn alpha(&self) -> f64 {
        self.config(1).alpha()
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
            .unwrap_or_else(|| 4 * self.n_grid.iter().copied().max().unwrap_or(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidSpec("n_grid is empty".into()));
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::InvalidSpec("all rung counts must be at least 2".into()));
        }
        if self.n_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidSpec("n_grid must be strictly increasing".into()));
        }
        if self.manifold == ManifoldKind::Se3 && !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec(format!("beta must be positive, got {}", self.beta)));
        }
        if self.n_ref == Some(0) {
            return Err(Error::InvalidSpec("n_ref must be at least 1".into()));
        }
        self.config(self.n_grid[0]).validate()
    }
}

/// Serialize NaN as a missing value so failed rows survive CSV and JSON.
mod nan_as_missing {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One row of a report; field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub manifold: ManifoldKind,
    pub beta: f64,
    pub alpha: f64,
    pub backend: Backend,
    pub n: usize,
    #[serde(with = "nan_as_missing")]
    pub abs_error: f64,
    #[serde(with = "nan_as_missing")]
    pub long_error: f64,
    pub rk_calls: u64,
    #[serde(with = "nan_as_missing")]
    pub wall_time_s: f64,
}

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "manifold",
    "beta",
    "alpha",
    "backend",
    "n",
    "abs_error",
    "long_error",
    "rk_calls",
    "wall_time_s",
];

/// Least-squares fits over the rows that survive [`FIT_DISCARD`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    /// Slope of `log abs_error` against `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Coefficient of `long_error` against `n^{-α}`.
    pub long_coef: f64,
    pub long_intercept: f64,
    pub long_r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub n: usize,
    pub message: String,
    /// True when the failure is numerical (divergence, shooting) rather than an input error.
    pub numerical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReportRow>,
    pub fit: Option<Fit>,
    #[serde(default)]
    pub failures: Vec<RowFailure>,
}

/// `(slope, intercept, r²)` of an ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit("x and y have different lengths"));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit("at least three points are required"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite data"));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae are equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if sst == 0.0 { 1.0 } else { (1.0 - sse / sst).clamp(0.0, 1.0) };
    Ok(LineFit { slope, intercept, r_squared })
}

/// Power-law fit: least squares on `(log x, log y)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_linear(&lx, &ly)
}

/// `<v_n − ref, w_n>` for vectors attached to the same point.
pub fn longitudinal_error<M: Manifold>(
    m: &M,
    v_n: &TangentOf<M>,
    reference: &TangentOf<M>,
    w_n: &TangentOf<M>,
) -> Result<f64> {
    let tol = ToleranceConfig::default().tol_point;
    ensure_same_base(m, &v_n.base, &reference.base, tol)?;
    ensure_same_base(m, &v_n.base, &w_n.base, tol)?;
    Ok(m.inner(&v_n.base, &(v_n.vec - reference.vec), &w_n.vec))
}

fn resolve_tangent<M: Manifold>(
    m: &M,
    x: &M::Point,
    data: &TangentData,
    default_index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<M::Tangent> {
    let unit = |index: usize| -> Result<M::Tangent> {
        if index >= m.dim() {
            return Err(Error::InvalidSpec(format!(
                "basis index {index} out of range for a {}-dimensional manifold",
                m.dim()
            )));
        }
        let b = m.tangent_from_coords(x, &DVector::from_fn(m.dim(), |i, _| (i == index) as u8 as f64));
        Ok(b * (1.0 / m.norm(x, &b)))
    };
    let v = match data {
        TangentData::Default => unit(default_index)?,
        TangentData::Basis { index, scale } => unit(*index)? * *scale,
        TangentData::Coefficients { coefficients } => {
            if coefficients.len() != m.dim() {
                return Err(Error::InvalidSpec(format!(
                    "expected {} tangent coefficients, got {}",
                    m.dim(),
                    coefficients.len()
                )));
            }
            m.tangent_from_coords(x, &DVector::from_column_slice(coefficients))
        }
        TangentData::Random { norm } => random_tangent(m, x, *norm, rng),
    };
    let norm = m.norm(x, &v);
    if !norm.is_finite() {
        return Err(Error::InvalidSpec("initial vector is not finite".into()));
    }
    Ok(v)
}

/// Measured errors of one ladder run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub n: usize,
    pub abs_error: f64,
    pub long_error: f64,
    pub rk_calls: u64,
    pub wall_time_s: f64,
    /// Transported vector, reference and endpoint in tangent / chart coordinates.
    pub transported: Vec<f64>,
    pub reference: Vec<f64>,
    pub endpoint: Vec<f64>,
}

struct Setup<M: Manifold> {
    x: M::Point,
    w: M::Tangent,
    v: M::Tangent,
    reference: TangentOf<M>,
}

fn setup<M: GeodesicFlow>(m: &M, spec: &ExperimentSpec) -> Result<Setup<M>> {
    let x = m.origin();
    let (dw, dv) = default_pair(spec.manifold);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = resolve_tangent(m, &x, &spec.w, dw, &mut rng)?;
    let v = resolve_tangent(m, &x, &spec.v, dv, &mut rng)?;
    if m.norm(&x, &w) > m.safe_radius() {
        return Err(Error::InvalidSpec(format!(
            "|w| = {} exceeds the safe radius {} of {}",
            m.norm(&x, &w),
            m.safe_radius(),
            m.name()
        )));
    }
    let reference = transport_reference(m, &x, &w, &v, spec.n_ref())?;
    Ok(Setup { x, w, v, reference })
}

fn run_one<M: GeodesicFlow>(m: &M, spec: &ExperimentSpec, s: &Setup<M>, n: usize) -> Result<RunOutcome> {
    let r = transport(m, &s.x, &s.w, &s.v, &spec.config(n))?;
    let base = s.reference.base;
    let at_ref = |u: &M::Tangent| TangentOf::<M>::new(base, m.rebase(&r.endpoint, &base, u));
    let vn = at_ref(&r.transported.vec);
    let wn = at_ref(&r.endpoint_velocity);
    let abs_error = m.norm(&base, &(vn.vec - s.reference.vec));
    let long_error = longitudinal_error(m, &vn, &s.reference, &wn)?;
    Ok(RunOutcome {
        n,
        abs_error,
        long_error,
        rk_calls: r.rk_calls,
        wall_time_s: r.wall_time,
        transported: m.tangent_coords(&base, &vn.vec).iter().copied().collect(),
        reference: m.tangent_coords(&base, &s.reference.vec).iter().copied().collect(),
        endpoint: m.chart(&r.endpoint).iter().copied().collect(),
    })
}

macro_rules! dispatch {
    ($spec:expr, $m:ident => $body:expr) => {
        match $spec.manifold {
            ManifoldKind::Sphere => {
                let $m = Sphere::new();
                $body
            }
            ManifoldKind::Spd => {
                let $m = Spd::new();
                $body
            }
            ManifoldKind::Se3 => {
                let $m = Se3::new($spec.beta)?;
                $body
            }
        }
    };
}

/// A single transport run with `n` rungs, measured against the reference.
pub fn run_single(spec: &ExperimentSpec, n: usize) -> Result<RunOutcome> {
    let mut spec = spec.clone();
    if spec.n_grid.is_empty() {
        spec.n_grid = vec![n.max(2)];
    }
    spec.config(n).validate()?;
    dispatch!(spec, m => {
        let s = setup(&m, &spec)?;
        run_one(&m, &spec, &s, n)
    })
}

/// Run one transport per rung count (in parallel) and fit the convergence rates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let outcomes: Vec<(usize, Result<RunOutcome>)> = dispatch!(spec, m => {
        let s = setup(&m, spec)?;
        spec.n_grid.par_iter().map(|&n| (n, run_one(&m, spec, &s, n))).collect()
    });
    let alpha = spec.alpha();
    let beta = if spec.manifold == ManifoldKind::Se3 { spec.beta } else { 1.0 };
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (n, outcome) in outcomes {
        let row = |abs_error, long_error, rk_calls, wall_time_s| ReportRow {
            scheme: spec.scheme,
            manifold: spec.manifold,
            beta,
            alpha,
            backend: spec.backend,
            n,
            abs_error,
            long_error,
            rk_calls,
            wall_time_s,
        };
        match outcome {
            Ok(o) => rows.push(row(o.abs_error, o.long_error, o.rk_calls, o.wall_time_s)),
            Err(e) => {
                failures.push(RowFailure {
                    n,
                    message: e.to_string(),
                    numerical: e.is_numerical(),
                });
                rows.push(row(f64::NAN, f64::NAN, 0, f64::NAN));
            }
        }
    }
    let fit = fit_rows(&rows, alpha).ok();
    Ok(ConvergenceReport {
        spec: spec.clone(),
        rows,
        fit,
        failures,
    })
}

/// Slope and longitudinal-coefficient fits, skipping the smallest rung counts.
pub fn fit_rows(rows: &[ReportRow], alpha: f64) -> Result<Fit> {
    let used: Vec<&ReportRow> = rows
        .iter()
        .skip(FIT_DISCARD)
        .filter(|r| r.abs_error.is_finite() && r.long_error.is_finite())
        .collect();
    let ns: Vec<f64> = used.iter().map(|r| r.n as f64).collect();
    let abs: Vec<f64> = used.iter().map(|r| r.abs_error).collect();
    let log = fit_slope(&ns, &abs)?;
    let scaled: Vec<f64> = ns.iter().map(|n| n.powf(-alpha)).collect();
    let long: Vec<f64> = used.iter().map(|r| r.long_error).collect();
    let lin = fit_linear(&scaled, &long)?;
    Ok(Fit {
        slope: log.slope,
        intercept: log.intercept,
        r_squared: log.r_squared,
        long_coef: lin.slope,
        long_intercept: lin.intercept,
        long_r_squared: lin.r_squared,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidSpec(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_error(path: &Path, e: impl fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Write the report, replacing any existing file.
pub fn emit_report(report: &ConvergenceReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    write_to(report, BufWriter::new(file), format, path)
}

/// Write the report to an arbitrary sink (errors are labelled `-`).
pub fn write_report(report: &ConvergenceReport, sink: impl Write, format: ReportFormat) -> Result<()> {
    write_to(report, sink, format, Path::new("-"))
}

fn write_to(report: &ConvergenceReport, sink: impl Write, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            w.write_record(CSV_HEADER).map_err(|e| format_error(path, e))?;
            for row in &report.rows {
                w.serialize(row).map_err(|e| format_error(path, e))?;
            }
            w.flush().map_err(io_error(path))
        }
        ReportFormat::Json => {
            let mut w = sink;
            serde_json::to_writer_pretty(&mut w, report).map_err(|e| format_error(path, e))?;
            w.write_all(b"\n").map_err(io_error(path))?;
            w.flush().map_err(io_error(path))
        }
    }
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| format_error(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format_error(path, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| format_error(path, e)))
        .collect()
}

pub fn read_report_json(path: &Path) -> Result<ConvergenceReport> {
    let file = File::open(path).map_err(io_error(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| format_error(path, e))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::geometry::TangentVector;

    #[test]
    fn exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let sq: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_slope(&xs, &sq).unwrap();
        assert_abs_diff_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let lin: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        assert_abs_diff_eq!(fit_slope(&xs, &lin).unwrap().slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xs: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
        for _ in 0..20 {
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| x.powf(-1.5) * (1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal)).abs())
                .collect();
            let f = fit_slope(&xs, &ys).unwrap();
            assert!((f.slope + 1.5).abs() < 0.15, "slope {}", f.slope);
        }
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_slope(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::DegenerateFit(_))));
        assert!(fit_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
    }

    #[test]
    fn longitudinal_error_examples() {
        let s = Sphere::new();
        let x = Vector3::x();
        let v = TangentVector::new(x, Vector3::new(0.0, 0.2, 0.3));
        let w = TangentVector::new(x, Vector3::y());
        assert_eq!(longitudinal_error(&s, &v, &v, &w).unwrap(), 0.0);
        let other = TangentVector::new(Vector3::y(), Vector3::x());
        assert!(matches!(longitudinal_error(&s, &v, &other, &w), Err(Error::BasePointMismatch)));
    }

    #[test]
    fn spec_validation() {
        let ok = ExperimentSpec::new(ManifoldKind::Sphere, Scheme::Schild, Backend::ClosedForm);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_grid(vec![10, 5]).validate().is_err());
        assert!(ok.clone().with_grid(vec![1, 5]).validate().is_err());
        assert!(ok.clone().with_grid(vec![]).validate().is_err());
        assert!(ok.clone().with_alpha(3.0).validate().is_err());
        let se3 = ExperimentSpec::new(ManifoldKind::Se3, Scheme::Pole, Backend::Infinitesimal);
        assert!(se3.with_beta(-1.0).validate().is_err());
        assert_eq!(ExperimentSpec::geometric_grid(5, 320).unwrap(), DEFAULT_N_GRID.to_vec());
        assert!(ExperimentSpec::geometric_grid(1, 10).is_err());
    }

    #[test]
    fn oversized_w_is_rejected() {
        let mut spec = ExperimentSpec::new(ManifoldKind::Se3, Scheme::Pole, Backend::ClosedForm);
        spec.w = TangentData::Basis { index: 2, scale: 1.5 };
        assert!(matches!(run_experiment(&spec), Err(Error::InvalidSpec(_))));
        spec.w = TangentData::Coefficients { coefficients: vec![1.0; 3] };
        assert!(matches!(run_experiment(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn default_pairs_are_orthonormal() {
        for kind in [ManifoldKind::Sphere, ManifoldKind::Spd, ManifoldKind::Se3] {
            let spec = ExperimentSpec::new(kind, Scheme::Pole, Backend::ClosedForm);
            dispatch_test(&spec);
        }
    }

    fn dispatch_test(spec: &ExperimentSpec) {
        fn check<M: GeodesicFlow>(m: &M, spec: &ExperimentSpec) {
            let s = setup(m, spec).unwrap();
            assert_abs_diff_eq!(m.norm(&s.x, &s.v), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.norm(&s.x, &s.w), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.inner(&s.x, &s.v, &s.w), 0.0, epsilon = 1e-15);
        }
        match spec.manifold {
            ManifoldKind::Sphere => check(&Sphere::new(), spec),
            ManifoldKind::Spd => check(&Spd::new(), spec),
            ManifoldKind::Se3 => check(&Se3::new(spec.beta).unwrap(), spec),
        }
    }

    #[test]
    fn sphere_schild_experiment() {
        let spec = ExperimentSpec::new(ManifoldKind::Sphere, Scheme::Schild, Backend::ClosedForm)
            .with_grid(vec![10, 20, 40, 80, 160, 320]);
        let report = run_experiment(&spec).unwrap();
        assert!(report.failures.is_empty());
        let fit = report.fit.unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "slope {}", fit.slope);
        assert!((fit.long_coef - 0.5).abs() < 0.025, "coef {}", fit.long_coef);
        let row = report.rows.iter().find(|r| r.n == 40).unwrap();
        assert!((row.long_error * 2.0 * 1600.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn experiments_are_deterministic() {
        let mut spec = ExperimentSpec::new(ManifoldKind::Spd, Scheme::Schild, Backend::ClosedForm)
            .with_grid(vec![4, 8, 16]);
        spec.v = TangentData::Random { norm: 0.7 };
        spec.seed = 99;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.abs_error.to_bits(), rb.abs_error.to_bits());
            assert_eq!(ra.long_error.to_bits(), rb.long_error.to_bits());
        }
    }

    #[test]
    fn failed_rows_are_recorded() {
        let mut spec = ExperimentSpec::new(ManifoldKind::Se3, Scheme::Schild, Backend::Infinitesimal)
            .with_beta(2.0)
            .with_grid(vec![2, 3, 4]);
        spec.n_ref = Some(8);
        spec.tolerances.max_gd_iters = 1;
        spec.tolerances.tol_log = Some(1e-300);
        // the reference uses default tolerances, the rows inherit the impossible ones
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.failures.len(), 3);
        assert!(report.failures.iter().all(|f| f.numerical));
        assert!(report.rows.iter().all(|r| r.abs_error.is_nan()));
        assert!(report.fit.is_none());
    }

    #[test]
    fn single_runs_match_experiment_rows() {
        let spec = ExperimentSpec::new(ManifoldKind::Sphere, Scheme::Pole, Backend::ClosedForm)
            .with_grid(vec![8, 16, 32]);
        let report = run_experiment(&spec).unwrap();
        let one = run_single(&spec, 16).unwrap();
        assert_eq!(one.abs_error, report.rows[1].abs_error);
        assert_eq!(one.endpoint.len(), 3);
    }
}
