//! Delta sweeps comparing the Foldy–Lax approximants against the volume solver,
//! with exponent fits of the resulting errors, increments and coefficients.

pub mod fit;
pub mod output;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

use crate::config::{derive_contrasts, norm, sub, ClusterConfig, ConfigError, Point, Spacing, SweepSpec};
use crate::foldylax::{assemble, born_order_condition, direct_condition, interaction_ladder, scattered_field, solve_born, solve_direct, FoldyLaxError};
use crate::oracle::{apriori_diagnostics, oracle_scattered_field, solve_lse, OracleError};
use crate::spectral::{assemble_newtonian, cache::eigensystem_cached, realize_incident, scattering_coefficient, NewtonianDiscretization, SpectralData, SpectralError};

pub use fit::{fit_slope, Abscissa, FitError, SlopeFit, MIN_FIT_POINTS};

/// Evaluation points sit at this multiple of the cluster diameter from the centroid.
pub const EVAL_RADIUS_FACTOR: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    FoldyLax(#[from] FoldyLaxError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("config has no sweep section")]
    MissingSweep,
    #[error("sweep needs at least {MIN_FIT_POINTS} delta values spanning half a decade")]
    SweepGrid,
    #[error("at delta = {delta}: {message}")]
    Point { delta: f64, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One row of a sweep: a delta and either a Born order or the direct solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub delta: f64,
    pub h: f64,
    pub t: f64,
    /// Born order; `None` for the direct solve.
    pub order: Option<usize>,
    /// Whether the analytic error estimate covers this row.
    pub predicate: bool,
    pub k: f64,
    pub norm_bk: f64,
    /// Scattering coefficient of the first particle.
    pub coefficient: f64,
    pub w_norm: f64,
    /// Mean modulus of the Foldy–Lax field over the evaluation points.
    pub field_fl: f64,
    pub field_oracle: Option<f64>,
    /// Mean `|u^s - u^{s,N}|`.
    pub error: Option<f64>,
    /// Mean `|u^{s,N} - u^{s,N-1}|`.
    pub increment: Option<f64>,
    pub apriori_ratio: Option<f64>,
    pub eval_radius: f64,
    /// Operations that produced the row.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub quantity: String,
    pub order: Option<usize>,
    pub target: Option<f64>,
    pub fit: Option<SlopeFit>,
    pub skipped: Option<String>,
}

impl NamedFit {
    pub fn within(&self, tolerance: f64) -> Option<bool> {
        Some((self.fit?.slope - self.target?).abs() <= tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub dim: usize,
    pub h: f64,
    pub t: f64,
    pub d0: f64,
    pub deltas: Vec<f64>,
    pub eval_radius: f64,
    pub eval_points: usize,
    pub resolution: usize,
    pub oracle_resolution: Option<usize>,
    pub records: Vec<SweepRecord>,
    pub fits: Vec<NamedFit>,
}

impl SweepOutput {
    pub fn find_fit(&self, quantity: &str, order: Option<usize>) -> Option<&NamedFit> {
        self.fits.iter().find(|f| f.quantity == quantity && f.order == order)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Reference-grid resolution; defaults to the config value.
    pub resolution: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

fn pad(p: &[f64]) -> Point {
    let mut out = [0.0; 3];
    out[..p.len().min(3)].copy_from_slice(&p[..p.len().min(3)]);
    out
}

/// Largest center distance plus one particle diameter.
pub fn cluster_diameter(cfg: &ClusterConfig) -> f64 {
    let c = cfg.center_points();
    let mut span: f64 = 0.0;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            span = span.max(norm(&sub(&c[i], &c[j])));
        }
    }
    span + cfg.delta * cfg.shape.diameter
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    c
}

/// `count` points at distance `radius` from `center`: the cube-corner directions
/// (or a Fibonacci sphere) in 3D, a rotated regular polygon in 2D.
pub fn evaluation_points(dim: usize, center: &Point, radius: f64, count: usize) -> Vec<Point> {
    let dirs: Vec<Point> = if dim == 2 {
        (0..count)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / count as f64 + 0.3;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    } else if count == 8 {
        let s = 1.0 / 3f64.sqrt();
        let mut d = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    d.push([sx * s, sy * s, sz * s]);
                }
            }
        }
        d
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|j| {
                let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * j as f64;
                [r * a.cos(), r * a.sin(), z]
            })
            .collect()
    };
    dirs.iter().map(|d| [center[0] + radius * d[0], center[1] + radius * d[1], center[2] + radius * d[2]]).collect()
}

fn mean_abs(v: impl Iterator<Item = Complex64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), z| (s + z.norm(), n + 1));
    s / n as f64
}

/// Relative change of the sampled oracle field between two resolutions.
pub fn oracle_refinement_change(cfg: &ClusterConfig, k: f64, coarse: usize, fine: usize, points: &[Point]) -> Result<f64, OracleError> {
    let a = solve_lse(cfg, k, coarse)?;
    let b = solve_lse(cfg, k, fine)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for x in points {
        let ua = oracle_scattered_field(&a, x)?;
        let ub = oracle_scattered_field(&b, x)?;
        num += (ua - ub).norm_sqr();
        den += ub.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Spectrum of `disc` at `delta`, all eigenpairs, optionally cached.
pub fn full_spectrum(disc: &NewtonianDiscretization, delta: f64, cache: Option<&std::path::Path>) -> Result<SpectralData, SpectralError> {
    eigensystem_cached(disc, delta, disc.n_cells(), cache)
}

struct PointResult {
    rows: Vec<SweepRecord>,
}

fn point_rows(
    base: &ClusterConfig,
    sweep: &SweepSpec,
    pattern: &[Point],
    delta: f64,
    disc: &NewtonianDiscretization,
    reference: Option<&SpectralData>,
    radius: f64,
    opts: &SweepOptions,
    oracle_resolution: Option<usize>,
) -> Result<PointResult, ExperimentError> {
    let spacing = Spacing { t: sweep.t, d0: sweep.d0 };
    let cfg = base.for_sweep_point(pattern, delta, spacing, sweep.h)?;
    let spec = match reference {
        Some(r) => r.at_delta(delta),
        None => full_spectrum(disc, delta, opts.cache_dir.as_deref())?,
    };
    let contrasts = derive_contrasts(&cfg)?;
    let inc = realize_incident(&cfg, &spec, &contrasts)?;
    let sys = assemble(&cfg, &spec, inc.k)?;
    let direct = solve_direct(&sys)?;
    let n_max = sweep.orders.iter().copied().max().unwrap_or(0);
    let born = solve_born(&sys, n_max);
    let scatter = scattering_coefficient(&spec, contrasts.coefficient_contrast(0, cfg.model.coefficient_contrast), contrasts.a0, inc.k)?;

    let points = evaluation_points(cfg.dim, &centroid(&cfg.center_points()), radius, sweep.eval_points);
    let fl_direct: Vec<Complex64> = points.iter().map(|x| scattered_field(&sys, &direct.q, x)).collect::<Result<_, _>>()?;
    let ladders: Vec<_> = points.iter().map(|x| interaction_ladder(&sys, &born, x)).collect::<Result<_, _>>()?;

    let (oracle, apriori) = match oracle_resolution {
        Some(res) => {
            let sol = solve_lse(&cfg, inc.k, res)?;
            let u: Vec<Complex64> = points.iter().map(|x| oracle_scattered_field(&sol, x)).collect::<Result<_, _>>()?;
            (Some(u), Some(apriori_diagnostics(&sol, &cfg.direction()).max_ratio()))
        }
        None => (None, None),
    };
    let source = if oracle.is_some() { "foldylax+oracle" } else { "foldylax" };

    let row = |order: Option<usize>, fl: Vec<Complex64>, increment: Option<f64>, predicate: bool| {
        let error = oracle.as_ref().map(|u| mean_abs(u.iter().zip(&fl).map(|(a, b)| a - b)));
        SweepRecord {
            delta,
            h: sweep.h,
            t: sweep.t,
            order,
            predicate,
            k: inc.k,
            norm_bk: sys.norm_bk,
            coefficient: scatter.coefficient,
            w_norm: scatter.w_norm,
            field_fl: mean_abs(fl.iter().copied()),
            field_oracle: oracle.as_ref().map(|u| mean_abs(u.iter().copied())),
            error,
            increment,
            apriori_ratio: apriori,
            eval_radius: radius,
            source: source.to_string(),
        }
    };
    let mut rows = vec![row(None, fl_direct, None, direct_condition(sweep.h, sweep.t))];
    for &n in &sweep.orders {
        let fl = ladders.iter().map(|l| l.fields[n]).collect();
        let incr = (n > 0).then(|| mean_abs(ladders.iter().map(|l| l.increments[n])));
        rows.push(row(Some(n), fl, incr, born_order_condition(cfg.dim, sweep.h, sweep.t, n)));
    }
    for r in &rows {
        let finite = [r.k, r.norm_bk, r.coefficient, r.w_norm, r.field_fl]
            .iter()
            .chain(r.error.iter())
            .chain(r.increment.iter())
            .chain(r.apriori_ratio.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(ExperimentError::Point { delta, message: "non-finite record".into() });
        }
    }
    Ok(PointResult { rows })
}

fn targets(dim: usize, h: f64, t: f64, quantity: &str, order: Option<usize>) -> (Option<f64>, Abscissa) {
    let e = 1.0 - h - t;
    if dim == 3 {
        let target = match (quantity, order) {
            ("error", None) => Some((2.0 - h).min(3.0 - 2.0 * h - 2.0 * t)),
            ("error", Some(n)) => Some((1.0 - h) + (n + 1) as f64 * e),
            ("increment", Some(n)) => Some((1.0 - h) + n as f64 * e),
            ("norm_bk", _) => Some(e),
            ("coefficient", _) => Some(1.0 - h),
            ("w_norm", _) => Some(-0.5 - h),
            _ => None,
        };
        (target, Abscissa::LogDelta)
    } else {
        match (quantity, order) {
            ("error", None) => ((e.abs() < 1e-12).then_some(1.0 - t), Abscissa::LogDelta),
            ("error", Some(_)) => (None, Abscissa::LogDelta),
            ("increment", Some(n)) => (Some((h - 1.0) - n as f64 * e), Abscissa::LogLogDelta),
            _ => (None, Abscissa::LogLogDelta),
        }
    }
}

fn fit_quantity(records: &[SweepRecord], dim: usize, h: f64, t: f64, quantity: &str, order: Option<usize>, value: impl Fn(&SweepRecord) -> Option<f64>) -> NamedFit {
    let (target, abscissa) = targets(dim, h, t, quantity, order);
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.order == order && r.predicate)
        .filter_map(|r| value(r).map(|v| (r.delta, v)))
        .collect();
    let (fit, skipped) = match fit_slope(&pts, abscissa) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    NamedFit { quantity: quantity.into(), order, target, fit, skipped }
}

/// Exponent fits of every swept quantity over the rows whose predicate holds.
pub fn fit_records(records: &[SweepRecord], dim: usize, h: f64, t: f64, orders: &[usize]) -> Vec<NamedFit> {
    let mut fits = vec![
        fit_quantity(records, dim, h, t, "error", None, |r| r.error),
        fit_quantity(records, dim, h, t, "norm_bk", None, |r| Some(r.norm_bk)),
        fit_quantity(records, dim, h, t, "coefficient", None, |r| Some(r.coefficient.abs())),
        fit_quantity(records, dim, h, t, "w_norm", None, |r| Some(r.w_norm)),
        fit_quantity(records, dim, h, t, "apriori_ratio", None, |r| r.apriori_ratio),
    ];
    for &n in orders {
        fits.push(fit_quantity(records, dim, h, t, "error", Some(n), |r| r.error));
        if n > 0 {
            fits.push(fit_quantity(records, dim, h, t, "increment", Some(n), |r| r.increment));
        }
    }
    fits
}

/// Default evaluation radius: five cluster diameters at the largest delta.
pub fn default_eval_radius(base: &ClusterConfig, sweep: &SweepSpec, pattern: &[Point]) -> Result<f64, ConfigError> {
    let largest = sweep.deltas.iter().copied().fold(0.0, f64::max);
    let cfg = base.for_sweep_point(pattern, largest, Spacing { t: sweep.t, d0: sweep.d0 }, sweep.h)?;
    Ok(EVAL_RADIUS_FACTOR * cluster_diameter(&cfg))
}

/// Runs the sweep described by `base.sweep`.
pub fn run_sweep(base: &ClusterConfig, opts: &SweepOptions) -> Result<SweepOutput, ExperimentError> {
    let sweep = base.sweep.as_ref().ok_or(ExperimentError::MissingSweep)?;
    let deltas = &sweep.deltas;
    let (lo, hi) = deltas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), d| (l.min(*d), h.max(*d)));
    if deltas.len() < MIN_FIT_POINTS || hi / lo < 10f64.sqrt() * (1.0 - 1e-12) {
        return Err(ExperimentError::SweepGrid);
    }
    let pattern: Vec<Point> = sweep.pattern.iter().map(|p| pad(p)).collect();
    let resolution = opts.resolution.unwrap_or_else(|| base.resolution_or_default());
    let oracle_resolution = sweep.oracle.then(|| sweep.oracle_resolution.unwrap_or(resolution));
    let radius = match sweep.eval_radius {
        Some(r) => r,
        None => default_eval_radius(base, sweep, &pattern)?,
    };
    let disc = assemble_newtonian(&base.shape, resolution)?;
    let reference = if base.dim == 3 { Some(full_spectrum(&disc, 1.0, opts.cache_dir.as_deref())?) } else { None };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<Result<PointResult, ExperimentError>> = pool.install(|| {
        deltas
            .par_iter()
            .map(|&delta| {
                point_rows(base, sweep, &pattern, delta, &disc, reference.as_ref(), radius, opts, oracle_resolution).map_err(|e| match e {
                    ExperimentError::Point { .. } => e,
                    other => ExperimentError::Point { delta, message: other.to_string() },
                })
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?.rows);
    }
    let fits = fit_records(&records, base.dim, sweep.h, sweep.t, &sweep.orders);
    Ok(SweepOutput {
        dim: base.dim,
        h: sweep.h,
        t: sweep.t,
        d0: sweep.d0,
        deltas: deltas.clone(),
        eval_radius: radius,
        eval_points: sweep.eval_points,
        resolution,
        oracle_resolution,
        records,
        fits,
    })
}
