//! Scene description: cluster geometry, contrast regime, incident wave and detuning.
//!
//! A [`ClusterConfig`] is parsed from JSON (canonical) or TOML and validated on
//! construction. Points are stored as `[f64; 3]`; in 2D the third coordinate is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in space. 2D scenes keep `z = 0`.
pub type Point = [f64; 3];

/// Relative tolerance on the spacing law.
pub const SPACING_TOLERANCE: f64 = 1e-9;
/// Tolerance on the norm of the incident direction.
pub const DIRECTION_TOLERANCE: f64 = 1e-12;
/// Current document schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("particles overlap: j={0},{1}")]
    Overlap(usize, usize),
    #[error("spacing law violated: measured distance {measured:.6e} < required {required:.6e}")]
    Spacing { measured: f64, required: f64 },
    #[error("reference shape does not contain the origin")]
    OriginOutsideShape,
    #[error("reference shape diameter must lie in (0, 1], got {0}")]
    Diameter(f64),
    #[error("shape kind {kind:?} is incompatible with dim={dim}")]
    ShapeDimension { kind: ShapeKind, dim: usize },
    #[error("dim must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("{what} has {got} coordinates, expected {expected}")]
    Coordinates { what: String, got: usize, expected: usize },
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("incident direction is not a unit vector: |theta| = {0}")]
    Direction(f64),
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: String, reason: String },
    #[error("operation requires the {expected} regime, config has {found}")]
    RegimeMismatch { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ball3d,
    Cube3d,
    Disc2d,
    Square2d,
}

impl ShapeKind {
    pub fn dim(self) -> usize {
        match self {
            ShapeKind::Ball3d | ShapeKind::Cube3d => 3,
            ShapeKind::Disc2d | ShapeKind::Square2d => 2,
        }
    }

    pub fn is_box(self) -> bool {
        matches!(self, ShapeKind::Cube3d | ShapeKind::Square2d)
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Ball3d => "ball3d",
            ShapeKind::Cube3d => "cube3d",
            ShapeKind::Disc2d => "disc2d",
            ShapeKind::Square2d => "square2d",
        }
    }
}

/// Nondimensional particle shape `B`. Balls and discs are round; cubes and squares
/// are axis aligned, with `diameter` the length of the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceShape {
    pub kind: ShapeKind,
    pub diameter: f64,
    /// Position of the shape's centroid relative to the origin of `B`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offset: Vec<f64>,
}

impl ReferenceShape {
    pub fn new(kind: ShapeKind, diameter: f64) -> Self {
        Self { kind, diameter, offset: Vec::new() }
    }

    pub fn with_offset(mut self, offset: &[f64]) -> Self {
        self.offset = offset.to_vec();
        self
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Side of the square/cube, or the diameter for round shapes.
    pub fn side(&self) -> f64 {
        match self.kind {
            ShapeKind::Cube3d => self.diameter / 3f64.sqrt(),
            ShapeKind::Square2d => self.diameter / 2f64.sqrt(),
            _ => self.diameter,
        }
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for (a, v) in self.offset.iter().enumerate().take(3) {
            c[a] = *v;
        }
        c
    }

    /// Lebesgue measure of `B`.
    pub fn measure(&self) -> f64 {
        let d = self.diameter;
        match self.kind {
            ShapeKind::Ball3d => std::f64::consts::PI * d * d * d / 6.0,
            ShapeKind::Disc2d => std::f64::consts::PI * d * d / 4.0,
            ShapeKind::Cube3d | ShapeKind::Square2d => self.side().powi(self.dim() as i32),
        }
    }

    /// Whether `p` (relative to the origin of `B`) lies in the closed shape.
    pub fn contains(&self, p: &Point) -> bool {
        self.contains_strictly(p, 0.0)
    }

    fn contains_strictly(&self, p: &Point, margin: f64) -> bool {
        let c = self.centroid();
        let dim = self.dim();
        if self.kind.is_box() {
            let half = 0.5 * self.side() - margin;
            (0..dim).all(|a| (p[a] - c[a]).abs() <= half)
        } else {
            let r2: f64 = (0..dim).map(|a| (p[a] - c[a]).powi(2)).sum();
            r2.sqrt() <= 0.5 * self.diameter - margin
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.diameter > 0.0 && self.diameter <= 1.0) {
            return Err(ConfigError::Diameter(self.diameter));
        }
        if !self.offset.is_empty() && self.offset.len() != self.dim() {
            return Err(ConfigError::Coordinates {
                what: "shape.offset".into(),
                got: self.offset.len(),
                expected: self.dim(),
            });
        }
        if self.offset.iter().any(|v| !v.is_finite()) || !self.contains_strictly(&[0.0; 3], 1e-12) {
            return Err(ConfigError::OriginOutsideShape);
        }
        Ok(())
    }

    /// Distance between the particles `zi + delta B` and `zj + delta B`.
    /// Negative values measure the penetration depth of overlapping particles.
    pub fn particle_distance(&self, delta: f64, zi: &Point, zj: &Point) -> f64 {
        let dim = self.dim();
        if self.kind.is_box() {
            let s = delta * self.side();
            let gaps: Vec<f64> = (0..dim).map(|a| (zi[a] - zj[a]).abs() - s).collect();
            if gaps.iter().any(|g| *g > 0.0) {
                gaps.iter().map(|g| g.max(0.0).powi(2)).sum::<f64>().sqrt()
            } else {
                gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        } else {
            norm(&sub(zi, zj)) - delta * self.diameter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spacing {
    pub t: f64,
    pub d0: f64,
}

impl Spacing {
    /// Minimum admissible distance at `delta`: `d0 delta^t` in 3D, `d0 exp(-|log delta|^t)` in 2D.
    pub fn required_distance(&self, dim: usize, delta: f64) -> f64 {
        if dim == 3 {
            self.d0 * delta.powf(self.t)
        } else {
            self.d0 * (-delta.ln().abs().powf(self.t)).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub a0: f64,
    pub b0: f64,
}

impl Default for Background {
    fn default() -> Self {
        Self { a0: 1.0, b0: 1.0 }
    }
}

impl Background {
    /// Factor turning the incident wavenumber into the kernel wavenumber.
    pub fn wavenumber_factor(&self) -> f64 {
        (self.b0 / self.a0).sqrt()
    }
}

/// Material contrast regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Bubbles: `a1 = c_a delta^-2`, `b1 = c_b delta^-2`.
    First { c_a: f64, c_b: f64 },
    /// Plasmonic particles described by a Drude model.
    Second {
        k_p: f64,
        gamma_dp: f64,
        eps0: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sigma: Vec<f64>,
    },
    /// Dielectric particles: `tau = c_b delta^-2` (3D) or `c_b delta^-2 |log delta|^-1` (2D).
    Third {
        c_b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a1: Option<f64>,
        /// Per-particle multipliers of `tau`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_factors: Option<Vec<f64>>,
    },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::First { .. } => "first",
            Regime::Second { .. } => "second",
            Regime::Third { .. } => "third",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub theta: Vec<f64>,
    /// Resonance to detune from; defaults to the strongest excitable mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    pub h: f64,
    #[serde(default = "default_sign")]
    pub sign: i32,
}

fn default_sign() -> i32 {
    1
}

/// Which contrast enters the coefficient resolvent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientContrast {
    /// `tau = b1 - b0`, as in the Lippmann–Schwinger equation.
    #[default]
    Tau,
    /// The full `b1`.
    B,
}

/// Self-interaction factor in the 3D point-scatterer system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfTerm {
    /// `1 - ik C / (4 pi)`, the small-distance limit of `Phi_k - Phi_0`.
    #[default]
    Consistent,
    /// `1 - ik C`.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    #[serde(default)]
    pub coefficient_contrast: CoefficientContrast,
    #[serde(default)]
    pub self_term: SelfTerm,
}

/// Parameters of a delta sweep. Centers are regenerated per delta by scaling `pattern`
/// so that the measured minimum distance equals the spacing law exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub h: f64,
    pub t: f64,
    pub d0: f64,
    pub pattern: Vec<Vec<f64>>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_true")]
    pub oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_radius: Option<f64>,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
}

fn default_orders() -> Vec<usize> {
    vec![1, 2]
}

fn default_true() -> bool {
    true
}

fn default_eval_points() -> usize {
    8
}

/// A validated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dim: usize,
    pub shape: ReferenceShape,
    pub delta: f64,
    pub centers: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    #[serde(default)]
    pub background: Background,
    pub regime: Regime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident: Option<IncidentSpec>,
    #[serde(default)]
    pub model: ModelOptions,
    /// Cells per side of the reference-shape grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// Contrast values derived from the regime scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastParams {
    /// `tau_j = b1_j - b0` per particle.
    pub tau: Vec<f64>,
    /// `a1 - a0`.
    pub alpha: f64,
    /// `beta - alpha b1 / a1` per particle.
    pub gamma: Vec<f64>,
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
}

impl ContrastParams {
    /// Contrast entering the coefficient resolvent for particle `j`.
    pub fn coefficient_contrast(&self, j: usize, which: CoefficientContrast) -> f64 {
        match which {
            CoefficientContrast::Tau => self.tau[j],
            CoefficientContrast::B => self.tau[j] + self.b0,
        }
    }

    /// Same parameters with every `tau` (and `gamma`) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.tau.iter_mut().for_each(|t| *t *= factor);
        out.gamma = out
            .tau
            .iter()
            .map(|t| t - out.alpha * (t + out.b0) / out.a1)
            .collect();
        out
    }
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn to_point(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (a, x) in v.iter().enumerate().take(3) {
        p[a] = *x;
    }
    p
}

fn check_len(what: String, v: &[f64], dim: usize) -> Result<(), ConfigError> {
    if v.len() != dim {
        return Err(ConfigError::Coordinates { what, got: v.len(), expected: dim });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::Parameter { name: "coordinates".into(), reason: "non-finite value".into() });
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Parameter { name: name.into(), reason: format!("must be positive, got {v}") })
    }
}

impl ClusterConfig {
    pub fn particle_count(&self) -> usize {
        self.centers.len()
    }

    pub fn center(&self, j: usize) -> Point {
        to_point(&self.centers[j])
    }

    pub fn center_points(&self) -> Vec<Point> {
        self.centers.iter().map(|c| to_point(c)).collect()
    }

    /// Unit incident direction (zero-padded to three components).
    pub fn direction(&self) -> Point {
        self.incident.as_ref().map(|i| to_point(&i.theta)).unwrap_or_else(|| {
            let mut d = [0.0; 3];
            d[self.dim - 1] = 1.0;
            d
        })
    }

    /// Minimum distance between distinct particles, `None` for a single particle.
    pub fn min_distance(&self) -> Option<f64> {
        min_distance(&self.shape, self.delta, &self.center_points()).map(|(d, _, _)| d)
    }

    /// Checks every invariant of the scene.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim != 2 && self.dim != 3 {
            return Err(ConfigError::Dimension(self.dim));
        }
        if self.shape.dim() != self.dim {
            return Err(ConfigError::ShapeDimension { kind: self.shape.kind, dim: self.dim });
        }
        self.shape.validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        if self.centers.is_empty() {
            return Err(ConfigError::Parameter { name: "centers".into(), reason: "at least one particle required".into() });
        }
        for (j, c) in self.centers.iter().enumerate() {
            check_len(format!("centers[{}]", j + 1), c, self.dim)?;
        }
        positive("background.a0", self.background.a0)?;
        positive("background.b0", self.background.b0)?;
        self.validate_regime()?;
        if let Some(inc) = &self.incident {
            check_len("incident.theta".into(), &inc.theta, self.dim)?;
            let n = inc.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (n - 1.0).abs() > DIRECTION_TOLERANCE {
                return Err(ConfigError::Direction(n));
            }
            if !(0.0..=1.0).contains(&inc.h) {
                return Err(ConfigError::Parameter { name: "incident.h".into(), reason: format!("must lie in [0, 1], got {}", inc.h) });
            }
            if inc.sign != 1 && inc.sign != -1 {
                return Err(ConfigError::Parameter { name: "incident.sign".into(), reason: format!("must be +1 or -1, got {}", inc.sign) });
            }
        }
        if let Some(sp) = &self.spacing {
            if !(sp.t >= 0.0) {
                return Err(ConfigError::Parameter { name: "spacing.t".into(), reason: format!("must be nonnegative, got {}", sp.t) });
            }
            positive("spacing.d0", sp.d0)?;
        }
        if let Some(r) = self.resolution {
            if r < 2 {
                return Err(ConfigError::Parameter { name: "resolution".into(), reason: format!("must be at least 2, got {r}") });
            }
        }
        if let Some(sw) = &self.sweep {
            self.validate_sweep(sw)?;
        }
        let points = self.center_points();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if self.shape.particle_distance(self.delta, &points[i], &points[j]) <= 0.0 {
                    return Err(ConfigError::Overlap(i + 1, j + 1));
                }
            }
        }
        if let (Some(sp), Some(d)) = (&self.spacing, self.min_distance()) {
            let required = sp.required_distance(self.dim, self.delta);
            if d < required * (1.0 - SPACING_TOLERANCE) {
                return Err(ConfigError::Spacing { measured: d, required });
            }
        }
        Ok(())
    }

    fn validate_regime(&self) -> Result<(), ConfigError> {
        match &self.regime {
            Regime::First { c_a, c_b } => {
                positive("regime.c_a", *c_a)?;
                positive("regime.c_b", *c_b)
            }
            Regime::Second { k_p, gamma_dp, eps0, sigma } => {
                positive("regime.k_p", *k_p)?;
                positive("regime.eps0", *eps0)?;
                if !(*gamma_dp >= 0.0) {
                    return Err(ConfigError::Parameter { name: "regime.gamma_dp".into(), reason: "must be nonnegative".into() });
                }
                if sigma.iter().any(|s| !(-0.5..0.5).contains(s)) {
                    return Err(ConfigError::Parameter { name: "regime.sigma".into(), reason: "entries must lie in [-1/2, 1/2)".into() });
                }
                Ok(())
            }
            Regime::Third { c_b, a1, tau_factors } => {
                positive("regime.c_b", *c_b)?;
                if let Some(a1) = a1 {
                    positive("regime.a1", *a1)?;
                }
                if let Some(f) = tau_factors {
                    if f.len() != self.centers.len() {
                        return Err(ConfigError::Parameter {
                            name: "regime.tau_factors".into(),
                            reason: format!("expected {} entries, got {}", self.centers.len(), f.len()),
                        });
                    }
                    if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                        return Err(ConfigError::Parameter { name: "regime.tau_factors".into(), reason: "entries must be finite and nonnegative".into() });
                    }
                }
                Ok(())
            }
        }
    }

    fn validate_sweep(&self, sw: &SweepSpec) -> Result<(), ConfigError> {
        for d in &sw.deltas {
            if !(*d > 0.0 && *d < 1.0) {
                return Err(ConfigError::Delta(*d));
            }
        }
        if !(0.0..=1.0).contains(&sw.h) {
            return Err(ConfigError::Parameter { name: "sweep.h".into(), reason: format!("must lie in [0, 1], got {}", sw.h) });
        }
        if !(sw.t >= 0.0) {
            return Err(ConfigError::Parameter { name: "sweep.t".into(), reason: "must be nonnegative".into() });
        }
        positive("sweep.d0", sw.d0)?;
        if sw.pattern.is_empty() {
            return Err(ConfigError::Parameter { name: "sweep.pattern".into(), reason: "at least one point required".into() });
        }
        for (j, p) in sw.pattern.iter().enumerate() {
            check_len(format!("sweep.pattern[{}]", j + 1), p, self.dim)?;
        }
        let pts: Vec<Point> = sw.pattern.iter().map(|p| to_point(p)).collect();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if norm(&sub(&pts[i], &pts[j])) == 0.0 {
                    return Err(ConfigError::Overlap(i + 1, j + 1));
                }
            }
        }
        if sw.eval_points == 0 {
            return Err(ConfigError::Parameter { name: "sweep.eval_points".into(), reason: "must be positive".into() });
        }
        if let Some(r) = sw.eval_radius {
            positive("sweep.eval_radius", r)?;
        }
        Ok(())
    }

    /// Cells per side used for the reference grid when none is given explicitly.
    pub fn resolution_or_default(&self) -> usize {
        self.resolution.unwrap_or(if self.dim == 3 { 8 } else { 16 })
    }

    /// Canonical JSON rendering.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Copy of this scene at another delta with centers generated from `pattern`.
    pub fn for_sweep_point(&self, pattern: &[Point], delta: f64, spacing: Spacing, h: f64) -> Result<ClusterConfig, ConfigError> {
        let centers = cluster_centers(&self.shape, pattern, delta, spacing)?;
        let mut cfg = self.clone();
        cfg.delta = delta;
        cfg.centers = centers.iter().map(|c| c[..self.dim].to_vec()).collect();
        cfg.spacing = Some(spacing);
        cfg.sweep = None;
        if let Regime::Third { tau_factors: Some(f), .. } = &mut cfg.regime {
            f.resize(centers.len(), 1.0);
        }
        let inc = cfg.incident.get_or_insert(IncidentSpec {
            theta: {
                let mut t = vec![0.0; self.dim];
                t[self.dim - 1] = 1.0;
                t
            },
            n0: None,
            h,
            sign: 1,
        });
        inc.h = h;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Minimum particle distance and the (1-based) pair attaining it.
pub fn min_distance(shape: &ReferenceShape, delta: f64, centers: &[Point]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = shape.particle_distance(delta, &centers[i], &centers[j]);
            if best.map_or(true, |(b, _, _)| d < b) {
                best = Some((d, i + 1, j + 1));
            }
        }
    }
    best
}

/// Scales `pattern` so that the minimum particle distance equals the spacing law at `delta`.
/// A single-point pattern is returned unchanged.
pub fn cluster_centers(shape: &ReferenceShape, pattern: &[Point], delta: f64, spacing: Spacing) -> Result<Vec<Point>, ConfigError> {
    if pattern.len() < 2 {
        return Ok(pattern.to_vec());
    }
    let target = spacing.required_distance(shape.dim(), delta);
    let dist = |s: f64| {
        let pts: Vec<Point> = pattern.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect();
        min_distance(shape, delta, &pts).map(|(d, _, _)| d).unwrap_or(f64::INFINITY)
    };
    let mut hi = 1.0;
    let mut guard = 0;
    while dist(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(ConfigError::Parameter { name: "sweep.pattern".into(), reason: "cannot realize spacing".into() });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(pattern.iter().map(|p| [p[0] * hi, p[1] * hi, p[2] * hi]).collect())
}

/// Parses a JSON (leading `{`) or TOML document and validates it.
pub fn parse_config(text: &str) -> Result<ClusterConfig, ConfigError> {
    let cfg: ClusterConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            ConfigError::Syntax { line, column, message: e.message().to_string() }
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Contrast values for the Third regime.
pub fn derive_contrasts(cfg: &ClusterConfig) -> Result<ContrastParams, ConfigError> {
    let Regime::Third { c_b, a1, tau_factors } = &cfg.regime else {
        return Err(ConfigError::RegimeMismatch { expected: "third", found: cfg.regime.name() });
    };
    let delta = cfg.delta;
    let scale = if cfg.dim == 3 {
        delta.powi(-2)
    } else {
        delta.powi(-2) / delta.ln().abs()
    };
    let m = cfg.particle_count();
    let tau: Vec<f64> = (0..m)
        .map(|j| c_b * tau_factors.as_ref().map_or(1.0, |f| f[j]) * scale)
        .collect();
    let a0 = cfg.background.a0;
    let b0 = cfg.background.b0;
    let a1 = a1.unwrap_or(a0);
    let alpha = a1 - a0;
    let gamma = tau.iter().map(|t| t - alpha * (t + b0) / a1).collect();
    Ok(ContrastParams { tau, alpha, gamma, a0, a1, b0 })
}
