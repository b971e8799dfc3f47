//! `clusterwave` command-line driver.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clusterwave::config::{derive_contrasts, parse_config, ClusterConfig, Point, Regime, ShapeKind};
use clusterwave::experiments::output::{json_document, sweep_summary_json, write_eigenvectors_csv, write_spectrum_csv, write_sweep_csv};
use clusterwave::experiments::{centroid, cluster_diameter, evaluation_points, fit_slope, run_sweep, Abscissa, SweepOptions, EVAL_RADIUS_FACTOR};
use clusterwave::foldylax::{assemble, check_invertibility, scattered_field, solve, FieldSample, FieldVariant, InvertibilityReport, SolveResult};
use clusterwave::spectral::cache::eigensystem_cached;
use clusterwave::spectral::{
    assemble_newtonian, detuning_factor, dielectric_resonances, minnaert_resonance, plasmonic_resonances, realize_incident, ClosedSurface, IncidentWave, ResonanceSet,
};

#[derive(Parser)]
#[command(name = "clusterwave", version, about = "Scattering by clusters of small resonant inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Scene description (JSON or TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Cells per side of the reference grid (surface nodes for Minnaert resonances).
    #[arg(long)]
    resolution: Option<usize>,
    /// Eigensystem cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Worker threads for sweeps (0 = automatic).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, moments and eigenvectors of the Newtonian operator.
    Spectrum(Common),
    /// Resonant wavenumbers of the configured regime.
    Resonances(Common),
    /// Foldy–Lax solve with field samples.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Highest Born order.
        #[arg(long, default_value_t = 3)]
        born: usize,
    },
    /// Delta sweep with oracle comparison and exponent fits.
    Sweep(Common),
    /// Exponent fit of a two-column CSV (`x,y` with header).
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FitAxis::LogDelta)]
        axis: FitAxis,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitAxis {
    LogDelta,
    LogLogDelta,
}

type Outputs = Vec<(String, Vec<u8>)>;
type CmdResult = Result<Outputs, String>;

fn load(path: &Path) -> Result<ClusterConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| e.to_string())
}

fn string_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn cmd_spectrum(c: &Common) -> CmdResult {
    let cfg = load(&c.config)?;
    let res = c.resolution.unwrap_or_else(|| cfg.resolution_or_default());
    let disc = assemble_newtonian(&cfg.shape, res).map_err(string_err)?;
    let spec = eigensystem_cached(&disc, cfg.delta, disc.n_cells(), c.cache.as_deref()).map_err(string_err)?;
    match c.format {
        Format::Csv => {
            let mut values = Vec::new();
            write_spectrum_csv(&mut values, &spec).map_err(string_err)?;
            let mut vectors = Vec::new();
            write_eigenvectors_csv(&mut vectors, &spec).map_err(string_err)?;
            Ok(vec![("spectrum.csv".into(), values), ("eigenvectors.csv".into(), vectors)])
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                dim: usize,
                delta: f64,
                resolution: usize,
                cells: usize,
                measure: f64,
                residual: f64,
                n0: usize,
                eigenvalues: &'a [f64],
                moments: &'a [f64],
            }
            let body = Body {
                dim: spec.dim,
                delta: spec.delta,
                resolution: res,
                cells: disc.n_cells(),
                measure: spec.measure,
                residual: spec.residual,
                n0: spec.n0,
                eigenvalues: &spec.eigenvalues,
                moments: &spec.moments,
            };
            Ok(vec![("spectrum.json".into(), json_document("spectrum", &body).map_err(string_err)?.into_bytes())])
        }
    }
}

fn cmd_resonances(c: &Common) -> CmdResult {
    let cfg = load(&c.config)?;
    let mut set = ResonanceSet::default();
    match &cfg.regime {
        Regime::Third { .. } => {
            let res = c.resolution.unwrap_or_else(|| cfg.resolution_or_default());
            let disc = assemble_newtonian(&cfg.shape, res).map_err(string_err)?;
            let spec = eigensystem_cached(&disc, cfg.delta, disc.n_cells(), c.cache.as_deref()).map_err(string_err)?;
            let contrasts = derive_contrasts(&cfg).map_err(string_err)?;
            set.dielectric = dielectric_resonances(&spec, &contrasts, spec.len()).map_err(string_err)?;
            if let Some(inc) = &cfg.incident {
                let f = detuning_factor(cfg.dim, cfg.delta, inc.h, inc.sign);
                set.detuned = set.dielectric.iter().map(|r| r.k * f.sqrt()).collect();
            }
        }
        Regime::First { c_a, .. } => {
            let surface = match cfg.shape.kind {
                ShapeKind::Ball3d => ClosedSurface::Sphere { radius: 0.5 * cfg.shape.diameter },
                ShapeKind::Cube3d => ClosedSurface::Cube { side: cfg.shape.side() },
                _ => return Err("Minnaert resonances need a 3D reference shape".into()),
            };
            let a1 = c_a * cfg.delta.powi(-2);
            let m = minnaert_resonance(&surface, cfg.delta, cfg.background.a0, a1, c.resolution.unwrap_or(24)).map_err(string_err)?;
            if let Some(inc) = &cfg.incident {
                set.detuned = vec![m.k * detuning_factor(3, cfg.delta, inc.h, inc.sign).sqrt()];
            }
            set.minnaert = Some(m);
        }
        Regime::Second { k_p, eps0, sigma, .. } => {
            let p = plasmonic_resonances(*eps0, *k_p, sigma).map_err(string_err)?;
            if let Some(inc) = &cfg.incident {
                let f = detuning_factor(cfg.dim, cfg.delta, inc.h, inc.sign).sqrt();
                set.detuned = p.resonances.iter().map(|r| r.k * f).collect();
            }
            set.plasmonic = Some(p);
        }
    }
    #[derive(Serialize)]
    struct Body<'a> {
        regime: &'a str,
        delta: f64,
        #[serde(flatten)]
        set: &'a ResonanceSet,
    }
    let body = Body { regime: cfg.regime.name(), delta: cfg.delta, set: &set };
    Ok(vec![("resonances.json".into(), json_document("resonances", &body).map_err(string_err)?.into_bytes())])
}

fn cmd_solve(c: &Common, born: usize) -> CmdResult {
    let cfg = load(&c.config)?;
    let res = c.resolution.unwrap_or_else(|| cfg.resolution_or_default());
    let disc = assemble_newtonian(&cfg.shape, res).map_err(string_err)?;
    let spec = eigensystem_cached(&disc, cfg.delta, disc.n_cells(), c.cache.as_deref()).map_err(string_err)?;
    let contrasts = derive_contrasts(&cfg).map_err(string_err)?;
    let incident = realize_incident(&cfg, &spec, &contrasts).map_err(string_err)?;
    let sys = assemble(&cfg, &spec, incident.k).map_err(string_err)?;
    let result = solve(&sys, born);
    let h = incident.h;
    let t = cfg.spacing.map_or(0.0, |s| s.t);
    let report = check_invertibility(&sys, &cfg, h, t);
    let radius = EVAL_RADIUS_FACTOR * cluster_diameter(&cfg);
    let points = evaluation_points(cfg.dim, &centroid(&cfg.center_points()), radius, 8);
    let mut samples = Vec::new();
    for x in &points {
        if let Some(d) = &result.direct {
            samples.push(FieldSample { x: *x, value: scattered_field(&sys, &d.q, x).map_err(string_err)?, variant: FieldVariant::FlDirect });
        }
        for (n, q) in result.born.partial_sums.iter().enumerate() {
            samples.push(FieldSample { x: *x, value: scattered_field(&sys, q, x).map_err(string_err)?, variant: FieldVariant::FlBorn(n) });
        }
    }
    #[derive(Serialize)]
    struct Body<'a> {
        incident: &'a IncidentWave,
        coefficients: &'a [f64],
        cstar: &'a [Complex64],
        u: &'a [Complex64],
        norm_bk: f64,
        invertibility: &'a InvertibilityReport,
        solution: &'a SolveResult,
        eval_radius: f64,
        eval_points: &'a [Point],
        samples: &'a [FieldSample],
    }
    let body = Body {
        incident: &incident,
        coefficients: &sys.coefficients,
        cstar: &sys.cstar,
        u: &sys.u,
        norm_bk: sys.norm_bk,
        invertibility: &report,
        solution: &result,
        eval_radius: radius,
        eval_points: &points,
        samples: &samples,
    };
    Ok(vec![("solve.json".into(), json_document("solve", &body).map_err(string_err)?.into_bytes())])
}

fn cmd_sweep(c: &Common) -> CmdResult {
    let cfg = load(&c.config)?;
    let opts = SweepOptions { resolution: c.resolution, cache_dir: c.cache.clone(), jobs: c.jobs };
    let out = run_sweep(&cfg, &opts).map_err(string_err)?;
    let mut csv_bytes = Vec::new();
    write_sweep_csv(&mut csv_bytes, &out.records).map_err(string_err)?;
    let summary = sweep_summary_json(&out).map_err(string_err)?;
    let mut files = vec![("sweep.json".to_string(), summary.into_bytes())];
    if c.format == Format::Csv {
        files.insert(0, ("sweep.csv".into(), csv_bytes));
    } else {
        files.push(("sweep_records.json".into(), json_document("sweep", &serde_json::json!({ "records": out.records })).map_err(string_err)?.into_bytes()));
    }
    Ok(files)
}

fn cmd_fit(input: &Path, axis: FitAxis) -> CmdResult {
    let mut reader = csv::Reader::from_path(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(string_err)?;
        let parse = |j: usize| -> Result<f64, String> {
            row.get(j)
                .ok_or_else(|| format!("row {}: missing column {}", i + 1, j + 1))?
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", i + 1))
        };
        points.push((parse(0)?, parse(1)?));
    }
    let abscissa = match axis {
        FitAxis::LogDelta => Abscissa::LogDelta,
        FitAxis::LogLogDelta => Abscissa::LogLogDelta,
    };
    let fit = fit_slope(&points, abscissa).map_err(string_err)?;
    Ok(vec![("fit.json".into(), json_document("fit", &fit).map_err(string_err)?.into_bytes())])
}

/// Writes every output or none.
fn commit(dir: &Path, files: &Outputs) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(format!("{}: {e}", path.display()));
        }
        written.push(path);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, result) = match &cli.command {
        Command::Spectrum(c) => (&c.out, cmd_spectrum(c)),
        Command::Resonances(c) => (&c.out, cmd_resonances(c)),
        Command::Solve { common, born } => (&common.out, cmd_solve(common, *born)),
        Command::Sweep(c) => (&c.out, cmd_sweep(c)),
        Command::Fit { input, axis, out } => (out, cmd_fit(input, *axis)),
    };
    match result.and_then(|files| commit(out, &files).map(|_| files)) {
        Ok(files) => {
            for (name, _) in files {
                println!("{}", out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
