//! CSV and JSON artifacts. Floats are written in scientific notation with 17
//! significant digits so that a rerun reproduces files byte for byte.

use serde::Serialize;
use std::io::Write;

use super::{ExperimentError, SweepOutput, SweepRecord};
use crate::config::SCHEMA_VERSION;
use crate::spectral::SpectralData;

pub const SWEEP_COLUMNS: [&str; 16] = [
    "delta",
    "h",
    "t",
    "order",
    "predicate",
    "k",
    "norm_bk",
    "coefficient",
    "w_norm",
    "field_fl",
    "field_oracle",
    "error",
    "increment",
    "apriori_ratio",
    "eval_radius",
    "source",
];

pub const SPECTRUM_COLUMNS: [&str; 6] = ["n", "eigenvalue", "physical_eigenvalue", "moment", "moment_sq", "excitable"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn record_fields(r: &SweepRecord) -> Vec<String> {
    vec![
        fmt_f64(r.delta),
        fmt_f64(r.h),
        fmt_f64(r.t),
        r.order.map_or_else(|| "direct".to_string(), |n| n.to_string()),
        r.predicate.to_string(),
        fmt_f64(r.k),
        fmt_f64(r.norm_bk),
        fmt_f64(r.coefficient),
        fmt_f64(r.w_norm),
        fmt_f64(r.field_fl),
        fmt_opt(r.field_oracle),
        fmt_opt(r.error),
        fmt_opt(r.increment),
        fmt_opt(r.apriori_ratio),
        fmt_f64(r.eval_radius),
        r.source.clone(),
    ]
}

pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Eigenvalues (reference units and on `delta B`) with moments.
pub fn write_spectrum_csv<W: Write>(out: W, spec: &SpectralData) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPECTRUM_COLUMNS)?;
    for n in 0..spec.len() {
        w.write_record([
            n.to_string(),
            fmt_f64(spec.eigenvalues[n]),
            fmt_f64(spec.physical_eigenvalue(n)),
            fmt_f64(spec.moments[n]),
            fmt_f64(spec.physical_moment_sq(n)),
            spec.is_excitable(n).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Eigenvectors as cell values, one column per mode.
pub fn write_eigenvectors_csv<W: Write>(out: W, spec: &SpectralData) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell".to_string(), "measure".to_string()];
    header.extend((0..spec.len()).map(|n| format!("e{n}")));
    w.write_record(&header)?;
    for i in 0..spec.eigenvectors.nrows() {
        let mut row = vec![i.to_string(), fmt_f64(spec.cell_measures[i])];
        row.extend((0..spec.len()).map(|n| fmt_f64(spec.eigenvectors[(i, n)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// A JSON document carrying the schema version and the producing command.
pub fn json_document<T: Serialize>(command: &str, body: &T) -> Result<String, ExperimentError> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, command, body })?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    dim: usize,
    h: f64,
    t: f64,
    d0: f64,
    deltas: &'a [f64],
    eval_radius: f64,
    eval_points: usize,
    resolution: usize,
    oracle_resolution: Option<usize>,
    fits: &'a [super::NamedFit],
}

pub fn sweep_summary_json(out: &SweepOutput) -> Result<String, ExperimentError> {
    json_document(
        "sweep",
        &SweepSummary {
            dim: out.dim,
            h: out.h,
            t: out.t,
            d0: out.d0,
            deltas: &out.deltas,
            eval_radius: out.eval_radius,
            eval_points: out.eval_points,
            resolution: out.resolution,
            oracle_resolution: out.oracle_resolution,
            fits: &out.fits,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(2.0).parse::<f64>().unwrap(), 2.0);
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn envelope_has_schema_version() {
        let s = json_document("fit", &serde_json::json!({"slope": 1.0})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["command"], "fit");
        assert_eq!(v["slope"], 1.0);
    }
}
