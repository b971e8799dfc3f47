//! Binary cache of eigensystems keyed by a content hash of the discretization.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u32` dim, `u64` cells,
//! `u64` count, `u64` n0, then `f64`s: delta, measure, residual, eigenvalues,
//! moments, cell measures, eigenvectors (column major).

use faer::Mat;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{eigensystem, eigensystem_at, NewtonianDiscretization, SpectralData, SpectralError};

const MAGIC: &[u8; 8] = b"CWEIGEN\0";
pub const CACHE_VERSION: u32 = 1;

/// Hex SHA-256 of the parameters that determine an eigensystem.
pub fn cache_key(disc: &NewtonianDiscretization, delta: f64, count: usize) -> String {
    let shape = &disc.shape;
    // 3D spectra are scale free; 2D ones depend on delta.
    let delta_bits = if disc.dim() == 2 { delta.to_bits() } else { 0 };
    let offset: Vec<String> = shape.offset.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
    let text = format!(
        "v{}|{}|{:016x}|{}|{}|{}|{:016x}|{}",
        CACHE_VERSION,
        shape.kind.name(),
        shape.diameter.to_bits(),
        offset.join(","),
        disc.resolution,
        disc.n_cells(),
        delta_bits,
        count
    );
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.eig"))
}

fn err(e: impl std::fmt::Display) -> SpectralError {
    SpectralError::Cache(e.to_string())
}

pub fn write_spectrum(path: &Path, spec: &SpectralData) -> Result<(), SpectralError> {
    let n = spec.eigenvectors.nrows();
    let count = spec.len();
    let mut buf = Vec::with_capacity(48 + 8 * (3 + 2 * count + n + n * count));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(count as u64).to_le_bytes());
    buf.extend_from_slice(&(spec.n0 as u64).to_le_bytes());
    let mut put = |v: f64| buf.extend_from_slice(&v.to_le_bytes());
    put(spec.delta);
    put(spec.measure);
    put(spec.residual);
    spec.eigenvalues.iter().for_each(|v| put(*v));
    spec.moments.iter().for_each(|v| put(*v));
    spec.cell_measures.iter().for_each(|v| put(*v));
    for c in 0..count {
        for i in 0..n {
            put(spec.eigenvectors[(i, c)]);
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension("eig.tmp");
    let mut f = fs::File::create(&tmp).map_err(err)?;
    f.write_all(&buf).map_err(err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(err)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], SpectralError> {
        let s = self.bytes.get(self.pos..self.pos + len).ok_or_else(|| err("truncated file"))?;
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SpectralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize, SpectralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, len: usize) -> Result<Vec<f64>, SpectralError> {
        let raw = self.take(8 * len)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn read_spectrum(path: &Path) -> Result<SpectralData, SpectralError> {
    let bytes = fs::read(path).map_err(err)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(err("bad magic"));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let n = r.u64()?;
    let count = r.u64()?;
    let n0 = r.u64()?;
    let head = r.f64s(3)?;
    let eigenvalues = r.f64s(count)?;
    let moments = r.f64s(count)?;
    let cell_measures = r.f64s(n)?;
    let vecs = r.f64s(n * count)?;
    Ok(SpectralData {
        dim,
        delta: head[0],
        eigenvalues,
        eigenvectors: Mat::from_fn(n, count, |i, c| vecs[c * n + i]),
        moments,
        measure: head[1],
        cell_measures,
        n0,
        residual: head[2],
    })
}

/// [`eigensystem_at`] backed by an optional cache directory.
pub fn eigensystem_cached(
    disc: &NewtonianDiscretization,
    delta: f64,
    count: usize,
    dir: Option<&Path>,
) -> Result<SpectralData, SpectralError> {
    let Some(dir) = dir else {
        return eigensystem_at(disc, delta, count);
    };
    let path = cache_path(dir, &cache_key(disc, delta, count));
    let spec = match read_spectrum(&path) {
        Ok(s) => s,
        Err(_) => {
            let s = if disc.dim() == 3 { eigensystem(disc, count)? } else { eigensystem_at(disc, delta, count)? };
            write_spectrum(&path, &s)?;
            s
        }
    };
    Ok(if disc.dim() == 3 { spec.at_delta(delta) } else { spec })
}
