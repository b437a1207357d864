//! On-disk cache of assembled interaction matrices.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic    [u8; 4]  "PHIM"
//! version  u32
//! n_max    u32
//! geometry u8       0 = parallel, 1 = perpendicular
//! phi0     f64
//! sigma    f64
//! lambda   f64
//! values   f64 × N(N+1)/2   upper triangle, row-major, N = (n_max+1)²
//! ```
//!
//! A sidecar `<stem>.json` repeats the header fields for inspection.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{assemble_matrix, CouplingSpec, Geometry, InteractionMatrix};
use crate::basis::ModeTruncation;
use crate::config::EngineConfig;
use crate::error::{EngineError, Result};

pub const MAGIC: &[u8; 4] = b"PHIM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 3 * 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMetadata {
    pub magic: String,
    pub version: u32,
    pub n_max: u32,
    pub geometry: Geometry,
    pub phi0: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A cache file existed but could not be used; the matrix was rebuilt.
    Recomputed,
    Disabled,
}

/// Content hash of everything the matrix depends on. `ω` is excluded: it
/// only enters the free Hamiltonian.
pub fn cache_key(spec: &CouplingSpec, lambda: f64, trunc: ModeTruncation) -> String {
    let mut h = Sha256::new();
    h.update(MAGIC);
    h.update(VERSION.to_le_bytes());
    h.update([spec.geometry.code()]);
    h.update(spec.phi0.to_bits().to_le_bytes());
    h.update(spec.sigma.to_bits().to_le_bytes());
    h.update(lambda.to_bits().to_le_bytes());
    h.update((trunc.n_max() as u64).to_le_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn cache_paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("phi-{key}.bin")), dir.join(format!("phi-{key}.json")))
}

pub fn write_matrix(path: &Path, m: &InteractionMatrix) -> Result<()> {
    let tmp = path.with_extension("bin.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(m.trunc.n_max() as u32).to_le_bytes())?;
        w.write_all(&[m.spec.geometry.code()])?;
        w.write_all(&m.spec.phi0.to_le_bytes())?;
        w.write_all(&m.spec.sigma.to_le_bytes())?;
        w.write_all(&m.lambda.to_le_bytes())?;
        let n = m.dim();
        for a in 0..n {
            for b in a..n {
                w.write_all(&m.get(a, b).to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_metadata(path: &Path, m: &InteractionMatrix) -> Result<()> {
    let meta = CacheMetadata {
        magic: String::from_utf8_lossy(MAGIC).into_owned(),
        version: VERSION,
        n_max: m.trunc.n_max() as u32,
        geometry: m.spec.geometry,
        phi0: m.spec.phi0,
        sigma: m.spec.sigma,
        lambda: m.lambda,
        key: cache_key(&m.spec, m.lambda, m.trunc),
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(path, text)?;
    Ok(())
}

fn take<const N: usize>(buf: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let bytes = buf
        .get(*at..*at + N)
        .ok_or_else(|| EngineError::Cache("truncated header".into()))?;
    *at += N;
    Ok(bytes.try_into().expect("slice length checked"))
}

/// Reads a matrix and checks that its header matches `config`.
pub fn read_matrix(path: &Path, config: &EngineConfig) -> Result<InteractionMatrix> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut at = 0;
    if &take::<4>(&buf, &mut at)? != MAGIC {
        return Err(EngineError::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&buf, &mut at)?);
    if version != VERSION {
        return Err(EngineError::Cache(format!("unsupported version {version}")));
    }
    let n_max = u32::from_le_bytes(take(&buf, &mut at)?) as usize;
    let geometry = Geometry::from_code(take::<1>(&buf, &mut at)?[0])
        .ok_or_else(|| EngineError::Cache("unknown geometry code".into()))?;
    let phi0 = f64::from_le_bytes(take(&buf, &mut at)?);
    let sigma = f64::from_le_bytes(take(&buf, &mut at)?);
    let lambda = f64::from_le_bytes(take(&buf, &mut at)?);
    debug_assert_eq!(at, HEADER_LEN);

    let spec = CouplingSpec { geometry, phi0, sigma };
    let trunc = ModeTruncation::new(n_max).map_err(|_| EngineError::Cache("n_max = 0 in header".into()))?;
    if spec != config.coupling || trunc != config.truncation || lambda.to_bits() != config.lambda.to_bits() {
        return Err(EngineError::Cache(
            "header does not match the requested configuration".into(),
        ));
    }
    let n = trunc.total_dim();
    let expected = HEADER_LEN + 8 * n * (n + 1) / 2;
    if buf.len() != expected {
        return Err(EngineError::Cache(format!(
            "length {} (expected {expected})",
            buf.len()
        )));
    }
    let mut values = Mat::<f64>::zeros(n, n);
    let mut chunks = buf[HEADER_LEN..].chunks_exact(8);
    for a in 0..n {
        for b in a..n {
            let v = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(EngineError::Cache(format!("non-finite entry at ({a},{b})")));
            }
            values[(a, b)] = v;
            values[(b, a)] = v;
        }
    }
    Ok(InteractionMatrix::from_parts(values, spec, trunc, lambda, config.omega))
}

/// Loads the matrix from `dir` when present and valid, otherwise assembles
/// and stores it. `dir = None` disables caching.
pub fn load_or_assemble(config: &EngineConfig, dir: Option<&Path>) -> Result<(InteractionMatrix, CacheStatus, String)> {
    let key = cache_key(&config.coupling, config.lambda, config.truncation);
    let Some(dir) = dir else {
        return Ok((assemble_matrix(config)?, CacheStatus::Disabled, key));
    };
    let (bin, json) = cache_paths(dir, &key);
    let mut status = CacheStatus::Miss;
    if bin.exists() {
        match read_matrix(&bin, config) {
            Ok(m) => return Ok((m, CacheStatus::Hit, key)),
            Err(e) => {
                log::warn!("discarding unusable matrix cache {}: {e}", bin.display());
                status = CacheStatus::Recomputed;
            }
        }
    }
    let m = assemble_matrix(config)?;
    fs::create_dir_all(dir)?;
    write_matrix(&bin, &m)?;
    write_metadata(&json, &m)?;
    Ok((m, status, key))
}
