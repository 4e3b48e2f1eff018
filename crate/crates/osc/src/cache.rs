//! On-disk eigensystem cache.
//!
//! File layout (little endian): `OSC1`, format version `u32`, code version
//! and basis descriptor as length-prefixed UTF-8, `k: u64` levels,
//! `d: u64` basis size, the two residuals, `k` energies, then the `d × k`
//! eigenvector matrix column by column. Writes go to a temporary file that
//! is renamed into place.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use osc_core::linalg::Mat;
use osc_core::spectral::EigenSystem;

pub const MAGIC: &[u8; 4] = b"OSC1";
pub const FORMAT_VERSION: u32 = 1;
pub const CODE_VERSION: &str = concat!("osc-", env!("CARGO_PKG_VERSION"));
pub const ENV_DIR: &str = "OSC_CACHE_DIR";

#[derive(Clone, Debug)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    /// `OSC_CACHE_DIR` if set, else the configured directory.
    pub fn resolve(configured: Option<&Path>) -> Self {
        match std::env::var_os(ENV_DIR) {
            Some(d) if !d.is_empty() => Cache::at(PathBuf::from(d)),
            _ => Cache { dir: configured.map(Path::to_path_buf) },
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, descriptor: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.osc", key(descriptor))))
    }

    /// Cached eigensystem for `descriptor`, if present and current.
    pub fn load(&self, descriptor: &str) -> Option<EigenSystem> {
        let bytes = fs::read(self.path(descriptor)?).ok()?;
        let (es, code, desc) = decode(&bytes).ok()?;
        (code == CODE_VERSION && desc == descriptor).then_some(es)
    }

    pub fn store(&self, descriptor: &str, es: &EigenSystem) -> io::Result<()> {
        let Some(path) = self.path(descriptor) else { return Ok(()) };
        let dir = path.parent().expect("cache file has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&encode(es, descriptor))?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Load, or compute and store.
    pub fn get_or_compute<E>(&self, descriptor: &str, compute: impl FnOnce() -> Result<EigenSystem, E>) -> Result<(EigenSystem, bool), E> {
        if let Some(es) = self.load(descriptor) {
            return Ok((es, true));
        }
        let es = compute()?;
        if let Err(e) = self.store(descriptor, &es) {
            eprintln!("warning: cache write failed: {e}");
        }
        Ok((es, false))
    }
}

/// Hex SHA-256 of the descriptor and code version.
pub fn key(descriptor: &str) -> String {
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update([0]);
    h.update(descriptor.as_bytes());
    hex::encode(h.finalize())
}

pub fn encode(es: &EigenSystem, descriptor: &str) -> Vec<u8> {
    let (k, d) = (es.dim(), es.basis_dim());
    let mut out = Vec::with_capacity(64 + descriptor.len() + 8 * (k + k * d));
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
    for s in [CODE_VERSION, descriptor] {
        out.write_u32::<LittleEndian>(s.len() as u32).unwrap();
        out.extend_from_slice(s.as_bytes());
    }
    out.write_u64::<LittleEndian>(k as u64).unwrap();
    out.write_u64::<LittleEndian>(d as u64).unwrap();
    out.write_f64::<LittleEndian>(es.ortho_residual).unwrap();
    out.write_f64::<LittleEndian>(es.eigen_residual).unwrap();
    for &e in &es.energies {
        out.write_f64::<LittleEndian>(e).unwrap();
    }
    // column j of the d × k matrix is eigenvector j
    for &x in es.vectors.as_slice() {
        out.write_f64::<LittleEndian>(x).unwrap();
    }
    out
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_str(r: &mut impl Read) -> io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| bad("descriptor is not UTF-8"))
}

/// Returns the eigensystem, the code version and the descriptor.
pub fn decode(bytes: &[u8]) -> io::Result<(EigenSystem, String, String)> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not an OSC1 file"));
    }
    if r.read_u32::<LittleEndian>()? != FORMAT_VERSION {
        return Err(bad("unsupported format version"));
    }
    let code = read_str(&mut r)?;
    let desc = read_str(&mut r)?;
    let k = r.read_u64::<LittleEndian>()? as usize;
    let d = r.read_u64::<LittleEndian>()? as usize;
    if r.len() != 16 + 8 * (k + k * d) {
        return Err(bad("truncated payload"));
    }
    let ortho_residual = r.read_f64::<LittleEndian>()?;
    let eigen_residual = r.read_f64::<LittleEndian>()?;
    let mut energies = vec![0.0; k];
    r.read_f64_into::<LittleEndian>(&mut energies)?;
    let mut data = vec![0.0; k * d];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    let es = EigenSystem { energies, vectors: Mat::from_rows(k, d, data), ortho_residual, eigen_residual };
    Ok((es, code, desc))
}
