//! AVEC: a small binary container for `N×d` activation matrices.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AVEC"
//! 4       1     version (1)
//! 5       4     n, u32 little-endian
//! 9       4     d, u32 little-endian
//! 13      1     dtype (1 = f32)
//! 14      4·n·d payload, f32 little-endian, row-major
//! ```
//!
//! Labels live in an optional text sidecar, one `0`/`1` per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::ActivationSet;

pub const MAGIC: [u8; 4] = *b"AVEC";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 14;

pub fn encode_avec(set: &ActivationSet) -> Result<Vec<u8>> {
    let n = u32::try_from(set.len())
        .map_err(|_| Error::InvalidShape(format!("{} rows exceed the u32 range", set.len())))?;
    let d = u32::try_from(set.dim())
        .map_err(|_| Error::InvalidShape(format!("{} columns exceed the u32 range", set.dim())))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.push(DTYPE_F32);
    for &v in set.as_slice() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::NonFinite {
                what: "activation after narrowing to f32",
            });
        }
        out.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_avec(bytes: &[u8]) -> Result<ActivationSet> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().expect("4 bytes")));
        }
        return Err(Error::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    if bytes[13] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[13]));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::InvalidShape(format!("{n}x{d} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes(payload.len() - expected));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    ActivationSet::new(n, d, data)
}

/// Default sidecar location: `<path>.labels`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".labels");
    PathBuf::from(name)
}

pub fn parse_labels(text: &str) -> Result<Vec<u8>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| match line.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::InvalidLabel {
                line: i + 1,
                value: other.to_string(),
            }),
        })
        .collect()
}

pub fn format_labels(labels: &[u8]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

/// Reads an AVEC file. Labels come from `labels`, or from the default
/// sidecar when that file exists.
pub fn read_avec(path: &Path, labels: Option<&Path>) -> Result<ActivationSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut set = decode_avec(&bytes)?;
    let sidecar = match labels {
        Some(p) => Some(p.to_path_buf()),
        None => Some(sidecar_path(path)).filter(|p| p.exists()),
    };
    if let Some(p) = sidecar {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        set = set.with_labels(parse_labels(&text)?)?;
    }
    set.meta.source = path.file_name().map(|s| s.to_string_lossy().into_owned());
    Ok(set)
}

/// Writes the matrix, and the sidecar next to it when the set is labelled.
pub fn write_avec(set: &ActivationSet, path: &Path) -> Result<()> {
    fs::write(path, encode_avec(set)?).map_err(|e| Error::io(path, e))?;
    if let Some(labels) = set.labels() {
        let side = sidecar_path(path);
        fs::write(&side, format_labels(labels)).map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}
