//! Binary checkpoint files for value slices.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "SFDPSLCE"
//! version    u32
//! digest     32 bytes
//! n          u32      number of lattice steps of the run
//! m          u32
//! k          u32
//! bound      u8       0 = minus, 1 = plus
//! width      u8       bytes per value: 8 or 4
//! payload    (2k+1)^2 (m+1) values, row-major in (i, j, lambda index)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::slice::{SliceData, ValueSlice};
use super::Bound;
use crate::error::CheckpointError;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SFDPSLCE";
const HEADER_LEN: usize = 8 + 4 + 32 + 4 + 4 + 4 + 1 + 1;

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn checkpoint_path(dir: &Path, bound: Bound, k: usize) -> PathBuf {
    dir.join(format!("{}_k{:06}.ckpt", bound.label(), k))
}

/// Writes `slice` atomically (temporary file plus rename).
pub fn checkpoint_save(slice: &ValueSlice, path: &Path) -> Result<(), CheckpointError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + slice.data.len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&slice.digest);
    buf.extend_from_slice(&(slice.n as u32).to_le_bytes());
    buf.extend_from_slice(&(slice.m as u32).to_le_bytes());
    buf.extend_from_slice(&(slice.k as u32).to_le_bytes());
    buf.push(match slice.bound {
        Bound::Minus => 0,
        Bound::Plus => 1,
    });
    match &slice.data {
        SliceData::F64(v) => {
            buf.push(8);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        SliceData::F32(v) => {
            buf.push(4);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(&buf).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Reads a slice, checking it against the expected instance digest and, when given,
/// the expected step.
pub fn checkpoint_load(
    path: &Path,
    expected_digest: &[u8; 32],
    expected_k: Option<usize>,
) -> Result<ValueSlice, CheckpointError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let digest: [u8; 32] = bytes[12..44].try_into().unwrap();
    if &digest != expected_digest {
        return Err(CheckpointError::DigestMismatch);
    }
    let n = u32_at(44) as usize;
    let m = u32_at(48) as usize;
    let k = u32_at(52) as usize;
    if let Some(e) = expected_k {
        if e != k {
            return Err(CheckpointError::StepMismatch {
                found: k,
                expected: e,
            });
        }
    }
    let bound = match bytes[56] {
        0 => Bound::Minus,
        1 => Bound::Plus,
        _ => return Err(CheckpointError::BadHeader("bound tag")),
    };
    let width = bytes[57] as usize;
    let count = ValueSlice::expected_len(k, m);
    let payload = &bytes[HEADER_LEN..];
    let expected = count * width;
    if width != 8 && width != 4 {
        return Err(CheckpointError::BadHeader("value width"));
    }
    if payload.len() != expected {
        return Err(CheckpointError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let data = if width == 8 {
        SliceData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    } else {
        SliceData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    };
    if k > n {
        return Err(CheckpointError::BadHeader("step beyond lattice size"));
    }
    Ok(ValueSlice {
        n,
        k,
        bound,
        m,
        data,
        digest,
    })
}

/// The checkpoint with the smallest step for `bound` in `dir`, if any.
pub fn latest_checkpoint(dir: &Path, bound: Bound) -> Result<Option<PathBuf>, CheckpointError> {
    if !dir.exists() {
        return Ok(None);
    }
    let prefix = format!("{}_k", bound.label());
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix(&prefix) else { continue };
        let Some(num) = rest.strip_suffix(".ckpt") else { continue };
        let Ok(k) = num.parse::<usize>() else { continue };
        if best.as_ref().is_none_or(|(bk, _)| k < *bk) {
            best = Some((k, entry.path()));
        }
    }
    Ok(best.map(|(_, p)| p))
}
