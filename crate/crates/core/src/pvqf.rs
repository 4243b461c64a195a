//! PVQF: the binary feature-tensor file format.
//!
//! Layout (all integers unsigned 32-bit little-endian):
//!
//! | bytes   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..4    | magic `PVQF`                              |
//! | 4..8    | version (1)                               |
//! | 8..12   | number of maps                            |
//! | 12..16  | h                                         |
//! | 16..20  | w                                         |
//! | 20..24  | k                                         |
//! | 24..    | `n·h·w·k` little-endian `f32`, `[map][row][col][channel]` |
//!
//! There is no padding and no trailer.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::FeatureMap;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PVQF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Encodes maps into PVQF bytes. All maps must share one shape.
pub fn encode(maps: &[FeatureMap]) -> Result<Vec<u8>> {
    let (h, w, k) = match maps.first() {
        Some(m) => m.shape(),
        None => (0, 0, 0),
    };
    if let Some(bad) = maps.iter().position(|m| m.shape() != (h, w, k)) {
        return Err(Error::ShapeMismatch(format!(
            "map {bad} has shape {:?}, map 0 has {:?}",
            maps[bad].shape(),
            (h, w, k)
        )));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Validation(format!("{what} = {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + maps.len() * h * w * k * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(maps.len(), "n_maps")?.to_le_bytes());
    out.extend_from_slice(&to_u32(h, "h")?.to_le_bytes());
    out.extend_from_slice(&to_u32(w, "w")?.to_le_bytes());
    out.extend_from_slice(&to_u32(k, "k")?.to_le_bytes());
    for map in maps {
        for v in map.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Decodes PVQF bytes.
pub fn decode(bytes: &[u8]) -> Result<Vec<FeatureMap>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let n = read_u32(bytes, 8) as u64;
    let h = read_u32(bytes, 12) as u64;
    let w = read_u32(bytes, 16) as u64;
    let k = read_u32(bytes, 20) as u64;
    let per_map = h * w * k;
    let expected = HEADER_LEN as u64 + n * per_map * 4;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::Validation(format!(
            "PVQF payload has {} trailing bytes",
            found - expected
        )));
    }
    let per_map = per_map as usize;
    let payload = &bytes[HEADER_LEN..];
    (0..n as usize)
        .map(|m| {
            let chunk = &payload[m * per_map * 4..(m + 1) * per_map * 4];
            let values = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            FeatureMap::new(h as usize, w as usize, k as usize, values)
        })
        .collect()
}

pub fn write_feature_file(maps: &[FeatureMap], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(maps)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<Vec<FeatureMap>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
