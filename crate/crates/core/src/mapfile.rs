//! DMAP binary map format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DMAP"
//! 4       4     version, u32 LE (= 1)
//! 8       4     height, u32 LE
//! 12      4     width, u32 LE
//! 16      4*h*w values, f32 LE, row-major
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::rasterize::DensityMap;

pub const MAGIC: [u8; 4] = *b"DMAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum MapFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"DMAP\"")]
    BadMagic([u8; 4]),
    #[error("unsupported DMAP version {0}")]
    UnsupportedVersion(u32),
    #[error("header truncated: {0} of {HEADER_LEN} bytes")]
    TruncatedHeader(usize),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} unexpected bytes after payload")]
    TrailingData(usize),
    #[error("map has zero width or height")]
    EmptyMap,
}

pub fn encode_map(map: &DensityMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.values().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&map.height().to_le_bytes());
    out.extend_from_slice(&map.width().to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_map(bytes: &[u8]) -> Result<DensityMap, MapFileError> {
    if bytes.len() < 4 {
        return Err(MapFileError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(MapFileError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(MapFileError::TruncatedHeader(bytes.len()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(MapFileError::UnsupportedVersion(version));
    }
    let height = word(8);
    let width = word(12);
    if width == 0 || height == 0 {
        return Err(MapFileError::EmptyMap);
    }
    let expected = (height as usize)
        .checked_mul(width as usize)
        .and_then(|n| n.checked_mul(4))
        .unwrap_or(usize::MAX);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(MapFileError::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(MapFileError::TrailingData(payload.len() - expected));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DensityMap::from_values(width, height, values).expect("payload length checked"))
}

pub fn write_map_to<W: Write>(mut writer: W, map: &DensityMap) -> Result<(), MapFileError> {
    writer.write_all(&encode_map(map))?;
    writer.flush()?;
    Ok(())
}

pub fn read_map_from<R: Read>(mut reader: R) -> Result<DensityMap, MapFileError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_map(&bytes)
}

pub fn write_map(path: impl AsRef<Path>, map: &DensityMap) -> Result<(), MapFileError> {
    fs::write(path, encode_map(map))?;
    Ok(())
}

pub fn read_map(path: impl AsRef<Path>) -> Result<DensityMap, MapFileError> {
    decode_map(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DensityMap {
        DensityMap::from_values(3, 2, vec![0.0, 1.5, -2.0, f32::MIN_POSITIVE, 3.25e-7, 1e30]).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_map(&sample());
        assert_eq!(&bytes[..4], b"DMAP");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &0.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 4);
    }

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dmap");
        write_map(&path, &sample()).unwrap();
        let back = read_map(&path).unwrap();
        let bits = |m: &DensityMap| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&sample()));
        assert_eq!((back.width(), back.height()), (3, 2));
    }

    #[test]
    fn corrupted_inputs() {
        let good = encode_map(&sample());

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XMAP");
        assert!(matches!(decode_map(&bad), Err(MapFileError::BadMagic(m)) if &m == b"XMAP"));

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(decode_map(&v2), Err(MapFileError::UnsupportedVersion(2))));

        assert!(matches!(
            decode_map(&good[..good.len() - 1]),
            Err(MapFileError::TruncatedPayload { expected: 24, found: 23 })
        ));
        assert!(matches!(decode_map(&good[..10]), Err(MapFileError::TruncatedHeader(10))));
        assert!(matches!(decode_map(b"DM"), Err(MapFileError::TruncatedHeader(2))));

        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_map(&long), Err(MapFileError::TrailingData(1))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_map(dir.path().join("absent.dmap")), Err(MapFileError::Io(_))));
    }
}
