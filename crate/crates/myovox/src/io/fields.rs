//! Field files. The binary layout is little-endian: magic `MYOF`, version,
//! tissue count, vertex count, tissue ids, then `f64` values tissue by
//! tissue. The session buffer is the compact `f32` variant the studio reads.

use std::path::Path;

use myovox_core::solver::TissueFieldSet;
use serde::{Deserialize, Serialize};

use super::read_json;
use crate::error::{Error, Result, WithPath};

const MAGIC: &[u8; 4] = b"MYOF";
const VERSION: u32 = 1;

pub fn fields_bin(fields: &TissueFieldSet) -> Vec<u8> {
    let (k, n) = (fields.num_tissues(), fields.num_vertices());
    let mut out = Vec::with_capacity(16 + 4 * k + 8 * k * n);
    out.extend_from_slice(MAGIC);
    for x in [VERSION, k as u32, n as u32] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &id in fields.tissue_ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    for f in fields.fields() {
        for &x in f {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        let s = self.bytes.get(self.at..self.at + N).ok_or_else(|| format!("truncated at byte {}", self.at))?;
        self.at += N;
        Ok(s.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        self.take::<4>().map(u32::from_le_bytes)
    }
}

pub fn parse_fields_bin(bytes: &[u8]) -> std::result::Result<TissueFieldSet, String> {
    let mut r = Reader { bytes, at: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err("not a field file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported field file version {version}"));
    }
    let k = r.u32()? as usize;
    let n = r.u32()? as usize;
    let expected = 16 + 4 * k + 8 * k * n;
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes, got {}", bytes.len()));
    }
    let ids = (0..k).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
    let fields = (0..k)
        .map(|_| (0..n).map(|_| r.take::<8>().map(f64::from_le_bytes)).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    TissueFieldSet::new(ids, fields).map_err(|e| e.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldsJson {
    tissue_ids: Vec<u32>,
    fields: Vec<Vec<f64>>,
}

pub fn fields_json(fields: &TissueFieldSet) -> String {
    crate::json::to_string(&FieldsJson { tissue_ids: fields.tissue_ids().to_vec(), fields: fields.fields().to_vec() })
}

pub fn parse_fields_json(text: &str) -> std::result::Result<TissueFieldSet, String> {
    let f: FieldsJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    TissueFieldSet::new(f.tissue_ids, f.fields).map_err(|e| e.to_string())
}

/// Read a field file, binary or JSON by extension.
pub fn read_fields(path: &Path) -> Result<TissueFieldSet> {
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        let f: FieldsJson = read_json(path)?;
        TissueFieldSet::new(f.tissue_ids, f.fields).map_err(|e| e.to_string())
    } else {
        parse_fields_bin(&std::fs::read(path).at(path)?)
    };
    parsed.map_err(|message| Error::Json { path: path.to_path_buf(), message })
}

/// Session buffer: `u32` tissue count, `u32` ids, then `f32` values tissue
/// by tissue, all little-endian.
pub fn field_buffer_f32(fields: &TissueFieldSet) -> Vec<u8> {
    let (k, n) = (fields.num_tissues(), fields.num_vertices());
    let mut out = Vec::with_capacity(4 + 4 * k + 4 * k * n);
    out.extend_from_slice(&(k as u32).to_le_bytes());
    for &id in fields.tissue_ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    for f in fields.fields() {
        for &x in f {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

/// Tissue ids and per-tissue `f32` values of a session buffer.
pub fn parse_field_buffer_f32(bytes: &[u8]) -> std::result::Result<(Vec<u32>, Vec<Vec<f32>>), String> {
    let mut r = Reader { bytes, at: 0 };
    let k = r.u32()? as usize;
    let ids = (0..k).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
    let rest = bytes.len() - r.at;
    if k == 0 || rest % (4 * k) != 0 {
        return Err("buffer length does not match the tissue count".into());
    }
    let n = rest / (4 * k);
    let fields = (0..k)
        .map(|_| (0..n).map(|_| r.take::<4>().map(f32::from_le_bytes)).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((ids, fields))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TissueFieldSet {
        TissueFieldSet::new(vec![1, 4, 0], vec![vec![0.1, 0.2], vec![1.0 / 3.0, -0.0], vec![5e-300, 7.0]]).unwrap()
    }

    #[test]
    fn binary_and_json_round_trip_bitwise() {
        let f = sample();
        let a = parse_fields_bin(&fields_bin(&f)).unwrap();
        let b = parse_fields_json(&fields_json(&f)).unwrap();
        for g in [a, b] {
            assert_eq!(g.tissue_ids(), f.tissue_ids());
            for (x, y) in g.fields().iter().flatten().zip(f.fields().iter().flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn buffer_layout() {
        let f = sample();
        let buf = field_buffer_f32(&f);
        assert_eq!(buf.len(), 4 + 4 * 3 + 4 * 3 * 2);
        let (ids, vals) = parse_field_buffer_f32(&buf).unwrap();
        assert_eq!(ids, vec![1, 4, 0]);
        assert_eq!(vals[1][0], (1.0f64 / 3.0) as f32);
        assert!(parse_fields_bin(&buf).is_err());
        assert!(parse_fields_bin(&fields_bin(&f)[..30]).is_err());
    }
}
