//! Parameter checkpoints: `MVSDFCK1` magic, little-endian `u64` header length,
//! a JSON header listing names and shapes, then `f32` little-endian payloads
//! in header order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ParameterSet, Scalar};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MVSDFCK1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn encode<T: Scalar>(params: &ParameterSet<T>) -> Result<Vec<u8>> {
    let header = Header {
        dtype: "f32".into(),
        tensors: params
            .entries()
            .map(|(name, v)| TensorEntry {
                name: name.to_string(),
                shape: vec![v.nrows(), v.ncols()],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * params.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, v) in params.entries() {
        for &x in v.iter() {
            out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode<T: Scalar>(bytes: &[u8], origin: &Path) -> Result<ParameterSet<T>> {
    let bad = |msg: &str| Error::Checkpoint(format!("{}: {msg}", origin.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    if header.dtype != "f32" {
        return Err(bad("unsupported dtype"));
    }
    let mut offset = 16 + len;
    let mut params = ParameterSet::new();
    for t in header.tensors {
        let [rows, cols] = t.shape[..] else {
            return Err(bad("tensor is not 2-D"));
        };
        let count = rows * cols;
        let raw = bytes
            .get(offset..offset + 4 * count)
            .ok_or_else(|| bad("truncated payload"))?;
        let values: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        params.add(t.name, Array2::from_shape_vec((rows, cols), values).unwrap());
        offset += 4 * count;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(params)
}

pub fn save<T: Scalar>(params: &ParameterSet<T>, path: &Path) -> Result<()> {
    fs::write(path, encode(params)?)?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParameterSet<T>> {
    decode(&fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_keeps_names_and_f32_values() {
        let mut ps = ParameterSet::<f64>::new();
        ps.add("a.weight", array![[1.0, 2.5], [-3.0, 0.1]]);
        ps.add("latent", array![[0.25, 0.5, 0.75]]);
        let bytes = encode(&ps).unwrap();
        let back: ParameterSet<f64> = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.name(back.find("latent").unwrap()), "latent");
        let a = back.value(back.find("a.weight").unwrap());
        assert_eq!(a[[1, 1]], 0.1f32 as f64);
        assert_eq!(a[[0, 1]], 2.5);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut ps = ParameterSet::<f32>::new();
        ps.add("w", array![[1.0, 2.0]]);
        let bytes = encode(&ps).unwrap();
        assert!(decode::<f32>(&bytes[..bytes.len() - 2], Path::new("mem")).is_err());
        assert!(decode::<f32>(b"nonsense", Path::new("mem")).is_err());
    }
}
