//! Parameter checkpoints.
//!
//! Layout: an 8-byte little-endian `u64` giving the header length `L`, then
//! `L` bytes of UTF-8 JSON
//! `{"format": "subgec-params", "version": 1, "arrays": [{"name", "shape", "offset"}]}`,
//! then the concatenated array data as little-endian `f64`. `offset` counts
//! elements from the start of the data section.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, NUM_PARAMS, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const FORMAT: &str = "subgec-params";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut arrays = Vec::with_capacity(NUM_PARAMS);
    let mut data = Vec::new();
    let mut offset = 0;
    for (name, t) in PARAM_NAMES.iter().zip(params.tensors()) {
        arrays.push(ArrayEntry {
            name: (*name).to_owned(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel();
        for v in t.data() {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&Header {
        format: FORMAT.to_owned(),
        version: VERSION,
        arrays,
    })?;
    let mut bytes = Vec::with_capacity(8 + header.len() + data.len());
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header);
    bytes.extend_from_slice(&data);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Checkpoint(format!("{}: {msg}", path.display()));
    if bytes.len() < 8 {
        return Err(bad("truncated header length".into()));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let data_start = 8usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| bad("header length exceeds file size".into()))?;
    let header: Header = serde_json::from_slice(&bytes[8..data_start])?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(format!(
            "unsupported format {:?} version {}",
            header.format, header.version
        )));
    }
    let body = &bytes[data_start..];
    if body.len() % 8 != 0 {
        return Err(bad(
            "data section is not a whole number of f64 values".into()
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let mut tensors = Vec::with_capacity(NUM_PARAMS);
    for name in PARAM_NAMES {
        let entry = header
            .arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| bad(format!("missing array {name}")))?;
        let numel: usize = entry.shape.iter().product();
        let slice = values
            .get(entry.offset..entry.offset + numel)
            .ok_or_else(|| bad(format!("array {name} runs past the data section")))?;
        tensors.push(Tensor::new(entry.shape.clone(), slice.to_vec())?);
    }
    let tensors: [Tensor; NUM_PARAMS] = tensors.try_into().expect("one tensor per name");
    ModelParams::from_tensors(tensors)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::gnn::ModelDims;

    #[test]
    fn round_trip_is_exact() {
        let dims = ModelDims {
            input: 6,
            hidden: 5,
            embed: 4,
            sage: 3,
        };
        let params = ModelParams::init(dims, &mut rand_chacha::ChaCha8Rng::seed_from_u64(11));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), params);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, [1, 0, 0]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
        fs::write(&path, 1000u64.to_le_bytes()).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
