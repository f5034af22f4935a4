//! Model directory format: `manifest.json` plus `params.bin`.
//!
//! `params.bin` holds every tensor listed in the manifest, concatenated in
//! manifest order as 32-bit little-endian IEEE-754 floats. The manifest
//! records the architecture, tensor names and shapes, and the CRC-32 of the blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Architecture, Network, ParamSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormSettings {
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema_version: u32,
    pub architecture: Architecture,
    pub batch_norm: BatchNormSettings,
    pub params: Vec<ParamSpec>,
    pub blob_bytes: usize,
    pub crc32: u32,
}

pub fn encode_params(net: &Network) -> Result<Vec<u8>> {
    let mut blob = Vec::new();
    for (t, spec) in net.tensors().into_iter().zip(net.param_specs()) {
        for &v in t {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{} holds {v}, not storable as f32",
                    spec.name
                )));
            }
            blob.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(blob)
}

pub fn manifest_for(net: &Network, blob: &[u8]) -> ModelManifest {
    let bn = &net.blocks[0].bn;
    ModelManifest {
        schema_version: SCHEMA_VERSION,
        architecture: net.architecture(),
        batch_norm: BatchNormSettings {
            momentum: bn.momentum,
            eps: bn.eps,
        },
        params: net.param_specs(),
        blob_bytes: blob.len(),
        crc32: crc32fast::hash(blob),
    }
}

pub fn save_model(net: &Network, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    net.check_consistency()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let blob = encode_params(net)?;
    let manifest = manifest_for(net, &blob);
    let params_path = dir.join(PARAMS_FILE);
    std::fs::write(&params_path, &blob).map_err(|e| Error::io(&params_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<ModelManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptModel {
        path,
        msg: format!("manifest: {e}"),
    })
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<Network> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let corrupt = |msg: String| Error::CorruptModel {
        path: dir.to_path_buf(),
        msg,
    };
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(corrupt(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    let params_path = dir.join(PARAMS_FILE);
    let blob = std::fs::read(&params_path).map_err(|e| Error::io(&params_path, e))?;
    if blob.len() != manifest.blob_bytes {
        return Err(corrupt(format!(
            "params.bin has {} bytes, manifest says {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    if crc32fast::hash(&blob) != manifest.crc32 {
        return Err(corrupt("params.bin checksum mismatch".into()));
    }

    let mut net = Network::zeros(&manifest.architecture).map_err(|e| corrupt(e.to_string()))?;
    if net.param_specs() != manifest.params {
        return Err(corrupt("parameter list does not match the architecture".into()));
    }
    let expected: usize = manifest.params.iter().map(|s| s.numel() * 4).sum();
    if expected != blob.len() {
        return Err(corrupt(format!(
            "expected {expected} parameter bytes, found {}",
            blob.len()
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("length checked above");
        }
    }
    for blk in &mut net.blocks {
        blk.bn.momentum = manifest.batch_norm.momentum;
        blk.bn.eps = manifest.batch_norm.eps;
    }
    if net
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .any(|v| !v.is_finite())
    {
        return Err(corrupt("non-finite parameter".into()));
    }
    Ok(net)
}
