//! Provenance written next to every experiment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::DatasetMeta;

/// SHA-256 of `bytes`, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash in git's object layout (`"blob <len>\0" ‖ bytes`), using
/// SHA-256 as git's sha256 object format does.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// One probe of the step-size search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub gamma: f64,
    /// `"pilot"` (short divergence probe) or `"full"`.
    pub phase: String,
    pub diverged: usize,
    pub converged: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaChoice {
    pub gamma: f64,
    /// `"doubling_search"`, `"override"`, `"theorem_bound"` or `"preset_default"`.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_bound: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub search: Vec<SearchStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub preset: String,
    /// SHA-256 of `config.json` as written.
    pub config_sha256: String,
    pub dataset: DatasetMeta,
    pub dataset_hash: String,
    /// Step size per labelled run family (one entry, or one per `α` in sweeps).
    pub gamma: Vec<(String, GammaChoice)>,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn blob_hash_prefixes_the_header() {
        assert_eq!(git_blob_hash(b""), sha256_hex(b"blob 0\0"));
        assert_ne!(git_blob_hash(b"x"), sha256_hex(b"x"));
    }
}
