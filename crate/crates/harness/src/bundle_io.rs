// SPDX-License-Identifier: MIT OR Apache-2.0

//! Activation-bundle and trace-record files.
//!
//! A bundle is a JSON manifest `<id>.json` plus flat arrays of little-endian
//! `f32`, row-major. Each array entry names its file (relative to the
//! manifest), a byte offset and a shape. Attention is `[layers, heads,
//! tokens]`; depth, confidence and target mask are `[480, 720]`.
//!
//! ```json
//! {
//!   "format": "spatialcf-bundle", "version": 1,
//!   "example_id": "t1-00003", "task": "T1",
//!   "grid": {"image_height": 480, "image_width": 720, "rows": 24, "cols": 36},
//!   "layers": [0, 4, 8], "n_heads": 16, "n_tokens": 864,
//!   "delta": 0.1,
//!   "arrays": {
//!     "attention":   {"file": "t1-00003.attention.f32", "offset": 0, "shape": [3, 16, 864]},
//!     "depth":       {"file": "t1-00003.depth.f32", "offset": 0, "shape": [480, 720]},
//!     "confidence":  {"file": "t1-00003.confidence.f32", "offset": 0, "shape": [480, 720]},
//!     "target_mask": {"file": "t1-00003.target_mask.f32", "offset": 0, "shape": [480, 720]}
//!   }
//! }
//! ```
//!
//! `token_patch` may be given inline; when absent token `k` covers patch `k`.
//! Trace records are JSON Lines, one [`TraceRecord`] per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spatialcf_core::mech::{ActivationBundle, PatchGrid, TraceRecord};
use spatialcf_core::TaskId;

use crate::error::{Error, Result};
use crate::fsio;

pub const FORMAT: &str = "spatialcf-bundle";
pub const VERSION: u32 = 1;
pub const ARRAYS: [&str; 4] = ["attention", "depth", "confidence", "target_mask"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub image_height: usize,
    pub image_width: usize,
    pub rows: usize,
    pub cols: usize,
}

impl From<PatchGrid> for GridSpec {
    fn from(g: PatchGrid) -> Self {
        GridSpec {
            image_height: g.image_height,
            image_width: g.image_width,
            rows: g.rows,
            cols: g.cols,
        }
    }
}

impl From<GridSpec> for PatchGrid {
    fn from(g: GridSpec) -> Self {
        PatchGrid {
            image_height: g.image_height,
            image_width: g.image_width,
            rows: g.rows,
            cols: g.cols,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayRef {
    pub file: PathBuf,
    /// Bytes.
    #[serde(default)]
    pub offset: u64,
    pub shape: Vec<usize>,
}

impl ArrayRef {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub example_id: String,
    pub task: TaskId,
    pub grid: GridSpec,
    pub layers: Vec<u32>,
    pub n_heads: usize,
    pub n_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_patch: Option<Vec<u32>>,
    pub delta: f64,
    pub arrays: BTreeMap<String, ArrayRef>,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {msg}", path.display()))
}

pub fn encode_f32(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn read_array(base: &Path, manifest_path: &Path, name: &str, a: &ArrayRef) -> Result<Vec<f32>> {
    let path = base.join(&a.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let start = usize::try_from(a.offset).map_err(|_| bad(manifest_path, "offset overflows"))?;
    let end = start
        .checked_add(a.len().checked_mul(4).ok_or_else(|| bad(manifest_path, "shape overflows"))?)
        .ok_or_else(|| bad(manifest_path, "offset overflows"))?;
    if end > bytes.len() {
        return Err(bad(
            manifest_path,
            format!("{name}: bytes {start}..{end} past end of {} ({} bytes)", path.display(), bytes.len()),
        ));
    }
    Ok(decode_f32(&bytes[start..end]))
}

/// Reads and validates the bundle described by `manifest_path`.
pub fn read_bundle(manifest_path: &Path) -> Result<ActivationBundle> {
    let m: BundleManifest = fsio::read_json(manifest_path)?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(bad(manifest_path, format!("unsupported format {} v{}", m.format, m.version)));
    }
    let pixels = [m.grid.image_height, m.grid.image_width];
    let want: [(&str, Vec<usize>); 4] = [
        ("attention", vec![m.layers.len(), m.n_heads, m.n_tokens]),
        ("depth", pixels.to_vec()),
        ("confidence", pixels.to_vec()),
        ("target_mask", pixels.to_vec()),
    ];
    if let Some(extra) = m.arrays.keys().find(|k| !ARRAYS.contains(&k.as_str())) {
        return Err(bad(manifest_path, format!("unknown array {extra}")));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut data: BTreeMap<&str, Vec<f32>> = BTreeMap::new();
    for (name, shape) in want {
        let a = m
            .arrays
            .get(name)
            .ok_or_else(|| bad(manifest_path, format!("missing array {name}")))?;
        if a.shape != shape {
            return Err(bad(manifest_path, format!("{name} shape {:?}, expected {shape:?}", a.shape)));
        }
        data.insert(name, read_array(base, manifest_path, name, a)?);
    }
    let token_patch = match m.token_patch {
        Some(tp) if tp.len() != m.n_tokens => {
            return Err(bad(manifest_path, format!("token_patch has {} entries, expected {}", tp.len(), m.n_tokens)));
        }
        Some(tp) => tp,
        None => (0..m.n_tokens as u32).collect(),
    };
    let mut take = |k: &str| data.remove(k).expect("read above");
    let bundle = ActivationBundle {
        example_id: m.example_id,
        task: m.task,
        grid: m.grid.into(),
        layers: m.layers,
        n_heads: m.n_heads,
        token_patch,
        attention: take("attention"),
        depth: take("depth"),
        confidence: take("confidence"),
        target_mask: take("target_mask"),
        delta: m.delta,
    };
    bundle.validate().map_err(|e| bad(manifest_path, e))?;
    Ok(bundle)
}

/// Writes `<dir>/<id>.json` and one `<id>.<array>.f32` per array.
pub fn write_bundle(dir: &Path, b: &ActivationBundle) -> Result<PathBuf> {
    let id = &b.example_id;
    let pixels = vec![b.grid.image_height, b.grid.image_width];
    let mut arrays = BTreeMap::new();
    let parts: [(&str, &[f32], Vec<usize>); 4] = [
        ("attention", &b.attention, vec![b.layers.len(), b.n_heads, b.n_tokens()]),
        ("depth", &b.depth, pixels.clone()),
        ("confidence", &b.confidence, pixels.clone()),
        ("target_mask", &b.target_mask, pixels),
    ];
    for (name, values, shape) in parts {
        let file = PathBuf::from(format!("{id}.{name}.f32"));
        fsio::write_atomic(&dir.join(&file), &encode_f32(values))?;
        arrays.insert(name.to_string(), ArrayRef { file, offset: 0, shape });
    }
    let identity = b.token_patch.iter().enumerate().all(|(k, &p)| p as usize == k);
    let manifest = BundleManifest {
        format: FORMAT.into(),
        version: VERSION,
        example_id: id.clone(),
        task: b.task,
        grid: b.grid.into(),
        layers: b.layers.clone(),
        n_heads: b.n_heads,
        n_tokens: b.n_tokens(),
        token_patch: (!identity).then(|| b.token_patch.clone()),
        delta: b.delta,
        arrays,
    };
    let path = dir.join(format!("{id}.json"));
    fsio::write_json(&path, &manifest)?;
    Ok(path)
}

/// Bundle manifests in `dir`, sorted by file name.
pub fn list_bundles(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>> {
    let records: Vec<TraceRecord> = fsio::read_jsonl(path)?;
    for r in &records {
        r.validate()
            .map_err(|e| bad(path, format!("{}: {e}", r.example_id)))?;
    }
    Ok(records)
}

/// Reads trace records, keeping the ones that validate. Rejected lines
/// come back with their reasons.
pub fn read_traces_lenient(path: &Path) -> Result<(Vec<TraceRecord>, Vec<String>)> {
    let values: Vec<serde_json::Value> = fsio::read_jsonl(path)?;
    let (mut ok, mut skipped) = (Vec::new(), Vec::new());
    for (k, v) in values.into_iter().enumerate() {
        match serde_json::from_value::<TraceRecord>(v) {
            Ok(r) => match r.validate() {
                Ok(()) => ok.push(r),
                Err(e) => skipped.push(format!("record {}: {}: {e}", k + 1, r.example_id)),
            },
            Err(e) => skipped.push(format!("record {}: {e}", k + 1)),
        }
    }
    Ok((ok, skipped))
}

pub fn write_traces(path: &Path, records: &[TraceRecord]) -> Result<()> {
    fsio::write_jsonl(path, records)
}
