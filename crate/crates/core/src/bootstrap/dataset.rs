use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::format::{decode_payload, encode_record, file_header, peek_id, MAGIC};
use super::sample_map;
use crate::costmap::CostMap;
use crate::graph::{build_scene_graph, GraphConfig, SceneGraph};
use crate::scenario::{to_robot_frame, GeneratorParams, Scenario, ScenarioClass};
use crate::scoring::{ReferenceScorer, SocialParams};
use crate::seeds::derive_seed;

pub const FORMAT_VERSION: u32 = 1;
pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

/// Requests above this many samples are logged as long-running jobs.
const LONG_RUNNING_SAMPLES: usize = 10_000;
const CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset request: {0}")]
    Argument(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("format error: {0}")]
    Format(String),
    #[error("failed to load sample {sample}: {reason}")]
    Load { sample: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Everything that determines a dataset's contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub social: SocialParams,
    #[serde(default = "default_map_side")]
    pub map_side: usize,
    #[serde(default)]
    pub generator: GeneratorParams,
}

fn default_map_side() -> usize {
    73
}

impl DatasetSpec {
    /// Desk-scale default: 600 / 50 / 50.
    pub fn desk(seed: u64) -> Self {
        Self::with_counts(600, 50, 50, seed)
    }

    pub fn with_counts(n_train: usize, n_dev: usize, n_test: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_dev,
            n_test,
            seed,
            graph: GraphConfig::default(),
            social: SocialParams::default(),
            map_side: default_map_side(),
            generator: GeneratorParams::default(),
        }
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_dev + self.n_test
    }

    pub fn is_long_running(&self) -> bool {
        self.total() > LONG_RUNNING_SAMPLES
    }

    fn counts(&self) -> [usize; 3] {
        [self.n_train, self.n_dev, self.n_test]
    }

    fn check(&self) -> Result<(), DatasetError> {
        if self.counts().iter().any(|&c| c == 0) {
            return Err(DatasetError::Argument("train, dev and test counts must all be at least 1".into()));
        }
        if self.map_side < 3 || self.map_side % 2 == 0 {
            return Err(DatasetError::Argument(format!("map side must be odd and >= 3, got {}", self.map_side)));
        }
        self.graph.check().map_err(|e| DatasetError::Argument(e.to_string()))?;
        self.social.check().map_err(DatasetError::Argument)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub name: String,
    pub file: String,
    pub requested: usize,
    pub count: usize,
    pub skipped: usize,
    pub first_sample: Option<String>,
    pub last_sample: Option<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub classes: Vec<ScenarioClass>,
    pub splits: Vec<SplitInfo>,
    pub skipped: usize,
}

impl DatasetManifest {
    pub fn split(&self, name: &str) -> Option<&SplitInfo> {
        self.splits.iter().find(|s| s.name == name)
    }

    pub fn read(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| DatasetError::Format(format!("manifest: {e}")))?;
        let version = raw.get("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(DatasetError::Format(format!(
                "manifest format version {version:?} does not match supported version {FORMAT_VERSION}"
            )));
        }
        serde_json::from_value(raw).map_err(|e| DatasetError::Format(format!("manifest: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub sample_id: String,
    /// Robot frame.
    pub scenario: Scenario,
    pub graph: SceneGraph,
    pub target: CostMap,
}

/// Builds one sample for global index `k`. `None` when generation failed.
fn make_sample(spec: &DatasetSpec, split: &str, k: usize) -> Option<(String, Scenario, SceneGraph, CostMap)> {
    let class = ScenarioClass::ALL[k % 3];
    let seed = derive_seed(spec.seed, k as u64);
    let world = match spec.generator.generate(class, seed) {
        Ok(s) => s,
        Err(e) => {
            warn!("skipping sample {k} ({class}, seed {seed}): {e}");
            return None;
        }
    };
    let s = to_robot_frame(&world).expect("generator emits world frame");
    let graph = match build_scene_graph(&s, &spec.graph) {
        Ok(g) => g,
        Err(e) => {
            warn!("skipping sample {k}: {e}");
            return None;
        }
    };
    let teacher = ReferenceScorer { params: spec.social };
    let target = sample_map(&s, &teacher, spec.map_side, spec.graph.area_side).expect("spec checked");
    Some((format!("{split}-{k:06}"), s, graph, target))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Cleanup {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Generates scenarios round-robin over the three classes, samples their
/// target maps with the reference scorer and writes `train.bin`, `dev.bin`,
/// `test.bin` and finally `manifest.json` into `out`.
///
/// Sample `k` (counted across all splits) uses class `k mod 3` and a seed
/// derived from `(spec.seed, k)`, so output is identical for identical specs.
pub fn build_dataset(out: &Path, spec: &DatasetSpec) -> Result<DatasetManifest, DatasetError> {
    spec.check()?;
    if spec.is_long_running() {
        warn!("dataset of {} samples requested; this is a long-running job", spec.total());
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut guard = Cleanup { paths: Vec::new(), armed: true };

    let mut splits = Vec::new();
    let mut offset = 0;
    for (name, requested) in SPLITS.into_iter().zip(spec.counts()) {
        let file = format!("{name}.bin");
        let tmp = out.join(format!("{file}.tmp"));
        let fin = out.join(&file);
        guard.paths.push(tmp.clone());
        guard.paths.push(fin.clone());

        let mut hasher = Sha256::new();
        let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
        // Count is patched in after the records are written.
        let placeholder = file_header(0, FORMAT_VERSION);
        w.write_all(&placeholder).map_err(io_err(&tmp))?;

        let mut count = 0usize;
        let mut ids = Vec::new();
        let mut body_hasher = Sha256::new();
        for chunk_start in (0..requested).step_by(CHUNK) {
            let chunk_end = (chunk_start + CHUNK).min(requested);
            let built: Vec<_> = (chunk_start..chunk_end)
                .into_par_iter()
                .map(|local| make_sample(spec, name, offset + local))
                .collect();
            for (id, s, g, t) in built.into_iter().flatten() {
                let rec = encode_record(&id, &s, &g, &t);
                body_hasher.update(&rec);
                w.write_all(&rec).map_err(io_err(&tmp))?;
                ids.push(id);
                count += 1;
            }
        }
        let mut f = w.into_inner().map_err(|e| DatasetError::Io { path: tmp.clone(), source: e.into_error() })?;
        let header = file_header(count, FORMAT_VERSION);
        use std::io::{Seek, SeekFrom};
        f.seek(SeekFrom::Start(0)).map_err(io_err(&tmp))?;
        f.write_all(&header).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        drop(f);
        fs::rename(&tmp, &fin).map_err(io_err(&fin))?;

        hasher.update(&header);
        hasher.update(body_hasher.finalize());
        info!("{name}: wrote {count}/{requested} samples");
        splits.push(SplitInfo {
            name: name.to_string(),
            file,
            requested,
            count,
            skipped: requested - count,
            first_sample: ids.first().cloned(),
            last_sample: ids.last().cloned(),
            sha256: hex(&hasher.finalize()),
        });
        offset += requested;
    }

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        classes: ScenarioClass::ALL.to_vec(),
        skipped: splits.iter().map(|s| s.skipped).sum(),
        splits,
    };
    let path = out.join("manifest.json");
    let tmp = out.join("manifest.json.tmp");
    guard.paths.push(tmp.clone());
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&tmp, text.as_bytes()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    guard.armed = false;
    Ok(manifest)
}

/// SHA-256 of the manifest file bytes. The manifest embeds per-split content
/// hashes, so equal manifest hashes imply equal datasets.
pub fn manifest_hash(dir: &Path) -> Result<String, DatasetError> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Streaming reader over one split, in stored order.
pub struct DatasetReader {
    reader: BufReader<File>,
    path: PathBuf,
    remaining: usize,
    index: usize,
    split: String,
    expected_map_side: usize,
    area_side: f64,
    failed: bool,
}

impl DatasetReader {
    pub fn len(&self) -> usize {
        self.remaining
    }

    pub fn is_empty(&self) -> bool {
        self.remaining == 0
    }

    fn next_sample(&mut self) -> Result<DatasetSample, DatasetError> {
        let fallback = format!("{}[{}]", self.split, self.index);
        let mut len = [0u8; 4];
        self.reader.read_exact(&mut len).map_err(|e| DatasetError::Load {
            sample: fallback.clone(),
            reason: format!("record header: {e}"),
        })?;
        let len = u32::from_le_bytes(len) as usize;
        let mut payload = Vec::new();
        let got = (&mut self.reader).take(len as u64).read_to_end(&mut payload).map_err(io_err(&self.path))?;
        let name = peek_id(&payload).unwrap_or(fallback);
        if got < len {
            return Err(DatasetError::Load { sample: name, reason: format!("record truncated: {got} of {len} bytes") });
        }
        let rec = decode_payload(&payload).map_err(|e| DatasetError::Load { sample: name.clone(), reason: e.0 })?;
        if rec.target_side != self.expected_map_side {
            return Err(DatasetError::Load {
                sample: name,
                reason: format!("target is {}x{0}, manifest says {}", rec.target_side, self.expected_map_side),
            });
        }
        let target = CostMap::new(rec.target_side, self.area_side, rec.target)
            .map_err(|e| DatasetError::Load { sample: name.clone(), reason: e.to_string() })?;
        Ok(DatasetSample { sample_id: rec.id, scenario: rec.scenario, graph: rec.graph, target })
    }
}

impl Iterator for DatasetReader {
    type Item = Result<DatasetSample, DatasetError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 || self.failed {
            return None;
        }
        let r = self.next_sample();
        self.failed = r.is_err();
        self.remaining -= 1;
        self.index += 1;
        Some(r)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (0, Some(self.remaining))
    }
}

/// Opens one split of a dataset directory for lazy iteration.
pub fn load_dataset(dir: &Path, split: &str) -> Result<DatasetReader, DatasetError> {
    let manifest = DatasetManifest::read(dir)?;
    let info = manifest
        .split(split)
        .ok_or_else(|| DatasetError::Format(format!("unknown split {split:?}; expected one of {SPLITS:?}")))?;
    let path = dir.join(&info.file);
    let f = File::open(&path).map_err(io_err(&path))?;
    let mut reader = BufReader::new(f);
    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| DatasetError::Format(format!("{}: truncated file header", info.file)))?;
    if &header[..4] != MAGIC {
        return Err(DatasetError::Format(format!("{}: bad magic", info.file)));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DatasetError::Format(format!("{}: format version {version}, expected {FORMAT_VERSION}", info.file)));
    }
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if count != info.count {
        return Err(DatasetError::Format(format!(
            "{}: holds {count} records but the manifest lists {}",
            info.file, info.count
        )));
    }
    Ok(DatasetReader {
        reader,
        path,
        remaining: count,
        index: 0,
        split: split.to_string(),
        expected_map_side: manifest.spec.map_side,
        area_side: manifest.spec.graph.area_side,
        failed: false,
    })
}

/// Loads a whole split into memory.
pub fn load_split(dir: &Path, split: &str) -> Result<Vec<DatasetSample>, DatasetError> {
    load_dataset(dir, split)?.collect()
}
