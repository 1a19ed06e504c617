//! On-disk index bundles.
//!
//! A bundle is a directory holding a copy of the normalized repository, one
//! little-endian binary file per index component, and `bundle.meta`, a TOML
//! record with the format version, the resolved build configuration and a
//! SHA-256 digest per file. Nothing time-dependent is written, so equal inputs
//! and seeds produce byte-identical bundles.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centroid_ann::CentroidGraphIndex;
use crate::error::{Error, Result};
use crate::partition_index::{CentroidRef, DispersionBranch, PartitionGroup, PartitionInvertedIndex, PartitionSet};
use crate::pipeline::{BuildConfig, Index};
use crate::quantizer::{build_indexes, ClusterAssignment, Codebook, SetWeightIndex, VectorHandle, VectorInvertedIndex};
use crate::repository::{export_repository, ingest_normalized, Vectors};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "bundle.meta";
const REPO_STEM: &str = "repository";

pub const CODEBOOK: &str = "codebook";
pub const INVERTED: &str = "inverted";
pub const WEIGHTS: &str = "weights";
pub const PARTITIONS: &str = "partitions";
pub const GRAPH: &str = "graph";
pub const REPO_MANIFEST: &str = "repository_manifest";
pub const REPO_PAYLOAD: &str = "repository_payload";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMeta {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub dim: usize,
    pub n_sets: usize,
    pub total_vectors: usize,
    pub n_centroids: usize,
    pub build: BuildConfig,
    pub components: BTreeMap<String, ComponentMeta>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Byte sizes of the stored components against the raw float32 vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageReport {
    pub raw_vector_bytes: u64,
    pub codebook_bytes: u64,
    pub inverted_bytes: u64,
    pub weights_bytes: u64,
    pub partitions_bytes: u64,
    pub graph_bytes: u64,
}

impl StorageReport {
    pub fn quantized_bytes(&self) -> u64 {
        self.codebook_bytes + self.inverted_bytes + self.weights_bytes + self.partitions_bytes + self.graph_bytes
    }

    pub fn ratio(&self) -> f64 {
        self.quantized_bytes() as f64 / self.raw_vector_bytes as f64
    }
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn magic(tag: &[u8; 4]) -> Self {
        let mut e = Enc(Vec::new());
        e.0.extend_from_slice(tag);
        e.u32(FORMAT_VERSION);
        e
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }
    fn vectors(&mut self, v: &Vectors) {
        self.len(v.dim());
        self.len(v.len());
        for x in v.as_slice() {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    at: usize,
    what: &'static str,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8], tag: &[u8; 4], what: &'static str) -> Result<Self> {
        let mut d = Dec { buf, at: 0, what };
        if d.take(4)? != tag {
            return Err(d.err("bad magic"));
        }
        let v = d.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: v,
            });
        }
        Ok(d)
    }
    fn err(&self, msg: &str) -> Error {
        Error::Format(format!("{}: {msg} at byte {}", self.what, self.at))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| self.err("truncated"))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    /// A length, checked against the bytes left so corrupt input cannot
    /// trigger huge allocations.
    fn len(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.at) as u64;
        if n.saturating_mul(min_item_bytes as u64) > left {
            return Err(self.err("length exceeds payload"));
        }
        Ok(n as usize)
    }
    fn vectors(&mut self) -> Result<Vectors> {
        let dim = self.len(0)?;
        let n = self.len(4 * dim)?;
        let raw = self.take(n * dim * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Vectors::new(dim, data)
    }
    fn finish(self) -> Result<()> {
        if self.at != self.buf.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

fn encode_codebook(cb: &Codebook) -> Vec<u8> {
    let mut e = Enc::magic(b"VSCB");
    e.u64(cb.train_seed);
    e.vectors(&cb.centroids);
    e.0
}

fn decode_codebook(buf: &[u8]) -> Result<Codebook> {
    let mut d = Dec::new(buf, b"VSCB", CODEBOOK)?;
    let train_seed = d.u64()?;
    let centroids = d.vectors()?;
    d.finish()?;
    Ok(Codebook { centroids, train_seed })
}

fn encode_inverted(ivi: &VectorInvertedIndex) -> Vec<u8> {
    let mut e = Enc::magic(b"VSIV");
    let (offsets, handles) = ivi.raw_parts();
    e.len(offsets.len() - 1);
    for w in offsets.windows(2) {
        e.len(w[1] - w[0]);
    }
    for h in handles {
        e.u32(h.set_id);
        e.u32(h.index);
    }
    e.0
}

fn decode_inverted(buf: &[u8]) -> Result<VectorInvertedIndex> {
    let mut d = Dec::new(buf, b"VSIV", INVERTED)?;
    let n_c = d.len(8)?;
    let sizes = (0..n_c).map(|_| d.len(8)).collect::<Result<Vec<_>>>()?;
    let mut lists = Vec::with_capacity(n_c);
    for n in sizes {
        let list = (0..n)
            .map(|_| {
                Ok(VectorHandle {
                    set_id: d.u32()?,
                    index: d.u32()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        lists.push(list);
    }
    d.finish()?;
    Ok(VectorInvertedIndex::from_lists(lists))
}

fn encode_weights(w: &SetWeightIndex) -> Vec<u8> {
    let mut e = Enc::magic(b"VSIW");
    let (offsets, centroids, counts) = w.raw_parts();
    e.len(offsets.len());
    for &o in offsets {
        e.len(o);
    }
    for (&c, &n) in centroids.iter().zip(counts) {
        e.u32(c);
        e.u32(n);
    }
    e.0
}

fn decode_weights(buf: &[u8]) -> Result<SetWeightIndex> {
    let mut d = Dec::new(buf, b"VSIW", WEIGHTS)?;
    let n = d.len(8)?;
    let offsets = (0..n)
        .map(|_| d.u64().map(|x| x as usize))
        .collect::<Result<Vec<_>>>()?;
    let nnz = offsets.last().copied().unwrap_or(0);
    let mut centroids = Vec::with_capacity(nnz.min(buf.len() / 8));
    let mut counts = Vec::with_capacity(nnz.min(buf.len() / 8));
    for _ in 0..nnz {
        centroids.push(d.u32()?);
        counts.push(d.u32()?);
    }
    d.finish()?;
    SetWeightIndex::from_csr(offsets, centroids, counts)
}

fn branch_code(b: DispersionBranch) -> u8 {
    match b {
        DispersionBranch::Low => 0,
        DispersionBranch::Middle => 1,
        DispersionBranch::High => 2,
        DispersionBranch::Single => 3,
    }
}

fn encode_partitions(p: &PartitionInvertedIndex) -> Vec<u8> {
    let mut e = Enc::magic(b"VSIP");
    e.len(p.sets.len());
    for s in &p.sets {
        e.u32(s.set_id);
        e.u8(branch_code(s.branch));
        e.vectors(&s.cascade_centroids);
        e.len(s.groups.len());
        for g in &s.groups {
            e.len(g.centroids.len());
            for r in &g.centroids {
                match *r {
                    CentroidRef::Global(c) => {
                        e.u8(0);
                        e.u32(c);
                    }
                    CentroidRef::Cascade(c) => {
                        e.u8(1);
                        e.u32(c);
                    }
                }
            }
            e.len(g.members.len());
            for &m in &g.members {
                e.u32(m);
            }
        }
    }
    e.0
}

fn decode_partitions(buf: &[u8]) -> Result<PartitionInvertedIndex> {
    let mut d = Dec::new(buf, b"VSIP", PARTITIONS)?;
    let n = d.len(1)?;
    let mut sets = Vec::with_capacity(n);
    for _ in 0..n {
        let set_id = d.u32()?;
        let branch = match d.u8()? {
            0 => DispersionBranch::Low,
            1 => DispersionBranch::Middle,
            2 => DispersionBranch::High,
            3 => DispersionBranch::Single,
            _ => return Err(d.err("unknown dispersion branch")),
        };
        let cascade_centroids = d.vectors()?;
        let n_groups = d.len(16)?;
        let mut groups = Vec::with_capacity(n_groups);
        for gid in 0..n_groups {
            let nc = d.len(5)?;
            let centroids = (0..nc)
                .map(|_| match d.u8()? {
                    0 => Ok(CentroidRef::Global(d.u32()?)),
                    1 => Ok(CentroidRef::Cascade(d.u32()?)),
                    _ => Err(d.err("unknown centroid reference")),
                })
                .collect::<Result<Vec<_>>>()?;
            let nm = d.len(4)?;
            let members = (0..nm).map(|_| d.u32()).collect::<Result<Vec<_>>>()?;
            groups.push(PartitionGroup {
                group_id: gid as u32,
                centroids,
                members,
            });
        }
        sets.push(PartitionSet {
            set_id,
            groups,
            cascade_centroids,
            branch,
        });
    }
    d.finish()?;
    Ok(PartitionInvertedIndex { sets })
}

fn encode_graph(g: &CentroidGraphIndex) -> Vec<u8> {
    let mut e = Enc::magic(b"VSGR");
    e.len(g.m);
    e.len(g.ef_construction);
    e.u64(g.seed);
    e.u32(g.entry_point);
    e.len(g.links.len());
    for node in &g.links {
        e.len(node.len());
        for level in node {
            e.len(level.len());
            for &n in level {
                e.u32(n);
            }
        }
    }
    e.0
}

fn decode_graph(buf: &[u8]) -> Result<CentroidGraphIndex> {
    let mut d = Dec::new(buf, b"VSGR", GRAPH)?;
    let m = d.u64()? as usize;
    let ef_construction = d.u64()? as usize;
    let seed = d.u64()?;
    let entry_point = d.u32()?;
    let n = d.len(8)?;
    let mut links = Vec::with_capacity(n);
    for _ in 0..n {
        let levels = d.len(8)?;
        let mut node = Vec::with_capacity(levels);
        for _ in 0..levels {
            let k = d.len(4)?;
            node.push((0..k).map(|_| d.u32()).collect::<Result<Vec<_>>>()?);
        }
        links.push(node);
    }
    d.finish()?;
    let bad = links.is_empty()
        || entry_point as usize >= n
        || links
            .iter()
            .any(|node| node.is_empty() || node.iter().flatten().any(|&x| x as usize >= n));
    if bad {
        return Err(Error::Format("graph: invalid node reference".into()));
    }
    Ok(CentroidGraphIndex {
        m,
        ef_construction,
        seed,
        entry_point,
        links,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<ComponentMeta> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(ComponentMeta {
        file: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    })
}

/// Encoded component payloads of an index, keyed by component name.
fn encode_components(index: &Index) -> Vec<(&'static str, &'static str, Vec<u8>)> {
    let mut out = vec![
        (CODEBOOK, "codebook.bin", encode_codebook(&index.codebook)),
        (INVERTED, "inverted.bin", encode_inverted(&index.inverted)),
        (WEIGHTS, "weights.bin", encode_weights(&index.weights)),
        (PARTITIONS, "partitions.bin", encode_partitions(&index.partitions)),
    ];
    if let Some(g) = &index.graph {
        out.push((GRAPH, "graph.bin", encode_graph(g)));
    }
    out
}

pub fn storage_report(index: &Index) -> StorageReport {
    let sizes: BTreeMap<&str, u64> = encode_components(index)
        .into_iter()
        .map(|(name, _, bytes)| (name, bytes.len() as u64))
        .collect();
    let get = |k: &str| sizes.get(k).copied().unwrap_or(0);
    StorageReport {
        raw_vector_bytes: index.repo.raw_bytes() as u64,
        codebook_bytes: get(CODEBOOK),
        inverted_bytes: get(INVERTED),
        weights_bytes: get(WEIGHTS),
        partitions_bytes: get(PARTITIONS),
        graph_bytes: get(GRAPH),
    }
}

/// Writes a bundle into `dir` (created if missing) and returns its metadata.
pub fn save_bundle(index: &Index, dir: &Path) -> Result<BundleMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut components = BTreeMap::new();
    for (name, file, bytes) in encode_components(index) {
        components.insert(name.to_string(), write_file(dir, file, &bytes)?);
    }
    let manifest = export_repository(&index.repo, dir, REPO_STEM)?;
    for (name, path) in [
        (REPO_MANIFEST, manifest.clone()),
        (REPO_PAYLOAD, manifest.with_extension("f32")),
    ] {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        components.insert(
            name.to_string(),
            ComponentMeta {
                file: path.file_name().unwrap().to_string_lossy().into_owned(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            },
        );
    }
    let meta = BundleMeta {
        format_version: FORMAT_VERSION,
        dim: index.repo.dim(),
        n_sets: index.repo.len(),
        total_vectors: index.repo.total_vectors(),
        n_centroids: index.n_centroids(),
        build: index.config.clone(),
        components,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Format(format!("meta: {e}")))?;
    let path = dir.join(META_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(meta)
}

/// Reads and version-checks `bundle.meta` without touching any component.
pub fn read_meta(dir: &Path) -> Result<BundleMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let probe: VersionProbe = toml::from_str(&text).map_err(|e| Error::Format(format!("meta: {e}")))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: probe.format_version,
        });
    }
    toml::from_str(&text).map_err(|e| Error::Format(format!("meta: {e}")))
}

fn read_component(dir: &Path, meta: &BundleMeta, name: &str) -> Result<Option<Vec<u8>>> {
    let Some(c) = meta.components.get(name) else {
        return Ok(None);
    };
    let path: PathBuf = dir.join(&c.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() as u64 != c.bytes || sha256_hex(&bytes) != c.sha256 {
        return Err(Error::Checksum(format!("{name} ({})", path.display())));
    }
    Ok(Some(bytes))
}

fn required(dir: &Path, meta: &BundleMeta, name: &str) -> Result<Vec<u8>> {
    read_component(dir, meta, name)?.ok_or_else(|| Error::Format(format!("bundle lacks component {name}")))
}

/// Loads a bundle, verifying the version, every checksum and the structural
/// consistency of the components.
pub fn load_bundle(dir: &Path) -> Result<Index> {
    let meta = read_meta(dir)?;
    required(dir, &meta, REPO_MANIFEST)?;
    required(dir, &meta, REPO_PAYLOAD)?;
    let codebook = decode_codebook(&required(dir, &meta, CODEBOOK)?)?;
    let inverted = decode_inverted(&required(dir, &meta, INVERTED)?)?;
    let weights = decode_weights(&required(dir, &meta, WEIGHTS)?)?;
    let partitions = decode_partitions(&required(dir, &meta, PARTITIONS)?)?;
    let graph = read_component(dir, &meta, GRAPH)?
        .map(|b| decode_graph(&b))
        .transpose()?;
    let manifest = dir.join(&meta.components[REPO_MANIFEST].file);
    let repo = ingest_normalized(&manifest)?;

    let inconsistent = |what: &str| Error::Format(format!("bundle components disagree: {what}"));
    if repo.dim() != meta.dim || repo.len() != meta.n_sets || repo.total_vectors() != meta.total_vectors {
        return Err(inconsistent("repository shape"));
    }
    if codebook.dim() != repo.dim() || codebook.len() != meta.n_centroids || inverted.n_centroids() != codebook.len() {
        return Err(inconsistent("codebook size"));
    }
    let sizes: Vec<usize> = repo.sets().iter().map(|s| s.len()).collect();
    let assignment = ClusterAssignment::from_inverted(&inverted, &sizes)?;
    if build_indexes(&assignment, codebook.len())?.1 != weights {
        return Err(inconsistent("set weights"));
    }
    if partitions.sets.len() != repo.len() {
        return Err(inconsistent("partition count"));
    }
    for (i, p) in partitions.sets.iter().enumerate() {
        if p.set_id as usize != i || p.cascade_centroids.dim() != repo.dim() {
            return Err(inconsistent("partition ids"));
        }
        p.validate(sizes[i], codebook.len())
            .map_err(|m| inconsistent(&format!("set {i}: {m}")))?;
    }
    if let Some(g) = &graph {
        if g.len() != codebook.len() {
            return Err(inconsistent("graph size"));
        }
    }
    Ok(Index {
        config: meta.build,
        repo,
        codebook,
        inverted,
        weights,
        partitions,
        graph,
    })
}
