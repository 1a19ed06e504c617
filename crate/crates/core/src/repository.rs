//! Vector-set repositories: the data model, manifest/payload ingestion, and a
//! seeded synthetic generator.
//!
//! A table is represented as one unit-norm embedding vector per column. All
//! vectors are normalized at ingest so that the inner product is the cosine
//! similarity and thresholds in `(0, 1]` are meaningful.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type SetId = u32;

/// Tolerance on `| ‖v‖ - 1 |` for ingested vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;
const ZERO_NORM: f64 = 1e-12;

const MANIFEST_MAGIC: &str = "VSETS v1";

/// Inner product accumulated in 64-bit.
///
/// Products are formed in `f64` and summed in index order, so `dot(u, v)` and
/// `dot(v, u)` are bitwise equal.
#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

/// Squared Euclidean distance accumulated in 64-bit.
#[inline]
pub fn squared_l2(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum()
}

/// Checked similarity between two column vectors.
pub fn similarity(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(dot(u, v))
}

/// Scales `v` to unit norm. Fails on zero or non-finite input.
pub fn normalize(v: &mut [f32], set: SetId, index: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { set, index });
    }
    let norm = dot(v, v).sqrt();
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector { set, index });
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    Ok(())
}

/// Row-major block of `len × dim` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectors {
    dim: usize,
    data: Vec<f32>,
}

impl Vectors {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    fn normalize_all(&mut self, set: SetId) -> Result<()> {
        let dim = self.dim;
        for (index, row) in self.data.chunks_exact_mut(dim).enumerate() {
            normalize(row, set, index)?;
        }
        Ok(())
    }
}

/// One table as a set of column vectors. Column order is retained for
/// reporting only; scoring is set-based.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    pub set_id: SetId,
    pub vectors: Vectors,
}

impl VectorSet {
    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Immutable collection of vector sets with dense ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSetRepository {
    dim: usize,
    sets: Vec<VectorSet>,
    total_vectors: usize,
}

impl VectorSetRepository {
    /// Builds a repository from raw rows, normalizing every vector. Set ids are
    /// assigned by position.
    pub fn from_sets(dim: usize, sets: Vec<Vectors>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(sets.len());
        for (i, mut vectors) in sets.into_iter().enumerate() {
            let set_id = i as SetId;
            if vectors.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: vectors.dim(),
                });
            }
            if vectors.is_empty() {
                return Err(Error::EmptySet(set_id));
            }
            vectors.normalize_all(set_id)?;
            out.push(VectorSet { set_id, vectors });
        }
        let total_vectors = out.iter().map(VectorSet::len).sum();
        Ok(Self {
            dim,
            sets: out,
            total_vectors,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    #[inline]
    pub fn total_vectors(&self) -> usize {
        self.total_vectors
    }

    pub fn sets(&self) -> &[VectorSet] {
        &self.sets
    }

    pub fn set(&self, id: SetId) -> Result<&VectorSet> {
        self.sets.get(id as usize).ok_or(Error::UnknownSet(id))
    }

    /// All vectors concatenated in (set_id, index) order.
    pub fn all_vectors(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.total_vectors * self.dim);
        for s in &self.sets {
            out.extend_from_slice(s.vectors.as_slice());
        }
        out
    }

    /// Raw float32 payload size in bytes.
    pub fn raw_bytes(&self) -> usize {
        self.total_vectors * self.dim * 4
    }
}

/// The query vector set `V_Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTable {
    pub vectors: Vectors,
}

impl QueryTable {
    /// Builds a query from raw rows, normalizing every vector.
    pub fn new(mut vectors: Vectors) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptySet(0));
        }
        vectors.normalize_all(0)?;
        Ok(Self { vectors })
    }

    pub fn from_set(set: &VectorSet) -> Self {
        Self {
            vectors: set.vectors.clone(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

struct ManifestRecord {
    set_id: SetId,
    num_vectors: usize,
    payload: PathBuf,
    offset: u64,
    line: usize,
}

fn parse_manifest(path: &Path) -> Result<(usize, Vec<ManifestRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty manifest".into()))?;
    let mut header_fields = header.split('\t');
    if header_fields.next() != Some(MANIFEST_MAGIC) {
        return Err(bad(1, format!("expected header `{MANIFEST_MAGIC}`")));
    }
    let dim = header_fields
        .next()
        .and_then(|f| f.strip_prefix("dimension="))
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d >= 1)
        .ok_or_else(|| bad(1, "missing or invalid dimension=<d>".into()))?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let set_id = fields[0]
            .parse::<SetId>()
            .map_err(|e| bad(line_no, format!("set_id: {e}")))?;
        let num_vectors = fields[1]
            .parse::<usize>()
            .map_err(|e| bad(line_no, format!("num_vectors: {e}")))?;
        let payload = PathBuf::from(fields[2]);
        let payload = if payload.is_absolute() {
            payload
        } else {
            base.join(payload)
        };
        let offset = fields[3]
            .parse::<u64>()
            .map_err(|e| bad(line_no, format!("byte_offset: {e}")))?;
        records.push(ManifestRecord {
            set_id,
            num_vectors,
            payload,
            offset,
            line: line_no,
        });
    }
    Ok((dim, records))
}

fn read_records(manifest: &Path) -> Result<(usize, Vec<Vectors>)> {
    let (dim, mut records) = parse_manifest(manifest)?;
    records.sort_by_key(|r| r.set_id);
    for (i, r) in records.iter().enumerate() {
        if r.set_id as usize != i {
            return Err(Error::Manifest {
                path: manifest.to_path_buf(),
                line: r.line,
                message: format!("set ids must be unique and dense in [0, n); found {}", r.set_id),
            });
        }
        if r.num_vectors == 0 {
            return Err(Error::EmptySet(r.set_id));
        }
    }

    let mut payloads: HashMap<PathBuf, Vec<u8>> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in &records {
        if !payloads.contains_key(&r.payload) {
            let bytes = fs::read(&r.payload).map_err(|e| Error::io(&r.payload, e))?;
            payloads.insert(r.payload.clone(), bytes);
        }
        let bytes = &payloads[&r.payload];
        let len = r.num_vectors * dim * 4;
        let start = r.offset as usize;
        let end = start.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "set {} payload range {}..{} exceeds {} ({} bytes)",
                r.set_id,
                start,
                start + len,
                r.payload.display(),
                bytes.len()
            ))
        })?;
        let data: Vec<f32> = bytes[start..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        out.push(Vectors { dim, data });
    }
    Ok((dim, out))
}

/// Loads a repository from a `VSETS v1` manifest and its float32 payloads.
pub fn ingest_repository(manifest: impl AsRef<Path>) -> Result<VectorSetRepository> {
    let (dim, sets) = read_records(manifest.as_ref())?;
    VectorSetRepository::from_sets(dim, sets)
}

/// Loads a repository whose vectors are already unit length, keeping them
/// bit-exact instead of normalizing again.
pub fn ingest_normalized(manifest: impl AsRef<Path>) -> Result<VectorSetRepository> {
    let (dim, sets) = read_records(manifest.as_ref())?;
    let mut out = Vec::with_capacity(sets.len());
    for (i, vectors) in sets.into_iter().enumerate() {
        let set_id = i as SetId;
        for (index, row) in vectors.rows().enumerate() {
            if (dot(row, row).sqrt() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Format(format!("set {set_id} vector {index} is not unit length")));
            }
        }
        out.push(VectorSet { set_id, vectors });
    }
    let total_vectors = out.iter().map(VectorSet::len).sum();
    Ok(VectorSetRepository {
        dim,
        sets: out,
        total_vectors,
    })
}

/// Loads every record of a manifest as a separate query, ordered by id.
pub fn ingest_queries(manifest: impl AsRef<Path>) -> Result<Vec<QueryTable>> {
    let (_, sets) = read_records(manifest.as_ref())?;
    sets.into_iter()
        .enumerate()
        .map(|(i, mut v)| {
            v.normalize_all(i as SetId)?;
            Ok(QueryTable { vectors: v })
        })
        .collect()
}

/// Loads a single-record query manifest.
pub fn load_query(manifest: impl AsRef<Path>) -> Result<QueryTable> {
    let manifest = manifest.as_ref();
    let mut qs = ingest_queries(manifest)?;
    if qs.len() != 1 {
        return Err(Error::Manifest {
            path: manifest.to_path_buf(),
            line: 1,
            message: format!("query file must hold exactly one record, found {}", qs.len()),
        });
    }
    Ok(qs.remove(0))
}

fn write_manifest<'a>(
    dir: &Path,
    stem: &str,
    dim: usize,
    blocks: impl Iterator<Item = &'a Vectors>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload_name = format!("{stem}.f32");
    let manifest_path = dir.join(format!("{stem}.vsets"));
    let mut manifest = format!("{MANIFEST_MAGIC}\tdimension={dim}\n");
    let mut payload = Vec::new();
    for (id, block) in blocks.enumerate() {
        manifest.push_str(&format!("{id}\t{}\t{payload_name}\t{}\n", block.len(), payload.len()));
        for x in block.as_slice() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let payload_path = dir.join(&payload_name);
    fs::write(&payload_path, payload).map_err(|e| Error::io(&payload_path, e))?;
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(manifest.as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Writes `<dir>/<stem>.vsets` plus `<dir>/<stem>.f32`; returns the manifest path.
pub fn export_repository(repo: &VectorSetRepository, dir: &Path, stem: &str) -> Result<PathBuf> {
    write_manifest(dir, stem, repo.dim, repo.sets.iter().map(|s| &s.vectors))
}

/// Writes queries in the repository format, one record per query.
pub fn export_queries(queries: &[QueryTable], dir: &Path, stem: &str) -> Result<PathBuf> {
    let dim = queries
        .first()
        .map(QueryTable::dim)
        .ok_or_else(|| Error::InvalidParameter("no queries to export".into()))?;
    if let Some(q) = queries.iter().find(|q| q.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: q.dim(),
        });
    }
    write_manifest(dir, stem, dim, queries.iter().map(|q| &q.vectors))
}

/// Parameters of the synthetic topic-mixture generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticConfig {
    pub n_sets: usize,
    pub cols_min: usize,
    pub cols_max: usize,
    pub dim: usize,
    pub n_topics: usize,
    /// Expected norm of the Gaussian perturbation added to a topic direction.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_sets < 1 {
            return bad("n_sets must be >= 1");
        }
        if self.cols_min < 1 || self.cols_min > self.cols_max {
            return bad("cols_range must satisfy 1 <= min <= max");
        }
        if self.dim < 2 {
            return bad("d must be >= 2");
        }
        if self.n_topics < 1 {
            return bad("n_topics must be >= 1");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and >= 0");
        }
        Ok(())
    }
}

/// A generated repository together with the topic model behind it.
#[derive(Debug, Clone)]
pub struct SyntheticRepository {
    pub repo: VectorSetRepository,
    /// Unit topic directions, `n_topics × dim`.
    pub topics: Vectors,
    /// Topic label of every column, per set.
    pub labels: Vec<Vec<u32>>,
    pub config: SyntheticConfig,
}

struct TopicSampler<'a> {
    topics: &'a Vectors,
    noise: f64,
}

impl TopicSampler<'_> {
    fn column(&self, rng: &mut ChaCha8Rng, topic: usize, out: &mut Vec<f32>) {
        let t = self.topics.row(topic);
        if self.noise == 0.0 {
            out.extend_from_slice(t);
            return;
        }
        let dim = t.len();
        let scale = self.noise / (dim as f64).sqrt();
        let mut v: Vec<f64> = t
            .iter()
            .map(|&x| f64::from(x) + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        out.extend(v.into_iter().map(|x| x as f32));
    }

    fn table(&self, rng: &mut ChaCha8Rng, cols: usize) -> (Vec<f32>, Vec<u32>) {
        let n_topics = self.topics.len();
        let mut data = Vec::with_capacity(cols * self.topics.dim());
        let mut labels = Vec::with_capacity(cols);
        for _ in 0..cols {
            let topic = rng.random_range(0..n_topics);
            self.column(rng, topic, &mut data);
            labels.push(topic as u32);
        }
        (data, labels)
    }
}

/// Draws `n_topics` random unit directions and fills each set with columns
/// `normalize(topic + noise)` over uniformly chosen topics.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticRepository> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let mut topic_data = Vec::with_capacity(config.n_topics * dim);
    for t in 0..config.n_topics {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect();
        normalize(&mut v, t as SetId, 0)?;
        topic_data.extend_from_slice(&v);
    }
    let topics = Vectors::new(dim, topic_data)?;
    let sampler = TopicSampler {
        topics: &topics,
        noise: config.noise,
    };
    let mut sets = Vec::with_capacity(config.n_sets);
    let mut labels = Vec::with_capacity(config.n_sets);
    for _ in 0..config.n_sets {
        let cols = rng.random_range(config.cols_min..=config.cols_max);
        let (data, l) = sampler.table(&mut rng, cols);
        sets.push(Vectors::new(dim, data)?);
        labels.push(l);
    }
    // Columns are already unit norm; skip the extra normalization round so that
    // zero-noise columns stay bitwise equal to their topic direction.
    let sets: Vec<VectorSet> = sets
        .into_iter()
        .enumerate()
        .map(|(i, vectors)| VectorSet {
            set_id: i as SetId,
            vectors,
        })
        .collect();
    let total_vectors = sets.iter().map(VectorSet::len).sum();
    Ok(SyntheticRepository {
        repo: VectorSetRepository {
            dim,
            sets,
            total_vectors,
        },
        topics,
        labels,
        config: config.clone(),
    })
}

impl SyntheticRepository {
    /// Fresh query tables drawn from the same topic model.
    pub fn sample_queries(&self, n: usize, cols_min: usize, cols_max: usize, seed: u64) -> Result<Vec<QueryTable>> {
        if cols_min < 1 || cols_min > cols_max {
            return Err(Error::InvalidParameter(
                "query cols_range must satisfy 1 <= min <= max".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = TopicSampler {
            topics: &self.topics,
            noise: self.config.noise,
        };
        (0..n)
            .map(|_| {
                let cols = rng.random_range(cols_min..=cols_max);
                let (data, _) = sampler.table(&mut rng, cols);
                Ok(QueryTable {
                    vectors: Vectors::new(self.repo.dim, data)?,
                })
            })
            .collect()
    }

    /// Queries that are exact copies of randomly chosen repository sets, with
    /// their column order shuffled.
    pub fn copy_queries(&self, n: usize, seed: u64) -> Vec<(SetId, QueryTable)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let id = rng.random_range(0..self.repo.len()) as SetId;
                let set = &self.repo.sets[id as usize];
                let mut order: Vec<usize> = (0..set.len()).collect();
                order.shuffle(&mut rng);
                let rows: Vec<&[f32]> = order.iter().map(|&i| set.vectors.row(i)).collect();
                let vectors = Vectors::from_rows(self.repo.dim, &rows).expect("same dimension");
                (id, QueryTable { vectors })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_loop_dot(u: &[f32], v: &[f32]) -> f64 {
        let mut acc = 0.0f64;
        for i in 0..u.len() {
            acc += u[i] as f64 * v[i] as f64;
        }
        acc
    }

    #[test]
    fn similarity_examples() {
        let u = [0.6f32, 0.8];
        assert!((similarity(&u, &u).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = similarity(&[0.6, 0.8], &[0.8, 0.6]).unwrap();
        let oracle = scalar_loop_dot(&[0.6, 0.8], &[0.8, 0.6]);
        assert_eq!(s, oracle);
        assert!((s - 0.96).abs() < 1e-6);
    }

    #[test]
    fn similarity_dimension_mismatch() {
        let err = similarity(&[1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let cfg = SyntheticConfig {
            n_sets: 100,
            cols_min: 5,
            cols_max: 15,
            dim: 32,
            n_topics: 10,
            noise: 0.1,
            seed: 7,
        };
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.repo.len(), 100);
        for s in a.repo.sets() {
            assert!((5..=15).contains(&s.len()));
            for v in s.vectors.rows() {
                assert!((dot(v, v).sqrt() - 1.0).abs() <= UNIT_NORM_TOLERANCE);
            }
        }
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.repo, b.repo);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn synthetic_zero_noise_is_topic_directions() {
        let cfg = SyntheticConfig {
            n_sets: 20,
            cols_min: 1,
            cols_max: 6,
            dim: 8,
            n_topics: 3,
            noise: 0.0,
            seed: 1,
        };
        let s = generate_synthetic(&cfg).unwrap();
        for (set, labels) in s.repo.sets().iter().zip(&s.labels) {
            for (v, &t) in set.vectors.rows().zip(labels) {
                assert_eq!(v, s.topics.row(t as usize));
            }
        }
    }

    #[test]
    fn synthetic_rejects_bad_parameters() {
        let base = SyntheticConfig {
            n_sets: 1,
            cols_min: 1,
            cols_max: 2,
            dim: 2,
            n_topics: 1,
            noise: 0.0,
            seed: 0,
        };
        for bad in [
            SyntheticConfig {
                n_sets: 0,
                ..base.clone()
            },
            SyntheticConfig { dim: 1, ..base.clone() },
            SyntheticConfig {
                n_topics: 0,
                ..base.clone()
            },
            SyntheticConfig {
                noise: -1.0,
                ..base.clone()
            },
            SyntheticConfig {
                cols_min: 3,
                ..base.clone()
            },
        ] {
            assert!(matches!(generate_synthetic(&bad), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn zero_vector_rejected() {
        let sets = vec![Vectors::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap()];
        let err = VectorSetRepository::from_sets(2, sets).unwrap_err();
        assert!(matches!(err, Error::ZeroVector { set: 0, index: 1 }));
        assert_eq!(err.to_string(), "zero vector at set 0, index 1");
    }
}
