//! Instance data model: jobs made of ordered operations, operation classes,
//! chunk decomposition, and the derived instance parameters `m`, `m1`, `m2`.
//!
//! All quantities are integers. A job is a release date plus an ordered list
//! of operation sizes; sizes may be zero (zero-size operations complete
//! instantly in the simulator and never influence chunk boundaries).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer time (slot starts).
pub type Time = u64;
/// Integer operation size / processing volume.
pub type Size = u64;
/// Job identity is the position in the instance's job list.
pub type JobId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("job {0} has no operations")]
    EmptyJob(JobId),
    #[error("job {0} has zero total size")]
    ZeroJob(JobId),
    #[error("instance volume overflows u64")]
    VolumeOverflow,
}

/// One job: a release date and the ordered operation sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub release: Time,
    pub ops: Vec<Size>,
}

impl Job {
    pub fn new(release: Time, ops: Vec<Size>) -> Self {
        Job { release, ops }
    }

    /// Total processing time of the job.
    pub fn total_size(&self) -> Size {
        self.ops.iter().sum()
    }
}

/// A scheduling instance. Job identity is the list position (0-based).
/// Canonical instances list jobs sorted by release date, ties by position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub jobs: Vec<Job>,
}

impl Instance {
    pub fn new(jobs: Vec<Job>) -> Self {
        Instance { jobs }
    }

    /// Every job must have at least one operation and positive total size.
    pub fn validate(&self) -> Result<(), CoreError> {
        let mut volume: Size = 0;
        for (j, job) in self.jobs.iter().enumerate() {
            if job.ops.is_empty() {
                return Err(CoreError::EmptyJob(j));
            }
            let mut total: Size = 0;
            for &p in &job.ops {
                total = total.checked_add(p).ok_or(CoreError::VolumeOverflow)?;
            }
            if total == 0 {
                return Err(CoreError::ZeroJob(j));
            }
            volume = volume.checked_add(total).ok_or(CoreError::VolumeOverflow)?;
        }
        Ok(())
    }

    /// Sum of all operation sizes.
    pub fn total_volume(&self) -> Size {
        self.jobs.iter().map(|j| j.total_size()).sum()
    }

    /// Latest release date (0 for an empty instance).
    pub fn max_release(&self) -> Time {
        self.jobs.iter().map(|j| j.release).max().unwrap_or(0)
    }

    /// Maximum operation count over jobs; shorter jobs are implicitly
    /// zero-padded, so this is the instance-level `m`.
    pub fn max_ops(&self) -> usize {
        self.jobs.iter().map(|j| j.ops.len()).max().unwrap_or(0)
    }

    pub fn from_json(text: &str) -> Result<Instance, String> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| e.to_string())?;
        inst.validate().map_err(|e| e.to_string())?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Class of a positive operation size: floor(log2 p), computed on integers.
///
/// Panics on `p == 0`: zero-size operations have no class and never start or
/// reclassify a chunk.
pub fn class_of(p: Size) -> u32 {
    assert!(p >= 1, "class_of: zero-size operations have no class");
    p.ilog2()
}

/// One chunk of a job: a contiguous run of operations. The chunk's class is
/// the class of its first positive operation, which is also the maximum
/// class over its operations. Zero-size operations never start a chunk; they
/// extend the running chunk (zeros before the first positive operation fold
/// into the first chunk).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub job: JobId,
    /// First operation index (inclusive).
    pub start: usize,
    /// One past the last operation index.
    pub end: usize,
    /// Sum of contained operation sizes.
    pub size: Size,
    /// Class of the first positive operation in the chunk.
    pub class: u32,
    /// Processing units of the job completed before this chunk starts.
    pub offset: Size,
}

impl Chunk {
    /// Number of operations in the chunk, zero-size ones included.
    pub fn op_count(&self) -> usize {
        self.end - self.start
    }

    /// Cumulative end offset of the chunk within its job.
    pub fn offset_end(&self) -> Size {
        self.offset + self.size
    }
}

/// Partition a job's operations into chunks: each chunk is the maximal
/// prefix of the remaining operations whose classes do not exceed the class
/// of the prefix's first positive operation.
pub fn decompose_chunks(job: JobId, ops: &[Size]) -> Vec<Chunk> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut start = 0usize;
    let mut class: Option<u32> = None;
    let mut size: Size = 0;
    let mut offset: Size = 0;
    for (i, &p) in ops.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let k = class_of(p);
        match class {
            None => class = Some(k),
            Some(cur) if k > cur => {
                chunks.push(Chunk { job, start, end: i, size, class: cur, offset });
                offset += size;
                start = i;
                size = 0;
                class = Some(k);
            }
            Some(_) => {}
        }
        size += p;
    }
    if let Some(cur) = class {
        chunks.push(Chunk { job, start, end: ops.len(), size, class: cur, offset });
    }
    chunks
}

/// Instance parameters derived from the chunk structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceParams {
    /// Maximum operations per job.
    pub m: usize,
    /// Maximum chunks per job.
    pub m1: usize,
    /// Maximum operations per chunk (zero-size operations count).
    pub m2: usize,
}

/// Identifies a chunk by job and position within the job's chunk list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChunkId {
    pub job: JobId,
    pub index: usize,
}

/// Per-job chunk partition for a whole instance, with the derived parameters.
#[derive(Debug, Clone)]
pub struct ChunkDecomposition {
    per_job: Vec<Vec<Chunk>>,
}

impl ChunkDecomposition {
    pub fn new(instance: &Instance) -> Self {
        let per_job = instance
            .jobs
            .iter()
            .enumerate()
            .map(|(j, job)| decompose_chunks(j, &job.ops))
            .collect();
        ChunkDecomposition { per_job }
    }

    pub fn job_count(&self) -> usize {
        self.per_job.len()
    }

    pub fn chunks(&self, job: JobId) -> &[Chunk] {
        &self.per_job[job]
    }

    pub fn chunk(&self, id: ChunkId) -> &Chunk {
        &self.per_job[id.job][id.index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChunkId, &Chunk)> {
        self.per_job.iter().enumerate().flat_map(|(job, chunks)| {
            chunks
                .iter()
                .enumerate()
                .map(move |(index, c)| (ChunkId { job, index }, c))
        })
    }

    /// Index of the chunk containing progress offset `y`, or `None` once the
    /// job is complete (`y` at or past the job's total size).
    pub fn chunk_at_progress(&self, job: JobId, y: Size) -> Option<usize> {
        let chunks = &self.per_job[job];
        let idx = chunks.partition_point(|c| c.offset_end() <= y);
        (idx < chunks.len()).then_some(idx)
    }

    /// Number of chunks of `job` not yet completed at progress `y`.
    pub fn unfinished_chunks(&self, job: JobId, y: Size) -> usize {
        let chunks = &self.per_job[job];
        chunks.len() - chunks.partition_point(|c| c.offset_end() <= y)
    }

    pub fn params(&self, instance: &Instance) -> InstanceParams {
        let m = instance.max_ops();
        let m1 = self.per_job.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let m2 = self
            .per_job
            .iter()
            .flat_map(|cs| cs.iter().map(Chunk::op_count))
            .max()
            .unwrap_or(0)
            .max(1);
        InstanceParams { m: m.max(1), m1, m2 }
    }
}

/// Convenience wrapper: decompose and report parameters in one call.
pub fn instance_params(instance: &Instance) -> InstanceParams {
    ChunkDecomposition::new(instance).params(instance)
}
