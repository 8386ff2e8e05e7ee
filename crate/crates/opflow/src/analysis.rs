//! Trace analytics: chunk-level accounting of a run, excess computation,
//! the dual-fitting competitiveness certificate with exact rational
//! arithmetic, the gating assumption checker, the two-operation volume
//! invariant, and the end-to-end pointwise bound check.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::core::{ChunkDecomposition, ChunkId, InstanceParams, JobId, Size, Time};
use crate::sim::Trace;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("reduced-instance assumption does not hold at tau; excess checks refused")]
    AssumptionNotSatisfied,
    #[error("not a uniform-test instance: {0}")]
    NotUniformTests(String),
    #[error("traces come from different realized instances")]
    MismatchedTraces,
}

fn rat(n: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// One active chunk of the algorithm's schedule at the accounting time.
#[derive(Debug, Clone, Copy)]
pub struct ActiveChunk {
    pub id: ChunkId,
    pub class: u32,
    /// No operation of the chunk has received processing yet.
    pub full: bool,
    /// First time the chunk was active.
    pub activated: Time,
}

/// Chunk-level accounting of an algorithm trace at a fixed time `tau`:
/// active chunks and their fullness, per-class sets of full chunks, and the
/// last times a chunk of class >= k (resp. > k) was processed.
pub struct ChunkAccounting<'a> {
    pub tau: Time,
    pub trace: &'a Trace,
    pub decomp: &'a ChunkDecomposition,
    pub params: InstanceParams,
    pub active: Vec<ActiveChunk>,
    /// Classes with a fully unprocessed active chunk, with those chunks.
    pub full_by_class: BTreeMap<u32, Vec<ChunkId>>,
    /// Largest class over all chunks of the instance.
    pub max_class: u32,
    /// `last_at_or_above[k]`: last slot start before tau that processed a
    /// chunk of class >= k.
    last_at_or_above: Vec<Option<Time>>,
}

impl<'a> ChunkAccounting<'a> {
    pub fn new(trace: &'a Trace, decomp: &'a ChunkDecomposition, tau: Time) -> Self {
        let params = decomp.params(&trace.realized);
        let max_class = decomp.iter().map(|(_, c)| c.class).max().unwrap_or(0);

        // Classes of the chunks processed per slot before tau.
        let n = trace.job_count();
        let mut progress = vec![0 as Size; n];
        let mut last_at_class = vec![None; max_class as usize + 2];
        for slot in 0..tau.min(trace.horizon()) {
            if let Some(j) = trace.processed_at(slot) {
                let idx = decomp
                    .chunk_at_progress(j, progress[j])
                    .expect("processed job has an active chunk");
                let class = decomp.chunks(j)[idx].class;
                last_at_class[class as usize] = Some(slot);
                progress[j] += 1;
            }
        }
        // Suffix maxima turn per-class last times into >= k thresholds.
        let mut last_at_or_above = vec![None; max_class as usize + 2];
        let mut running: Option<Time> = None;
        for k in (0..last_at_class.len()).rev() {
            running = match (running, last_at_class[k]) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            last_at_or_above[k] = running;
        }

        let mut active = Vec::new();
        let mut full_by_class: BTreeMap<u32, Vec<ChunkId>> = BTreeMap::new();
        for j in trace.active_jobs(tau) {
            let y = trace.progress(j, tau);
            let idx = decomp
                .chunk_at_progress(j, y)
                .expect("active job has an unfinished chunk");
            let chunk = &decomp.chunks(j)[idx];
            let full = y == chunk.offset;
            let activated = if idx == 0 {
                trace.realized.jobs[j].release
            } else {
                trace.processing_slots(j)[chunk.offset as usize - 1] as Time + 1
            };
            let id = ChunkId { job: j, index: idx };
            if full {
                full_by_class.entry(chunk.class).or_default().push(id);
            }
            active.push(ActiveChunk { id, class: chunk.class, full, activated });
        }

        ChunkAccounting {
            tau,
            trace,
            decomp,
            params,
            active,
            full_by_class,
            max_class,
            last_at_or_above,
        }
    }

    /// Last slot start before tau that processed a chunk of class >= k.
    pub fn last_processed_at_or_above(&self, k: u32) -> Option<Time> {
        self.last_at_or_above.get(k as usize).copied().flatten()
    }

    /// Last slot start before tau that processed a chunk of class > k.
    pub fn last_processed_above(&self, k: u32) -> Option<Time> {
        self.last_at_or_above.get(k as usize + 1).copied().flatten()
    }

    /// Classes whose set of full active chunks is nonempty.
    pub fn crucial_classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.full_by_class.keys().copied()
    }

    /// Total size of the full active chunks of class k.
    pub fn full_volume(&self, k: u32) -> u64 {
        self.full_by_class
            .get(&k)
            .map(|chunks| chunks.iter().map(|&id| self.decomp.chunk(id).size).sum())
            .unwrap_or(0)
    }

    /// Build the release-window chunk set for class `k`: chunks of class
    /// strictly below (or at most) `k` whose job was released since the
    /// algorithm last processed class >= k (resp. > k).
    pub fn family(&self, kind: FamilyKind, k: u32) -> DualFamilySet {
        let threshold = match kind {
            FamilyKind::StrictlyBelow => self.last_processed_at_or_above(k),
            FamilyKind::AtMost => self.last_processed_above(k),
        };
        let window_start = threshold.map_or(0, |t| t + 1);
        let mut members = Vec::new();
        let mut p_total: u64 = 0;
        let mut min_release: Option<Time> = None;
        for (id, chunk) in self.decomp.iter() {
            let in_class = match kind {
                FamilyKind::StrictlyBelow => chunk.class < k,
                FamilyKind::AtMost => chunk.class <= k,
            };
            if !in_class {
                continue;
            }
            let release = self.trace.realized.jobs[id.job].release;
            if release < window_start || release > self.tau {
                continue;
            }
            members.push(id);
            p_total += chunk.size;
            min_release = Some(min_release.map_or(release, |r: Time| r.min(release)));
        }
        let excess = excess_of(p_total, min_release, self.tau);
        DualFamilySet { kind, class: k, window_start, members, p_total, min_release, excess }
    }

    /// The gating check: for every class k that was processed at least once
    /// before tau, every chunk active at tau that became active after that
    /// last processing must be of a class below k.
    pub fn check_reduced_assumption(&self) -> AssumptionReport {
        let mut per_class = Vec::new();
        let mut holds = true;
        for k in 0..=self.max_class {
            let Some(threshold) = self.last_processed_at_or_above(k) else {
                continue;
            };
            let ok = self
                .active
                .iter()
                .all(|a| !(a.activated > threshold && a.class >= k));
            per_class.push((k, ok));
            holds &= ok;
        }
        AssumptionReport { per_class, holds }
    }
}

/// Per-class verdicts of the reduced-instance assumption; classes that were
/// never processed before tau are skipped.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub per_class: Vec<(u32, bool)>,
    pub holds: bool,
}

/// Free-function form of the assumption check.
pub fn check_reduced_assumption(
    trace: &Trace,
    decomp: &ChunkDecomposition,
    tau: Time,
) -> AssumptionReport {
    ChunkAccounting::new(trace, decomp, tau).check_reduced_assumption()
}

fn excess_of(p_total: u64, min_release: Option<Time>, tau: Time) -> u64 {
    let Some(ell) = min_release else {
        return 0;
    };
    debug_assert!(ell <= tau, "excess requires members released by tau");
    let lhs = p_total as u128 + ell as u128;
    lhs.saturating_sub(tau as u128) as u64
}

/// Excess of a chunk set at `tau`: its total size minus the time elapsed
/// since the earliest member release, clamped at zero. Empty sets have
/// excess zero.
pub fn excess(trace: &Trace, decomp: &ChunkDecomposition, members: &[ChunkId], tau: Time) -> u64 {
    let mut p_total: u64 = 0;
    let mut min_release: Option<Time> = None;
    for &id in members {
        p_total += decomp.chunk(id).size;
        let release = trace.realized.jobs[id.job].release;
        assert!(release <= tau, "excess requires members released by tau");
        min_release = Some(min_release.map_or(release, |r: Time| r.min(release)));
    }
    excess_of(p_total, min_release, tau)
}

/// Number of chunks alive at `tau` in the baseline schedule: unfinished
/// chunks of jobs still active. Always at most `m1` per active job.
pub fn opt_alive_chunks(opt: &Trace, decomp: &ChunkDecomposition, tau: Time) -> usize {
    let mut count = 0;
    for j in opt.active_jobs(tau) {
        let y = opt.progress(j, tau);
        count += decomp.unfinished_chunks(j, y);
    }
    let m1 = (0..decomp.job_count())
        .map(|j| decomp.chunks(j).len())
        .max()
        .unwrap_or(1);
    assert!(
        count <= m1 * opt.active_count(tau),
        "alive chunks exceed m1 * active jobs"
    );
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Chunks of class strictly below k, window since the last >= k slot.
    StrictlyBelow,
    /// Chunks of class at most k, window since the last > k slot.
    AtMost,
}

/// A release-window chunk set used by the dual solution.
#[derive(Debug, Clone)]
pub struct DualFamilySet {
    pub kind: FamilyKind,
    pub class: u32,
    pub window_start: Time,
    pub members: Vec<ChunkId>,
    pub p_total: u64,
    pub min_release: Option<Time>,
    pub excess: u64,
}

impl DualFamilySet {
    pub fn contains(&self, chunk_class: u32, release: Time, tau: Time) -> bool {
        let in_class = match self.kind {
            FamilyKind::StrictlyBelow => chunk_class < self.class,
            FamilyKind::AtMost => chunk_class <= self.class,
        };
        in_class && release >= self.window_start && release <= tau
    }
}

/// One dual variable: the chunk set of a crucial class and its value.
#[derive(Debug, Clone)]
pub struct DualEntry {
    pub class: u32,
    pub full_count: usize,
    pub set: DualFamilySet,
    pub y: BigRational,
    /// Excess was zero where the construction divides by it; the value was
    /// forced to zero and the class flagged.
    pub degenerate: bool,
}

/// The dual-fitting certificate at one time: per-crucial-class variables,
/// the exact objective, and per-chunk constraint slacks. All arithmetic is
/// exact rational.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub tau: Time,
    pub params: InstanceParams,
    /// |J(tau)| in the certified schedule.
    pub alg_active: usize,
    pub entries: Vec<DualEntry>,
    pub objective: BigRational,
    /// |J(tau)| / (12 m2) - 1 / (3 m2).
    pub objective_bound: BigRational,
    pub objective_ok: bool,
    pub degenerate_classes: Vec<u32>,
    /// Max over released chunks of the dual constraint's left-hand side.
    pub max_slack: BigRational,
    /// Max over the strictly-below family alone (bounded by 10).
    pub max_slack_below: BigRational,
    /// Max over the at-most family alone (bounded by 4).
    pub max_slack_at_most: BigRational,
    pub feasible_at_14: bool,
    /// Slack per chunk active at tau.
    pub active_chunk_slacks: Vec<(ChunkId, BigRational)>,
}

/// Threshold separating the two dual variable shapes.
fn small_class_threshold(m2: usize) -> usize {
    6 * m2
}

/// Build the dual certificate at `accounting.tau`.
///
/// For each crucial class k: if fewer than `6 m2` full chunks exist, the
/// strictly-below set receives value `|F(k)| / (3 m2 e(S))` (zero plus a
/// degenerate flag when `e(S) = 0`); otherwise the at-most set receives
/// `1 / (m2 2^k)`.
pub fn build_dual_certificate(accounting: &ChunkAccounting<'_>) -> DualCertificate {
    let tau = accounting.tau;
    let params = accounting.params;
    let m2 = params.m2;
    let mut entries = Vec::new();
    let mut degenerate_classes = Vec::new();
    let mut objective = BigRational::zero();

    for (&k, full) in &accounting.full_by_class {
        let full_count = full.len();
        if full_count < small_class_threshold(m2) {
            let set = accounting.family(FamilyKind::StrictlyBelow, k);
            let degenerate = set.excess == 0;
            let y = if degenerate {
                degenerate_classes.push(k);
                BigRational::zero()
            } else {
                BigRational::new(
                    BigInt::from(full_count),
                    BigInt::from(3 * m2 as u128 * set.excess as u128),
                )
            };
            objective += rat(set.excess as u128) * &y;
            entries.push(DualEntry { class: k, full_count, set, y, degenerate });
        } else {
            let set = accounting.family(FamilyKind::AtMost, k);
            let y = BigRational::new(
                BigInt::one(),
                BigInt::from(m2 as u128) * BigInt::from(1u128 << k),
            );
            objective += rat(set.excess as u128) * &y;
            entries.push(DualEntry { class: k, full_count, set, y, degenerate: false });
        }
    }

    let alg_active = accounting.trace.active_count(tau);
    let objective_bound = BigRational::new(BigInt::from(alg_active), BigInt::from(12 * m2))
        - BigRational::new(BigInt::one(), BigInt::from(3 * m2));
    let objective_ok = objective >= objective_bound;

    // Constraint slack per released chunk, split by family.
    let mut max_slack = BigRational::zero();
    let mut max_slack_below = BigRational::zero();
    let mut max_slack_at_most = BigRational::zero();
    let mut active_chunk_slacks = Vec::new();
    let active_ids: BTreeMap<ChunkId, ()> =
        accounting.active.iter().map(|a| (a.id, ())).collect();
    for (id, chunk) in accounting.decomp.iter() {
        let release = accounting.trace.realized.jobs[id.job].release;
        if release > tau {
            continue;
        }
        let mut below = BigRational::zero();
        let mut at_most = BigRational::zero();
        for entry in &entries {
            if entry.y.is_zero() || !entry.set.contains(chunk.class, release, tau) {
                continue;
            }
            let coeff = rat(chunk.size.min(entry.set.excess) as u128);
            match entry.set.kind {
                FamilyKind::StrictlyBelow => below += coeff * &entry.y,
                FamilyKind::AtMost => at_most += coeff * &entry.y,
            }
        }
        let slack = &below + &at_most;
        if below > max_slack_below {
            max_slack_below = below;
        }
        if at_most > max_slack_at_most {
            max_slack_at_most = at_most;
        }
        if slack > max_slack {
            max_slack = slack.clone();
        }
        if active_ids.contains_key(&id) {
            active_chunk_slacks.push((id, slack));
        }
    }
    let feasible_at_14 = max_slack <= rat(14);

    DualCertificate {
        tau,
        params,
        alg_active,
        entries,
        objective,
        objective_bound,
        objective_ok,
        degenerate_classes,
        max_slack,
        max_slack_below,
        max_slack_at_most,
        feasible_at_14,
        active_chunk_slacks,
    }
}

/// One row of the excess-bound verification.
#[derive(Debug, Clone, Serialize)]
pub struct ExcessLemmaRow {
    pub class: u32,
    pub below_excess: u64,
    pub below_required: u64,
    pub below_ok: bool,
    pub at_most_excess: u64,
    pub at_most_required: i128,
    pub at_most_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcessLemmaReport {
    pub rows: Vec<ExcessLemmaRow>,
    pub all_ok: bool,
}

/// Verify, exactly in integers, the two excess lower bounds for every
/// crucial class: the strictly-below set covers all smaller-class full
/// volume, and the at-most set covers the full volume up to the class minus
/// the `2 m2 2^(k+1)` backlog allowance. Requires the reduced-instance
/// assumption to hold at tau.
pub fn verify_excess_lemmas(
    accounting: &ChunkAccounting<'_>,
    assumption: &AssumptionReport,
) -> Result<ExcessLemmaReport, AnalysisError> {
    if !assumption.holds {
        return Err(AnalysisError::AssumptionNotSatisfied);
    }
    let m2 = accounting.params.m2 as i128;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for k in accounting.crucial_classes().collect::<Vec<_>>() {
        let below = accounting.family(FamilyKind::StrictlyBelow, k);
        let below_required: u64 = accounting
            .crucial_classes()
            .filter(|&k2| k2 < k)
            .map(|k2| accounting.full_volume(k2))
            .sum();
        let below_ok = below.excess >= below_required;

        let at_most = accounting.family(FamilyKind::AtMost, k);
        let upto = below_required as i128 + accounting.full_volume(k) as i128;
        let at_most_required = upto - 2 * m2 * (1i128 << (k + 1));
        let at_most_ok = at_most.excess as i128 >= at_most_required;

        all_ok &= below_ok && at_most_ok;
        rows.push(ExcessLemmaRow {
            class: k,
            below_excess: below.excess,
            below_required,
            below_ok,
            at_most_excess: at_most.excess,
            at_most_required,
            at_most_ok,
        });
    }
    Ok(ExcessLemmaReport { rows, all_ok })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimalReport {
    pub sets_checked: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

/// Check the covering constraints of the chunk relaxation against the
/// baseline's alive-chunk indicator: for sampled and structured chunk sets
/// S, the alive members must cover the excess of S. A violation would mean
/// an accounting bug, not a property of the instance.
pub fn verify_primal_feasibility_sampled(
    opt: &Trace,
    decomp: &ChunkDecomposition,
    tau: Time,
    accounting: Option<&ChunkAccounting<'_>>,
    seed: u64,
    count: usize,
) -> PrimalReport {
    use rand::{Rng, SeedableRng};
    let mut released: Vec<(ChunkId, u64, Time, bool)> = Vec::new();
    let mut per_job: BTreeMap<JobId, Vec<usize>> = BTreeMap::new();
    for (id, chunk) in decomp.iter() {
        let release = opt.realized.jobs[id.job].release;
        if release > tau {
            continue;
        }
        let alive = opt.is_active(id.job, tau)
            && chunk.offset_end() > opt.progress(id.job, tau);
        per_job.entry(id.job).or_default().push(released.len());
        released.push((id, chunk.size, release, alive));
    }

    let mut sets_checked = 0;
    let mut violations = 0;
    let mut first_violation = None;
    let mut check = |indices: &[usize], label: &str| {
        sets_checked += 1;
        let mut p_total: u64 = 0;
        let mut min_release: Option<Time> = None;
        for &i in indices {
            p_total += released[i].1;
            let r = released[i].2;
            min_release = Some(min_release.map_or(r, |m: Time| m.min(r)));
        }
        let e = excess_of(p_total, min_release, tau);
        if e == 0 {
            return;
        }
        let lhs: u128 = indices
            .iter()
            .filter(|&&i| released[i].3)
            .map(|&i| released[i].1.min(e) as u128)
            .sum();
        if lhs < e as u128 {
            violations += 1;
            if first_violation.is_none() {
                first_violation = Some(format!(
                    "{label}: covered {lhs} < excess {e} over {} chunks",
                    indices.len()
                ));
            }
        }
    };

    // Structured sets: all released chunks, per-job sets, and the
    // release-window families when accounting is available.
    let all: Vec<usize> = (0..released.len()).collect();
    check(&all, "all released chunks");
    for (job, indices) in &per_job {
        check(indices, &format!("chunks of job {job}"));
    }
    if let Some(acc) = accounting {
        let index_of: BTreeMap<ChunkId, usize> = released
            .iter()
            .enumerate()
            .map(|(i, &(id, _, _, _))| (id, i))
            .collect();
        for k in 0..=acc.max_class + 1 {
            for kind in [FamilyKind::StrictlyBelow, FamilyKind::AtMost] {
                let fam = acc.family(kind, k);
                let indices: Vec<usize> =
                    fam.members.iter().map(|id| index_of[id]).collect();
                check(&indices, &format!("window family {kind:?} k={k}"));
            }
        }
    }

    // Random subsets of varying density.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::new();
    for _ in 0..count {
        let density = rng.gen_range(1..=8u32);
        buf.clear();
        for i in 0..released.len() {
            if rng.gen_range(0..8u32) < density {
                buf.push(i);
            }
        }
        check(&buf, "sampled subset");
    }

    PrimalReport { sets_checked, violations, first_violation }
}

/// Result of the two-operation volume-invariant check at one time.
#[derive(Debug, Clone, Serialize)]
pub struct SwtReport {
    pub tau: Time,
    /// Remaining volume of the |Q*_2A|-largest alive payload operations of
    /// large-payload jobs in the algorithm's schedule.
    pub alg_top_volume: u64,
    /// Remaining payload volume of alive large-payload jobs in the baseline.
    pub opt_volume: u64,
    pub opt_large_alive: usize,
    pub volume_ok: bool,
    pub alg_active: usize,
    pub opt_active: usize,
    pub factor2_ok: bool,
}

/// For two-operation instances with a common test size p: the remaining
/// volume of the x largest alive payload operations of type-A jobs
/// (payload >= p) in the algorithm's schedule must cover the baseline's
/// remaining type-A payload volume, where x is the baseline's alive type-A
/// count; and the active-job counts satisfy the factor-2 bound.
pub fn verify_swt_volume_invariant(
    alg: &Trace,
    opt: &Trace,
    tau: Time,
) -> Result<SwtReport, AnalysisError> {
    if alg.realized != opt.realized {
        return Err(AnalysisError::MismatchedTraces);
    }
    let jobs = &alg.realized.jobs;
    let p = match jobs.first() {
        Some(j) if j.ops.len() == 2 && j.ops[0] >= 1 => j.ops[0],
        _ => {
            return Err(AnalysisError::NotUniformTests(
                "jobs must have exactly two operations with a positive first".into(),
            ))
        }
    };
    for (i, job) in jobs.iter().enumerate() {
        if job.ops.len() != 2 || job.ops[0] != p {
            return Err(AnalysisError::NotUniformTests(format!(
                "job {i} breaks the common first-operation size {p}"
            )));
        }
    }

    let is_large = |j: JobId| jobs[j].ops[1] >= p;
    let payload_remaining = |trace: &Trace, j: JobId| -> u64 {
        let rem_total = jobs[j].total_size() - trace.progress(j, tau);
        rem_total.min(jobs[j].ops[1])
    };

    let mut opt_volume: u64 = 0;
    let mut opt_large_alive = 0;
    for j in opt.active_jobs(tau) {
        if is_large(j) {
            opt_large_alive += 1;
            opt_volume += payload_remaining(opt, j);
        }
    }

    let mut alg_payloads: Vec<u64> = alg
        .active_jobs(tau)
        .filter(|&j| is_large(j))
        .map(|j| payload_remaining(alg, j))
        .collect();
    alg_payloads.sort_unstable_by(|a, b| b.cmp(a));
    let alg_top_volume: u64 = alg_payloads.iter().take(opt_large_alive).sum();

    let alg_active = alg.active_count(tau);
    let opt_active = opt.active_count(tau);
    Ok(SwtReport {
        tau,
        alg_top_volume,
        opt_volume,
        opt_large_alive,
        volume_ok: alg_top_volume >= opt_volume,
        alg_active,
        opt_active,
        factor2_ok: alg_active <= 2 * opt_active,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundViolation {
    pub t: Time,
    pub alg_active: usize,
    pub opt_active: usize,
    pub opt_alive_chunks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub checked_slots: u64,
    pub violations: Vec<BoundViolation>,
    pub ok: bool,
}

/// Pointwise integer form of the end-to-end guarantee: at every t,
/// `|J(t)| <= 168 m2 |J*_c(t)| + 1` and `|J(t)| <= 168 m1 m2 |J*(t)| + 1`.
pub fn end_to_end_bound_check(
    alg: &Trace,
    opt: &Trace,
    decomp: &ChunkDecomposition,
) -> Result<BoundReport, AnalysisError> {
    if alg.realized != opt.realized {
        return Err(AnalysisError::MismatchedTraces);
    }
    let params = decomp.params(&alg.realized);
    let horizon = alg.horizon().max(opt.horizon());
    let mut violations = Vec::new();
    for t in 0..horizon {
        let ja = alg.active_count(t);
        if ja == 0 {
            continue;
        }
        let jc = opt_alive_chunks(opt, decomp, t);
        let jopt = opt.active_count(t);
        let chunk_bound = 168 * params.m2 * jc + 1;
        let job_bound = 168 * params.m1 * params.m2 * jopt + 1;
        if ja > chunk_bound || ja > job_bound {
            violations.push(BoundViolation {
                t,
                alg_active: ja,
                opt_active: jopt,
                opt_alive_chunks: jc,
            });
        }
    }
    let ok = violations.is_empty();
    Ok(BoundReport { checked_slots: horizon, violations, ok })
}

/// Per-slot class structure check of a chunk-policy run: when the processed
/// chunk has class k and some other active chunk has class < k, no further
/// active chunk of class <= k may exist.
pub fn verify_class_dichotomy(alg: &Trace, decomp: &ChunkDecomposition) -> Result<(), String> {
    let n = alg.job_count();
    let mut progress = vec![0 as Size; n];
    for t in 0..alg.horizon() {
        let Some(processed) = alg.processed_at(t) else {
            continue;
        };
        let idx = decomp
            .chunk_at_progress(processed, progress[processed])
            .expect("processed job has an active chunk");
        let k = decomp.chunks(processed)[idx].class;
        let mut below = 0usize;
        let mut at_most = 0usize;
        for j in alg.active_jobs(t) {
            if j == processed {
                continue;
            }
            let jdx = decomp
                .chunk_at_progress(j, alg.progress(j, t))
                .expect("active job has an unfinished chunk");
            let class = decomp.chunks(j)[jdx].class;
            if class < k {
                below += 1;
            }
            if class <= k {
                at_most += 1;
            }
        }
        if below >= 1 && at_most >= 2 {
            return Err(format!(
                "class dichotomy violated at t={t}: processed class {k}, \
                 {below} lower-class and {at_most} at-most-class chunks active"
            ));
        }
        progress[processed] += 1;
    }
    Ok(())
}

/// JSON-facing certificate report with exact fractions rendered as strings.
#[derive(Debug, Serialize)]
pub struct CertificateReport {
    pub tau: Time,
    pub m1: usize,
    pub m2: usize,
    pub alg_active: usize,
    pub opt_active: usize,
    pub opt_alive_chunks: usize,
    pub assumption_holds: bool,
    pub assumption_per_class: Vec<(u32, bool)>,
    pub degenerate_classes: Vec<u32>,
    pub entries: Vec<CertificateEntry>,
    pub objective: String,
    pub objective_bound: String,
    pub objective_ok: bool,
    pub max_slack: String,
    pub max_slack_below: String,
    pub max_slack_at_most: String,
    pub feasible_at_14: bool,
    pub excess_lemmas: Option<ExcessLemmaReport>,
    pub primal: PrimalReport,
    pub end_to_end_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct CertificateEntry {
    pub class: u32,
    pub kind: FamilyKind,
    pub full_count: usize,
    pub members: usize,
    pub window_start: Time,
    pub excess: u64,
    pub y: String,
}

impl CertificateReport {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        certificate: &DualCertificate,
        assumption: &AssumptionReport,
        excess_lemmas: Option<ExcessLemmaReport>,
        primal: PrimalReport,
        bound: &BoundReport,
        opt: &Trace,
        decomp: &ChunkDecomposition,
    ) -> CertificateReport {
        CertificateReport {
            tau: certificate.tau,
            m1: certificate.params.m1,
            m2: certificate.params.m2,
            alg_active: certificate.alg_active,
            opt_active: opt.active_count(certificate.tau),
            opt_alive_chunks: opt_alive_chunks(opt, decomp, certificate.tau),
            assumption_holds: assumption.holds,
            assumption_per_class: assumption.per_class.clone(),
            degenerate_classes: certificate.degenerate_classes.clone(),
            entries: certificate
                .entries
                .iter()
                .map(|e| CertificateEntry {
                    class: e.class,
                    kind: e.set.kind,
                    full_count: e.full_count,
                    members: e.set.members.len(),
                    window_start: e.set.window_start,
                    excess: e.set.excess,
                    y: e.y.to_string(),
                })
                .collect(),
            objective: certificate.objective.to_string(),
            objective_bound: certificate.objective_bound.to_string(),
            objective_ok: certificate.objective_ok,
            max_slack: certificate.max_slack.to_string(),
            max_slack_below: certificate.max_slack_below.to_string(),
            max_slack_at_most: certificate.max_slack_at_most.to_string(),
            feasible_at_14: certificate.feasible_at_14,
            excess_lemmas,
            primal,
            end_to_end_ok: bound.ok,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
