//! Deterministic integer-timestep simulation engine.
//!
//! The engine enforces the information model: a policy observes, per active
//! job, only the active operation's index and remaining size plus the sizes
//! of already-completed operations. Sizes of later operations and the
//! operation count stay hidden until revealed by execution. Within each
//! integer step the event order is fixed: completions from the previous
//! slot, then arrivals, then policy bookkeeping and choice, then one unit of
//! processing.

use std::num::NonZeroU32;

use serde::Serialize;
use thiserror::Error;

use crate::core::{Instance, Job, JobId, Size, Time};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy chose job {job} which is not active at time {time}")]
    NonActiveJob { job: JobId, time: Time },
    #[error("horizon guard {guard} exceeded at time {time}")]
    HorizonExceeded { guard: Time, time: Time },
    #[error("job {0} completed at reveal time with zero total size")]
    ZeroJob(JobId),
    #[error("clairvoyant policy requires a fixed instance source")]
    OracleUnavailable,
    #[error("adaptive sources require an explicit horizon guard")]
    MissingGuard,
    #[error("invalid instance: {0}")]
    InvalidInstance(#[from] crate::core::CoreError),
    #[error("policy invariant violated at time {time}: {message}")]
    Policy { time: Time, message: String },
    #[error("traces come from different realized instances")]
    MismatchedInstances,
    #[error("work-conserving baseline is idle at time {time} while the compared run is not")]
    BaselineIdle { time: Time },
}

/// Raised by a policy when one of its internal invariants breaks.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct PolicyError(pub String);

/// The visible part of one active job.
///
/// Deliberately omits anything past the active operation: later sizes and
/// the operation count are unknown until execution reveals them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisibleJobState<'a> {
    pub id: JobId,
    pub release: Time,
    /// Index of the active operation within the job.
    pub active_op: usize,
    /// Remaining size of the active operation.
    pub active_remaining: Size,
    /// Sizes of all already-completed operations, in order.
    pub completed_ops: &'a [Size],
}

/// Read-only view of the run so far, handed to adaptive adversaries.
pub struct RunHistory<'a> {
    pub time: Time,
    processed: &'a [Slot],
    completed_ops: &'a [usize],
    progress: &'a [Size],
}

impl RunHistory<'_> {
    pub fn processed_at(&self, t: Time) -> Option<JobId> {
        self.processed.get(t as usize).copied().flatten().map(unpack)
    }

    /// Number of fully completed operations of `job`.
    pub fn completed_ops(&self, job: JobId) -> usize {
        self.completed_ops[job]
    }

    /// Cumulative processing received by `job`.
    pub fn progress(&self, job: JobId) -> Size {
        self.progress[job]
    }
}

/// An adaptive adversary: fixed release dates and operation counts, with
/// operation sizes chosen at the moment each operation becomes active.
pub trait AdversaryHook {
    /// `(release, op_count)` per job; job ids are list positions. Must be
    /// sorted by release date.
    fn jobs(&self) -> Vec<(Time, usize)>;
    /// Size of operation `op` of `job`. Called exactly once per operation,
    /// when it becomes active; the returned size is immutable afterwards.
    fn reveal(&mut self, job: JobId, op: usize, history: &RunHistory<'_>) -> Size;
}

/// What drives a simulation: a fixed instance or an adaptive adversary.
pub enum SimSource<'a> {
    Fixed(&'a Instance),
    Adaptive(&'a mut dyn AdversaryHook),
}

/// Per-step context handed to the policy. The completion from the previous
/// slot (if any) and this step's arrivals are already applied to the
/// visible states.
pub struct PolicyCtx<'a> {
    pub time: Time,
    /// Jobs released at `time`, in id order.
    pub arrivals: &'a [JobId],
    /// Job whose last operation finished at `time` (it is no longer active).
    pub completed: Option<JobId>,
    /// Job whose active operation changed at `time`, with the new index.
    pub advanced: Option<(JobId, usize)>,
    active: &'a [JobId],
    runs: &'a [JobRun],
    progress: &'a [Size],
    totals: Option<&'a [Size]>,
}

impl PolicyCtx<'_> {
    /// Active jobs at this time, sorted by id.
    pub fn active(&self) -> &[JobId] {
        self.active
    }

    pub fn job(&self, id: JobId) -> VisibleJobState<'_> {
        let run = &self.runs[id];
        VisibleJobState {
            id,
            release: run.release,
            active_op: run.active_op,
            active_remaining: run.active_rem,
            completed_ops: &run.revealed[..run.active_op],
        }
    }

    /// True remaining total size of `id` — the privileged oracle channel for
    /// clairvoyant policies. `None` unless the policy declared clairvoyance.
    pub fn remaining_total(&self, id: JobId) -> Option<Size> {
        self.totals.map(|totals| totals[id] - self.progress[id])
    }
}

pub trait Policy {
    fn name(&self) -> &'static str;
    /// Clairvoyant policies receive true remaining totals via the oracle
    /// channel; they can only run against fixed instances.
    fn clairvoyant(&self) -> bool {
        false
    }
    /// Observe the step context and name an active job, or idle.
    fn choose(&mut self, ctx: &PolicyCtx<'_>) -> Result<Option<JobId>, PolicyError>;
}

type Slot = Option<NonZeroU32>;

fn pack(job: JobId) -> Slot {
    NonZeroU32::new(job as u32 + 1)
}

fn unpack(s: NonZeroU32) -> JobId {
    s.get() as usize - 1
}

struct JobRun {
    release: Time,
    op_count: usize,
    revealed: Vec<Size>,
    active_op: usize,
    active_rem: Size,
}

/// Per-timestep record of one policy run, plus the realized instance and
/// per-job outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub realized: Instance,
    pub completions: Vec<Time>,
    pub flows: Vec<Time>,
    pub total_flow: u64,
    processed: Vec<Slot>,
    slots_of: Vec<Vec<u32>>,
    active_counts: Vec<u32>,
}

impl Trace {
    /// One past the last slot (= latest completion time).
    pub fn horizon(&self) -> Time {
        self.processed.len() as Time
    }

    pub fn job_count(&self) -> usize {
        self.realized.jobs.len()
    }

    pub fn processed_at(&self, t: Time) -> Option<JobId> {
        self.processed.get(t as usize).copied().flatten().map(unpack)
    }

    /// |J(t)|: number of active jobs at time t.
    pub fn active_count(&self, t: Time) -> usize {
        self.active_counts.get(t as usize).map_or(0, |&c| c as usize)
    }

    pub fn is_active(&self, job: JobId, t: Time) -> bool {
        self.realized.jobs[job].release <= t && t < self.completions[job]
    }

    pub fn active_jobs(&self, t: Time) -> impl Iterator<Item = JobId> + '_ {
        (0..self.job_count()).filter(move |&j| self.is_active(j, t))
    }

    /// y_j(t): cumulative processing of `job` before time t.
    pub fn progress(&self, job: JobId, t: Time) -> Size {
        let slots = &self.slots_of[job];
        slots.partition_point(|&s| (s as Time) < t) as Size
    }

    /// Slot starts at which `job` was processed, in order; entry i is the
    /// slot in which the job's cumulative progress went from i to i+1.
    pub fn processing_slots(&self, job: JobId) -> &[u32] {
        &self.slots_of[job]
    }

    /// Earliest maximizer of |J(t)| — the default certification point.
    pub fn busiest_time(&self) -> Time {
        let mut best_t = 0;
        let mut best = 0;
        for (t, &c) in self.active_counts.iter().enumerate() {
            if c > best {
                best = c;
                best_t = t;
            }
        }
        best_t as Time
    }
}

/// Run `policy` against `source` until all jobs complete.
///
/// `guard` bounds the final horizon; it is mandatory for adaptive sources
/// and defaults to `max release + total volume + 1` for fixed instances.
pub fn simulate(
    source: SimSource<'_>,
    policy: &mut dyn Policy,
    guard: Option<Time>,
) -> Result<Trace, SimError> {
    match source {
        SimSource::Fixed(instance) => {
            instance.validate()?;
            let default_guard = instance.max_release() + instance.total_volume() + 1;
            let mut revealer = FixedRevealer { instance };
            // The oracle channel opens only for policies that declare
            // clairvoyance; everyone else sees active operations only.
            let totals = policy
                .clairvoyant()
                .then(|| instance.jobs.iter().map(Job::total_size).collect());
            run_engine(
                instance
                    .jobs
                    .iter()
                    .map(|j| (j.release, j.ops.len()))
                    .collect(),
                &mut revealer,
                policy,
                guard.unwrap_or(default_guard),
                totals,
            )
        }
        SimSource::Adaptive(hook) => {
            if policy.clairvoyant() {
                return Err(SimError::OracleUnavailable);
            }
            let guard = guard.ok_or(SimError::MissingGuard)?;
            let jobs = hook.jobs();
            let mut revealer = AdaptiveRevealer { hook };
            run_engine(jobs, &mut revealer, policy, guard, None)
        }
    }
}

trait Revealer {
    fn reveal(&mut self, job: JobId, op: usize, history: &RunHistory<'_>) -> Size;
}

struct FixedRevealer<'a> {
    instance: &'a Instance,
}

impl Revealer for FixedRevealer<'_> {
    fn reveal(&mut self, job: JobId, op: usize, _history: &RunHistory<'_>) -> Size {
        self.instance.jobs[job].ops[op]
    }
}

struct AdaptiveRevealer<'a, 'b> {
    hook: &'a mut (dyn AdversaryHook + 'b),
}

impl Revealer for AdaptiveRevealer<'_, '_> {
    fn reveal(&mut self, job: JobId, op: usize, history: &RunHistory<'_>) -> Size {
        self.hook.reveal(job, op, history)
    }
}

fn run_engine(
    jobs: Vec<(Time, usize)>,
    revealer: &mut dyn Revealer,
    policy: &mut dyn Policy,
    guard: Time,
    totals: Option<Vec<Size>>,
) -> Result<Trace, SimError> {
    let n = jobs.len();
    let mut runs: Vec<JobRun> = jobs
        .iter()
        .map(|&(release, op_count)| JobRun {
            release,
            op_count,
            revealed: Vec::new(),
            active_op: 0,
            active_rem: 0,
        })
        .collect();
    let mut active: Vec<JobId> = Vec::new();
    let mut completed_ops: Vec<usize> = vec![0; n];
    let mut progress: Vec<Size> = vec![0; n];

    // Arrival order: release date, ties by id.
    let mut order: Vec<JobId> = (0..n).collect();
    order.sort_by_key(|&j| jobs[j].0);
    let mut next_arrival = 0usize;

    let mut processed: Vec<Slot> = Vec::new();
    let mut slots_of: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut completions: Vec<Time> = vec![0; n];

    let mut t: Time = 0;
    let mut finishing: Option<JobId> = None;
    let mut pending_completed: Option<JobId> = None;
    let mut arrivals_buf: Vec<JobId> = Vec::new();

    loop {
        // Phase 1: apply the completion from slot [t-1, t]; completed
        // operations reveal successors, zero-size ones cascade instantly.
        let mut advanced: Option<(JobId, usize)> = None;
        if let Some(j) = finishing.take() {
            completed_ops[j] += 1;
            loop {
                let next_op = runs[j].revealed.len();
                if next_op >= runs[j].op_count {
                    completions[j] = t;
                    let pos = active.binary_search(&j).expect("finishing job is active");
                    active.remove(pos);
                    pending_completed = Some(j);
                    break;
                }
                let s = {
                    let history = RunHistory {
                        time: t,
                        processed: &processed,
                        completed_ops: &completed_ops,
                        progress: &progress,
                    };
                    revealer.reveal(j, next_op, &history)
                };
                let run = &mut runs[j];
                run.revealed.push(s);
                run.active_op = next_op;
                run.active_rem = s;
                if s == 0 {
                    completed_ops[j] += 1;
                    continue;
                }
                advanced = Some((j, next_op));
                break;
            }
        }

        // Phase 2: arrivals at t reveal their first operation (cascading
        // over leading zero-size operations).
        arrivals_buf.clear();
        while next_arrival < n && jobs[order[next_arrival]].0 == t {
            let j = order[next_arrival];
            next_arrival += 1;
            loop {
                let op = runs[j].revealed.len();
                if op >= runs[j].op_count {
                    return Err(SimError::ZeroJob(j));
                }
                let s = {
                    let history = RunHistory {
                        time: t,
                        processed: &processed,
                        completed_ops: &completed_ops,
                        progress: &progress,
                    };
                    revealer.reveal(j, op, &history)
                };
                let run = &mut runs[j];
                run.revealed.push(s);
                run.active_op = op;
                run.active_rem = s;
                if s == 0 {
                    completed_ops[j] += 1;
                    continue;
                }
                break;
            }
            let pos = active.binary_search(&j).unwrap_err();
            active.insert(pos, j);
            arrivals_buf.push(j);
        }
        arrivals_buf.sort_unstable();

        // Termination / idle fast-forward to the next arrival.
        if active.is_empty() {
            if next_arrival >= n {
                break;
            }
            let next_t = jobs[order[next_arrival]].0;
            if next_t > guard || next_t >= u32::MAX as Time {
                return Err(SimError::HorizonExceeded { guard, time: next_t });
            }
            processed.resize(next_t as usize, None);
            t = next_t;
            continue;
        }

        // Phase 3: the policy observes and names a job (or idles).
        let ctx = PolicyCtx {
            time: t,
            arrivals: &arrivals_buf,
            completed: pending_completed.take(),
            advanced,
            active: &active,
            runs: &runs,
            progress: &progress,
            totals: totals.as_deref(),
        };
        let choice = policy
            .choose(&ctx)
            .map_err(|e| SimError::Policy { time: t, message: e.0 })?;

        // Phase 4: one unit of processing in [t, t+1].
        match choice {
            Some(j) => {
                if active.binary_search(&j).is_err() {
                    return Err(SimError::NonActiveJob { job: j, time: t });
                }
                let run = &mut runs[j];
                run.active_rem -= 1;
                progress[j] += 1;
                processed.push(pack(j));
                slots_of[j].push(t as u32);
                if run.active_rem == 0 {
                    finishing = Some(j);
                }
            }
            None => processed.push(None),
        }

        t += 1;
        if t > guard || t >= u32::MAX as Time {
            return Err(SimError::HorizonExceeded { guard, time: t });
        }
    }

    let realized = Instance::new(
        runs.iter()
            .map(|run| Job::new(run.release, run.revealed.clone()))
            .collect(),
    );
    let horizon = processed.len();
    let mut events = vec![0i64; horizon + 1];
    let mut flows = vec![0; n];
    let mut total_flow: u64 = 0;
    for j in 0..n {
        flows[j] = completions[j] - realized.jobs[j].release;
        total_flow += flows[j];
        events[realized.jobs[j].release as usize] += 1;
        events[completions[j] as usize] -= 1;
    }
    let mut active_counts = vec![0u32; horizon];
    let mut acc = 0i64;
    for (slot, count) in active_counts.iter_mut().enumerate() {
        acc += events[slot];
        *count = acc as u32;
    }

    Ok(Trace {
        realized,
        completions,
        flows,
        total_flow,
        processed,
        slots_of,
        active_counts,
    })
}

/// Per-timestep active-count comparison of two runs over the same realized
/// instance.
#[derive(Debug, Clone, Serialize)]
pub struct LocalCounts {
    /// `(t, |J_A(t)|, |J_B(t)|)` for every t up to the later horizon.
    pub rows: Vec<(Time, usize, usize)>,
}

impl LocalCounts {
    /// Ratio |J_A(t)| / |J_B(t)|, reported as 1 when both counts are 0.
    pub fn ratio_at(&self, idx: usize) -> f64 {
        let (_, a, b) = self.rows[idx];
        if a == 0 && b == 0 {
            1.0
        } else {
            a as f64 / b as f64
        }
    }

    /// Maximum ratio and its earliest time.
    pub fn max_ratio(&self) -> (Time, f64) {
        let mut best = (0, f64::MIN);
        for (idx, row) in self.rows.iter().enumerate() {
            let r = self.ratio_at(idx);
            if r > best.1 {
                best = (row.0, r);
            }
        }
        if self.rows.is_empty() {
            (0, 1.0)
        } else {
            best
        }
    }
}

/// Pairs up |J_A(t)| and |J_B(t)| over a shared realized instance. `b` is
/// expected to be a work-conserving baseline, so it can never be empty while
/// `a` still holds jobs.
pub fn local_counts(a: &Trace, b: &Trace) -> Result<LocalCounts, SimError> {
    if a.realized != b.realized {
        return Err(SimError::MismatchedInstances);
    }
    let horizon = a.horizon().max(b.horizon());
    let mut rows = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let ca = a.active_count(t);
        let cb = b.active_count(t);
        if cb == 0 && ca > 0 {
            return Err(SimError::BaselineIdle { time: t });
        }
        rows.push((t, ca, cb));
    }
    Ok(LocalCounts { rows })
}

/// Trace CSV with the baseline's active counts alongside: one row per slot.
pub fn trace_csv(alg: &Trace, opt: &Trace) -> String {
    let horizon = alg.horizon().max(opt.horizon());
    let mut out = String::from("t,processed_job,alg_active,opt_active\n");
    for t in 0..horizon {
        let processed = alg
            .processed_at(t)
            .map_or_else(|| "-".to_string(), |j| j.to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            t,
            processed,
            alg.active_count(t),
            opt.active_count(t)
        ));
    }
    out
}

/// JSON run summary: total flow, per-job flows, and the realized instance.
#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub total_flow: u64,
    pub flows: &'a [Time],
    pub realized_instance: &'a Instance,
}

pub fn summary_json(trace: &Trace) -> String {
    let summary = RunSummary {
        total_flow: trace.total_flow,
        flows: &trace.flows,
        realized_instance: &trace.realized,
    };
    serde_json::to_string_pretty(&summary).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Job;
    use crate::policies::{ChunkPolicy, OpsSrptPolicy, SrptPolicy};
    use proptest::prelude::*;

    /// Records everything it can observe, then processes the smallest job id.
    #[derive(Default)]
    struct ProbePolicy {
        observations: Vec<(Time, Vec<(JobId, usize, Size, Vec<Size>)>)>,
    }

    impl Policy for ProbePolicy {
        fn name(&self) -> &'static str {
            "probe"
        }

        fn choose(&mut self, ctx: &PolicyCtx<'_>) -> Result<Option<JobId>, PolicyError> {
            let snapshot = ctx
                .active()
                .iter()
                .map(|&j| {
                    let s = ctx.job(j);
                    (j, s.active_op, s.active_remaining, s.completed_ops.to_vec())
                })
                .collect();
            self.observations.push((ctx.time, snapshot));
            // The oracle stays closed for non-clairvoyant policies.
            assert!(ctx.remaining_total(ctx.active()[0]).is_none());
            Ok(ctx.active().first().copied())
        }
    }

    fn fixed(instance: &Instance, policy: &mut dyn Policy) -> Trace {
        simulate(SimSource::Fixed(instance), policy, None).unwrap()
    }

    #[test]
    fn single_job_flow_equals_size() {
        let inst = Instance::new(vec![Job::new(0, vec![5])]);
        for policy in [
            &mut OpsSrptPolicy as &mut dyn Policy,
            &mut ChunkPolicy::new(),
            &mut SrptPolicy,
        ] {
            let trace = fixed(&inst, policy);
            assert_eq!(trace.total_flow, 5);
            assert_eq!(trace.flows, vec![5]);
            assert_eq!(trace.realized, inst);
        }
    }

    #[test]
    fn empty_instance_yields_empty_trace() {
        let inst = Instance::new(vec![]);
        let trace = fixed(&inst, &mut OpsSrptPolicy);
        assert_eq!(trace.total_flow, 0);
        assert_eq!(trace.horizon(), 0);
    }

    #[test]
    fn zero_operations_cascade_at_completion() {
        let inst = Instance::new(vec![Job::new(0, vec![1, 0, 0, 2])]);
        let mut probe = ProbePolicy::default();
        let trace = fixed(&inst, &mut probe);
        assert_eq!(trace.completions, vec![3]);
        // At t=1 the first operation and both zero ops are done; the
        // size-2 operation is already active.
        let (t, snapshot) = &probe.observations[1];
        assert_eq!(*t, 1);
        assert_eq!(snapshot[0].1, 3);
        assert_eq!(snapshot[0].2, 2);
        assert_eq!(snapshot[0].3, vec![1, 0, 0]);
    }

    #[test]
    fn zero_operations_cascade_at_arrival() {
        let inst = Instance::new(vec![Job::new(2, vec![0, 0, 3])]);
        let mut probe = ProbePolicy::default();
        let trace = fixed(&inst, &mut probe);
        assert_eq!(trace.flows, vec![3]);
        let (t, snapshot) = &probe.observations[0];
        assert_eq!(*t, 2);
        assert_eq!((snapshot[0].1, snapshot[0].2), (2, 3));
        assert_eq!(snapshot[0].3, vec![0, 0]);
    }

    #[test]
    fn policies_cannot_see_beyond_the_active_operation() {
        // The two instances differ only in the second operation, which
        // becomes active at t=2; observations must agree before that.
        let a = Instance::new(vec![Job::new(0, vec![2, 5]), Job::new(1, vec![3])]);
        let b = Instance::new(vec![Job::new(0, vec![2, 7]), Job::new(1, vec![3])]);
        let mut probe_a = ProbePolicy::default();
        let mut probe_b = ProbePolicy::default();
        fixed(&a, &mut probe_a);
        fixed(&b, &mut probe_b);
        assert_eq!(probe_a.observations[0], probe_b.observations[0]);
        assert_eq!(probe_a.observations[1], probe_b.observations[1]);
        assert_ne!(probe_a.observations[2], probe_b.observations[2]);
    }

    #[test]
    fn naming_a_non_active_job_is_an_error() {
        struct Rogue;
        impl Policy for Rogue {
            fn name(&self) -> &'static str {
                "rogue"
            }
            fn choose(&mut self, ctx: &PolicyCtx<'_>) -> Result<Option<JobId>, PolicyError> {
                Ok(Some(ctx.active().len() + 7))
            }
        }
        let inst = Instance::new(vec![Job::new(0, vec![2])]);
        let err = simulate(SimSource::Fixed(&inst), &mut Rogue, None).unwrap_err();
        assert!(matches!(err, SimError::NonActiveJob { .. }));
    }

    #[test]
    fn perpetual_idling_trips_the_horizon_guard() {
        struct Lazy;
        impl Policy for Lazy {
            fn name(&self) -> &'static str {
                "lazy"
            }
            fn choose(&mut self, _ctx: &PolicyCtx<'_>) -> Result<Option<JobId>, PolicyError> {
                Ok(None)
            }
        }
        let inst = Instance::new(vec![Job::new(0, vec![2])]);
        let err = simulate(SimSource::Fixed(&inst), &mut Lazy, None).unwrap_err();
        assert!(matches!(err, SimError::HorizonExceeded { .. }));
    }

    #[test]
    fn clairvoyant_policy_rejected_on_adaptive_source() {
        struct NullAdversary;
        impl AdversaryHook for NullAdversary {
            fn jobs(&self) -> Vec<(Time, usize)> {
                vec![(0, 1)]
            }
            fn reveal(&mut self, _: JobId, _: usize, _: &RunHistory<'_>) -> Size {
                1
            }
        }
        let err = simulate(
            SimSource::Adaptive(&mut NullAdversary),
            &mut SrptPolicy,
            Some(100),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::OracleUnavailable));
    }

    #[test]
    fn local_counts_of_identical_traces() {
        let inst = Instance::new(vec![Job::new(0, vec![3]), Job::new(2, vec![2])]);
        let a = fixed(&inst, &mut OpsSrptPolicy);
        let b = fixed(&inst, &mut OpsSrptPolicy);
        let counts = local_counts(&a, &b).unwrap();
        for idx in 0..counts.rows.len() {
            assert_eq!(counts.ratio_at(idx), 1.0);
        }
    }

    #[test]
    fn local_counts_rejects_mismatched_instances() {
        let a = fixed(&Instance::new(vec![Job::new(0, vec![3])]), &mut OpsSrptPolicy);
        let b = fixed(&Instance::new(vec![Job::new(0, vec![4])]), &mut OpsSrptPolicy);
        assert!(matches!(local_counts(&a, &b), Err(SimError::MismatchedInstances)));
    }

    #[test]
    fn trace_csv_and_summary_shape() {
        let inst = Instance::new(vec![Job::new(0, vec![2]), Job::new(1, vec![1])]);
        let alg = fixed(&inst, &mut OpsSrptPolicy);
        let opt = fixed(&inst, &mut SrptPolicy);
        let csv = trace_csv(&alg, &opt);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,processed_job,alg_active,opt_active"));
        assert_eq!(csv.lines().count() as u64, 1 + alg.horizon().max(opt.horizon()));
        let summary: serde_json::Value = serde_json::from_str(&summary_json(&alg)).unwrap();
        assert_eq!(summary["total_flow"], 4);
        assert_eq!(summary["realized_instance"]["jobs"][1]["release"], 1);
    }

    fn small_instance_strategy() -> impl Strategy<Value = Instance> {
        let job = (0u64..12, prop::collection::vec(0u64..5, 1..4))
            .prop_filter("positive total", |(_, ops)| ops.iter().any(|&p| p > 0))
            .prop_map(|(release, ops)| Job::new(release, ops));
        prop::collection::vec(job, 1..6).prop_map(Instance::new)
    }

    proptest! {
        #[test]
        fn conservation_and_flow_identities(inst in small_instance_strategy()) {
            for policy in [&mut OpsSrptPolicy as &mut dyn Policy, &mut ChunkPolicy::new()] {
                let trace = fixed(&inst, policy);
                let horizon = trace.horizon();
                // Processing conservation: per-job progress sums to the
                // number of non-idle slots, at every prefix.
                for t in [horizon / 2, horizon] {
                    let busy = (0..t).filter(|&s| trace.processed_at(s).is_some()).count() as u64;
                    let progressed: u64 = (0..inst.jobs.len()).map(|j| trace.progress(j, t)).sum();
                    prop_assert_eq!(busy, progressed);
                }
                // Flow of a job is at least its size; the flow sum equals
                // the active-count integral.
                for (j, job) in inst.jobs.iter().enumerate() {
                    prop_assert!(trace.flows[j] >= job.total_size());
                }
                let count_integral: u64 = (0..horizon).map(|t| trace.active_count(t) as u64).sum();
                prop_assert_eq!(count_integral, trace.total_flow);
                prop_assert_eq!(&trace.realized, &inst);
            }
        }

        #[test]
        fn replays_are_bit_identical(inst in small_instance_strategy()) {
            let a = fixed(&inst, &mut ChunkPolicy::new());
            let b = fixed(&inst, &mut ChunkPolicy::new());
            prop_assert_eq!(a, b);
            let a = fixed(&inst, &mut SrptPolicy);
            let b = fixed(&inst, &mut SrptPolicy);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn srpt_count_is_pointwise_minimal(inst in small_instance_strategy()) {
            let srpt = fixed(&inst, &mut SrptPolicy);
            for policy in [&mut OpsSrptPolicy as &mut dyn Policy, &mut ChunkPolicy::new()] {
                let other = fixed(&inst, policy);
                for t in 0..other.horizon().max(srpt.horizon()) {
                    prop_assert!(srpt.active_count(t) <= other.active_count(t));
                }
            }
        }
    }
}

