//! Seeded random instance families and the adversarial lower-bound
//! constructions. All generators are bit-deterministic in their seed and
//! emit jobs sorted by release date (ties by position).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{class_of, Instance, Job, JobId, Size, Time};
use crate::sim::{AdversaryHook, RunHistory};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("k_star {0} exceeds the size budget (max {MAX_K_STAR})")]
    BudgetExceeded(u32),
    #[error("parameter {0} must be at least {1}")]
    TooSmall(&'static str, u64),
    #[error("empty range for parameter {0}")]
    EmptyRange(&'static str),
    #[error("family {0} is adaptive and does not emit a fixed instance")]
    AdaptiveFamily(&'static str),
}

/// Reproducible description of a generated instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GenSpec {
    /// Jobs with non-decreasing operation sizes.
    Monotone { n: usize, m: usize, max_size: Size, seed: u64 },
    /// Two-operation jobs with a common first-operation size.
    UniformTests { n: usize, p: Size, max_size: Size, seed: u64 },
    /// Geometric job sizes split into unit operations.
    RandomizedLb { m: usize, seed: u64 },
    /// Deterministic escalation instance against Operations-SRPT.
    OpsSrptLognLb { k_star: u32 },
    /// Unconstrained fuzzing family with log-uniform sizes.
    General {
        n: usize,
        m_min: usize,
        m_max: usize,
        size_min: Size,
        size_max: Size,
        seed: u64,
    },
    /// Adaptive adversary that punishes running jobs to completion.
    DetLb { n: usize, m: usize },
}

impl GenSpec {
    pub fn generate(&self) -> Result<Instance, GenError> {
        match *self {
            GenSpec::Monotone { n, m, max_size, seed } => gen_monotone(n, m, max_size, seed),
            GenSpec::UniformTests { n, p, max_size, seed } => gen_uniform_tests(n, p, max_size, seed),
            GenSpec::RandomizedLb { m, seed } => gen_randomized_lb(m, seed),
            GenSpec::OpsSrptLognLb { k_star } => Ok(gen_opsrpt_logn_lb(k_star)?.instance),
            GenSpec::General { n, m_min, m_max, size_min, size_max, seed } => {
                gen_general(n, m_min..=m_max, size_min..=size_max, seed)
            }
            GenSpec::DetLb { .. } => Err(GenError::AdaptiveFamily("det-lb")),
        }
    }
}

fn sort_by_release(mut jobs: Vec<Job>) -> Vec<Job> {
    jobs.sort_by_key(|j| j.release);
    jobs
}

/// Jobs whose operation sizes are sorted ascending: uniform samples in
/// `[1, max_size]`, releases over a horizon matching the expected volume.
pub fn gen_monotone(n: usize, m: usize, max_size: Size, seed: u64) -> Result<Instance, GenError> {
    if n < 1 {
        return Err(GenError::TooSmall("n", 1));
    }
    if m < 1 {
        return Err(GenError::TooSmall("m", 1));
    }
    if max_size < 1 {
        return Err(GenError::TooSmall("max_size", 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = (n as u64) * (m as u64) * (max_size + 1) / 2;
    let jobs = (0..n)
        .map(|_| {
            let mut ops: Vec<Size> = (0..m).map(|_| rng.gen_range(1..=max_size)).collect();
            ops.sort_unstable();
            let release = rng.gen_range(0..=horizon);
            Job::new(release, ops)
        })
        .collect();
    Ok(Instance::new(sort_by_release(jobs)))
}

/// Two-operation jobs with a mandatory first operation of common size `p`
/// and a payload second operation uniform in `[0, max_size]`.
pub fn gen_uniform_tests(n: usize, p: Size, max_size: Size, seed: u64) -> Result<Instance, GenError> {
    if n < 1 {
        return Err(GenError::TooSmall("n", 1));
    }
    if p < 1 {
        return Err(GenError::TooSmall("p", 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = ((n as u64) * (p + max_size / 2)).max(1);
    let jobs = (0..n)
        .map(|_| {
            let payload = rng.gen_range(0..=max_size);
            let release = rng.gen_range(0..=horizon);
            Job::new(release, vec![p, payload])
        })
        .collect();
    Ok(Instance::new(sort_by_release(jobs)))
}

/// Adaptive adversary: `N(m+1)` jobs at time 0, every operation revealed as
/// size 1 until the running policy has completed the (m-1)-th operation of
/// `N` distinct jobs; all operations still hidden at that point reveal as 0.
#[derive(Debug)]
pub struct DetLbAdversary {
    n_trigger: usize,
    m: usize,
    job_count: usize,
    near_complete: usize,
}

impl DetLbAdversary {
    pub fn new(n: usize, m: usize) -> Result<Self, GenError> {
        if n < 1 {
            return Err(GenError::TooSmall("N", 1));
        }
        if m < 2 {
            return Err(GenError::TooSmall("m", 2));
        }
        Ok(DetLbAdversary { n_trigger: n, m, job_count: n * (m + 1), near_complete: 0 })
    }

    /// Horizon guard covering the worst case of all sizes being 1.
    pub fn guard(&self) -> Time {
        (self.job_count * self.m) as Time + 1
    }

    fn triggered(&self) -> bool {
        self.near_complete >= self.n_trigger
    }
}

impl AdversaryHook for DetLbAdversary {
    fn jobs(&self) -> Vec<(Time, usize)> {
        vec![(0, self.m); self.job_count]
    }

    fn reveal(&mut self, _job: JobId, op: usize, _history: &RunHistory<'_>) -> Size {
        if op == self.m - 1 {
            // Revealing the last operation means the job just completed its
            // (m-1)-th; the first N such jobs get a real final operation.
            self.near_complete += 1;
            if self.near_complete <= self.n_trigger {
                1
            } else {
                0
            }
        } else if self.triggered() {
            0
        } else {
            1
        }
    }
}

/// Operation split of a total size `p` over `m` positions: unit operations
/// up front, a zero-padded middle, and the overflow on the last position.
pub fn split_geometric_ops(p: Size, m: usize) -> Vec<Size> {
    let mut ops = vec![0; m];
    for (i, op) in ops.iter_mut().take(m - 1).enumerate() {
        *op = if (i as Size) < p { 1 } else { 0 };
    }
    ops[m - 1] = p.saturating_sub(m as Size - 1);
    ops
}

/// Geometric size with mean 2 from one 64-bit uniform draw (inverse CDF,
/// no rejection): Pr[P = p] = 2^-p.
fn geometric_from_u64(raw: u64) -> Size {
    raw.leading_zeros() as Size + 1
}

/// `floor(2^(m/2))` jobs at time 0 with independently geometric total sizes
/// (mean 2), split into operations by [`split_geometric_ops`].
pub fn gen_randomized_lb(m: usize, seed: u64) -> Result<Instance, GenError> {
    if m < 4 {
        return Err(GenError::TooSmall("m", 4));
    }
    let n = randomized_lb_job_count(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs = (0..n)
        .map(|_| {
            let p = geometric_from_u64(rng.gen::<u64>());
            Job::new(0, split_geometric_ops(p, m))
        })
        .collect();
    Ok(Instance::new(jobs))
}

/// `n = floor(2^(m/2))`, exactly (integer square root, no floating point).
pub fn randomized_lb_job_count(m: usize) -> usize {
    ((1u128 << m).isqrt()) as usize
}

/// The evaluation time `floor(2(n - n^(3/4)))` used by the randomized
/// lower-bound experiment, computed exactly in integers.
pub fn randomized_lb_eval_time(m: usize) -> Time {
    let n = randomized_lb_job_count(m) as u128;
    // 2 n^(3/4) = (16 n^3)^(1/4); nested integer square roots give its floor.
    let s = 16 * n * n * n;
    let q = s.isqrt().isqrt();
    let exact = q * q * q * q == s;
    (2 * n - q - if exact { 0 } else { 1 }) as Time
}

pub const MAX_K_STAR: u32 = 10;

/// The escalation instance, fully scaled to integers, plus the quantities a
/// caller needs to evaluate it.
#[derive(Debug, Clone)]
pub struct LognLbInstance {
    pub instance: Instance,
    /// One paper-scale time unit in scaled units.
    pub scale: u64,
    /// Scaled slack constant (even, so half-slacks stay integral).
    pub epsilon: u64,
    /// Scaled base size M.
    pub big_m: u64,
    /// Scaled evaluation time: Operations-SRPT holds `k_star + 1` active
    /// jobs here while SRPT holds one.
    pub t_hat: Time,
}

/// Deterministic instance forcing Operations-SRPT into an escalating queue:
/// a time-0 pair leaves one nearly-finished two-stage job behind, then
/// `k_star - 1` rounds release a pair (a, b) that halves the critical size
/// while the baseline completes both exactly; a tail of uniform jobs pins
/// the gap. All sizes and releases are integral at scale `2^(k_star+3)`.
pub fn gen_opsrpt_logn_lb(k_star: u32) -> Result<LognLbInstance, GenError> {
    if k_star < 1 {
        return Err(GenError::TooSmall("k_star", 1));
    }
    if k_star > MAX_K_STAR {
        return Err(GenError::BudgetExceeded(k_star));
    }
    let scale: u64 = 1 << (k_star + 3);
    let epsilon: u64 = 2;
    let big_m: u64 = scale << k_star;

    let mut jobs = Vec::new();
    // Time-0 pair: the survivor and the decoy the baseline finishes first.
    jobs.push(Job::new(0, vec![big_m - 1, big_m - 1]));
    jobs.push(Job::new(0, vec![big_m, 0]));

    let mut t: Time = big_m;
    for round in 0..k_star.saturating_sub(1) {
        let step = big_m >> round;
        jobs.push(Job::new(t, vec![step - 1, step / 2 - 1]));
        jobs.push(Job::new(t + step + step / 2 - 2, vec![step / 2, 0]));
        t += 2 * step - 2;
    }
    let t_hat = t;

    // Uniform tail: one scaled unit job per scaled unit of time.
    for i in 0..=(1u64 << k_star) {
        jobs.push(Job::new(t_hat + scale - 2 + i * scale, vec![scale, 0]));
    }

    Ok(LognLbInstance {
        instance: Instance::new(jobs),
        scale,
        epsilon,
        big_m,
        t_hat,
    })
}

/// Unconstrained fuzzing family: per-job operation counts uniform in
/// `m_range`, sizes log-uniform over `size_range` with occasional zero-size
/// operations, releases over a horizon equal to the realized volume.
pub fn gen_general(
    n: usize,
    m_range: std::ops::RangeInclusive<usize>,
    size_range: std::ops::RangeInclusive<Size>,
    seed: u64,
) -> Result<Instance, GenError> {
    if n < 1 {
        return Err(GenError::TooSmall("n", 1));
    }
    if m_range.is_empty() {
        return Err(GenError::EmptyRange("m"));
    }
    let lo = (*size_range.start()).max(1);
    let hi = *size_range.end();
    if size_range.is_empty() || hi < lo {
        return Err(GenError::EmptyRange("size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_lo = class_of(lo);
    let class_hi = class_of(hi);
    let log_uniform = |rng: &mut ChaCha8Rng| -> Size {
        let class = rng.gen_range(class_lo..=class_hi);
        let base = (1u64 << class).max(lo);
        let top = hi.min((1u64 << (class + 1)) - 1);
        rng.gen_range(base..=top)
    };
    let mut jobs: Vec<Job> = (0..n)
        .map(|_| {
            let m = rng.gen_range(m_range.clone());
            let mut ops: Vec<Size> = (0..m)
                .map(|_| {
                    if rng.gen_range(0..16) == 0 {
                        0
                    } else {
                        log_uniform(&mut rng)
                    }
                })
                .collect();
            if ops.iter().all(|&p| p == 0) {
                ops[0] = log_uniform(&mut rng);
            }
            Job::new(0, ops)
        })
        .collect();
    let volume: u64 = jobs.iter().map(Job::total_size).sum();
    for job in &mut jobs {
        job.release = rng.gen_range(0..=volume.max(1));
    }
    Ok(Instance::new(sort_by_release(jobs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::instance_params;
    use crate::policies::{OpsSrptPolicy, SrptPolicy};
    use crate::sim::{local_counts, simulate, SimSource};

    #[test]
    fn monotone_jobs_are_sorted() {
        let inst = gen_monotone(8, 4, 9, 7).unwrap();
        assert_eq!(inst.jobs.len(), 8);
        for job in &inst.jobs {
            assert!(job.ops.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(job.ops.len(), 4);
        }
        assert!(inst.jobs.windows(2).all(|w| w[0].release <= w[1].release));
        inst.validate().unwrap();
        // Identical seed, identical output.
        assert_eq!(inst, gen_monotone(8, 4, 9, 7).unwrap());
        assert_ne!(inst, gen_monotone(8, 4, 9, 8).unwrap());
    }

    #[test]
    fn uniform_tests_share_first_op() {
        let inst = gen_uniform_tests(12, 3, 10, 99).unwrap();
        for job in &inst.jobs {
            assert_eq!(job.ops.len(), 2);
            assert_eq!(job.ops[0], 3);
        }
        let params = instance_params(&inst);
        assert!(params.m1 <= 2);
        assert!(params.m2 <= 2);
    }

    #[test]
    fn det_lb_realized_sizes() {
        let mut adv = DetLbAdversary::new(3, 3).unwrap();
        let guard = adv.guard();
        let trace = simulate(SimSource::Adaptive(&mut adv), &mut OpsSrptPolicy, Some(guard)).unwrap();
        let realized = &trace.realized;
        assert_eq!(realized.jobs.len(), 12);
        let mut full_size = 0;
        for job in &realized.jobs {
            assert!(job.ops.iter().all(|&p| p <= 1));
            let total = job.total_size();
            assert!((1..=3).contains(&total));
            if total == 3 {
                full_size += 1;
            }
        }
        assert_eq!(full_size, 3);
    }

    #[test]
    fn det_lb_small_scale_counts() {
        // N=2, m=2: six jobs; at some point the policy holds mN = 4 jobs
        // while SRPT on the realized instance holds at most N = 2.
        let mut adv = DetLbAdversary::new(2, 2).unwrap();
        let guard = adv.guard();
        let alg = simulate(SimSource::Adaptive(&mut adv), &mut OpsSrptPolicy, Some(guard)).unwrap();
        let opt = simulate(SimSource::Fixed(&alg.realized), &mut SrptPolicy, None).unwrap();
        let counts = local_counts(&alg, &opt).unwrap();
        assert!(counts
            .rows
            .iter()
            .any(|&(_, a, b)| a == 4 && b <= 2));
    }

    #[test]
    fn geometric_split_rule() {
        assert_eq!(split_geometric_ops(3, 6), vec![1, 1, 1, 0, 0, 0]);
        assert_eq!(split_geometric_ops(8, 6), vec![1, 1, 1, 1, 1, 3]);
        assert_eq!(split_geometric_ops(1, 4), vec![1, 0, 0, 0]);
        assert_eq!(split_geometric_ops(4, 4), vec![1, 1, 1, 1]);
        // The split always preserves the total.
        for p in 1..40u64 {
            for m in 4..12usize {
                assert_eq!(split_geometric_ops(p, m).iter().sum::<u64>(), p);
            }
        }
    }

    #[test]
    fn randomized_lb_shape() {
        let inst = gen_randomized_lb(8, 5).unwrap();
        assert_eq!(inst.jobs.len(), 16);
        assert!(inst.jobs.iter().all(|j| j.release == 0 && j.ops.len() == 8));
        inst.validate().unwrap();
        assert_eq!(inst, gen_randomized_lb(8, 5).unwrap());
    }

    #[test]
    fn randomized_lb_eval_time_matches_hand_computation() {
        assert_eq!(randomized_lb_job_count(20), 1024);
        // n = 1024: n^(3/4) = 181.02, so t = floor(2 * 842.98) = 1685.
        assert_eq!(randomized_lb_eval_time(20), 1685);
    }

    #[test]
    fn geometric_sampler_mean_is_near_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 100_000;
        let sum: u64 = (0..draws).map(|_| geometric_from_u64(rng.gen())).sum();
        let mean = sum as f64 / draws as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn logn_lb_round_structure() {
        let lb = gen_opsrpt_logn_lb(3).unwrap();
        let s = lb.scale;
        let m = lb.big_m;
        assert_eq!(s, 64);
        assert_eq!(m, 512);
        let jobs = &lb.instance.jobs;
        assert_eq!(jobs[0].ops, vec![m - 1, m - 1]);
        assert_eq!(jobs[1].ops, vec![m, 0]);
        // Round 0 releases at t = M with halving sizes; its partner follows.
        assert_eq!(jobs[2].release, m);
        assert_eq!(jobs[2].ops, vec![m - 1, m / 2 - 1]);
        assert_eq!(jobs[3].release, m + m + m / 2 - 2);
        assert_eq!(jobs[3].ops, vec![m / 2, 0]);
        // Round 1 starts one round-length later.
        assert_eq!(jobs[4].release, m + 2 * m - 2);
        assert_eq!(jobs[4].ops, vec![m / 2 - 1, m / 4 - 1]);
        lb.instance.validate().unwrap();
    }

    #[test]
    fn logn_lb_forces_counts_at_t_hat() {
        for k_star in [1u32, 2, 4] {
            let lb = gen_opsrpt_logn_lb(k_star).unwrap();
            let alg = simulate(SimSource::Fixed(&lb.instance), &mut OpsSrptPolicy, None).unwrap();
            let opt = simulate(SimSource::Fixed(&lb.instance), &mut SrptPolicy, None).unwrap();
            assert_eq!(
                alg.active_count(lb.t_hat),
                k_star as usize + 1,
                "k_star = {k_star}"
            );
            assert_eq!(opt.active_count(lb.t_hat), 1, "k_star = {k_star}");
        }
    }

    #[test]
    fn logn_lb_rejects_oversized_budget() {
        assert!(matches!(
            gen_opsrpt_logn_lb(11),
            Err(GenError::BudgetExceeded(11))
        ));
    }

    #[test]
    fn general_family_is_schema_valid_and_varied() {
        let inst = gen_general(20, 1..=5, 1..=64, 11).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.jobs.len(), 20);
        let params = instance_params(&inst);
        assert!(params.m >= 1 && params.m <= 5);
        // Log-uniform sizes make multi-chunk jobs appear.
        assert!(params.m1 >= 2, "expected multi-chunk jobs, got {params:?}");
        assert_eq!(inst, gen_general(20, 1..=5, 1..=64, 11).unwrap());
    }
}
