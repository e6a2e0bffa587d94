//! Instrumentation: entropy estimators, exact entropies on enumerable
//! worlds, per-run comparison accounting, and the concentration and
//! bucket-occupancy diagnostics.
//!
//! All entropies are in bits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // Float supplies log2/exp/sqrt on no_std builds
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::landmarks::VList;
use crate::model::World;
use crate::oracle::{self, OracleError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    /// Entropy of nothing: no positive count present.
    NoMass,
    Oracle(OracleError),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::NoMass => write!(f, "need at least one positive count"),
            StatsError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

impl From<OracleError> for StatsError {
    fn from(e: OracleError) -> Self {
        StatsError::Oracle(e)
    }
}

/// Plug-in (maximum-likelihood) entropy of a frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub bits: f64,
    /// Outcomes with positive count.
    pub support: usize,
    pub samples: u64,
    /// Asymptotic standard error of the plug-in estimator.
    pub std_error: f64,
    /// Set when fewer than 10 samples per observed outcome were available;
    /// the plug-in estimate is biased low in that regime.
    pub small_sample: bool,
}

/// `H = sum (c_i/T) * log2(T/c_i)` over positive counts.
pub fn plugin_entropy(counts: &[u64]) -> Result<EntropyEstimate, StatsError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::NoMass);
    }
    let t = total as f64;
    let mut bits = 0.0;
    let mut second = 0.0;
    let mut support = 0usize;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / t;
        let l = p.log2();
        bits -= p * l;
        second += p * l * l;
        support += 1;
    }
    let variance = (second - bits * bits).max(0.0);
    Ok(EntropyEstimate {
        bits,
        support,
        samples: total,
        std_error: (variance / t).sqrt(),
        small_sample: total < 10 * support as u64,
    })
}

/// Exact outcome entropy of one discrete-source group under a landmark
/// list, by full atom enumeration.
pub fn exact_outcome_entropy(world: &World, group: usize, vlist: &VList) -> Result<f64, StatsError> {
    let atlas = oracle::enumerate_outcomes(world, group, vlist)?;
    Ok(plugin_entropy(&atlas.counts)?.bits)
}

/// Exact entropy of the output ranking for an all-discrete world, by
/// enumerating the joint atom space (up to `budget` combinations).
pub fn exact_ranking_entropy(world: &World, budget: u64) -> Result<f64, StatsError> {
    let atlas = oracle::enumerate_rankings(world, budget)?;
    Ok(plugin_entropy(&atlas.counts)?.bits)
}

// ── Run reports ───────────────────────────────────────────────────────

/// How one group's outcome was computed during a sort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescentOutcome {
    /// Trie hit: the leaf's sample count over the trie total gives the
    /// empirical outcome frequency.
    Fast { leaf_count: u64, total: u64 },
    /// Trie miss at `depth`; the group fell back to sort-and-bucket.
    Fallback { miss_depth: u32 },
}

/// Per-group descent accounting within one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescentStat {
    pub group: u32,
    pub group_size: u32,
    /// Boundary comparisons spent inside the trie (before any fallback).
    pub comparisons: u32,
    pub outcome: DescentOutcome,
}

/// Counter block for one operation-phase run. `seq` is a logical timestamp
/// (the run index); wall-clock time is deliberately not recorded so that
/// reports are bit-reproducible across runs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunReport {
    pub seq: u64,
    pub n: u32,
    pub fast_groups: u32,
    pub fallback_groups: u32,
    /// Trie boundary comparisons summed over groups.
    pub descent_comparisons: u64,
    /// Fallback comparisons (merge sort of the group plus landmark binary
    /// searches).
    pub fallback_comparisons: u64,
    /// K-way bucket merge comparisons.
    pub merge_comparisons: u64,
    /// Sublist count per bucket, length n + 1.
    pub bucket_sublists: Vec<u32>,
    pub descents: Vec<DescentStat>,
}

impl RunReport {
    pub fn new(seq: u64, n: usize) -> Self {
        RunReport {
            seq,
            n: n as u32,
            bucket_sublists: vec![0; n + 1],
            ..Default::default()
        }
    }

    pub fn total_comparisons(&self) -> u64 {
        self.descent_comparisons + self.fallback_comparisons + self.merge_comparisons
    }

    /// Internal consistency: tallies match the per-descent detail.
    pub fn consistent(&self) -> bool {
        let fast = self
            .descents
            .iter()
            .filter(|d| matches!(d.outcome, DescentOutcome::Fast { .. }))
            .count() as u32;
        let fallback = self.descents.len() as u32 - fast;
        let descent_sum: u64 = self.descents.iter().map(|d| d.comparisons as u64).sum();
        fast == self.fast_groups
            && fallback == self.fallback_groups
            && descent_sum == self.descent_comparisons
    }
}

/// Mean sublist counts per bucket across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats {
    /// Mean |S_r| per bucket index, over all runs.
    pub per_bucket_mean: Vec<f64>,
    /// Mean |S_r| over nonempty buckets only, over all runs.
    pub nonempty_mean: f64,
    /// Largest |S_r| seen anywhere.
    pub max_sublists: u32,
    pub runs: usize,
}

pub fn bucket_occupancy_stats(reports: &[RunReport]) -> OccupancyStats {
    let width = reports.iter().map(|r| r.bucket_sublists.len()).max().unwrap_or(0);
    let mut sums = vec![0u64; width];
    let mut nonempty_sum = 0u64;
    let mut nonempty_count = 0u64;
    let mut max_sublists = 0u32;
    for report in reports {
        for (r, &c) in report.bucket_sublists.iter().enumerate() {
            sums[r] += c as u64;
            if c > 0 {
                nonempty_sum += c as u64;
                nonempty_count += 1;
                max_sublists = max_sublists.max(c);
            }
        }
    }
    let runs = reports.len();
    OccupancyStats {
        per_bucket_mean: sums
            .iter()
            .map(|&s| if runs == 0 { 0.0 } else { s as f64 / runs as f64 })
            .collect(),
        nonempty_mean: if nonempty_count == 0 {
            0.0
        } else {
            nonempty_sum as f64 / nonempty_count as f64
        },
        max_sublists,
        runs,
    }
}

// ── Concentration diagnostic ──────────────────────────────────────────

/// One outcome's measured tail rate against its concentration bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub outcome: u32,
    pub probability: f64,
    /// `exp(-p * T / 8)`: bound on `Pr(q <= p/2)` for the empirical
    /// frequency `q` over `T` samples.
    pub bound: f64,
    /// Repetitions in which `q <= p/2` was observed.
    pub hits: u32,
    pub rate: f64,
    /// Three binomial standard deviations of the bound at `reps` trials.
    pub margin: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub samples_per_rep: u64,
    pub reps: u32,
    pub checks: Vec<TailCheck>,
}

impl TailReport {
    pub fn all_within_bound(&self) -> bool {
        self.checks.iter().all(|c| !c.violated)
    }
}

/// Repeats the frequency-learning experiment `reps` times: each repetition
/// draws `samples_per_rep` atoms uniformly, maps them through
/// `atom_outcome`, and tests every outcome with exact probability at least
/// `min_probability` for the half-frequency event `q <= p/2`. The measured
/// rate must stay within `exp(-p*T/8)` plus three binomial sigmas.
pub fn tail_diagnostic(
    atom_outcome: &[u32],
    outcome_count: usize,
    samples_per_rep: u64,
    reps: u32,
    min_probability: f64,
    rng: &mut ChaCha12Rng,
) -> TailReport {
    let atom_total = atom_outcome.len() as u64;
    let mut probs = vec![0.0f64; outcome_count];
    for &o in atom_outcome {
        probs[o as usize] += 1.0 / atom_total as f64;
    }
    let tracked: Vec<u32> = (0..outcome_count as u32)
        .filter(|&o| probs[o as usize] >= min_probability)
        .collect();

    let mut hits = vec![0u32; tracked.len()];
    let mut counts = vec![0u64; outcome_count];
    for _ in 0..reps {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..samples_per_rep {
            let a = rng.gen_range(0..atom_total) as usize;
            counts[atom_outcome[a] as usize] += 1;
        }
        for (slot, &o) in tracked.iter().enumerate() {
            let q = counts[o as usize] as f64 / samples_per_rep as f64;
            if q <= probs[o as usize] / 2.0 {
                hits[slot] += 1;
            }
        }
    }

    let checks = tracked
        .iter()
        .zip(&hits)
        .map(|(&o, &h)| {
            let p = probs[o as usize];
            let bound = (-p * samples_per_rep as f64 / 8.0).exp();
            let rate = h as f64 / reps as f64;
            let margin = 3.0 * (bound * (1.0 - bound) / reps as f64).sqrt();
            TailCheck {
                outcome: o,
                probability: p,
                bound,
                hits: h,
                rate,
                margin,
                violated: rate > bound + margin,
            }
        })
        .collect();
    TailReport { samples_per_rep, reps, checks }
}
