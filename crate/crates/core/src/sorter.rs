//! Operation phase: compute each group's outcome (biased trie descent with a
//! sort-and-bucket fallback), distribute the per-group sorted runs into
//! landmark buckets, merge each bucket, and concatenate.
//!
//! Correctness is unconditional: whatever the learned model looks like, the
//! output equals the reference sort under the (value, element index) order.
//! Learning quality only moves the comparison counters.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::landmarks::VList;
use crate::model::Instance;
use crate::outcome::{
    decode_outcome, DescentResult, DescentTrace, LearnedModel, OutcomeCode, OutcomeError,
    OutcomeTrie, PredRef,
};
use crate::stats::{DescentOutcome, DescentStat, RunReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SortError {
    SizeMismatch { model: usize, instance: usize },
    NonFiniteValue,
    Outcome(OutcomeError),
}

impl fmt::Display for SortError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortError::SizeMismatch { model, instance } => {
                write!(f, "model is for n={model} but instance has {instance} values")
            }
            SortError::NonFiniteValue => write!(f, "instance values must be finite"),
            SortError::Outcome(e) => write!(f, "{e}"),
        }
    }
}

impl From<OutcomeError> for SortError {
    fn from(e: OutcomeError) -> Self {
        SortError::Outcome(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Fast,
    Fallback,
}

/// One group's computed outcome with its cost breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub code: OutcomeCode,
    pub path: PathKind,
    pub descent: DescentOutcome,
    pub descent_comparisons: u32,
    pub fallback_comparisons: u64,
}

/// Merges two (value, position)-sorted index runs, charging one unit per
/// value comparison; ties resolve by position for free.
fn merge_pair(a: &[u32], b: &[u32], values: &[f64], comparisons: &mut u64) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        *comparisons += 1;
        let (x, y) = (values[a[i] as usize], values[b[j] as usize]);
        let take_a = match x.total_cmp(&y) {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => a[i] < b[j],
        };
        if take_a {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn counted_merge_sort(indices: Vec<u32>, values: &[f64], comparisons: &mut u64) -> Vec<u32> {
    if indices.len() <= 1 {
        return indices;
    }
    let mid = indices.len() / 2;
    let right = indices[mid..].to_vec();
    let mut left = indices;
    left.truncate(mid);
    let left = counted_merge_sort(left, values, comparisons);
    let right = counted_merge_sort(right, values, comparisons);
    merge_pair(&left, &right, values, comparisons)
}

/// Balanced pairwise merge of sorted sublists: every element takes part in
/// at most `ceil(log2 L)` pairwise merges, so the comparison count is at
/// most `|s_r| * ceil(log2 max(2, L))`.
pub fn merge_bucket(sublists: Vec<Vec<u32>>, values: &[f64], comparisons: &mut u64) -> Vec<u32> {
    let mut round: Vec<Vec<u32>> = sublists.into_iter().filter(|s| !s.is_empty()).collect();
    if round.is_empty() {
        return Vec::new();
    }
    while round.len() > 1 {
        let mut next = Vec::with_capacity(round.len() / 2 + 1);
        let mut it = round.chunks_exact(2);
        for pair in &mut it {
            next.push(merge_pair(&pair[0], &pair[1], values, comparisons));
        }
        if let [odd] = it.remainder() {
            next.push(odd.clone());
        }
        round = next;
    }
    round.pop().unwrap()
}

/// Definitional outcome computation used on trie misses: merge-sort the
/// group, binary-search each element's bucket, then assemble the code from
/// the order and buckets without further value comparisons.
fn fallback_outcome(values: &[f64], vlist: &VList, comparisons: &mut u64) -> OutcomeCode {
    let k = values.len();
    let order = counted_merge_sort((0..k as u32).collect(), values, comparisons);
    let mut rank = vec![0u32; k];
    for (r, &pos) in order.iter().enumerate() {
        rank[pos as usize] = r as u32;
    }
    let buckets: Vec<u32> = values
        .iter()
        .map(|&x| vlist.predecessor_counted(x, comparisons) as u32)
        .collect();

    let mut code = Vec::with_capacity(k);
    for t in 0..k {
        let mut best: Option<u32> = None;
        for s in 0..t {
            if buckets[s] == buckets[t]
                && rank[s] < rank[t]
                && best.is_none_or(|b| rank[s] > rank[b as usize])
            {
                best = Some(s as u32);
            }
        }
        code.push(match best {
            Some(s) => PredRef::Element(s),
            None => PredRef::Landmark(buckets[t]),
        });
    }
    OutcomeCode(code)
}

/// Trie descent with fallback; both paths produce the identical code.
pub fn compute_group_outcome(
    trie: &OutcomeTrie,
    values: &[f64],
    vlist: &VList,
) -> GroupOutcome {
    let mut trace = DescentTrace::default();
    match trie.descend(values, vlist, &mut trace) {
        DescentResult::Hit { code, leaf_count } => GroupOutcome {
            code,
            path: PathKind::Fast,
            descent: DescentOutcome::Fast { leaf_count, total: trie.total() },
            descent_comparisons: trace.comparisons,
            fallback_comparisons: 0,
        },
        DescentResult::Miss { depth } => {
            let mut fallback_comparisons = 0u64;
            let code = fallback_outcome(values, vlist, &mut fallback_comparisons);
            GroupOutcome {
                code,
                path: PathKind::Fallback,
                descent: DescentOutcome::Fallback { miss_depth: depth },
                descent_comparisons: trace.comparisons,
                fallback_comparisons,
            }
        }
    }
}

/// Per-bucket sets of sorted sublists (global element ids).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSet {
    /// `sublists[r]`: the maximal per-group runs landing in bucket `r`.
    pub sublists: Vec<Vec<Vec<u32>>>,
}

impl BucketSet {
    pub fn new(n_landmarks: usize) -> Self {
        Self { sublists: vec![Vec::new(); n_landmarks + 1] }
    }

    /// Splits one group's decoded outcome into bucket runs. `members` maps
    /// group positions to global ids.
    pub fn add_group(&mut self, members: &[u32], order: &[u32], buckets: &[u32]) {
        let mut run: Vec<u32> = Vec::new();
        let mut run_bucket = 0usize;
        for &pos in order {
            let r = buckets[pos as usize] as usize;
            if !run.is_empty() && r != run_bucket {
                self.sublists[run_bucket].push(core::mem::take(&mut run));
            }
            run_bucket = r;
            run.push(members[pos as usize]);
        }
        if !run.is_empty() {
            self.sublists[run_bucket].push(run);
        }
    }
}

/// Full output of one operation-phase run.
#[derive(Debug, Clone, PartialEq)]
pub struct SortOutcome {
    /// 1-based rank of each element under the (value, index) order.
    pub ranks: Vec<u32>,
    /// Element ids in ascending order (the concatenated buckets).
    pub sorted: Vec<u32>,
    pub report: RunReport,
}

/// Sorts one instance with the learned model. `seq` tags the report.
pub fn sort_instance(
    model: &LearnedModel,
    instance: &Instance,
    seq: u64,
) -> Result<SortOutcome, SortError> {
    let n = model.n();
    if instance.values.len() != n {
        return Err(SortError::SizeMismatch { model: n, instance: instance.values.len() });
    }
    if instance.values.iter().any(|v| !v.is_finite()) {
        return Err(SortError::NonFiniteValue);
    }
    let values = &instance.values;
    let mut report = RunReport::new(seq, n);
    let mut buckets = BucketSet::new(model.vlist.n());

    let mut group_values: Vec<f64> = Vec::new();
    for (k, group) in model.groups.iter().enumerate() {
        group_values.clear();
        group_values.extend(group.members.iter().map(|&m| values[m as usize]));

        let outcome = compute_group_outcome(&group.trie, &group_values, &model.vlist);
        report.descent_comparisons += outcome.descent_comparisons as u64;
        report.fallback_comparisons += outcome.fallback_comparisons;
        match outcome.path {
            PathKind::Fast => report.fast_groups += 1,
            PathKind::Fallback => report.fallback_groups += 1,
        }
        report.descents.push(DescentStat {
            group: k as u32,
            group_size: group.members.len() as u32,
            comparisons: outcome.descent_comparisons,
            outcome: outcome.descent,
        });

        let decoded = decode_outcome(&outcome.code, model.vlist.n())?;
        buckets.add_group(&group.members, &decoded.order, &decoded.buckets);
    }

    let mut sorted = Vec::with_capacity(n);
    for (r, lists) in buckets.sublists.into_iter().enumerate() {
        report.bucket_sublists[r] = lists.len() as u32;
        let merged = merge_bucket(lists, values, &mut report.merge_comparisons);
        sorted.extend_from_slice(&merged);
    }

    let mut ranks = vec![0u32; n];
    for (rank, &element) in sorted.iter().enumerate() {
        ranks[element as usize] = rank as u32 + 1;
    }
    Ok(SortOutcome { ranks, sorted, report })
}
