//! Hidden-partition learning.
//!
//! The driving statistic: sort sampled rows by coordinate `i`, read off
//! coordinate `j` in that order, and compute `D`, the minimum number of
//! monotonic (non-strictly increasing or decreasing) subsequences that cover
//! the resulting sequence. Same-group pairs satisfy `D <= 2*mu + 1` on every
//! sample set; independent pairs blow past that threshold with high
//! probability once enough rows are available. Thresholding `D` over all
//! pairs and closing under union recovers the partition.
//!
//! Computing `D` exactly is a hard combinatorial problem in general, so the
//! solver below is an exact search engineered for the small sample counts
//! used here: a greedy upper bound, a subsequence-union lower bound derived
//! from the RSK row profile, and per-(p,q)-split frontier search with
//! dominance pruning, all under an explicit expansion budget. It never
//! returns a silently wrong answer; if the budget is exhausted it reports the
//! best known upper bound as an error.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Expansion limits for the exact search.
#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    /// Total successor states generated across one `D` computation.
    pub max_expansions: u64,
    /// Frontier width above which dominance pruning is skipped (the search
    /// stays sound; it just stops paying the quadratic pruning cost).
    pub prune_width: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_expansions: 20_000_000, prune_width: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionError {
    /// Exact search ran out of budget; `best_upper_bound` is the greedy
    /// cover size, which is always valid as an upper bound.
    BudgetExceeded { best_upper_bound: usize },
    /// Sample matrix is malformed or too small for the requested statistic.
    BadSamples(alloc::string::String),
}

impl fmt::Display for PartitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionError::BudgetExceeded { best_upper_bound } => write!(
                f,
                "monotone-partition search budget exceeded (best upper bound {best_upper_bound})"
            ),
            PartitionError::BadSamples(msg) => write!(f, "bad sample matrix: {msg}"),
        }
    }
}

// ── Rank compression ──────────────────────────────────────────────────

/// Dense ranks 1..=r, equal values sharing a rank. The statistic only
/// depends on the relative order, and small integers keep states compact.
fn rank_compress(seq: &[f64]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..seq.len()).collect();
    idx.sort_by(|&a, &b| seq[a].total_cmp(&seq[b]));
    let mut ranks = vec![0u32; seq.len()];
    let mut rank = 0u32;
    for (pos, &i) in idx.iter().enumerate() {
        if pos == 0 || seq[idx[pos - 1]] != seq[i] {
            rank += 1;
        }
        ranks[i] = rank;
    }
    ranks
}

// ── Greedy upper bound ────────────────────────────────────────────────

#[derive(Clone, Copy)]
enum Chain {
    /// All elements equal so far; can still become either direction.
    Level(u32),
    Inc(u32),
    Dec(u32),
}

/// Greedy cover: prefer a no-op placement on a chain whose last value equals
/// the element, then the tightest extension, then a fresh chain. The result
/// is a valid cover, hence an upper bound.
fn greedy_upper_bound(ranks: &[u32]) -> usize {
    let mut chains: Vec<Chain> = Vec::new();
    for &x in ranks {
        let mut best: Option<(u32, usize)> = None; // (looseness, chain index)
        let mut exact = None;
        for (c, chain) in chains.iter().enumerate() {
            let fit = match *chain {
                Chain::Level(v) | Chain::Inc(v) | Chain::Dec(v) if v == x => {
                    exact = Some(c);
                    break;
                }
                Chain::Inc(v) if v < x => Some(x - v),
                Chain::Dec(v) if v > x => Some(v - x),
                // Converting a level chain commits its direction; treat it
                // as a loose fit so real extensions win.
                Chain::Level(v) => Some(v.abs_diff(x) + ranks.len() as u32),
                _ => None,
            };
            if let Some(t) = fit {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, c));
                }
            }
        }
        if let Some(c) = exact {
            continue_chain(&mut chains, c, x);
        } else if let Some((_, c)) = best {
            continue_chain(&mut chains, c, x);
        } else {
            chains.push(Chain::Level(x));
        }
    }
    chains.len()
}

fn continue_chain(chains: &mut [Chain], c: usize, x: u32) {
    chains[c] = match chains[c] {
        Chain::Level(v) if x > v => Chain::Inc(x),
        Chain::Level(v) if x < v => Chain::Dec(x),
        Chain::Level(v) => Chain::Level(v),
        Chain::Inc(_) => Chain::Inc(x),
        Chain::Dec(_) => Chain::Dec(x),
    };
}

// ── RSK row profile (subsequence-union bounds) ────────────────────────

/// Row lengths of the insertion tableau. The sum of the first `p` rows is
/// the maximum total length of `p` disjoint non-decreasing subsequences
/// (Greene's theorem), which yields a coverage-based lower bound on `D`.
fn rsk_rows(ranks: &[u32]) -> Vec<usize> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for &x in ranks {
        let mut carry = x;
        let mut placed = false;
        for row in rows.iter_mut() {
            // First entry strictly greater than `carry` is bumped.
            let pos = row.partition_point(|&v| v <= carry);
            if pos == row.len() {
                row.push(carry);
                placed = true;
                break;
            }
            core::mem::swap(&mut row[pos], &mut carry);
        }
        if !placed {
            rows.push(vec![carry]);
        }
    }
    rows.iter().map(|r| r.len()).collect()
}

/// Cumulative row sums padded so that `cum[p]` is defined for every `p`:
/// `cum[p]` = max elements coverable by `p` chains of one direction.
fn coverage_profile(rows: &[usize], len: usize) -> Vec<usize> {
    let mut cum = Vec::with_capacity(len + 1);
    cum.push(0usize);
    let mut acc = 0usize;
    for p in 0..len {
        acc += rows.get(p).copied().unwrap_or(0);
        cum.push(acc);
    }
    cum
}

// ── Exact per-split search ────────────────────────────────────────────

// Packed frontier states: up to 14 chain tails in 9-bit lanes of a u128,
// lane 0 most significant. The non-increasing side stores complemented
// values (LANE_CAP - v), which turns its patience move into the same
// "replace largest tail <= key" move as the non-decreasing side and makes
// dominance a single SWAR per-lane comparison.
const LANE_BITS: u32 = 9;
const LANE_COUNT: usize = 14;
const LANE_CAP: u32 = 255;
const LANE_MASK: u128 = (1 << LANE_BITS) - 1;

#[inline]
fn lane_shift(i: usize) -> u32 {
    ((LANE_COUNT - 1 - i) as u32) * LANE_BITS
}

#[inline]
fn lane_get(state: u128, i: usize) -> u32 {
    ((state >> lane_shift(i)) & LANE_MASK) as u32
}

#[inline]
fn lane_set(state: u128, i: usize, v: u32) -> u128 {
    (state & !(LANE_MASK << lane_shift(i))) | ((v as u128) << lane_shift(i))
}

fn guard_mask(width: usize) -> u128 {
    let mut g = 0u128;
    for i in 0..width {
        g |= 1u128 << (lane_shift(i) + 8);
    }
    g
}

/// Per-lane `a <= b` on all of the first `width` lanes. Guard bits absorb
/// the borrows, so lanes cannot contaminate each other.
#[inline]
fn packed_dominates(a: u128, b: u128, guard: u128) -> bool {
    ((b | guard).wrapping_sub(a)) & guard == guard
}

/// Packed-state variant of the split search; requires `p + q <= 14` and
/// ranks below [`LANE_CAP`]. Covers every threshold the learner uses; wider
/// searches fall back to [`split_feasible_generic`].
fn split_feasible_packed(
    ranks: &[u32],
    p: usize,
    q: usize,
    budget: &SearchBudget,
    expansions: &mut u64,
) -> Result<bool, ()> {
    let width = p + q;
    let guard = guard_mask(width);
    // Sentinel 0 on both sides accepts any key (keys are >= 1).
    let mut frontier: Vec<u128> = vec![0];
    let mut next: Vec<u128> = Vec::new();

    // One side of one state: patience move on lanes [lo, hi).
    // Returns the successor, or None when no tail accepts the key.
    #[inline]
    fn side_move(state: u128, lo: usize, hi: usize, key: u32) -> Option<u128> {
        let mut pos = None;
        for i in lo..hi {
            if lane_get(state, i) <= key {
                pos = Some(i);
            } else {
                break;
            }
        }
        pos.map(|i| lane_set(state, i, key))
    }

    for &x in ranks {
        let inc_key = x;
        let dec_key = LANE_CAP - x;
        next.clear();
        for &state in &frontier {
            let inc_succ = (p > 0).then(|| side_move(state, 0, p, inc_key)).flatten();
            if let Some(s) = inc_succ {
                *expansions += 1;
                next.push(s);
                if s == state {
                    // No-op placement dominates every other move.
                    continue;
                }
            }
            if q > 0 {
                if let Some(s) = side_move(state, p, width, dec_key) {
                    *expansions += 1;
                    next.push(s);
                }
            }
        }
        if *expansions > budget.max_expansions {
            return Err(());
        }
        if next.is_empty() {
            return Ok(false);
        }
        next.sort_unstable();
        next.dedup();
        if next.len() <= budget.prune_width {
            // Pointwise lane-<= implies integer <=, so only earlier states
            // can dominate later ones.
            let mut keep = vec![true; next.len()];
            for i in 0..next.len() {
                if !keep[i] {
                    continue;
                }
                for j in i + 1..next.len() {
                    if keep[j] && packed_dominates(next[i], next[j], guard) {
                        keep[j] = false;
                    }
                }
            }
            let mut it = keep.iter();
            next.retain(|_| *it.next().unwrap());
        }
        core::mem::swap(&mut frontier, &mut next);
    }
    Ok(true)
}

/// Decides whether the sequence splits into `p` non-decreasing plus `q`
/// non-increasing chains. State: the `p` chain tails sorted ascending and the
/// `q` tails sorted ascending, with sentinels for unused chains. Each element
/// admits at most two undominated moves (patience move on either side), so
/// the frontier stays narrow; pairwise dominance pruning keeps it an
/// antichain while it is small.
fn split_feasible_generic(
    ranks: &[u32],
    p: usize,
    q: usize,
    max_rank: u32,
    budget: &SearchBudget,
    expansions: &mut u64,
) -> Result<bool, ()> {
    let dec_sentinel = max_rank + 1;
    let width = p + q;
    let mut frontier: Vec<u32> = vec![0u32; width];
    for slot in frontier.iter_mut().skip(p) {
        *slot = dec_sentinel;
    }
    let mut next: Vec<u32> = Vec::new();
    let mut order: Vec<u32> = Vec::new();

    for &x in ranks {
        next.clear();
        for state in frontier.chunks_exact(width) {
            // Non-decreasing side: replace the largest tail <= x.
            if p > 0 {
                let pos = state[..p].partition_point(|&v| v <= x);
                if pos > 0 {
                    *expansions += 1;
                    next.extend_from_slice(state);
                    if state[pos - 1] == x {
                        // No-op placement dominates every other move.
                        continue;
                    }
                    let base = next.len() - width;
                    next[base + pos - 1] = x;
                }
            }
            // Non-increasing side: replace the smallest tail >= x.
            if q > 0 {
                let pos = p + state[p..].partition_point(|&v| v < x);
                if pos < width {
                    *expansions += 1;
                    next.extend_from_slice(state);
                    if state[pos] == x {
                        continue;
                    }
                    let base = next.len() - width;
                    next[base + pos] = x;
                }
            }
        }
        if *expansions > budget.max_expansions {
            return Err(());
        }
        if next.is_empty() {
            return Ok(false);
        }
        compact_frontier(&next, &mut frontier, &mut order, width, p, budget.prune_width);
    }
    Ok(true)
}

/// Sort, dedup, and dominance-prune the candidate arena, writing survivors
/// into `dst`.
fn compact_frontier(
    src: &[u32],
    dst: &mut Vec<u32>,
    order: &mut Vec<u32>,
    width: usize,
    p: usize,
    prune_width: usize,
) {
    let count = src.len() / width;
    order.clear();
    order.extend(0..count as u32);
    let slice = |i: u32| {
        let s = i as usize * width;
        &src[s..s + width]
    };
    order.sort_unstable_by(|&a, &b| slice(a).cmp(slice(b)));
    order.dedup_by(|a, b| slice(*a) == slice(*b));

    if order.len() <= prune_width {
        let mut keep = vec![true; order.len()];
        for i in 0..order.len() {
            if !keep[i] {
                continue;
            }
            for j in 0..order.len() {
                if i != j && keep[j] && dominates(slice(order[i]), slice(order[j]), p) {
                    keep[j] = false;
                }
            }
        }
        let mut it = keep.iter();
        order.retain(|_| *it.next().unwrap());
    }

    dst.clear();
    for &src_idx in order.iter() {
        dst.extend_from_slice(slice(src_idx));
    }
}

fn dominates(a: &[u32], b: &[u32], p: usize) -> bool {
    a[..p].iter().zip(&b[..p]).all(|(x, y)| x <= y)
        && a[p..].iter().zip(&b[p..]).all(|(x, y)| x >= y)
}

// ── Solver front end ──────────────────────────────────────────────────

struct Solver<'a> {
    ranks: &'a [u32],
    max_rank: u32,
    cum_inc: Vec<usize>,
    cum_dec: Vec<usize>,
    greedy: usize,
    budget: SearchBudget,
    expansions: u64,
}

impl<'a> Solver<'a> {
    fn new(ranks: &'a [u32], budget: SearchBudget) -> Self {
        let len = ranks.len();
        let max_rank = ranks.iter().copied().max().unwrap_or(0);
        let rows_inc = rsk_rows(ranks);
        let reversed: Vec<u32> = ranks.iter().rev().copied().collect();
        let rows_dec = rsk_rows(&reversed);
        Self {
            ranks,
            max_rank,
            cum_inc: coverage_profile(&rows_inc, len),
            cum_dec: coverage_profile(&rows_dec, len),
            greedy: greedy_upper_bound(ranks),
            budget,
            expansions: 0,
        }
    }

    /// Smallest `d` whose best split could cover the sequence. Coverage is
    /// necessary but not sufficient, so this is a lower bound on `D`.
    fn coverage_lower_bound(&self) -> usize {
        let m = self.ranks.len();
        for d in 1..=m {
            if (0..=d).any(|p| self.cum_inc[p] + self.cum_dec[d - p] >= m) {
                return d;
            }
        }
        m
    }

    fn at_most(&mut self, d: usize) -> Result<bool, PartitionError> {
        let m = self.ranks.len();
        if m == 0 {
            return Ok(true);
        }
        if d == 0 {
            return Ok(false);
        }
        if d >= self.greedy {
            return Ok(true);
        }
        // Splits ordered by coverage slack so feasible ones are tried first.
        let mut splits: Vec<(usize, usize, usize)> = (0..=d)
            .filter_map(|p| {
                let cover = self.cum_inc[p.min(m)] + self.cum_dec[(d - p).min(m)];
                (cover >= m).then_some((cover, p, d - p))
            })
            .collect();
        splits.sort_unstable_by_key(|&(cover, _, _)| core::cmp::Reverse(cover));
        let packed_ok = d <= LANE_COUNT && self.max_rank < LANE_CAP;
        for (_, p, q) in splits {
            let feasible = if packed_ok {
                split_feasible_packed(self.ranks, p, q, &self.budget, &mut self.expansions)
            } else {
                split_feasible_generic(
                    self.ranks,
                    p,
                    q,
                    self.max_rank,
                    &self.budget,
                    &mut self.expansions,
                )
            };
            match feasible {
                Ok(true) => return Ok(true),
                Ok(false) => {}
                Err(()) => {
                    return Err(PartitionError::BudgetExceeded {
                        best_upper_bound: self.greedy,
                    })
                }
            }
        }
        Ok(false)
    }

    fn size(&mut self) -> Result<usize, PartitionError> {
        if self.ranks.is_empty() {
            return Ok(0);
        }
        let lb = self.coverage_lower_bound();
        for d in lb..self.greedy {
            if self.at_most(d)? {
                return Ok(d);
            }
        }
        Ok(self.greedy)
    }
}

/// Exact minimum number of monotonic subsequences covering `seq`.
/// Length 0 returns 0.
pub fn monotone_partition_size(seq: &[f64], budget: &SearchBudget) -> Result<usize, PartitionError> {
    let ranks = rank_compress(seq);
    Solver::new(&ranks, *budget).size()
}

/// Decision variant; agrees with `monotone_partition_size(seq) <= d` on
/// every input but can exit early at the threshold.
pub fn monotone_partition_at_most(
    seq: &[f64],
    d: usize,
    budget: &SearchBudget,
) -> Result<bool, PartitionError> {
    let ranks = rank_compress(seq);
    Solver::new(&ranks, *budget).at_most(d)
}

// ── Sample matrix and pairwise statistic ──────────────────────────────

/// Row-major matrix of sampled instances: `rows[t][i]` is coordinate `i` of
/// the `t`-th sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl SampleMatrix {
    pub fn new(n: usize, rows: Vec<Vec<f64>>) -> Result<Self, PartitionError> {
        if rows.is_empty() {
            return Err(PartitionError::BadSamples(alloc::string::String::from(
                "need at least one row",
            )));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(PartitionError::BadSamples(alloc::format!(
                "every row must have exactly {n} entries"
            )));
        }
        Ok(Self { n, rows })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Row indices ordered by column `i`, ties kept in row order.
    fn order_by_column(&self, i: usize) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.rows.len() as u32).collect();
        order.sort_by(|&a, &b| self.rows[a as usize][i].total_cmp(&self.rows[b as usize][i]));
        order
    }

    fn extract(&self, order: &[u32], j: usize) -> Vec<f64> {
        order.iter().map(|&t| self.rows[t as usize][j]).collect()
    }
}

/// `D` of column `j` read in the order that sorts column `i` (stable on
/// ties). Small values are evidence that `i` and `j` share a hidden source.
pub fn same_group_statistic(
    samples: &SampleMatrix,
    i: usize,
    j: usize,
    budget: &SearchBudget,
) -> Result<usize, PartitionError> {
    if i == j || i >= samples.n || j >= samples.n {
        return Err(PartitionError::BadSamples(alloc::format!(
            "need two distinct columns below {}",
            samples.n
        )));
    }
    let order = samples.order_by_column(i);
    monotone_partition_size(&samples.extract(&order, j), budget)
}

/// Decision form of [`same_group_statistic`] against a threshold; this is
/// the partition-learning hot path.
pub fn same_group_at_most(
    samples: &SampleMatrix,
    i: usize,
    j: usize,
    threshold: usize,
    budget: &SearchBudget,
) -> Result<bool, PartitionError> {
    if i == j || i >= samples.n || j >= samples.n {
        return Err(PartitionError::BadSamples(alloc::format!(
            "need two distinct columns below {}",
            samples.n
        )));
    }
    let order = samples.order_by_column(i);
    monotone_partition_at_most(&samples.extract(&order, j), threshold, budget)
}

/// Learned partition plus optional pairwise diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionResult {
    /// Disjoint member lists covering `0..n`, each sorted, ordered by their
    /// smallest member.
    pub groups: Vec<Vec<u32>>,
    /// `pairwise_d[i][j]`: the capped statistic recorded by
    /// [`learn_partition_with_matrix`]; `2*mu + 2` stands for "above
    /// threshold". Zero on the diagonal.
    pub pairwise_d: Option<Vec<Vec<u16>>>,
}

struct DisjointSets(Vec<u32>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n as u32).collect())
    }
    fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.0[root as usize] != root {
            root = self.0[root as usize];
        }
        let mut cur = x;
        while self.0[cur as usize] != root {
            let next = self.0[cur as usize];
            self.0[cur as usize] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Declares `(i, j)` same-group when the statistic is at most `2*mu + 1`,
/// then closes the positive pairs under union. Requires at least `mu^4`
/// rows; more rows sharpen the different-group separation.
pub fn learn_partition(
    samples: &SampleMatrix,
    mu: u32,
    budget: &SearchBudget,
) -> Result<PartitionResult, PartitionError> {
    learn_partition_impl(samples, mu, budget, false)
}

/// Same as [`learn_partition`] but records the pairwise statistic capped at
/// `2*mu + 2` for diagnosing wrong partitions.
pub fn learn_partition_with_matrix(
    samples: &SampleMatrix,
    mu: u32,
    budget: &SearchBudget,
) -> Result<PartitionResult, PartitionError> {
    learn_partition_impl(samples, mu, budget, true)
}

fn learn_partition_impl(
    samples: &SampleMatrix,
    mu: u32,
    budget: &SearchBudget,
    with_matrix: bool,
) -> Result<PartitionResult, PartitionError> {
    let min_rows = (mu as usize).pow(4).max(1);
    if samples.row_count() < min_rows {
        return Err(PartitionError::BadSamples(alloc::format!(
            "need at least mu^4 = {min_rows} rows, got {}",
            samples.row_count()
        )));
    }
    let n = samples.n;
    let threshold = (2 * mu + 1) as usize;
    let orders: Vec<Vec<u32>> = (0..n).map(|i| samples.order_by_column(i)).collect();

    let mut sets = DisjointSets::new(n);
    let mut matrix = if with_matrix {
        Some(vec![vec![0u16; n]; n])
    } else {
        None
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if matrix.is_none() && (j < i || sets.find(i as u32) == sets.find(j as u32)) {
                // One direction suffices to drive the union, and pairs that
                // are already connected cannot change the outcome.
                continue;
            }
            let seq = samples.extract(&orders[i], j);
            if let Some(m) = matrix.as_mut() {
                let ranks = rank_compress(&seq);
                let mut solver = Solver::new(&ranks, *budget);
                let mut d = threshold as u16 + 1;
                for cand in 1..=threshold {
                    if solver.at_most(cand)? {
                        d = cand as u16;
                        break;
                    }
                }
                m[i][j] = d;
                if d as usize <= threshold {
                    sets.union(i as u32, j as u32);
                }
            } else if monotone_partition_at_most(&seq, threshold, budget)? {
                sets.union(i as u32, j as u32);
            }
        }
    }

    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in 0..n as u32 {
        let root = sets.find(e);
        buckets[root as usize].push(e);
    }
    let groups: Vec<Vec<u32>> = buckets.into_iter().filter(|b| !b.is_empty()).collect();
    Ok(PartitionResult { groups, pairwise_d: matrix })
}
