//! Per-group outcome encoding and the weighted outcome trie.
//!
//! A group outcome is each member's landmark bucket plus the members'
//! relative order. It is encoded Lehmer-style: entry `t` names the
//! predecessor of element `t` among all landmarks and the earlier elements
//! `0..t`, under the total order (value, landmarks before elements, element
//! position). The code decodes back to a unique interleaving, so a trie over
//! codes branches, at depth `t`, on a set of candidate predecessors whose
//! relative order is the same for every instance that reaches the node.
//!
//! Sampled outcomes are stored in the trie with their observed counts. Nodes
//! carry subtree counts (the root holds the sample total), and descent for a
//! fresh instance locates each next child by weight-biased boundary search,
//! so outcomes of empirical frequency `q` are reached in about `log2(1/q)`
//! comparisons beyond the per-step constant. A descent that leaves the
//! sampled support reports a miss instead of an answer.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::landmarks::VList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredRef {
    /// Landmark `V_r`, `0 <= r <= n` (`r = 0` is the low sentinel).
    Landmark(u32),
    /// An earlier element of the same group, by position within the group.
    Element(u32),
}

/// Upper boundary of a child's predecessor region: the candidate that
/// follows the child's key in the merged order, or plus infinity after the
/// last candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fence {
    Ref(PredRef),
    PosInf,
}

/// Lehmer-style predecessor code of one group outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeCode(pub Vec<PredRef>);

impl OutcomeCode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn refs(&self) -> &[PredRef] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomeError {
    WrongLength { expected: usize, got: usize },
    /// Reference invalid at its position (forward element reference or
    /// landmark index out of range).
    BadRef { position: usize },
    CountMismatch,
    UnsortedChildren,
    /// Leaf at the wrong depth in a raw trie.
    BadDepth,
    EmptyTrie,
}

impl fmt::Display for OutcomeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeError::WrongLength { expected, got } => {
                write!(f, "code length {got}, expected {expected}")
            }
            OutcomeError::BadRef { position } => {
                write!(f, "invalid predecessor reference at position {position}")
            }
            OutcomeError::CountMismatch => write!(f, "internal node count != sum of children"),
            OutcomeError::UnsortedChildren => write!(f, "children out of candidate order"),
            OutcomeError::BadDepth => write!(f, "leaf at wrong depth"),
            OutcomeError::EmptyTrie => write!(f, "trie has no samples"),
        }
    }
}

/// Upper bound on the number of distinct outcomes a group of size `n_k` can
/// realize: `n_k * n * (mu + 1) + n_k^2 * sigma`, from counting the
/// landmark-crossing and pairwise-intersection events that can change the
/// outcome as the hidden variable sweeps its domain.
pub fn outcome_space_bound(group_size: usize, n: usize, mu: u32, sigma: u32) -> u64 {
    let (k, n, mu, sigma) = (group_size as u64, n as u64, mu as u64, sigma as u64);
    k * n * (mu + 1) + k * k * sigma
}

// ── Bucket-interleaving state ─────────────────────────────────────────
//
// Shared by encode, decode, and trie insertion: per bucket, the positions of
// the already-placed elements in ascending (value, position) order.

struct Interleaving {
    buckets: Vec<Vec<u32>>,
    elem_bucket: Vec<u32>,
    touched: Vec<u32>,
}

impl Interleaving {
    fn new(n_landmarks: usize, group_size: usize) -> Self {
        Self {
            buckets: vec![Vec::new(); n_landmarks + 1],
            elem_bucket: vec![u32::MAX; group_size],
            touched: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &r in &self.touched {
            self.buckets[r as usize].clear();
        }
        self.touched.clear();
        for b in self.elem_bucket.iter_mut() {
            *b = u32::MAX;
        }
    }

    fn position_of(&self, s: u32) -> (usize, usize) {
        let r = self.elem_bucket[s as usize] as usize;
        let i = self.buckets[r].iter().position(|&e| e == s).expect("element placed");
        (r, i)
    }

    /// Places element `t` whose predecessor is `key`; `key` must be valid.
    fn place(&mut self, t: u32, key: PredRef) {
        match key {
            PredRef::Landmark(r) => {
                let r = r as usize;
                if self.buckets[r].is_empty() {
                    self.touched.push(r as u32);
                }
                self.buckets[r].insert(0, t);
                self.elem_bucket[t as usize] = r as u32;
            }
            PredRef::Element(s) => {
                let (r, i) = self.position_of(s);
                self.buckets[r].insert(i + 1, t);
                self.elem_bucket[t as usize] = r as u32;
            }
        }
    }

    fn valid_key(&self, key: PredRef, t: usize, n_landmarks: usize) -> bool {
        match key {
            PredRef::Landmark(r) => (r as usize) <= n_landmarks,
            PredRef::Element(s) => (s as usize) < t && self.elem_bucket[s as usize] != u32::MAX,
        }
    }

    /// Position of a candidate in the merged order along this prefix.
    /// Landmarks precede the elements of their bucket.
    fn order_key(&self, key: PredRef) -> (u32, u32) {
        match key {
            PredRef::Landmark(r) => (r, 0),
            PredRef::Element(s) => {
                let (r, i) = self.position_of(s);
                (r as u32, i as u32 + 1)
            }
        }
    }

    /// Candidate immediately after `key` in the merged order.
    fn successor(&self, key: PredRef, n_landmarks: usize) -> Fence {
        let (r, i) = match key {
            PredRef::Landmark(r) => (r as usize, 0usize),
            PredRef::Element(s) => {
                let (r, i) = self.position_of(s);
                (r, i + 1)
            }
        };
        if i < self.buckets[r].len() {
            return Fence::Ref(PredRef::Element(self.buckets[r][i]));
        }
        if r < n_landmarks {
            Fence::Ref(PredRef::Landmark(r as u32 + 1))
        } else {
            Fence::PosInf
        }
    }
}

// ── Encoding and decoding ─────────────────────────────────────────────

/// Encodes a group's element values (in member-list order) into the
/// predecessor code. Ties between equal values resolve in favor of the
/// earlier element, and landmarks win ties against elements, matching the
/// half-open bucket rule.
pub fn encode_outcome(values: &[f64], vlist: &VList) -> OutcomeCode {
    let mut state = Interleaving::new(vlist.n(), values.len());
    let mut code = Vec::with_capacity(values.len());
    for (t, &x) in values.iter().enumerate() {
        let r = vlist.predecessor(x);
        let bucket = &state.buckets[r];
        let idx = bucket.partition_point(|&s| values[s as usize] <= x);
        let key = if idx == 0 {
            PredRef::Landmark(r as u32)
        } else {
            PredRef::Element(bucket[idx - 1])
        };
        state.place(t as u32, key);
        code.push(key);
    }
    OutcomeCode(code)
}

/// Bucket assignment and within-group sorted order reconstructed from a
/// code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedOutcome {
    /// Landmark bucket of each element, by position.
    pub buckets: Vec<u32>,
    /// Element positions in ascending (value, position) order.
    pub order: Vec<u32>,
}

/// Inverse of [`encode_outcome`] on the outcome level: recovers every
/// element's bucket and the relative order.
pub fn decode_outcome(code: &OutcomeCode, n_landmarks: usize) -> Result<DecodedOutcome, OutcomeError> {
    let mut state = Interleaving::new(n_landmarks, code.len());
    for (t, &key) in code.refs().iter().enumerate() {
        if !state.valid_key(key, t, n_landmarks) {
            return Err(OutcomeError::BadRef { position: t });
        }
        state.place(t as u32, key);
    }
    let mut order = Vec::with_capacity(code.len());
    let mut touched: Vec<u32> = state.touched.clone();
    touched.sort_unstable();
    for r in touched {
        order.extend_from_slice(&state.buckets[r as usize]);
    }
    Ok(DecodedOutcome { buckets: state.elem_bucket.clone(), order })
}

// ── Weighted trie ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
struct TrieChild {
    key: PredRef,
    upper: Fence,
    node: TrieNode,
}

#[derive(Debug, Clone, PartialEq)]
struct TrieNode {
    count: u64,
    children: Vec<TrieChild>,
    /// Prefix sums over child counts (len = children + 1); built on finalize.
    cum: Vec<u64>,
    /// Child holding at least half the node's weight, if any.
    majority: Option<u16>,
}

impl TrieNode {
    fn leaf() -> Self {
        TrieNode { count: 0, children: Vec::new(), cum: Vec::new(), majority: None }
    }

    fn finalize(&mut self) -> Result<(), OutcomeError> {
        if self.children.is_empty() {
            return Ok(());
        }
        let sum: u64 = self.children.iter().map(|c| c.node.count).sum();
        if sum != self.count {
            return Err(OutcomeError::CountMismatch);
        }
        self.cum = Vec::with_capacity(self.children.len() + 1);
        self.cum.push(0);
        let mut acc = 0u64;
        self.majority = None;
        for (i, child) in self.children.iter_mut().enumerate() {
            acc += child.node.count;
            self.cum.push(acc);
            if child.node.count * 2 >= self.count {
                self.majority = Some(i as u16);
            }
            child.node.finalize()?;
        }
        Ok(())
    }
}

/// Raw nested representation used for (de)serialization: counts and keys
/// only; fences and search structure are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrieNode {
    pub count: u64,
    pub children: Vec<(PredRef, RawTrieNode)>,
}

/// Immutable weighted trie over the sampled outcomes of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTrie {
    group_size: usize,
    n_landmarks: usize,
    root: TrieNode,
}

/// Accumulates sampled outcome codes into an [`OutcomeTrie`].
pub struct TrieBuilder {
    group_size: usize,
    n_landmarks: usize,
    root: TrieNode,
    state: Interleaving,
}

impl TrieBuilder {
    pub fn new(group_size: usize, n_landmarks: usize) -> Self {
        Self {
            group_size,
            n_landmarks,
            root: TrieNode::leaf(),
            state: Interleaving::new(n_landmarks, group_size),
        }
    }

    pub fn insert(&mut self, code: &OutcomeCode) -> Result<(), OutcomeError> {
        if code.len() != self.group_size {
            return Err(OutcomeError::WrongLength {
                expected: self.group_size,
                got: code.len(),
            });
        }
        self.state.reset();
        self.root.count += 1;
        let mut node = &mut self.root;
        for (t, &key) in code.refs().iter().enumerate() {
            if !self.state.valid_key(key, t, self.n_landmarks) {
                return Err(OutcomeError::BadRef { position: t });
            }
            let order_key = self.state.order_key(key);
            let pos = node
                .children
                .binary_search_by(|c| self.state.order_key(c.key).cmp(&order_key));
            let idx = match pos {
                Ok(i) => i,
                Err(i) => {
                    let upper = self.state.successor(key, self.n_landmarks);
                    node.children.insert(
                        i,
                        TrieChild { key, upper, node: TrieNode::leaf() },
                    );
                    i
                }
            };
            node = &mut node.children[idx].node;
            node.count += 1;
            self.state.place(t as u32, key);
        }
        Ok(())
    }

    pub fn build(mut self) -> Result<OutcomeTrie, OutcomeError> {
        if self.root.count == 0 {
            return Err(OutcomeError::EmptyTrie);
        }
        self.root.finalize()?;
        Ok(OutcomeTrie {
            group_size: self.group_size,
            n_landmarks: self.n_landmarks,
            root: self.root,
        })
    }
}

/// Result of one biased descent.
#[derive(Debug, Clone, PartialEq)]
pub enum DescentResult {
    /// Reached a sampled leaf; `leaf_count / total` is its frequency.
    Hit { code: OutcomeCode, leaf_count: u64 },
    /// Left the sampled support at `depth`; a miss is a value, not an error.
    Miss { depth: u32 },
}

/// Comparison accounting for one descent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescentTrace {
    pub comparisons: u32,
    pub per_step: Vec<u32>,
}

enum Bound {
    NegInf,
    Val(f64),
}

impl OutcomeTrie {
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    /// Total sample count (root weight denominator).
    pub fn total(&self) -> u64 {
        self.root.count
    }

    /// Number of distinct sampled outcomes.
    pub fn leaf_count(&self) -> usize {
        fn walk(node: &TrieNode) -> usize {
            if node.children.is_empty() {
                1
            } else {
                node.children.iter().map(|c| walk(&c.node)).sum()
            }
        }
        walk(&self.root)
    }

    /// All sampled outcomes with their counts, in candidate order.
    pub fn leaves(&self) -> Vec<(OutcomeCode, u64)> {
        fn walk(node: &TrieNode, prefix: &mut Vec<PredRef>, out: &mut Vec<(OutcomeCode, u64)>) {
            if node.children.is_empty() {
                out.push((OutcomeCode(prefix.clone()), node.count));
                return;
            }
            for child in &node.children {
                prefix.push(child.key);
                walk(&child.node, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Count of one specific sampled outcome (0 when never sampled).
    pub fn count_of(&self, code: &OutcomeCode) -> u64 {
        let mut node = &self.root;
        for key in code.refs() {
            match node.children.iter().find(|c| c.key == *key) {
                Some(child) => node = &child.node,
                None => return 0,
            }
        }
        node.count
    }

    fn bound(&self, key: PredRef, values: &[f64], vlist: &VList) -> Bound {
        match key {
            PredRef::Landmark(0) => Bound::NegInf,
            PredRef::Landmark(r) => Bound::Val(vlist.value(r as usize).expect("finite landmark")),
            PredRef::Element(s) => Bound::Val(values[s as usize]),
        }
    }

    /// `key <= x` in the tie-augmented order. Landmarks and earlier elements
    /// both win ties against the probe, so this is a plain `<=` on values;
    /// the low sentinel costs no comparison.
    fn cmp_ge(&self, x: f64, key: PredRef, values: &[f64], vlist: &VList, cnt: &mut u32) -> bool {
        match self.bound(key, values, vlist) {
            Bound::NegInf => true,
            Bound::Val(v) => {
                *cnt += 1;
                v <= x
            }
        }
    }

    /// `x < fence` in the tie-augmented order (strict on values).
    fn cmp_below(&self, x: f64, fence: Fence, values: &[f64], vlist: &VList, cnt: &mut u32) -> bool {
        match fence {
            Fence::PosInf => true,
            Fence::Ref(key) => match self.bound(key, values, vlist) {
                Bound::NegInf => false,
                Bound::Val(v) => {
                    *cnt += 1;
                    x < v
                }
            },
        }
    }

    /// Weight-biased location of the child whose region contains `x`, or
    /// `None` when the true predecessor was never sampled at this node.
    fn locate(
        &self,
        node: &TrieNode,
        x: f64,
        values: &[f64],
        vlist: &VList,
        cnt: &mut u32,
    ) -> Option<usize> {
        let ch = &node.children;
        let last = ch.len() - 1;
        let mut lo = 0usize;
        let mut hi = last;
        let mut known_ge: Option<usize> = None;
        let mut known_lt: Option<usize> = None;

        // A majority child is confirmed or excluded in at most two
        // comparisons, which keeps near-deterministic steps cheap.
        if let Some(m) = node.majority {
            let m = m as usize;
            if self.cmp_ge(x, ch[m].key, values, vlist, cnt) {
                known_ge = Some(m);
                if self.cmp_below(x, ch[m].upper, values, vlist, cnt) {
                    return Some(m);
                }
                if m == last {
                    return None;
                }
                lo = m + 1;
            } else {
                known_lt = Some(m);
                if m == 0 {
                    return None;
                }
                hi = m - 1;
            }
        }

        while lo < hi {
            // Boundary nearest the midpoint of the remaining weight window.
            let target = node.cum[lo] + (node.cum[hi + 1] - node.cum[lo]) / 2;
            let mut s = lo
                + node.cum[lo + 1..=hi]
                    .partition_point(|&w| w < target);
            s = s.clamp(lo + 1, hi);
            if self.cmp_ge(x, ch[s].key, values, vlist, cnt) {
                known_ge = Some(s);
                lo = s;
            } else {
                known_lt = Some(s);
                hi = s - 1;
            }
        }

        let j = lo;
        if known_ge != Some(j) && !self.cmp_ge(x, ch[j].key, values, vlist, cnt) {
            return None;
        }
        let upper_known = match ch[j].upper {
            Fence::Ref(u) => j < last && known_lt == Some(j + 1) && ch[j + 1].key == u,
            Fence::PosInf => false,
        };
        if !upper_known && !self.cmp_below(x, ch[j].upper, values, vlist, cnt) {
            return None;
        }
        Some(j)
    }

    /// Biased descent for a fresh instance's group values. Counts one unit
    /// per three-way value comparison into the trace, per step and in total.
    pub fn descend(&self, values: &[f64], vlist: &VList, trace: &mut DescentTrace) -> DescentResult {
        debug_assert_eq!(values.len(), self.group_size);
        let mut node = &self.root;
        let mut code = Vec::with_capacity(self.group_size);
        for depth in 0..self.group_size {
            let mut step = 0u32;
            if node.children.is_empty() {
                // Possible only on malformed tries; treat as a miss.
                return DescentResult::Miss { depth: depth as u32 };
            }
            match self.locate(node, values[depth], values, vlist, &mut step) {
                Some(idx) => {
                    let child = &node.children[idx];
                    code.push(child.key);
                    node = &child.node;
                    trace.comparisons += step;
                    trace.per_step.push(step);
                }
                None => {
                    trace.comparisons += step;
                    trace.per_step.push(step);
                    return DescentResult::Miss { depth: depth as u32 };
                }
            }
        }
        DescentResult::Hit { code: OutcomeCode(code), leaf_count: node.count }
    }

    /// Nested count/key view for serialization.
    pub fn to_raw(&self) -> RawTrieNode {
        fn walk(node: &TrieNode) -> RawTrieNode {
            RawTrieNode {
                count: node.count,
                children: node.children.iter().map(|c| (c.key, walk(&c.node))).collect(),
            }
        }
        walk(&self.root)
    }

    /// Rebuilds a trie from its raw view, re-deriving fences and the search
    /// structure and validating counts, key validity, and depth.
    pub fn from_raw(
        group_size: usize,
        n_landmarks: usize,
        raw: &RawTrieNode,
    ) -> Result<Self, OutcomeError> {
        if raw.count == 0 {
            return Err(OutcomeError::EmptyTrie);
        }
        let mut state = Interleaving::new(n_landmarks, group_size);

        fn convert(
            raw: &RawTrieNode,
            depth: usize,
            group_size: usize,
            n_landmarks: usize,
            state: &mut Interleaving,
        ) -> Result<TrieNode, OutcomeError> {
            if raw.children.is_empty() {
                if depth != group_size {
                    return Err(OutcomeError::BadDepth);
                }
                return Ok(TrieNode {
                    count: raw.count,
                    children: Vec::new(),
                    cum: Vec::new(),
                    majority: None,
                });
            }
            if depth >= group_size {
                return Err(OutcomeError::BadDepth);
            }
            let mut children = Vec::with_capacity(raw.children.len());
            let mut last_order: Option<(u32, u32)> = None;
            for (key, sub) in &raw.children {
                if !state.valid_key(*key, depth, n_landmarks) {
                    return Err(OutcomeError::BadRef { position: depth });
                }
                let order = state.order_key(*key);
                if let Some(prev) = last_order {
                    if order <= prev {
                        return Err(OutcomeError::UnsortedChildren);
                    }
                }
                last_order = Some(order);
                let upper = state.successor(*key, n_landmarks);

                // Place, recurse, then undo so siblings see the same prefix.
                state.place(depth as u32, *key);
                let node = convert(sub, depth + 1, group_size, n_landmarks, state)?;
                let (r, i) = state.position_of(depth as u32);
                state.buckets[r].remove(i);
                state.elem_bucket[depth] = u32::MAX;

                children.push(TrieChild { key: *key, upper, node });
            }
            Ok(TrieNode {
                count: raw.count,
                children,
                cum: Vec::new(),
                majority: None,
            })
        }

        let mut root = convert(raw, 0, group_size, n_landmarks, &mut state)?;
        root.finalize()?;
        Ok(Self { group_size, n_landmarks, root })
    }
}

// ── Learned model ─────────────────────────────────────────────────────

/// Sizing parameters and provenance of a learned model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: u32,
    pub mu: u32,
    pub sigma: u32,
    /// Largest learned group size.
    pub n_prime: u32,
    /// Landmark merge width `ceil(log2 n)`.
    pub lambda: u32,
    /// Sampling multiplier actually applied to the full formula.
    pub rho: f64,
    /// Full sample-count formula `n' * (n*(mu+1) + n'*sigma) * lambda`.
    pub t_formula: u64,
    /// Samples actually drawn per group (`ceil(rho * t_formula)`, min 1).
    pub t_used: u64,
    /// Effective extrema budget used by the partition statistic.
    pub stat_mu: u32,
    /// Rows fed to the partition statistic.
    pub partition_rows: u32,
    pub base_seed: u64,
}

/// One learned group: its members (sorted ascending) and outcome trie.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLearned {
    pub members: Vec<u32>,
    pub trie: OutcomeTrie,
}

/// Everything the operation phase needs: the partition (via group member
/// lists), the landmark list, and one weighted trie per group.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub params: ModelParams,
    pub vlist: VList,
    pub groups: Vec<GroupLearned>,
}

impl LearnedModel {
    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    /// Member lists of all groups (the learned partition).
    pub fn partition(&self) -> Vec<Vec<u32>> {
        self.groups.iter().map(|g| g.members.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::VList;

    fn vl(landmarks: &[f64]) -> VList {
        VList::from_landmarks(landmarks.to_vec()).unwrap()
    }

    #[test]
    fn encode_examples() {
        let v = vl(&[10.0, 20.0]);
        assert_eq!(
            encode_outcome(&[12.0, 15.0], &v).refs(),
            &[PredRef::Landmark(1), PredRef::Element(0)]
        );
        assert_eq!(
            encode_outcome(&[12.0, 11.0], &v).refs(),
            &[PredRef::Landmark(1), PredRef::Landmark(1)]
        );
        assert_eq!(encode_outcome(&[5.0], &v).refs(), &[PredRef::Landmark(0)]);
    }

    #[test]
    fn encode_breaks_value_ties_by_position() {
        let v = vl(&[10.0]);
        // Equal values: the earlier element is the later one's predecessor.
        assert_eq!(
            encode_outcome(&[12.0, 12.0], &v).refs(),
            &[PredRef::Landmark(1), PredRef::Element(0)]
        );
        // Value equal to a landmark belongs to that landmark's bucket.
        assert_eq!(encode_outcome(&[10.0], &v).refs(), &[PredRef::Landmark(1)]);
    }

    #[test]
    fn decode_examples() {
        let d = decode_outcome(
            &OutcomeCode(vec![PredRef::Landmark(1), PredRef::Element(0)]),
            2,
        )
        .unwrap();
        assert_eq!(d.buckets, vec![1, 1]);
        assert_eq!(d.order, vec![0, 1]);

        let d = decode_outcome(
            &OutcomeCode(vec![PredRef::Landmark(1), PredRef::Landmark(1)]),
            2,
        )
        .unwrap();
        assert_eq!(d.buckets, vec![1, 1]);
        assert_eq!(d.order, vec![1, 0]);

        let d = decode_outcome(&OutcomeCode(vec![PredRef::Landmark(0)]), 2).unwrap();
        assert_eq!(d.buckets, vec![0]);
        assert_eq!(d.order, vec![0]);
    }

    #[test]
    fn decode_rejects_bad_refs() {
        assert_eq!(
            decode_outcome(&OutcomeCode(vec![PredRef::Element(0)]), 2),
            Err(OutcomeError::BadRef { position: 0 })
        );
        assert_eq!(
            decode_outcome(&OutcomeCode(vec![PredRef::Landmark(3)]), 2),
            Err(OutcomeError::BadRef { position: 0 })
        );
    }

    #[test]
    fn round_trip_matches_direct_computation() {
        let v = vl(&[1.0, 3.0, 3.0, 7.0]);
        let cases: &[&[f64]] = &[
            &[2.0, 5.0, 0.5, 3.0],
            &[8.0, 8.0, 8.0],
            &[0.0],
            &[3.0, 2.9999, 3.0001, 3.0],
        ];
        for values in cases {
            let code = encode_outcome(values, &v);
            let decoded = decode_outcome(&code, v.n()).unwrap();
            let buckets: Vec<u32> =
                values.iter().map(|&x| v.predecessor(x) as u32).collect();
            let mut order: Vec<u32> = (0..values.len() as u32).collect();
            order.sort_by(|&a, &b| {
                values[a as usize]
                    .total_cmp(&values[b as usize])
                    .then(a.cmp(&b))
            });
            assert_eq!(decoded.buckets, buckets, "values {values:?}");
            assert_eq!(decoded.order, order, "values {values:?}");
        }
    }

    fn build_trie(outcomes: &[(&[f64], u64)], v: &VList) -> OutcomeTrie {
        let group_size = outcomes[0].0.len();
        let mut builder = TrieBuilder::new(group_size, v.n());
        for (values, count) in outcomes {
            let code = encode_outcome(values, v);
            for _ in 0..*count {
                builder.insert(&code).unwrap();
            }
        }
        builder.build().unwrap()
    }

    #[test]
    fn single_outcome_trie_is_one_path() {
        let v = vl(&[10.0, 20.0]);
        let trie = build_trie(&[(&[12.0, 15.0], 7)], &v);
        assert_eq!(trie.total(), 7);
        assert_eq!(trie.leaf_count(), 1);
        let leaves = trie.leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].1, 7);
    }

    #[test]
    fn leaf_counts_sum_to_total() {
        let v = vl(&[10.0, 20.0, 30.0]);
        let trie = build_trie(
            &[(&[12.0, 15.0], 3), (&[12.0, 11.0], 2), (&[5.0, 35.0], 4)],
            &v,
        );
        assert_eq!(trie.total(), 9);
        let sum: u64 = trie.leaves().iter().map(|(_, c)| c).sum();
        assert_eq!(sum, 9);
        assert_eq!(trie.leaf_count(), 3);
    }

    #[test]
    fn descend_agrees_with_encode_on_sampled_outcomes() {
        let v = vl(&[10.0, 20.0, 30.0]);
        let samples: &[&[f64]] = &[
            &[12.0, 15.0, 25.0],
            &[12.0, 11.0, 25.0],
            &[5.0, 35.0, 25.0],
            &[15.0, 15.0, 15.0],
        ];
        let with_counts: Vec<(&[f64], u64)> = samples.iter().map(|s| (*s, 2u64)).collect();
        let trie = build_trie(&with_counts, &v);
        for values in samples {
            let mut trace = DescentTrace::default();
            match trie.descend(values, &v, &mut trace) {
                DescentResult::Hit { code, .. } => {
                    assert_eq!(code, encode_outcome(values, &v), "values {values:?}");
                }
                DescentResult::Miss { depth } => {
                    panic!("unexpected miss at {depth} for {values:?}")
                }
            }
        }
    }

    #[test]
    fn descend_misses_unseen_outcome() {
        let v = vl(&[10.0, 20.0]);
        let trie = build_trie(&[(&[12.0, 15.0], 5)], &v);
        let mut trace = DescentTrace::default();
        assert!(matches!(
            trie.descend(&[25.0, 15.0], &v, &mut trace),
            DescentResult::Miss { depth: 0 }
        ));
        // Same first bucket, different second predecessor: miss at depth 1.
        let mut trace = DescentTrace::default();
        assert!(matches!(
            trie.descend(&[12.0, 11.0], &v, &mut trace),
            DescentResult::Miss { depth: 1 }
        ));
    }

    #[test]
    fn single_path_descent_costs_at_most_two_per_step() {
        let v = vl(&[10.0, 20.0, 30.0, 40.0]);
        let values: &[f64] = &[12.0, 15.0, 25.0, 5.0];
        let trie = build_trie(&[(values, 10)], &v);
        let mut trace = DescentTrace::default();
        assert!(matches!(
            trie.descend(values, &v, &mut trace),
            DescentResult::Hit { .. }
        ));
        assert!(
            trace.per_step.iter().all(|&c| c <= 2),
            "per-step {:?}",
            trace.per_step
        );
    }

    #[test]
    fn raw_round_trip() {
        let v = vl(&[10.0, 20.0, 30.0]);
        let trie = build_trie(
            &[(&[12.0, 15.0], 3), (&[12.0, 11.0], 2), (&[5.0, 35.0], 4)],
            &v,
        );
        let raw = trie.to_raw();
        let rebuilt = OutcomeTrie::from_raw(2, 3, &raw).unwrap();
        assert_eq!(trie, rebuilt);
    }

    #[test]
    fn from_raw_rejects_count_mismatch() {
        let v = vl(&[10.0, 20.0]);
        let trie = build_trie(&[(&[12.0, 15.0], 3)], &v);
        let mut raw = trie.to_raw();
        raw.count = 5; // children still sum to 3
        assert_eq!(
            OutcomeTrie::from_raw(2, 2, &raw),
            Err(OutcomeError::CountMismatch)
        );
    }

    #[test]
    fn outcome_bound_formula() {
        assert_eq!(outcome_space_bound(2, 4, 1, 2), 2 * 4 * 2 + 4 * 2);
        assert_eq!(outcome_space_bound(1, 1, 0, 0), 1);
    }
}
