//! Independent brute-force references used by tests, the benchmark
//! cross-check, and the exact-entropy diagnostics. Deliberately naive and
//! kept free of any code shared with the fast paths they certify.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::landmarks::VList;
use crate::model::{World, WorldError};
use crate::outcome::{encode_outcome, OutcomeCode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// Input longer than the configured exhaustive-search cap.
    CapExceeded { cap: usize, len: usize },
    /// Joint atom budget exceeded for enumeration.
    BudgetExceeded { budget: u64 },
    /// Enumeration needs discrete sources.
    NotEnumerable,
    World(WorldError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::CapExceeded { cap, len } => {
                write!(f, "sequence length {len} exceeds exhaustive cap {cap}")
            }
            OracleError::BudgetExceeded { budget } => {
                write!(f, "joint atom count exceeds enumeration budget {budget}")
            }
            OracleError::NotEnumerable => write!(f, "world has non-discrete sources"),
            OracleError::World(e) => write!(f, "{e}"),
        }
    }
}

impl From<WorldError> for OracleError {
    fn from(e: WorldError) -> Self {
        OracleError::World(e)
    }
}

/// Size caps for the exhaustive references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Longest sequence the assignment search will accept.
    pub partition_cap: usize,
    /// Largest joint atom count the ranking enumeration will accept.
    pub enumeration_budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { partition_cap: 12, enumeration_budget: 1_000_000 }
    }
}

impl OracleConfig {
    pub fn monotone_partition(&self, seq: &[f64]) -> Result<usize, OracleError> {
        exhaustive_monotone_partition(seq, self.partition_cap)
    }

    pub fn rankings(&self, world: &World) -> Result<RankingAtlas, OracleError> {
        enumerate_rankings(world, self.enumeration_budget)
    }
}

/// Ranks (1-based) of the values under the (value, position) total order:
/// the canonical sort every fast path must reproduce.
pub fn reference_sort(values: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_by(|&a, &b| {
        values[a as usize]
            .total_cmp(&values[b as usize])
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0u32; values.len()];
    for (rank, &pos) in order.iter().enumerate() {
        ranks[pos as usize] = rank as u32 + 1;
    }
    ranks
}

/// Exhaustive minimum monotone cover: tries every assignment of elements to
/// labeled chains, checking chain monotonicity from scratch on each step.
/// Only the first unused chain may be opened, which removes chain-label
/// symmetry but nothing else.
pub fn exhaustive_monotone_partition(seq: &[f64], cap: usize) -> Result<usize, OracleError> {
    if seq.len() > cap {
        return Err(OracleError::CapExceeded { cap, len: seq.len() });
    }
    if seq.is_empty() {
        return Ok(0);
    }

    fn is_monotone(chain: &[f64]) -> bool {
        chain.windows(2).all(|w| w[0] <= w[1]) || chain.windows(2).all(|w| w[0] >= w[1])
    }

    fn assign(seq: &[f64], t: usize, chains: &mut Vec<Vec<f64>>, d: usize) -> bool {
        if t == seq.len() {
            return true;
        }
        let used = chains.len();
        for c in 0..used.min(d) {
            chains[c].push(seq[t]);
            if is_monotone(&chains[c]) && assign(seq, t + 1, chains, d) {
                return true;
            }
            chains[c].pop();
        }
        if used < d {
            chains.push(vec![seq[t]]);
            if assign(seq, t + 1, chains, d) {
                return true;
            }
            chains.pop();
        }
        false
    }

    for d in 1..=seq.len() {
        if assign(seq, 0, &mut Vec::new(), d) {
            return Ok(d);
        }
    }
    unreachable!("one chain per element always covers");
}

/// Exact outcome distribution of one discrete-source group: every atom is
/// pushed through the definitional encoding, so probabilities are counts
/// over the atom total.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAtlas {
    /// Distinct outcomes in code order.
    pub codes: Vec<OutcomeCode>,
    /// Atoms mapping to each outcome (`counts[i] / atom_total` is exact).
    pub counts: Vec<u64>,
    /// Outcome index of each atom.
    pub atom_outcome: Vec<u32>,
    pub atom_total: u64,
}

impl OutcomeAtlas {
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.atom_total as f64)
            .collect()
    }
}

/// Enumerates all atoms of a discrete-source group against a landmark list.
pub fn enumerate_outcomes(
    world: &World,
    group: usize,
    vlist: &VList,
) -> Result<OutcomeAtlas, OracleError> {
    let g = &world.groups[group];
    if g.source.atom_count().is_none() {
        return Err(OracleError::NotEnumerable);
    }
    let table = g.atom_values()?;
    let mut index: BTreeMap<OutcomeCode, u32> = BTreeMap::new();
    let mut codes = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut atom_outcome = Vec::with_capacity(table.len());
    for values in &table {
        let code = encode_outcome(values, vlist);
        let id = *index.entry(code.clone()).or_insert_with(|| {
            codes.push(code.clone());
            counts.push(0);
            codes.len() as u32 - 1
        });
        counts[id as usize] += 1;
        atom_outcome.push(id);
    }
    Ok(OutcomeAtlas { codes, counts, atom_outcome, atom_total: table.len() as u64 })
}

/// Exact distribution of the full output ranking for an all-discrete world:
/// one reference sort per joint atom combination.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingAtlas {
    /// Occurrence count per distinct ranking, in ranking order.
    pub counts: Vec<u64>,
    pub joint_total: u64,
}

/// Enumerates the product of all group atom grids, up to `budget` joint
/// combinations.
pub fn enumerate_rankings(world: &World, budget: u64) -> Result<RankingAtlas, OracleError> {
    let mut joint: u64 = 1;
    for g in &world.groups {
        let k = g.source.atom_count().ok_or(OracleError::NotEnumerable)? as u64;
        joint = joint.saturating_mul(k);
        if joint > budget {
            return Err(OracleError::BudgetExceeded { budget });
        }
    }
    let tables: Vec<Vec<Vec<f64>>> = world
        .groups
        .iter()
        .map(|g| g.atom_values())
        .collect::<Result<_, _>>()?;

    let n = world.n as usize;
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut atom_idx = vec![0usize; world.groups.len()];
    let mut values = vec![0.0f64; n];
    loop {
        for (k, g) in world.groups.iter().enumerate() {
            let row = &tables[k][atom_idx[k]];
            for (i, &m) in g.members.iter().enumerate() {
                values[m as usize] = row[i];
            }
        }
        *counts.entry(reference_sort(&values)).or_insert(0) += 1;

        // Odometer over the per-group atom indices.
        let mut k = 0;
        loop {
            if k == atom_idx.len() {
                return Ok(RankingAtlas {
                    counts: counts.into_values().collect(),
                    joint_total: joint,
                });
            }
            atom_idx[k] += 1;
            if atom_idx[k] < tables[k].len() {
                break;
            }
            atom_idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rat, GroupModel, HiddenSource, PiecewiseLinearFunction, World};

    #[test]
    fn reference_sort_examples() {
        assert_eq!(reference_sort(&[3.0, 1.0, 2.0]), vec![3, 1, 2]);
        assert_eq!(reference_sort(&[]), Vec::<u32>::new());
        assert_eq!(reference_sort(&[5.0, 5.0]), vec![1, 2]);
    }

    #[test]
    fn exhaustive_partition_examples() {
        assert_eq!(exhaustive_monotone_partition(&[2.0, 1.0, 3.0], 12).unwrap(), 2);
        assert_eq!(exhaustive_monotone_partition(&[1.0, 2.0, 3.0], 12).unwrap(), 1);
        assert_eq!(exhaustive_monotone_partition(&[3.0, 1.0, 4.0, 2.0], 12).unwrap(), 2);
        assert_eq!(exhaustive_monotone_partition(&[], 12).unwrap(), 0);
        assert!(matches!(
            exhaustive_monotone_partition(&[0.0; 13], 12),
            Err(OracleError::CapExceeded { .. })
        ));
    }

    fn line(a: i64, b: i64) -> PiecewiseLinearFunction {
        // y = a + (b - a) * z on [0, 1]
        PiecewiseLinearFunction::new(vec![(rat(0, 1), rat(a, 1)), (rat(1, 1), rat(b, 1))]).unwrap()
    }

    fn discrete_world(atoms: &[(i64, i64)], functions: Vec<PiecewiseLinearFunction>) -> World {
        let n = functions.len() as u32;
        World {
            n,
            mu: 0,
            sigma: 1,
            seed: 0,
            groups: vec![GroupModel {
                members: (0..n).collect(),
                functions,
                source: HiddenSource::DiscreteUniform {
                    atoms: atoms.iter().map(|&(p, q)| rat(p, q)).collect(),
                },
            }],
        }
    }

    #[test]
    fn enumerate_point_mass_single_outcome() {
        let world = discrete_world(&[(1, 2)], vec![line(0, 1)]);
        let v = VList::from_landmarks(vec![0.25]).unwrap();
        let atlas = enumerate_outcomes(&world, 0, &v).unwrap();
        assert_eq!(atlas.codes.len(), 1);
        assert_eq!(atlas.probabilities(), vec![1.0]);
    }

    #[test]
    fn enumerate_distinct_atoms_distinct_outcomes() {
        // Two atoms land in different buckets of V = (-inf, 0.5, +inf).
        let world = discrete_world(&[(1, 4), (3, 4)], vec![line(0, 1)]);
        let v = VList::from_landmarks(vec![0.5]).unwrap();
        let atlas = enumerate_outcomes(&world, 0, &v).unwrap();
        assert_eq!(atlas.codes.len(), 2);
        assert_eq!(atlas.counts, vec![1, 1]);
        assert_eq!(atlas.atom_outcome.len(), 2);
    }

    #[test]
    fn enumerate_collisions_collapse() {
        // Both atoms stay in the low bucket: one outcome despite two atoms.
        let world = discrete_world(&[(1, 8), (2, 8)], vec![line(0, 1)]);
        let v = VList::from_landmarks(vec![0.5]).unwrap();
        let atlas = enumerate_outcomes(&world, 0, &v).unwrap();
        assert_eq!(atlas.codes.len(), 1);
        assert_eq!(atlas.counts, vec![2]);
    }

    #[test]
    fn ranking_atlas_deterministic_world() {
        let world = discrete_world(&[(1, 2)], vec![line(0, 1), line(2, 3)]);
        let atlas = enumerate_rankings(&world, 1_000_000).unwrap();
        assert_eq!(atlas.counts, vec![1]);
        assert_eq!(atlas.joint_total, 1);
    }

    #[test]
    fn ranking_atlas_budget() {
        let world = discrete_world(&[(1, 4), (2, 4), (3, 4)], vec![line(0, 1)]);
        assert!(matches!(
            enumerate_rankings(&world, 2),
            Err(OracleError::BudgetExceeded { budget: 2 })
        ));
    }
}
