//! Learning pipeline: partition discovery, landmark construction, and
//! outcome-distribution sampling, phase by phase.
//!
//! Phase order is forced by the sizing rule: the per-group sample count
//! formula needs the largest group size, which is only known after the
//! partition phase. Each phase consumes fresh instances; with a world in
//! hand they come from independent seeded streams, and with a recorded
//! instance list they are consumed sequentially.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // Float supplies ceil on no_std builds
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::landmarks::{lambda, VList, VListError};
use crate::model::{Instance, Sampler, World, WorldError};
use crate::outcome::{
    encode_outcome, GroupLearned, LearnedModel, ModelParams, OutcomeError, TrieBuilder,
};
use crate::partition::{
    learn_partition, learn_partition_with_matrix, PartitionError, PartitionResult, SampleMatrix,
    SearchBudget,
};

/// Stream ids for the per-phase instance draws.
pub const STREAM_PARTITION: u64 = 1;
pub const STREAM_VLIST: u64 = 2;
pub const STREAM_TRIE: u64 = 3;
/// Stream id conventionally used by callers for post-learning evaluation.
pub const STREAM_EVAL: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    Partition(PartitionError),
    Landmarks(VListError),
    World(WorldError),
    Outcome(OutcomeError),
    /// A recorded instance stream ran out; `needed` counts the whole phase.
    InsufficientInstances { phase: &'static str, needed: usize, available: usize },
    BadConfig(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Partition(e) => write!(f, "partition learning: {e}"),
            PipelineError::Landmarks(e) => write!(f, "landmark construction: {e}"),
            PipelineError::World(e) => write!(f, "world: {e}"),
            PipelineError::Outcome(e) => write!(f, "outcome learning: {e}"),
            PipelineError::InsufficientInstances { phase, needed, available } => write!(
                f,
                "recorded stream too short for the {phase} phase: needs {needed} more \
                 instances, {available} left"
            ),
            PipelineError::BadConfig(msg) => write!(f, "bad learning config: {msg}"),
        }
    }
}

impl From<PartitionError> for PipelineError {
    fn from(e: PartitionError) -> Self {
        PipelineError::Partition(e)
    }
}
impl From<VListError> for PipelineError {
    fn from(e: VListError) -> Self {
        PipelineError::Landmarks(e)
    }
}
impl From<WorldError> for PipelineError {
    fn from(e: WorldError) -> Self {
        PipelineError::World(e)
    }
}
impl From<OutcomeError> for PipelineError {
    fn from(e: OutcomeError) -> Self {
        PipelineError::Outcome(e)
    }
}

/// Learning-phase knobs. Defaults follow the sizing rules; `rho` scales the
/// outcome-sampling count for runs where the full formula is impractical.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    /// Extrema budget used by the partition statistic. Defaults to
    /// `max(mu, 3)`: below that the `mu^4`-row statistic cannot clear its
    /// own threshold, so small-mu worlds borrow the mu = 3 sizing.
    pub stat_mu: Option<u32>,
    /// Rows for the partition statistic; defaults to `stat_mu^4`.
    pub partition_rows: Option<usize>,
    /// Record the capped pairwise statistic matrix for diagnostics.
    pub partition_matrix: bool,
    /// Landmark merge width; defaults to `ceil(log2 n)`.
    pub lambda_override: Option<usize>,
    /// Outcome-sampling multiplier in (0, 1].
    pub rho: f64,
    /// Hard override of the per-group sample count.
    pub t_override: Option<u64>,
    pub budget: SearchBudget,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            stat_mu: None,
            partition_rows: None,
            partition_matrix: false,
            lambda_override: None,
            rho: 1.0,
            t_override: None,
            budget: SearchBudget::default(),
        }
    }
}

enum InstanceSource<'a> {
    Drawn { sampler: Sampler, seed: u64 },
    Recorded { items: &'a [Instance], cursor: usize },
}

impl<'a> InstanceSource<'a> {
    /// All instances for one phase. Drawn phases use independent streams so
    /// phase sizes never perturb each other.
    fn take(
        &mut self,
        phase: &'static str,
        stream: u64,
        count: usize,
    ) -> Result<Vec<Instance>, PipelineError> {
        match self {
            InstanceSource::Drawn { sampler, seed } => {
                let mut rng = ChaCha12Rng::seed_from_u64(*seed);
                rng.set_stream(stream);
                Ok((0..count).map(|_| sampler.draw(&mut rng)).collect())
            }
            InstanceSource::Recorded { items, cursor } => {
                let available = items.len() - *cursor;
                if available < count {
                    return Err(PipelineError::InsufficientInstances {
                        phase,
                        needed: count - available,
                        available,
                    });
                }
                let batch = items[*cursor..*cursor + count].to_vec();
                *cursor += count;
                Ok(batch)
            }
        }
    }
}

/// Learns a model by drawing fresh instances from the world.
pub fn learn_model(
    world: &World,
    seed: u64,
    cfg: &LearnConfig,
) -> Result<(LearnedModel, PartitionResult), PipelineError> {
    let source = InstanceSource::Drawn { sampler: Sampler::new(world)?, seed };
    run_phases(world.n as usize, world.mu, world.sigma, seed, cfg, source)
}

/// Learns a model from a recorded instance stream (consumed sequentially:
/// partition rows, then landmark instances, then outcome samples).
pub fn learn_model_from_instances(
    n: usize,
    mu: u32,
    sigma: u32,
    instances: &[Instance],
    cfg: &LearnConfig,
) -> Result<(LearnedModel, PartitionResult), PipelineError> {
    for inst in instances {
        if inst.values.len() != n {
            return Err(PipelineError::BadConfig(alloc::format!(
                "recorded instance has {} values, expected {n}",
                inst.values.len()
            )));
        }
    }
    let source = InstanceSource::Recorded { items: instances, cursor: 0 };
    run_phases(n, mu, sigma, 0, cfg, source)
}

fn run_phases(
    n: usize,
    mu: u32,
    sigma: u32,
    seed: u64,
    cfg: &LearnConfig,
    mut source: InstanceSource<'_>,
) -> Result<(LearnedModel, PartitionResult), PipelineError> {
    if !(cfg.rho > 0.0 && cfg.rho <= 1.0) {
        return Err(PipelineError::BadConfig(String::from("rho must be in (0, 1]")));
    }
    if n == 0 {
        return Err(PipelineError::BadConfig(String::from("n must be positive")));
    }
    let stat_mu = cfg.stat_mu.unwrap_or(mu.max(3));
    let rows = cfg.partition_rows.unwrap_or((stat_mu as usize).pow(4).max(1));

    // Phase 1: hidden partition.
    let batch = source.take("partition", STREAM_PARTITION, rows)?;
    let matrix = SampleMatrix::new(n, batch.into_iter().map(|i| i.values).collect())?;
    let partition = if cfg.partition_matrix {
        learn_partition_with_matrix(&matrix, stat_mu, &cfg.budget)?
    } else {
        learn_partition(&matrix, stat_mu, &cfg.budget)?
    };

    // Phase 2: landmark list.
    let lam = cfg.lambda_override.unwrap_or_else(|| lambda(n));
    let batch = source.take("landmarks", STREAM_VLIST, lam)?;
    let vlist = VList::build_with(&batch, n, lam)?;

    // Phase 3: outcome distributions, sized by the largest learned group.
    let n_prime = partition.groups.iter().map(|g| g.len()).max().unwrap_or(1);
    let t_formula = (n_prime as u64)
        * ((n as u64) * (mu as u64 + 1) + (n_prime as u64) * sigma as u64)
        * lam as u64;
    let t_used = cfg
        .t_override
        .unwrap_or_else(|| ((cfg.rho * t_formula as f64).ceil() as u64).max(1));

    let mut builders: Vec<TrieBuilder> = partition
        .groups
        .iter()
        .map(|g| TrieBuilder::new(g.len(), vlist.n()))
        .collect();
    let batch = source.take("outcome sampling", STREAM_TRIE, t_used as usize)?;
    let mut group_values: Vec<f64> = Vec::new();
    for inst in &batch {
        for (g, members) in partition.groups.iter().enumerate() {
            group_values.clear();
            group_values.extend(members.iter().map(|&m| inst.values[m as usize]));
            builders[g].insert(&encode_outcome(&group_values, &vlist))?;
        }
    }
    let groups = partition
        .groups
        .iter()
        .zip(builders)
        .map(|(members, b)| {
            Ok(GroupLearned { members: members.clone(), trie: b.build()? })
        })
        .collect::<Result<Vec<_>, OutcomeError>>()?;

    let model = LearnedModel {
        params: ModelParams {
            n: n as u32,
            mu,
            sigma,
            n_prime: n_prime as u32,
            lambda: lam as u32,
            rho: cfg.rho,
            t_formula,
            t_used,
            stat_mu,
            partition_rows: rows as u32,
            base_seed: seed,
        },
        vlist,
        groups,
    };
    Ok((model, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_world_with, SourcePolicy, WorldSpec};
    use crate::sorter::sort_instance;
    use crate::oracle::reference_sort;
    use rand::SeedableRng;

    fn quick_cfg() -> LearnConfig {
        LearnConfig { rho: 0.25, ..LearnConfig::default() }
    }

    #[test]
    fn deterministic_world_learns_single_path_tries() {
        let mut spec = WorldSpec::new(6, 2, 1, 2, 5);
        spec.sources = SourcePolicy::PointMass;
        let world = generate_world_with(&spec).unwrap();
        let (model, _) = learn_model(&world, 42, &quick_cfg()).unwrap();
        for g in &model.groups {
            assert_eq!(g.trie.leaf_count(), 1, "point-mass group must have one outcome");
        }
    }

    #[test]
    fn same_seed_same_model() {
        let world = generate_world_with(&WorldSpec::new(8, 3, 1, 2, 9)).unwrap();
        let a = learn_model(&world, 7, &quick_cfg()).unwrap();
        let b = learn_model(&world, 7, &quick_cfg()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn learned_partition_is_a_partition() {
        let world = generate_world_with(&WorldSpec::new(10, 4, 2, 3, 3)).unwrap();
        let (model, partition) = learn_model(&world, 11, &quick_cfg()).unwrap();
        let mut all: Vec<u32> = partition.groups.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(model.partition(), partition.groups);
    }

    #[test]
    fn recorded_stream_shortfall_is_reported() {
        let world = generate_world_with(&WorldSpec::new(4, 2, 0, 1, 1)).unwrap();
        let sampler = Sampler::new(&world).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        // Enough for the partition phase (81) plus landmarks (2), then dry.
        let instances: Vec<Instance> = (0..83).map(|_| sampler.draw(&mut rng)).collect();
        let err = learn_model_from_instances(4, 0, 1, &instances, &LearnConfig::default())
            .unwrap_err();
        match err {
            PipelineError::InsufficientInstances { phase, needed, available } => {
                assert_eq!(phase, "outcome sampling");
                assert_eq!(available, 0);
                assert!(needed > 0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn learned_model_sorts_correctly_end_to_end() {
        let world = generate_world_with(&WorldSpec::new(12, 3, 2, 3, 21)).unwrap();
        let (model, _) = learn_model(&world, 77, &quick_cfg()).unwrap();
        let sampler = Sampler::new(&world).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1000);
        rng.set_stream(STREAM_EVAL);
        for seq in 0..50 {
            let inst = sampler.draw(&mut rng);
            let result = sort_instance(&model, &inst, seq).unwrap();
            assert_eq!(result.ranks, reference_sort(&inst.values));
        }
    }

    #[test]
    fn rho_scales_sample_count() {
        let world = generate_world_with(&WorldSpec::new(6, 3, 1, 1, 2)).unwrap();
        let full = learn_model(&world, 1, &LearnConfig::default()).unwrap().0;
        let quarter = learn_model(&world, 1, &quick_cfg()).unwrap().0;
        assert_eq!(full.params.t_used, full.params.t_formula);
        assert!(quarter.params.t_used < full.params.t_used);
        assert!(quarter.params.t_used >= 1);
    }

    #[test]
    fn bad_rho_rejected() {
        let world = generate_world_with(&WorldSpec::new(4, 1, 0, 0, 0)).unwrap();
        let cfg = LearnConfig { rho: 0.0, ..LearnConfig::default() };
        assert!(matches!(
            learn_model(&world, 0, &cfg),
            Err(PipelineError::BadConfig(_))
        ));
    }
}
