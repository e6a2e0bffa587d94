//! Sampling-level properties of the world model and of learned behavior on
//! structured worlds.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use selfsort_core::model::{
    generate_world_with, rat, GroupModel, HiddenSource, PiecewiseLinearFunction, Sampler,
    SourcePolicy, World, WorldSpec,
};
use selfsort_core::partition::{
    learn_partition, same_group_statistic, SampleMatrix, SearchBudget,
};
use selfsort_core::pipeline::{learn_model, LearnConfig, STREAM_EVAL};
use selfsort_core::sorter::sort_instance;

#[test]
fn monotone_functions_evaluate_monotonically() {
    // 0-extrema members: draws at increasing hidden values keep a constant
    // direction per member.
    for seed in 0..10u64 {
        let mut spec = WorldSpec::new(4, 1, 0, 4, 900 + seed);
        spec.sources = SourcePolicy::Continuous;
        let world = generate_world_with(&spec).unwrap();
        let group = &world.groups[0];
        for f in &group.functions {
            let steps = 32;
            let mut last = None;
            let mut dir = 0i8;
            for k in 0..=steps {
                let z = rat(k, steps);
                let y = f.eval(&z).unwrap();
                if let Some(prev) = last {
                    let step_dir = if y > prev { 1 } else if y < prev { -1 } else { 0 };
                    if step_dir != 0 {
                        assert!(
                            dir == 0 || dir == step_dir,
                            "direction flipped for a 0-extrema function (seed {seed})"
                        );
                        dir = step_dir;
                    }
                }
                last = Some(y);
            }
        }
    }
}

#[test]
fn discrete_group_yields_at_most_k_value_tuples() {
    let mut spec = WorldSpec::new(6, 2, 1, 2, 77);
    spec.sources = SourcePolicy::Discrete { atoms: 5 };
    let world = generate_world_with(&spec).unwrap();
    let sampler = Sampler::new(&world).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let mut tuples: Vec<std::collections::BTreeSet<Vec<u64>>> =
        vec![Default::default(); world.groups.len()];
    for _ in 0..400 {
        let inst = sampler.draw(&mut rng);
        for (k, group) in world.groups.iter().enumerate() {
            let tuple: Vec<u64> = group
                .members
                .iter()
                .map(|&m| inst.values[m as usize].to_bits())
                .collect();
            tuples[k].insert(tuple);
        }
    }
    for set in tuples {
        assert!(set.len() <= 5, "discrete source with 5 atoms gave {} tuples", set.len());
    }
}

#[test]
fn tent_pair_statistic_stays_within_three() {
    // One extremum in the second member: the statistic over any sample set
    // must stay within 2*mu + 1 = 3.
    let identity =
        PiecewiseLinearFunction::new(vec![(rat(0, 1), rat(0, 1)), (rat(1, 1), rat(1, 1))]).unwrap();
    let tent = PiecewiseLinearFunction::new(vec![
        (rat(0, 1), rat(0, 1)),
        (rat(1, 2), rat(1, 1)),
        (rat(1, 1), rat(0, 1)),
    ])
    .unwrap();
    let world = World {
        n: 2,
        mu: 1,
        sigma: 2,
        seed: 0,
        groups: vec![GroupModel {
            members: vec![0, 1],
            functions: vec![identity, tent],
            source: HiddenSource::ContinuousUniform { lo: rat(0, 1), hi: rat(1, 1) },
        }],
    };
    let sampler = Sampler::new(&world).unwrap();
    for seed in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..16).map(|_| sampler.draw(&mut rng).values).collect();
        let samples = SampleMatrix::new(2, rows).unwrap();
        let stat = same_group_statistic(&samples, 0, 1, &SearchBudget::default()).unwrap();
        assert!(stat <= 3, "tent-pair statistic {stat} above 3 at seed {seed}");
    }
}

#[test]
fn single_group_world_learns_one_group() {
    let mut spec = WorldSpec::new(6, 1, 2, 3, 13);
    spec.sources = SourcePolicy::Continuous;
    let world = generate_world_with(&spec).unwrap();
    let sampler = Sampler::new(&world).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let rows: Vec<Vec<f64>> = (0..81).map(|_| sampler.draw(&mut rng).values).collect();
    let samples = SampleMatrix::new(6, rows).unwrap();
    let result = learn_partition(&samples, 3, &SearchBudget::default()).unwrap();
    assert_eq!(result.groups, vec![(0..6).collect::<Vec<u32>>()]);
}

#[test]
fn point_mass_world_sorts_fast_and_cheap() {
    // Deterministic sources: after learning, every group outcome is the
    // sampled one, so descents always hit and total comparisons stay linear.
    let mut spec = WorldSpec::new(16, 4, 1, 2, 31);
    spec.sources = SourcePolicy::PointMass;
    let world = generate_world_with(&spec).unwrap();
    let (model, _) = learn_model(&world, 5, &LearnConfig::default()).unwrap();
    let sampler = Sampler::new(&world).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    rng.set_stream(STREAM_EVAL);
    for seq in 0..50 {
        let inst = sampler.draw(&mut rng);
        let result = sort_instance(&model, &inst, seq).unwrap();
        assert_eq!(result.report.fallback_groups, 0, "point mass must never miss");
        assert!(
            result.report.total_comparisons() <= 4 * 16,
            "zero-entropy world should sort in O(n) comparisons, got {}",
            result.report.total_comparisons()
        );
    }
}

#[test]
fn fully_sampled_discrete_world_has_no_fallbacks() {
    // Small atom grid at rho = 1: the trie sees every outcome during
    // learning, so the unseen mass is zero and no eval run falls back.
    let mut spec = WorldSpec::new(8, 2, 1, 1, 19);
    spec.sources = SourcePolicy::Discrete { atoms: 4 };
    let world = generate_world_with(&spec).unwrap();
    let (model, _) = learn_model(&world, 23, &LearnConfig::default()).unwrap();
    let sampler = Sampler::new(&world).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(29);
    rng.set_stream(STREAM_EVAL);
    for seq in 0..200 {
        let inst = sampler.draw(&mut rng);
        let result = sort_instance(&model, &inst, seq).unwrap();
        assert_eq!(result.report.fallback_groups, 0);
    }
}

#[test]
fn two_equiprobable_outcomes_balance_in_the_trie() {
    use selfsort_core::landmarks::VList;
    use selfsort_core::outcome::{encode_outcome, TrieBuilder};

    // f(z) = z over two atoms straddling the landmark: two outcomes at
    // probability 1/2 each. With 1000 samples the leaf frequencies must sit
    // within 0.5 +- 0.05.
    let f = PiecewiseLinearFunction::new(vec![(rat(0, 1), rat(0, 1)), (rat(1, 1), rat(1, 1))])
        .unwrap();
    let world = World {
        n: 1,
        mu: 0,
        sigma: 0,
        seed: 0,
        groups: vec![GroupModel {
            members: vec![0],
            functions: vec![f],
            source: HiddenSource::DiscreteUniform { atoms: vec![rat(1, 4), rat(3, 4)] },
        }],
    };
    let vlist = VList::from_landmarks(vec![0.5]).unwrap();
    let sampler = Sampler::new(&world).unwrap();
    for seed in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut builder = TrieBuilder::new(1, 1);
        for _ in 0..1000 {
            let inst = sampler.draw(&mut rng);
            builder.insert(&encode_outcome(&inst.values, &vlist)).unwrap();
        }
        let trie = builder.build().unwrap();
        assert_eq!(trie.leaf_count(), 2);
        for (_, count) in trie.leaves() {
            let q = count as f64 / 1000.0;
            assert!((q - 0.5).abs() <= 0.05, "seed {seed}: q = {q}");
        }
    }
}

#[test]
fn bucket_sublists_never_exceed_group_count() {
    let mut spec = WorldSpec::new(12, 3, 1, 2, 47);
    spec.sources = SourcePolicy::Mixed;
    let world = generate_world_with(&spec).unwrap();
    let cfg = LearnConfig { rho: 0.3, ..LearnConfig::default() };
    let (model, _) = learn_model(&world, 53, &cfg).unwrap();
    let groups = model.groups.len() as u32;
    let sampler = Sampler::new(&world).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(59);
    rng.set_stream(STREAM_EVAL);
    for seq in 0..100 {
        let inst = sampler.draw(&mut rng);
        let result = sort_instance(&model, &inst, seq).unwrap();
        assert!(result.report.bucket_sublists.iter().all(|&c| c <= groups));
    }
}
