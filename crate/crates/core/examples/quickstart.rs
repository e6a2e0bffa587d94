//! Minimal library walkthrough: generate a world, learn its structure,
//! sort fresh instances, and print the comparison accounting.
//!
//! Run with `cargo run --release -p selfsort-core --example quickstart`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use selfsort_core::model::{generate_world_with, Sampler, SourcePolicy, WorldSpec};
use selfsort_core::oracle::reference_sort;
use selfsort_core::pipeline::{learn_model, LearnConfig, STREAM_EVAL};
use selfsort_core::sorter::sort_instance;
use selfsort_core::stats::plugin_entropy;

fn main() {
    // A 16-element world: 4 hidden groups with continuous sources, at most
    // 1 extremum per member function, at most 2 intersections per
    // same-group pair.
    let mut spec = WorldSpec::new(16, 4, 1, 2, 42);
    spec.sources = SourcePolicy::Continuous;
    let world = generate_world_with(&spec).expect("world generates");
    let (model, partition) =
        learn_model(&world, 7, &LearnConfig::default()).expect("learning succeeds");
    println!("true partition:    {:?}", world.partition());
    println!("learned partition: {:?}", partition.groups);
    println!(
        "landmarks: {} values, outcome samples per group: {}",
        model.vlist.n(),
        model.params.t_used
    );

    let sampler = Sampler::new(&world).expect("sampler");
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    rng.set_stream(STREAM_EVAL);

    let mut total = 0u64;
    let mut fast = 0u32;
    let mut groups = 0u32;
    let runs = 200;
    for seq in 0..runs {
        let inst = sampler.draw(&mut rng);
        let result = sort_instance(&model, &inst, seq).expect("sort succeeds");
        assert_eq!(result.ranks, reference_sort(&inst.values));
        total += result.report.total_comparisons();
        fast += result.report.fast_groups;
        groups += result.report.fast_groups + result.report.fallback_groups;
    }

    let outcome_entropy: f64 = model
        .groups
        .iter()
        .map(|g| {
            let counts: Vec<u64> = g.trie.leaves().iter().map(|(_, c)| *c).collect();
            plugin_entropy(&counts).map(|e| e.bits).unwrap_or(0.0)
        })
        .sum();
    println!(
        "{runs} instances sorted: mean comparisons {:.1} (n=16, outcome entropy {:.1} bits), \
         trie hit rate {:.1}%",
        total as f64 / runs as f64,
        outcome_entropy,
        100.0 * fast as f64 / groups as f64
    );
}
