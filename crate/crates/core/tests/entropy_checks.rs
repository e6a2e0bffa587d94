//! Exact-entropy behavior on small constructed worlds.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use selfsort_core::landmarks::VList;
use selfsort_core::model::{rat, GroupModel, HiddenSource, PiecewiseLinearFunction, Sampler, World};
use selfsort_core::oracle::enumerate_outcomes;
use selfsort_core::outcome::encode_outcome;
use selfsort_core::stats::{exact_outcome_entropy, exact_ranking_entropy, plugin_entropy};

fn line(a: i64, b: i64) -> PiecewiseLinearFunction {
    PiecewiseLinearFunction::new(vec![(rat(0, 1), rat(a, 1)), (rat(1, 1), rat(b, 1))]).unwrap()
}

fn scaled_line(a: (i64, i64), b: (i64, i64)) -> PiecewiseLinearFunction {
    PiecewiseLinearFunction::new(vec![(rat(0, 1), rat(a.0, a.1)), (rat(1, 1), rat(b.0, b.1))])
        .unwrap()
}

fn one_group(n0: u32, functions: Vec<PiecewiseLinearFunction>, atoms: Vec<(i64, i64)>) -> GroupModel {
    let n = functions.len() as u32;
    GroupModel {
        members: (n0..n0 + n).collect(),
        functions,
        source: HiddenSource::DiscreteUniform {
            atoms: atoms.into_iter().map(|(p, q)| rat(p, q)).collect(),
        },
    }
}

#[test]
fn point_mass_group_has_zero_outcome_entropy() {
    let world = World {
        n: 2,
        mu: 0,
        sigma: 1,
        seed: 0,
        groups: vec![one_group(0, vec![line(0, 1), line(1, 2)], vec![(1, 2)])],
    };
    let v = VList::from_landmarks(vec![0.5, 1.5]).unwrap();
    assert_eq!(exact_outcome_entropy(&world, 0, &v).unwrap(), 0.0);
    assert_eq!(exact_ranking_entropy(&world, 1000).unwrap(), 0.0);
}

#[test]
fn two_equiprobable_distinct_outcomes_give_one_bit() {
    // f(z) = z with atoms 1/4 and 3/4 against a landmark at 1/2.
    let world = World {
        n: 1,
        mu: 0,
        sigma: 0,
        seed: 0,
        groups: vec![one_group(0, vec![line(0, 1)], vec![(1, 4), (3, 4)])],
    };
    let v = VList::from_landmarks(vec![0.5]).unwrap();
    assert!((exact_outcome_entropy(&world, 0, &v).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn colliding_atoms_lower_entropy_to_enumerated_value() {
    // Eight atoms collapse onto two outcomes around the landmark at 3/8:
    // values 0..2/8 fall below it, 3/8..7/8 sit at or above it.
    let atoms: Vec<(i64, i64)> = (0..8).map(|k| (k, 8)).collect();
    let world = World {
        n: 1,
        mu: 0,
        sigma: 0,
        seed: 0,
        groups: vec![one_group(0, vec![line(0, 1)], atoms)],
    };
    let v = VList::from_landmarks(vec![0.375]).unwrap();
    let atlas = enumerate_outcomes(&world, 0, &v).unwrap();
    assert_eq!(atlas.codes.len(), 2);
    assert_eq!(atlas.counts, vec![3, 5]);
    let direct = plugin_entropy(&atlas.counts).unwrap().bits;
    let expected = -(3.0f64 / 8.0) * (3.0f64 / 8.0).log2() - (5.0f64 / 8.0) * (5.0f64 / 8.0).log2();
    assert!((direct - expected).abs() < 1e-12);
    assert!((exact_outcome_entropy(&world, 0, &v).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn ranking_entropy_can_be_zero_while_outcome_entropies_are_not() {
    // Two independent binary groups in disjoint value ranges: the output
    // ranking never changes, but each group's outcome still varies against
    // landmarks placed inside the ranges.
    let world = World {
        n: 2,
        mu: 0,
        sigma: 0,
        seed: 0,
        groups: vec![
            one_group(0, vec![scaled_line((0, 1), (1, 4))], vec![(1, 8), (7, 8)]),
            one_group(1, vec![scaled_line((3, 4), (1, 1))], vec![(1, 8), (7, 8)]),
        ],
    };
    let v = VList::from_landmarks(vec![0.125, 0.8]).unwrap();
    assert_eq!(exact_ranking_entropy(&world, 1000).unwrap(), 0.0);
    let sum: f64 = (0..2)
        .map(|g| exact_outcome_entropy(&world, g, &v).unwrap())
        .sum();
    assert!(sum > 1.9, "outcome entropies should stay positive, got {sum}");
}

#[test]
fn plugin_entropy_converges_to_exact_on_discrete_worlds() {
    // K = 8 atoms; sample T = 10 * K * log2(K) outcomes and compare the
    // plug-in estimate against the enumerated value.
    let atoms: Vec<(i64, i64)> = (0..8).map(|k| (2 * k + 1, 16)).collect();
    let world = World {
        n: 1,
        mu: 0,
        sigma: 0,
        seed: 0,
        groups: vec![one_group(0, vec![line(0, 1)], atoms)],
    };
    let v = VList::from_landmarks(vec![0.4]).unwrap();
    let exact = exact_outcome_entropy(&world, 0, &v).unwrap();

    let sampler = Sampler::new(&world).unwrap();
    let t = 10 * 8 * 3usize;
    for seed in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..t {
            let inst = sampler.draw(&mut rng);
            *counts.entry(encode_outcome(&inst.values, &v)).or_insert(0u64) += 1;
        }
        let freq: Vec<u64> = counts.values().copied().collect();
        let estimate = plugin_entropy(&freq).unwrap().bits;
        assert!(
            (estimate - exact).abs() <= 0.1,
            "seed {seed}: |{estimate} - {exact}| > 0.1"
        );
    }
}
