//! Cross-checks the monotone-partition solver against the exhaustive
//! assignment oracle, plus the solver's order invariances.

use proptest::prelude::*;
use selfsort_core::oracle::exhaustive_monotone_partition;
use selfsort_core::partition::{
    monotone_partition_at_most, monotone_partition_size, SearchBudget,
};

fn size(seq: &[f64]) -> usize {
    monotone_partition_size(seq, &SearchBudget::default()).unwrap()
}

#[test]
fn solver_matches_oracle_on_adversarial_cases() {
    let cases: Vec<Vec<f64>> = vec![
        (0..10).map(|i| i as f64).collect(),             // sorted
        (0..10).rev().map(|i| i as f64).collect(),       // reversed
        (0..10).map(|i| if i % 2 == 0 { i } else { 20 - i } as f64).collect(), // zigzag
        vec![3.0; 10],                                   // constant
        vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0],              // plateaus
        vec![2.0, 4.0, 1.0, 3.0, 6.0, 8.0, 5.0, 7.0],
        vec![4.0, 8.0, 3.0, 7.0, 2.0, 6.0, 1.0, 5.0],
    ];
    for seq in cases {
        let expected = exhaustive_monotone_partition(&seq, 12).unwrap();
        assert_eq!(size(&seq), expected, "seq {seq:?}");
    }
}

#[test]
fn solver_matches_oracle_exhaustively_on_short_sequences() {
    // Every sequence over a 3-letter alphabet up to length 7.
    for len in 0..=7usize {
        let combos = 3usize.pow(len as u32);
        for mask in 0..combos {
            let mut seq = Vec::with_capacity(len);
            let mut m = mask;
            for _ in 0..len {
                seq.push((m % 3) as f64);
                m /= 3;
            }
            let expected = exhaustive_monotone_partition(&seq, 12).unwrap();
            assert_eq!(size(&seq), expected, "seq {seq:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_oracle_on_random_sequences(seq in prop::collection::vec(0u8..20, 0..10)) {
        let seq: Vec<f64> = seq.into_iter().map(f64::from).collect();
        let expected = exhaustive_monotone_partition(&seq, 10).unwrap();
        prop_assert_eq!(size(&seq), expected);
    }

    #[test]
    fn decision_agrees_with_size(seq in prop::collection::vec(0u8..12, 0..10), d in 0usize..6) {
        let seq: Vec<f64> = seq.into_iter().map(f64::from).collect();
        let budget = SearchBudget::default();
        let want = monotone_partition_size(&seq, &budget).unwrap() <= d;
        prop_assert_eq!(monotone_partition_at_most(&seq, d, &budget).unwrap(), want);
    }

    #[test]
    fn size_invariant_under_translation_scaling_reversal(
        seq in prop::collection::vec(-50i32..50, 1..12),
        shift in -100i32..100,
        scale in 1u8..5,
    ) {
        let base: Vec<f64> = seq.iter().map(|&v| v as f64).collect();
        let transformed: Vec<f64> = seq
            .iter()
            .map(|&v| (v as f64) * scale as f64 + shift as f64)
            .collect();
        let reversed: Vec<f64> = base.iter().rev().copied().collect();
        let d = size(&base);
        prop_assert_eq!(size(&transformed), d);
        prop_assert_eq!(size(&reversed), d);
        prop_assert!(d <= base.len());
        prop_assert_eq!(d == 0, base.is_empty());
    }
}
