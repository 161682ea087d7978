use asg_core::eval::{average_precision, mean_average_precision, top1_accuracy};
use asg_core::oracle::{map_brute_force, top1_brute_force};
use proptest::prelude::*;

/// Scores on a coarse grid (to force ties) plus single labels and multi-hot rows.
fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<bool>>)> {
    (1usize..15, 1usize..6).prop_flat_map(|(n, c)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..6).prop_map(|v| f64::from(v) / 5.0), c), n),
            prop::collection::vec(0..c, n),
            prop::collection::vec(prop::collection::vec(any::<bool>(), c), n),
        )
    })
}

proptest! {
    #[test]
    fn top1_matches_brute_force((scores, labels, _) in instance()) {
        prop_assert_eq!(top1_accuracy(&scores, &labels).unwrap(), top1_brute_force(&scores, &labels));
    }

    #[test]
    fn map_matches_brute_force((scores, _, multi) in instance()) {
        prop_assume!(multi.iter().flatten().any(|&b| b));
        prop_assert_eq!(mean_average_precision(&scores, &multi).unwrap(), map_brute_force(&scores, &multi));
    }

    #[test]
    fn ap_is_a_probability(scores in prop::collection::vec(0.0f64..1.0, 1..30), seed in any::<u64>()) {
        let positive: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        match average_precision(&scores, &positive) {
            Some(ap) => prop_assert!((0.0..=1.0).contains(&ap)),
            None => prop_assert!(!positive.contains(&true)),
        }
    }

    #[test]
    fn metrics_ignore_monotone_score_maps((scores, labels, multi) in instance()) {
        prop_assume!(multi.iter().flatten().any(|&b| b));
        let mapped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|&s| (3.0 * s).exp() - 7.0).collect()).collect();
        prop_assert_eq!(top1_accuracy(&scores, &labels).unwrap(), top1_accuracy(&mapped, &labels).unwrap());
        prop_assert_eq!(mean_average_precision(&scores, &multi).unwrap(), mean_average_precision(&mapped, &multi).unwrap());
    }
}

#[test]
fn perfect_ranking_scores_one() {
    let ap = average_precision(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]).unwrap();
    assert_eq!(ap, 1.0);
    let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
}
