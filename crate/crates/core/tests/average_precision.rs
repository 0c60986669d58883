mod oracles;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udft::{average_precision, mean_average_precision, ApMode};

#[test]
fn continuous_ap_equals_threshold_sweep_for_every_labeling_of_twelve() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut scores: Vec<f64> = (0..12).map(|i| f64::from(i) * 0.37 - 1.0).collect();
    scores.shuffle(&mut rng);
    for mask in 1u32..(1 << 12) {
        let labels: Vec<bool> = (0..12).map(|i| mask >> i & 1 == 1).collect();
        let got = average_precision(&scores, &labels, ApMode::Continuous).unwrap();
        let want = oracles::ap_by_thresholds(&scores, &labels);
        assert_eq!(got, want, "labeling {mask:#014b}");
    }
}

#[test]
fn perfect_ranking_scores_one() {
    let scores = [0.9, 0.8, 0.7, 0.2, 0.1];
    let labels = [true, true, true, false, false];
    for mode in [ApMode::Voc11, ApMode::Continuous] {
        assert_eq!(average_precision(&scores, &labels, mode).unwrap(), 1.0);
    }
}

#[test]
fn no_positives_is_an_error() {
    let err = average_precision(&[0.1, 0.2], &[false, false], ApMode::Voc11);
    assert!(matches!(err, Err(udft::Error::NoPositives)));
}

#[test]
fn random_scores_give_ap_near_the_positive_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = 20_000;
    let labels: Vec<bool> = (0..m).map(|_| rng.random_bool(0.3)).collect();
    let scores: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    let rate = labels.iter().filter(|&&l| l).count() as f64 / m as f64;
    let ap = average_precision(&scores, &labels, ApMode::Continuous).unwrap();
    assert!((ap - rate).abs() < 0.03, "ap {ap} vs rate {rate}");
}

#[test]
fn modes_agree_on_a_smooth_curve() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = 4000;
    let labels: Vec<bool> = (0..m).map(|_| rng.random_bool(0.4)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| if l { 1.0 } else { 0.0 } + rng.random::<f64>() * 1.5)
        .collect();
    let voc = average_precision(&scores, &labels, ApMode::Voc11).unwrap();
    let cont = average_precision(&scores, &labels, ApMode::Continuous).unwrap();
    assert!((voc - cont).abs() < 0.05, "{voc} vs {cont}");
}

#[test]
fn map_is_the_plain_mean() {
    assert_eq!(mean_average_precision(&[0.5, 1.0, 0.0, 0.25]).unwrap(), 0.4375);
    assert!(mean_average_precision(&[]).is_err());
}

fn labels_and_scores() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|m| {
        (
            prop::collection::vec(any::<bool>(), m).prop_filter("needs a positive", |l| l.contains(&true)),
            // Distinct scores so ranking does not depend on tie order.
            Just((0..m).map(|i| i as f64).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #[test]
    fn strictly_increasing_transform_preserves_ap((labels, scores) in labels_and_scores()) {
        let moved: Vec<f64> = scores.iter().map(|s| (s * 0.1).exp() * 3.0 - 7.0).collect();
        for mode in [ApMode::Voc11, ApMode::Continuous] {
            prop_assert_eq!(
                average_precision(&scores, &labels, mode).unwrap(),
                average_precision(&moved, &labels, mode).unwrap()
            );
        }
    }

    #[test]
    fn joint_permutation_preserves_ap((labels, scores) in labels_and_scores(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let l2: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
        let s2: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        for mode in [ApMode::Voc11, ApMode::Continuous] {
            prop_assert_eq!(
                average_precision(&scores, &labels, mode).unwrap(),
                average_precision(&s2, &l2, mode).unwrap()
            );
        }
    }

    #[test]
    fn ap_lies_in_unit_interval((labels, scores) in labels_and_scores()) {
        for mode in [ApMode::Voc11, ApMode::Continuous] {
            let ap = average_precision(&scores, &labels, mode).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
