use ndarray::{Array2, Axis};
use proptest::prelude::*;
use udft::feature_store::{generate_synthetic, SyntheticConfig};
use udft::transfer_net::{loss_softmax_ce, train};
use udft::{kmeans_fit, KMeansParams, PseudoLabeling, SgdHyper, TransferNet};

#[test]
fn uniform_logits_cost_log_n2() {
    for n2 in [2usize, 10, 100] {
        let logits = Array2::<f64>::from_elem((7, n2), 0.3);
        let labels: Vec<u32> = (0..7).map(|i| (i * 13 % n2) as u32).collect();
        let loss = loss_softmax_ce(logits.view(), &labels).unwrap();
        assert!((loss - (n2 as f64).ln()).abs() < 1e-9, "n2={n2}: {loss}");
    }
}

#[test]
fn huge_logits_do_not_overflow() {
    let logits = ndarray::array![[1e30f32, 0.0, -1e30]];
    let loss = loss_softmax_ce(logits.view(), &[0]).unwrap();
    assert_eq!(loss, 0.0);
    let bad = loss_softmax_ce(logits.view(), &[1]).unwrap();
    assert!(bad.is_finite() && bad > 1e29);
}

proptest! {
    #[test]
    fn loss_is_shift_invariant(
        rows in prop::collection::vec(prop::collection::vec(-20.0f64..20.0, 4), 1..6),
        shift in -1e3f64..1e3,
    ) {
        let b = rows.len();
        let logits = Array2::from_shape_fn((b, 4), |(i, j)| rows[i][j]);
        let labels: Vec<u32> = (0..b as u32).map(|i| i % 4).collect();
        let base = loss_softmax_ce(logits.view(), &labels).unwrap();
        let moved = loss_softmax_ce((&logits + shift).view(), &labels).unwrap();
        prop_assert!((base - moved).abs() < 1e-6);
    }
}

fn three_clusters() -> (udft::FeatureDataset, PseudoLabeling) {
    let config = SyntheticConfig {
        n_clusters: 3,
        n_per_cluster: 100,
        d: 16,
        lr_rank: 16,
        lr_noise_sigma: 0.0,
        hr_separation: 6.0,
        seed: 3,
    };
    let (hr, lr) = generate_synthetic(&config).unwrap();
    let model = kmeans_fit(hr.data(), &KMeansParams::new(3)).unwrap();
    let labels = udft::assign_pseudo_labels(&model, &lr).unwrap();
    (lr, labels)
}

fn small_hyper() -> SgdHyper {
    SgdHyper {
        batch_size: 50,
        total_iters: 500,
        step_size: 300,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn fits_noiseless_pseudo_labels() {
    let (lr, labels) = three_clusters();
    let (net, history) = train(&lr, &labels, 16, &small_hyper()).unwrap();
    let logits = net.transform(lr.data()).unwrap();
    let correct = logits
        .axis_iter(Axis(0))
        .zip(&labels.labels)
        .filter(|(row, &l)| {
            let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            argmax == l as usize
        })
        .count();
    assert!(correct as f64 / lr.n() as f64 >= 0.99, "{correct} of {}", lr.n());
    assert!(history.final_loss().unwrap() <= history.losses[0]);
    assert_eq!(history.iterations(), 500);
}

#[test]
fn training_is_reproducible() {
    let (lr, labels) = three_clusters();
    let hyper = SgdHyper { total_iters: 60, ..small_hyper() };
    let (a, ha) = train(&lr, &labels, 8, &hyper).unwrap();
    let (b, hb) = train(&lr, &labels, 8, &hyper).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let (c, _) = train(&lr, &labels, 8, &SgdHyper { seed: 5, ..hyper }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn runaway_learning_rate_is_reported() {
    let (lr, labels) = three_clusters();
    let hyper = SgdHyper { lr0: 1e6, momentum: 0.99, total_iters: 200, ..small_hyper() };
    match train(&lr, &labels, 8, &hyper) {
        Err(udft::Error::Divergence { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h.final_loss())),
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.utnp");
    let net = TransferNet::<f32>::init(5, 4, 3, 1).unwrap();
    net.save(&path).unwrap();
    assert_eq!(TransferNet::load(&path).unwrap(), net);
}
