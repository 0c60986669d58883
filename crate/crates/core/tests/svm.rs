mod oracles;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udft::svm::{dual_objective, primal_objective, svm_fit_binary};
use udft::{svm_decision, svm_train_ovr, SvmParams};

fn instance(seed: u64, n: usize, p: usize, overlap: f32) -> (Array2<f32>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    y[0] = 1;
    y[n - 1] = -1;
    let x = Array2::from_shape_fn((n, p), |(i, j)| {
        let centre = if j == 0 { f32::from(y[i]) } else { 0.0 };
        centre + overlap * rng.random_range(-1.0f32..1.0)
    });
    (x, y)
}

fn rows(x: &Array2<f32>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
}

#[test]
fn tiny_instances_match_the_qp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = SvmParams { tol: 1e-8, max_iter: 100_000, ..Default::default() };
    for case in 0..60u64 {
        let n = rng.random_range(2..=6);
        let p = rng.random_range(1..=2);
        let (x, y) = instance(case, n, p, rng.random_range(0.2..2.5));
        let fit = svm_fit_binary(x.view(), &y, &params).unwrap();
        let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let (w, b) = oracles::svm_qp_oracle(&rows(&x), &yf, params.c);

        let scale = w.iter().chain([&b]).fold(1.0f64, |m, v| m.max(v.abs()));
        for (got, want) in fit.w.iter().chain([&fit.b]).zip(w.iter().chain([&b])) {
            assert!((got - want).abs() <= 1e-3 * scale, "case {case}: {:?} {} vs {w:?} {b}", fit.w, fit.b);
        }
        // Same decision on every training point unless it sits on the boundary.
        let ours = svm_decision(&fit.model, x.view()).unwrap();
        for (row, s) in rows(&x).iter().zip(&ours) {
            let t: f64 = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            assert!((s - t).abs() <= 1e-3 * scale);
        }
    }
}

#[test]
fn default_tolerance_gives_small_duality_gap() {
    let params = SvmParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..20u64 {
        let n = rng.random_range(10..=200);
        let p = rng.random_range(1..=20);
        let (x, y) = instance(case, n, p, rng.random_range(0.3..3.0));
        let fit = svm_fit_binary(x.view(), &y, &params).unwrap();
        assert!(fit.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
        let primal = primal_objective(x.view(), &y, &fit.w, fit.b, params.c);
        let dual = dual_objective(x.view(), &y, &fit.alpha);
        assert!(primal >= dual - 1e-9 * primal.abs());
        let gap = (primal - dual) / primal.abs().max(1.0);
        assert!(gap < 1e-2, "case {case} (n={n}, p={p}): relative gap {gap:.3e}");
    }
}

#[test]
fn separable_clusters_are_fit_exactly() {
    let (x, y) = instance(4, 80, 3, 0.4);
    let fit = svm_fit_binary(x.view(), &y, &SvmParams::default()).unwrap();
    let scores = svm_decision(&fit.model, x.view()).unwrap();
    assert!(scores.iter().zip(&y).all(|(s, &l)| s * f64::from(l) > 0.0));
}

#[test]
fn seed_changes_order_not_solution() {
    let (x, y) = instance(6, 60, 4, 1.5);
    let tight = SvmParams { tol: 1e-7, max_iter: 50_000, ..Default::default() };
    let a = svm_fit_binary(x.view(), &y, &SvmParams { seed: 1, ..tight.clone() }).unwrap();
    let b = svm_fit_binary(x.view(), &y, &SvmParams { seed: 2, ..tight }).unwrap();
    for (u, v) in a.w.iter().zip(&b.w) {
        assert!((u - v).abs() < 1e-4);
    }
    assert!((a.b - b.b).abs() < 1e-4);
}

#[test]
fn one_vs_rest_on_three_separable_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 90;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| {
        let centre = if i % 3 == j { 4.0 } else { 0.0 };
        centre + rng.random_range(-0.5f32..0.5)
    });
    let labels = Array2::from_shape_fn((n, 3), |(i, j)| u8::from(i % 3 == j));
    let ovr = svm_train_ovr(x.view(), labels.view(), &SvmParams::default()).unwrap();
    let scores = ovr.decision_matrix(x.view()).unwrap();
    for c in 0..3 {
        let col: Vec<f64> = scores.column(c).to_vec();
        let lab: Vec<bool> = labels.column(c).iter().map(|&v| v == 1).collect();
        let ap = udft::average_precision(&col, &lab, udft::ApMode::Voc11).unwrap();
        assert_eq!(ap, 1.0);
    }
}
