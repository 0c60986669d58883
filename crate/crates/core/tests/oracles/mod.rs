//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written from the problem statement, brute-force where
//! possible, and shares no code with the library.
#![allow(dead_code)]

/// Squared Euclidean distance in f64, computed directly.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Within-cluster sum of squares of a partition, or `None` if a cluster is empty.
pub fn partition_sse(points: &[Vec<f64>], assign: &[usize], k: usize) -> Option<f64> {
    let means = partition_means(points, assign, k)?;
    Some(points.iter().zip(assign).map(|(p, &j)| sq_dist(p, &means[j])).sum())
}

pub fn partition_means(points: &[Vec<f64>], assign: &[usize], k: usize) -> Option<Vec<Vec<f64>>> {
    let d = points[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &j) in points.iter().zip(assign) {
        counts[j] += 1;
        for (s, v) in sums[j].iter_mut().zip(p) {
            *s += v;
        }
    }
    if counts.contains(&0) {
        return None;
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    Some(sums)
}

/// Smallest within-cluster sum of squares over every partition of `points`
/// into `k` non-empty groups.
pub fn kmeans_brute_force(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut assign = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        if let Some(sse) = partition_sse(points, &assign, k) {
            best = best.min(sse);
        }
        // Next assignment in base-k counting order.
        let mut i = 0;
        while i < n {
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// True when `assign` is a fixed point of Lloyd's algorithm: no point is
/// strictly closer (beyond `slack`) to another cluster's mean than to its own.
pub fn is_lloyd_fixed_point(points: &[Vec<f64>], assign: &[usize], k: usize, slack: f64) -> bool {
    let Some(means) = partition_means(points, assign, k) else {
        return false;
    };
    points.iter().zip(assign).all(|(p, &j)| {
        let own = sq_dist(p, &means[j]);
        means.iter().all(|m| sq_dist(p, m) >= own - slack)
    })
}

/// Index of the nearest centroid by a plain scan; the first minimum wins.
pub fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting. `None` if
/// a pivot falls below `1e-12` times the largest entry.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact minimizer of `½‖w̃‖² + C Σ max(0, 1 − yᵢ w̃·x̃ᵢ)` with `x̃ = (x, 1)`.
///
/// Enumerates which dual variables sit at 0, at C, or strictly inside (at
/// most three free), solves the equality system for the free ones and keeps
/// the candidate that satisfies every optimality condition with the lowest
/// dual objective. Returns `(w, b)`.
pub fn svm_qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let aug: Vec<Vec<f64>> = x.iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * aug[i].iter().zip(&aug[j]).map(|(a, b)| a * b).sum::<f64>();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = vec![0u8; n]; // 0: at zero, 1: at C, 2: free
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if free.len() <= 3 {
            let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
            let ok = if free.is_empty() {
                true
            } else {
                let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| q(i, j)).collect()).collect();
                let rhs: Vec<f64> = free
                    .iter()
                    .map(|&i| 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q(i, j) * c).sum::<f64>())
                    .collect();
                match solve(a, rhs) {
                    Some(sol) => {
                        free.iter().zip(&sol).for_each(|(&i, &v)| alpha[i] = v);
                        sol.iter().all(|&v| v > 0.0 && v < c)
                    }
                    None => false,
                }
            };
            if ok {
                let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q(i, j) * alpha[j]).sum::<f64>() - 1.0).collect();
                let kkt = (0..n).all(|i| match state[i] {
                    0 => grad[i] >= -1e-9,
                    1 => grad[i] <= 1e-9,
                    _ => grad[i].abs() <= 1e-9,
                });
                if kkt {
                    let obj = 0.5 * (0..n).map(|i| alpha[i] * (grad[i] + 1.0)).sum::<f64>() - alpha.iter().sum::<f64>();
                    if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                        best = Some((obj, alpha));
                    }
                }
            }
        }
        let mut i = 0;
        while i < n {
            state[i] += 1;
            if state[i] < 3 {
                break;
            }
            state[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let (_, alpha) = best.expect("the dual always has an optimum");
    let p = x[0].len();
    let mut w = vec![0.0; p + 1];
    for i in 0..n {
        for (wj, v) in w.iter_mut().zip(&aug[i]) {
            *wj += alpha[i] * y[i] * v;
        }
    }
    let b = w.pop().unwrap();
    (w, b)
}

/// Area under the precision envelope, by sweeping every score as a threshold.
///
/// Scores must be distinct. For each positive, the envelope value is the best
/// precision among thresholds whose recall reaches that positive's recall.
pub fn ap_by_thresholds(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    // (true positives, retrieved) at each threshold, highest threshold first.
    let counts: Vec<(usize, usize)> = thresholds
        .iter()
        .map(|&t| {
            let retrieved = scores.iter().filter(|&&s| s >= t).count();
            let tp = scores.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count();
            (tp, retrieved)
        })
        .collect();
    let mut sum = 0.0;
    for (t, &(tp_here, _)) in thresholds.iter().zip(&counts) {
        let positive = scores.iter().zip(labels).any(|(&s, &l)| l && s == *t);
        if !positive {
            continue;
        }
        let best = counts
            .iter()
            .filter(|(tp, _)| *tp >= tp_here)
            .map(|&(tp, r)| tp as f64 / r as f64)
            .fold(0.0, f64::max);
        sum += best;
    }
    sum / n_pos as f64
}
