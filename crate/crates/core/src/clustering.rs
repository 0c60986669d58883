//! k-means clustering (Lloyd's algorithm with k-means++ seeding).

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

const MAGIC: &[u8; 4] = b"UKMC";

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the relative objective improvement of an iteration drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        KMeansParams {
            k,
            max_iter: 300,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// Fitted centroids plus fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    centroids: Array2<f32>,
    /// Sum of squared distances from each training point to its nearest centroid.
    pub objective: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl KMeansModel {
    pub fn from_centroids(centroids: Array2<f32>) -> Result<Self> {
        if centroids.nrows() == 0 {
            return Err(Error::InvalidArgument("a model needs at least one centroid".into()));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("centroids contain NaN or infinity".into()));
        }
        Ok(KMeansModel {
            centroids,
            objective: 0.0,
            iterations: 0,
            seed: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn d(&self) -> usize {
        self.centroids.ncols()
    }

    pub fn centroids(&self) -> ArrayView2<'_, f32> {
        self.centroids.view()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut enc = Encoder::with_header(MAGIC);
        enc.u64(self.k() as u64);
        enc.u64(self.d() as u64);
        enc.u64(self.iterations as u64);
        enc.u64(self.seed);
        enc.f64(self.objective);
        enc.f32s(self.centroids.iter());
        enc.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = codec::read_file(path)?;
        let mut dec = Decoder::open(&bytes, MAGIC, "k-means model")?;
        let k = dec.len()?;
        let d = dec.len()?;
        let iterations = dec.len()?;
        let seed = dec.u64()?;
        let objective = dec.f64()?;
        let centroids = Array2::from_shape_vec((k, d), dec.f32s(k * d)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        dec.finish()?;
        if !(objective >= 0.0) {
            return Err(Error::Validation(format!("negative k-means objective {objective}")));
        }
        let mut model = Self::from_centroids(centroids)?;
        model.objective = objective;
        model.iterations = iterations;
        model.seed = seed;
        Ok(model)
    }
}

/// Fits `params.k` centroids to the rows of `x`.
pub fn kmeans_fit(x: ArrayView2<f32>, params: &KMeansParams) -> Result<KMeansModel> {
    kmeans_fit_traced(x, params).map(|(model, _)| model)
}

/// Like [`kmeans_fit`], also returning the objective after every assignment
/// step (the initial seeding first).
pub fn kmeans_fit_traced(
    x: ArrayView2<f32>,
    params: &KMeansParams,
) -> Result<(KMeansModel, Vec<f64>)> {
    let (n, d) = x.dim();
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of samples ({n})"
        )));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", params.tol)));
    }

    let row_norms = squared_norms(x);
    let mut centroids = plus_plus_init(x, &row_norms, k, params.seed);
    let mut nearest = assign_with_norms(x, &row_norms, centroids.view());
    let mut objective = sum_distances(&nearest);
    let mut trace = vec![objective];
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        centroids = update_centroids(x, &nearest, k, d);
        let next = assign_with_norms(x, &row_norms, centroids.view());
        let next_objective = sum_distances(&next);
        let unchanged = next.iter().zip(&nearest).all(|(a, b)| a.0 == b.0);
        let improvement = objective - next_objective;
        nearest = next;
        objective = next_objective;
        trace.push(objective);
        if unchanged || improvement <= params.tol * trace[trace.len() - 2] {
            break;
        }
    }
    log::debug!("k-means: k={k}, {iterations} iterations, objective {objective:.6e}");

    let model = KMeansModel {
        centroids,
        objective,
        iterations,
        seed: params.seed,
    };
    Ok((model, trace))
}

/// Index of the nearest centroid for every row of `x`; ties go to the lowest index.
pub fn kmeans_assign(model: &KMeansModel, x: ArrayView2<f32>) -> Result<Vec<u32>> {
    Error::check_dim(model.d(), x.ncols())?;
    let norms = squared_norms(x);
    Ok(assign_with_norms(x, &norms, model.centroids())
        .into_iter()
        .map(|(j, _)| j)
        .collect())
}

/// `Σᵢ minⱼ ‖xᵢ − cⱼ‖²`, accumulated in f64.
pub fn kmeans_objective(model: &KMeansModel, x: ArrayView2<f32>) -> Result<f64> {
    Error::check_dim(model.d(), x.ncols())?;
    let norms = squared_norms(x);
    Ok(sum_distances(&assign_with_norms(x, &norms, model.centroids())))
}

fn squared_norms(x: ArrayView2<f32>) -> Vec<f64> {
    x.rows().into_iter().map(|r| dot(r, r)).collect()
}

fn dot(a: ArrayView1<f32>, b: ArrayView1<f32>) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| f64::from(u) * f64::from(v)).sum()
}

/// `‖x‖² + ‖c‖² − 2 x·c`, clamped at zero.
fn expanded_distance(x: ArrayView1<f32>, x_norm: f64, c: ArrayView1<f32>, c_norm: f64) -> f64 {
    (x_norm + c_norm - 2.0 * dot(x, c)).max(0.0)
}

fn assign_with_norms(
    x: ArrayView2<f32>,
    row_norms: &[f64],
    centroids: ArrayView2<f32>,
) -> Vec<(u32, f64)> {
    let centroid_norms = squared_norms(centroids);
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut best = (0u32, f64::INFINITY);
            for (j, c) in centroids.rows().into_iter().enumerate() {
                let dist = expanded_distance(row, row_norms[i], c, centroid_norms[j]);
                if dist < best.1 {
                    best = (j as u32, dist);
                }
            }
            best
        })
        .collect()
}

fn sum_distances(nearest: &[(u32, f64)]) -> f64 {
    nearest.iter().map(|&(_, dist)| dist).sum()
}

fn plus_plus_init(x: ArrayView2<f32>, row_norms: &[f64], k: usize, seed: u64) -> Array2<f32> {
    let n = x.nrows();
    let mut rng = rng_for(seed, Stream::KMeansInit);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| expanded_distance(x.row(i), row_norms[i], x.row(chosen[0]), row_norms[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = min_dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            min_dist
                .iter()
                .position(|&w| {
                    acc += w;
                    acc > target
                })
                // Round-off can leave `target` just past the final sum.
                .unwrap_or_else(|| min_dist.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for i in 0..n {
            let dist = expanded_distance(x.row(i), row_norms[i], x.row(next), row_norms[next]);
            min_dist[i] = min_dist[i].min(dist);
        }
    }
    x.select(Axis(0), &chosen)
}

/// Means of the assigned points. An empty cluster takes over the point that
/// lies farthest from its current centroid.
fn update_centroids(x: ArrayView2<f32>, nearest: &[(u32, f64)], k: usize, d: usize) -> Array2<f32> {
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (i, &(j, _)) in nearest.iter().enumerate() {
        let j = j as usize;
        counts[j] += 1;
        sums.row_mut(j)
            .iter_mut()
            .zip(x.row(i))
            .for_each(|(s, &v)| *s += f64::from(v));
    }

    let mut centroids = Array2::<f32>::zeros((k, d));
    let mut far: Vec<(usize, f64)> = nearest.iter().map(|&(_, dist)| dist).enumerate().collect();
    // Farthest first; equal distances keep the lower sample index first.
    far.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut donors = far.into_iter().map(|(i, _)| i);
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            centroids
                .row_mut(j)
                .iter_mut()
                .zip(sums.row(j))
                .for_each(|(c, &s)| *c = (s * inv) as f32);
        } else {
            let donor = donors.next().expect("k <= n guarantees a donor");
            log::debug!("k-means: cluster {j} empty, reseeding at sample {donor}");
            centroids.row_mut(j).assign(&x.row(donor));
        }
    }
    centroids
}
