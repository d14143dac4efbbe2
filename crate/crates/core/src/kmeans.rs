//! KMeans with k-means++ seeding and Lloyd refinement.
//!
//! Used both for per-query clustering of feedback embeddings and for training
//! the coarse quantizer of the index. Arithmetic runs in `f64`; the returned
//! centroids are narrowed to `f32`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{squared_distance, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    /// Lloyd stops once no centroid moves farther than this (Euclidean).
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iterations: 20,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: EmbeddingMatrix,
    /// Cluster index of every input point under the final centroids.
    pub assignments: Vec<u32>,
    /// Inertia after each assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment")
    }
}

pub fn kmeans(points: &EmbeddingMatrix, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(points, k, seed, &KMeansConfig::default())
}

pub fn kmeans_with(points: &EmbeddingMatrix, k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::config("KMeans requires at least one cluster"));
    }
    if points.is_empty() {
        return Err(Error::Empty("KMeans input has no points"));
    }
    let dim = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);

    let (mut assignments, mut distances) = assign(points, &centroids, k);
    let mut inertia_history = vec![distances.iter().sum::<f64>()];
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let updated = update(points, &assignments, &distances, &centroids, k);
        let shift = centroids
            .chunks_exact(dim)
            .zip(updated.chunks_exact(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        centroids = updated;
        (assignments, distances) = assign(points, &centroids, k);
        inertia_history.push(distances.iter().sum());
        if shift < config.tolerance {
            break;
        }
    }

    let centroids = EmbeddingMatrix::from_raw(dim, centroids.into_iter().map(|v| v as f32).collect());
    Ok(KMeansResult {
        centroids,
        assignments,
        inertia_history,
        iterations,
    })
}

/// k-means++: first centre uniform, then proportional to squared distance to
/// the nearest chosen centre. Once every point coincides with a centre, the
/// surplus centres are uniform copies of existing points.
fn seed_plus_plus(points: &EmbeddingMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.rows();
    let dim = points.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend(points.row(first).iter().map(|&v| v as f64));

    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[..dim])).collect();

    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    chosen = Some(i);
                    break;
                }
                target -= d;
            }
            // rounding can leave a sliver of mass past the last candidate
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend(points.row(pick).iter().map(|&v| v as f64));
        let c = &centroids[start..];
        for (d, p) in nearest.iter_mut().zip(points.iter()) {
            let nd = squared_distance(p, c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

/// Nearest centroid per point (ties to the lower cluster index) and the
/// squared distance to it.
fn assign(points: &EmbeddingMatrix, centroids: &[f64], k: usize) -> (Vec<u32>, Vec<f64>) {
    let dim = points.dim();
    let nearest = |p: &[f32]| {
        let mut best = (0u32, f64::INFINITY);
        for c in 0..k {
            let d = squared_distance(p, &centroids[c * dim..(c + 1) * dim]);
            if d < best.1 {
                best = (c as u32, d);
            }
        }
        best
    };
    let pairs: Vec<(u32, f64)> = if points.rows() * k >= 1 << 14 {
        points.as_slice().par_chunks_exact(dim).map(nearest).collect()
    } else {
        points.iter().map(nearest).collect()
    };
    pairs.into_iter().unzip()
}

/// Lloyd update. Clusters left empty are moved onto the points lying
/// farthest from their current centroid, which never raises inertia.
fn update(points: &EmbeddingMatrix, assignments: &[u32], distances: &[f64], previous: &[f64], k: usize) -> Vec<f64> {
    let dim = points.dim();
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        let a = a as usize;
        counts[a] += 1;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += v as f64;
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    let mut out = previous.to_vec();
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (o, s) in out[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *o = s * inv;
            }
        }
    }
    if !empty.is_empty() {
        let mut order: Vec<usize> = (0..points.rows()).collect();
        order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
        for (slot, &c) in empty.iter().enumerate() {
            let p = points.row(order[slot % order.len()]);
            for (o, &v) in out[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *o = v as f64;
            }
        }
    }
    out
}
