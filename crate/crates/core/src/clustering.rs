//! Pixel features and k-means clustering of a single image layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};
use crate::geom_raster::Raster;
use crate::seed;

/// How a pixel is turned into a feature vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PixelFeatureConfig {
    /// The pixel's own spectral vector.
    #[default]
    Spectral,
    /// Spectral vectors of the `(2h+1)^2` window centered on the pixel,
    /// concatenated in row-major order. Edges are replicated.
    SpectralWindow { half_size: usize },
}

impl PixelFeatureConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            PixelFeatureConfig::SpectralWindow { half_size: 0 } => Err(TcmError::InvalidArgument(
                "spectral_window needs half_size >= 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn dim(&self, channels: usize) -> usize {
        match *self {
            PixelFeatureConfig::Spectral => channels,
            PixelFeatureConfig::SpectralWindow { half_size } => {
                let side = 2 * half_size + 1;
                channels * side * side
            }
        }
    }
}

/// Row-major `(rows, dim)` matrix of pixel features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() != rows * dim {
            return Err(TcmError::InvalidArgument(format!(
                "feature matrix {rows}x{dim} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

pub fn extract_features(image: &Raster, config: &PixelFeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let (h, w, c) = image.shape();
    match *config {
        PixelFeatureConfig::Spectral => FeatureMatrix::new(h * w, c, image.data().to_vec()),
        PixelFeatureConfig::SpectralWindow { half_size } => {
            let hs = half_size as isize;
            let dim = config.dim(c);
            let mut data = Vec::with_capacity(h * w * dim);
            for row in 0..h as isize {
                for col in 0..w as isize {
                    for dy in -hs..=hs {
                        let r = (row + dy).clamp(0, h as isize - 1) as usize;
                        for dx in -hs..=hs {
                            let cc = (col + dx).clamp(0, w as isize - 1) as usize;
                            data.extend_from_slice(image.pixel(r, cc));
                        }
                    }
                }
            }
            FeatureMatrix::new(h * w, dim, data)
        }
    }
}

/// Stopping rule for Lloyd iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    /// Stop once no centroid moves farther than this (Euclidean, feature units).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// `k * dim` values, centroid-major.
    pub centroids: Vec<f32>,
    pub features: PixelFeatureConfig,
    pub seed: u64,
    pub inertia: f64,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn centroid(&self, i: usize) -> &[f32] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest centroid, lowest index on ties.
    pub fn nearest(&self, point: &[f32]) -> (usize, f32) {
        nearest_centroid(point, &self.centroids, self.dim)
    }
}

/// Per-pixel cluster indices of one image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterMap {
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub labels: Vec<u32>,
}

#[inline]
fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn nearest_centroid(point: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means with k-means++ seeding, using [`KMeansOptions::default`].
pub fn fit_kmeans(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    config: PixelFeatureConfig,
) -> Result<ClusterModel> {
    fit_kmeans_with(features, k, seed, config, KMeansOptions::default())
}

pub fn fit_kmeans_with(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    config: PixelFeatureConfig,
    options: KMeansOptions,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(TcmError::InvalidArgument("k must be at least 1".into()));
    }
    let n = features.rows();
    if n < k {
        return Err(TcmError::TooFewPixels { rows: n, k });
    }
    let dim = features.dim();
    let mut rng = seed::rng(seed);
    let mut centroids = kmeans_plus_plus(features, k, &mut rng);

    let mut labels = vec![0u32; n];
    let mut dists = vec![0f32; n];
    let mut assigner = BoundedAssigner::new(n, k);
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    let mut shifts = vec![0f64; k];
    let mut prev_inertia = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..options.max_iterations {
        iterations += 1;
        assigner.assign(features, &centroids, &mut labels, &mut dists);
        inertia = dists.iter().map(|&d| d as f64).sum();
        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-5) + 1e-3,
            "inertia increased from {prev_inertia} to {inertia}"
        );
        prev_inertia = inertia;

        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (p, &j) in features.iter_rows().zip(&labels) {
            let j = j as usize;
            counts[j] += 1;
            for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                *s += v as f64;
            }
        }

        let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        // farthest points from their own centroid, distance desc then index asc
        let mut donors: Vec<usize> = Vec::new();
        if !empty.is_empty() {
            donors = (0..n).collect();
            donors.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        }

        let mut max_shift = 0f64;
        let mut donor_iter = donors.into_iter();
        for j in 0..k {
            let updated: Vec<f32> = if counts[j] > 0 {
                sums[j * dim..(j + 1) * dim]
                    .iter()
                    .map(|s| (s / counts[j] as f64) as f32)
                    .collect()
            } else {
                let donor = donor_iter.next().unwrap_or(0);
                features.row(donor).to_vec()
            };
            let old = &mut centroids[j * dim..(j + 1) * dim];
            let shift = squared_distance(old, &updated) as f64;
            shifts[j] = shift.sqrt();
            max_shift = max_shift.max(shift);
            old.copy_from_slice(&updated);
        }
        assigner.centroids_moved(&labels, &shifts);
        if max_shift.sqrt() < options.tolerance {
            break;
        }
    }

    // inertia of the returned centroids
    let final_inertia: f64 = features
        .iter_rows()
        .map(|p| nearest_centroid(p, &centroids, dim).1 as f64)
        .sum();
    debug_assert!(final_inertia <= inertia * (1.0 + 1e-5) + 1e-3);

    Ok(ClusterModel {
        k,
        dim,
        centroids,
        features: config,
        seed,
        inertia: final_inertia,
        iterations,
    })
}

/// Lloyd assignment step with Hamerly's bounds.
///
/// A point keeps its cluster without a full scan when its distance to the
/// assigned centroid is below both half the gap to the nearest other
/// centroid and a lower bound on the distance to every other centroid.
/// The skip test carries a slack far above `f32` rounding, so labels and
/// distances are exactly those of a full nearest-centroid scan.
struct BoundedAssigner {
    lower: Vec<f64>,
    half_gap: Vec<f64>,
    primed: bool,
}

impl BoundedAssigner {
    fn new(n: usize, k: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            half_gap: vec![0.0; k],
            primed: false,
        }
    }

    fn assign(
        &mut self,
        features: &FeatureMatrix,
        centroids: &[f32],
        labels: &mut [u32],
        dists: &mut [f32],
    ) {
        let dim = features.dim();
        let k = centroids.len() / dim;
        if self.primed {
            for j in 0..k {
                let cj = &centroids[j * dim..(j + 1) * dim];
                let nearest = (0..k)
                    .filter(|&o| o != j)
                    .map(|o| squared_distance(cj, &centroids[o * dim..(o + 1) * dim]))
                    .fold(f32::INFINITY, f32::min);
                self.half_gap[j] = 0.5 * (nearest as f64).sqrt();
            }
        }
        for (i, p) in features.iter_rows().enumerate() {
            if self.primed {
                let a = labels[i] as usize;
                let own = squared_distance(p, &centroids[a * dim..(a + 1) * dim]);
                let upper = (own as f64).sqrt();
                let bound = self.half_gap[a].max(self.lower[i]);
                if upper + 1e-3 + 1e-5 * upper < bound {
                    dists[i] = own;
                    continue;
                }
            }
            let (mut best, mut best_d, mut second_d) = (0usize, f32::INFINITY, f32::INFINITY);
            for (j, c) in centroids.chunks_exact(dim).enumerate() {
                let d = squared_distance(p, c);
                if d < best_d {
                    second_d = best_d;
                    best_d = d;
                    best = j;
                } else if d < second_d {
                    second_d = d;
                }
            }
            labels[i] = best as u32;
            dists[i] = best_d;
            self.lower[i] = (second_d as f64).sqrt();
        }
        self.primed = true;
    }

    /// Loosens the lower bounds after centroid `j` moved by `shifts[j]`.
    fn centroids_moved(&mut self, labels: &[u32], shifts: &[f64]) {
        let (mut top, mut top_j, mut runner_up) = (0f64, usize::MAX, 0f64);
        for (j, &s) in shifts.iter().enumerate() {
            if s > top {
                runner_up = top;
                top = s;
                top_j = j;
            } else if s > runner_up {
                runner_up = s;
            }
        }
        for (lb, &a) in self.lower.iter_mut().zip(labels) {
            let drift = if a as usize == top_j { runner_up } else { top };
            *lb -= drift;
        }
    }
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn kmeans_plus_plus(features: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Vec<f32> {
    let n = features.rows();
    let dim = features.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(features.row(first));
    let mut closest: Vec<f64> = features
        .iter_rows()
        .map(|p| squared_distance(p, features.row(first)) as f64)
        .collect();

    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the running sum
            chosen.unwrap_or_else(|| closest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = features.row(pick).to_vec();
        for (d, p) in closest.iter_mut().zip(features.iter_rows()) {
            let nd = squared_distance(p, &c) as f64;
            if nd < *d {
                *d = nd;
            }
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

pub fn assign_clusters(model: &ClusterModel, image: &Raster) -> Result<ClusterMap> {
    let found = model.features.dim(image.channels());
    if found != model.dim {
        return Err(TcmError::FeatureDimMismatch {
            expected: model.dim,
            found,
        });
    }
    let features = extract_features(image, &model.features)?;
    Ok(assign_features(
        model,
        &features,
        image.height(),
        image.width(),
    ))
}

pub(crate) fn assign_features(
    model: &ClusterModel,
    features: &FeatureMatrix,
    height: usize,
    width: usize,
) -> ClusterMap {
    let labels = features
        .iter_rows()
        .map(|p| model.nearest(p).0 as u32)
        .collect();
    ClusterMap {
        height,
        width,
        k: model.k,
        labels,
    }
}

/// Fits k-means on the image's own pixels and labels every pixel.
pub fn cluster_layer(
    image: &Raster,
    k: usize,
    seed: u64,
    config: PixelFeatureConfig,
) -> Result<(ClusterModel, ClusterMap)> {
    let features = extract_features(image, &config)?;
    let model = fit_kmeans(&features, k, seed, config)?;
    let map = assign_features(&model, &features, image.height(), image.width());
    Ok((model, map))
}
