//! Footprint-versus-neighborhood matching over a chip time series.
//!
//! For every layer the chip's pixels are clustered, the cluster-index
//! histograms of the footprint and of its neighborhood are compared with
//! KL divergence, and the construction time is the first layer whose
//! divergence exceeds a threshold.

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_layer, ClusterMap, PixelFeatureConfig};
use crate::error::{Result, TcmError};
use crate::geom_raster::{ChipStack, Mask};
use crate::seed::stable_hash;

/// Probability vector over cluster indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(TcmError::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(TcmError::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes `counts + epsilon` per bin.
    pub fn from_counts(counts: &[f64], epsilon: f64) -> Result<Self> {
        let total: f64 = counts.iter().map(|c| c + epsilon).sum();
        if !(total > 0.0) {
            return Err(TcmError::InvalidArgument("counts sum to zero".into()));
        }
        Self::new(counts.iter().map(|c| (c + epsilon) / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Pixels where the mask is set.
    Footprint,
    /// Pixels of the chip outside the footprint.
    Neighborhood,
}

impl Region {
    fn name(self) -> &'static str {
        match self {
            Region::Footprint => "footprint",
            Region::Neighborhood => "neighborhood",
        }
    }
}

/// Histogram of cluster indices over one region of the mask, with
/// `epsilon` added to every bin before normalizing.
pub fn cluster_distribution(
    cmap: &ClusterMap,
    mask: &Mask,
    region: Region,
    k: usize,
    epsilon: f64,
) -> Result<DiscreteDistribution> {
    if cmap.labels.len() != mask.len() {
        return Err(TcmError::InvalidArgument(format!(
            "cluster map has {} cells, mask has {}",
            cmap.labels.len(),
            mask.len()
        )));
    }
    let want = region == Region::Footprint;
    let mut counts = vec![0f64; k];
    let mut n = 0usize;
    for (&label, &inside) in cmap.labels.iter().zip(mask.as_slice()) {
        if inside == want {
            let label = label as usize;
            if label >= k {
                return Err(TcmError::InvalidArgument(format!(
                    "cluster index {label} out of range for k = {k}"
                )));
            }
            counts[label] += 1.0;
            n += 1;
        }
    }
    if n == 0 {
        return Err(TcmError::EmptyRegion(region.name()));
    }
    DiscreteDistribution::from_counts(&counts, epsilon)
}

/// `KL(p || q)` in nats. Terms with `p_i = 0` contribute nothing; a bin
/// with `q_i = 0 < p_i` makes the divergence infinite.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.support() != q.support() {
        return Err(TcmError::SupportMismatch(p.support(), q.support()));
    }
    let d: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    // rounding can leave tiny negatives when p == q
    Ok(d.max(0.0))
}

/// Per-layer divergences for one footprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub footprint_id: String,
    pub values: Vec<f64>,
    pub years: Vec<i32>,
}

impl DivergenceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Settings shared by every layer of a divergence computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesConfig {
    pub features: PixelFeatureConfig,
    /// Pseudo-count added to every histogram bin.
    pub epsilon: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            features: PixelFeatureConfig::Spectral,
            epsilon: 1.0,
        }
    }
}

/// Seed for the k-means fit of one layer of one footprint.
pub fn layer_seed(seed: u64, footprint_id: &str, layer: usize) -> u64 {
    stable_hash(seed, footprint_id, layer as u64)
}

pub fn divergence_series(
    chips: &ChipStack,
    k: usize,
    config: &SeriesConfig,
    seed: u64,
) -> Result<DivergenceSeries> {
    if !(config.epsilon > 0.0) {
        return Err(TcmError::InvalidArgument(format!(
            "smoothing epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    let mask = chips.mask();
    let values = chips
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let s = layer_seed(seed, chips.footprint_id(), l);
            let (_, cmap) = cluster_layer(layer, k, s, config.features)?;
            let inside = cluster_distribution(&cmap, mask, Region::Footprint, k, config.epsilon)?;
            let outside =
                cluster_distribution(&cmap, mask, Region::Neighborhood, k, config.epsilon)?;
            kl_divergence(&inside, &outside)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceSeries {
        footprint_id: chips.footprint_id().to_string(),
        values,
        years: chips.years().to_vec(),
    })
}

/// 1-based index of the first value strictly above `theta`, or the series
/// length when none is. The flag tells whether a crossing happened.
pub fn first_crossing_values(values: &[f64], theta: f64) -> (usize, bool) {
    match values.iter().position(|&d| d > theta) {
        Some(i) => (i + 1, true),
        None => (values.len(), false),
    }
}

pub fn first_crossing(series: &DivergenceSeries, theta: f64) -> usize {
    first_crossing_values(&series.values, theta).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcmParams {
    pub k: usize,
    pub r: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub footprint_id: String,
    /// 1-based layer index of the first developed observation.
    pub index: usize,
    pub year: i32,
    /// False when no layer exceeded the threshold and the last layer was
    /// returned by default.
    pub crossed: bool,
    pub series: DivergenceSeries,
    pub params: TcmParams,
}

/// Labels a series with the first layer that crosses `params.theta`.
pub fn decide(series: DivergenceSeries, params: TcmParams) -> Result<DetectionResult> {
    if series.is_empty() {
        return Err(TcmError::InvalidArgument("empty divergence series".into()));
    }
    let (index, crossed) = first_crossing_values(&series.values, params.theta);
    Ok(DetectionResult {
        footprint_id: series.footprint_id.clone(),
        index,
        year: series.years[index - 1],
        crossed,
        series,
        params,
    })
}

/// Runs the full matching procedure on a chip stack cut with `params.r`.
pub fn detect(
    chips: &ChipStack,
    params: TcmParams,
    config: &SeriesConfig,
    seed: u64,
) -> Result<DetectionResult> {
    if !(params.theta >= 0.0) {
        return Err(TcmError::InvalidArgument(format!(
            "threshold must be non-negative, got {}",
            params.theta
        )));
    }
    let series = divergence_series(chips, params.k, config, seed)?;
    decide(series, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom_raster::{AffineGeoTransform, Raster};

    fn dist(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(p.to_vec()).unwrap()
    }

    fn cmap(labels: &[u32], k: usize) -> ClusterMap {
        ClusterMap {
            height: 1,
            width: labels.len(),
            k,
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn one_hot_footprint() {
        let map = cmap(&[3, 0, 1], 4);
        let mask = Mask::new(1, 3, vec![true, false, false]).unwrap();
        let d = cluster_distribution(&map, &mask, Region::Footprint, 4, 0.0).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn counts_are_normalized() {
        let map = cmap(&[0, 0, 0, 1, 1], 2);
        let mask = Mask::new(1, 5, vec![true, true, true, true, false]).unwrap();
        let d = cluster_distribution(&map, &mask, Region::Footprint, 2, 0.0).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
    }

    #[test]
    fn smoothing_adds_pseudo_counts() {
        // (2,0,2) + 1 each -> (3,1,3)/7
        let map = cmap(&[0, 0, 2, 2, 1], 3);
        let mask = Mask::new(1, 5, vec![true, true, true, true, false]).unwrap();
        let d = cluster_distribution(&map, &mask, Region::Footprint, 3, 1.0).unwrap();
        let expected = [3.0 / 7.0, 1.0 / 7.0, 3.0 / 7.0];
        for (a, b) in d.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_region_is_an_error() {
        let map = cmap(&[0, 1], 2);
        let mask = Mask::new(1, 2, vec![true, true]).unwrap();
        assert!(matches!(
            cluster_distribution(&map, &mask, Region::Neighborhood, 2, 1.0),
            Err(TcmError::EmptyRegion("neighborhood"))
        ));
    }

    #[test]
    fn kl_reference_values() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let d = kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.5, 0.5])).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-12);
        let d = kl_divergence(&dist(&[0.75, 0.25]), &dist(&[0.5, 0.5])).unwrap();
        assert!((d - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln())).abs() < 1e-12);
        assert!((d - 0.130812).abs() < 1e-6);
        assert!(matches!(
            kl_divergence(&dist(&[1.0]), &dist(&[0.5, 0.5])),
            Err(TcmError::SupportMismatch(1, 2))
        ));
    }

    #[test]
    fn first_crossing_examples() {
        assert_eq!(first_crossing_values(&[0.1, 0.5, 0.6], 0.3), (2, true));
        assert_eq!(first_crossing_values(&[0.1, 0.1, 0.1], 0.3), (3, false));
        assert_eq!(first_crossing_values(&[0.9, 0.9], 0.3), (1, true));
        // strict inequality
        assert_eq!(first_crossing_values(&[0.3, 0.4], 0.3), (2, true));
    }

    /// Chip with a 4x4 footprint in a 12x12 window. `roof` paints the
    /// footprint from the given layer on.
    fn chip(layers: usize, roof_from: Option<usize>) -> ChipStack {
        let (h, w) = (12, 12);
        let inside = |r: usize, c: usize| (4..8).contains(&r) && (4..8).contains(&c);
        let rasters = (0..layers)
            .map(|l| {
                let mut data = Vec::new();
                for r in 0..h {
                    for c in 0..w {
                        let built = roof_from.is_some_and(|from| l >= from) && inside(r, c);
                        if built {
                            data.extend_from_slice(&[220.0, 220.0, 220.0]);
                        } else {
                            // checkerboard of two field colors everywhere else
                            let v = if (r + c) % 2 == 0 { 60.0 } else { 70.0 };
                            data.extend_from_slice(&[v, v + 10.0, v]);
                        }
                    }
                }
                Raster::new(h, w, 3, data).unwrap()
            })
            .collect();
        let mut mask = Mask::empty(h, w);
        for r in 0..h {
            for c in 0..w {
                mask.set(r, c, inside(r, c));
            }
        }
        ChipStack::new(
            "fp",
            rasters,
            mask,
            (0..layers as i32).map(|l| 2016 + l).collect(),
            4.0,
            AffineGeoTransform::identity(),
        )
        .unwrap()
    }

    #[test]
    fn identical_regions_have_no_divergence() {
        let c = chip(1, None);
        let s = divergence_series(&c, 2, &SeriesConfig::default(), 3).unwrap();
        // footprint (8 + 8) vs neighborhood (64 + 64), smoothed: same proportions
        assert!(s.values[0] < 1e-12, "{:?}", s.values);
    }

    #[test]
    fn solid_roof_is_far_from_neighborhood() {
        let c = chip(1, Some(0));
        let cfg = SeriesConfig::default();
        let s = divergence_series(&c, 2, &cfg, 3).unwrap();
        // k = 2 separates roof from field: footprint counts (16, 0) or
        // (0, 16), neighborhood (0, 128) or (128, 0)
        let p = DiscreteDistribution::from_counts(&[16.0, 0.0], 1.0).unwrap();
        let q = DiscreteDistribution::from_counts(&[0.0, 128.0], 1.0).unwrap();
        let expected = kl_divergence(&p, &q).unwrap();
        assert!((s.values[0] - expected).abs() < 1e-12);
        assert!(expected > 3.0);
    }

    #[test]
    fn detect_dates_the_roof() {
        let c = chip(5, Some(2));
        let params = TcmParams {
            k: 3,
            r: 4.0,
            theta: 1.0,
        };
        let res = detect(&c, params, &SeriesConfig::default(), 9).unwrap();
        assert_eq!(res.index, 3);
        assert_eq!(res.year, 2018);
        assert!(res.crossed);
        assert_eq!(res.series.len(), 5);

        let never = detect(&chip(5, None), params, &SeriesConfig::default(), 9).unwrap();
        assert_eq!((never.index, never.crossed), (5, false));
        let always = detect(&chip(5, Some(0)), params, &SeriesConfig::default(), 9).unwrap();
        assert_eq!(always.index, 1);
    }

    #[test]
    fn series_is_deterministic() {
        let c = chip(3, Some(1));
        let cfg = SeriesConfig::default();
        assert_eq!(
            divergence_series(&c, 4, &cfg, 1).unwrap(),
            divergence_series(&c, 4, &cfg, 1).unwrap()
        );
    }
}
