//! Label-free choice of `(k, r, theta)`.
//!
//! Divergences of the known footprints at the last layer (where every
//! structure exists) form `p`. Divergences of randomly placed copies of the
//! footprints, pooled over all layers, form `q`, the chance level. The grid
//! cell whose histograms overlap least (smallest Bhattacharyya coefficient)
//! wins, and `theta` is a high percentile of the raw `q` samples.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};
use crate::geom_raster::{Polygon, Rect, Scene};
use crate::matching::{first_crossing_values, DivergenceSeries, SeriesConfig, TcmParams};
use crate::pipeline::{series_batch, Workers};
use crate::seed;

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Placement rules for random polygons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomPolygonConfig {
    pub count: usize,
    /// Clearance kept between each polygon and the study extent border,
    /// normally the largest buffer radius searched.
    pub margin: f64,
    /// Reject placements whose bounding box touches a known footprint's.
    pub avoid_footprints: bool,
}

/// Copies of uniformly chosen footprint shapes, each translated so its
/// centroid lands on a uniform point of `extent`.
pub fn sample_random_polygons(
    footprints: &[Polygon],
    extent: &Rect,
    config: &RandomPolygonConfig,
    seed: u64,
) -> Result<Vec<Polygon>> {
    if config.count == 0 {
        return Err(TcmError::InvalidArgument(
            "random polygon count must be at least 1".into(),
        ));
    }
    if footprints.is_empty() || extent.is_empty() {
        return Err(TcmError::InvalidArgument(
            "need footprints and a nonempty study extent".into(),
        ));
    }
    let boxes: Vec<Rect> = footprints.iter().map(Polygon::bbox).collect();
    let inner = extent.expand(-config.margin);
    let mut rng = seed::stream(seed, "random-polygons", 0);
    let mut out = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let shape = &footprints[rng.random_range(0..footprints.len())];
            let x = extent.min_x + rng.random::<f64>() * extent.width();
            let y = extent.min_y + rng.random::<f64>() * extent.height();
            let (cx, cy) = shape.centroid();
            let candidate = shape.translated(format!("random-{i:05}"), x - cx, y - cy);
            let bbox = candidate.bbox();
            if !inner.contains_rect(&bbox) {
                continue;
            }
            if config.avoid_footprints && boxes.iter().any(|b| b.intersects(&bbox)) {
                continue;
            }
            placed = Some(candidate);
            break;
        }
        out.push(placed.ok_or(TcmError::PlacementFailed(PLACEMENT_ATTEMPTS))?);
    }
    Ok(out)
}

/// Uniform-bin histogram over `[0, d_max]`, masses normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    /// Values above `d_max` land in the last bin.
    pub fn from_samples(samples: &[f64], n_bins: usize, d_max: f64) -> Result<Self> {
        if n_bins == 0 || !(d_max > 0.0) || !d_max.is_finite() {
            return Err(TcmError::InvalidArgument(format!(
                "histogram needs n_bins >= 1 and d_max > 0, got {n_bins} and {d_max}"
            )));
        }
        if samples.is_empty() {
            return Err(TcmError::InvalidArgument("no samples to bin".into()));
        }
        let width = d_max / n_bins as f64;
        let edges = (0..=n_bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0usize; n_bins];
        for &v in samples {
            let bin = ((v / width).floor().max(0.0) as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
        let n = samples.len() as f64;
        Ok(Self {
            edges,
            masses: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }
}

/// Last-layer values of each series.
pub fn final_values(series: &[DivergenceSeries]) -> Vec<f64> {
    series
        .iter()
        .filter_map(|s| s.values.last().copied())
        .collect()
}

/// Every value of every series.
pub fn pooled_values(series: &[DivergenceSeries]) -> Vec<f64> {
    series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .collect()
}

/// Bins `p` and `q` samples on a shared range. Without `d_max` the range
/// ends at the largest sample of either set.
pub fn build_pq(
    p_samples: &[f64],
    q_samples: &[f64],
    n_bins: usize,
    d_max: Option<f64>,
) -> Result<(Histogram, Histogram)> {
    let d_max = match d_max {
        Some(v) => v,
        None => {
            let m = p_samples
                .iter()
                .chain(q_samples)
                .cloned()
                .fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    Ok((
        Histogram::from_samples(p_samples, n_bins, d_max)?,
        Histogram::from_samples(q_samples, n_bins, d_max)?,
    ))
}

pub fn bhattacharyya(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(TcmError::BinMismatch);
    }
    let bc: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    Ok(bc.clamp(0.0, 1.0))
}

/// Nearest-rank percentile: the `ceil(pct / 100 * n)`-th smallest sample.
pub fn percentile_threshold(samples: &[f64], pct: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(TcmError::InvalidArgument("no samples".into()));
    }
    if !(pct > 0.0 && pct < 100.0) {
        return Err(TcmError::InvalidArgument(format!(
            "percentile must be in (0, 100), got {pct}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    // multiply before dividing: 0.98 * 100 > 98 in f64
    let rank = ((pct * n as f64) / 100.0 - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub k_grid: Vec<usize>,
    pub r_grid: Vec<f64>,
    /// Number of random polygons; each contributes one sample per layer.
    pub n_random: usize,
    pub n_bins: usize,
    pub percentile: f64,
    pub avoid_footprints: bool,
    pub series: SeriesConfig,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            k_grid: vec![16, 32, 64],
            r_grid: vec![100.0, 200.0, 400.0],
            n_random: 200,
            n_bins: 50,
            percentile: 98.0,
            avoid_footprints: false,
            series: SeriesConfig::default(),
            seed: 0,
        }
    }
}

/// Outcome for one `(k, r)` grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub k: usize,
    pub r: f64,
    pub bc: f64,
    pub theta: f64,
    pub p: Histogram,
    pub q: Histogram,
    /// Exact-match accuracy against labels, when labels were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub records: Vec<CellRecord>,
    pub chosen: TcmParams,
    pub seed: u64,
    pub n_random: usize,
    pub n_bins: usize,
    pub percentile: f64,
}

impl CalibrationReport {
    pub fn chosen_record(&self) -> &CellRecord {
        self.records
            .iter()
            .find(|r| r.k == self.chosen.k && r.r == self.chosen.r)
            .expect("chosen cell is one of the records")
    }
}

/// Calibration result plus the footprint divergence series computed on
/// the way, one list per record.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub report: CalibrationReport,
    pub footprint_series: Vec<Vec<DivergenceSeries>>,
}

impl Calibration {
    /// Fills each record's accuracy from 1-based label indices keyed by
    /// footprint id. Unlabeled footprints are skipped.
    pub fn score_records(&mut self, labels: &HashMap<String, usize>) {
        for (record, series) in self.report.records.iter_mut().zip(&self.footprint_series) {
            let (mut hit, mut n) = (0usize, 0usize);
            for s in series {
                if let Some(&label) = labels.get(&s.footprint_id) {
                    n += 1;
                    if first_crossing_values(&s.values, record.theta).0 == label {
                        hit += 1;
                    }
                }
            }
            record.accuracy = (n > 0).then(|| hit as f64 / n as f64);
        }
    }

    /// Series computed with the chosen `(k, r)`.
    pub fn chosen_series(&self) -> &[DivergenceSeries] {
        let chosen = self.report.chosen;
        let idx = self
            .report
            .records
            .iter()
            .position(|r| r.k == chosen.k && r.r == chosen.r)
            .expect("chosen cell is one of the records");
        &self.footprint_series[idx]
    }
}

/// Index of the smallest BC; ties go to smaller `k`, then smaller `r`.
pub fn select_cell(records: &[CellRecord]) -> Option<usize> {
    (0..records.len()).min_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.bc
            .total_cmp(&rb.bc)
            .then(ra.k.cmp(&rb.k))
            .then(ra.r.total_cmp(&rb.r))
    })
}

pub fn calibrate(
    workers: &Workers,
    scenes: &[Scene],
    footprints: &[Polygon],
    config: &CalibrationConfig,
) -> Result<Calibration> {
    if config.k_grid.is_empty() || config.r_grid.is_empty() {
        return Err(TcmError::InvalidArgument(
            "calibration grids must be nonempty".into(),
        ));
    }
    if footprints.is_empty() {
        return Err(TcmError::InvalidArgument(
            "no footprints to calibrate on".into(),
        ));
    }
    let reference = scenes
        .last()
        .ok_or_else(|| TcmError::InvalidArgument("no scenes supplied".into()))?;
    let margin = config.r_grid.iter().cloned().fold(0.0, f64::max);
    let random = sample_random_polygons(
        footprints,
        &reference.extent(),
        &RandomPolygonConfig {
            count: config.n_random,
            margin,
            avoid_footprints: config.avoid_footprints,
        },
        config.seed,
    )?;

    let mut records = Vec::new();
    let mut footprint_series = Vec::new();
    for &k in &config.k_grid {
        for &r in &config.r_grid {
            let fp = series_batch(
                workers,
                scenes,
                footprints,
                k,
                r,
                &config.series,
                config.seed,
            )?;
            let rnd = series_batch(workers, scenes, &random, k, r, &config.series, config.seed)?;
            let p_samples = final_values(&fp);
            let q_samples = pooled_values(&rnd);
            let (p, q) = build_pq(&p_samples, &q_samples, config.n_bins, None)?;
            let bc = bhattacharyya(&p, &q)?;
            let theta = percentile_threshold(&q_samples, config.percentile)?;
            log::info!("calibration cell k={k} r={r}: bc={bc:.4} theta={theta:.4}");
            records.push(CellRecord {
                k,
                r,
                bc,
                theta,
                p,
                q,
                accuracy: None,
            });
            footprint_series.push(fp);
        }
    }
    let best = select_cell(&records).expect("grid is nonempty");
    let chosen = TcmParams {
        k: records[best].k,
        r: records[best].r,
        theta: records[best].theta,
    };
    Ok(Calibration {
        report: CalibrationReport {
            records,
            chosen,
            seed: config.seed,
            n_random: config.n_random,
            n_bins: config.n_bins,
            percentile: config.percentile,
        },
        footprint_series,
    })
}
