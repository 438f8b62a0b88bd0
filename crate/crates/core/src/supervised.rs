//! Label-driven variants: a fitted threshold, multinomial logistic
//! regression over per-layer features, average-color distances,
//! color-over-time features and a constant mode predictor.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};
use crate::geom_raster::{ChipStack, Raster};
use crate::matching::first_crossing_values;
use crate::seed;

/// Exact-match accuracy of `first_crossing` at `theta`.
pub fn threshold_accuracy(series: &[(&[f64], usize)], theta: f64) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let hits = series
        .iter()
        .filter(|(v, label)| first_crossing_values(v, theta).0 == *label)
        .count();
    hits as f64 / series.len() as f64
}

/// Candidate thresholds: one below every value, the midpoints of
/// consecutive distinct values, and one above every value.
pub fn threshold_candidates(series: &[(&[f64], usize)]) -> Vec<f64> {
    let mut values: Vec<f64> = series.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (Some(&lo), Some(&hi)) = (values.first(), values.last()) else {
        return vec![0.0];
    };
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(lo - 1.0);
    out.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(hi + 1.0);
    out
}

/// Threshold maximizing training accuracy; ties go to the smallest.
pub fn fit_threshold(series: &[(&[f64], usize)]) -> Result<f64> {
    if series.is_empty() {
        return Err(TcmError::InvalidArgument("no labeled series to fit".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for theta in threshold_candidates(series) {
        let acc = threshold_accuracy(series, theta);
        if acc > best.0 {
            best = (acc, theta);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub lambda: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Standard deviation of the random weight initialization.
    pub init_scale: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            iterations: 500,
            learning_rate: 0.1,
            init_scale: 0.01,
        }
    }
}

/// Mean cross-entropy plus `lambda/2 * |W|^2` over standardized features.
///
/// Parameters are laid out as `classes` rows of `dim` weights followed by
/// `classes` biases. Biases are not penalized.
#[derive(Clone, Debug)]
pub struct LrObjective {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    classes: usize,
    dim: usize,
    lambda: f64,
}

impl LrObjective {
    /// `y` holds 0-based class indices below `classes`.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, classes: usize, lambda: f64) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(TcmError::InvalidArgument(format!(
                "{} feature rows for {} labels",
                x.len(),
                y.len()
            )));
        }
        let dim = x[0].len();
        if let Some(row) = x.iter().find(|r| r.len() != dim) {
            return Err(TcmError::FeatureDimMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(&c) = y.iter().find(|&&c| c >= classes) {
            return Err(TcmError::InvalidArgument(format!(
                "class {c} outside 0..{classes}"
            )));
        }
        Ok(Self {
            x,
            y,
            classes,
            dim,
            lambda,
        })
    }

    pub fn n_params(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    fn probabilities(&self, params: &[f64], row: &[f64]) -> Vec<f64> {
        softmax(&logits(params, self.classes, self.dim, row))
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let ce: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(row, &c)| {
                let z = logits(params, self.classes, self.dim, row);
                log_sum_exp(&z) - z[c]
            })
            .sum::<f64>()
            / self.x.len() as f64;
        let reg: f64 = params[..self.classes * self.dim]
            .iter()
            .map(|w| w * w)
            .sum();
        ce + 0.5 * self.lambda * reg
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (k, d) = (self.classes, self.dim);
        let mut g = vec![0.0; self.n_params()];
        let n = self.x.len() as f64;
        for (row, &c) in self.x.iter().zip(&self.y) {
            let mut p = self.probabilities(params, row);
            p[c] -= 1.0;
            for (j, pj) in p.iter().enumerate() {
                for (gw, xv) in g[j * d..(j + 1) * d].iter_mut().zip(row) {
                    *gw += pj * xv / n;
                }
                g[k * d + j] += pj / n;
            }
        }
        for (gw, w) in g[..k * d].iter_mut().zip(params) {
            *gw += self.lambda * w;
        }
        g
    }
}

fn logits(params: &[f64], classes: usize, dim: usize, row: &[f64]) -> Vec<f64> {
    (0..classes)
        .map(|j| {
            let w = &params[j * dim..(j + 1) * dim];
            w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + params[classes * dim + j]
        })
        .collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Multinomial logistic regression over `classes` time steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub classes: usize,
    pub dim: usize,
    /// Row-major `classes x dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub config: LrConfig,
    pub seed: u64,
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn probabilities(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim {
            return Err(TcmError::FeatureDimMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        let z = logits(
            &self.params(),
            self.classes,
            self.dim,
            &self.standardize(row),
        );
        Ok(softmax(&z))
    }

    /// 1-based predicted class; ties go to the lowest index.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        let p = self.probabilities(row)?;
        let mut best = 0;
        for (j, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = j;
            }
        }
        Ok(best + 1)
    }
}

/// Trains on rows of `features` with 1-based labels in `1..=classes`.
pub fn fit_lr(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: LrConfig,
    seed: u64,
) -> Result<LogisticModel> {
    if labels.iter().any(|&l| l == 0 || l > classes) {
        return Err(TcmError::InvalidArgument(format!(
            "labels must lie in 1..={classes}"
        )));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(TcmError::DegenerateLabels);
    }
    let dim = features.first().map_or(0, Vec::len);
    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|c| features.iter().map(|r| r[c]).sum::<f64>() / n)
        .collect();
    let scale: Vec<f64> = (0..dim)
        .map(|c| {
            let var = features
                .iter()
                .map(|r| (r[c] - mean[c]).powi(2))
                .sum::<f64>()
                / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let y: Vec<usize> = labels.iter().map(|l| l - 1).collect();
    let objective = LrObjective::new(x, y, classes, config.lambda)?;

    let mut rng = seed::stream(seed, "lr-init", 0);
    let normal = Normal::new(0.0, config.init_scale)
        .map_err(|e| TcmError::InvalidArgument(format!("init scale: {e}")))?;
    let mut params: Vec<f64> = (0..classes * dim)
        .map(|_| normal.sample(&mut rng))
        .collect();
    params.extend(std::iter::repeat_n(0.0, classes));

    let mut loss_history = Vec::with_capacity(config.iterations + 1);
    loss_history.push(objective.loss(&params));
    for _ in 0..config.iterations {
        let g = objective.gradient(&params);
        for (p, gv) in params.iter_mut().zip(&g) {
            *p -= config.learning_rate * gv;
        }
        loss_history.push(objective.loss(&params));
    }
    let bias = params.split_off(classes * dim);
    Ok(LogisticModel {
        classes,
        dim,
        weights: params,
        bias,
        mean,
        scale,
        config,
        seed,
        loss_history,
    })
}

fn region_means(layer: &Raster, chips: &ChipStack) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = layer.channels();
    let (mut inside, mut outside) = (vec![0.0; c], vec![0.0; c]);
    let (mut n_in, mut n_out) = (0usize, 0usize);
    for (px, &m) in layer.pixels().zip(chips.mask().as_slice()) {
        let (acc, n) = if m {
            (&mut inside, &mut n_in)
        } else {
            (&mut outside, &mut n_out)
        };
        *n += 1;
        for (a, &v) in acc.iter_mut().zip(px) {
            *a += v as f64;
        }
    }
    if n_in == 0 {
        return Err(TcmError::EmptyRegion("footprint"));
    }
    if n_out == 0 {
        return Err(TcmError::EmptyRegion("neighborhood"));
    }
    inside.iter_mut().for_each(|v| *v /= n_in as f64);
    outside.iter_mut().for_each(|v| *v /= n_out as f64);
    Ok((inside, outside))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per layer, the distance between the mean footprint color and the mean
/// neighborhood color.
pub fn avg_color_series(chips: &ChipStack) -> Result<Vec<f64>> {
    chips
        .layers()
        .iter()
        .map(|layer| {
            let (inside, outside) = region_means(layer, chips)?;
            Ok(euclidean(&inside, &outside))
        })
        .collect()
}

/// Distances between the mean footprint colors of consecutive layers.
pub fn color_over_time_features(chips: &ChipStack) -> Result<Vec<f64>> {
    if chips.len() < 2 {
        return Err(TcmError::SeriesTooShort(chips.len()));
    }
    let means = chips
        .layers()
        .iter()
        .map(|layer| region_means(layer, chips).map(|m| m.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(means.windows(2).map(|w| euclidean(&w[0], &w[1])).collect())
}

/// Most frequent training label; ties go to the earliest.
pub fn mode_predictor(labels: &[usize]) -> Result<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (&l, &c) in &counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l)
        .ok_or_else(|| TcmError::InvalidArgument("no labels for the mode".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom_raster::{AffineGeoTransform, Mask};

    fn pairs(v: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
        v.iter().map(|(s, l)| (s.as_slice(), *l)).collect()
    }

    #[test]
    fn single_series_threshold_is_midpoint() {
        let data = vec![(vec![0.1, 0.9], 2)];
        assert_eq!(fit_threshold(&pairs(&data)).unwrap(), 0.5);
    }

    #[test]
    fn flat_series_labeled_last_push_threshold_above_max() {
        let data = vec![(vec![0.2, 0.2, 0.2], 3), (vec![0.1, 0.1, 0.1], 3)];
        let theta = fit_threshold(&pairs(&data)).unwrap();
        assert!(theta > 0.2);
        assert_eq!(threshold_accuracy(&pairs(&data), theta), 1.0);
    }

    #[test]
    fn separable_set_is_fit_exactly() {
        let data = vec![
            (vec![0.1, 2.0, 2.1], 2),
            (vec![0.2, 0.3, 1.9], 3),
            (vec![1.5, 1.6, 1.7], 1),
        ];
        let theta = fit_threshold(&pairs(&data)).unwrap();
        assert_eq!(threshold_accuracy(&pairs(&data), theta), 1.0);
    }

    #[test]
    fn lr_separates_two_classes() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| if i < 20 { 1 } else { 2 }).collect();
        let m = fit_lr(&x, &y, 2, LrConfig::default(), 7).unwrap();
        let hits = x
            .iter()
            .zip(&y)
            .filter(|(r, &l)| m.predict(r).unwrap() == l)
            .count();
        assert_eq!(hits, 40);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_lr(&x, &[3, 3], 5, LrConfig::default(), 0),
            Err(TcmError::DegenerateLabels)
        ));
    }

    #[test]
    fn zero_weights_are_uniform() {
        let m = LogisticModel {
            classes: 4,
            dim: 2,
            weights: vec![0.0; 8],
            bias: vec![0.0; 4],
            mean: vec![0.0; 2],
            scale: vec![1.0; 2],
            config: LrConfig::default(),
            seed: 0,
            loss_history: vec![],
        };
        for p in m.probabilities(&[3.0, -1.0]).unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert_eq!(m.predict(&[3.0, -1.0]).unwrap(), 1);
    }

    fn two_tone_chips(layers: &[([f32; 3], [f32; 3])]) -> ChipStack {
        let mut mask = Mask::empty(4, 4);
        for r in 1..3 {
            for c in 1..3 {
                mask.set(r, c, true);
            }
        }
        let rasters = layers
            .iter()
            .map(|(inside, outside)| {
                let mut img = Raster::zeros(4, 4, 3).unwrap();
                for r in 0..4 {
                    for c in 0..4 {
                        let v = if mask.get(r, c) { inside } else { outside };
                        img.pixel_mut(r, c).copy_from_slice(v);
                    }
                }
                img
            })
            .collect();
        let years = (0..layers.len() as i32).map(|y| 2000 + y).collect();
        ChipStack::new(
            "fp",
            rasters,
            mask,
            years,
            1.0,
            AffineGeoTransform::identity(),
        )
        .unwrap()
    }

    #[test]
    fn avg_color_distance_by_hand() {
        let chips = two_tone_chips(&[
            ([10.0; 3], [10.0; 3]),
            ([10.0, 10.0, 10.0], [13.0, 14.0, 10.0]),
        ]);
        let s = avg_color_series(&chips).unwrap();
        assert_eq!(s, vec![0.0, 5.0]);
    }

    #[test]
    fn color_over_time_has_t_minus_one_features() {
        let flat = ([50.0; 3], [20.0; 3]);
        let built = ([200.0, 50.0, 50.0], [20.0; 3]);
        let chips = two_tone_chips(&[flat, flat, flat, built, built]);
        let f = color_over_time_features(&chips).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[2], 150.0);
        assert_eq!(f[3], 0.0);
        assert!(matches!(
            color_over_time_features(&two_tone_chips(&[flat])),
            Err(TcmError::SeriesTooShort(1))
        ));
    }

    #[test]
    fn mode_examples() {
        assert_eq!(mode_predictor(&[2011, 2011, 2013]).unwrap(), 2011);
        assert_eq!(mode_predictor(&[2, 1]).unwrap(), 1);
        assert_eq!(mode_predictor(&[4]).unwrap(), 4);
    }
}
