//! Metrics, repeated train/test splits and the method zoo they compare.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Result, TcmError};
use crate::geom_raster::{Polygon, Scene};
use crate::matching::first_crossing_values;
use crate::pipeline::{chip_stacks, Workers};
use crate::seed;
use crate::supervised::{
    avg_color_series, color_over_time_features, fit_lr, fit_threshold, mode_predictor,
    threshold_accuracy, LrConfig,
};
use crate::synthgen::TruthLabel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub footprint_id: String,
    pub index: usize,
    pub year: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub footprint_id: String,
    pub year_error: i64,
    pub index_error: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n: usize,
    pub accuracy: f64,
    /// Mean absolute error in calendar years.
    pub mae_years: f64,
    /// Mean absolute error in layer steps.
    pub mae_index: f64,
    pub residuals: Vec<Residual>,
}

/// Scores predictions against every label. Extra predictions are ignored.
pub fn score(predictions: &[Prediction], labels: &[TruthLabel]) -> Result<EvalResult> {
    if labels.is_empty() {
        return Err(TcmError::InvalidArgument(
            "no labels to score against".into(),
        ));
    }
    let by_id: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.footprint_id.as_str(), p))
        .collect();
    let mut residuals = Vec::with_capacity(labels.len());
    for l in labels {
        let p = by_id
            .get(l.footprint_id.as_str())
            .ok_or_else(|| TcmError::MissingPrediction(l.footprint_id.clone()))?;
        residuals.push(Residual {
            footprint_id: l.footprint_id.clone(),
            year_error: p.year as i64 - l.label_year as i64,
            index_error: p.index as i64 - l.label_index as i64,
        });
    }
    let n = residuals.len();
    let hits = residuals.iter().filter(|r| r.year_error == 0).count();
    let abs_years: i64 = residuals.iter().map(|r| r.year_error.abs()).sum();
    let abs_index: i64 = residuals.iter().map(|r| r.index_error.abs()).sum();
    Ok(EvalResult {
        n,
        accuracy: hits as f64 / n as f64,
        mae_years: abs_years as f64 / n as f64,
        mae_index: abs_index as f64 / n as f64,
        residuals,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied values share the mean rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(TcmError::InvalidArgument(format!(
            "spearman needs two equal-length samples of at least 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TcmError::DegenerateRanks);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TcmSemi,
    TcmSupervised,
    TcmLr,
    AvgcolorThreshold,
    AvgcolorLr,
    ColorOverTime,
    Mode,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::TcmSemi,
        Method::TcmSupervised,
        Method::TcmLr,
        Method::AvgcolorThreshold,
        Method::AvgcolorLr,
        Method::ColorOverTime,
        Method::Mode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TcmSemi => "tcm_semi",
            Method::TcmSupervised => "tcm_supervised",
            Method::TcmLr => "tcm_lr",
            Method::AvgcolorThreshold => "avgcolor_threshold",
            Method::AvgcolorLr => "avgcolor_lr",
            Method::ColorOverTime => "color_over_time",
            Method::Mode => "mode",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TcmError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TcmError::Config(format!("unknown method {s:?}")))
    }
}

/// Per-footprint features for one parameter setting.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub k: Option<usize>,
    pub r: f64,
    pub rows: Vec<Vec<f64>>,
}

/// Labeled footprints with every feature the methods need, aligned by
/// position with `labels`.
#[derive(Clone, Debug)]
pub struct EvalDataset {
    pub labels: Vec<TruthLabel>,
    pub years: Vec<i32>,
    /// Divergence series for every calibration grid cell.
    pub tcm: Vec<FeatureSet>,
    /// Average-color distance series for every buffer radius.
    pub avg_color: Vec<FeatureSet>,
    pub color_over_time: Vec<Vec<f64>>,
    /// 1-based predictions of the label-free calibrated detector.
    pub semi: Vec<usize>,
}

impl EvalDataset {
    /// Gathers features for the labeled subset of `footprints`.
    /// `calibration` must come from the same footprints in the same order.
    pub fn build(
        workers: &Workers,
        scenes: &[Scene],
        footprints: &[Polygon],
        labels: &[TruthLabel],
        calibration: &Calibration,
    ) -> Result<Self> {
        let position: HashMap<&str, usize> = footprints
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id(), i))
            .collect();
        let rows = labels
            .iter()
            .map(|l| {
                position
                    .get(l.footprint_id.as_str())
                    .copied()
                    .ok_or_else(|| {
                        TcmError::InconsistentInputs(format!(
                            "label for unknown footprint {}",
                            l.footprint_id
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let years: Vec<i32> = scenes.iter().map(|s| s.year).collect();
        let pick = |all: &[Vec<f64>]| rows.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();

        let tcm = calibration
            .report
            .records
            .iter()
            .zip(&calibration.footprint_series)
            .map(|(rec, series)| {
                let values: Vec<Vec<f64>> = series.iter().map(|s| s.values.clone()).collect();
                FeatureSet {
                    k: Some(rec.k),
                    r: rec.r,
                    rows: pick(&values),
                }
            })
            .collect();

        let labeled: Vec<Polygon> = rows.iter().map(|&i| footprints[i].clone()).collect();
        let mut radii: Vec<f64> = calibration.report.records.iter().map(|r| r.r).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let mut avg_color = Vec::new();
        let mut color_over_time = Vec::new();
        for (i, &r) in radii.iter().enumerate() {
            let chips = chip_stacks(workers, scenes, &labeled, r)?;
            let rows = workers.try_map(&chips, avg_color_series)?;
            avg_color.push(FeatureSet { k: None, r, rows });
            if i == 0 {
                color_over_time = workers.try_map(&chips, color_over_time_features)?;
            }
        }

        let chosen = calibration.chosen_series();
        let theta = calibration.report.chosen.theta;
        let semi = rows
            .iter()
            .map(|&i| first_crossing_values(&chosen[i].values, theta).0)
            .collect();
        Ok(Self {
            labels: labels.to_vec(),
            years,
            tcm,
            avg_color,
            color_over_time,
            semi,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn label_indices(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i].label_index).collect()
    }

    pub fn predictions(&self, idx: &[usize], predicted: &[usize]) -> Vec<Prediction> {
        idx.iter()
            .zip(predicted)
            .map(|(&i, &p)| Prediction {
                footprint_id: self.labels[i].footprint_id.clone(),
                index: p,
                year: self.years[p - 1],
            })
            .collect()
    }

    /// Fits `method` on the `train` rows and predicts 1-based layer indices
    /// for the `test` rows.
    pub fn fit_predict(
        &self,
        method: Method,
        train: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<Vec<usize>> {
        let classes = self.years.len();
        let y = self.label_indices(train);
        match method {
            Method::TcmSemi => Ok(test.iter().map(|&i| self.semi[i]).collect()),
            Method::TcmSupervised => threshold_method(&self.tcm, train, test, &y),
            Method::AvgcolorThreshold => threshold_method(&self.avg_color, train, test, &y),
            Method::TcmLr => lr_method(&self.tcm, train, test, &y, classes, seed),
            Method::AvgcolorLr => lr_method(&self.avg_color, train, test, &y, classes, seed),
            Method::ColorOverTime => {
                let set = FeatureSet {
                    k: None,
                    r: 0.0,
                    rows: self.color_over_time.clone(),
                };
                lr_method(std::slice::from_ref(&set), train, test, &y, classes, seed)
            }
            Method::Mode => {
                let m = mode_predictor(&y)?;
                Ok(vec![m; test.len()])
            }
        }
    }
}

/// Fits a threshold per feature set and keeps the set with the best
/// training accuracy; ties keep the earlier set.
fn threshold_method(
    sets: &[FeatureSet],
    train: &[usize],
    test: &[usize],
    y: &[usize],
) -> Result<Vec<usize>> {
    let mut best: Option<(f64, usize, f64)> = None;
    for (s, set) in sets.iter().enumerate() {
        let pairs: Vec<(&[f64], usize)> = train
            .iter()
            .zip(y)
            .map(|(&i, &l)| (set.rows[i].as_slice(), l))
            .collect();
        let theta = fit_threshold(&pairs)?;
        let acc = threshold_accuracy(&pairs, theta);
        if best.is_none_or(|(a, _, _)| acc > a) {
            best = Some((acc, s, theta));
        }
    }
    let (_, s, theta) = best.ok_or_else(|| TcmError::InvalidArgument("no feature sets".into()))?;
    Ok(test
        .iter()
        .map(|&i| first_crossing_values(&sets[s].rows[i], theta).0)
        .collect())
}

fn lr_method(
    sets: &[FeatureSet],
    train: &[usize],
    test: &[usize],
    y: &[usize],
    classes: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut best = None;
    for set in sets {
        let x: Vec<Vec<f64>> = train.iter().map(|&i| set.rows[i].clone()).collect();
        let model = fit_lr(&x, y, classes, LrConfig::default(), seed)?;
        let hits = x
            .iter()
            .zip(y)
            .map(|(row, &l)| model.predict(row).map(|p| (p == l) as usize))
            .sum::<Result<usize>>()?;
        if best.as_ref().is_none_or(|(h, _, _)| hits > *h) {
            best = Some((hits, set, model));
        }
    }
    let (_, set, model) =
        best.ok_or_else(|| TcmError::InvalidArgument("no feature sets".into()))?;
    test.iter().map(|&i| model.predict(&set.rows[i])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub mae_years: f64,
    pub mae_index: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub method: String,
    pub seed: u64,
    pub train_frac: f64,
    pub accuracy: MeanStd,
    pub mae_years: MeanStd,
    pub mae_index: MeanStd,
    pub repeats: Vec<RepeatRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub n_repeats: usize,
    pub train_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_repeats: 50,
            train_frac: 0.8,
            seed: 0,
        }
    }
}

/// Index sets of one seeded shuffle-and-split of `n` items.
pub fn split_indices(
    n: usize,
    train_frac: f64,
    seed: u64,
    repeat: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::stream(seed, "split", repeat as u64));
    let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n.saturating_sub(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Repeated random train/test evaluation of an arbitrary fit-and-predict
/// function over `labels`, which predicts 1-based layer indices.
pub fn repeated_splits_with<F>(
    workers: &Workers,
    labels: &[TruthLabel],
    years: &[i32],
    name: &str,
    config: SplitConfig,
    fit_predict: F,
) -> Result<SplitSummary>
where
    F: Fn(&[usize], &[usize], u64) -> Result<Vec<usize>> + Sync + Send,
{
    if labels.len() < 5 {
        return Err(TcmError::InvalidArgument(format!(
            "need at least 5 labeled footprints, got {}",
            labels.len()
        )));
    }
    if !(config.train_frac > 0.0 && config.train_frac < 1.0) {
        return Err(TcmError::InvalidArgument(format!(
            "train fraction {} outside (0, 1)",
            config.train_frac
        )));
    }
    let repeats: Vec<usize> = (0..config.n_repeats).collect();
    let records = workers.try_map(&repeats, |&rep| {
        let (train, test) = split_indices(labels.len(), config.train_frac, config.seed, rep);
        let predicted = fit_predict(
            &train,
            &test,
            seed::stable_hash(config.seed, name, rep as u64),
        )?;
        if let Some(&bad) = predicted.iter().find(|&&p| p == 0 || p > years.len()) {
            return Err(TcmError::Internal(format!("{name} predicted layer {bad}")));
        }
        let preds: Vec<Prediction> = test
            .iter()
            .zip(&predicted)
            .map(|(&i, &p)| Prediction {
                footprint_id: labels[i].footprint_id.clone(),
                index: p,
                year: years[p - 1],
            })
            .collect();
        let test_labels: Vec<TruthLabel> = test.iter().map(|&i| labels[i].clone()).collect();
        let r = score(&preds, &test_labels)?;
        Ok(RepeatRecord {
            repeat: rep,
            n_train: train.len(),
            n_test: test.len(),
            accuracy: r.accuracy,
            mae_years: r.mae_years,
            mae_index: r.mae_index,
        })
    })?;
    let col = |f: fn(&RepeatRecord) -> f64| MeanStd::of(&records.iter().map(f).collect::<Vec<_>>());
    Ok(SplitSummary {
        method: name.to_string(),
        seed: config.seed,
        train_frac: config.train_frac,
        accuracy: col(|r| r.accuracy),
        mae_years: col(|r| r.mae_years),
        mae_index: col(|r| r.mae_index),
        repeats: records,
    })
}

pub fn repeated_splits(
    workers: &Workers,
    data: &EvalDataset,
    method: Method,
    config: SplitConfig,
) -> Result<SplitSummary> {
    repeated_splits_with(
        workers,
        &data.labels,
        &data.years,
        method.name(),
        config,
        |train, test, s| data.fit_predict(method, train, test, s),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: &str, index: usize, year: i32) -> TruthLabel {
        TruthLabel {
            footprint_id: id.into(),
            label_index: index,
            label_year: year,
        }
    }

    fn pred(id: &str, index: usize, year: i32) -> Prediction {
        Prediction {
            footprint_id: id.into(),
            index,
            year,
        }
    }

    #[test]
    fn perfect_predictions() {
        let labels = vec![label("a", 1, 2011), label("b", 3, 2013)];
        let preds = vec![pred("b", 3, 2013), pred("a", 1, 2011)];
        let r = score(&preds, &labels).unwrap();
        assert_eq!((r.accuracy, r.mae_years, r.mae_index), (1.0, 0.0, 0.0));
    }

    #[test]
    fn half_right_one_year_off() {
        let labels = vec![label("a", 1, 2011), label("b", 1, 2011)];
        let preds = vec![pred("a", 1, 2011), pred("b", 2, 2013)];
        let r = score(&preds, &labels).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.mae_years, 1.0);
        assert_eq!(r.mae_index, 0.5);
    }

    #[test]
    fn missing_prediction_is_reported() {
        let labels = vec![label("a", 1, 2011), label("b", 1, 2011)];
        let err = score(&[pred("a", 1, 2011)], &labels).unwrap_err();
        assert!(matches!(err, TcmError::MissingPrediction(id) if id == "b"));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            spearman(&[1.0, 1.0], &[1.0, 2.0]),
            Err(TcmError::DegenerateRanks)
        ));
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert!("cnn".parse::<Method>().is_err());
    }

    fn toy_labels(n: usize) -> Vec<TruthLabel> {
        (0..n)
            .map(|i| label(&format!("f{i}"), 1 + i % 3, 2010 + (i % 3) as i32))
            .collect()
    }

    #[test]
    fn perfect_method_has_zero_spread() {
        let labels = toy_labels(30);
        let w = Workers::new(2).unwrap();
        let s = repeated_splits_with(
            &w,
            &labels,
            &[2010, 2011, 2012],
            "oracle",
            SplitConfig::default(),
            |_, test, _| Ok(test.iter().map(|&i| labels[i].label_index).collect()),
        )
        .unwrap();
        assert_eq!(s.repeats.len(), 50);
        assert_eq!((s.accuracy.mean, s.accuracy.std), (1.0, 0.0));
        assert_eq!(s.repeats[0].n_test, 6);
    }

    #[test]
    fn splits_are_reproducible_across_pool_sizes() {
        let labels = toy_labels(40);
        let run = |threads| {
            let w = Workers::new(threads).unwrap();
            repeated_splits_with(
                &w,
                &labels,
                &[2010, 2011, 2012],
                "first",
                SplitConfig {
                    seed: 9,
                    ..Default::default()
                },
                |_, test, _| Ok(test.iter().map(|&i| 1 + i % 2).collect()),
            )
            .unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn too_few_labels() {
        let labels = toy_labels(4);
        let w = Workers::new(1).unwrap();
        assert!(repeated_splits_with(
            &w,
            &labels,
            &[2010, 2011, 2012],
            "x",
            SplitConfig::default(),
            |_, t, _| Ok(vec![1; t.len()])
        )
        .is_err());
    }
}
