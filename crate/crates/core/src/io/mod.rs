//! File formats read and written by the command line tools.

pub mod geojson;
pub mod tcs;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationReport;
use crate::error::{Result, TcmError};
use crate::evaluation::SplitSummary;
use crate::geom_raster::{AffineGeoTransform, Scene};
use crate::matching::DetectionResult;
use crate::synthgen::TruthLabel;

pub use geojson::FootprintRecord;

/// Metadata stored next to each scene raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSidecar {
    pub year: i32,
    pub geotransform: AffineGeoTransform,
}

pub fn scene_file_stem(index: usize) -> String {
    format!("scene_{index:03}")
}

/// Writes `scene_NNN.tcs` and `scene_NNN.json` for every scene.
pub fn write_scene_dir(dir: &Path, scenes: &[Scene]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| TcmError::io(dir, e))?;
    for (i, s) in scenes.iter().enumerate() {
        let stem = scene_file_stem(i);
        tcs::write(
            &dir.join(format!("{stem}.tcs")),
            std::slice::from_ref(&s.raster),
            s.dtype,
            None,
        )?;
        let sidecar = SceneSidecar {
            year: s.year,
            geotransform: s.geotransform,
        };
        write_json(&dir.join(format!("{stem}.json")), &sidecar)?;
    }
    Ok(())
}

/// Reads every `*.tcs` scene in `dir` with its JSON sidecar, ordered by year.
pub fn read_scene_dir(dir: &Path) -> Result<Vec<Scene>> {
    let entries = fs::read_dir(dir).map_err(|e| TcmError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| TcmError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "tcs") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(TcmError::format(
            "scene directory",
            dir,
            "no .tcs scenes found",
        ));
    }
    let mut scenes = Vec::with_capacity(paths.len());
    for path in paths {
        let image = tcs::read(&path)?;
        if image.layers.len() != 1 || image.mask.is_some() {
            return Err(TcmError::format(
                "TCS scene",
                &path,
                "scene files hold one layer and no mask",
            ));
        }
        let sidecar_path = path.with_extension("json");
        let sidecar: SceneSidecar = read_json(&sidecar_path, "scene sidecar")?;
        scenes.push(Scene {
            year: sidecar.year,
            geotransform: sidecar.geotransform,
            raster: image.layers.into_iter().next().expect("one layer"),
            dtype: image.dtype,
        });
    }
    scenes.sort_by_key(|s| s.year);
    if let Some(w) = scenes.windows(2).find(|w| w[0].year == w[1].year) {
        return Err(TcmError::format(
            "scene directory",
            dir,
            format!("two scenes for year {}", w[0].year),
        ));
    }
    Ok(scenes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &'static str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| TcmError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| TcmError::format(what, path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| TcmError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| TcmError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> TcmError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => TcmError::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        TcmError::format("CSV", path, e)
    }
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| TcmError::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[TruthLabel]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for l in labels {
        w.serialize(l).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_labels(path: &Path) -> Result<Vec<TruthLabel>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// Builds labels from GeoJSON `label_year` properties and the scene years.
pub fn labels_from_records(records: &[FootprintRecord], years: &[i32]) -> Result<Vec<TruthLabel>> {
    records
        .iter()
        .filter_map(|r| r.label_year.map(|y| (r.polygon.id(), y)))
        .map(|(id, year)| {
            let pos = years.iter().position(|&y| y == year).ok_or_else(|| {
                TcmError::InconsistentInputs(format!(
                    "footprint {id}: label year {year} has no scene"
                ))
            })?;
            Ok(TruthLabel {
                footprint_id: id.to_string(),
                label_index: pos + 1,
                label_year: year,
            })
        })
        .collect()
}

/// Detections sorted by footprint id.
pub fn write_detections(path: &Path, detections: &[DetectionResult]) -> Result<()> {
    let mut sorted: Vec<&DetectionResult> = detections.iter().collect();
    sorted.sort_by(|a, b| a.footprint_id.cmp(&b.footprint_id));
    let t = sorted.iter().map(|d| d.series.len()).max().unwrap_or(0);
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = [
        "footprint_id",
        "predicted_index",
        "predicted_year",
        "crossed",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=t).map(|l| format!("d_{l}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for d in sorted {
        let mut row = vec![
            d.footprint_id.clone(),
            d.index.to_string(),
            d.year.to_string(),
            d.crossed.to_string(),
        ];
        row.extend(d.series.values.iter().map(|v| v.to_string()));
        row.resize(header.len(), String::new());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// One row per grid cell, ready for plotting.
pub fn write_calibration_csv(path: &Path, report: &CalibrationReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "r", "bc", "theta", "accuracy", "chosen"])
        .map_err(|e| csv_error(path, e))?;
    for rec in &report.records {
        let chosen = rec.k == report.chosen.k && rec.r == report.chosen.r;
        w.write_record([
            rec.k.to_string(),
            rec.r.to_string(),
            rec.bc.to_string(),
            rec.theta.to_string(),
            rec.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            chosen.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// One row per method and repeat.
pub fn write_metrics_csv(path: &Path, summaries: &[SplitSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "method",
        "repeat",
        "n_train",
        "n_test",
        "accuracy",
        "mae_years",
        "mae_index",
    ])
    .map_err(|e| csv_error(path, e))?;
    for s in summaries {
        for r in &s.repeats {
            w.write_record([
                s.method.clone(),
                r.repeat.to_string(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.accuracy.to_string(),
                r.mae_years.to_string(),
                r.mae_index.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom_raster::{Raster, SampleType};
    use crate::matching::{DivergenceSeries, TcmParams};

    fn scene(year: i32, fill: f32) -> Scene {
        Scene {
            year,
            geotransform: AffineGeoTransform::north_up(100.0, 200.0, 2.0).unwrap(),
            raster: Raster::new(2, 3, 1, vec![fill; 6]).unwrap(),
            dtype: SampleType::U8,
        }
    }

    #[test]
    fn scene_dir_round_trip_orders_by_year() {
        let dir = tempfile::tempdir().unwrap();
        let scenes = vec![scene(2014, 9.0), scene(2012, 3.0)];
        write_scene_dir(dir.path(), &scenes).unwrap();
        let back = read_scene_dir(dir.path()).unwrap();
        assert_eq!(back, vec![scenes[1].clone(), scenes[0].clone()]);
        let sidecar = fs::read_to_string(dir.path().join("scene_000.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(v["year"], 2014);
        assert_eq!(
            v["geotransform"],
            serde_json::json!([2.0, 0.0, 100.0, 0.0, -2.0, 200.0])
        );
    }

    #[test]
    fn missing_sidecar_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        write_scene_dir(dir.path(), &[scene(2012, 1.0)]).unwrap();
        fs::remove_file(dir.path().join("scene_000.json")).unwrap();
        let err = read_scene_dir(dir.path()).unwrap_err();
        assert_eq!(err.code(), "IoError");
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = vec![
            TruthLabel {
                footprint_id: "a".into(),
                label_index: 2,
                label_year: 2013,
            },
            TruthLabel {
                footprint_id: "b".into(),
                label_index: 1,
                label_year: 2012,
            },
        ];
        write_labels(&path, &labels).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("footprint_id,label_index,label_year\n"));
        assert_eq!(read_labels(&path).unwrap(), labels);
    }

    #[test]
    fn detections_are_sorted_with_series_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let params = TcmParams {
            k: 2,
            r: 1.0,
            theta: 0.5,
        };
        let det = |id: &str, index, crossed, values: Vec<f64>| DetectionResult {
            footprint_id: id.into(),
            index,
            year: 2010 + index as i32,
            crossed,
            series: DivergenceSeries {
                footprint_id: id.into(),
                values,
                years: vec![2011, 2012],
            },
            params,
        };
        write_detections(
            &path,
            &[
                det("z", 2, false, vec![0.1, 0.25]),
                det("a", 1, true, vec![0.75, 1.0]),
            ],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "footprint_id,predicted_index,predicted_year,crossed,d_1,d_2\n\
             a,1,2011,true,0.75,1\n\
             z,2,2012,false,0.1,0.25\n"
        );
    }
}
