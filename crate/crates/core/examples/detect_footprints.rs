//! End to end: calibrate, label every footprint, score against the truth.

use tcm::calibration::{calibrate, CalibrationConfig};
use tcm::evaluation::{score, Prediction};
use tcm::geom_raster::extract_chip_stack;
use tcm::matching::{detect, SeriesConfig};
use tcm::pipeline::Workers;
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let data = generate(&SynthConfig {
        height: 128,
        width: 128,
        n_footprints: 40,
        seed: 9,
        ..Default::default()
    })?;
    let workers = Workers::new(4)?;
    let config = CalibrationConfig {
        k_grid: vec![16],
        r_grid: vec![100.0, 200.0],
        n_random: 60,
        ..Default::default()
    };
    let params = calibrate(&workers, &data.scenes, &data.footprints, &config)?
        .report
        .chosen;

    let detections = workers.try_map(&data.footprints, |poly| {
        let chips = extract_chip_stack(&data.scenes, poly, params.r)?;
        detect(&chips, params, &SeriesConfig::default(), 0)
    })?;

    let preds: Vec<Prediction> = detections
        .iter()
        .map(|d| Prediction {
            footprint_id: d.footprint_id.clone(),
            index: d.index,
            year: d.year,
        })
        .collect();
    let never = detections.iter().filter(|d| !d.crossed).count();
    let result = score(&preds, &data.labels)?;
    println!("k={} r={} theta={:.4}", params.k, params.r, params.theta);
    println!(
        "accuracy {:.3}, MAE {:.3} years, {never} footprints never crossed",
        result.accuracy, result.mae_years
    );
    Ok(())
}
