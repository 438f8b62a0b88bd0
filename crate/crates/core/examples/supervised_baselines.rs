//! Compares every method over repeated train/test splits.

use tcm::calibration::{calibrate, CalibrationConfig};
use tcm::evaluation::{repeated_splits, EvalDataset, Method, SplitConfig};
use tcm::pipeline::Workers;
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let data = generate(&SynthConfig {
        height: 128,
        width: 128,
        n_footprints: 60,
        ..Default::default()
    })?;
    let workers = Workers::new(4)?;
    let config = CalibrationConfig {
        k_grid: vec![8, 16],
        r_grid: vec![100.0, 200.0],
        n_random: 60,
        ..Default::default()
    };
    let cal = calibrate(&workers, &data.scenes, &data.footprints, &config)?;
    let dataset = EvalDataset::build(&workers, &data.scenes, &data.footprints, &data.labels, &cal)?;

    let splits = SplitConfig {
        n_repeats: 20,
        ..Default::default()
    };
    for method in Method::ALL {
        let s = repeated_splits(&workers, &dataset, method, splits)?;
        println!(
            "{:<18} acc {:.3} +- {:.3}   MAE {:.3} years",
            method.name(),
            s.accuracy.mean,
            s.accuracy.std,
            s.mae_years.mean
        );
    }
    Ok(())
}
