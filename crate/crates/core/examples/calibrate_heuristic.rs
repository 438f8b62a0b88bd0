//! Chooses k, r and the threshold without labels by comparing divergences
//! of real footprints with those of randomly placed copies.

use std::collections::HashMap;

use tcm::calibration::{calibrate, CalibrationConfig};
use tcm::pipeline::Workers;
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let data = generate(&SynthConfig {
        height: 128,
        width: 128,
        n_footprints: 40,
        ..Default::default()
    })?;
    let config = CalibrationConfig {
        k_grid: vec![8, 16, 32],
        r_grid: vec![100.0, 200.0, 400.0],
        n_random: 60,
        ..Default::default()
    };
    let workers = Workers::new(4)?;
    let mut cal = calibrate(&workers, &data.scenes, &data.footprints, &config)?;

    // labels are only used to report how good each cell would have been
    let labels: HashMap<String, usize> = data
        .labels
        .iter()
        .map(|l| (l.footprint_id.clone(), l.label_index))
        .collect();
    cal.score_records(&labels);

    println!(
        "{:>4} {:>6} {:>8} {:>8} {:>6}",
        "k", "r", "BC", "theta", "acc"
    );
    for rec in &cal.report.records {
        println!(
            "{:>4} {:>6} {:>8.4} {:>8.4} {:>6.3}",
            rec.k,
            rec.r,
            rec.bc,
            rec.theta,
            rec.accuracy.unwrap_or(f64::NAN)
        );
    }
    let c = cal.report.chosen;
    println!("chosen: k={} r={} theta={:.4}", c.k, c.r, c.theta);
    Ok(())
}
