//! Clusters each yearly chip of one footprint and prints the divergence
//! between the cluster mix inside the footprint and around it.

use tcm::geom_raster::extract_chip_stack;
use tcm::matching::{decide, divergence_series, SeriesConfig, TcmParams};
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let data = generate(&SynthConfig {
        height: 96,
        width: 96,
        n_footprints: 12,
        ..Default::default()
    })?;
    let (k, r) = (16, 200.0);

    for (poly, truth) in data.footprints.iter().zip(&data.labels).take(4) {
        let chips = extract_chip_stack(&data.scenes, poly, r)?;
        let series = divergence_series(&chips, k, &SeriesConfig::default(), 0)?;
        let values: Vec<String> = series.values.iter().map(|d| format!("{d:.3}")).collect();
        let det = decide(series, TcmParams { k, r, theta: 0.5 })?;
        println!(
            "{}: d = [{}] -> {} (truth {})",
            poly.id(),
            values.join(", "),
            det.year,
            truth.label_year
        );
    }
    Ok(())
}
