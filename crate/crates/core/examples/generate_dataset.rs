//! Generates a small synthetic study area and writes it in the same layout
//! as `tcm generate`.
//!
//! Usage: cargo run --example generate_dataset -- [out_dir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use tcm::io::{self, FootprintRecord};
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synth-small".into()),
    );
    let config = SynthConfig {
        height: 128,
        width: 128,
        n_footprints: 40,
        seed: 3,
        ..Default::default()
    };
    let data = generate(&config)?;

    io::write_scene_dir(&out.join("scenes"), &data.scenes)?;
    let records: Vec<FootprintRecord> = data
        .footprints
        .iter()
        .zip(&data.labels)
        .map(|(p, l)| FootprintRecord {
            polygon: p.clone(),
            label_year: Some(l.label_year),
        })
        .collect();
    io::geojson::write(&out.join("footprints.geojson"), &records)?;
    io::write_labels(&out.join("labels.csv"), &data.labels)?;

    let mut per_year: BTreeMap<i32, usize> = BTreeMap::new();
    for l in &data.labels {
        *per_year.entry(l.label_year).or_default() += 1;
    }
    println!(
        "{} scenes, {} footprints -> {}",
        data.scenes.len(),
        data.footprints.len(),
        out.display()
    );
    for (year, n) in per_year {
        println!("  first seen {year}: {n}");
    }
    Ok(())
}
