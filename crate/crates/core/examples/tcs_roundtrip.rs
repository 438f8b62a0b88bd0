//! Writes a footprint's chip stack with its mask to the TCS container and
//! reads it back.

use tcm::geom_raster::{extract_chip_stack, SampleType};
use tcm::io::tcs;
use tcm::synthgen::{generate, SynthConfig};

fn main() -> tcm::Result<()> {
    let data = generate(&SynthConfig {
        height: 64,
        width: 64,
        n_footprints: 4,
        ..Default::default()
    })?;
    let chips = extract_chip_stack(&data.scenes, &data.footprints[0], 100.0)?;

    let bytes = tcs::encode(chips.layers(), SampleType::U8, Some(chips.mask()))?;
    let back = tcs::decode(&bytes).map_err(tcm::TcmError::Internal)?;
    let (h, w, c) = chips.shape();
    println!(
        "{} layers of {h}x{w}x{c}, {} bytes, magic {:?}",
        chips.len(),
        bytes.len(),
        String::from_utf8_lossy(&bytes[..4])
    );
    assert_eq!(back.layers, chips.layers());
    assert_eq!(back.mask.as_ref(), Some(chips.mask()));
    println!("round trip ok");
    Ok(())
}
