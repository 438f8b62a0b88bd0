//! Burns an L-shaped footprint with a courtyard into a small grid and
//! prints the mask next to its buffered extent.

use tcm::geom_raster::{buffered_extent, rasterize_polygon, AffineGeoTransform, Polygon, Rect};

fn main() -> tcm::Result<()> {
    let footprint = Polygon::new(
        "bldg-7",
        vec![
            [2.0, 2.0],
            [14.0, 2.0],
            [14.0, 6.0],
            [7.0, 6.0],
            [7.0, 12.0],
            [2.0, 12.0],
        ],
        vec![vec![[3.0, 3.0], [5.0, 3.0], [5.0, 5.0], [3.0, 5.0]]],
    )?;

    // one world unit per pixel, origin at the top-left corner
    let (height, width) = (14, 16);
    let gt = AffineGeoTransform::north_up(0.0, height as f64, 1.0)?;
    let extent = Rect::new(0.0, 0.0, width as f64, height as f64);
    let mask = rasterize_polygon(&footprint, &extent, &gt, (height, width))?;

    for row in 0..height {
        let line: String = (0..width)
            .map(|col| if mask.get(row, col) { '#' } else { '.' })
            .collect();
        println!("{line}");
    }
    let inside = mask.as_slice().iter().filter(|v| **v).count();
    println!("area {:.1}, cells inside {inside}", footprint.area());

    let b = buffered_extent(&footprint, 3.0)?;
    println!(
        "buffered extent r=3: ({}, {}) .. ({}, {})",
        b.min_x, b.min_y, b.max_x, b.max_y
    );
    Ok(())
}
