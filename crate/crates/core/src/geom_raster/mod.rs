//! Footprint geometry, georeferencing and per-footprint chip extraction.

mod chips;
mod polygon;
mod raster;
mod rasterize;
mod transform;

pub use chips::{extract_chip_stack, ChipStack};
pub use polygon::{Polygon, Rect};
pub use raster::{Mask, Raster, SampleType, Scene};
pub use rasterize::{buffered_extent, rasterize_polygon};
pub use transform::AffineGeoTransform;
