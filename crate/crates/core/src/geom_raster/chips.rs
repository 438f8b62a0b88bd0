use super::{buffered_extent, rasterize_polygon, AffineGeoTransform, Mask, Polygon, Raster, Scene};
use crate::error::{Result, TcmError};

/// Time series of image chips cropped around one footprint, plus the
/// footprint mask on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ChipStack {
    footprint_id: String,
    layers: Vec<Raster>,
    mask: Mask,
    years: Vec<i32>,
    radius: f64,
    geotransform: AffineGeoTransform,
}

impl ChipStack {
    pub fn new(
        footprint_id: impl Into<String>,
        layers: Vec<Raster>,
        mask: Mask,
        years: Vec<i32>,
        radius: f64,
        geotransform: AffineGeoTransform,
    ) -> Result<Self> {
        let footprint_id = footprint_id.into();
        let first = layers
            .first()
            .ok_or_else(|| TcmError::InvalidChipStack("no layers".into()))?;
        let shape = first.shape();
        if layers.iter().any(|l| l.shape() != shape) {
            return Err(TcmError::InvalidChipStack("layers differ in shape".into()));
        }
        if (mask.height(), mask.width()) != (shape.0, shape.1) {
            return Err(TcmError::InvalidChipStack(format!(
                "mask {}x{} does not match imagery {}x{}",
                mask.height(),
                mask.width(),
                shape.0,
                shape.1
            )));
        }
        if years.len() != layers.len() {
            return Err(TcmError::InvalidChipStack(format!(
                "{} years for {} layers",
                years.len(),
                layers.len()
            )));
        }
        let ones = mask.count_ones();
        if ones == 0 {
            return Err(TcmError::FootprintOutsideImagery(footprint_id));
        }
        if ones == mask.len() {
            return Err(TcmError::EmptyNeighborhood(footprint_id));
        }
        Ok(Self {
            footprint_id,
            layers,
            mask,
            years,
            radius,
            geotransform,
        })
    }

    pub fn footprint_id(&self) -> &str {
        &self.footprint_id
    }

    pub fn layers(&self) -> &[Raster] {
        &self.layers
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn geotransform(&self) -> &AffineGeoTransform {
        &self.geotransform
    }

    /// Number of time layers.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// `(height, width, channels)` shared by every layer.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.layers[0].shape()
    }
}

/// Crops the buffered extent of `poly` out of every scene and rasterizes
/// the footprint on the same grid.
///
/// The last scene defines the reference grid. Scenes on a different grid
/// are resampled onto it by nearest neighbor. The window is clipped to the
/// reference scene.
pub fn extract_chip_stack(scenes: &[Scene], poly: &Polygon, r: f64) -> Result<ChipStack> {
    let reference = scenes
        .last()
        .ok_or_else(|| TcmError::InvalidArgument("no scenes supplied".into()))?;
    let channels = reference.raster.channels();
    if let Some(bad) = scenes.iter().find(|s| s.raster.channels() != channels) {
        return Err(TcmError::InvalidArgument(format!(
            "scene {} has {} channels, reference has {channels}",
            bad.year,
            bad.raster.channels()
        )));
    }
    let extent = buffered_extent(poly, r)?;
    let gt = reference.geotransform;
    let inverse = gt.inverse();

    let corners = [
        (extent.min_x, extent.min_y),
        (extent.max_x, extent.min_y),
        (extent.min_x, extent.max_y),
        (extent.max_x, extent.max_y),
    ]
    .map(|(x, y)| inverse.apply(x, y));
    let (mut c0, mut c1, mut r0, mut r1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (c, r) in corners {
        c0 = c0.min(c);
        c1 = c1.max(c);
        r0 = r0.min(r);
        r1 = r1.max(r);
    }
    // tolerance keeps grid-aligned extents from picking up a sliver column
    const SNAP: f64 = 1e-9;
    let (h, w) = (
        reference.raster.height() as f64,
        reference.raster.width() as f64,
    );
    let col_start = (c0 + SNAP).floor().clamp(0.0, w) as usize;
    let col_end = (c1 - SNAP).ceil().clamp(0.0, w) as usize;
    let row_start = (r0 + SNAP).floor().clamp(0.0, h) as usize;
    let row_end = (r1 - SNAP).ceil().clamp(0.0, h) as usize;
    if col_end <= col_start || row_end <= row_start {
        return Err(TcmError::FootprintOutsideImagery(poly.id().to_string()));
    }
    let (chip_h, chip_w) = (row_end - row_start, col_end - col_start);
    let chip_gt = gt.window(col_start, row_start);

    let mask = match rasterize_polygon(poly, &extent, &chip_gt, (chip_h, chip_w)) {
        Ok(m) => m,
        Err(TcmError::EmptyFootprintMask(id)) => return Err(TcmError::FootprintOutsideImagery(id)),
        Err(e) => return Err(e),
    };

    let layers = scenes
        .iter()
        .map(|scene| {
            if scene.geotransform == gt
                && scene.raster.height() == reference.raster.height()
                && scene.raster.width() == reference.raster.width()
            {
                scene.raster.crop(row_start, col_start, chip_h, chip_w)
            } else {
                resample_nearest(scene, &chip_gt, chip_h, chip_w)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let years = scenes.iter().map(|s| s.year).collect();
    ChipStack::new(poly.id(), layers, mask, years, r, chip_gt)
}

/// Samples `scene` at the pixel centers of the target grid. Out-of-range
/// lookups replicate the nearest edge pixel.
fn resample_nearest(
    scene: &Scene,
    target: &AffineGeoTransform,
    height: usize,
    width: usize,
) -> Result<Raster> {
    let src = &scene.raster;
    let inverse = scene.geotransform.inverse();
    let channels = src.channels();
    let mut data = Vec::with_capacity(height * width * channels);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = target.apply(col as f64 + 0.5, row as f64 + 0.5);
            let (sc, sr) = inverse.apply(x, y);
            let sc = sc.floor().clamp(0.0, (src.width() - 1) as f64) as usize;
            let sr = sr.floor().clamp(0.0, (src.height() - 1) as f64) as usize;
            data.extend_from_slice(src.pixel(sr, sc));
        }
    }
    Raster::new(height, width, channels, data)
}
