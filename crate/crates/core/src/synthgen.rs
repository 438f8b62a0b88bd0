//! Synthetic study areas with known construction times.
//!
//! The background is a smooth mixture of palette colors plus Gaussian
//! noise, redrawn independently for every layer. A footprint looks like
//! background until its construction layer and shows a roof color from a
//! separate palette afterwards. Each layer then gets its own per-channel
//! gain and offset, mimicking acquisitions under different conditions.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};
use crate::geom_raster::{
    rasterize_polygon, AffineGeoTransform, Polygon, Raster, Rect, SampleType, Scene,
};
use crate::seed;

/// Strength of the per-layer global color transform `v -> g (v - 128) + 128 + o`
/// with `g ~ U(1 - gain, 1 + gain)` and `o ~ U(-offset, offset)` per channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorShift {
    pub gain: f64,
    pub offset: f64,
}

impl ColorShift {
    pub const NONE: ColorShift = ColorShift {
        gain: 0.0,
        offset: 0.0,
    };

    pub fn is_none(&self) -> bool {
        self.gain == 0.0 && self.offset == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub layers: usize,
    pub n_footprints: usize,
    /// Range of rectangle side lengths, pixels.
    pub footprint_size: [f64; 2],
    /// Relative weights of construction at layer 1..=layers.
    pub year_weights: Vec<f64>,
    /// Probability that a structure predates the first layer (label 1).
    pub pre_existing_prob: f64,
    pub palette: Vec<Vec<f32>>,
    pub roof_palette: Vec<Vec<f32>>,
    /// Spacing of the coarse random grid behind the background field, pixels.
    pub patch_scale: f64,
    /// Softmax sharpness of the palette mixture.
    pub blend_sharpness: f64,
    pub noise_sigma: f64,
    pub color_shift: ColorShift,
    pub dtype: SampleType,
    /// World units per pixel.
    pub pixel_size: f64,
    /// World coordinates of the scene's upper-left corner.
    pub origin: [f64; 2],
    pub base_year: i32,
    pub year_step: i32,
    /// Clearance between every footprint and the scene border, pixels.
    pub margin: f64,
    /// Minimum spacing between footprint bounding boxes, pixels.
    pub gap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 256,
            width: 256,
            channels: 3,
            layers: 5,
            n_footprints: 200,
            footprint_size: [5.0, 9.0],
            year_weights: vec![1.0; 5],
            pre_existing_prob: 0.2,
            palette: vec![
                vec![62.0, 98.0, 52.0],
                vec![96.0, 122.0, 64.0],
                vec![128.0, 112.0, 84.0],
                vec![82.0, 86.0, 68.0],
            ],
            roof_palette: vec![
                vec![205.0, 200.0, 192.0],
                vec![160.0, 62.0, 56.0],
                vec![56.0, 78.0, 156.0],
            ],
            patch_scale: 24.0,
            blend_sharpness: 20.0,
            noise_sigma: 6.0,
            color_shift: ColorShift {
                gain: 0.2,
                offset: 20.0,
            },
            dtype: SampleType::U8,
            pixel_size: 25.0,
            origin: [500_000.0, 4_300_000.0],
            base_year: 2016,
            year_step: 1,
            margin: 16.0,
            gap: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TcmError::Config(m));
        if self.height == 0 || self.width == 0 || self.channels == 0 || self.layers == 0 {
            return bad("scene dimensions and layer count must be positive".into());
        }
        if self.year_weights.len() != self.layers {
            return bad(format!(
                "year_weights has {} entries for {} layers",
                self.year_weights.len(),
                self.layers
            ));
        }
        if self.year_weights.iter().any(|w| !(*w >= 0.0))
            || self.year_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("year_weights must be non-negative with a positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.pre_existing_prob) {
            return bad("pre_existing_prob must be in [0, 1]".into());
        }
        if self.palette.is_empty() || self.roof_palette.is_empty() {
            return bad("palettes must be nonempty".into());
        }
        if self
            .palette
            .iter()
            .chain(&self.roof_palette)
            .any(|c| c.len() != self.channels)
        {
            return bad(format!(
                "palette colors must have {} channels",
                self.channels
            ));
        }
        let [lo, hi] = self.footprint_size;
        if !(lo >= 1.0 && hi >= lo) {
            return bad("footprint_size must satisfy 1 <= min <= max".into());
        }
        if !(self.patch_scale > 0.0 && self.pixel_size > 0.0 && self.noise_sigma >= 0.0) {
            return bad(
                "patch_scale and pixel_size must be positive, noise_sigma non-negative".into(),
            );
        }
        if self.margin < 0.0 || self.gap < 0.0 {
            return bad("margin and gap must be non-negative".into());
        }
        Ok(())
    }

    pub fn geotransform(&self) -> Result<AffineGeoTransform> {
        AffineGeoTransform::north_up(self.origin[0], self.origin[1], self.pixel_size)
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.layers as i32)
            .map(|l| self.base_year + l * self.year_step)
            .collect()
    }
}

/// Ground-truth construction time of one footprint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub footprint_id: String,
    /// 1-based first layer showing the structure.
    pub label_index: usize,
    pub label_year: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub scenes: Vec<Scene>,
    pub footprints: Vec<Polygon>,
    pub labels: Vec<TruthLabel>,
}

struct Layout {
    polygon: Polygon,
    /// Pixel window `(row0, col0, height, width)` covering the footprint.
    window: (usize, usize, usize, usize),
    roof: Vec<f32>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let gt = config.geotransform()?;
    let years = config.years();
    let layout = place_footprints(config, &gt)?;

    let mut label_rng = seed::stream(config.seed, "labels", 0);
    let weights = WeightedIndex::new(&config.year_weights)
        .map_err(|e| TcmError::Config(format!("year_weights: {e}")))?;
    let labels: Vec<TruthLabel> = layout
        .iter()
        .map(|fp| {
            let index = if label_rng.random::<f64>() < config.pre_existing_prob {
                1
            } else {
                weights.sample(&mut label_rng) + 1
            };
            TruthLabel {
                footprint_id: fp.polygon.id().to_string(),
                label_index: index,
                label_year: years[index - 1],
            }
        })
        .collect();

    let field = background_field(config);
    let masks = layout
        .iter()
        .map(|fp| {
            let (row0, col0, h, w) = fp.window;
            rasterize_polygon(
                &fp.polygon,
                &Rect::new(f64::MIN, f64::MIN, f64::MAX, f64::MAX),
                &gt.window(col0, row0),
                (h, w),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let noise =
        Normal::new(0.0, config.noise_sigma).map_err(|e| TcmError::Config(e.to_string()))?;
    let (h, w, c) = (config.height, config.width, config.channels);
    let mut scenes = Vec::with_capacity(config.layers);
    for (l, &year) in years.iter().enumerate() {
        let mut rng = seed::stream(config.seed, "noise", l as u64);
        let mut data = Vec::with_capacity(h * w * c);
        for &v in &field {
            data.push(v + noise.sample(&mut rng) as f32);
        }
        let mut raster = Raster::new(h, w, c, data)?;

        for ((fp, mask), label) in layout.iter().zip(&masks).zip(&labels) {
            if l + 1 < label.label_index {
                continue;
            }
            let (row0, col0, mh, mw) = fp.window;
            for r in 0..mh {
                for cc in 0..mw {
                    if mask.get(r, cc) {
                        for (px, &roof) in raster
                            .pixel_mut(row0 + r, col0 + cc)
                            .iter_mut()
                            .zip(&fp.roof)
                        {
                            *px = roof + noise.sample(&mut rng) as f32;
                        }
                    }
                }
            }
        }

        let mut shift_rng = seed::stream(config.seed, "shift", l as u64);
        let transform: Vec<(f32, f32)> = (0..c)
            .map(|_| {
                let g = 1.0 + config.color_shift.gain * shift_rng.random_range(-1.0..=1.0);
                let o = config.color_shift.offset * shift_rng.random_range(-1.0..=1.0);
                (g as f32, o as f32)
            })
            .collect();
        for px in raster.data_mut().chunks_exact_mut(c) {
            for (v, &(g, o)) in px.iter_mut().zip(&transform) {
                *v = config.dtype.quantize(g * (*v - 128.0) + 128.0 + o);
            }
        }
        scenes.push(Scene {
            year,
            geotransform: gt,
            raster,
            dtype: config.dtype,
        });
    }

    Ok(SynthDataset {
        scenes,
        footprints: layout.into_iter().map(|fp| fp.polygon).collect(),
        labels,
    })
}

/// Random rotated rectangles, non-overlapping bounding boxes (with `gap`),
/// kept `margin` pixels away from the border.
fn place_footprints(config: &SynthConfig, gt: &AffineGeoTransform) -> Result<Vec<Layout>> {
    const ATTEMPTS: usize = 10_000;
    let mut rng = seed::stream(config.seed, "layout", 0);
    let (h, w) = (config.height as f64, config.width as f64);
    let [lo, hi] = config.footprint_size;
    let mut boxes: Vec<Rect> = Vec::new();
    let mut out = Vec::with_capacity(config.n_footprints);

    for i in 0..config.n_footprints {
        let mut placed = None;
        for _ in 0..ATTEMPTS {
            let a = rng.random_range(lo..=hi);
            let b = rng.random_range(lo..=hi);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let (sin, cos) = angle.sin_cos();
            let half_w = 0.5 * (a * cos.abs() + b * sin.abs());
            let half_h = 0.5 * (a * sin.abs() + b * cos.abs());
            let (min_c, max_c) = (config.margin + half_w, w - config.margin - half_w);
            let (min_r, max_r) = (config.margin + half_h, h - config.margin - half_h);
            if min_c >= max_c || min_r >= max_r {
                continue;
            }
            let cx = rng.random_range(min_c..max_c);
            let cy = rng.random_range(min_r..max_r);
            let bbox = Rect::new(cx - half_w, cy - half_h, cx + half_w, cy + half_h);
            let padded = bbox.expand(config.gap);
            if boxes.iter().any(|b| b.intersects(&padded)) {
                continue;
            }
            let corners = [(-a, -b), (a, -b), (a, b), (-a, b)].map(|(dx, dy)| {
                let (dx, dy) = (0.5 * dx, 0.5 * dy);
                let (col, row) = (cx + dx * cos - dy * sin, cy + dx * sin + dy * cos);
                let (x, y) = gt.apply(col, row);
                [x, y]
            });
            let polygon = Polygon::new(format!("fp-{i:04}"), corners.to_vec(), vec![])?;
            let row0 = bbox.min_y.floor().max(0.0) as usize;
            let col0 = bbox.min_x.floor().max(0.0) as usize;
            let row1 = (bbox.max_y.ceil() as usize).min(config.height);
            let col1 = (bbox.max_x.ceil() as usize).min(config.width);
            let roof_base = &config.roof_palette[rng.random_range(0..config.roof_palette.len())];
            let roof = roof_base
                .iter()
                .map(|&v| v + rng.random_range(-8.0..=8.0))
                .collect();
            boxes.push(bbox);
            placed = Some(Layout {
                polygon,
                window: (row0, col0, row1 - row0, col1 - col0),
                roof,
            });
            break;
        }
        match placed {
            Some(fp) => out.push(fp),
            None => {
                return Err(TcmError::SceneTooCrowded {
                    placed: i,
                    requested: config.n_footprints,
                })
            }
        }
    }
    Ok(out)
}

/// Noise-free background colors, pixel-interleaved.
fn background_field(config: &SynthConfig) -> Vec<f32> {
    let (h, w, c) = (config.height, config.width, config.channels);
    let n_colors = config.palette.len();
    let gh = (h as f64 / config.patch_scale).ceil() as usize + 2;
    let gw = (w as f64 / config.patch_scale).ceil() as usize + 2;
    let mut rng = seed::stream(config.seed, "field", 0);
    let grids: Vec<Vec<f64>> = (0..n_colors)
        .map(|_| (0..gh * gw).map(|_| rng.random::<f64>()).collect())
        .collect();

    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(h * w * c);
    let mut weights = vec![0f64; n_colors];
    for row in 0..h {
        let gy = (row as f64 + 0.5) / config.patch_scale;
        let (y0, ty) = (gy.floor() as usize, smooth(gy.fract()));
        for col in 0..w {
            let gx = (col as f64 + 0.5) / config.patch_scale;
            let (x0, tx) = (gx.floor() as usize, smooth(gx.fract()));
            for (wt, grid) in weights.iter_mut().zip(&grids) {
                let at = |y: usize, x: usize| grid[y * gw + x];
                let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
                let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
                *wt = top * (1.0 - ty) + bottom * ty;
            }
            let peak = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for wt in weights.iter_mut() {
                *wt = (config.blend_sharpness * (*wt - peak)).exp();
                total += *wt;
            }
            for ch in 0..c {
                let v: f64 = weights
                    .iter()
                    .zip(&config.palette)
                    .map(|(wt, color)| wt / total * color[ch] as f64)
                    .sum();
                out.push(v as f32);
            }
        }
    }
    out
}
