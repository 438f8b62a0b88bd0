use serde::{Deserialize, Serialize};

use super::AffineGeoTransform;
use crate::error::{Result, TcmError};

/// On-disk sample type of a raster. In memory all samples are `f32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    U8,
    U16,
    F32,
}

impl SampleType {
    pub fn code(self) -> u8 {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 => 2,
            SampleType::F32 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(SampleType::U8),
            2 => Some(SampleType::U16),
            4 => Some(SampleType::F32),
            _ => None,
        }
    }

    pub fn byte_width(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 => 2,
            SampleType::F32 => 4,
        }
    }

    /// Rounds and clamps a value into the representable range.
    pub fn quantize(self, v: f32) -> f32 {
        match self {
            SampleType::U8 => v.round().clamp(0.0, u8::MAX as f32),
            SampleType::U16 => v.round().clamp(0.0, u16::MAX as f32),
            SampleType::F32 => v,
        }
    }
}

/// Pixel-interleaved image of shape `(height, width, channels)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(TcmError::InvalidArgument(format!(
                "raster dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(TcmError::InvalidArgument(format!(
                "raster of {height}x{width}x{channels} needs {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![0.0; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let i = (row * self.width + col) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Raster> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(TcmError::InvalidArgument(format!(
                "crop {height}x{width} at ({row0},{col0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * self.channels);
        for row in row0..row0 + height {
            let start = (row * self.width + col0) * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Raster::new(height, width, self.channels, data)
    }
}

/// Binary footprint mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(TcmError::InvalidArgument(format!(
                "mask of {height}x{width} needs {} cells, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One georeferenced image layer of the time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub year: i32,
    pub geotransform: AffineGeoTransform,
    pub raster: Raster,
    pub dtype: SampleType,
}

impl Scene {
    /// World-coordinate bounding box of the full grid.
    pub fn extent(&self) -> super::Rect {
        let (h, w) = (self.raster.height() as f64, self.raster.width() as f64);
        let corners =
            [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)].map(|(c, r)| self.geotransform.apply(c, r));
        let xs = corners.map(|p| p.0);
        let ys = corners.map(|p| p.1);
        super::Rect::new(
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}
