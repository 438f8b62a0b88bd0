use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};

/// Affine map from pixel `(col, row)` to world `(x, y)`:
///
/// ```text
/// x = a * col + b * row + c
/// y = d * col + e * row + f
/// ```
///
/// `(col, row) = (0, 0)` is the outer corner of the upper-left pixel, so
/// pixel centers sit at half-integer coordinates. Serialized as the array
/// `[a, b, c, d, e, f]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct AffineGeoTransform {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
}

impl AffineGeoTransform {
    pub fn new(coeffs: [f64; 6]) -> Result<Self> {
        let [a, b, c, d, e, f] = coeffs;
        let det = a * e - b * d;
        if det == 0.0 || !det.is_finite() || coeffs.iter().any(|v| !v.is_finite()) {
            return Err(TcmError::SingularGeoTransform { det });
        }
        Ok(Self { a, b, c, d, e, f })
    }

    /// Pixel grid coincides with world coordinates.
    pub fn identity() -> Self {
        Self::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap()
    }

    /// Conventional north-up grid with square pixels and upper-left corner
    /// at `(origin_x, origin_y)`.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64) -> Result<Self> {
        Self::new([pixel_size, 0.0, origin_x, 0.0, -pixel_size, origin_y])
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.a * col + self.b * row + self.c,
            self.d * col + self.e * row + self.f,
        )
    }

    pub fn inverse(&self) -> AffineGeoTransform {
        let det = self.determinant();
        let (ia, ib) = (self.e / det, -self.b / det);
        let (id, ie) = (-self.d / det, self.a / det);
        AffineGeoTransform {
            a: ia,
            b: ib,
            c: -(ia * self.c + ib * self.f),
            d: id,
            e: ie,
            f: -(id * self.c + ie * self.f),
        }
    }

    /// World `(x, y)` to fractional pixel `(col, row)`.
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        self.inverse().apply(x, y)
    }

    /// Transform of the sub-grid whose upper-left pixel is `(col0, row0)`.
    pub fn window(&self, col0: usize, row0: usize) -> AffineGeoTransform {
        let (c, f) = self.apply(col0 as f64, row0 as f64);
        AffineGeoTransform { c, f, ..*self }
    }
}

impl TryFrom<[f64; 6]> for AffineGeoTransform {
    type Error = TcmError;

    fn try_from(value: [f64; 6]) -> Result<Self> {
        Self::new(value)
    }
}

impl From<AffineGeoTransform> for [f64; 6] {
    fn from(value: AffineGeoTransform) -> Self {
        value.coefficients()
    }
}
