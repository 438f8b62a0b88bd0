use serde::{Deserialize, Serialize};

use crate::error::{Result, TcmError};

/// Axis-aligned rectangle in world (or pixel) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x: min_x.min(max_x),
            min_y: min_y.min(max_y),
            max_x: min_x.max(max_x),
            max_y: min_y.max(max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn is_empty(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    pub fn expand(&self, by: f64) -> Rect {
        Rect {
            min_x: self.min_x - by,
            min_y: self.min_y - by,
            max_x: self.max_x + by,
            max_y: self.max_y + by,
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min_x >= self.min_x
            && other.max_x <= self.max_x
            && other.min_y >= self.min_y
            && other.max_y <= self.max_y
    }

    /// True when the interiors overlap.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.min_x < other.max_x
            && other.min_x < self.max_x
            && self.min_y < other.max_y
            && other.min_y < self.max_y
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }
}

/// A footprint polygon with optional holes. Rings are stored closed
/// (first vertex repeated at the end).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    id: String,
    exterior: Vec<[f64; 2]>,
    holes: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    pub fn new(
        id: impl Into<String>,
        exterior: Vec<[f64; 2]>,
        holes: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        let id = id.into();
        let exterior = close_ring(&id, exterior)?;
        if ring_area(&exterior) == 0.0 {
            return Err(TcmError::DegeneratePolygon {
                id,
                reason: "exterior ring has zero area".into(),
            });
        }
        let holes = holes
            .into_iter()
            .map(|h| close_ring(&id, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id,
            exterior,
            holes,
        })
    }

    /// Axis-aligned rectangle polygon.
    pub fn rectangle(id: impl Into<String>, rect: Rect) -> Result<Self> {
        Self::new(
            id,
            vec![
                [rect.min_x, rect.min_y],
                [rect.max_x, rect.min_y],
                [rect.max_x, rect.max_y],
                [rect.min_x, rect.max_y],
            ],
            vec![],
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn exterior(&self) -> &[[f64; 2]] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<[f64; 2]>] {
        &self.holes
    }

    /// Exterior followed by holes.
    pub fn rings(&self) -> impl Iterator<Item = &[[f64; 2]]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for &[x, y] in &self.exterior {
            r.min_x = r.min_x.min(x);
            r.min_y = r.min_y.min(y);
            r.max_x = r.max_x.max(x);
            r.max_y = r.max_y.max(y);
        }
        r
    }

    /// Area of the exterior minus holes.
    pub fn area(&self) -> f64 {
        ring_area(&self.exterior).abs() - self.holes.iter().map(|h| ring_area(h).abs()).sum::<f64>()
    }

    /// Area centroid of the exterior ring.
    pub fn centroid(&self) -> (f64, f64) {
        let ring = &self.exterior;
        let a = ring_area(ring);
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let [x0, y0] = w[0];
            let [x1, y1] = w[1];
            let cross = x0 * y1 - x1 * y0;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        (cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn translated(&self, id: impl Into<String>, dx: f64, dy: f64) -> Polygon {
        let shift = |ring: &Vec<[f64; 2]>| ring.iter().map(|&[x, y]| [x + dx, y + dy]).collect();
        Polygon {
            id: id.into(),
            exterior: shift(&self.exterior),
            holes: self.holes.iter().map(shift).collect(),
        }
    }

    /// Even-odd containment test against all rings.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for ring in self.rings() {
            for w in ring.windows(2) {
                if let Some(xc) = edge_crossing(w[0], w[1], y) {
                    if x < xc {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

/// X coordinate where the edge crosses the horizontal line at `y`, using the
/// half-open rule so a vertex on the line is counted once.
#[inline]
pub(crate) fn edge_crossing(p: [f64; 2], q: [f64; 2], y: f64) -> Option<f64> {
    let [xi, yi] = p;
    let [xj, yj] = q;
    if (yi > y) != (yj > y) {
        Some((xj - xi) * (y - yi) / (yj - yi) + xi)
    } else {
        None
    }
}

/// Signed shoelace area of a closed ring.
fn ring_area(ring: &[[f64; 2]]) -> f64 {
    0.5 * ring
        .windows(2)
        .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
        .sum::<f64>()
}

fn close_ring(id: &str, mut ring: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>> {
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(TcmError::DegeneratePolygon {
            id: id.to_string(),
            reason: "non-finite coordinate".into(),
        });
    }
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    let mut distinct = ring.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(TcmError::DegeneratePolygon {
            id: id.to_string(),
            reason: format!("ring has {} distinct vertices, need 3", distinct.len()),
        });
    }
    ring.push(ring[0]);
    Ok(ring)
}
