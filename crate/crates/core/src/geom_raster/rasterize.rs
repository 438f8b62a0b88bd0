use super::polygon::edge_crossing;
use super::{AffineGeoTransform, Mask, Polygon, Rect};
use crate::error::{Result, TcmError};

/// Axis-aligned bounding box of `poly` grown by `r` on every side.
///
/// `r` is in the polygon's coordinate units.
pub fn buffered_extent(poly: &Polygon, r: f64) -> Result<Rect> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(TcmError::InvalidArgument(format!(
            "buffer radius must be positive, got {r}"
        )));
    }
    if poly.area() <= 0.0 {
        return Err(TcmError::DegeneratePolygon {
            id: poly.id().to_string(),
            reason: "zero area".into(),
        });
    }
    Ok(poly.bbox().expand(r))
}

/// Burns `poly` into a `(height, width)` grid described by `geotransform`.
///
/// A cell is set when its center lies inside the polygon under the even-odd
/// rule and inside `extent`. Scanline implementation: for every row the
/// crossings of all ring edges with the row's center line are sorted and
/// the spans between alternate crossings are filled.
pub fn rasterize_polygon(
    poly: &Polygon,
    extent: &Rect,
    geotransform: &AffineGeoTransform,
    shape: (usize, usize),
) -> Result<Mask> {
    let (height, width) = shape;
    let inverse = geotransform.inverse();
    let rings: Vec<Vec<[f64; 2]>> = poly
        .rings()
        .map(|ring| {
            ring.iter()
                .map(|&[x, y]| {
                    let (c, r) = inverse.apply(x, y);
                    [c, r]
                })
                .collect()
        })
        .collect();

    let mut mask = Mask::empty(height, width);
    let mut crossings = Vec::new();
    for row in 0..height {
        let cy = row as f64 + 0.5;
        crossings.clear();
        for ring in &rings {
            for w in ring.windows(2) {
                if let Some(x) = edge_crossing(w[0], w[1], cy) {
                    crossings.push(x);
                }
            }
        }
        crossings.sort_by(|a, b| a.total_cmp(b));
        for span in crossings.chunks_exact(2) {
            let (x0, x1) = (span[0], span[1]);
            let first = (x0 - 0.5).floor().max(0.0) as usize;
            for col in first..width {
                let cx = col as f64 + 0.5;
                if cx >= x1 {
                    break;
                }
                if cx >= x0 {
                    let (wx, wy) = geotransform.apply(cx, cy);
                    if extent.contains_point(wx, wy) {
                        mask.set(row, col, true);
                    }
                }
            }
        }
    }

    if mask.count_ones() == 0 {
        return Err(TcmError::EmptyFootprintMask(poly.id().to_string()));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> AffineGeoTransform {
        AffineGeoTransform::identity()
    }

    #[test]
    fn buffered_extent_expands_bbox() {
        let sq = Polygon::rectangle("s", Rect::new(0.0, 0.0, 10.0, 10.0)).unwrap();
        assert_eq!(
            buffered_extent(&sq, 5.0).unwrap(),
            Rect::new(-5.0, -5.0, 15.0, 15.0)
        );
        assert_eq!(
            buffered_extent(&sq, 100.0).unwrap(),
            Rect::new(-100.0, -100.0, 110.0, 110.0)
        );
        let tri = Polygon::new("t", vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]], vec![]).unwrap();
        assert_eq!(
            buffered_extent(&tri, 0.5).unwrap(),
            Rect::new(-0.5, -0.5, 4.5, 4.5)
        );
        assert!(buffered_extent(&sq, 0.0).is_err());
    }

    #[test]
    fn full_square_sets_every_pixel() {
        let sq = Polygon::rectangle("s", Rect::new(0.0, 0.0, 10.0, 10.0)).unwrap();
        let extent = Rect::new(0.0, 0.0, 10.0, 10.0);
        let mask = rasterize_polygon(&sq, &extent, &unit_grid(), (10, 10)).unwrap();
        assert_eq!(mask.count_ones(), 100);
    }

    #[test]
    fn hole_is_excluded() {
        let p = Polygon::new(
            "h",
            vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]],
            vec![vec![[4.0, 4.0], [6.0, 4.0], [6.0, 6.0], [4.0, 6.0]]],
        )
        .unwrap();
        let mask = rasterize_polygon(&p, &Rect::new(0.0, 0.0, 10.0, 10.0), &unit_grid(), (10, 10))
            .unwrap();
        assert_eq!(mask.count_ones(), 96);
        assert!(!mask.get(4, 4) && !mask.get(5, 5));
    }

    #[test]
    fn outside_polygon_is_an_error() {
        let sq = Polygon::rectangle("far", Rect::new(50.0, 50.0, 60.0, 60.0)).unwrap();
        let err = rasterize_polygon(
            &sq,
            &Rect::new(0.0, 0.0, 10.0, 10.0),
            &unit_grid(),
            (10, 10),
        )
        .unwrap_err();
        assert!(matches!(err, TcmError::EmptyFootprintMask(id) if id == "far"));
    }

    #[test]
    fn north_up_grid_maps_rows_downward() {
        // 4x4 grid, 10 m pixels, top-left at (0, 40)
        let gt = AffineGeoTransform::north_up(0.0, 40.0, 10.0).unwrap();
        let top_left = Polygon::rectangle("tl", Rect::new(0.0, 20.0, 20.0, 40.0)).unwrap();
        let mask =
            rasterize_polygon(&top_left, &Rect::new(0.0, 0.0, 40.0, 40.0), &gt, (4, 4)).unwrap();
        let set: Vec<(usize, usize)> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| mask.get(r, c))
            .collect();
        assert_eq!(set, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }
}
