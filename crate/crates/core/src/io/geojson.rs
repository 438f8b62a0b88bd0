//! Footprint polygons as a GeoJSON FeatureCollection.
//!
//! Each feature carries a required `id` property (string or integer) and an
//! optional integer `label_year`. Polygon geometries and single-part
//! MultiPolygons are accepted.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Result, TcmError};
use crate::geom_raster::Polygon;

#[derive(Clone, Debug, PartialEq)]
pub struct FootprintRecord {
    pub polygon: Polygon,
    pub label_year: Option<i32>,
}

#[derive(Deserialize)]
struct Collection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: Option<Geometry>,
    #[serde(default)]
    properties: Option<Map<String, Value>>,
}

#[derive(Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Value,
}

type Ring = Vec<Vec<f64>>;

fn to_ring(ring: Ring) -> std::result::Result<Vec<[f64; 2]>, String> {
    ring.into_iter()
        .map(|p| match p.as_slice() {
            [x, y, ..] => Ok([*x, *y]),
            _ => Err("position with fewer than 2 coordinates".to_string()),
        })
        .collect()
}

fn parse_feature(i: usize, f: Feature) -> std::result::Result<FootprintRecord, String> {
    if f.kind != "Feature" {
        return Err(format!("feature {i} has type {:?}", f.kind));
    }
    let props = f.properties.unwrap_or_default();
    let id = match props.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) if n.is_i64() || n.is_u64() => n.to_string(),
        Some(other) => return Err(format!("feature {i} has non-scalar id {other}")),
        None => return Err(format!("feature {i} has no id property")),
    };
    let label_year = match props.get("label_year") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_i64()
                .and_then(|y| i32::try_from(y).ok())
                .ok_or_else(|| format!("feature {id}: label_year {v} is not an integer year"))?,
        ),
    };
    let geom = f
        .geometry
        .ok_or_else(|| format!("feature {id} has no geometry"))?;
    let rings: Vec<Ring> = match geom.kind.as_str() {
        "Polygon" => {
            serde_json::from_value(geom.coordinates).map_err(|e| format!("feature {id}: {e}"))?
        }
        "MultiPolygon" => {
            let mut parts: Vec<Vec<Ring>> = serde_json::from_value(geom.coordinates)
                .map_err(|e| format!("feature {id}: {e}"))?;
            if parts.len() != 1 {
                return Err(format!(
                    "feature {id}: MultiPolygon with {} parts",
                    parts.len()
                ));
            }
            parts.remove(0)
        }
        other => return Err(format!("feature {id}: unsupported geometry {other}")),
    };
    let mut rings = rings.into_iter();
    let exterior = to_ring(
        rings
            .next()
            .ok_or_else(|| format!("feature {id} has no rings"))?,
    )?;
    let holes = rings
        .map(to_ring)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let polygon = Polygon::new(id, exterior, holes).map_err(|e| e.to_string())?;
    Ok(FootprintRecord {
        polygon,
        label_year,
    })
}

pub fn parse(text: &str) -> std::result::Result<Vec<FootprintRecord>, String> {
    let fc: Collection = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if fc.kind != "FeatureCollection" {
        return Err(format!("top-level type is {:?}", fc.kind));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.into_iter().enumerate() {
        let rec = parse_feature(i, f)?;
        if !seen.insert(rec.polygon.id().to_string()) {
            return Err(format!("duplicate id {}", rec.polygon.id()));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<FootprintRecord>> {
    let text = fs::read_to_string(path).map_err(|e| TcmError::io(path, e))?;
    parse(&text).map_err(|reason| TcmError::format("GeoJSON", path, reason))
}

fn ring_json(ring: &[[f64; 2]]) -> Value {
    Value::Array(ring.iter().map(|p| json!([p[0], p[1]])).collect())
}

pub fn to_string(records: &[FootprintRecord]) -> String {
    let features: Vec<Value> = records
        .iter()
        .map(|r| {
            let p = &r.polygon;
            let mut coords = vec![ring_json(p.exterior())];
            coords.extend(p.holes().iter().map(|h| ring_json(h)));
            let mut props = Map::new();
            props.insert("id".into(), json!(p.id()));
            if let Some(y) = r.label_year {
                props.insert("label_year".into(), json!(y));
            }
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": coords},
            })
        })
        .collect();
    let fc = json!({"type": "FeatureCollection", "features": features});
    let mut s = serde_json::to_string_pretty(&fc).expect("json values serialize");
    s.push('\n');
    s
}

pub fn write(path: &Path, records: &[FootprintRecord]) -> Result<()> {
    fs::write(path, to_string(records)).map_err(|e| TcmError::io(path, e))
}
