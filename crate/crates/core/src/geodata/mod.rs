//! Geography model and spherical distance helpers.
//!
//! A geography file is a GeoJSON `FeatureCollection`; each feature is one zone with
//! `properties = {zone_id, level, parent_id, population}` and a single-ring
//! `Polygon` geometry. Loading validates the whole hierarchy.

mod hierarchy;
mod point;
pub mod polygon;

use std::io::Read;
use std::path::Path;

use serde_json::{json, Map, Value};

pub use hierarchy::{GeographyHierarchy, Level, Zone};
pub use point::{centroid, haversine_km, GeoPoint, EARTH_RADIUS_KM, KM_PER_DEGREE};
pub use polygon::{BBox, Containment, Ring};

use crate::error::{Error, Result};

impl GeographyHierarchy {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader(mut reader: impl Read) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let value: Value = serde_json::from_str(&text)?;
        Self::from_geojson(&value)
    }

    pub fn from_geojson(value: &Value) -> Result<Self> {
        let bad = |msg: String| Error::Geography(msg);
        if value.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(bad("top-level object must be a FeatureCollection".into()));
        }
        let features = value
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `features` array".into()))?;
        let zones = features
            .iter()
            .enumerate()
            .map(|(i, f)| parse_feature(f).map_err(|m| bad(format!("feature {i}: {m}"))))
            .collect::<Result<Vec<_>>>()?;
        GeographyHierarchy::new(zones)
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .zones()
            .iter()
            .map(|z| {
                let mut ring: Vec<Value> = z.polygon.vertices().iter().map(|p| json!([p.lon, p.lat])).collect();
                ring.push(ring[0].clone());
                json!({
                    "type": "Feature",
                    "properties": {
                        "zone_id": z.zone_id,
                        "level": z.level.as_str(),
                        "parent_id": z.parent_id,
                        "population": z.population,
                    },
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                })
            })
            .collect();
        json!({"type": "FeatureCollection", "features": features})
    }
}

fn parse_feature(f: &Value) -> std::result::Result<Zone, String> {
    if f.get("type").and_then(Value::as_str) != Some("Feature") {
        return Err("not a Feature".into());
    }
    let props: &Map<String, Value> = f
        .get("properties")
        .and_then(Value::as_object)
        .ok_or("missing properties")?;
    let zone_id = props
        .get("zone_id")
        .and_then(Value::as_str)
        .ok_or("`zone_id` must be a string")?
        .to_owned();
    let level: Level = props
        .get("level")
        .and_then(Value::as_str)
        .ok_or("`level` must be a string")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    let parent_id = match props.get("parent_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("`parent_id` must be a string or null".into()),
    };
    let population = props
        .get("population")
        .and_then(Value::as_u64)
        .ok_or("`population` must be a non-negative integer")?;

    let geometry = f.get("geometry").ok_or("missing geometry")?;
    if geometry.get("type").and_then(Value::as_str) != Some("Polygon") {
        return Err(format!("zone `{zone_id}`: geometry must be a Polygon"));
    }
    let rings = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or("missing coordinates")?;
    if rings.len() != 1 {
        return Err(format!("zone `{zone_id}`: expected exactly one ring, found {}", rings.len()));
    }
    let coords = rings[0].as_array().ok_or("ring must be an array")?;
    let closed = coords.len() >= 2 && coords.first() == coords.last();
    if !closed {
        return Err(format!("zone `{zone_id}`: ring is not closed"));
    }
    let vertices = coords
        .iter()
        .map(|c| {
            let pair = c.as_array().filter(|a| a.len() >= 2).ok_or("position must be [lon, lat]")?;
            let lon = pair[0].as_f64().ok_or("non-numeric longitude")?;
            let lat = pair[1].as_f64().ok_or("non-numeric latitude")?;
            GeoPoint::new(lat, lon).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let polygon = Ring::new(vertices).map_err(|m| format!("zone `{zone_id}`: {m}"))?;
    Ok(Zone {
        zone_id,
        level,
        parent_id,
        polygon,
        population,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_zone(id: &str, level: Level, parent: Option<&str>, pop: u64, b: (f64, f64, f64, f64)) -> Zone {
        Zone {
            zone_id: id.into(),
            level,
            parent_id: parent.map(Into::into),
            polygon: Ring::rectangle(b.0, b.1, b.2, b.3).unwrap(),
            population: pop,
        }
    }

    /// Nation N, state S, counties C1 (west) and C2 (east); C1 holds leaves A|B, C2 holds D.
    pub(crate) fn fixture() -> Vec<Zone> {
        vec![
            rect_zone("N", Level::Nation, None, 600, (0.0, 0.0, 1.0, 2.0)),
            rect_zone("S", Level::State, Some("N"), 600, (0.0, 0.0, 1.0, 2.0)),
            rect_zone("C1", Level::County, Some("S"), 300, (0.0, 0.0, 1.0, 1.0)),
            rect_zone("C2", Level::County, Some("S"), 300, (0.0, 1.0, 1.0, 2.0)),
            rect_zone("A", Level::Zone, Some("C1"), 100, (0.0, 0.0, 1.0, 0.5)),
            rect_zone("B", Level::Zone, Some("C1"), 200, (0.0, 0.5, 1.0, 1.0)),
            rect_zone("D", Level::Zone, Some("C2"), 300, (0.0, 1.0, 1.0, 2.0)),
        ]
    }

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    #[test]
    fn assign_and_tie_break() {
        let g = GeographyHierarchy::new(fixture()).unwrap();
        assert_eq!(g.assign_zone(gp(0.5, 0.25)), Some("A"));
        assert_eq!(g.assign_zone(gp(0.5, 1.5)), Some("D"));
        assert_eq!(g.assign_zone(gp(2.0, 0.5)), None);
        // Shared edge between A and B: both report boundary containment.
        let edge = gp(0.3, 0.5);
        assert_eq!(g.zone("A").unwrap().polygon.containment(edge), Containment::Boundary);
        assert_eq!(g.zone("B").unwrap().polygon.containment(edge), Containment::Boundary);
        assert_eq!(g.assign_zone(edge), Some("A"));
        // Edge between B and D.
        assert_eq!(g.assign_zone(gp(0.7, 1.0)), Some("B"));
    }

    #[test]
    fn ancestors() {
        let g = GeographyHierarchy::new(fixture()).unwrap();
        assert_eq!(g.ancestor("A", Level::County).unwrap(), "C1");
        assert_eq!(g.ancestor("C2", Level::County).unwrap(), "C2");
        assert_eq!(g.ancestor("B", Level::Nation).unwrap(), "N");
        assert!(matches!(g.ancestor("zz", Level::County), Err(Error::UnknownZone(_))));
        assert!(matches!(g.ancestor("C1", Level::Zone), Err(Error::Argument(_))));
        let under: Vec<_> = g.leaves_under("C1").unwrap().iter().map(|z| z.zone_id.clone()).collect();
        assert_eq!(under, ["A", "B"]);
    }

    #[test]
    fn validation_failures() {
        let mut overlap = fixture();
        overlap[5] = rect_zone("B", Level::Zone, Some("C1"), 200, (0.0, 0.4, 1.0, 1.0));
        assert!(matches!(GeographyHierarchy::new(overlap), Err(Error::Geography(m)) if m.contains("overlap")));

        let mut orphan = fixture();
        orphan[6].parent_id = Some("C9".into());
        assert!(GeographyHierarchy::new(orphan).is_err());

        let mut pop = fixture();
        pop[4].population = 101;
        assert!(matches!(GeographyHierarchy::new(pop), Err(Error::Geography(m)) if m.contains("population")));

        let mut two_nations = fixture();
        two_nations[1] = rect_zone("S", Level::Nation, None, 600, (0.0, 0.0, 1.0, 2.0));
        assert!(GeographyHierarchy::new(two_nations).is_err());
    }

    #[test]
    fn geojson_round_trip() {
        let g = GeographyHierarchy::new(fixture()).unwrap();
        let text = serde_json::to_string(&g.to_geojson()).unwrap();
        let back = GeographyHierarchy::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back.zones(), g.zones());
    }

    #[test]
    fn geojson_strictness() {
        let g = GeographyHierarchy::new(fixture()).unwrap();
        let mut v = g.to_geojson();
        v["features"][4]["properties"]["population"] = json!(-1);
        assert!(GeographyHierarchy::from_geojson(&v).is_err());
        let mut v = g.to_geojson();
        v["features"][4]["geometry"]["coordinates"][0].as_array_mut().unwrap().pop();
        assert!(GeographyHierarchy::from_geojson(&v).is_err());
        let mut v = g.to_geojson();
        v["features"][4]["properties"]["level"] = json!("block");
        assert!(GeographyHierarchy::from_geojson(&v).is_err());
    }
}
