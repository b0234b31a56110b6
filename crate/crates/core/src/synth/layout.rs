//! Rectangular grid geographies for synthetic scenarios and tests.

use crate::error::Result;
use crate::geodata::{GeoPoint, GeographyHierarchy, Level, Ring, Zone};

/// `states` rows of `counties_per_state` counties, each county split into
/// `zones_per_side`² leaf zones.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub origin: GeoPoint,
    pub states: usize,
    pub counties_per_state: usize,
    pub zones_per_side: usize,
    pub county_lat_deg: f64,
    pub county_lon_deg: f64,
}

impl Default for GridSpec {
    /// Two states of three roughly 20 km × 20 km counties with 5 km zones.
    fn default() -> Self {
        Self {
            origin: GeoPoint { lat: 39.0, lon: -77.0 },
            states: 2,
            counties_per_state: 3,
            zones_per_side: 4,
            county_lat_deg: 0.18,
            county_lon_deg: 0.23,
        }
    }
}

/// Deterministic, uneven leaf populations in [600, 2000].
fn leaf_population(state: usize, county: usize, zone: usize) -> u64 {
    600 + ((state * 131 + county * 71 + zone * 37) % 15) as u64 * 100
}

pub fn grid_geography(spec: &GridSpec) -> Result<GeographyHierarchy> {
    let n = spec.zones_per_side;
    let rows = spec.states * n;
    let cols = spec.counties_per_state * n;
    let zlat = spec.county_lat_deg / n as f64;
    let zlon = spec.county_lon_deg / n as f64;
    // Grid lines computed once so shared edges are bit-identical.
    let lat_at = |r: usize| spec.origin.lat + r as f64 * zlat;
    let lon_at = |c: usize| spec.origin.lon + c as f64 * zlon;
    let rect = |r0: usize, c0: usize, r1: usize, c1: usize| {
        Ring::rectangle(lat_at(r0), lon_at(c0), lat_at(r1), lon_at(c1))
            .map_err(crate::error::Error::Geography)
    };

    let mut zones = Vec::new();
    let mut nation_pop = 0;
    for s in 0..spec.states {
        let state_id = format!("S{}", s + 1);
        let mut state_pop = 0;
        for c in 0..spec.counties_per_state {
            let county_id = format!("{state_id}C{}", c + 1);
            let mut county_pop = 0;
            for zr in 0..n {
                for zc in 0..n {
                    let k = zr * n + zc;
                    let pop = leaf_population(s, c, k);
                    county_pop += pop;
                    let (r, col) = (s * n + zr, c * n + zc);
                    zones.push(Zone {
                        zone_id: format!("{county_id}Z{:02}", k + 1),
                        level: Level::Zone,
                        parent_id: Some(county_id.clone()),
                        polygon: rect(r, col, r + 1, col + 1)?,
                        population: pop,
                    });
                }
            }
            zones.push(Zone {
                zone_id: county_id,
                level: Level::County,
                parent_id: Some(state_id.clone()),
                polygon: rect(s * n, c * n, (s + 1) * n, (c + 1) * n)?,
                population: county_pop,
            });
            state_pop += county_pop;
        }
        zones.push(Zone {
            zone_id: state_id,
            level: Level::State,
            parent_id: Some("US".into()),
            polygon: rect(s * n, 0, (s + 1) * n, cols)?,
            population: state_pop,
        });
        nation_pop += state_pop;
    }
    zones.push(Zone {
        zone_id: "US".into(),
        level: Level::Nation,
        parent_id: None,
        polygon: rect(0, 0, rows, cols)?,
        population: nation_pop,
    });
    GeographyHierarchy::new(zones)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_valid() {
        let g = grid_geography(&GridSpec::default()).unwrap();
        assert_eq!(g.zones_at(Level::State).count(), 2);
        assert_eq!(g.zones_at(Level::County).count(), 6);
        assert_eq!(g.leaves().count(), 96);
        let p = GeoPoint { lat: 39.01, lon: -76.99 };
        assert_eq!(g.assign_zone(p), Some("S1C1Z01"));
        assert_eq!(g.ancestor("S2C3Z16", Level::State).unwrap(), "S2");
    }
}
