use std::ops::RangeInclusive;

use crate::geodata::{haversine_km, GeoPoint, GeographyHierarchy};
use crate::ingest::Fix;

/// A dwell episode: consecutive pings that all lie within the stay radius of
/// their centroid for at least the minimum dwell time.
#[derive(Debug, Clone, PartialEq)]
pub struct Stay {
    pub device_id: String,
    pub centroid: GeoPoint,
    pub zone_id: Option<String>,
    pub start: i64,
    pub end: i64,
    pub ping_count: usize,
    /// Indices of the member pings in the device's fix slice.
    pub pings: RangeInclusive<usize>,
}

impl Stay {
    pub fn duration_s(&self) -> i64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StayParams {
    pub radius_m: f64,
    pub min_dwell_s: i64,
}

impl Default for StayParams {
    fn default() -> Self {
        Self {
            radius_m: 300.0,
            min_dwell_s: 300,
        }
    }
}

/// Running lat/lon bounds of a growing cluster, used to skip the full
/// member scan when every bounding-box corner is already inside the radius.
#[derive(Clone, Copy)]
struct Bounds {
    min_lat: f64,
    max_lat: f64,
    min_lon: f64,
    max_lon: f64,
}

impl Bounds {
    fn of(p: GeoPoint) -> Self {
        Self {
            min_lat: p.lat,
            max_lat: p.lat,
            min_lon: p.lon,
            max_lon: p.lon,
        }
    }

    fn with(self, p: GeoPoint) -> Self {
        Self {
            min_lat: self.min_lat.min(p.lat),
            max_lat: self.max_lat.max(p.lat),
            min_lon: self.min_lon.min(p.lon),
            max_lon: self.max_lon.max(p.lon),
        }
    }

    fn max_corner_km(&self, c: GeoPoint) -> f64 {
        [
            (self.min_lat, self.min_lon),
            (self.min_lat, self.max_lon),
            (self.max_lat, self.min_lon),
            (self.max_lat, self.max_lon),
        ]
        .into_iter()
        .map(|(lat, lon)| haversine_km(c, GeoPoint { lat, lon }))
        .fold(0.0, f64::max)
    }
}

/// Cluster grown from one anchor: members `anchor..=last` and their coordinate sums.
#[derive(Clone, Copy)]
struct Growth {
    last: usize,
    sum_lat: f64,
    sum_lon: f64,
}

fn grow(fixes: &[Fix], i: usize, radius_km: f64) -> Growth {
    let quick_km = radius_km * (1.0 - 1e-6);
    let (mut sum_lat, mut sum_lon) = (fixes[i].point.lat, fixes[i].point.lon);
    let mut bounds = Bounds::of(fixes[i].point);
    let mut j = i + 1;
    while j < fixes.len() {
        let p = fixes[j].point;
        let k = (j - i + 1) as f64;
        let c = GeoPoint {
            lat: (sum_lat + p.lat) / k,
            lon: (sum_lon + p.lon) / k,
        };
        let grown = bounds.with(p);
        let fits = grown.max_corner_km(c) <= quick_km
            || fixes[i..=j].iter().all(|f| haversine_km(c, f.point) <= radius_km);
        if !fits {
            break;
        }
        sum_lat += p.lat;
        sum_lon += p.lon;
        bounds = grown;
        j += 1;
    }
    Growth {
        last: j - 1,
        sum_lat,
        sum_lon,
    }
}

/// Greedy left-to-right stay detection.
///
/// From anchor `i`, the cluster grows one ping at a time while every member stays
/// within `radius_m` of the cluster centroid. The cluster is a stay if it spans at
/// least `min_dwell_s`, unless the cluster anchored at `i + 1` is also a stay and
/// reaches strictly further, in which case the anchor moves on. This keeps a
/// stray approach ping from capturing the first few pings of a long dwell.
/// After a stay, scanning resumes past its last member; otherwise the anchor
/// advances by one ping.
pub fn detect_stays(device_id: &str, fixes: &[Fix], params: StayParams, geo: &GeographyHierarchy) -> Vec<Stay> {
    let radius_km = params.radius_m / 1000.0;
    let n = fixes.len();
    let is_stay = |i: usize, g: &Growth| fixes[g.last].timestamp - fixes[i].timestamp >= params.min_dwell_s;
    let mut stays = Vec::new();
    let mut i = 0;
    let mut cached: Option<Growth> = None;
    while i < n {
        let g = cached.take().unwrap_or_else(|| grow(fixes, i, radius_km));
        if !is_stay(i, &g) {
            i += 1;
            continue;
        }
        if i + 1 < n {
            let next = grow(fixes, i + 1, radius_km);
            if next.last > g.last && is_stay(i + 1, &next) {
                cached = Some(next);
                i += 1;
                continue;
            }
        }
        let last = g.last;
        let k = (last - i + 1) as f64;
        let centroid = GeoPoint {
            lat: g.sum_lat / k,
            lon: g.sum_lon / k,
        };
        stays.push(Stay {
            device_id: device_id.to_owned(),
            centroid,
            zone_id: geo.assign_zone(centroid).map(str::to_owned),
            start: fixes[i].timestamp,
            end: fixes[last].timestamp,
            ping_count: last - i + 1,
            pings: i..=last,
        });
        i = last + 1;
    }
    stays
}
