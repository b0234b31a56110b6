use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{DeviceProfile, Stay};
use crate::geodata::{haversine_km, GeoPoint, GeographyHierarchy, Level};
use crate::ingest::Fix;
use crate::time::LocalClock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Work,
    NonWork,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Work => "work",
            Purpose::NonWork => "non_work",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub device_id: String,
    pub origin_zone: Option<String>,
    pub dest_zone: Option<String>,
    pub origin: GeoPoint,
    pub dest: GeoPoint,
    pub depart: i64,
    pub arrive: i64,
    pub distance_km: f64,
    pub purpose: Purpose,
    pub crosses_county: bool,
    pub trip_date: NaiveDate,
}

/// Sum of great-circle legs along `points`.
pub fn path_km(points: impl IntoIterator<Item = GeoPoint>) -> f64 {
    let mut it = points.into_iter();
    let Some(mut prev) = it.next() else { return 0.0 };
    let mut total = 0.0;
    for p in it {
        total += haversine_km(prev, p);
        prev = p;
    }
    total
}

pub fn county_of<'g>(geo: &'g GeographyHierarchy, zone: Option<&str>) -> Option<&'g str> {
    zone.and_then(|z| geo.ancestor(z, Level::County).ok())
}

/// One trip per consecutive stay pair. Distance follows the transit pings
/// between the two stays, starting and ending at the stay centroids.
pub fn extract_trips(
    stays: &[Stay],
    fixes: &[Fix],
    profile: Option<&DeviceProfile>,
    geo: &GeographyHierarchy,
    clock: &LocalClock,
) -> Vec<Trip> {
    let work = profile.and_then(|p| p.work_zone.as_deref());
    stays
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let transit = &fixes[a.pings.end() + 1..*b.pings.start()];
            let distance_km = path_km(
                std::iter::once(a.centroid)
                    .chain(transit.iter().map(|f| f.point))
                    .chain(std::iter::once(b.centroid)),
            );
            let is_work = work.is_some() && (a.zone_id.as_deref() == work || b.zone_id.as_deref() == work);
            let (ca, cb) = (county_of(geo, a.zone_id.as_deref()), county_of(geo, b.zone_id.as_deref()));
            Trip {
                device_id: a.device_id.clone(),
                origin_zone: a.zone_id.clone(),
                dest_zone: b.zone_id.clone(),
                origin: a.centroid,
                dest: b.centroid,
                depart: a.end,
                arrive: b.start,
                distance_km,
                purpose: if is_work { Purpose::Work } else { Purpose::NonWork },
                crosses_county: matches!((ca, cb), (Some(x), Some(y)) if x != y),
                trip_date: clock.date(a.end),
            }
        })
        .collect()
}
