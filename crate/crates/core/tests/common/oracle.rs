//! Exhaustive reference implementations for stays, trips and the home rule.
//!
//! Nothing is cached or incremental: every candidate cluster is recomputed
//! from scratch with full member scans.

use chrono::NaiveDate;
use sdi_core::geodata::{haversine_km, GeoPoint};
use sdi_core::ingest::Fix;
use sdi_core::time::LocalClock;

#[derive(Debug, Clone, PartialEq)]
pub struct RefStay {
    pub first: usize,
    pub last: usize,
    pub centroid: GeoPoint,
}

fn centroid(fixes: &[Fix]) -> GeoPoint {
    let (mut lat, mut lon) = (0.0, 0.0);
    for f in fixes {
        lat += f.point.lat;
        lon += f.point.lon;
    }
    let k = fixes.len() as f64;
    GeoPoint { lat: lat / k, lon: lon / k }
}

fn compact(fixes: &[Fix], radius_km: f64) -> bool {
    let c = centroid(fixes);
    fixes.iter().all(|f| haversine_km(c, f.point) <= radius_km)
}

/// Last index reachable from `i` while every prefix stays compact.
fn reach(fixes: &[Fix], i: usize, radius_km: f64) -> usize {
    let mut last = i;
    for j in i + 1..fixes.len() {
        if !(i..=j).all(|m| compact(&fixes[i..=m], radius_km)) {
            break;
        }
        last = j;
    }
    last
}

pub fn stays(fixes: &[Fix], radius_m: f64, min_dwell_s: i64) -> Vec<RefStay> {
    let r = radius_m / 1000.0;
    let n = fixes.len();
    let valid = |i: usize| fixes[reach(fixes, i, r)].timestamp - fixes[i].timestamp >= min_dwell_s;
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !valid(i) {
            i += 1;
            continue;
        }
        let last = reach(fixes, i, r);
        if i + 1 < n && valid(i + 1) && reach(fixes, i + 1, r) > last {
            i += 1;
            continue;
        }
        out.push(RefStay {
            first: i,
            last,
            centroid: centroid(&fixes[i..=last]),
        });
        i = last + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefTrip {
    pub depart: i64,
    pub arrive: i64,
    pub origin: GeoPoint,
    pub dest: GeoPoint,
    pub distance_km: f64,
}

/// One trip per consecutive stay pair, distance along centroid, transit pings, centroid.
pub fn trips(fixes: &[Fix], stays: &[RefStay]) -> Vec<RefTrip> {
    let mut out = Vec::new();
    for k in 1..stays.len() {
        let (a, b) = (&stays[k - 1], &stays[k]);
        let mut path = vec![a.centroid];
        path.extend(fixes[a.last + 1..b.first].iter().map(|f| f.point));
        path.push(b.centroid);
        let mut km = 0.0;
        for w in 0..path.len() - 1 {
            km += haversine_km(path[w], path[w + 1]);
        }
        out.push(RefTrip {
            depart: fixes[a.last].timestamp,
            arrive: fixes[b.first].timestamp,
            origin: a.centroid,
            dest: b.centroid,
            distance_km: km,
        });
    }
    out
}

/// True when no trip departing on `date` has an endpoint beyond 1.61 km of home.
pub fn stayed_home(trips: &[RefTrip], home: GeoPoint, date: NaiveDate, clock: &LocalClock) -> bool {
    trips
        .iter()
        .filter(|t| clock.date(t.depart) == date)
        .all(|t| haversine_km(home, t.origin) <= 1.61 && haversine_km(home, t.dest) <= 1.61)
}

/// Runs the library on one trace and compares stays, trips and daily home
/// status with the reference, exactly.
pub fn compare_device(
    trace: &sdi_core::ingest::DeviceTrace,
    geo: &sdi_core::GeographyHierarchy,
) -> Result<sdi_core::mobility::DeviceOutcome, String> {
    use sdi_core::mobility::{process_device, HomeStatus, MobilityConfig};
    let cfg = MobilityConfig::default();
    let out = process_device(trace, &cfg, geo);
    let id = &trace.device_id;
    let want = stays(&trace.fixes, cfg.stay_radius_m, cfg.min_dwell_s);
    let got: Vec<RefStay> = out
        .stays
        .iter()
        .map(|s| RefStay {
            first: *s.pings.start(),
            last: *s.pings.end(),
            centroid: s.centroid,
        })
        .collect();
    if got != want {
        return Err(format!("{id}: stays differ\n  lib {got:?}\n  ref {want:?}"));
    }
    let want_trips = trips(&trace.fixes, &want);
    let got_trips: Vec<RefTrip> = out
        .trips
        .iter()
        .map(|t| RefTrip {
            depart: t.depart,
            arrive: t.arrive,
            origin: t.origin,
            dest: t.dest,
            distance_km: t.distance_km,
        })
        .collect();
    if got_trips != want_trips {
        return Err(format!("{id}: trips differ\n  lib {got_trips:?}\n  ref {want_trips:?}"));
    }
    for day in &out.days {
        let want = match &out.profile {
            None => HomeStatus::Unobserved,
            Some(p) if stayed_home(&want_trips, p.home_anchor, day.date, &cfg.clock) => HomeStatus::StayedHome,
            Some(_) => HomeStatus::LeftHome,
        };
        if day.status != want {
            return Err(format!("{id}: {} status {:?}, reference {want:?}", day.date, day.status));
        }
    }
    Ok(out)
}
