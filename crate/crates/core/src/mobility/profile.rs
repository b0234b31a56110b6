use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Stay;
use crate::geodata::GeoPoint;
use crate::time::{self, LocalClock};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub device_id: String,
    pub home_zone: String,
    pub work_zone: Option<String>,
    pub home_anchor: GeoPoint,
    pub observed_days: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorParams {
    /// Night window start, local hour; the window runs into the next morning.
    pub night_start_hour: u32,
    pub night_end_hour: u32,
    pub min_home_days: usize,
    pub work_start_hour: u32,
    pub work_end_hour: u32,
    pub min_work_days: usize,
    /// Minimum overlap of one stay with the work window for that day to count.
    pub min_work_stay_s: i64,
}

impl Default for AnchorParams {
    fn default() -> Self {
        Self {
            night_start_hour: 19,
            night_end_hour: 8,
            min_home_days: 3,
            work_start_hour: 9,
            work_end_hour: 17,
            min_work_days: 3,
            min_work_stay_s: 3600,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeAnchor {
    pub zone_id: String,
    pub anchor: GeoPoint,
}

#[derive(Default)]
struct ZoneTally {
    days: BTreeSet<NaiveDate>,
    seconds: i64,
}

/// Zone with most distinct days, then most seconds, then smallest id.
fn winner(tallies: &BTreeMap<&str, ZoneTally>, min_days: usize) -> Option<String> {
    tallies
        .iter()
        .filter(|(_, t)| t.days.len() >= min_days)
        // BTreeMap iterates ids ascending; max_by keeps the last maximum, so
        // compare with a reversed id to favour the smallest.
        .max_by(|(za, a), (zb, b)| {
            (a.days.len(), a.seconds)
                .cmp(&(b.days.len(), b.seconds))
                .then_with(|| zb.cmp(za))
        })
        .map(|(z, _)| (*z).to_owned())
}

/// Per-night overlaps of `stay` with the night window. Night `d` runs from
/// `d` at the start hour to `d + 1` at the end hour.
fn night_overlaps(stay: &Stay, clock: &LocalClock, p: &AnchorParams) -> Vec<(NaiveDate, i64)> {
    let first = clock.date(stay.start).pred_opt().expect("date in range");
    let last = clock.date(stay.end);
    time::dates(first, last)
        .filter_map(|d| {
            let w0 = clock.at(d, i64::from(p.night_start_hour) * 3600);
            let w1 = clock.at(d, (24 + i64::from(p.night_end_hour)) * 3600);
            let o = time::overlap(stay.start, stay.end, w0, w1);
            (o > 0).then_some((d, o))
        })
        .collect()
}

/// Home zone: the zone holding night-window stays on the most distinct nights.
pub fn impute_home(stays: &[Stay], clock: &LocalClock, params: &AnchorParams) -> Option<HomeAnchor> {
    let mut tallies: BTreeMap<&str, ZoneTally> = BTreeMap::new();
    for s in stays {
        let Some(zone) = s.zone_id.as_deref() else { continue };
        for (night, secs) in night_overlaps(s, clock, params) {
            let t = tallies.entry(zone).or_default();
            t.days.insert(night);
            t.seconds += secs;
        }
    }
    let zone_id = winner(&tallies, params.min_home_days)?;
    let (mut lat, mut lon, mut w) = (0.0, 0.0, 0.0);
    for s in stays.iter().filter(|s| s.zone_id.as_deref() == Some(zone_id.as_str())) {
        let secs: i64 = night_overlaps(s, clock, params).iter().map(|(_, o)| o).sum();
        let secs = secs as f64;
        lat += s.centroid.lat * secs;
        lon += s.centroid.lon * secs;
        w += secs;
    }
    Some(HomeAnchor {
        zone_id,
        anchor: GeoPoint {
            lat: lat / w,
            lon: lon / w,
        },
    })
}

/// Work zone: the non-home zone with a long work-window stay on the most
/// distinct weekdays.
pub fn impute_work(stays: &[Stay], home_zone: &str, clock: &LocalClock, params: &AnchorParams) -> Option<String> {
    let mut tallies: BTreeMap<&str, ZoneTally> = BTreeMap::new();
    for s in stays {
        let Some(zone) = s.zone_id.as_deref() else { continue };
        if zone == home_zone {
            continue;
        }
        for d in time::dates(clock.date(s.start), clock.date(s.end)).filter(|d| time::is_weekday(*d)) {
            let w0 = clock.at(d, i64::from(params.work_start_hour) * 3600);
            let w1 = clock.at(d, i64::from(params.work_end_hour) * 3600);
            let o = time::overlap(s.start, s.end, w0, w1);
            if o >= params.min_work_stay_s && o > 0 {
                let t = tallies.entry(zone).or_default();
                t.days.insert(d);
                t.seconds += o;
            }
        }
    }
    winner(&tallies, params.min_work_days)
}
