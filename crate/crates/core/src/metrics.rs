//! Population expansion and the five daily mobility metrics per geography.
//!
//! Devices are weighted by post-stratification on their home county: each of the
//! `n` profiled devices homed in a county of population `P` stands for `P / n`
//! residents, and every trip inherits its device's weight. County sums are
//! folded in fixed-size device chunks and merged in chunk order, so results
//! are identical for any worker count; state and nation sums are rolled up from
//! counties. Out-of-county trips are counted once per geography containing
//! either endpoint county.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geodata::{GeographyHierarchy, Level};
use crate::mobility::{county_of, DeviceOutcome, DeviceProfile, HomeStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDevice {
    pub device_id: String,
    pub home_zone: String,
    pub home_county: String,
    /// Residents represented by this device.
    pub weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DeviceWeights {
    pub devices: Vec<WeightedDevice>,
    index: HashMap<String, usize>,
    /// Populated counties without a single profiled device.
    pub uncovered_counties: Vec<String>,
}

impl DeviceWeights {
    pub fn get(&self, device_id: &str) -> Option<&WeightedDevice> {
        self.index.get(device_id).map(|&i| &self.devices[i])
    }

    pub fn total(&self) -> f64 {
        self.devices.iter().map(|d| d.weight).sum()
    }
}

/// Home-county post-stratification weights.
pub fn compute_device_weights<'a>(
    profiles: impl IntoIterator<Item = &'a DeviceProfile>,
    geo: &GeographyHierarchy,
) -> Result<DeviceWeights> {
    let mut homed: BTreeMap<String, Vec<&DeviceProfile>> = BTreeMap::new();
    for p in profiles {
        let county = geo.ancestor(&p.home_zone, Level::County)?.to_owned();
        homed.entry(county).or_default().push(p);
    }
    let mut devices = Vec::new();
    for (county, members) in &homed {
        let weight = geo.population(county)? as f64 / members.len() as f64;
        devices.extend(members.iter().map(|p| WeightedDevice {
            device_id: p.device_id.clone(),
            home_zone: p.home_zone.clone(),
            home_county: county.clone(),
            weight,
        }));
    }
    devices.sort_by(|a, b| a.device_id.cmp(&b.device_id));
    let uncovered_counties: Vec<String> = geo
        .zones_at(Level::County)
        .filter(|c| c.population > 0 && !homed.contains_key(&c.zone_id))
        .map(|c| c.zone_id.clone())
        .collect();
    for c in &uncovered_counties {
        log::warn!("county {c} has population but no profiled devices; its metrics will be no-data");
    }
    let index = devices
        .iter()
        .enumerate()
        .map(|(i, d)| (d.device_id.clone(), i))
        .collect();
    Ok(DeviceWeights {
        devices,
        index,
        uncovered_counties,
    })
}

/// The five metrics of one geography-day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub pct_staying_home: f64,
    pub work_trips_pp: f64,
    pub nonwork_trips_pp: f64,
    pub km_pp: f64,
    pub out_of_county_trips: f64,
}

impl MetricValues {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.pct_staying_home,
            self.work_trips_pp,
            self.nonwork_trips_pp,
            self.km_pp,
            self.out_of_county_trips,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            pct_staying_home: a[0],
            work_trips_pp: a[1],
            nonwork_trips_pp: a[2],
            km_pp: a[3],
            out_of_county_trips: a[4],
        }
    }
}

/// Metrics for one geography on one date; `values` is `None` when no device
/// homed in the geography was observed that day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyMetrics {
    pub geo_id: String,
    pub level: Level,
    pub date: NaiveDate,
    pub values: Option<MetricValues>,
    pub observed_devices: u64,
}

/// Additive weighted sums behind one geography-day.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricSums {
    pub w_observed: f64,
    pub w_home: f64,
    pub w_work_trips: f64,
    pub w_nonwork_trips: f64,
    pub w_km: f64,
    pub observed_devices: u64,
}

impl MetricSums {
    fn add(&mut self, o: &MetricSums) {
        self.w_observed += o.w_observed;
        self.w_home += o.w_home;
        self.w_work_trips += o.w_work_trips;
        self.w_nonwork_trips += o.w_nonwork_trips;
        self.w_km += o.w_km;
        self.observed_devices += o.observed_devices;
    }

    /// Converts sums to metrics. No-data when nothing was observed or the
    /// geography has no population to divide by.
    pub fn finish(&self, population: u64, out_of_county: f64) -> Option<MetricValues> {
        if self.observed_devices == 0 || self.w_observed <= 0.0 || population == 0 {
            return None;
        }
        let pop = population as f64;
        Some(MetricValues {
            pct_staying_home: 100.0 * self.w_home / self.w_observed,
            work_trips_pp: self.w_work_trips / pop,
            nonwork_trips_pp: self.w_nonwork_trips / pop,
            km_pp: self.w_km / pop,
            out_of_county_trips: out_of_county,
        })
    }
}

/// Devices per fold chunk. Fixed so the summation order never depends on threads.
const FOLD_CHUNK: usize = 64;

type Key = (String, NaiveDate);

#[derive(Default)]
struct Partial {
    county: BTreeMap<Key, MetricSums>,
    out_of_county: BTreeMap<Key, f64>,
}

impl Partial {
    fn merge(&mut self, o: Partial) {
        for (k, v) in o.county {
            self.county.entry(k).or_default().add(&v);
        }
        for (k, v) in o.out_of_county {
            *self.out_of_county.entry(k).or_default() += v;
        }
    }
}

fn fold_chunk(chunk: &[&DeviceOutcome], weights: &DeviceWeights, geo: &GeographyHierarchy) -> Partial {
    let mut part = Partial::default();
    for outcome in chunk {
        let Some(wd) = weights.get(&outcome.device_id) else { continue };
        let w = wd.weight;
        for day in &outcome.days {
            if day.status == HomeStatus::Unobserved {
                continue;
            }
            let s = part.county.entry((wd.home_county.clone(), day.date)).or_default();
            s.w_observed += w;
            s.observed_devices += 1;
            if day.status == HomeStatus::StayedHome {
                s.w_home += w;
            }
            s.w_work_trips += w * f64::from(day.work_trips);
            s.w_nonwork_trips += w * f64::from(day.nonwork_trips);
            s.w_km += w * day.km_traveled;
        }
        for t in outcome.trips.iter().filter(|t| t.crosses_county) {
            let (Some(a), Some(b)) = (county_of(geo, t.origin_zone.as_deref()), county_of(geo, t.dest_zone.as_deref()))
            else {
                continue;
            };
            let mut geos = BTreeSet::new();
            for c in [a, b] {
                for level in [Level::County, Level::State, Level::Nation] {
                    geos.insert(geo.ancestor(c, level).expect("county has ancestors"));
                }
            }
            for g in geos {
                *part.out_of_county.entry((g.to_owned(), t.trip_date)).or_default() += w;
            }
        }
    }
    part
}

/// Daily metrics for every county, state and nation on every date in `dates`,
/// ordered by `(geo_id, date)`.
pub fn aggregate_all(
    outcomes: &[DeviceOutcome],
    weights: &DeviceWeights,
    geo: &GeographyHierarchy,
    dates: &[NaiveDate],
) -> Vec<DailyMetrics> {
    let mut sorted: Vec<&DeviceOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.device_id.cmp(&b.device_id));
    let chunks: Vec<&[&DeviceOutcome]> = sorted.chunks(FOLD_CHUNK).collect();
    let partials = exec::map(&chunks, |c| fold_chunk(c, weights, geo));
    let mut total = Partial::default();
    for p in partials {
        total.merge(p);
    }

    // Roll county sums up the hierarchy in ascending county order.
    let mut sums: BTreeMap<Key, MetricSums> = BTreeMap::new();
    for ((county, date), s) in &total.county {
        for level in [Level::County, Level::State, Level::Nation] {
            let g = geo.ancestor(county, level).expect("county has ancestors");
            sums.entry((g.to_owned(), *date)).or_default().add(s);
        }
    }

    let mut out = Vec::new();
    for zone in geo.zones().iter().filter(|z| z.level != Level::Zone) {
        for &date in dates {
            let key = (zone.zone_id.clone(), date);
            let s = sums.get(&key).copied().unwrap_or_default();
            let ooc = total.out_of_county.get(&key).copied().unwrap_or(0.0);
            out.push(DailyMetrics {
                geo_id: zone.zone_id.clone(),
                level: zone.level,
                date,
                values: s.finish(zone.population, ooc),
                observed_devices: s.observed_devices,
            });
        }
    }
    out
}

/// Metrics at one `level` for one `date`.
pub fn aggregate_daily_metrics(
    outcomes: &[DeviceOutcome],
    weights: &DeviceWeights,
    geo: &GeographyHierarchy,
    date: NaiveDate,
    level: Level,
) -> Result<Vec<DailyMetrics>> {
    if level == Level::Zone {
        return Err(Error::Argument("metrics are aggregated at county, state or nation level".into()));
    }
    Ok(aggregate_all(outcomes, weights, geo, &[date])
        .into_iter()
        .filter(|m| m.level == level)
        .collect())
}

pub const METRICS_HEADER: [&str; 9] = [
    "geo_id",
    "level",
    "date",
    "pct_staying_home",
    "work_trips_pp",
    "nonwork_trips_pp",
    "km_pp",
    "out_of_county_trips",
    "observed_devices",
];

pub fn write_metrics_csv<'a>(w: impl Write, rows: impl IntoIterator<Item = &'a DailyMetrics>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for m in rows {
        let vals: [String; 5] = match &m.values {
            Some(v) => v.as_array().map(|x| x.to_string()),
            None => Default::default(),
        };
        let mut rec = vec![m.geo_id.clone(), m.level.to_string(), m.date.to_string()];
        rec.extend(vals);
        rec.push(m.observed_devices.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv(r: impl Read) -> Result<Vec<DailyMetrics>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::Argument("metrics.csv header mismatch".into()));
    }
    let bad = |line: usize, msg: &str| Error::Argument(format!("metrics.csv record {line}: {msg}"));
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let level: Level = rec[1].parse()?;
        let date: NaiveDate = rec[2].parse().map_err(|_| bad(i, "bad date"))?;
        let values = if (3..8).all(|k| rec[k].is_empty()) {
            None
        } else {
            let mut a = [0.0; 5];
            for (k, slot) in a.iter_mut().enumerate() {
                *slot = rec[3 + k].parse().map_err(|_| bad(i, "bad metric value"))?;
            }
            Some(MetricValues::from_array(a))
        };
        rows.push(DailyMetrics {
            geo_id: rec[0].to_owned(),
            level,
            date,
            values,
            observed_devices: rec[8].parse().map_err(|_| bad(i, "bad device count"))?,
        });
    }
    Ok(rows)
}
