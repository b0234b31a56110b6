//! Ground-truth metrics straight from the generator's trip log.
//!
//! Each agent stands for `county population / agents in county` residents. An
//! agent-day counts as staying home when no trip endpoint is more than
//! [`HOME_RADIUS_KM`] from the agent's true home point.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::geodata::{haversine_km, GeographyHierarchy, Level};
use crate::metrics::{DailyMetrics, MetricValues};
use crate::mobility::{Purpose, HOME_RADIUS_KM};

use super::population::Agent;
use super::simulate::TruthTrip;

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    observed: u64,
    w_observed: f64,
    w_home: f64,
    w_work: f64,
    w_nonwork: f64,
    w_km: f64,
}

#[derive(Debug, Clone)]
pub struct TruthAccumulator<'g> {
    geo: &'g GeographyHierarchy,
    dates: Vec<NaiveDate>,
    weight: BTreeMap<String, f64>,
    /// County → per-date sums, aligned with `dates`.
    county: BTreeMap<String, Vec<Sums>>,
    out_of_county: BTreeMap<(String, NaiveDate), f64>,
}

impl<'g> TruthAccumulator<'g> {
    pub fn new(geo: &'g GeographyHierarchy, agents: &[Agent], dates: &[NaiveDate]) -> Result<Self> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for a in agents {
            *counts.entry(&a.home_county).or_default() += 1;
        }
        let mut weight = BTreeMap::new();
        for (c, n) in counts {
            weight.insert(c.to_owned(), geo.population(c)? as f64 / n as f64);
        }
        Ok(Self {
            geo,
            dates: dates.to_vec(),
            weight,
            county: BTreeMap::new(),
            out_of_county: BTreeMap::new(),
        })
    }

    /// Adds one agent, observed on every date, with its complete trip log.
    pub fn add(&mut self, agent: &Agent, trips: &[TruthTrip]) -> Result<()> {
        let w = *self
            .weight
            .get(&agent.home_county)
            .ok_or_else(|| Error::Argument(format!("agent {} was not in the population", agent.device_id)))?;
        let days = self
            .county
            .entry(agent.home_county.clone())
            .or_insert_with(|| vec![Sums::default(); self.dates.len()]);
        for (i, date) in self.dates.iter().enumerate() {
            let s = &mut days[i];
            s.observed += 1;
            s.w_observed += w;
            let today: Vec<&TruthTrip> = trips.iter().filter(|t| t.date == *date).collect();
            let away = today
                .iter()
                .any(|t| haversine_km(agent.home, t.origin).max(haversine_km(agent.home, t.dest)) > HOME_RADIUS_KM);
            if !away {
                s.w_home += w;
            }
            for t in today {
                match t.purpose {
                    Purpose::Work => s.w_work += w,
                    Purpose::NonWork => s.w_nonwork += w,
                }
                s.w_km += w * t.distance_km;
            }
        }
        for t in trips.iter().filter(|t| t.crosses_county) {
            let mut geos = BTreeSet::new();
            for z in [&t.origin_zone, &t.dest_zone] {
                for level in [Level::County, Level::State, Level::Nation] {
                    geos.insert(self.geo.ancestor(z, level)?.to_owned());
                }
            }
            for g in geos {
                *self.out_of_county.entry((g, t.date)).or_default() += w;
            }
        }
        Ok(())
    }

    /// Metrics for every county, state and nation on every date, ordered by `(geo_id, date)`.
    pub fn finish(&self) -> Vec<DailyMetrics> {
        let mut rolled: BTreeMap<&str, Vec<Sums>> = BTreeMap::new();
        for (county, days) in &self.county {
            for level in [Level::County, Level::State, Level::Nation] {
                let g = self.geo.ancestor(county, level).expect("county has ancestors");
                let acc = rolled.entry(g).or_insert_with(|| vec![Sums::default(); self.dates.len()]);
                for (a, s) in acc.iter_mut().zip(days) {
                    a.observed += s.observed;
                    a.w_observed += s.w_observed;
                    a.w_home += s.w_home;
                    a.w_work += s.w_work;
                    a.w_nonwork += s.w_nonwork;
                    a.w_km += s.w_km;
                }
            }
        }
        let mut out = Vec::new();
        for zone in self.geo.zones().iter().filter(|z| z.level != Level::Zone) {
            for (i, &date) in self.dates.iter().enumerate() {
                let s = rolled.get(zone.zone_id.as_str()).map_or_else(Sums::default, |v| v[i]);
                let pop = zone.population as f64;
                let values = (s.observed > 0 && s.w_observed > 0.0 && pop > 0.0).then(|| MetricValues {
                    pct_staying_home: 100.0 * s.w_home / s.w_observed,
                    work_trips_pp: s.w_work / pop,
                    nonwork_trips_pp: s.w_nonwork / pop,
                    km_pp: s.w_km / pop,
                    out_of_county_trips: self
                        .out_of_county
                        .get(&(zone.zone_id.clone(), date))
                        .copied()
                        .unwrap_or(0.0),
                });
                out.push(DailyMetrics {
                    geo_id: zone.zone_id.clone(),
                    level: zone.level,
                    date,
                    values,
                    observed_devices: s.observed,
                });
            }
        }
        out
    }
}

pub const TRUTH_TRIPS_HEADER: [&str; 13] = [
    "device_id",
    "date",
    "depart",
    "arrive",
    "origin_lat",
    "origin_lon",
    "dest_lat",
    "dest_lon",
    "origin_zone",
    "dest_zone",
    "distance_km",
    "purpose",
    "crosses_county",
];

pub fn write_truth_trips_csv<'a, W: Write>(
    out: &mut csv::Writer<W>,
    trips: impl IntoIterator<Item = &'a TruthTrip>,
) -> Result<()> {
    for t in trips {
        out.write_record([
            t.device_id.clone(),
            t.date.to_string(),
            t.depart.to_string(),
            t.arrive.to_string(),
            t.origin.lat.to_string(),
            t.origin.lon.to_string(),
            t.dest.lat.to_string(),
            t.dest.lon.to_string(),
            t.origin_zone.clone(),
            t.dest_zone.clone(),
            t.distance_km.to_string(),
            t.purpose.as_str().to_owned(),
            t.crosses_county.to_string(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{GeoPoint, Ring, Zone};
    use crate::synth::population::Workplace;

    fn geography() -> GeographyHierarchy {
        let z = |id: &str, level, parent: Option<&str>, lon0: f64, lon1: f64, pop| Zone {
            zone_id: id.into(),
            level,
            parent_id: parent.map(Into::into),
            polygon: Ring::rectangle(0.0, lon0, 1.0, lon1).unwrap(),
            population: pop,
        };
        GeographyHierarchy::new(vec![
            z("N", Level::Nation, None, 0.0, 2.0, 1000),
            z("S", Level::State, Some("N"), 0.0, 2.0, 1000),
            z("C1", Level::County, Some("S"), 0.0, 1.0, 600),
            z("C2", Level::County, Some("S"), 1.0, 2.0, 400),
            z("Z1", Level::Zone, Some("C1"), 0.0, 1.0, 600),
            z("Z2", Level::Zone, Some("C2"), 1.0, 2.0, 400),
        ])
        .unwrap()
    }

    fn agent(i: usize, county: &str, zone: &str, lat: f64, lon: f64) -> Agent {
        Agent {
            index: i,
            device_id: format!("d{i}"),
            home_county: county.into(),
            home_zone: zone.into(),
            home: GeoPoint { lat, lon },
            work: None,
        }
    }

    fn trip(a: &Agent, date: NaiveDate, to: GeoPoint, oz: &str, dz: &str, km: f64, purpose: Purpose) -> TruthTrip {
        TruthTrip {
            device_id: a.device_id.clone(),
            date,
            depart: 0,
            arrive: 0,
            origin: a.home,
            dest: to,
            origin_zone: oz.into(),
            dest_zone: dz.into(),
            distance_km: km,
            purpose,
            crosses_county: oz != dz,
        }
    }

    #[test]
    fn hand_scripted_three_agent_day() {
        let geo = geography();
        let date = NaiveDate::from_ymd_opt(2020, 3, 2).unwrap();
        let a = agent(0, "C1", "Z1", 0.5, 0.5);
        let mut b = agent(1, "C1", "Z1", 0.5, 0.6);
        let work = GeoPoint { lat: 0.5, lon: 1.5 };
        b.work = Some(Workplace { zone_id: "Z2".into(), point: work });
        let c = agent(2, "C2", "Z2", 0.5, 1.5);
        let near = GeoPoint { lat: 0.5, lon: 1.505 };
        let agents = vec![a.clone(), b.clone(), c.clone()];
        let mut acc = TruthAccumulator::new(&geo, &agents, &[date]).unwrap();
        acc.add(&a, &[]).unwrap();
        let mut back = trip(&b, date, b.home, "Z2", "Z1", 5.0, Purpose::Work);
        back.origin = work;
        acc.add(&b, &[trip(&b, date, work, "Z1", "Z2", 5.0, Purpose::Work), back]).unwrap();
        acc.add(&c, &[trip(&c, date, near, "Z2", "Z2", 1.0, Purpose::NonWork), trip(&c, date, c.home, "Z2", "Z2", 1.0, Purpose::NonWork)])
            .unwrap();
        let m = acc.finish();
        let get = |g: &str| m.iter().find(|r| r.geo_id == g).unwrap().values.unwrap().as_array();
        // Weights: a, b = 600/2 = 300; c = 400/1 = 400.
        assert_eq!(get("C1"), [50.0, 1.0, 0.0, 5.0, 600.0]);
        assert_eq!(get("C2"), [100.0, 0.0, 2.0, 2.0, 600.0]);
        let s = get("S");
        let expect = [70.0, 0.6, 0.8, 3.8, 600.0];
        for k in 0..5 {
            assert!((s[k] - expect[k]).abs() < 1e-12, "{s:?}");
        }
        assert_eq!(get("N"), s);
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn all_home_day() {
        let geo = geography();
        let date = NaiveDate::from_ymd_opt(2020, 3, 2).unwrap();
        let agents = vec![agent(0, "C1", "Z1", 0.5, 0.5), agent(1, "C2", "Z2", 0.5, 1.5)];
        let mut acc = TruthAccumulator::new(&geo, &agents, &[date]).unwrap();
        for a in &agents {
            acc.add(a, &[]).unwrap();
        }
        for r in acc.finish() {
            assert_eq!(r.values.unwrap().as_array(), [100.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }
}
