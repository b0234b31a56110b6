//! Scenario files: seed, agent counts, date range and behaviour phases.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Behaviour in effect from `start` until the next phase begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    #[serde(default)]
    pub name: Option<String>,
    pub start: NaiveDate,
    /// Chance an agent makes no trip at all that day.
    pub stay_home_prob: f64,
    /// Weekday commute probability for agents with a workplace.
    pub work_trip_rate: f64,
    /// Expected non-work trips per mobile agent-day.
    pub nonwork_trip_rate: f64,
    /// Multiplier on non-work destination distances.
    pub distance_scale: f64,
    /// Chance a non-work destination lies in another county.
    pub out_of_county_prob: f64,
}

/// Saturday/Sunday multipliers on the phase trip rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeekendFactors {
    pub work: f64,
    pub nonwork: f64,
}

impl Default for WeekendFactors {
    fn default() -> Self {
        Self { work: 0.1, nonwork: 1.1 }
    }
}

/// Rates of injected faulty pings, each drawn per emitted ping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierRates {
    pub low_accuracy: f64,
    pub out_of_coverage: f64,
    pub duplicate: f64,
}

impl Default for OutlierRates {
    fn default() -> Self {
        Self {
            low_accuracy: 0.002,
            out_of_coverage: 0.001,
            duplicate: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// GeoJSON geography, relative to the scenario file.
    pub geography: PathBuf,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    /// Agents in every county. Exclusive with `total_agents`.
    #[serde(default)]
    pub agents_per_county: Option<usize>,
    /// Agents spread over counties in proportion to population.
    #[serde(default)]
    pub total_agents: Option<usize>,
    #[serde(default = "defaults::ping_interval")]
    pub ping_interval_s: i64,
    #[serde(default = "defaults::dwell_ping_interval")]
    pub dwell_ping_interval_s: i64,
    #[serde(default = "defaults::ping_noise")]
    pub ping_noise_m: f64,
    #[serde(default)]
    pub utc_offset_s: i64,
    /// Mean non-work destination distance at `distance_scale = 1`.
    #[serde(default = "defaults::mean_trip_km")]
    pub mean_trip_km: f64,
    #[serde(default = "defaults::worker_share")]
    pub worker_share: f64,
    #[serde(default)]
    pub weekend: WeekendFactors,
    #[serde(default)]
    pub outliers: OutlierRates,
    pub phases: Vec<Phase>,
}

mod defaults {
    pub fn ping_interval() -> i64 {
        60
    }
    pub fn dwell_ping_interval() -> i64 {
        3600
    }
    pub fn ping_noise() -> f64 {
        20.0
    }
    pub fn mean_trip_km() -> f64 {
        8.0
    }
    pub fn worker_share() -> f64 {
        0.6
    }
}

fn prob(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(field, format!("{p} is not a probability")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("{x} must be a finite non-negative number")))
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario, resolving `geography` against the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::from_toml(&text)?;
        if s.geography.is_relative() {
            if let Some(dir) = path.parent() {
                s.geography = dir.join(&s.geography);
            }
        }
        Ok(s)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::config("scenario", e.message().to_owned()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_date < self.start_date {
            return Err(Error::config("end_date", "precedes start_date"));
        }
        match (self.agents_per_county, self.total_agents) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::config(
                    "agents_per_county",
                    "set exactly one of agents_per_county and total_agents",
                ))
            }
            _ => {}
        }
        if self.ping_interval_s <= 0 || self.dwell_ping_interval_s <= 0 {
            return Err(Error::config("ping_interval_s", "intervals must be positive"));
        }
        non_negative("ping_noise_m", self.ping_noise_m)?;
        non_negative("mean_trip_km", self.mean_trip_km)?;
        non_negative("weekend.work", self.weekend.work)?;
        non_negative("weekend.nonwork", self.weekend.nonwork)?;
        prob("worker_share", self.worker_share)?;
        prob("outliers.low_accuracy", self.outliers.low_accuracy)?;
        prob("outliers.out_of_coverage", self.outliers.out_of_coverage)?;
        prob("outliers.duplicate", self.outliers.duplicate)?;
        let Some(first) = self.phases.first() else {
            return Err(Error::config("phases", "at least one phase is required"));
        };
        if first.start > self.start_date {
            return Err(Error::config("phases", "the first phase must start on or before start_date"));
        }
        for w in self.phases.windows(2) {
            if w[1].start <= w[0].start {
                return Err(Error::config("phases", "phases must be sorted by strictly increasing start"));
            }
        }
        for p in &self.phases {
            prob("phases.stay_home_prob", p.stay_home_prob)?;
            prob("phases.work_trip_rate", p.work_trip_rate)?;
            prob("phases.out_of_county_prob", p.out_of_county_prob)?;
            non_negative("phases.nonwork_trip_rate", p.nonwork_trip_rate)?;
            non_negative("phases.distance_scale", p.distance_scale)?;
        }
        Ok(())
    }

    /// Phase in effect on `date`.
    pub fn phase_on(&self, date: NaiveDate) -> &Phase {
        let i = self.phases.partition_point(|p| p.start <= date);
        &self.phases[i.saturating_sub(1)]
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        crate::time::dates(self.start_date, self.end_date).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SMALL: &str = r#"
seed = 7
geography = "geo.geojson"
start_date = "2020-02-01"
end_date = "2020-02-20"
agents_per_county = 10

[[phases]]
name = "baseline"
start = "2020-01-01"
stay_home_prob = 0.1
work_trip_rate = 0.5
nonwork_trip_rate = 2.0
distance_scale = 1.0
out_of_county_prob = 0.1

[[phases]]
start = "2020-02-10"
stay_home_prob = 0.5
work_trip_rate = 0.2
nonwork_trip_rate = 1.0
distance_scale = 0.5
out_of_county_prob = 0.0
"#;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, m, day).unwrap()
    }

    #[test]
    fn parses_with_defaults() {
        let s = ScenarioConfig::from_toml(SMALL).unwrap();
        assert_eq!(s.ping_interval_s, 60);
        assert_eq!(s.weekend, WeekendFactors::default());
        assert_eq!(s.phases[0].name.as_deref().unwrap(), "baseline");
        assert_eq!(s.phase_on(d(2, 9)).stay_home_prob, 0.1);
        assert_eq!(s.phase_on(d(2, 10)).stay_home_prob, 0.5);
        assert_eq!(s.dates().len(), 20);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let bad = [
            SMALL.replace("stay_home_prob = 0.5", "stay_home_prob = 1.5"),
            SMALL.replace("2020-02-10", "2019-12-01"),
            SMALL.replace("agents_per_county = 10", "agents_per_county = 10\ntotal_agents = 5"),
            SMALL.replace("agents_per_county = 10", ""),
            SMALL.replace("distance_scale = 0.5", "distance_scale = -1.0"),
            SMALL.replace("start = \"2020-01-01\"", "start = \"2020-02-05\""),
            SMALL.replace("seed = 7", "seed = 7\nbogus = 1"),
        ];
        for text in bad {
            let e = ScenarioConfig::from_toml(&text).unwrap_err();
            assert!(e.is_config(), "{e}");
        }
    }
}
