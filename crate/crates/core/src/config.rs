//! Pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::cases::RankKey;
use crate::error::{Error, Result};
use crate::geodata::Level;
use crate::ingest::CleaningConfig;
use crate::mobility::MobilityConfig;
use crate::pipeline::PipelineParams;
use crate::sdi::{BenchmarkWindow, SdiWeights};
use crate::time::{LocalClock, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub geography: Option<PathBuf>,
    pub pings: Option<PathBuf>,
    pub cases: Option<PathBuf>,
    /// SDI series read by `join-cases` and `report`; defaults to `output_dir/sdi.csv`.
    pub sdi: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            geography: None,
            pings: None,
            cases: None,
            sdi: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningSection {
    pub max_speed_kmh: f64,
    pub max_accuracy_m: f64,
    /// Inclusive local-date study window; pings outside it are dropped.
    pub study_start: Option<NaiveDate>,
    pub study_end: Option<NaiveDate>,
}

impl Default for CleaningSection {
    fn default() -> Self {
        let c = CleaningConfig::default();
        Self {
            max_speed_kmh: c.max_speed_kmh,
            max_accuracy_m: c.max_accuracy_m,
            study_start: None,
            study_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub level: Level,
    pub k: usize,
    pub key: RankKey,
    /// Ranking date; defaults to the latest date shared by SDI and cases.
    pub date: Option<NaiveDate>,
    pub svg: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            level: Level::State,
            k: 5,
            key: RankKey::Cumulative,
            date: None,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub benchmark: BenchmarkWindow,
    pub weights: SdiWeights,
    pub cleaning: CleaningSection,
    pub mobility: MobilityConfig,
    pub utc_offset_s: i64,
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
    pub report: ReportConfig,
    /// Also write stays.csv, trips.csv and profiles.csv.
    pub dump_intermediate: bool,
}

impl PipelineConfig {
    /// Loads a config file; relative paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read `{}`: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_against(dir);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_against(&mut self, dir: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.geography, &mut p.pings, &mut p.cases, &mut p.sdi] {
            if let Some(path) = slot.as_mut().filter(|x| x.is_relative()) {
                *path = dir.join(&*path);
            }
        }
        if p.output_dir.is_relative() {
            p.output_dir = dir.join(&p.output_dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Written so NaN fails too.
        let positive = |x: f64| x > 0.0;
        if self.benchmark.end < self.benchmark.start {
            return Err(Error::config("benchmark", "end precedes start"));
        }
        if !positive(self.cleaning.max_speed_kmh) || !positive(self.cleaning.max_accuracy_m) {
            return Err(Error::config("cleaning", "thresholds must be positive"));
        }
        if let (Some(a), Some(b)) = (self.cleaning.study_start, self.cleaning.study_end) {
            if b < a {
                return Err(Error::config("cleaning.study_end", "precedes study_start"));
            }
        }
        if !positive(self.mobility.stay_radius_m) || self.mobility.min_dwell_s < 0 {
            return Err(Error::config("mobility", "stay radius must be positive and dwell non-negative"));
        }
        let a = &self.mobility.anchors;
        if [a.night_start_hour, a.night_end_hour, a.work_start_hour, a.work_end_hour]
            .iter()
            .any(|h| *h > 24)
            || a.work_end_hour <= a.work_start_hour
        {
            return Err(Error::config("mobility", "anchor hours must lie in 0..=24 with work_start < work_end"));
        }
        if self.utc_offset_s.abs() >= SECONDS_PER_DAY {
            return Err(Error::config("utc_offset_s", "must be less than a day in magnitude"));
        }
        if self.report.k == 0 {
            return Err(Error::config("report.k", "must be positive"));
        }
        if self.report.level == Level::Zone {
            return Err(Error::config("report.level", "reports cover county, state or nation"));
        }
        Ok(())
    }

    /// Returns the path in `field`, which must name an existing file.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
        match path {
            None => Err(Error::config(field, "not set")),
            Some(p) if !p.is_file() => Err(Error::config(field, format!("file `{}` not found", p.display()))),
            Some(p) => Ok(p),
        }
    }

    pub fn sdi_path(&self) -> PathBuf {
        self.paths.sdi.clone().unwrap_or_else(|| self.paths.output_dir.join("sdi.csv"))
    }

    pub fn clock(&self) -> LocalClock {
        LocalClock::new(self.utc_offset_s)
    }

    pub fn params(&self) -> PipelineParams {
        let clock = self.clock();
        let window_s = match (self.cleaning.study_start, self.cleaning.study_end) {
            (None, None) => None,
            (a, b) => Some((
                a.map_or(i64::MIN, |d| clock.day_start(d)),
                b.map_or(i64::MAX, |d| clock.day_start(d) + SECONDS_PER_DAY),
            )),
        };
        PipelineParams {
            cleaning: CleaningConfig {
                max_speed_kmh: self.cleaning.max_speed_kmh,
                max_accuracy_m: self.cleaning.max_accuracy_m,
                window_s,
            },
            mobility: MobilityConfig { clock, ..self.mobility },
            benchmark: self.benchmark,
            weights: self.weights,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
utc_offset_s = -18000
workers = 2
dump_intermediate = true

[paths]
geography = "geo.geojson"
pings = "/abs/pings.ndjson"
output_dir = "run"

[benchmark]
start = "2020-02-01"
end = "2020-02-14"

[weights]
beta2 = 0.25
beta3 = 0.45
beta4 = 0.3
beta5 = 0.2

[cleaning]
max_speed_kmh = 200.0
study_start = "2020-01-01"
study_end = "2020-01-31"

[mobility]
stay_radius_m = 250.0
min_home_days = 4

[report]
level = "county"
k = 3
key = "per_thousand"
"#;

    #[test]
    fn parses_and_resolves() {
        let mut c = PipelineConfig::from_toml(FULL).unwrap();
        c.resolve_against(Path::new("/cfg"));
        assert_eq!(c.paths.geography.as_deref(), Some(Path::new("/cfg/geo.geojson")));
        assert_eq!(c.paths.pings.as_deref(), Some(Path::new("/abs/pings.ndjson")));
        assert_eq!(c.sdi_path(), Path::new("/cfg/run/sdi.csv"));
        assert_eq!(c.mobility.anchors.min_home_days, 4);
        assert_eq!(c.mobility.anchors.night_start_hour, 19);
        assert_eq!(c.report.key, RankKey::PerThousand);
        let p = c.params();
        assert_eq!(p.mobility.clock, LocalClock::new(-18000));
        let (a, b) = p.cleaning.window_s.unwrap();
        assert_eq!(b - a, 31 * SECONDS_PER_DAY);
        assert_eq!(a, 1_577_836_800 + 18_000);
    }

    #[test]
    fn round_trips_through_toml_and_json() {
        let c = PipelineConfig::from_toml(FULL).unwrap();
        let again = PipelineConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        let json: PipelineConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(c, json);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[weights]\nbeta2 = 0.5\nbeta3 = 0.45\nbeta4 = 0.3",
            "[report]\nk = 0",
            "[report]\nlevel = \"zone\"",
            "[benchmark]\nstart = \"2020-02-14\"\nend = \"2020-02-01\"",
            "utc_offset_s = 90000",
            "unknown = 1",
            "[paths]\nfoo = \"x\"",
        ] {
            let e = PipelineConfig::from_toml(bad).unwrap_err();
            assert!(e.is_config(), "{bad}: {e}");
        }
    }

    #[test]
    fn require_names_the_field() {
        let c = PipelineConfig::default();
        let e = c.require(&Some(PathBuf::from("/no/such/file")), "paths.geography").unwrap_err();
        assert!(e.to_string().contains("paths.geography"));
        assert!(c.require(&None, "paths.pings").unwrap_err().is_config());
    }
}
