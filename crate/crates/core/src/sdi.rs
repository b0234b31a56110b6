//! The Social Distancing Index.
//!
//! Each geography gets a benchmark: the mean of every metric over the weekdays
//! of a pre-outbreak window. A day's inputs are
//!
//! * `x1`: increase in percent of residents staying home, in percentage points;
//! * `x2..x5`: percent reductions in work trips, non-work trips, kilometres
//!   travelled (all per person) and out-of-county trips.
//!
//! Every input is clamped to `[0, 100]`, so increases in travel count as zero.
//! The score is
//!
//! ```text
//! SDI = [b1·x1 + 0.01·(100 − x1)·(b2·x2 + b3·x3 + b4·x4)]·(1 − b5) + b5·x5
//! ```
//!
//! with `b1 = 1` and `b2 + b3 + b4 = 1`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::Level;
use crate::metrics::{DailyMetrics, MetricValues};
use crate::time;

/// Validated SDI coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct SdiWeights {
    beta2: f64,
    beta3: f64,
    beta4: f64,
    beta5: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawWeights {
    beta1: f64,
    beta2: f64,
    beta3: f64,
    beta4: f64,
    beta5: f64,
}

impl Default for RawWeights {
    fn default() -> Self {
        let w = SdiWeights::default();
        Self {
            beta1: 1.0,
            beta2: w.beta2,
            beta3: w.beta3,
            beta4: w.beta4,
            beta5: w.beta5,
        }
    }
}

impl TryFrom<RawWeights> for SdiWeights {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        if r.beta1 != 1.0 {
            return Err(Error::config("weights.beta1", format!("must be 1, got {}", r.beta1)));
        }
        SdiWeights::new(r.beta2, r.beta3, r.beta4, r.beta5)
    }
}

impl From<SdiWeights> for RawWeights {
    fn from(w: SdiWeights) -> Self {
        Self {
            beta1: 1.0,
            beta2: w.beta2,
            beta3: w.beta3,
            beta4: w.beta4,
            beta5: w.beta5,
        }
    }
}

impl Default for SdiWeights {
    fn default() -> Self {
        Self {
            beta2: 0.25,
            beta3: 0.45,
            beta4: 0.3,
            beta5: 0.2,
        }
    }
}

impl SdiWeights {
    /// `beta2 + beta3 + beta4` must equal 1 (within 1e-12); all weights in [0, 1].
    pub fn new(beta2: f64, beta3: f64, beta4: f64, beta5: f64) -> Result<Self> {
        for (name, b) in [("beta2", beta2), ("beta3", beta3), ("beta4", beta4), ("beta5", beta5)] {
            if !b.is_finite() || !(0.0..=1.0).contains(&b) {
                return Err(Error::config(format!("weights.{name}"), format!("{b} is outside [0, 1]")));
            }
        }
        let sum = beta2 + beta3 + beta4;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "weights",
                format!("beta2 + beta3 + beta4 must equal 1, got {sum}"),
            ));
        }
        Ok(Self {
            beta2,
            beta3,
            beta4,
            beta5,
        })
    }

    pub fn beta1(&self) -> f64 {
        1.0
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn beta3(&self) -> f64 {
        self.beta3
    }

    pub fn beta4(&self) -> f64 {
        self.beta4
    }

    pub fn beta5(&self) -> f64 {
        self.beta5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdiInputs {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
}

impl SdiInputs {
    pub fn as_array(&self) -> [f64; 5] {
        [self.x1, self.x2, self.x3, self.x4, self.x5]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            x1: a[0],
            x2: a[1],
            x3: a[2],
            x4: a[3],
            x5: a[4],
        }
    }
}

/// Percent reduction from `benchmark` to `today`, clamped to [0, 100].
/// A zero benchmark carries no signal and yields 0.
pub fn pct_reduction(benchmark: f64, today: f64) -> f64 {
    if benchmark <= 0.0 {
        return 0.0;
    }
    (100.0 * (benchmark - today) / benchmark).clamp(0.0, 100.0)
}

pub fn compute_sdi(x: &SdiInputs, w: &SdiWeights) -> f64 {
    let travellers = w.beta2 * x.x2 + w.beta3 * x.x3 + w.beta4 * x.x4;
    (w.beta1() * x.x1 + 0.01 * (100.0 - x.x1) * travellers) * (1.0 - w.beta5) + w.beta5 * x.x5
}

/// Inclusive benchmark date window; only its weekdays contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for BenchmarkWindow {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2020, 2, 14).expect("valid date"),
        }
    }
}

impl BenchmarkWindow {
    pub fn weekdays(&self) -> Vec<NaiveDate> {
        time::dates(self.start, self.end).filter(|d| time::is_weekday(*d)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub geo_id: String,
    pub values: MetricValues,
    pub source_dates: Vec<NaiveDate>,
}

/// Mean of each metric over the window's weekdays that have data.
pub fn compute_benchmark(geo_id: &str, series: &[DailyMetrics], window: &BenchmarkWindow) -> Result<Benchmark> {
    let weekdays = window.weekdays();
    let mut used: Vec<(NaiveDate, MetricValues)> = series
        .iter()
        .filter(|m| m.geo_id == geo_id && weekdays.contains(&m.date))
        .filter_map(|m| m.values.map(|v| (m.date, v)))
        .collect();
    used.sort_by_key(|(d, _)| *d);
    used.dedup_by_key(|(d, _)| *d);
    if used.is_empty() {
        return Err(Error::BenchmarkUnavailable(geo_id.to_owned()));
    }
    let mut sums = [0.0; 5];
    for (_, v) in &used {
        for (s, x) in sums.iter_mut().zip(v.as_array()) {
            *s += x;
        }
    }
    let n = used.len() as f64;
    Ok(Benchmark {
        geo_id: geo_id.to_owned(),
        values: MetricValues::from_array(sums.map(|s| s / n)),
        source_dates: used.into_iter().map(|(d, _)| d).collect(),
    })
}

pub fn compute_inputs(today: &DailyMetrics, bench: &Benchmark) -> Result<SdiInputs> {
    let t = today.values.ok_or_else(|| Error::InputUnavailable {
        geo_id: today.geo_id.clone(),
        date: today.date,
    })?;
    let b = bench.values;
    Ok(SdiInputs {
        x1: (t.pct_staying_home - b.pct_staying_home).clamp(0.0, 100.0),
        x2: pct_reduction(b.work_trips_pp, t.work_trips_pp),
        x3: pct_reduction(b.nonwork_trips_pp, t.nonwork_trips_pp),
        x4: pct_reduction(b.km_pp, t.km_pp),
        x5: pct_reduction(b.out_of_county_trips, t.out_of_county_trips),
    })
}

/// One geography-day; `inputs`/`sdi` are `None` on no-data days.
#[derive(Debug, Clone, PartialEq)]
pub struct SdiRecord {
    pub geo_id: String,
    pub level: Level,
    pub date: NaiveDate,
    pub inputs: Option<SdiInputs>,
    pub sdi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdiSeries {
    pub records: Vec<SdiRecord>,
    pub benchmarks: Vec<Benchmark>,
    /// Geographies without any benchmark data.
    pub skipped: Vec<String>,
}

/// Scores every geography-day after the benchmark window, ordered by `(geo_id, date)`.
pub fn sdi_timeseries(metrics: &[DailyMetrics], weights: &SdiWeights, window: &BenchmarkWindow) -> SdiSeries {
    let mut by_geo: BTreeMap<&str, Vec<&DailyMetrics>> = BTreeMap::new();
    for m in metrics {
        by_geo.entry(&m.geo_id).or_default().push(m);
    }
    let mut out = SdiSeries::default();
    for (geo_id, mut rows) in by_geo {
        rows.sort_by_key(|m| m.date);
        let owned: Vec<DailyMetrics> = rows.iter().map(|m| (*m).clone()).collect();
        let bench = match compute_benchmark(geo_id, &owned, window) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{e}; excluded from SDI output");
                out.skipped.push(geo_id.to_owned());
                continue;
            }
        };
        for m in rows.iter().filter(|m| m.date > window.end) {
            let inputs = compute_inputs(m, &bench).ok();
            out.records.push(SdiRecord {
                geo_id: geo_id.to_owned(),
                level: m.level,
                date: m.date,
                sdi: inputs.map(|x| compute_sdi(&x, weights)),
                inputs,
            });
        }
        out.benchmarks.push(bench);
    }
    out
}

pub const SDI_HEADER: [&str; 9] = ["geo_id", "level", "date", "x1", "x2", "x3", "x4", "x5", "sdi"];

/// Machine output: full precision, empty fields on no-data days.
pub fn write_sdi_csv<'a>(w: impl Write, rows: impl IntoIterator<Item = &'a SdiRecord>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SDI_HEADER)?;
    for r in rows {
        let mut rec = vec![r.geo_id.clone(), r.level.to_string(), r.date.to_string()];
        match (&r.inputs, r.sdi) {
            (Some(x), Some(s)) => {
                rec.extend(x.as_array().iter().map(f64::to_string));
                rec.push(s.to_string());
            }
            _ => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sdi_csv(r: impl Read) -> Result<Vec<SdiRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().collect::<Vec<_>>() != SDI_HEADER {
        return Err(Error::Argument("sdi.csv header mismatch".into()));
    }
    let bad = |i: usize, what: &str| Error::Argument(format!("sdi.csv record {i}: bad {what}"));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date: NaiveDate = rec[2].parse().map_err(|_| bad(i, "date"))?;
        let (inputs, sdi) = if rec[8].is_empty() {
            (None, None)
        } else {
            let mut a = [0.0; 5];
            for (k, slot) in a.iter_mut().enumerate() {
                *slot = rec[3 + k].parse().map_err(|_| bad(i, "input"))?;
            }
            (Some(SdiInputs::from_array(a)), Some(rec[8].parse().map_err(|_| bad(i, "sdi"))?))
        };
        out.push(SdiRecord {
            geo_id: rec[0].to_owned(),
            level: rec[1].parse()?,
            date,
            inputs,
            sdi,
        });
    }
    Ok(out)
}
