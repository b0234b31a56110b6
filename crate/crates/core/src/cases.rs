//! Confirmed-case ingestion, the SDI/case join, rankings and weekly deltas.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodata::{GeographyHierarchy, Level};
use crate::sdi::SdiRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseRecord {
    pub geo_id: String,
    pub date: NaiveDate,
    pub cumulative_confirmed: u64,
    /// Cumulative count fell relative to the previous record of this geo.
    pub non_monotone: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CaseParseReport {
    pub rows: u64,
    pub accepted: u64,
    pub malformed: u64,
    pub negative: u64,
    pub unknown_geo: u64,
    pub duplicate: u64,
    pub monotonic_violations: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseTable {
    /// Sorted by `(geo_id, date)`.
    pub records: Vec<CaseRecord>,
    pub report: CaseParseReport,
}

#[derive(Deserialize)]
struct RawCase {
    date: String,
    geo_id: String,
    cumulative_confirmed: String,
}

/// Reads `date,geo_id,cumulative_confirmed` rows. Bad rows are counted and
/// skipped; a decreasing cumulative series is flagged but kept.
pub fn parse_cases(r: impl Read, geo: &GeographyHierarchy) -> Result<CaseTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != ["date", "geo_id", "cumulative_confirmed"] {
        return Err(Error::Argument(format!(
            "cases header must be date,geo_id,cumulative_confirmed, got {}",
            header.join(",")
        )));
    }
    let mut report = CaseParseReport::default();
    let mut by_key: BTreeMap<(String, NaiveDate), u64> = BTreeMap::new();
    for rec in rdr.deserialize::<RawCase>() {
        report.rows += 1;
        let Ok(raw) = rec else {
            report.malformed += 1;
            continue;
        };
        let Ok(date) = raw.date.parse::<NaiveDate>() else {
            report.malformed += 1;
            continue;
        };
        let count = match raw.cumulative_confirmed.parse::<i64>() {
            Ok(c) if c < 0 => {
                report.negative += 1;
                continue;
            }
            Ok(c) => c as u64,
            Err(_) => {
                report.malformed += 1;
                continue;
            }
        };
        if geo.zone(&raw.geo_id).is_none() {
            log::warn!("cases: unknown geo_id `{}` skipped", raw.geo_id);
            report.unknown_geo += 1;
            continue;
        }
        if by_key.insert((raw.geo_id, date), count).is_some() {
            report.duplicate += 1;
        }
    }
    let mut records = Vec::with_capacity(by_key.len());
    let mut prev: Option<(String, u64)> = None;
    for ((geo_id, date), cum) in by_key {
        let non_monotone = matches!(&prev, Some((g, c)) if *g == geo_id && cum < *c);
        report.monotonic_violations += u64::from(non_monotone);
        prev = Some((geo_id.clone(), cum));
        records.push(CaseRecord {
            geo_id,
            date,
            cumulative_confirmed: cum,
            non_monotone,
        });
    }
    report.accepted = records.len() as u64;
    Ok(CaseTable { records, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRow {
    pub geo_id: String,
    pub level: Level,
    pub date: NaiveDate,
    pub sdi: Option<f64>,
    pub cumulative_confirmed: u64,
    /// `None` when the geography has zero population.
    pub cases_per_thousand: Option<f64>,
    /// Change from the previous case record; `None` on a geo's first record.
    pub daily_new: Option<i64>,
    pub non_monotone: bool,
}

/// Inner join on `(geo_id, date)`, ordered by `(geo_id, date)`.
pub fn join_and_rate(sdi: &[SdiRecord], cases: &CaseTable, geo: &GeographyHierarchy) -> Result<Vec<JoinedRow>> {
    let mut case_idx: HashMap<(&str, NaiveDate), (u64, Option<i64>, bool)> = HashMap::new();
    for (i, c) in cases.records.iter().enumerate() {
        let prev = i
            .checked_sub(1)
            .map(|j| &cases.records[j])
            .filter(|p| p.geo_id == c.geo_id);
        let daily = prev.map(|p| c.cumulative_confirmed as i64 - p.cumulative_confirmed as i64);
        case_idx.insert((&c.geo_id, c.date), (c.cumulative_confirmed, daily, c.non_monotone));
    }
    let mut warned = std::collections::BTreeSet::new();
    let mut rows = Vec::new();
    for r in sdi {
        let Some(&(cum, daily_new, non_monotone)) = case_idx.get(&(r.geo_id.as_str(), r.date)) else {
            if !cases.records.iter().any(|c| c.geo_id == r.geo_id) && warned.insert(r.geo_id.clone()) {
                log::warn!("no case data for `{}`; left out of the join", r.geo_id);
            }
            continue;
        };
        let pop = geo.population(&r.geo_id)?;
        rows.push(JoinedRow {
            geo_id: r.geo_id.clone(),
            level: r.level,
            date: r.date,
            sdi: r.sdi,
            cumulative_confirmed: cum,
            cases_per_thousand: (pop > 0).then(|| cum as f64 * 1000.0 / pop as f64),
            daily_new,
            non_monotone,
        });
    }
    rows.sort_by(|a, b| (&a.geo_id, a.date).cmp(&(&b.geo_id, b.date)));
    Ok(rows)
}

pub const JOINED_HEADER: [&str; 8] = [
    "geo_id",
    "level",
    "date",
    "sdi",
    "cumulative_confirmed",
    "cases_per_thousand",
    "daily_new",
    "non_monotone",
];

pub fn write_joined_csv(w: impl Write, rows: &[JoinedRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(JOINED_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        out.write_record([
            r.geo_id.clone(),
            r.level.to_string(),
            r.date.to_string(),
            opt(r.sdi.map(|v| v.to_string())),
            r.cumulative_confirmed.to_string(),
            opt(r.cases_per_thousand.map(|v| v.to_string())),
            opt(r.daily_new.map(|v| v.to_string())),
            r.non_monotone.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    #[default]
    Cumulative,
    PerThousand,
}

impl RankKey {
    pub fn as_str(self) -> &'static str {
        match self {
            RankKey::Cumulative => "cumulative",
            RankKey::PerThousand => "per_thousand",
        }
    }

    fn value(self, r: &JoinedRow) -> Option<f64> {
        match self {
            RankKey::Cumulative => Some(r.cumulative_confirmed as f64),
            RankKey::PerThousand => r.cases_per_thousand,
        }
    }
}

impl std::str::FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(RankKey::Cumulative),
            "per_thousand" => Ok(RankKey::PerThousand),
            other => Err(Error::Argument(format!("unknown rank key `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedGeo {
    pub geo_id: String,
    pub value: f64,
    pub sdi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub date: NaiveDate,
    pub key: RankKey,
    /// Highest first.
    pub top: Vec<RankedGeo>,
    /// Lowest first.
    pub bottom: Vec<RankedGeo>,
}

/// Ranks the geos present on `date` by value descending, ties to the smaller
/// id. The bottom list is the tail of that same order reversed, so the two
/// lists never share a geo while `2k <= n`.
pub fn rank_geos(joined: &[JoinedRow], date: NaiveDate, key: RankKey, k: usize) -> Result<Ranking> {
    let mut day: Vec<RankedGeo> = joined
        .iter()
        .filter(|r| r.date == date)
        .filter_map(|r| {
            key.value(r).map(|value| RankedGeo {
                geo_id: r.geo_id.clone(),
                value,
                sdi: r.sdi,
            })
        })
        .collect();
    if day.is_empty() {
        return Err(Error::Argument(format!("no ranked rows on {date}")));
    }
    day.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.geo_id.cmp(&b.geo_id)));
    if k > day.len() {
        log::warn!("k = {k} exceeds the {} ranked geos on {date}; returning all", day.len());
    }
    let k = k.min(day.len());
    let top = day[..k].to_vec();
    let bottom = day[day.len() - k..].iter().rev().cloned().collect();
    Ok(Ranking { date, key, top, bottom })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyDelta {
    pub geo_id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub raw: f64,
    /// `raw` rounded half to even.
    pub rounded: i64,
}

pub fn weekly_delta(series: &[SdiRecord], geo_id: &str, end: NaiveDate) -> Result<WeeklyDelta> {
    let start = end - Duration::days(7);
    let at = |d: NaiveDate| {
        series
            .iter()
            .find(|r| r.geo_id == geo_id && r.date == d)
            .and_then(|r| r.sdi)
    };
    let (Some(a), Some(b)) = (at(start), at(end)) else {
        return Err(Error::DeltaUnavailable {
            geo_id: geo_id.to_owned(),
            end,
        });
    };
    let raw = b - a;
    Ok(WeeklyDelta {
        geo_id: geo_id.to_owned(),
        start,
        end,
        raw,
        rounded: raw.round_ties_even() as i64,
    })
}
