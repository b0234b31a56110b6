//! Ping parsing and cleaning.
//!
//! Input is NDJSON (`{"d": id, "t": epoch_s, "lat": .., "lon": .., "acc": ..}`) or CSV
//! with header `d,t,lat,lon,acc`. The format is sniffed from the first non-blank byte.
//! Malformed lines are counted and skipped; only stream I/O failures abort.
//!
//! Cleaning screens, applied per device in timestamp order:
//! study window, reported accuracy, geography coverage, repeated timestamps, and
//! implied speed against the previous accepted ping. A speed violation always drops
//! the later ping.

use std::io::BufRead;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geodata::{haversine_km, GeoPoint, GeographyHierarchy};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PingRecord {
    pub device_id: String,
    pub timestamp: i64,
    pub point: GeoPoint,
    pub accuracy_m: Option<f64>,
}

impl PingRecord {
    pub fn fix(&self) -> Fix {
        Fix {
            timestamp: self.timestamp,
            point: self.point,
            accuracy_m: self.accuracy_m,
        }
    }

    fn sort_key(&self) -> (&str, i64, u64, u64, u64) {
        (
            &self.device_id,
            self.timestamp,
            self.point.lat.to_bits(),
            self.point.lon.to_bits(),
            self.accuracy_m.map_or(u64::MAX, f64::to_bits),
        )
    }

    /// One NDJSON line, without the trailing newline.
    pub fn to_ndjson(&self) -> String {
        self.fix().to_ndjson(&self.device_id)
    }
}

/// A ping without its device id, used once records are grouped per device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    pub timestamp: i64,
    pub point: GeoPoint,
    pub accuracy_m: Option<f64>,
}

impl Fix {
    pub fn to_ndjson(&self, device_id: &str) -> String {
        let id = serde_json::to_string(device_id).expect("string serializes");
        match self.accuracy_m {
            Some(acc) => format!(
                "{{\"d\":{id},\"t\":{},\"lat\":{},\"lon\":{},\"acc\":{acc}}}",
                self.timestamp, self.point.lat, self.point.lon
            ),
            None => format!(
                "{{\"d\":{id},\"t\":{},\"lat\":{},\"lon\":{}}}",
                self.timestamp, self.point.lat, self.point.lon
            ),
        }
    }
}

/// All pings of one device, ascending by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrace {
    pub device_id: String,
    pub fixes: Vec<Fix>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub total: u64,
    pub accepted: u64,
    pub parse_error: u64,
    pub duplicate: u64,
    pub out_of_window: u64,
    pub low_accuracy: u64,
    pub speed_violation: u64,
    pub out_of_coverage: u64,
}

impl CleaningReport {
    pub fn rejected(&self) -> u64 {
        self.parse_error
            + self.duplicate
            + self.out_of_window
            + self.low_accuracy
            + self.speed_violation
            + self.out_of_coverage
    }

    /// `accepted + rejected == total`.
    pub fn is_balanced(&self) -> bool {
        self.accepted + self.rejected() == self.total
    }

    /// Chains a later stage whose input was this stage's accepted output.
    pub fn then(&self, next: &CleaningReport) -> CleaningReport {
        debug_assert_eq!(self.accepted, next.total);
        CleaningReport {
            total: self.total,
            accepted: next.accepted,
            parse_error: self.parse_error + next.parse_error,
            duplicate: self.duplicate + next.duplicate,
            out_of_window: self.out_of_window + next.out_of_window,
            low_accuracy: self.low_accuracy + next.low_accuracy,
            speed_violation: self.speed_violation + next.speed_violation,
            out_of_coverage: self.out_of_coverage + next.out_of_coverage,
        }
    }
}

impl AddAssign<&CleaningReport> for CleaningReport {
    fn add_assign(&mut self, o: &CleaningReport) {
        self.total += o.total;
        self.accepted += o.accepted;
        self.parse_error += o.parse_error;
        self.duplicate += o.duplicate;
        self.out_of_window += o.out_of_window;
        self.low_accuracy += o.low_accuracy;
        self.speed_violation += o.speed_violation;
        self.out_of_coverage += o.out_of_coverage;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub max_speed_kmh: f64,
    pub max_accuracy_m: f64,
    /// Half-open `[start, end)` epoch-second window; `None` accepts any time.
    #[serde(skip)]
    pub window_s: Option<(i64, i64)>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            max_speed_kmh: 240.0,
            max_accuracy_m: 100.0,
            window_s: None,
        }
    }
}

#[derive(Deserialize)]
struct RawPing {
    d: String,
    t: i64,
    lat: f64,
    lon: f64,
    #[serde(default)]
    acc: Option<f64>,
}

fn validate(raw: RawPing) -> Option<PingRecord> {
    if raw.d.is_empty() {
        return None;
    }
    let point = GeoPoint::new(raw.lat, raw.lon).ok()?;
    if let Some(a) = raw.acc {
        if !a.is_finite() || a < 0.0 {
            return None;
        }
    }
    Some(PingRecord {
        device_id: raw.d,
        timestamp: raw.t,
        point,
        accuracy_m: raw.acc,
    })
}

/// Parses a ping stream and returns records sorted by `(device_id, timestamp)`
/// with exact duplicates removed.
pub fn parse_pings(mut reader: impl BufRead) -> Result<(Vec<PingRecord>, CleaningReport)> {
    let mut report = CleaningReport::default();
    let mut records = Vec::new();
    let first = loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            break None;
        }
        match buf.iter().position(|b| !b.is_ascii_whitespace()) {
            Some(i) => break Some(buf[i]),
            None => {
                let n = buf.len();
                reader.consume(n);
            }
        }
    };
    match first {
        None => {}
        Some(b'{') => parse_ndjson(reader, &mut records, &mut report)?,
        Some(_) => parse_csv(reader, &mut records, &mut report)?,
    }
    let before = records.len();
    let records = sort_dedup(records);
    report.duplicate += (before - records.len()) as u64;
    report.accepted = records.len() as u64;
    debug_assert!(report.is_balanced());
    Ok((records, report))
}

fn parse_ndjson(mut reader: impl BufRead, out: &mut Vec<PingRecord>, report: &mut CleaningReport) -> Result<()> {
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        report.total += 1;
        match serde_json::from_slice::<RawPing>(&line).ok().and_then(validate) {
            Some(rec) => out.push(rec),
            None => report.parse_error += 1,
        }
    }
}

fn parse_csv(reader: impl BufRead, out: &mut Vec<PingRecord>, report: &mut CleaningReport) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(d), Some(t), Some(lat), Some(lon)) = (col("d"), col("t"), col("lat"), col("lon")) else {
        return Err(Error::Argument(format!(
            "CSV ping header must contain d,t,lat,lon; found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    };
    let acc = col("acc");
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                report.total += 1;
                report.parse_error += 1;
                continue;
            }
        };
        if rec.iter().all(str::is_empty) {
            continue;
        }
        report.total += 1;
        let parsed = (|| {
            let acc = match acc.and_then(|i| rec.get(i)) {
                None | Some("") => None,
                Some(s) => Some(s.parse().ok()?),
            };
            validate(RawPing {
                d: rec.get(d)?.to_owned(),
                t: rec.get(t)?.parse().ok()?,
                lat: rec.get(lat)?.parse().ok()?,
                lon: rec.get(lon)?.parse().ok()?,
                acc,
            })
        })();
        match parsed {
            Some(r) => out.push(r),
            None => report.parse_error += 1,
        }
    }
    Ok(())
}

/// Sorts by `(device_id, timestamp)` with a total tie-break and drops exact duplicates.
pub fn sort_dedup(mut records: Vec<PingRecord>) -> Vec<PingRecord> {
    records.sort_unstable_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    records.dedup_by(|a, b| a.sort_key() == b.sort_key());
    records
}

/// Groups sorted records into per-device traces.
pub fn group_traces(records: Vec<PingRecord>) -> Vec<DeviceTrace> {
    let mut traces: Vec<DeviceTrace> = Vec::new();
    for r in records {
        let fix = r.fix();
        match traces.last_mut() {
            Some(tr) if tr.device_id == r.device_id => tr.fixes.push(fix),
            _ => traces.push(DeviceTrace {
                device_id: r.device_id,
                fixes: vec![fix],
            }),
        }
    }
    traces
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    OutOfWindow,
    LowAccuracy,
    OutOfCoverage,
    Duplicate,
    SpeedViolation,
}

/// Per-device screening state; feed fixes in timestamp order.
#[derive(Debug, Clone)]
pub struct DeviceCleaner<'g> {
    config: CleaningConfig,
    geo: &'g GeographyHierarchy,
    last: Option<Fix>,
}

impl<'g> DeviceCleaner<'g> {
    pub fn new(config: CleaningConfig, geo: &'g GeographyHierarchy) -> Self {
        Self { config, geo, last: None }
    }

    pub fn screen(&mut self, fix: &Fix) -> Result<Verdict> {
        if let Some(prev) = &self.last {
            if fix.timestamp < prev.timestamp {
                return Err(Error::Contract(format!(
                    "pings out of order: {} after {}",
                    fix.timestamp, prev.timestamp
                )));
            }
        }
        let verdict = self.verdict(fix);
        if verdict == Verdict::Accepted {
            self.last = Some(*fix);
        }
        Ok(verdict)
    }

    fn verdict(&self, fix: &Fix) -> Verdict {
        if let Some((start, end)) = self.config.window_s {
            if fix.timestamp < start || fix.timestamp >= end {
                return Verdict::OutOfWindow;
            }
        }
        if fix.accuracy_m.is_some_and(|a| a > self.config.max_accuracy_m) {
            return Verdict::LowAccuracy;
        }
        if !self.geo.covers(fix.point) {
            return Verdict::OutOfCoverage;
        }
        if let Some(prev) = &self.last {
            let dt = fix.timestamp - prev.timestamp;
            if dt == 0 {
                return Verdict::Duplicate;
            }
            let kmh = haversine_km(prev.point, fix.point) / (dt as f64 / 3600.0);
            if kmh > self.config.max_speed_kmh {
                return Verdict::SpeedViolation;
            }
        }
        Verdict::Accepted
    }
}

fn tally(report: &mut CleaningReport, v: Verdict) {
    report.total += 1;
    match v {
        Verdict::Accepted => report.accepted += 1,
        Verdict::OutOfWindow => report.out_of_window += 1,
        Verdict::LowAccuracy => report.low_accuracy += 1,
        Verdict::OutOfCoverage => report.out_of_coverage += 1,
        Verdict::Duplicate => report.duplicate += 1,
        Verdict::SpeedViolation => report.speed_violation += 1,
    }
}

/// Cleans one device's fixes (sorted by timestamp).
pub fn clean_fixes(
    fixes: &[Fix],
    config: &CleaningConfig,
    geo: &GeographyHierarchy,
) -> Result<(Vec<Fix>, CleaningReport)> {
    let mut cleaner = DeviceCleaner::new(*config, geo);
    let mut report = CleaningReport::default();
    let mut out = Vec::with_capacity(fixes.len());
    for f in fixes {
        let v = cleaner.screen(f)?;
        tally(&mut report, v);
        if v == Verdict::Accepted {
            out.push(*f);
        }
    }
    Ok((out, report))
}

/// Cleans every trace, in parallel when enabled. Output order matches input order.
pub fn clean_traces(
    traces: Vec<DeviceTrace>,
    config: &CleaningConfig,
    geo: &GeographyHierarchy,
) -> Result<(Vec<DeviceTrace>, CleaningReport)> {
    let cleaned = exec::map_owned(traces, |tr| {
        clean_fixes(&tr.fixes, config, geo).map(|(fixes, rep)| {
            (
                DeviceTrace {
                    device_id: tr.device_id,
                    fixes,
                },
                rep,
            )
        })
    });
    let mut report = CleaningReport::default();
    let mut out = Vec::with_capacity(cleaned.len());
    for c in cleaned {
        let (tr, rep) = c?;
        report += &rep;
        if !tr.fixes.is_empty() {
            out.push(tr);
        }
    }
    Ok((out, report))
}

/// Cleans records sorted by `(device_id, timestamp)`.
pub fn clean_pings(
    records: &[PingRecord],
    config: &CleaningConfig,
    geo: &GeographyHierarchy,
) -> Result<(Vec<PingRecord>, CleaningReport)> {
    if let Some(w) = records
        .windows(2)
        .find(|w| (&w[0].device_id, w[0].timestamp) > (&w[1].device_id, w[1].timestamp))
    {
        return Err(Error::Contract(format!(
            "input not sorted by (device_id, timestamp): ({}, {}) precedes ({}, {})",
            w[0].device_id, w[0].timestamp, w[1].device_id, w[1].timestamp
        )));
    }
    let mut stream = StreamCleaner::new(*config, geo);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if let Some(r) = stream.push(r.clone())? {
            out.push(r);
        }
    }
    Ok((out, stream.report()))
}

/// Cleans a record stream that arrives in arbitrary chunks, carrying per-device
/// state across chunk boundaries.
pub struct StreamCleaner<'g> {
    config: CleaningConfig,
    geo: &'g GeographyHierarchy,
    current: Option<(String, DeviceCleaner<'g>)>,
    report: CleaningReport,
}

impl<'g> StreamCleaner<'g> {
    pub fn new(config: CleaningConfig, geo: &'g GeographyHierarchy) -> Self {
        Self {
            config,
            geo,
            current: None,
            report: CleaningReport::default(),
        }
    }

    pub fn push(&mut self, rec: PingRecord) -> Result<Option<PingRecord>> {
        let same = matches!(&self.current, Some((id, _)) if *id == rec.device_id);
        if !same {
            if let Some((id, _)) = &self.current {
                if rec.device_id < *id {
                    return Err(Error::Contract(format!(
                        "device `{}` arrives after `{id}`",
                        rec.device_id
                    )));
                }
            }
            self.current = Some((rec.device_id.clone(), DeviceCleaner::new(self.config, self.geo)));
        }
        let (_, cleaner) = self.current.as_mut().expect("set above");
        let v = cleaner.screen(&rec.fix())?;
        tally(&mut self.report, v);
        Ok((v == Verdict::Accepted).then_some(rec))
    }

    pub fn report(&self) -> CleaningReport {
        self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{Level, Ring, Zone};

    pub(crate) fn square_geo() -> GeographyHierarchy {
        let z = |id: &str, level, parent: Option<&str>| Zone {
            zone_id: id.into(),
            level,
            parent_id: parent.map(Into::into),
            polygon: Ring::rectangle(38.0, -78.0, 40.0, -76.0).unwrap(),
            population: 10,
        };
        GeographyHierarchy::new(vec![
            z("N", Level::Nation, None),
            z("S", Level::State, Some("N")),
            z("C", Level::County, Some("S")),
            z("Z", Level::Zone, Some("C")),
        ])
        .unwrap()
    }

    fn rec(d: &str, t: i64, lat: f64, lon: f64, acc: Option<f64>) -> PingRecord {
        PingRecord {
            device_id: d.into(),
            timestamp: t,
            point: GeoPoint { lat, lon },
            accuracy_m: acc,
        }
    }

    #[test]
    fn parses_ndjson() {
        let text = "{\"d\":\"b\",\"t\":20,\"lat\":39.0,\"lon\":-77.0}\n\
                    {\"d\":\"a\",\"t\":10,\"lat\":39.0,\"lon\":-77.0,\"acc\":5}\n\n\
                    {\"d\":\"a\",\"t\":5,\"lat\":39.0,\"lon\":-77.0}\n";
        let (recs, rep) = parse_pings(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(rep.rejected(), 0);
        assert_eq!(rep.total, 3);
        let order: Vec<_> = recs.iter().map(|r| (r.device_id.as_str(), r.timestamp)).collect();
        assert_eq!(order, [("a", 5), ("a", 10), ("b", 20)]);
        assert_eq!(recs[1].accuracy_m, Some(5.0));
    }

    #[test]
    fn counts_parse_errors_and_duplicates() {
        let text = "{\"d\":\"a\",\"t\":1,\"lat\":123,\"lon\":0}\n\
                    {\"d\":\"a\",\"t\":2,\"lat\":1,\"lon\":0}\n\
                    {\"d\":\"a\",\"t\":2,\"lat\":1,\"lon\":0}\n\
                    not json\n\
                    {\"d\":\"\",\"t\":2,\"lat\":1,\"lon\":0}\n";
        let (recs, rep) = parse_pings(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(rep.parse_error, 3);
        assert_eq!(rep.duplicate, 1);
        assert_eq!(rep.total, 5);
        assert!(rep.is_balanced());
    }

    #[test]
    fn parses_csv() {
        let text = "d,t,lat,lon,acc\na,1,39.0,-77.0,\na,2,39.0,-77.0,12.5\nb,x,1,1,\n";
        let (recs, rep) = parse_pings(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].accuracy_m, None);
        assert_eq!(recs[1].accuracy_m, Some(12.5));
        assert_eq!(rep.parse_error, 1);
        assert!(parse_pings("x,y\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_stream() {
        let (recs, rep) = parse_pings("\n\n".as_bytes()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(rep, CleaningReport::default());
    }

    #[test]
    fn ndjson_round_trip() {
        let r = rec("dev \"1\"", 7, 39.123456, -77.5, Some(3.0));
        let (back, _) = parse_pings(r.to_ndjson().as_bytes()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn stationary_device_retained() {
        let geo = square_geo();
        let recs: Vec<_> = (0..10).map(|i| rec("a", i * 60, 39.0, -77.0, Some(10.0))).collect();
        let (out, rep) = clean_pings(&recs, &CleaningConfig::default(), &geo).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(rep.accepted, 10);
    }

    #[test]
    fn speed_violation_drops_later_ping() {
        let geo = square_geo();
        let a = GeoPoint { lat: 39.0, lon: -77.0 };
        let b = a.offset_m(10_000.0, 0.0);
        let recs = vec![rec("a", 0, a.lat, a.lon, None), rec("a", 1, b.lat, b.lon, None)];
        let kmh = haversine_km(a, b) / (1.0 / 3600.0);
        assert!((kmh - 36_000.0).abs() < 1.0);
        let (out, rep) = clean_pings(&recs, &CleaningConfig::default(), &geo).unwrap();
        assert_eq!(out, recs[..1].to_vec());
        assert_eq!(rep.speed_violation, 1);
    }

    #[test]
    fn accuracy_window_coverage_and_repeats() {
        let geo = square_geo();
        let cfg = CleaningConfig {
            window_s: Some((0, 1000)),
            ..CleaningConfig::default()
        };
        let recs = vec![
            rec("a", -5, 39.0, -77.0, None),
            rec("a", 10, 39.0, -77.0, Some(500.0)),
            rec("a", 20, 39.0, -77.0, None),
            rec("a", 20, 39.0001, -77.0, None),
            rec("a", 30, 45.0, -77.0, None),
            rec("a", 2000, 39.0, -77.0, None),
        ];
        let (out, rep) = clean_pings(&recs, &cfg, &geo).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(rep.out_of_window, 2);
        assert_eq!(rep.low_accuracy, 1);
        assert_eq!(rep.duplicate, 1);
        assert_eq!(rep.out_of_coverage, 1);
        assert!(rep.is_balanced());
    }

    #[test]
    fn unsorted_input_is_a_contract_violation() {
        let geo = square_geo();
        let recs = vec![rec("a", 10, 39.0, -77.0, None), rec("a", 5, 39.0, -77.0, None)];
        assert!(matches!(
            clean_pings(&recs, &CleaningConfig::default(), &geo),
            Err(Error::Contract(_))
        ));
        let recs = vec![rec("b", 1, 39.0, -77.0, None), rec("a", 5, 39.0, -77.0, None)];
        assert!(clean_pings(&recs, &CleaningConfig::default(), &geo).is_err());
    }
}
