//! Report artifacts: SDI heatmap, case rankings, weekly deltas and SVG charts.
//!
//! All output is a deterministic function of the inputs, so reruns are
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};

use crate::cases::{join_and_rate, rank_geos, weekly_delta, CaseTable, JoinedRow, Ranking, WeeklyDelta};
use crate::config::ReportConfig;
use crate::error::{Error, Result};
use crate::geodata::{GeographyHierarchy, Level};
use crate::sdi::SdiRecord;

/// SDI by geo (rows) and date (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub dates: Vec<NaiveDate>,
    /// Sorted by SDI on the last date, descending; missing values sink, ties by id.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

pub fn heatmap(records: &[SdiRecord], level: Level) -> Heatmap {
    let at_level = || records.iter().filter(|r| r.level == level);
    let dates: Vec<NaiveDate> = at_level().map(|r| r.date).collect::<BTreeSet<_>>().into_iter().collect();
    let col: BTreeMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut grid: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for r in at_level() {
        grid.entry(&r.geo_id).or_insert_with(|| vec![None; dates.len()])[col[&r.date]] = r.sdi;
    }
    let mut rows: Vec<(String, Vec<Option<f64>>)> = grid.into_iter().map(|(g, v)| (g.to_owned(), v)).collect();
    let last = |v: &[Option<f64>]| v.last().copied().flatten();
    rows.sort_by(|(ga, a), (gb, b)| match (last(a), last(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| ga.cmp(gb)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ga.cmp(gb),
    });
    Heatmap { dates, rows }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

pub fn write_heatmap_csv(w: impl Write, h: &Heatmap) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = std::iter::once("geo_id".to_owned()).chain(h.dates.iter().map(|d| d.to_string()));
    out.write_record(header)?;
    for (geo, values) in &h.rows {
        out.write_record(std::iter::once(geo.clone()).chain(values.iter().map(|v| cell(*v))))?;
    }
    out.flush()?;
    Ok(())
}

pub const RANKINGS_HEADER: [&str; 7] = ["date", "key", "side", "rank", "geo_id", "value", "sdi"];

pub fn write_rankings_csv(w: impl Write, r: &Ranking) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RANKINGS_HEADER)?;
    for (side, list) in [("top", &r.top), ("bottom", &r.bottom)] {
        for (i, g) in list.iter().enumerate() {
            out.write_record([
                r.date.to_string(),
                r.key.as_str().to_owned(),
                side.to_owned(),
                (i + 1).to_string(),
                g.geo_id.clone(),
                format!("{:.4}", g.value),
                cell(g.sdi),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Week-over-week changes for every geo, ending on the last date and stepping
/// back seven days at a time. Pairs with a missing endpoint are skipped.
pub fn weekly_deltas(records: &[SdiRecord], level: Level) -> Vec<WeeklyDelta> {
    let at_level: Vec<SdiRecord> = records.iter().filter(|r| r.level == level).cloned().collect();
    let (Some(first), Some(last)) = (at_level.iter().map(|r| r.date).min(), at_level.iter().map(|r| r.date).max())
    else {
        return Vec::new();
    };
    let geos: BTreeSet<&str> = at_level.iter().map(|r| r.geo_id.as_str()).collect();
    let mut out = Vec::new();
    for geo in geos {
        let mut end = last;
        while end - Duration::days(7) >= first {
            match weekly_delta(&at_level, geo, end) {
                Ok(d) => out.push(d),
                Err(e) => log::debug!("{e}"),
            }
            end -= Duration::days(7);
        }
    }
    out
}

pub const DELTAS_HEADER: [&str; 5] = ["geo_id", "start", "end", "delta", "delta_rounded"];

pub fn write_deltas_csv(w: impl Write, deltas: &[WeeklyDelta]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DELTAS_HEADER)?;
    for d in deltas {
        out.write_record([
            d.geo_id.clone(),
            d.start.to_string(),
            d.end.to_string(),
            format!("{:.2}", d.raw),
            d.rounded.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Line chart of one geo's SDI on a fixed 0..100 axis; gaps break the line.
pub fn svg_line_chart(geo_id: &str, dates: &[NaiveDate], values: &[Option<f64>]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 240.0;
    const PAD: f64 = 32.0;
    let span = (dates.len().max(2) - 1) as f64;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / span;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * v.clamp(0.0, 100.0) / 100.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for tick in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let ty = y(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#ddd"/><text x="4" y="{:.1}" font-size="10">{tick}</text>"##,
            W - PAD,
            ty + 3.0
        );
    }
    let mut runs: Vec<Vec<String>> = vec![Vec::new()];
    for (i, v) in values.iter().enumerate() {
        match v {
            Some(v) => runs.last_mut().expect("non-empty").push(format!("{:.1},{:.1}", x(i), y(*v))),
            None if !runs.last().expect("non-empty").is_empty() => runs.push(Vec::new()),
            None => {}
        }
    }
    for run in runs.iter().filter(|r| !r.is_empty()) {
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
            run.join(" ")
        );
    }
    let label = |d: Option<&NaiveDate>| d.map(ToString::to_string).unwrap_or_default();
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{:.1}" font-size="10">{}</text><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
        H - 8.0,
        label(dates.first()),
        W - PAD,
        H - 8.0,
        label(dates.last())
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="16" font-size="12">SDI {geo_id}</text>"#);
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub heatmap: Heatmap,
    pub joined: Vec<JoinedRow>,
    pub ranking: Ranking,
    pub deltas: Vec<WeeklyDelta>,
}

/// Builds every report table at `cfg.level`. SDI and case files that share no
/// date at that level are an alignment error.
pub fn build_report(sdi: &[SdiRecord], cases: &CaseTable, geo: &GeographyHierarchy, cfg: &ReportConfig) -> Result<Report> {
    let at_level: Vec<SdiRecord> = sdi.iter().filter(|r| r.level == cfg.level).cloned().collect();
    if at_level.is_empty() {
        return Err(Error::Alignment(format!("SDI series has no {} rows", cfg.level)));
    }
    let joined = join_and_rate(&at_level, cases, geo)?;
    let Some(latest) = joined.iter().map(|r| r.date).max() else {
        return Err(Error::Alignment(format!(
            "no {} date appears in both the SDI series and the case file",
            cfg.level
        )));
    };
    let date = cfg.date.unwrap_or(latest);
    if !joined.iter().any(|r| r.date == date) {
        return Err(Error::Alignment(format!("report date {date} is missing from the SDI or case data")));
    }
    Ok(Report {
        heatmap: heatmap(&at_level, cfg.level),
        ranking: rank_geos(&joined, date, cfg.key, cfg.k)?,
        deltas: weekly_deltas(&at_level, cfg.level),
        joined,
    })
}

fn create(path: PathBuf) -> Result<(std::io::BufWriter<std::fs::File>, PathBuf)> {
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((std::io::BufWriter::new(f), path))
}

/// Writes heatmap.csv, rankings.csv, deltas.csv and optionally `charts/<geo>.svg`.
pub fn write_report(report: &Report, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let (w, p) = create(dir.join("heatmap.csv"))?;
    write_heatmap_csv(w, &report.heatmap)?;
    written.push(p);
    let (w, p) = create(dir.join("rankings.csv"))?;
    write_rankings_csv(w, &report.ranking)?;
    written.push(p);
    let (w, p) = create(dir.join("deltas.csv"))?;
    write_deltas_csv(w, &report.deltas)?;
    written.push(p);
    if svg {
        let charts = dir.join("charts");
        std::fs::create_dir_all(&charts).map_err(|e| Error::io(&charts, e))?;
        for (geo, values) in &report.heatmap.rows {
            let path = charts.join(format!("{geo}.svg"));
            std::fs::write(&path, svg_line_chart(geo, &report.heatmap.dates, values)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
