//! End-to-end run: pings → cleaned traces → device outcomes → metrics → SDI.

use std::io::BufRead;

use chrono::NaiveDate;

use crate::error::Result;
use crate::exec;
use crate::geodata::GeographyHierarchy;
use crate::ingest::{clean_fixes, clean_traces, group_traces, parse_pings, CleaningConfig, CleaningReport, DeviceTrace};
use crate::metrics::{aggregate_all, compute_device_weights, DailyMetrics, DeviceWeights};
use crate::mobility::{process_device, DeviceOutcome, MobilityConfig};
use crate::sdi::{sdi_timeseries, BenchmarkWindow, SdiSeries, SdiWeights};
use crate::time;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PipelineParams {
    pub cleaning: CleaningConfig,
    pub mobility: MobilityConfig,
    pub benchmark: BenchmarkWindow,
    pub weights: SdiWeights,
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub cleaning: CleaningReport,
    pub outcomes: Vec<DeviceOutcome>,
    pub weights: DeviceWeights,
    pub dates: Vec<NaiveDate>,
    pub metrics: Vec<DailyMetrics>,
    pub sdi: SdiSeries,
}

/// Cleans and analyses one device.
pub fn process_trace(
    trace: &DeviceTrace,
    params: &PipelineParams,
    geo: &GeographyHierarchy,
) -> Result<(DeviceOutcome, CleaningReport)> {
    let (fixes, report) = clean_fixes(&trace.fixes, &params.cleaning, geo)?;
    let clean = DeviceTrace {
        device_id: trace.device_id.clone(),
        fixes,
    };
    Ok((process_device(&clean, &params.mobility, geo), report))
}

/// Cleans all traces and analyses every device that kept at least one ping.
pub fn device_outcomes(
    traces: Vec<DeviceTrace>,
    params: &PipelineParams,
    geo: &GeographyHierarchy,
) -> Result<(Vec<DeviceOutcome>, CleaningReport)> {
    let (clean, report) = clean_traces(traces, &params.cleaning, geo)?;
    let outcomes = exec::map(&clean, |tr| process_device(tr, &params.mobility, geo));
    Ok((outcomes, report))
}

/// Every date from the first to the last observed device-day.
pub fn observed_span(outcomes: &[DeviceOutcome]) -> Vec<NaiveDate> {
    let days = outcomes.iter().flat_map(|o| o.days.iter().map(|d| d.date));
    let (Some(lo), Some(hi)) = (days.clone().min(), days.max()) else {
        return Vec::new();
    };
    time::dates(lo, hi).collect()
}

/// Weights, aggregates and scores a set of device outcomes.
pub fn finish_run(
    outcomes: Vec<DeviceOutcome>,
    cleaning: CleaningReport,
    params: &PipelineParams,
    geo: &GeographyHierarchy,
) -> Result<RunResult> {
    let weights = compute_device_weights(outcomes.iter().filter_map(|o| o.profile.as_ref()), geo)?;
    let dates = observed_span(&outcomes);
    let metrics = aggregate_all(&outcomes, &weights, geo, &dates);
    let sdi = sdi_timeseries(&metrics, &params.weights, &params.benchmark);
    Ok(RunResult {
        cleaning,
        outcomes,
        weights,
        dates,
        metrics,
        sdi,
    })
}

/// Full run over an NDJSON or CSV ping stream.
pub fn run_pings(reader: impl BufRead, params: &PipelineParams, geo: &GeographyHierarchy) -> Result<RunResult> {
    let (records, parsed) = parse_pings(reader)?;
    let (outcomes, cleaned) = device_outcomes(group_traces(records), params, geo)?;
    finish_run(outcomes, parsed.then(&cleaned), params, geo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::layout::{grid_geography, GridSpec};
    use crate::synth::{generate_population, run_scenario, ScenarioConfig};

    #[test]
    fn empty_input() {
        let geo = grid_geography(&GridSpec::default()).unwrap();
        let r = run_pings(&b""[..], &PipelineParams::default(), &geo).unwrap();
        assert!(r.outcomes.is_empty() && r.metrics.is_empty() && r.sdi.records.is_empty());
        assert_eq!(r.cleaning, CleaningReport::default());
    }

    #[test]
    fn file_and_memory_paths_agree() {
        let geo = grid_geography(&GridSpec::default()).unwrap();
        let mut s = ScenarioConfig::from_toml(crate::synth::scenario::tests::SMALL).unwrap();
        s.agents_per_county = Some(3);
        let agents = generate_population(&geo, &s).unwrap();
        let params = PipelineParams::default();
        let mut ndjson = String::new();
        let mut mem = Vec::new();
        let mut report = CleaningReport::default();
        run_scenario(&s, &geo, &agents, |chunk, traces| {
            for (a, tr) in chunk.iter().zip(traces) {
                for f in &tr.fixes {
                    ndjson += &f.to_ndjson(&a.device_id);
                    ndjson.push('\n');
                }
                let trace = DeviceTrace {
                    device_id: a.device_id.clone(),
                    fixes: tr.fixes,
                };
                let (o, r) = process_trace(&trace, &params, &geo)?;
                report += &r;
                mem.push(o);
            }
            Ok(())
        })
        .unwrap();
        let from_file = run_pings(ndjson.as_bytes(), &params, &geo).unwrap();
        let in_memory = finish_run(mem, report, &params, &geo).unwrap();
        assert_eq!(from_file.metrics, in_memory.metrics);
        assert_eq!(from_file.sdi, in_memory.sdi);
        assert!(from_file.cleaning.is_balanced() && in_memory.cleaning.is_balanced());
        assert_eq!(from_file.cleaning.accepted, in_memory.cleaning.accepted);
    }
}
