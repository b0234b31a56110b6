//! Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 config or usage error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cases::{join_and_rate, parse_cases, write_joined_csv, CaseTable};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::exec;
use crate::geodata::GeographyHierarchy;
use crate::metrics::write_metrics_csv;
use crate::mobility::{write_profiles_csv, write_stays_csv, write_trips_csv};
use crate::pipeline::{run_pings, RunResult};
use crate::report::{build_report, write_report};
use crate::sdi::{read_sdi_csv, write_sdi_csv, SdiRecord};
use crate::synth::truth::TRUTH_TRIPS_HEADER;
use crate::synth::{generate_population, run_scenario, write_truth_trips_csv, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "sdi", version, about = "Mobility metrics and Social Distancing Index pipeline")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; overrides the config value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic pings plus ground truth from a scenario.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "synth_out")]
        out: PathBuf,
    },
    /// Pings to metrics.csv and sdi.csv.
    Run,
    /// Join the SDI series to confirmed cases.
    JoinCases,
    /// Heatmap, rankings, weekly deltas and optional charts.
    Report,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Synth { scenario, out } = &cli.command {
        let workers = cli.workers.unwrap_or(0);
        return exec::with_workers(workers, || cmd_synth(scenario, out));
    }
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_path(p)?,
        None => {
            let mut c = PipelineConfig::default();
            c.resolve_against(&std::env::current_dir().map_err(Error::Stream)?);
            c
        }
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    exec::with_workers(cfg.workers, || match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::JoinCases => cmd_join_cases(&cfg),
        Command::Report => cmd_report(&cfg),
        Command::Synth { .. } => unreachable!("handled above"),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    std::io::copy(&mut open(path)?, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(h.finalize()))
}

fn load_geography(path: &Path, field: &str) -> Result<GeographyHierarchy> {
    GeographyHierarchy::from_path(path).map_err(|e| match e {
        Error::Io { .. } => Error::config(field, e.to_string()),
        other => other,
    })
}

fn cmd_synth(scenario_path: &Path, out: &Path) -> Result<()> {
    if !scenario_path.is_file() {
        return Err(Error::config(
            "--scenario",
            format!("file `{}` not found", scenario_path.display()),
        ));
    }
    let scenario = ScenarioConfig::from_path(scenario_path)?;
    if !scenario.geography.is_file() {
        return Err(Error::config(
            "geography",
            format!("file `{}` not found", scenario.geography.display()),
        ));
    }
    let geo = load_geography(&scenario.geography, "geography")?;
    let agents = generate_population(&geo, &scenario)?;
    mkdir(out)?;
    let pings_path = out.join("pings.ndjson");
    let trips_path = out.join("truth_trips.csv");
    let metrics_path = out.join("truth_metrics.csv");
    let mut pings = create(&pings_path)?;
    let mut trips = csv::Writer::from_writer(create(&trips_path)?);
    trips.write_record(TRUTH_TRIPS_HEADER)?;
    let (mut n_pings, mut n_trips) = (0u64, 0u64);
    let truth = run_scenario(&scenario, &geo, &agents, |chunk, traces| {
        for (a, tr) in chunk.iter().zip(&traces) {
            for f in &tr.fixes {
                writeln!(pings, "{}", f.to_ndjson(&a.device_id)).map_err(|e| Error::io(&pings_path, e))?;
            }
            n_pings += tr.fixes.len() as u64;
            n_trips += tr.trips.len() as u64;
            write_truth_trips_csv(&mut trips, &tr.trips)?;
        }
        Ok(())
    })?;
    pings.flush().map_err(|e| Error::io(&pings_path, e))?;
    trips.flush().map_err(|e| Error::io(&trips_path, e))?;
    drop((pings, trips));
    write_metrics_csv(create(&metrics_path)?, &truth)?;
    let manifest = json!({
        "command": "synth",
        "scenario": scenario_path,
        "seed": scenario.seed,
        "agents": agents.len(),
        "pings": n_pings,
        "truth_trips": n_trips,
        "truth_metric_rows": truth.len(),
        "sha256": {
            "pings.ndjson": sha256_file(&pings_path)?,
            "truth_trips.csv": sha256_file(&trips_path)?,
            "truth_metrics.csv": sha256_file(&metrics_path)?,
        },
    });
    write_json(&out.join("synth_manifest.json"), &manifest)?;
    log::info!("synth: {} agents, {n_pings} pings, {n_trips} trips", agents.len());
    Ok(())
}

pub fn config_sha256(cfg: &PipelineConfig) -> String {
    let text = toml::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Runs the pipeline and always leaves `run_manifest.json` behind, marking the
/// outcome, unless the output directory itself cannot be created.
fn cmd_run(cfg: &PipelineConfig) -> Result<()> {
    let out = &cfg.paths.output_dir;
    mkdir(out)?;
    let mut manifest = json!({
        "command": "run",
        "config_sha256": config_sha256(cfg),
        "config": cfg,
    });
    let result = run_inner(cfg, &mut manifest);
    manifest["status"] = json!(if result.is_ok() { "ok" } else { "failed" });
    manifest["error"] = result.as_ref().err().map_or(Value::Null, |e| json!(e.to_string()));
    write_json(&out.join("run_manifest.json"), &manifest)?;
    result
}

fn run_inner(cfg: &PipelineConfig, manifest: &mut Value) -> Result<()> {
    let geo_path = cfg.require(&cfg.paths.geography, "paths.geography")?;
    let pings_path = cfg.require(&cfg.paths.pings, "paths.pings")?;
    let geo = load_geography(geo_path, "paths.geography")?;
    let params = cfg.params();
    let r: RunResult = run_pings(open(pings_path)?, &params, &geo)?;
    manifest["cleaning"] = json!(r.cleaning);
    manifest["devices"] = json!(r.outcomes.len());
    manifest["profiled_devices"] = json!(r.weights.devices.len());
    manifest["weights_total"] = json!(r.weights.total());
    manifest["national_population"] = json!(geo.nation().population);
    manifest["uncovered_counties"] = json!(r.weights.uncovered_counties);
    manifest["skipped_geos"] = json!(r.sdi.skipped);
    manifest["dates"] = json!({
        "first": r.dates.first(),
        "last": r.dates.last(),
    });
    let out = &cfg.paths.output_dir;
    write_metrics_csv(create(&out.join("metrics.csv"))?, &r.metrics)?;
    write_sdi_csv(create(&out.join("sdi.csv"))?, &r.sdi.records)?;
    let mut rows = json!({ "metrics": r.metrics.len(), "sdi": r.sdi.records.len() });
    if cfg.dump_intermediate {
        write_stays_csv(create(&out.join("stays.csv"))?, r.outcomes.iter().flat_map(|o| &o.stays))?;
        write_trips_csv(create(&out.join("trips.csv"))?, r.outcomes.iter().flat_map(|o| &o.trips))?;
        write_profiles_csv(
            create(&out.join("profiles.csv"))?,
            r.outcomes.iter().filter_map(|o| o.profile.as_ref()),
        )?;
        rows["stays"] = json!(r.outcomes.iter().map(|o| o.stays.len()).sum::<usize>());
        rows["trips"] = json!(r.outcomes.iter().map(|o| o.trips.len()).sum::<usize>());
    }
    manifest["rows"] = rows;
    Ok(())
}

fn load_joinable(cfg: &PipelineConfig) -> Result<(GeographyHierarchy, Vec<SdiRecord>, CaseTable)> {
    let geo_path = cfg.require(&cfg.paths.geography, "paths.geography")?;
    let cases_path = cfg.require(&cfg.paths.cases, "paths.cases")?;
    let sdi_path = cfg.sdi_path();
    if !sdi_path.is_file() {
        return Err(Error::config(
            "paths.sdi",
            format!("file `{}` not found; run `sdi run` first", sdi_path.display()),
        ));
    }
    let geo = load_geography(geo_path, "paths.geography")?;
    let sdi = read_sdi_csv(open(&sdi_path)?)?;
    let cases = parse_cases(open(cases_path)?, &geo)?;
    log::info!("cases: {:?}", cases.report);
    Ok((geo, sdi, cases))
}

fn cmd_join_cases(cfg: &PipelineConfig) -> Result<()> {
    let (geo, sdi, cases) = load_joinable(cfg)?;
    let joined = join_and_rate(&sdi, &cases, &geo)?;
    if joined.is_empty() && !sdi.is_empty() && !cases.records.is_empty() {
        return Err(Error::Alignment("the SDI series and the case file share no geo-date".into()));
    }
    let out = &cfg.paths.output_dir;
    mkdir(out)?;
    write_joined_csv(create(&out.join("joined.csv"))?, &joined)?;
    write_json(&out.join("cases_report.json"), &json!(cases.report))
}

fn cmd_report(cfg: &PipelineConfig) -> Result<()> {
    let (geo, sdi, cases) = load_joinable(cfg)?;
    let report = build_report(&sdi, &cases, &geo, &cfg.report)?;
    for p in write_report(&report, &cfg.paths.output_dir, cfg.report.svg)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
