#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use sdi_core::ingest::{group_traces, parse_pings, DeviceTrace};
use sdi_core::GeographyHierarchy;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn geography() -> GeographyHierarchy {
    GeographyHierarchy::from_path(data_dir().join("geography.geojson")).expect("bundled geography loads")
}

/// Every bundled micro-trace, one device per file, in file-name order.
pub fn micro_traces() -> Vec<(String, DeviceTrace)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data_dir().join("micro"))
        .expect("micro dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read(&p).expect("micro trace readable");
            let (records, report) = parse_pings(&text[..]).expect("micro trace parses");
            assert_eq!(report.parse_error, 0, "{}", p.display());
            let mut traces = group_traces(records);
            assert_eq!(traces.len(), 1, "{} holds one device", p.display());
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, traces.remove(0))
        })
        .collect()
}

/// Byte-equality of two files, with a readable failure message.
pub fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
    if x == y {
        Ok(())
    } else {
        Err(format!("{} and {} differ", a.display(), b.display()))
    }
}
