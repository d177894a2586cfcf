//! Versioned JSON documents.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AbortInfo, InvariantReport, RunConfig, StepStats};
use crate::error::{Error, Result};
use crate::harness::SweepReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document<T> {
    schema_version: u32,
    kind: String,
    body: T,
}

/// Summary of a single `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub steps: StepStats,
    pub abort: Option<AbortInfo>,
    pub invariants: InvariantReport,
    pub checkpoints: Vec<String>,
}

fn to_json<T: Serialize>(kind: &str, body: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Document {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        body,
    })?;
    out.push(b'\n');
    Ok(out)
}

fn from_json<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<T> {
    #[derive(Deserialize)]
    struct Header {
        schema_version: u32,
        kind: String,
    }
    let h: Header = serde_json::from_slice(bytes)?;
    if h.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported report schema version {} (expected {SCHEMA_VERSION})",
            h.schema_version
        )));
    }
    if h.kind != kind {
        return Err(Error::InvalidArgument(format!("expected a {kind} document, found {}", h.kind)));
    }
    let doc: Document<T> = serde_json::from_slice(bytes)?;
    Ok(doc.body)
}

pub fn report_json(report: &SweepReport) -> Result<Vec<u8>> {
    to_json("sweep", report)
}

pub fn report_from_json(bytes: &[u8]) -> Result<SweepReport> {
    from_json("sweep", bytes)
}

pub fn write_report_json(report: &SweepReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_json(report)?)?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<SweepReport> {
    report_from_json(&std::fs::read(path)?)
}

pub fn run_report_json(report: &RunReport) -> Result<Vec<u8>> {
    to_json("run", report)
}

pub fn run_report_from_json(bytes: &[u8]) -> Result<RunReport> {
    from_json("run", bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{InitialData, NormTrace};

    fn run_report() -> RunReport {
        RunReport {
            config: RunConfig::new(16, 1.0, 1e-3, 1e-2, InitialData::rough(4)),
            steps: StepStats::default(),
            abort: None,
            invariants: InvariantReport::from_trace(&NormTrace::new(1e-3, 1e-2)),
            checkpoints: vec!["a.bqchk".into()],
        }
    }

    #[test]
    fn run_report_round_trip() {
        let r = run_report();
        let bytes = run_report_json(&r).unwrap();
        assert_eq!(run_report_from_json(&bytes).unwrap(), r);
        assert!(String::from_utf8(bytes.clone()).unwrap().contains("\"schema_version\": 1"));
        assert!(report_from_json(&bytes).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = String::from_utf8(run_report_json(&run_report()).unwrap()).unwrap();
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        let err = run_report_from_json(bumped.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("schema version 2"));
    }
}
