// SPDX-License-Identifier: Apache-2.0

//! Run summary, computed either from an in-memory history or recomputed from
//! exported CSV traces. Both paths feed the same reducers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{
    HistoryStore, FEDERATION_CSV, FEDERATION_HEADER, INSTRUCTIONS_CSV, INSTRUCTIONS_HEADER, SERVICE_TIME_CSV,
    SERVICE_TIME_HEADER, SNAPSHOTS_CSV, SNAPSHOTS_HEADER,
};
use crate::SimTime;

pub const SUMMARY_JSON: &str = "summary.json";

/// Event marking the start of a federation.
pub const FEDERATION_START: &str = "request_submitted";
/// Event marking its on-chain completion.
pub const FEDERATION_END: &str = "attach_done_confirmed";

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("missing trace file {0}")]
    MissingTrace(String),
    #[error("schema mismatch in {file}: {detail}")]
    SchemaMismatch { file: String, detail: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionCounts {
    pub applied: u64,
    pub rejected: u64,
    pub panics: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceStats {
    pub samples: u64,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub instructions: BTreeMap<String, InstructionCounts>,
    pub service: Option<ServiceStats>,
    pub target_ms: f64,
    pub within_target_fraction: Option<f64>,
    pub federation_total_s: Option<f64>,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn service_stats(values: &[f64]) -> Option<ServiceStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(ServiceStats {
        samples: values.len() as u64,
        min_ms: sorted[0],
        mean_ms: values.iter().sum::<f64>() / values.len() as f64,
        p95_ms: percentile_nearest_rank(&sorted, 95.0).expect("non-empty"),
        max_ms: sorted[sorted.len() - 1],
    })
}

fn reduce<'a>(
    ticks: u64,
    service: &[f64],
    instructions: impl IntoIterator<Item = (&'a str, &'a str)>,
    events: impl IntoIterator<Item = (SimTime, &'a str)>,
    target_ms: f64,
) -> RunSummary {
    let mut counts: BTreeMap<String, InstructionCounts> = BTreeMap::new();
    for (plugin, outcome) in instructions {
        let c = counts.entry(plugin.to_owned()).or_default();
        match outcome {
            "applied" => c.applied += 1,
            "rejected" => c.rejected += 1,
            _ => c.panics += 1,
        }
    }
    let mut start = None;
    let mut end = None;
    for (t, e) in events {
        if e == FEDERATION_START && start.is_none() {
            start = Some(t);
        }
        if e == FEDERATION_END && end.is_none() {
            end = Some(t);
        }
    }
    let federation_total_s = match (start, end) {
        (Some(a), Some(b)) if b >= a => Some((b - a) as f64 / 1000.0),
        _ => None,
    };
    let within = (!service.is_empty())
        .then(|| service.iter().filter(|&&v| v <= target_ms).count() as f64 / service.len() as f64);
    RunSummary {
        ticks,
        instructions: counts,
        service: service_stats(service),
        target_ms,
        within_target_fraction: within,
        federation_total_s,
    }
}

pub fn summarize_history(history: &HistoryStore, target_ms: f64) -> RunSummary {
    let service: Vec<f64> = history.service_trace().iter().filter_map(|s| s.service_ms).collect();
    reduce(
        history.len() as u64,
        &service,
        history
            .instruction_log()
            .iter()
            .map(|r| (r.plugin.as_str(), r.outcome.label())),
        history.federation_trace().iter().map(|e| (e.t_ms, e.event.as_str())),
        target_ms,
    )
}

fn read_rows(dir: &Path, file: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, SummaryError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(SummaryError::MissingTrace(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(&path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(SummaryError::SchemaMismatch {
            file: file.to_owned(),
            detail: format!("expected header {header:?}, found {got:?}"),
        });
    }
    r.records().collect::<Result<Vec<_>, _>>().map_err(Into::into)
}

fn parse_field<T: std::str::FromStr>(file: &str, row: &csv::StringRecord, col: usize) -> Result<T, SummaryError> {
    let raw = row.get(col).unwrap_or_default();
    raw.parse().map_err(|_| SummaryError::SchemaMismatch {
        file: file.to_owned(),
        detail: format!("cannot parse column {col} value '{raw}'"),
    })
}

/// Recomputes the run summary from a directory of exported traces.
pub fn summarize(dir: &Path, target_ms: f64) -> Result<RunSummary, SummaryError> {
    let snaps = read_rows(dir, SNAPSHOTS_CSV, &SNAPSHOTS_HEADER)?;
    let mut times = BTreeSet::new();
    for row in &snaps {
        times.insert(parse_field::<SimTime>(SNAPSHOTS_CSV, row, 0)?);
    }

    let mut service = Vec::new();
    for row in read_rows(dir, SERVICE_TIME_CSV, &SERVICE_TIME_HEADER)? {
        if !row.get(4).unwrap_or_default().is_empty() {
            service.push(parse_field::<f64>(SERVICE_TIME_CSV, &row, 4)?);
        }
    }

    let instr = read_rows(dir, INSTRUCTIONS_CSV, &INSTRUCTIONS_HEADER)?;
    let fed = read_rows(dir, FEDERATION_CSV, &FEDERATION_HEADER)?;
    let mut events = Vec::with_capacity(fed.len());
    for row in &fed {
        events.push((parse_field::<SimTime>(FEDERATION_CSV, row, 0)?, row.get(1).unwrap_or_default()));
    }
    Ok(reduce(
        times.len() as u64,
        &service,
        instr
            .iter()
            .map(|r| (r.get(1).unwrap_or_default(), r.get(3).unwrap_or_default())),
        events,
        target_ms,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 95.0), Some(19.0));
        assert_eq!(percentile_nearest_rank(&v, 100.0), Some(20.0));
        assert_eq!(percentile_nearest_rank(&v, 0.0), Some(1.0));
        assert_eq!(percentile_nearest_rank(&[], 50.0), None);
    }

    #[test]
    fn stats_basic() {
        let s = service_stats(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.min_ms, s.mean_ms, s.max_ms, s.samples), (1.0, 2.0, 3.0, 3));
    }

    #[test]
    fn reduce_counts_and_federation() {
        let s = reduce(
            4,
            &[10.0, 20.0],
            [("a", "applied"), ("a", "rejected"), ("b", "panic")],
            [(1_000, "request_submitted"), (20_000, "attach_done_confirmed")],
            15.0,
        );
        assert_eq!(s.instructions["a"], InstructionCounts { applied: 1, rejected: 1, panics: 0 });
        assert_eq!(s.instructions["b"].panics, 1);
        assert_eq!(s.within_target_fraction, Some(0.5));
        assert_eq!(s.federation_total_s, Some(19.0));
    }

    #[test]
    fn missing_dir_is_missing_trace() {
        let err = summarize(Path::new("/definitely/not/here"), 15.0).unwrap_err();
        assert!(matches!(err, SummaryError::MissingTrace(_)));
    }
}
