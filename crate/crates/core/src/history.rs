// SPDX-License-Identifier: Apache-2.0

//! Append-only embeddings history: one immutable snapshot per tick plus the
//! service, federation and instruction traces, with range queries and CSV
//! export.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{LinkKey, NodeId};
use crate::netctl::{PlacementMap, RuContext};
use crate::plugin::InstructionRecord;
use crate::robot::{ContextEmbedding, SensorVector};
use crate::SimTime;

pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const SERVICE_TIME_CSV: &str = "service_time.csv";
pub const FEDERATION_CSV: &str = "federation.csv";
pub const INSTRUCTIONS_CSV: &str = "instructions.csv";

pub const SNAPSHOTS_HEADER: [&str; 5] = ["t_ms", "entity_kind", "entity_id", "metric", "value"];
pub const SERVICE_TIME_HEADER: [&str; 5] = ["t_ms", "robot", "attached_ru", "vnf_host", "service_ms"];
pub const FEDERATION_HEADER: [&str; 4] = ["t_ms", "event", "actor", "detail"];
pub const INSTRUCTIONS_HEADER: [&str; 5] = ["t_ms", "plugin", "instruction", "outcome", "detail"];

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("snapshot at t={got} ms is not after the last one at t={last} ms")]
    NonMonotonicTime { last: SimTime, got: SimTime },
    #[error("bad range: from {from} ms > to {to} ms")]
    BadRange { from: SimTime, to: SimTime },
    #[error("unknown selector '{0}'")]
    UnknownSelector(String),
    #[error("nothing to export: store is empty")]
    EmptyStore,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistorySnapshot {
    pub t_ms: SimTime,
    pub kappa: BTreeMap<NodeId, ContextEmbedding>,
    pub placements: PlacementMap,
    pub link_delays: BTreeMap<LinkKey, f64>,
    pub link_throughputs: BTreeMap<LinkKey, f64>,
    pub ru_contexts: BTreeMap<NodeId, RuContext>,
}

/// One row of the service-time trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSample {
    pub t_ms: SimTime,
    pub robot: NodeId,
    pub attached_ru: Option<NodeId>,
    pub vnf_host: Option<NodeId>,
    pub service_ms: Option<f64>,
    pub steady_ms: Option<f64>,
    pub handover_remaining_ms: f64,
}

/// Free-form protocol event (federation trace).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub t_ms: SimTime,
    pub event: String,
    pub actor: String,
    pub detail: String,
}

impl TraceEvent {
    pub fn new(t_ms: SimTime, event: impl Into<String>, actor: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            t_ms,
            event: event.into(),
            actor: actor.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Kappa,
    Placements,
    Delays,
    Throughputs,
    RuContexts,
}

impl FromStr for Selector {
    type Err = HistoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kappa" => Ok(Selector::Kappa),
            "placements" => Ok(Selector::Placements),
            "delays" => Ok(Selector::Delays),
            "throughputs" => Ok(Selector::Throughputs),
            "ru_contexts" => Ok(Selector::RuContexts),
            other => Err(HistoryError::UnknownSelector(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Kappa(BTreeMap<NodeId, ContextEmbedding>),
    Placements(PlacementMap),
    Delays(BTreeMap<LinkKey, f64>),
    Throughputs(BTreeMap<LinkKey, f64>),
    RuContexts(BTreeMap<NodeId, RuContext>),
}

impl Projection {
    fn is_empty(&self) -> bool {
        match self {
            Projection::Kappa(m) => m.is_empty(),
            Projection::Placements(p) => p.node_map.is_empty() && p.link_map.is_empty(),
            Projection::Delays(m) | Projection::Throughputs(m) => m.is_empty(),
            Projection::RuContexts(m) => m.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportReport {
    pub snapshot_rows: usize,
    pub service_rows: usize,
    pub federation_rows: usize,
    pub instruction_rows: usize,
}

#[derive(Debug, Clone, Default)]
pub struct HistoryStore {
    rus: Vec<NodeId>,
    snapshots: Vec<HistorySnapshot>,
    service: Vec<ServiceSample>,
    federation: Vec<TraceEvent>,
    instructions: Vec<InstructionRecord>,
}

impl HistoryStore {
    /// `rus` is the run's RU universe, in the order used by embeddings.
    pub fn new(rus: Vec<NodeId>) -> Self {
        Self {
            rus,
            ..Self::default()
        }
    }

    pub fn rus(&self) -> &[NodeId] {
        &self.rus
    }

    pub fn record(&mut self, snapshot: HistorySnapshot) -> Result<(), HistoryError> {
        if let Some(last) = self.snapshots.last() {
            if snapshot.t_ms <= last.t_ms {
                return Err(HistoryError::NonMonotonicTime {
                    last: last.t_ms,
                    got: snapshot.t_ms,
                });
            }
        }
        self.snapshots.push(snapshot);
        Ok(())
    }

    pub fn record_service(&mut self, sample: ServiceSample) {
        self.service.push(sample);
    }

    pub fn record_event(&mut self, event: TraceEvent) {
        self.federation.push(event);
    }

    pub fn record_instruction(&mut self, record: InstructionRecord) {
        self.instructions.push(record);
    }

    pub fn snapshots(&self) -> &[HistorySnapshot] {
        &self.snapshots
    }

    pub fn latest(&self) -> Option<&HistorySnapshot> {
        self.snapshots.last()
    }

    pub fn service_trace(&self) -> &[ServiceSample] {
        &self.service
    }

    pub fn federation_trace(&self) -> &[TraceEvent] {
        &self.federation
    }

    pub fn instruction_log(&self) -> &[InstructionRecord] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshots with `from_ms <= t < to_ms`, projected to `selector` and,
    /// when given, to one entity (robot, node or VNF, link, RU). Points where
    /// the entity is absent are skipped.
    pub fn query(
        &self,
        from_ms: SimTime,
        to_ms: SimTime,
        selector: Selector,
        entity: Option<&str>,
    ) -> Result<Vec<(SimTime, Projection)>, HistoryError> {
        if from_ms > to_ms {
            return Err(HistoryError::BadRange { from: from_ms, to: to_ms });
        }
        let lo = self.snapshots.partition_point(|s| s.t_ms < from_ms);
        let hi = self.snapshots.partition_point(|s| s.t_ms < to_ms);
        let mut out = Vec::with_capacity(hi.saturating_sub(lo));
        for snap in &self.snapshots[lo..hi.max(lo)] {
            let proj = project(snap, selector, entity);
            if entity.is_some() && proj.is_empty() {
                continue;
            }
            out.push((snap.t_ms, proj));
        }
        Ok(out)
    }

    /// Writes all traces into `dir` (created if missing).
    pub fn export_csv(&self, dir: &Path) -> Result<ExportReport, HistoryError> {
        if self.snapshots.is_empty() {
            return Err(HistoryError::EmptyStore);
        }
        fs::create_dir_all(dir)?;
        let mut report = ExportReport::default();

        let mut w = csv::Writer::from_path(dir.join(SNAPSHOTS_CSV))?;
        w.write_record(SNAPSHOTS_HEADER)?;
        for snap in &self.snapshots {
            let t = snap.t_ms.to_string();
            for row in snapshot_rows(snap, &self.rus) {
                w.write_record([t.as_str(), row.0, &row.1, &row.2, &row.3])?;
                report.snapshot_rows += 1;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(SERVICE_TIME_CSV))?;
        w.write_record(SERVICE_TIME_HEADER)?;
        for s in &self.service {
            w.write_record([
                s.t_ms.to_string(),
                s.robot.to_string(),
                opt_str(&s.attached_ru),
                opt_str(&s.vnf_host),
                s.service_ms.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
            report.service_rows += 1;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(FEDERATION_CSV))?;
        w.write_record(FEDERATION_HEADER)?;
        for e in &self.federation {
            w.write_record([e.t_ms.to_string().as_str(), &e.event, &e.actor, &e.detail])?;
            report.federation_rows += 1;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(INSTRUCTIONS_CSV))?;
        w.write_record(INSTRUCTIONS_HEADER)?;
        for r in &self.instructions {
            w.write_record([
                r.t_ms.to_string(),
                r.plugin.clone(),
                r.instruction.as_ref().map(|i| i.kind().to_owned()).unwrap_or_default(),
                r.outcome.label().to_owned(),
                r.detail(),
            ])?;
            report.instruction_rows += 1;
        }
        w.flush()?;

        Ok(report)
    }
}

fn opt_str(n: &Option<NodeId>) -> String {
    n.as_ref().map(NodeId::to_string).unwrap_or_default()
}

/// Long-format rows `(entity_kind, entity_id, metric, value)` for one snapshot.
fn snapshot_rows(snap: &HistorySnapshot, rus: &[NodeId]) -> Vec<(&'static str, String, String, String)> {
    let mut rows = Vec::new();
    for (robot, k) in &snap.kappa {
        for (ru, &on) in rus.iter().zip(&k.attachment) {
            rows.push(("robot", robot.to_string(), format!("phi.{ru}"), u8::from(on).to_string()));
        }
        for (name, v) in SensorVector::FIELDS.iter().zip(k.sensors.to_array()) {
            rows.push(("robot", robot.to_string(), format!("sigma.{name}"), v.to_string()));
        }
    }
    for (v, host) in snap.placements.vnf_hosts() {
        rows.push(("vnf", v.to_string(), "host".into(), host.to_string()));
    }
    for (vl, links) in &snap.placements.link_map {
        let path = links.iter().map(LinkKey::to_string).collect::<Vec<_>>().join(";");
        rows.push(("vl", vl.to_string(), "path".into(), path));
    }
    for (key, d) in &snap.link_delays {
        rows.push(("link", key.to_string(), "delay_ms".into(), d.to_string()));
    }
    for (key, l) in &snap.link_throughputs {
        rows.push(("link", key.to_string(), "throughput_mbps".into(), l.to_string()));
    }
    for (ru, ctx) in &snap.ru_contexts {
        for (name, v) in RuContext::FIELDS.iter().zip(ctx.to_array()) {
            rows.push(("ru", ru.to_string(), name.to_string(), v.to_string()));
        }
    }
    rows
}

fn project(snap: &HistorySnapshot, selector: Selector, entity: Option<&str>) -> Projection {
    fn keep<K: ToString + Ord + Clone, V: Clone>(m: &BTreeMap<K, V>, entity: Option<&str>) -> BTreeMap<K, V> {
        match entity {
            None => m.clone(),
            Some(e) => m
                .iter()
                .filter(|(k, _)| k.to_string() == e)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
    match selector {
        Selector::Kappa => Projection::Kappa(keep(&snap.kappa, entity)),
        Selector::Delays => Projection::Delays(keep(&snap.link_delays, entity)),
        Selector::Throughputs => Projection::Throughputs(keep(&snap.link_throughputs, entity)),
        Selector::RuContexts => Projection::RuContexts(keep(&snap.ru_contexts, entity)),
        Selector::Placements => {
            let Some(e) = entity else {
                return Projection::Placements(snap.placements.clone());
            };
            let mut p = PlacementMap::default();
            for (n, set) in &snap.placements.node_map {
                if n.as_str() == e {
                    p.node_map.insert(n.clone(), set.clone());
                } else if let Some(v) = set.iter().find(|v| v.as_str() == e) {
                    p.node_map.insert(n.clone(), [v.clone()].into());
                }
            }
            for (vl, links) in &snap.placements.link_map {
                if vl.to_string() == e {
                    p.link_map.insert(vl.clone(), links.clone());
                }
            }
            Projection::Placements(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netctl::VnfId;

    fn snap(t: SimTime) -> HistorySnapshot {
        let mut s = HistorySnapshot {
            t_ms: t,
            kappa: BTreeMap::new(),
            placements: PlacementMap::default(),
            link_delays: BTreeMap::new(),
            link_throughputs: BTreeMap::new(),
            ru_contexts: BTreeMap::new(),
        };
        let key = LinkKey::new(NodeId::from("a"), NodeId::from("b"));
        s.link_delays.insert(key.clone(), t as f64 / 100.0);
        s.link_throughputs.insert(key, 10_000.0);
        s.kappa.insert(
            NodeId::from("r1"),
            ContextEmbedding {
                attachment: vec![false, true],
                sensors: SensorVector {
                    pos: [t as f64 * 0.005, 0.0],
                    speed: 0.5,
                    heading: 0.0,
                },
            },
        );
        s.placements.assign(&VnfId::from("v_d"), &NodeId::from("fog1"));
        s
    }

    fn store(n: u64) -> HistoryStore {
        let mut h = HistoryStore::new(vec![NodeId::from("R1"), NodeId::from("R2")]);
        for i in 0..n {
            h.record(snap(i * 100)).unwrap();
        }
        h
    }

    #[test]
    fn record_rejects_non_monotonic_time() {
        let mut h = HistoryStore::new(vec![]);
        h.record(snap(0)).unwrap();
        h.record(snap(100)).unwrap();
        assert!(matches!(h.record(snap(100)), Err(HistoryError::NonMonotonicTime { .. })));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn minute_at_100ms_is_600_snapshots() {
        assert_eq!(store(600).len(), 600);
    }

    #[test]
    fn query_ranges_and_entities() {
        let h = store(10);
        let all = h.query(0, 1_000, Selector::Delays, Some("a--b")).unwrap();
        assert_eq!(all.len(), 10);
        assert_eq!(all[3], (300, Projection::Delays([(LinkKey::new("a".into(), "b".into()), 3.0)].into())));
        assert!(h.query(500, 500, Selector::Kappa, None).unwrap().is_empty());
        assert_eq!(h.query(200, 500, Selector::Kappa, Some("r1")).unwrap().len(), 3);
        assert!(h.query(0, 1_000, Selector::Kappa, Some("nobody")).unwrap().is_empty());
        assert!(matches!(h.query(5, 1, Selector::Kappa, None), Err(HistoryError::BadRange { .. })));
        assert!(matches!("bogus".parse::<Selector>(), Err(HistoryError::UnknownSelector(_))));
        let by_vnf = h.query(0, 100, Selector::Placements, Some("v_d")).unwrap();
        let Projection::Placements(p) = &by_vnf[0].1 else { panic!() };
        assert_eq!(p.host_of(&VnfId::from("v_d")), Some(&NodeId::from("fog1")));
    }

    #[test]
    fn export_empty_store_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            HistoryStore::new(vec![]).export_csv(dir.path()),
            Err(HistoryError::EmptyStore)
        ));
    }

    #[test]
    fn export_writes_headers_and_rows() {
        let mut h = store(3);
        for t in [0, 100, 200] {
            h.record_service(ServiceSample {
                t_ms: t,
                robot: NodeId::from("r1"),
                attached_ru: Some(NodeId::from("R2")),
                vnf_host: Some(NodeId::from("fog1")),
                service_ms: Some(5.4),
                steady_ms: Some(5.4),
                handover_remaining_ms: 0.0,
            });
        }
        let dir = tempfile::tempdir().unwrap();
        let report = h.export_csv(dir.path()).unwrap();
        assert_eq!(report.service_rows, 3);
        // 2 phi + 4 sigma + 1 vnf + 2 link rows per snapshot
        assert_eq!(report.snapshot_rows, 3 * 9);
        let service = fs::read_to_string(dir.path().join(SERVICE_TIME_CSV)).unwrap();
        assert_eq!(service.lines().next().unwrap(), "t_ms,robot,attached_ru,vnf_host,service_ms");
        assert_eq!(service.lines().nth(1).unwrap(), "0,r1,R2,fog1,5.4");
        let snaps = fs::read_to_string(dir.path().join(SNAPSHOTS_CSV)).unwrap();
        assert_eq!(snaps.lines().next().unwrap(), "t_ms,entity_kind,entity_id,metric,value");
        assert!(snaps.contains("100,robot,r1,phi.R2,1"));
        let fed = fs::read_to_string(dir.path().join(FEDERATION_CSV)).unwrap();
        assert_eq!(fed, "t_ms,event,actor,detail\n");
    }
}
