// SPDX-License-Identifier: Apache-2.0

//! Scenario files: TOML schema, bundled scenarios, `key=value` overrides and
//! validation with field paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, NodeKind};
use crate::netctl::{RadioModel, VnfId};
use crate::plugins::PluginSpec;
use crate::SimTime;

pub const BUNDLED: [(&str, &str); 2] = [
    ("okpi.corridor", include_str!("../scenarios/okpi.corridor.toml")),
    ("dlt.federation", include_str!("../scenarios/dlt.federation.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown scenario '{0}': not a bundled name or an existing file")]
    UnknownScenario(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid override '{0}': {1}")]
    BadOverride(String, String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSettings {
    pub handover_ms: SimTime,
    pub default_deploy_ms: SimTime,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self {
            handover_ms: 100,
            default_deploy_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSettings {
    pub vnf: VnfId,
    pub target_ms: f64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            vnf: VnfId::from("v_d"),
            target_ms: 15.0,
        }
    }
}

fn default_domain() -> String {
    "default".to_owned()
}

fn default_factor() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub position: [f64; 2],
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default)]
    pub proc_delay_ms: f64,
    /// Radio units only: radiate only while hosting this VNF.
    #[serde(default)]
    pub requires_vnf: Option<VnfId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: NodeId,
    pub b: NodeId,
    pub d_ms: f64,
    pub lambda_mbps: f64,
    #[serde(default = "default_factor")]
    pub psi: f64,
    #[serde(default = "default_factor")]
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnfConfig {
    pub id: VnfId,
    #[serde(default)]
    pub host: Option<NodeId>,
    #[serde(default)]
    pub deploy_delay_ms: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub id: NodeId,
    #[serde(default = "default_domain")]
    pub domain: String,
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    #[serde(default)]
    pub localization_sigma: f64,
    #[serde(default)]
    pub attach: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginConfig {
    pub name: String,
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub tick_ms: SimTime,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radio: RadioModel,
    #[serde(default)]
    pub net: NetSettings,
    #[serde(default)]
    pub service: ServiceSettings,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub vnfs: Vec<VnfConfig>,
    #[serde(default)]
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub plugins: Vec<PluginConfig>,
}

/// Returns the TOML text of a bundled scenario, or reads `name_or_path`
/// from disk.
pub fn scenario_source(name_or_path: &str) -> Result<String, ScenarioError> {
    if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
        return Ok((*text).to_owned());
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(ScenarioError::UnknownScenario(name_or_path.to_owned()));
    }
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: name_or_path.to_owned(),
        source,
    })
}

/// Loads, overrides and validates a scenario.
pub fn load_scenario(name_or_path: &str, sets: &[(String, String)]) -> Result<ScenarioConfig, ScenarioError> {
    let text = scenario_source(name_or_path)?;
    ScenarioConfig::from_toml_with(&text, sets)
}

/// Splits a `key=value` override.
pub fn parse_set(s: &str) -> Result<(String, String), ScenarioError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
        _ => Err(ScenarioError::BadOverride(s.to_owned(), "expected key=value".into())),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

/// Sets `key` (dotted path) in `root`. Array segments are either an index or
/// the `id`/`name` of an element.
pub fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<(), ScenarioError> {
    let bad = |msg: String| ScenarioError::BadOverride(format!("{key}={raw}"), msg);
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad("empty path segment".into()));
    }
    let (last, parents) = segments.split_last().expect("non-empty");
    let Some((first, rest)) = parents.split_first() else {
        root.insert((*last).to_owned(), parse_value(raw));
        return Ok(());
    };
    let mut cur = root
        .entry((*first).to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for seg in rest {
        cur = step_into(cur, seg).ok_or_else(|| bad(format!("no element '{seg}'")))?;
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert((*last).to_owned(), parse_value(raw));
            Ok(())
        }
        toml::Value::Array(arr) => {
            let idx = find_index(arr, last).ok_or_else(|| bad(format!("no element '{last}'")))?;
            arr[idx] = parse_value(raw);
            Ok(())
        }
        _ => Err(bad("path does not lead to a table".into())),
    }
}

fn find_index(arr: &[toml::Value], seg: &str) -> Option<usize> {
    if let Ok(i) = seg.parse::<usize>() {
        return (i < arr.len()).then_some(i);
    }
    arr.iter().position(|v| {
        ["id", "name"]
            .iter()
            .any(|k| v.get(k).and_then(|x| x.as_str()) == Some(seg))
    })
}

fn step_into<'a>(v: &'a mut toml::Value, seg: &str) -> Option<&'a mut toml::Value> {
    match v {
        toml::Value::Table(t) => {
            if !t.contains_key(seg) {
                t.insert(seg.to_owned(), toml::Value::Table(toml::Table::new()));
            }
            t.get_mut(seg)
        }
        toml::Value::Array(arr) => {
            let i = find_index(arr, seg)?;
            arr.get_mut(i)
        }
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Self::from_toml_with(text, &[])
    }

    pub fn from_toml_with(text: &str, sets: &[(String, String)]) -> Result<Self, ScenarioError> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        for (k, v) in sets {
            apply_override(&mut root, k, v)?;
        }
        let cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn duration_ms(&self) -> SimTime {
        (self.duration_s * 1000.0).round() as SimTime
    }

    pub fn total_ticks(&self) -> u64 {
        self.duration_ms() / self.tick_ms.max(1)
    }

    /// Enables exactly the plug-ins named in `names`, which must all be
    /// declared.
    pub fn select_plugins(&mut self, names: &[String]) -> Result<(), ScenarioError> {
        for n in names {
            if !self.plugins.iter().any(|p| &p.name == n) {
                return Err(invalid("plugins", format!("no plug-in named '{n}' in scenario")));
            }
        }
        for p in &mut self.plugins {
            p.enabled = names.contains(&p.name);
        }
        Ok(())
    }

    /// Checks every cross-reference and numeric range. Returns the first
    /// problem with its field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.tick_ms == 0 {
            return Err(invalid("tick_ms", "must be > 0"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration_s", "must be > 0"));
        }
        if self.total_ticks() == 0 {
            return Err(invalid("duration_s", "shorter than one tick"));
        }
        self.radio.validate().map_err(|m| invalid("radio", m))?;
        if !(self.service.target_ms.is_finite() && self.service.target_ms > 0.0) {
            return Err(invalid("service.target_ms", "must be > 0"));
        }

        let mut kinds: BTreeMap<&NodeId, NodeKind> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let p = format!("nodes[{i}]");
            if n.kind == NodeKind::Robot {
                return Err(invalid(format!("{p}.kind"), "declare robots under [[robots]]"));
            }
            if kinds.insert(&n.id, n.kind).is_some() {
                return Err(invalid(format!("{p}.id"), format!("duplicate id '{}'", n.id)));
            }
            if !n.position.iter().all(|c| c.is_finite()) {
                return Err(invalid(format!("{p}.position"), "must be finite"));
            }
            if !(n.proc_delay_ms.is_finite() && n.proc_delay_ms >= 0.0) {
                return Err(invalid(format!("{p}.proc_delay_ms"), "must be >= 0"));
            }
            if n.kind != NodeKind::Server && n.proc_delay_ms != 0.0 {
                return Err(invalid(format!("{p}.proc_delay_ms"), "only servers have a processing delay"));
            }
            if n.requires_vnf.is_some() && n.kind != NodeKind::RadioUnit {
                return Err(invalid(format!("{p}.requires_vnf"), "only radio units can be gated"));
            }
        }
        for (i, r) in self.robots.iter().enumerate() {
            if kinds.insert(&r.id, NodeKind::Robot).is_some() {
                return Err(invalid(format!("robots[{i}].id"), format!("duplicate id '{}'", r.id)));
            }
        }

        let vnf_ids: BTreeSet<&VnfId> = self.vnfs.iter().map(|v| &v.id).collect();
        if vnf_ids.len() != self.vnfs.len() {
            let i = self
                .vnfs
                .iter()
                .enumerate()
                .find(|(i, v)| self.vnfs[..*i].iter().any(|w| w.id == v.id))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(invalid(format!("vnfs[{i}].id"), "duplicate VNF id"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(v) = &n.requires_vnf {
                if !vnf_ids.contains(v) {
                    return Err(invalid(format!("nodes[{i}].requires_vnf"), format!("unknown VNF '{v}'")));
                }
            }
        }

        let mut seen_links = BTreeSet::new();
        for (i, l) in self.links.iter().enumerate() {
            let p = format!("links[{i}]");
            for (field, end) in [("a", &l.a), ("b", &l.b)] {
                match kinds.get(end) {
                    None => return Err(invalid(format!("{p}.{field}"), format!("unknown node '{end}'"))),
                    Some(NodeKind::Robot) => {
                        return Err(invalid(
                            format!("{p}.{field}"),
                            "robot links are created by attachment",
                        ))
                    }
                    _ => {}
                }
            }
            if l.a == l.b {
                return Err(invalid(format!("{p}.b"), "self-loop"));
            }
            let key = if l.a < l.b { (&l.a, &l.b) } else { (&l.b, &l.a) };
            if !seen_links.insert(key) {
                return Err(invalid(format!("{p}.b"), format!("duplicate link {}--{}", key.0, key.1)));
            }
            if !(l.d_ms.is_finite() && l.d_ms >= 0.0) {
                return Err(invalid(format!("{p}.d_ms"), "must be >= 0"));
            }
            if !(l.lambda_mbps.is_finite() && l.lambda_mbps > 0.0) {
                return Err(invalid(format!("{p}.lambda_mbps"), "must be > 0"));
            }
            if !(l.psi.is_finite() && l.psi >= 1.0) {
                return Err(invalid(format!("{p}.psi"), "must be >= 1"));
            }
            if !(l.delta.is_finite() && l.delta >= 1.0) {
                return Err(invalid(format!("{p}.delta"), "must be >= 1"));
            }
        }

        for (i, v) in self.vnfs.iter().enumerate() {
            if let Some(h) = &v.host {
                match kinds.get(h) {
                    None => return Err(invalid(format!("vnfs[{i}].host"), format!("unknown node '{h}'"))),
                    Some(NodeKind::Switch) => return Err(invalid(format!("vnfs[{i}].host"), "switches cannot host VNFs")),
                    _ => {}
                }
            }
        }

        for (i, r) in self.robots.iter().enumerate() {
            let p = format!("robots[{i}]");
            if r.waypoints.len() < 2 {
                return Err(invalid(format!("{p}.waypoints"), "need at least two waypoints"));
            }
            if !r.waypoints.iter().flatten().all(|c| c.is_finite()) {
                return Err(invalid(format!("{p}.waypoints"), "must be finite"));
            }
            if !(r.speed.is_finite() && r.speed >= 0.0) {
                return Err(invalid(format!("{p}.speed"), "must be >= 0"));
            }
            if !(r.localization_sigma.is_finite() && r.localization_sigma >= 0.0) {
                return Err(invalid(format!("{p}.localization_sigma"), "must be >= 0"));
            }
            if let Some(ru) = &r.attach {
                if kinds.get(ru) != Some(&NodeKind::RadioUnit) {
                    return Err(invalid(format!("{p}.attach"), format!("'{ru}' is not a radio unit")));
                }
            }
        }

        let mut names = BTreeSet::new();
        for (i, pc) in self.plugins.iter().enumerate() {
            let p = format!("plugins[{i}]");
            if !names.insert(&pc.name) {
                return Err(invalid(format!("{p}.name"), format!("duplicate plug-in '{}'", pc.name)));
            }
            let spec = PluginSpec::parse(&pc.name, &pc.params).map_err(|m| {
                if crate::plugins::KNOWN_PLUGINS.contains(&pc.name.as_str()) {
                    invalid(format!("{p}.params"), m)
                } else {
                    invalid(format!("{p}.name"), m)
                }
            })?;
            for (field, id, kind) in spec.node_refs() {
                if kinds.get(id) != Some(&kind) {
                    return Err(invalid(format!("{p}.params.{field}"), format!("'{id}' is not a {kind}")));
                }
            }
            for (field, v) in spec.vnf_refs() {
                if !vnf_ids.contains(v) {
                    return Err(invalid(format!("{p}.params.{field}"), format!("unknown VNF '{v}'")));
                }
            }
            spec.build().map_err(|m| invalid(format!("{p}.params"), m))?;
        }
        Ok(())
    }
}
