// SPDX-License-Identifier: Apache-2.0

//! Reference plug-ins and their construction from scenario parameters.

pub mod federation;
pub mod ledger;
pub mod orchestrator;
pub mod soa;

use crate::graph::{NodeId, NodeKind};
use crate::netctl::VnfId;
use crate::plugin::Plugin;

pub use federation::{FederationParams, FederationPlugin};
pub use ledger::{FederationTx, Ledger, LedgerBlock, TxKind};
pub use orchestrator::{rank_candidates, Candidate, OrchestratorParams, OrchestratorPlugin};
pub use soa::{SoaParams, SoaPlugin};

pub const KNOWN_PLUGINS: [&str; 3] = ["soa", "orchestrator", "federation"];

pub(crate) fn default_vnf() -> VnfId {
    VnfId::from("v_d")
}

/// Typed parameters of a reference plug-in.
#[derive(Debug, Clone, PartialEq)]
pub enum PluginSpec {
    Soa(SoaParams),
    Orchestrator(OrchestratorParams),
    Federation(FederationParams),
}

/// A node referenced by a parameter: field name, id, required kind.
pub type NodeRef<'a> = (&'static str, &'a NodeId, NodeKind);

impl PluginSpec {
    pub fn parse(name: &str, params: &toml::Table) -> Result<Self, String> {
        let table = params.clone();
        let spec = match name {
            "soa" => PluginSpec::Soa(table.try_into().map_err(|e: toml::de::Error| e.message().to_owned())?),
            "orchestrator" => {
                PluginSpec::Orchestrator(table.try_into().map_err(|e: toml::de::Error| e.message().to_owned())?)
            }
            "federation" => {
                PluginSpec::Federation(table.try_into().map_err(|e: toml::de::Error| e.message().to_owned())?)
            }
            other => {
                return Err(format!(
                    "unknown plug-in '{other}' (known: {})",
                    KNOWN_PLUGINS.join(", ")
                ))
            }
        };
        Ok(spec)
    }

    pub fn node_refs(&self) -> Vec<NodeRef<'_>> {
        match self {
            PluginSpec::Soa(p) => vec![("host", &p.host, NodeKind::Server)],
            PluginSpec::Orchestrator(p) => p
                .robot
                .iter()
                .map(|r| ("robot", r, NodeKind::Robot))
                .collect(),
            PluginSpec::Federation(p) => vec![
                ("robot", &p.robot, NodeKind::Robot),
                ("candidate_ru", &p.candidate_ru, NodeKind::RadioUnit),
            ],
        }
    }

    pub fn vnf_refs(&self) -> Vec<(&'static str, &VnfId)> {
        match self {
            PluginSpec::Soa(p) => vec![("vnf", &p.vnf)],
            PluginSpec::Orchestrator(p) => vec![("vnf", &p.vnf)],
            PluginSpec::Federation(p) => vec![("vap", &p.vap)],
        }
    }

    pub fn build(self) -> Result<Box<dyn Plugin>, String> {
        Ok(match self {
            PluginSpec::Soa(p) => Box::new(SoaPlugin::new(p)?),
            PluginSpec::Orchestrator(p) => Box::new(OrchestratorPlugin::new(p)?),
            PluginSpec::Federation(p) => Box::new(FederationPlugin::new(p)?),
        })
    }
}
