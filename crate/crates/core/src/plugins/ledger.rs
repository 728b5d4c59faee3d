// SPDX-License-Identifier: Apache-2.0

//! Shared append-only ledger with fixed-interval block closing.

use std::collections::BTreeMap;
use std::fmt;

use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TxKind {
    Request,
    Accept,
    DeployDone,
    AttachDone,
}

impl TxKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TxKind::Request => "request",
            TxKind::Accept => "accept",
            TxKind::DeployDone => "deploy_done",
            TxKind::AttachDone => "attach_done",
        }
    }
}

impl fmt::Display for TxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FederationTx {
    pub kind: TxKind,
    pub domain: String,
    pub payload: BTreeMap<String, String>,
    pub submitted_at: SimTime,
}

impl FederationTx {
    pub fn new(kind: TxKind, domain: impl Into<String>) -> Self {
        Self {
            kind,
            domain: domain.into(),
            payload: BTreeMap::new(),
            submitted_at: 0,
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.payload.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn payload_string(&self) -> String {
        self.payload
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerBlock {
    pub index: u64,
    pub t_ms: SimTime,
    pub txs: Vec<FederationTx>,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    interval_ms: SimTime,
    chain: Vec<LedgerBlock>,
    mempool: Vec<FederationTx>,
    next_close: SimTime,
}

impl Ledger {
    pub fn new(interval_ms: SimTime) -> Self {
        assert!(interval_ms > 0, "block interval must be positive");
        Self {
            interval_ms,
            chain: Vec::new(),
            mempool: Vec::new(),
            next_close: interval_ms,
        }
    }

    pub fn interval_ms(&self) -> SimTime {
        self.interval_ms
    }

    /// Close time of the first block strictly after `t`.
    pub fn next_block_after(&self, t: SimTime) -> SimTime {
        (t / self.interval_ms + 1) * self.interval_ms
    }

    /// Queues `tx`; it lands in the first block closing strictly after `at`.
    pub fn submit(&mut self, at: SimTime, mut tx: FederationTx) {
        tx.submitted_at = at;
        self.mempool.push(tx);
    }

    /// Closes every block due at or before `now` and returns them.
    pub fn advance(&mut self, now: SimTime) -> Vec<LedgerBlock> {
        let mut closed = Vec::new();
        while self.next_close <= now {
            let close = self.next_close;
            let (txs, rest): (Vec<_>, Vec<_>) = self.mempool.drain(..).partition(|tx| tx.submitted_at < close);
            self.mempool = rest;
            let block = LedgerBlock {
                index: self.chain.len() as u64,
                t_ms: close,
                txs,
            };
            self.chain.push(block.clone());
            closed.push(block);
            self.next_close += self.interval_ms;
        }
        closed
    }

    pub fn chain(&self) -> &[LedgerBlock] {
        &self.chain
    }
}
