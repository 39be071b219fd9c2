//! Run summaries and output files: the chain, the event log, and the metric
//! report, all in the canonical encoding.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crypto::Digest;
use crate::encoding::canonical_encode;
use crate::ledger::block::Chain;
use crate::ledger::tx::TxPayload;
use crate::simnet::config::{InvalidConfig, ScenarioConfig};
use crate::simnet::event::EventRecord;
use crate::simnet::world::World;

/// Metrics of one scenario run. Every figure is recomputable from the chain
/// file and the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub rounds: u64,
    pub chain_length: usize,
    pub final_tip: Option<Digest>,
    pub total_work: u64,
    pub tx_counts: BTreeMap<String, u64>,
    pub uploads_packaged: u64,
    pub uploads_confirmed: u64,
    pub upload_latency_mean: f64,
    pub upload_latency_max: u64,
    pub grants: u64,
    pub denials: u64,
    pub purged_records: u64,
    pub alerts_raised: u64,
    pub alerts_delivered: u64,
    pub records_logged: u64,
    pub records_rejected: u64,
    pub total_hash_attempts: u64,
    pub messages_sent: u64,
    pub messages_dropped: u64,
}

/// Everything a finished run produces.
pub struct SimReport {
    pub chain: Chain,
    pub events: Vec<EventRecord>,
    pub summary: ReportSummary,
}

impl SimReport {
    pub fn from_world(world: &World) -> SimReport {
        let chain = world.canonical_chain.clone();
        let mut tx_counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut latencies: Vec<u64> = Vec::new();
        for (header, tx) in chain.iter_txs() {
            *tx_counts.entry(tx.kind().as_str().to_string()).or_insert(0) += 1;
            if matches!(tx.payload, TxPayload::DataUpload(_)) {
                latencies.push(header.timestamp.saturating_sub(tx.timestamp));
            }
        }
        let uploads_confirmed = latencies.len() as u64;
        let upload_latency_mean = if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().sum::<u64>() as f64 / latencies.len() as f64
        };
        let upload_latency_max = latencies.iter().copied().max().unwrap_or(0);
        let summary = ReportSummary {
            rounds: world.round,
            chain_length: chain.len(),
            final_tip: chain.tip_hash(),
            total_work: u64::try_from(chain.work()).unwrap_or(u64::MAX),
            tx_counts,
            uploads_packaged: world.uploads_packaged,
            uploads_confirmed,
            upload_latency_mean,
            upload_latency_max,
            grants: world.grants,
            denials: world.denials,
            purged_records: world.purged_records,
            alerts_raised: world.alerts_raised,
            alerts_delivered: world.alerts_delivered,
            records_logged: world.records_logged,
            records_rejected: world.records_rejected,
            total_hash_attempts: world.total_hash_attempts,
            messages_sent: world.messages_sent,
            messages_dropped: world.messages_dropped,
        };
        SimReport {
            chain,
            events: world.events.clone(),
            summary,
        }
    }

    /// Serializes the event log: one canonical JSON record per line.
    pub fn events_ndjson(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for record in &self.events {
            out.extend_from_slice(&canonical_encode(record));
            out.push(b'\n');
        }
        out
    }

    /// Writes `chain.ndjson`, `events.ndjson`, and `report.json` into a
    /// directory.
    pub fn write_outputs(&self, out_dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let mut chain_file = std::fs::File::create(out_dir.join("chain.ndjson"))?;
        chain_file.write_all(&crate::chainfile::chain_to_ndjson(&self.chain))?;
        let mut events_file = std::fs::File::create(out_dir.join("events.ndjson"))?;
        events_file.write_all(&self.events_ndjson())?;
        let mut report_file = std::fs::File::create(out_dir.join("report.json"))?;
        report_file.write_all(&canonical_encode(&self.summary))?;
        report_file.write_all(b"\n")?;
        Ok(())
    }
}

/// Initializes a world from the configuration, steps it for the configured
/// number of rounds, and summarizes the outcome.
pub fn run_scenario(config: ScenarioConfig) -> Result<SimReport, InvalidConfig> {
    let world = World::run(config)?;
    Ok(SimReport::from_world(&world))
}
