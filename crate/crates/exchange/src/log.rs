//! Append-only auction log, one JSON object per line.
//!
//! Record fields:
//!
//! * `request_id`, `timestamp_ms` (Unix epoch), `reserve_micros`
//! * `networks`: one entry per enabled endpoint with `network_id`, `status`
//!   (`bid`, `declined`, `timed_out`, `invalid`, `transport_error`) and, for
//!   bids, `mandatory_micros`, `optional_micros`, `creative_id`, plus
//!   `below_reserve` when the bid did not reach the reserve. `duplicates`
//!   counts extra responses after the first valid one; `detail` explains
//!   invalid or transport failures.
//! * `outcome`: `{"status":"filled","winner_network_id",...,"clearing_price_micros"}`
//!   or `{"status":"unfilled"}`
//! * `elapsed_ms`: time from receiving the request to answering it

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use osp_core::{
    run_osp_auction, AuctionError, AuctionOutcome, CreativeId, MoneyMicros, NetworkBid, NetworkId,
    TieRule,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Bid,
    Declined,
    TimedOut,
    Invalid,
    TransportError,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkLogEntry {
    pub network_id: NetworkId,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mandatory_micros: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optional_micros: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creative_id: Option<CreativeId>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub below_reserve: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub duplicates: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl NetworkLogEntry {
    pub fn status_only(network_id: NetworkId, status: ResponseStatus) -> Self {
        NetworkLogEntry {
            network_id,
            status,
            mandatory_micros: None,
            optional_micros: None,
            creative_id: None,
            below_reserve: false,
            duplicates: 0,
            detail: None,
        }
    }

    /// The bid this entry carries, if it survived validation.
    pub fn surviving_bid(&self) -> Option<NetworkBid> {
        if self.status != ResponseStatus::Bid {
            return None;
        }
        Some(NetworkBid {
            network_id: self.network_id.clone(),
            mandatory: MoneyMicros::from_micros(self.mandatory_micros?),
            optional: MoneyMicros::from_micros(self.optional_micros?),
            creative_id: self.creative_id.clone()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionLogRecord {
    pub request_id: String,
    pub timestamp_ms: u64,
    pub reserve_micros: u64,
    pub networks: Vec<NetworkLogEntry>,
    pub outcome: AuctionOutcome,
    pub elapsed_ms: f64,
}

impl AuctionLogRecord {
    pub fn surviving_bids(&self) -> Vec<NetworkBid> {
        self.networks
            .iter()
            .filter_map(NetworkLogEntry::surviving_bid)
            .collect()
    }

    /// Re-clears the logged surviving bids.
    pub fn replay(&self) -> Result<AuctionOutcome, AuctionError> {
        run_osp_auction(
            &self.surviving_bids(),
            MoneyMicros::from_micros(self.reserve_micros),
            TieRule::LowestNetworkId,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkStats {
    pub requests: u64,
    /// Bids plus declines received in time.
    pub responses: u64,
    pub bids: u64,
    pub timeouts: u64,
    pub response_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangeStats {
    pub auctions_handled: u64,
    pub filled: u64,
    pub fill_rate: f64,
    pub mean_elapsed_ms: f64,
    pub per_network: BTreeMap<NetworkId, NetworkStats>,
}

impl ExchangeStats {
    pub fn from_records(records: &[AuctionLogRecord]) -> Self {
        let mut stats = ExchangeStats {
            auctions_handled: records.len() as u64,
            ..Default::default()
        };
        let mut elapsed = 0.0;
        for r in records {
            if r.outcome.is_filled() {
                stats.filled += 1;
            }
            elapsed += r.elapsed_ms;
            for entry in &r.networks {
                let s = stats
                    .per_network
                    .entry(entry.network_id.clone())
                    .or_default();
                s.requests += 1;
                match entry.status {
                    ResponseStatus::Bid => {
                        s.bids += 1;
                        s.responses += 1;
                    }
                    ResponseStatus::Declined => s.responses += 1,
                    ResponseStatus::TimedOut => s.timeouts += 1,
                    ResponseStatus::Invalid | ResponseStatus::TransportError => {}
                }
            }
        }
        if stats.auctions_handled > 0 {
            stats.fill_rate = stats.filled as f64 / stats.auctions_handled as f64;
            stats.mean_elapsed_ms = elapsed / stats.auctions_handled as f64;
        }
        for s in stats.per_network.values_mut() {
            s.response_rate = s.responses as f64 / s.requests as f64;
        }
        stats
    }
}

struct LogState {
    records: Vec<AuctionLogRecord>,
    file: Option<BufWriter<File>>,
}

/// Serialized append stream of auction records, mirrored to a JSON-lines file
/// when a path is given.
pub struct AuctionLog {
    state: Mutex<LogState>,
}

impl AuctionLog {
    pub fn in_memory() -> Self {
        AuctionLog {
            state: Mutex::new(LogState {
                records: Vec::new(),
                file: None,
            }),
        }
    }

    /// Appends to `path`, creating it if needed.
    pub fn with_file(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuctionLog {
            state: Mutex::new(LogState {
                records: Vec::new(),
                file: Some(BufWriter::new(file)),
            }),
        })
    }

    pub fn append(&self, record: AuctionLogRecord) -> io::Result<()> {
        let mut state = self.state.lock().expect("log mutex poisoned");
        if let Some(file) = state.file.as_mut() {
            serde_json::to_writer(&mut *file, &record)?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
        state.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("log mutex poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<AuctionLogRecord> {
        self.state
            .lock()
            .expect("log mutex poisoned")
            .records
            .clone()
    }

    pub fn stats(&self) -> ExchangeStats {
        let state = self.state.lock().expect("log mutex poisoned");
        ExchangeStats::from_records(&state.records)
    }
}

/// Reads every record from a JSON-lines log file.
pub fn read_log(path: &Path) -> io::Result<Vec<AuctionLogRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(records)
}
