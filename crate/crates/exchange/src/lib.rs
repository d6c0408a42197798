//! Deadline-driven ad exchange over newline-delimited JSON on TCP.
//!
//! The exchange accepts `ad_request` messages from publishers, fans a
//! `bid_request` out to every enabled network endpoint, clears the bids that
//! arrive in time with the OSP rule and sends the clearing price to the winner
//! only. Every request is appended to an [`AuctionLog`].

pub mod callout;
pub mod config;
pub mod log;
pub mod mock;
pub mod service;
pub mod wire;

use thiserror::Error;

pub use callout::{callout, CalloutMessage, CalloutReply, CalloutResult};
pub use config::{ExchangeConfig, NetworkEndpoint, DEFAULT_DEADLINE_MS, DEFAULT_GRACE_MS};
pub use log::{
    read_log, AuctionLog, AuctionLogRecord, ExchangeStats, NetworkLogEntry, NetworkStats,
    ResponseStatus,
};
pub use mock::{MockHandle, MockNetwork, MockRecord};
pub use service::{Exchange, IdentityRedaction, RedactionHook};

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Auction(#[from] osp_core::AuctionError),
}
