//! Newline-delimited JSON messages exchanged with publishers and networks.
//!
//! Every message is one JSON object on one line with a `type` tag:
//!
//! | direction            | `type`          |
//! |----------------------|-----------------|
//! | publisher → exchange | `ad_request`, `stats_request` |
//! | exchange → network   | `bid_request`   |
//! | network → exchange   | `bid`, `decline` |
//! | exchange → publisher | `ad_response`, `stats`, `error` |
//! | exchange → winner    | `win`           |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncWrite, AsyncWriteExt};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdRequest {
    pub request_id: String,
    pub page: String,
    pub user: String,
    pub reserve_micros: u64,
    /// Reserved for a shared-secret check; not enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidRequest {
    pub request_id: String,
    pub page_info: String,
    pub user_info: String,
    pub deadline_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdResponse {
    pub request_id: String,
    pub filled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creative_id: Option<String>,
    /// Only present when the exchange is configured to disclose prices to publishers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearing_price_micros: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinNotice {
    pub request_id: String,
    pub clearing_price_micros: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStatsMessage {
    pub requests: u64,
    pub responses: u64,
    pub response_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsMessage {
    pub auctions_handled: u64,
    pub filled: u64,
    pub fill_rate: f64,
    pub mean_elapsed_ms: f64,
    pub per_network: BTreeMap<String, NetworkStatsMessage>,
}

/// Messages the exchange accepts from publishers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PublisherMessage {
    AdRequest(AdRequest),
    StatsRequest,
}

/// Messages the exchange sends to publishers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExchangeReply {
    AdResponse(AdResponse),
    Stats(StatsMessage),
    Error { message: String },
}

/// Messages the exchange sends to networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ToNetwork {
    BidRequest(BidRequest),
    Win(WinNotice),
}

/// A network's answer to a bid request. Amounts are signed on the wire so
/// that negative values reach validation instead of failing to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BidResponse {
    Bid {
        request_id: String,
        mandatory_micros: i64,
        optional_micros: i64,
        creative_id: String,
    },
    Decline {
        request_id: String,
    },
}

impl BidResponse {
    pub fn request_id(&self) -> &str {
        match self {
            BidResponse::Bid { request_id, .. } | BidResponse::Decline { request_id } => request_id,
        }
    }
}

/// Serializes `msg` as one line.
pub fn encode_line<T: Serialize>(msg: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(msg).expect("wire messages always serialize");
    line.push(b'\n');
    line
}

pub async fn write_line<W, T>(w: &mut W, msg: &T) -> std::io::Result<()>
where
    W: AsyncWrite + Unpin,
    T: Serialize,
{
    w.write_all(&encode_line(msg)).await?;
    w.flush().await
}
