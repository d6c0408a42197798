//! Concurrent bid collection from network endpoints under a shared deadline.

use std::time::Duration;

use osp_core::{validate_network_bid, MoneyMicros, NetworkBid, NetworkId};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::task::JoinSet;
use tokio::time::{timeout_at, Instant};

use crate::config::NetworkEndpoint;
use crate::wire::{encode_line, write_line, BidRequest, BidResponse, ToNetwork, WinNotice};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalloutMessage {
    pub request_id: String,
    pub page_info: String,
    pub user_info: String,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalloutResult {
    Bid(NetworkBid),
    Decline,
    Timeout,
    /// The response parsed but was unusable (`o > b`, negative amounts, wrong request id).
    Invalid(String),
    /// Connection failure, early close or a message that is not valid JSON.
    TransportError(String),
}

/// One endpoint's answer. For bids the connection stays open so the win
/// notice can follow on it.
#[derive(Debug)]
pub struct CalloutReply {
    pub network_id: NetworkId,
    pub result: CalloutResult,
    /// Extra responses seen after the first valid one.
    pub duplicates: u32,
    pub(crate) channel: Option<NetworkChannel>,
}

#[derive(Debug)]
pub(crate) struct NetworkChannel {
    _reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
}

impl NetworkChannel {
    pub(crate) async fn send_win(mut self, notice: WinNotice) -> std::io::Result<()> {
        write_line(&mut self.writer, &ToNetwork::Win(notice)).await?;
        self.writer.shutdown().await
    }
}

fn parse_bid(network_id: &NetworkId, request_id: &str, response: BidResponse) -> CalloutResult {
    if response.request_id() != request_id {
        return CalloutResult::Invalid(format!(
            "response for request {} while waiting for {request_id}",
            response.request_id()
        ));
    }
    match response {
        BidResponse::Decline { .. } => CalloutResult::Decline,
        BidResponse::Bid {
            mandatory_micros,
            optional_micros,
            creative_id,
            ..
        } => {
            let (Ok(mandatory), Ok(optional)) = (
                MoneyMicros::try_from(mandatory_micros),
                MoneyMicros::try_from(optional_micros),
            ) else {
                return CalloutResult::Invalid("negative bid amount".into());
            };
            let bid = NetworkBid::new(network_id.clone(), mandatory, optional, creative_id);
            match validate_network_bid(&bid) {
                Ok(()) => CalloutResult::Bid(bid),
                Err(e) => CalloutResult::Invalid(e.to_string()),
            }
        }
    }
}

fn count_buffered_lines(reader: &BufReader<OwnedReadHalf>) -> u32 {
    reader
        .buffer()
        .split(|&b| b == b'\n')
        .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
        .count() as u32
}

async fn call_one(
    endpoint: NetworkEndpoint,
    request_line: Vec<u8>,
    request_id: String,
    deadline: Instant,
) -> CalloutReply {
    let network_id = endpoint.network_id.clone();
    let mut last_invalid: Option<String> = None;

    let exchange = async {
        let stream = TcpStream::connect(&endpoint.address)
            .await
            .map_err(|e| format!("connect {}: {e}", endpoint.address))?;
        let _ = stream.set_nodelay(true);
        let (read, mut writer) = stream.into_split();
        writer
            .write_all(&request_line)
            .await
            .map_err(|e| format!("send: {e}"))?;
        let mut reader = BufReader::new(read);
        let mut line = String::new();
        loop {
            line.clear();
            let read = reader
                .read_line(&mut line)
                .await
                .map_err(|e| format!("receive: {e}"))?;
            if read == 0 {
                return Err("connection closed before a valid response".to_string());
            }
            if line.trim().is_empty() {
                continue;
            }
            let response: BidResponse =
                serde_json::from_str(&line).map_err(|e| format!("malformed response: {e}"))?;
            match parse_bid(&network_id, &request_id, response) {
                CalloutResult::Invalid(reason) => last_invalid = Some(reason),
                valid => {
                    let duplicates = count_buffered_lines(&reader);
                    let channel = matches!(valid, CalloutResult::Bid(_)).then(|| NetworkChannel {
                        _reader: reader,
                        writer,
                    });
                    return Ok((valid, duplicates, channel));
                }
            }
        }
    };

    let (result, duplicates, channel) = match timeout_at(deadline, exchange).await {
        Ok(Ok(done)) => done,
        Ok(Err(reason)) => match last_invalid.take() {
            Some(invalid) => (CalloutResult::Invalid(invalid), 0, None),
            None => (CalloutResult::TransportError(reason), 0, None),
        },
        Err(_) => match last_invalid.take() {
            Some(invalid) => (CalloutResult::Invalid(invalid), 0, None),
            None => (CalloutResult::Timeout, 0, None),
        },
    };
    CalloutReply {
        network_id,
        result,
        duplicates,
        channel,
    }
}

/// Sends `message` to every enabled endpoint at once and waits until each has
/// answered or the deadline (measured from `start`) has passed. Replies
/// follow the order of `endpoints`, disabled ones omitted.
pub async fn callout_from(
    endpoints: &[NetworkEndpoint],
    message: &CalloutMessage,
    start: Instant,
) -> Vec<CalloutReply> {
    let deadline = start + Duration::from_millis(message.deadline_ms);
    let line = encode_line(&ToNetwork::BidRequest(BidRequest {
        request_id: message.request_id.clone(),
        page_info: message.page_info.clone(),
        user_info: message.user_info.clone(),
        deadline_ms: message.deadline_ms,
        token: None,
    }));

    let enabled: Vec<&NetworkEndpoint> = endpoints.iter().filter(|e| e.enabled).collect();
    let mut tasks = JoinSet::new();
    for (slot, endpoint) in enabled.iter().enumerate() {
        let fut = call_one(
            (*endpoint).clone(),
            line.clone(),
            message.request_id.clone(),
            deadline,
        );
        tasks.spawn(async move { (slot, fut.await) });
    }

    let mut replies: Vec<Option<CalloutReply>> = enabled.iter().map(|_| None).collect();
    while let Some(joined) = tasks.join_next().await {
        // a panicked task leaves its slot empty and is reported as a transport failure
        if let Ok((slot, reply)) = joined {
            replies[slot] = Some(reply);
        }
    }
    replies
        .into_iter()
        .zip(enabled)
        .map(|(reply, endpoint)| {
            reply.unwrap_or_else(|| CalloutReply {
                network_id: endpoint.network_id.clone(),
                result: CalloutResult::TransportError("callout task failed".into()),
                duplicates: 0,
                channel: None,
            })
        })
        .collect()
}

/// [`callout_from`] starting the deadline clock now.
pub async fn callout(endpoints: &[NetworkEndpoint], message: &CalloutMessage) -> Vec<CalloutReply> {
    callout_from(endpoints, message, Instant::now()).await
}
