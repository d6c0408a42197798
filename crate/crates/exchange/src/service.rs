use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use osp_core::{run_osp_auction, AuctionOutcome, AuctionRequest, MoneyMicros, TieRule};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::time::Instant;

use crate::callout::{callout_from, CalloutMessage, CalloutReply, CalloutResult};
use crate::config::{ExchangeConfig, NetworkEndpoint};
use crate::log::{AuctionLog, AuctionLogRecord, ExchangeStats, NetworkLogEntry, ResponseStatus};
use crate::wire::{
    write_line, AdRequest, AdResponse, ExchangeReply, NetworkStatsMessage, PublisherMessage,
    StatsMessage, WinNotice,
};
use crate::ExchangeError;

/// Maps what the publisher sent about the page and user to what networks see.
pub trait RedactionHook: Send + Sync {
    fn page_info(&self, page: &str) -> String {
        page.to_string()
    }

    fn user_info(&self, user: &[u8]) -> String {
        String::from_utf8_lossy(user).into_owned()
    }
}

/// Passes page and user information through unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityRedaction;

impl RedactionHook for IdentityRedaction {}

pub struct Exchange {
    config: ExchangeConfig,
    log: AuctionLog,
    redaction: Box<dyn RedactionHook>,
    pending: Arc<AtomicUsize>,
}

/// Counts an auction as pending until dropped. With busy polling on, the
/// first pending auction starts a task that keeps the runtime worker from
/// parking until none are left, so deadline timers are not subject to
/// wake-from-idle latency.
struct PendingGuard(Arc<AtomicUsize>);

impl PendingGuard {
    fn enter(pending: &Arc<AtomicUsize>, busy_poll: bool) -> Self {
        if pending.fetch_add(1, Ordering::AcqRel) == 0 && busy_poll {
            let pending = Arc::clone(pending);
            tokio::spawn(async move {
                while pending.load(Ordering::Acquire) > 0 {
                    tokio::task::yield_now().await;
                }
            });
        }
        PendingGuard(Arc::clone(pending))
    }
}

impl Drop for PendingGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::AcqRel);
    }
}

impl std::fmt::Debug for Exchange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exchange")
            .field("config", &self.config)
            .field("logged", &self.log.len())
            .finish()
    }
}

fn log_entry(reply: &CalloutReply, reserve: MoneyMicros) -> NetworkLogEntry {
    let status = |s| NetworkLogEntry::status_only(reply.network_id.clone(), s);
    let mut entry = match &reply.result {
        CalloutResult::Bid(bid) => NetworkLogEntry {
            mandatory_micros: Some(bid.mandatory.micros()),
            optional_micros: Some(bid.optional.micros()),
            creative_id: Some(bid.creative_id.clone()),
            below_reserve: bid.mandatory < reserve,
            ..status(ResponseStatus::Bid)
        },
        CalloutResult::Decline => status(ResponseStatus::Declined),
        CalloutResult::Timeout => status(ResponseStatus::TimedOut),
        CalloutResult::Invalid(why) => NetworkLogEntry {
            detail: Some(why.clone()),
            ..status(ResponseStatus::Invalid)
        },
        CalloutResult::TransportError(why) => NetworkLogEntry {
            detail: Some(why.clone()),
            ..status(ResponseStatus::TransportError)
        },
    };
    entry.duplicates = reply.duplicates;
    entry
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Exchange {
    /// Validates `config` and opens the log file when one is configured.
    pub fn new(config: ExchangeConfig) -> Result<Self, ExchangeError> {
        config.validate()?;
        let log = match &config.log_path {
            Some(path) => AuctionLog::with_file(path)?,
            None => AuctionLog::in_memory(),
        };
        Ok(Exchange {
            config,
            log,
            redaction: Box::new(IdentityRedaction),
            pending: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn with_redaction(mut self, hook: impl RedactionHook + 'static) -> Self {
        self.redaction = Box::new(hook);
        self
    }

    pub fn config(&self) -> &ExchangeConfig {
        &self.config
    }

    pub fn log(&self) -> &AuctionLog {
        &self.log
    }

    /// Runs one auction end to end against the configured registry and deadline.
    pub async fn handle_publisher_request(
        &self,
        request: &AuctionRequest,
    ) -> Result<AdResponse, ExchangeError> {
        self.handle_with_registry(request, &self.config.endpoints, self.config.deadline_ms)
            .await
    }

    /// Callout, clearing, win notice and logging for one request, using an
    /// explicit registry and deadline. Registry ids are assumed unique.
    pub async fn handle_with_registry(
        &self,
        request: &AuctionRequest,
        registry: &[NetworkEndpoint],
        deadline_ms: u64,
    ) -> Result<AdResponse, ExchangeError> {
        if deadline_ms == 0 {
            return Err(ExchangeError::Config("deadline_ms must be positive".into()));
        }
        let start = Instant::now();
        let _pending = PendingGuard::enter(&self.pending, self.config.busy_poll);
        let timestamp_ms = now_ms();
        let message = CalloutMessage {
            request_id: request.request_id.to_string(),
            page_info: self.redaction.page_info(request.page_id.as_str()),
            user_info: self.redaction.user_info(&request.user_info),
            deadline_ms,
        };

        let replies = if registry.iter().any(|e| e.enabled) {
            callout_from(registry, &message, start).await
        } else {
            Vec::new()
        };

        let networks: Vec<NetworkLogEntry> = replies
            .iter()
            .map(|r| log_entry(r, request.reserve))
            .collect();
        let bids: Vec<_> = replies
            .iter()
            .filter_map(|r| match &r.result {
                CalloutResult::Bid(b) => Some(b.clone()),
                _ => None,
            })
            .collect();
        let outcome = run_osp_auction(&bids, request.reserve, TieRule::LowestNetworkId)?;

        let response = match &outcome {
            AuctionOutcome::Filled {
                creative_id,
                clearing_price,
                ..
            } => AdResponse {
                request_id: message.request_id.clone(),
                filled: true,
                creative_id: Some(creative_id.to_string()),
                clearing_price_micros: self
                    .config
                    .include_price_in_publisher_response
                    .then(|| clearing_price.micros()),
            },
            AuctionOutcome::Unfilled => AdResponse {
                request_id: message.request_id.clone(),
                filled: false,
                creative_id: None,
                clearing_price_micros: None,
            },
        };

        if let AuctionOutcome::Filled {
            winner_network_id,
            clearing_price,
            ..
        } = &outcome
        {
            let channel = replies
                .into_iter()
                .find(|r| &r.network_id == winner_network_id)
                .and_then(|r| r.channel);
            if let Some(channel) = channel {
                let notice = WinNotice {
                    request_id: message.request_id.clone(),
                    clearing_price_micros: clearing_price.micros(),
                };
                // a lost win notice does not undo the sale
                tokio::spawn(async move {
                    let _ = channel.send_win(notice).await;
                });
            }
        }
        // loser connections were dropped along with `replies`

        let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;

        self.log.append(AuctionLogRecord {
            request_id: message.request_id,
            timestamp_ms,
            reserve_micros: request.reserve.micros(),
            networks,
            outcome,
            elapsed_ms,
        })?;
        Ok(response)
    }

    pub fn query_stats(&self) -> ExchangeStats {
        self.log.stats()
    }

    fn stats_message(&self) -> StatsMessage {
        let stats = self.query_stats();
        StatsMessage {
            auctions_handled: stats.auctions_handled,
            filled: stats.filled,
            fill_rate: stats.fill_rate,
            mean_elapsed_ms: stats.mean_elapsed_ms,
            per_network: stats
                .per_network
                .into_iter()
                .map(|(id, s)| {
                    (
                        id.to_string(),
                        NetworkStatsMessage {
                            requests: s.requests,
                            responses: s.responses,
                            response_rate: s.response_rate,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Binds the configured listen address and serves until the task is dropped.
    pub async fn run(self: Arc<Self>) -> Result<(), ExchangeError> {
        let listener = TcpListener::bind(&self.config.listen).await?;
        self.serve(listener).await
    }

    /// Accepts publisher connections on `listener`. Each connection may carry
    /// many requests; replies are written as auctions finish, not in order.
    pub async fn serve(self: Arc<Self>, listener: TcpListener) -> Result<(), ExchangeError> {
        loop {
            let (stream, _) = listener.accept().await?;
            let exchange = Arc::clone(&self);
            tokio::spawn(async move {
                exchange.serve_connection(stream).await;
            });
        }
    }

    async fn serve_connection(self: Arc<Self>, stream: TcpStream) {
        let _ = stream.set_nodelay(true);
        let (read, mut write) = stream.into_split();
        let (tx, mut rx) = mpsc::unbounded_channel::<ExchangeReply>();
        let writer = tokio::spawn(async move {
            while let Some(reply) = rx.recv().await {
                if write_line(&mut write, &reply).await.is_err() {
                    break;
                }
            }
        });

        let mut lines = BufReader::new(read).lines();
        while let Ok(Some(line)) = lines.next_line().await {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<PublisherMessage>(&line) {
                Ok(PublisherMessage::AdRequest(ad)) => {
                    let exchange = Arc::clone(&self);
                    let tx = tx.clone();
                    tokio::spawn(async move {
                        let reply = match exchange
                            .handle_publisher_request(&auction_request(ad))
                            .await
                        {
                            Ok(response) => ExchangeReply::AdResponse(response),
                            Err(e) => ExchangeReply::Error {
                                message: e.to_string(),
                            },
                        };
                        let _ = tx.send(reply);
                    });
                }
                Ok(PublisherMessage::StatsRequest) => {
                    let _ = tx.send(ExchangeReply::Stats(self.stats_message()));
                }
                Err(e) => {
                    let _ = tx.send(ExchangeReply::Error {
                        message: format!("malformed request: {e}"),
                    });
                }
            }
        }
        drop(tx);
        let _ = writer.await;
    }
}

fn auction_request(ad: AdRequest) -> AuctionRequest {
    AuctionRequest {
        request_id: ad.request_id.into(),
        page_id: ad.page.into(),
        user_info: ad.user.into_bytes(),
        reserve: MoneyMicros::from_micros(ad.reserve_micros),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn pending_guard_counts_and_spinner_stops() {
        let pending = Arc::new(AtomicUsize::new(0));
        let a = PendingGuard::enter(&pending, true);
        let b = PendingGuard::enter(&pending, true);
        assert_eq!(pending.load(Ordering::Acquire), 2);
        // the spinner yields, so timers still run on this single-threaded runtime
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        drop(a);
        drop(b);
        assert_eq!(pending.load(Ordering::Acquire), 0);
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
}
