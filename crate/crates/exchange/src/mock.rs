//! A network endpoint that bids from a static book under a fixed policy.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use osp_core::{
    form_exchange_bid, settle_internal, AdvertiserBook, BidDecision, MoneyMicros, NetworkBid,
    NetworkPolicy, Settlement,
};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

use crate::wire::{write_line, BidResponse, ToNetwork};

/// What the mock saw and did for one bid request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockRecord {
    pub request_id: String,
    pub bid: Option<NetworkBid>,
    /// Clearing price from the win notice, if one arrived.
    pub clearing_price: Option<MoneyMicros>,
    pub settlement: Option<Settlement>,
    /// Every line received on the connection, verbatim.
    pub received: Vec<String>,
}

impl MockRecord {
    pub fn won(&self) -> bool {
        self.clearing_price.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct MockNetwork {
    book: AdvertiserBook,
    policy: NetworkPolicy,
    latency: Duration,
}

/// A running mock. Stops when dropped.
#[derive(Debug)]
pub struct MockHandle {
    pub addr: SocketAddr,
    records: Arc<Mutex<Vec<MockRecord>>>,
    task: JoinHandle<()>,
}

impl MockHandle {
    pub fn records(&self) -> Vec<MockRecord> {
        self.records.lock().expect("mock mutex poisoned").clone()
    }
}

impl Drop for MockHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

impl MockNetwork {
    pub fn new(book: AdvertiserBook, policy: NetworkPolicy) -> Self {
        MockNetwork {
            book,
            policy,
            latency: Duration::ZERO,
        }
    }

    /// Delay before answering each bid request.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn book(&self) -> &AdvertiserBook {
        &self.book
    }

    pub async fn spawn(self, listen: &str) -> std::io::Result<MockHandle> {
        let listener = TcpListener::bind(listen).await?;
        let addr = listener.local_addr()?;
        let records = Arc::new(Mutex::new(Vec::new()));
        let task = tokio::spawn(Arc::new(self).accept_loop(listener, Arc::clone(&records)));
        Ok(MockHandle {
            addr,
            records,
            task,
        })
    }

    /// Serves on `listener` forever, e.g. from the command line.
    pub async fn serve(self, listener: TcpListener) {
        Arc::new(self)
            .accept_loop(listener, Arc::new(Mutex::new(Vec::new())))
            .await
    }

    async fn accept_loop(
        self: Arc<Self>,
        listener: TcpListener,
        records: Arc<Mutex<Vec<MockRecord>>>,
    ) {
        while let Ok((stream, _)) = listener.accept().await {
            let mock = Arc::clone(&self);
            let records = Arc::clone(&records);
            tokio::spawn(async move {
                if let Some(record) = mock.answer(stream).await {
                    records.lock().expect("mock mutex poisoned").push(record);
                }
            });
        }
    }

    async fn answer(&self, stream: TcpStream) -> Option<MockRecord> {
        let _ = stream.set_nodelay(true);
        let (read, mut write) = stream.into_split();
        let mut lines = BufReader::new(read).lines();
        let first = lines.next_line().await.ok()??;
        let ToNetwork::BidRequest(request) = serde_json::from_str(&first).ok()? else {
            return None;
        };
        let mut record = MockRecord {
            request_id: request.request_id.clone(),
            bid: None,
            clearing_price: None,
            settlement: None,
            received: vec![first],
        };

        tokio::time::sleep(self.latency).await;
        let decision = form_exchange_bid(&self.book, self.policy);
        let response = match &decision {
            BidDecision::Bid(bid) => BidResponse::Bid {
                request_id: request.request_id.clone(),
                mandatory_micros: bid.mandatory.micros() as i64,
                optional_micros: bid.optional.micros() as i64,
                creative_id: bid.creative_id.to_string(),
            },
            BidDecision::Decline => BidResponse::Decline {
                request_id: request.request_id.clone(),
            },
        };
        if write_line(&mut write, &response).await.is_err() {
            return Some(record);
        }
        record.bid = decision.into_bid();
        if record.bid.is_none() {
            return Some(record);
        }

        // the exchange either sends a win notice or closes the connection
        while let Ok(Some(line)) = lines.next_line().await {
            if let Ok(ToNetwork::Win(win)) = serde_json::from_str(&line) {
                record.clearing_price = Some(MoneyMicros::from_micros(win.clearing_price_micros));
            }
            record.received.push(line);
        }
        let settlement = match record.clearing_price {
            Some(price) => settle_internal(&self.book, self.policy, true, price).ok(),
            None => settle_internal(&self.book, self.policy, false, MoneyMicros::ZERO).ok(),
        };
        record.settlement = settlement;
        Some(record)
    }
}
