use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use osp_core::{AdvertiserBook, AdvertiserEntry, CreativeId, MoneyMicros, NetworkPolicy};
use osp_exchange::{Exchange, ExchangeConfig, MockNetwork};
use serde::Deserialize;
use tokio::net::TcpListener;

use crate::CliError;

#[derive(Debug, Args)]
pub struct MockArgs {
    /// honest, pocket, club, fixed:<price> or first-price
    #[arg(long, default_value = "honest")]
    policy: String,
    /// JSON book: `{"network_id": "net1", "entries": [{"advertiser_id": "a", "bid_micros": 10000000}]}`
    #[arg(long)]
    book: PathBuf,
    #[arg(long, default_value_t = 0)]
    latency_ms: u64,
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BookFile {
    network_id: String,
    entries: Vec<EntryLine>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLine {
    advertiser_id: String,
    bid_micros: u64,
    /// Defaults to the advertiser id.
    creative_id: Option<String>,
}

fn load_book(path: &Path) -> Result<AdvertiserBook, CliError> {
    let bad = |e: String| CliError::Input(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let file: BookFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let entries = file
        .entries
        .into_iter()
        .map(|e| {
            let mut entry =
                AdvertiserEntry::new(e.advertiser_id, MoneyMicros::from_micros(e.bid_micros));
            if let Some(creative) = e.creative_id {
                entry.creative_id = CreativeId::from(creative);
            }
            entry
        })
        .collect();
    AdvertiserBook::new(file.network_id, entries).map_err(|e| bad(e.to_string()))
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))
}

fn announce(listener: &TcpListener) -> Result<(), CliError> {
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("listening on {addr}");
    std::io::stdout()
        .flush()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn serve(path: &Path, listen: Option<String>) -> Result<u8, CliError> {
    let mut config = ExchangeConfig::load(path).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(listen) = listen {
        config.listen = listen;
    }
    let listen = config.listen.clone();
    let exchange = Arc::new(Exchange::new(config).map_err(|e| CliError::Runtime(e.to_string()))?);
    runtime()?.block_on(async move {
        let listener = TcpListener::bind(&listen)
            .await
            .map_err(|e| CliError::Runtime(format!("bind {listen}: {e}")))?;
        announce(&listener)?;
        exchange
            .serve(listener)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })?;
    Ok(0)
}

pub fn mock_network(args: &MockArgs) -> Result<u8, CliError> {
    let policy: NetworkPolicy = args
        .policy
        .parse()
        .map_err(|e: osp_core::NetworkError| CliError::Input(e.to_string()))?;
    let book = load_book(&args.book)?;
    let mock = MockNetwork::new(book, policy).with_latency(Duration::from_millis(args.latency_ms));
    runtime()?.block_on(async move {
        let listener = TcpListener::bind(&args.listen)
            .await
            .map_err(|e| CliError::Runtime(format!("bind {}: {e}", args.listen)))?;
        announce(&listener)?;
        mock.serve(listener).await;
        Ok::<_, CliError>(())
    })?;
    Ok(0)
}
