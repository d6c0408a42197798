use std::path::Path;

use osp_core::{clear_osp_auction, AuctionOutcome, MoneyMicros, NetworkBid, TieRule};
use serde::Deserialize;

use crate::CliError;

/// `{"reserve_micros": 0, "bids": [{"network_id": "net1", "mandatory_micros": 10000000,
/// "optional_micros": 0, "creative_id": "ad1"}]}`
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuctionFile {
    #[serde(default)]
    reserve_micros: u64,
    bids: Vec<BidLine>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BidLine {
    network_id: String,
    mandatory_micros: u64,
    #[serde(default)]
    optional_micros: u64,
    creative_id: String,
}

pub fn parse_tie_rule(s: &str) -> Result<TieRule, CliError> {
    match s {
        "lowest" => Ok(TieRule::LowestNetworkId),
        other => other
            .strip_prefix("seeded:")
            .and_then(|seed| seed.parse().ok())
            .map(|seed| TieRule::SeededRandom { seed })
            .ok_or_else(|| CliError::Input(format!("unknown tie rule `{s}`"))),
    }
}

pub fn run(path: &Path, tie_rule: &str) -> Result<u8, CliError> {
    let tie_rule = parse_tie_rule(tie_rule)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file: AuctionFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bids: Vec<NetworkBid> = file
        .bids
        .into_iter()
        .map(|b| {
            NetworkBid::new(
                b.network_id,
                MoneyMicros::from_micros(b.mandatory_micros),
                MoneyMicros::from_micros(b.optional_micros),
                b.creative_id,
            )
        })
        .collect();
    let reserve = MoneyMicros::from_micros(file.reserve_micros);
    let clearing =
        clear_osp_auction(&bids, reserve, tie_rule).map_err(|e| CliError::Input(e.to_string()))?;

    match (&clearing.outcome, clearing.components) {
        (
            AuctionOutcome::Filled {
                winner_network_id,
                creative_id,
                clearing_price,
            },
            Some(c),
        ) => {
            println!("winner={winner_network_id} price={clearing_price}");
            println!("creative={creative_id}");
            println!(
                "max_competing={} winner_optional={} reserve={}",
                c.max_competing, c.winner_optional, c.reserve
            );
            Ok(0)
        }
        _ => {
            println!("unfilled reserve={reserve}");
            Ok(1)
        }
    }
}
