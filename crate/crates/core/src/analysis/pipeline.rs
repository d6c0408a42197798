//! One pass of the full market: books → exchange bids → OSP clearing, compared
//! against the true second price over the union of all books.

use crate::auction::{run_osp_auction, second_price_oracle, AuctionOutcome, TieRule};
use crate::ids::{AdvertiserId, NetworkId};
use crate::money::MoneyMicros;
use crate::network::{form_exchange_bid, AdvertiserBook, NetworkPolicy};

use super::AnalysisError;

/// Result of clearing one impression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub exchange: AuctionOutcome,
    /// Price a true second price auction over all advertisers would charge.
    pub oracle_price: Option<MoneyMicros>,
    /// `oracle_price - exchange price` in micros, zero when both are unfilled.
    pub loss: i128,
}

impl TrialOutcome {
    pub fn revenue(&self) -> MoneyMicros {
        self.exchange.clearing_price().unwrap_or(MoneyMicros::ZERO)
    }
}

/// The first `liars` books lie (withhold their optional bid); the rest are honest.
pub fn policy_for(index: usize, liars: usize) -> NetworkPolicy {
    if index < liars {
        NetworkPolicy::PocketDifference
    } else {
        NetworkPolicy::HonestSecondPrice
    }
}

/// Clears one impression with the given books and liar count.
pub fn run_trial(
    books: &[AdvertiserBook],
    liars: usize,
    reserve: MoneyMicros,
) -> Result<TrialOutcome, AnalysisError> {
    let bids: Vec<_> = books
        .iter()
        .enumerate()
        .filter_map(|(i, book)| form_exchange_bid(book, policy_for(i, liars)).into_bid())
        .collect();
    let exchange = run_osp_auction(&bids, reserve, TieRule::LowestNetworkId)?;

    let union: Vec<((NetworkId, AdvertiserId), MoneyMicros)> = books
        .iter()
        .flat_map(|book| {
            book.entries()
                .iter()
                .map(move |e| ((book.network_id().clone(), e.advertiser_id.clone()), e.bid))
        })
        .collect();
    let oracle_price = second_price_oracle(&union, reserve)?.price();

    let loss = match (oracle_price, exchange.clearing_price()) {
        (Some(truth), Some(paid)) => truth.signed_diff(paid),
        (None, None) => 0,
        _ => return Err(AnalysisError::FillMismatch),
    };
    Ok(TrialOutcome {
        exchange,
        oracle_price,
        loss,
    })
}
