//! The optional second price (OSP) auction and a global second-price oracle.
//!
//! Every participating network submits a mandatory bid `b` and an optional
//! bid `o ≤ b`. The highest mandatory bid at or above the publisher's reserve
//! wins and pays
//!
//! ```text
//! max( highest competing mandatory bid, own optional bid, reserve )
//! ```
//!
//! where an empty set of competitors contributes zero. A network that sets
//! `o` to the second-highest bid of its own advertisers therefore reproduces
//! a true second price auction over the union of all books.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CreativeId, NetworkId, PageId, RequestId};
use crate::money::MoneyMicros;

/// One network's submission to the exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkBid {
    pub network_id: NetworkId,
    pub mandatory: MoneyMicros,
    pub optional: MoneyMicros,
    pub creative_id: CreativeId,
}

impl NetworkBid {
    pub fn new(
        network_id: impl Into<NetworkId>,
        mandatory: MoneyMicros,
        optional: MoneyMicros,
        creative_id: impl Into<CreativeId>,
    ) -> Self {
        NetworkBid {
            network_id: network_id.into(),
            mandatory,
            optional,
            creative_id: creative_id.into(),
        }
    }
}

/// A publisher's request for one ad slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionRequest {
    pub request_id: RequestId,
    pub page_id: PageId,
    pub user_info: Vec<u8>,
    /// The publisher's minimum price.
    pub reserve: MoneyMicros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AuctionOutcome {
    Filled {
        winner_network_id: NetworkId,
        creative_id: CreativeId,
        #[serde(rename = "clearing_price_micros")]
        clearing_price: MoneyMicros,
    },
    Unfilled,
}

impl AuctionOutcome {
    pub fn is_filled(&self) -> bool {
        matches!(self, AuctionOutcome::Filled { .. })
    }

    pub fn clearing_price(&self) -> Option<MoneyMicros> {
        match self {
            AuctionOutcome::Filled { clearing_price, .. } => Some(*clearing_price),
            AuctionOutcome::Unfilled => None,
        }
    }

    pub fn winner(&self) -> Option<&NetworkId> {
        match self {
            AuctionOutcome::Filled {
                winner_network_id, ..
            } => Some(winner_network_id),
            AuctionOutcome::Unfilled => None,
        }
    }
}

/// How to pick among networks tied on the highest mandatory bid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    LowestNetworkId,
    /// Uniform choice among the tied networks (ordered by id), drawn from a
    /// generator seeded with `seed`.
    SeededRandom { seed: u64 },
}

/// The three terms whose maximum is the clearing price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceComponents {
    pub max_competing: MoneyMicros,
    pub winner_optional: MoneyMicros,
    pub reserve: MoneyMicros,
}

impl PriceComponents {
    pub fn price(&self) -> MoneyMicros {
        self.max_competing
            .max(self.winner_optional)
            .max(self.reserve)
    }
}

/// An outcome together with the terms that produced its price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clearing {
    pub outcome: AuctionOutcome,
    pub components: Option<PriceComponents>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("network {network_id}: optional bid {optional} exceeds mandatory bid {mandatory}")]
    OptionalExceedsMandatory {
        network_id: NetworkId,
        mandatory: MoneyMicros,
        optional: MoneyMicros,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuctionError {
    #[error(transparent)]
    InvalidBid(#[from] ValidationError),
    #[error("network {0} submitted more than one bid")]
    DuplicateNetworkId(NetworkId),
    #[error("advertiser {0} appears more than once")]
    DuplicateAdvertiserId(String),
}

/// Checks `optional ≤ mandatory`. Invalid bids are rejected, never clamped.
pub fn validate_network_bid(bid: &NetworkBid) -> Result<(), ValidationError> {
    if bid.optional > bid.mandatory {
        return Err(ValidationError::OptionalExceedsMandatory {
            network_id: bid.network_id.clone(),
            mandatory: bid.mandatory,
            optional: bid.optional,
        });
    }
    Ok(())
}

/// Returns the first key that occurs twice, if any.
fn find_duplicate<T, K: Ord>(items: &[T], key: impl Fn(&T) -> &K) -> Option<&K> {
    if items.len() <= 32 {
        for (i, a) in items.iter().enumerate() {
            if items[i + 1..].iter().any(|b| key(a) == key(b)) {
                return Some(key(a));
            }
        }
        return None;
    }
    let mut sorted: Vec<&K> = items.iter().map(&key).collect();
    sorted.sort_unstable();
    sorted.windows(2).find(|w| w[0] == w[1]).map(|w| w[0])
}

/// Runs the OSP auction and returns only the outcome.
pub fn run_osp_auction(
    bids: &[NetworkBid],
    reserve: MoneyMicros,
    tie_rule: TieRule,
) -> Result<AuctionOutcome, AuctionError> {
    clear_osp_auction(bids, reserve, tie_rule).map(|c| c.outcome)
}

/// Runs the OSP auction, also reporting the terms of the price maximum.
pub fn clear_osp_auction(
    bids: &[NetworkBid],
    reserve: MoneyMicros,
    tie_rule: TieRule,
) -> Result<Clearing, AuctionError> {
    for bid in bids {
        validate_network_bid(bid)?;
    }
    if let Some(dup) = find_duplicate(bids, |b| &b.network_id) {
        return Err(AuctionError::DuplicateNetworkId(dup.clone()));
    }

    let top = bids
        .iter()
        .map(|b| b.mandatory)
        .filter(|&m| m >= reserve)
        .max();
    let Some(top) = top else {
        return Ok(Clearing {
            outcome: AuctionOutcome::Unfilled,
            components: None,
        });
    };

    let winner_idx = match tie_rule {
        TieRule::LowestNetworkId => bids
            .iter()
            .enumerate()
            .filter(|(_, b)| b.mandatory == top)
            .min_by(|(_, a), (_, b)| a.network_id.cmp(&b.network_id))
            .map(|(i, _)| i)
            .expect("at least one bid reaches the top"),
        TieRule::SeededRandom { seed } => {
            let mut tied: Vec<usize> = (0..bids.len())
                .filter(|&i| bids[i].mandatory == top)
                .collect();
            tied.sort_by(|&a, &b| bids[a].network_id.cmp(&bids[b].network_id));
            let pick = if tied.len() == 1 {
                0
            } else {
                ChaCha8Rng::seed_from_u64(seed).random_range(0..tied.len())
            };
            tied[pick]
        }
    };

    let winner = &bids[winner_idx];
    let max_competing = bids
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != winner_idx)
        .map(|(_, b)| b.mandatory)
        .max()
        .unwrap_or(MoneyMicros::ZERO);
    let components = PriceComponents {
        max_competing,
        winner_optional: winner.optional,
        reserve,
    };

    Ok(Clearing {
        outcome: AuctionOutcome::Filled {
            winner_network_id: winner.network_id.clone(),
            creative_id: winner.creative_id.clone(),
            clearing_price: components.price(),
        },
        components: Some(components),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome<A> {
    Filled {
        advertiser_id: A,
        price: MoneyMicros,
    },
    Unfilled,
}

impl<A> OracleOutcome<A> {
    pub fn price(&self) -> Option<MoneyMicros> {
        match self {
            OracleOutcome::Filled { price, .. } => Some(*price),
            OracleOutcome::Unfilled => None,
        }
    }
}

/// True second price auction over every advertiser bid, by direct scan.
///
/// The winner is the highest bid at or above `reserve`, lowest id on ties;
/// it pays the larger of the second-highest bid and the reserve. Generic over
/// the id type so callers can key advertisers by `(network, advertiser)`.
pub fn second_price_oracle<A>(
    bids: &[(A, MoneyMicros)],
    reserve: MoneyMicros,
) -> Result<OracleOutcome<A>, AuctionError>
where
    A: Ord + Clone + Debug,
{
    if let Some(dup) = find_duplicate(bids, |(a, _)| a) {
        return Err(AuctionError::DuplicateAdvertiserId(format!("{dup:?}")));
    }

    let mut winner: Option<usize> = None;
    for (i, (id, bid)) in bids.iter().enumerate() {
        if *bid < reserve {
            continue;
        }
        winner = match winner {
            None => Some(i),
            Some(w) => {
                let (wid, wbid) = &bids[w];
                if bid > wbid || (bid == wbid && id < wid) {
                    Some(i)
                } else {
                    Some(w)
                }
            }
        };
    }
    let Some(w) = winner else {
        return Ok(OracleOutcome::Unfilled);
    };

    let second = bids
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != w)
        .map(|(_, (_, b))| *b)
        .max()
        .unwrap_or(MoneyMicros::ZERO);

    Ok(OracleOutcome::Filled {
        advertiser_id: bids[w].0.clone(),
        price: second.max(reserve),
    })
}
