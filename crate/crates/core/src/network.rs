//! Intermediary ad networks: advertiser books, bid formation and internal settlement.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smol_str::format_smolstr;
use thiserror::Error;

use crate::auction::NetworkBid;
use crate::ids::{AdvertiserId, CreativeId, NetworkId};
use crate::money::MoneyMicros;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvertiserEntry {
    pub advertiser_id: AdvertiserId,
    #[serde(rename = "bid_micros")]
    pub bid: MoneyMicros,
    pub creative_id: CreativeId,
}

impl AdvertiserEntry {
    /// An entry whose creative shares the advertiser's id.
    pub fn new(advertiser_id: impl Into<AdvertiserId>, bid: MoneyMicros) -> Self {
        let advertiser_id = advertiser_id.into();
        let creative_id = CreativeId::new(advertiser_id.as_str());
        AdvertiserEntry {
            advertiser_id,
            bid,
            creative_id,
        }
    }
}

/// The bids a network holds from its own advertisers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBook")]
pub struct AdvertiserBook {
    network_id: NetworkId,
    entries: Vec<AdvertiserEntry>,
}

#[derive(Deserialize)]
struct RawBook {
    network_id: NetworkId,
    entries: Vec<AdvertiserEntry>,
}

impl TryFrom<RawBook> for AdvertiserBook {
    type Error = NetworkError;

    fn try_from(raw: RawBook) -> Result<Self, Self::Error> {
        AdvertiserBook::new(raw.network_id, raw.entries)
    }
}

impl AdvertiserBook {
    pub fn new(
        network_id: impl Into<NetworkId>,
        entries: Vec<AdvertiserEntry>,
    ) -> Result<Self, NetworkError> {
        for (i, a) in entries.iter().enumerate() {
            if entries[i + 1..]
                .iter()
                .any(|b| b.advertiser_id == a.advertiser_id)
            {
                return Err(NetworkError::DuplicateAdvertiserId(a.advertiser_id.clone()));
            }
        }
        Ok(AdvertiserBook {
            network_id: network_id.into(),
            entries,
        })
    }

    /// Convenience constructor from `(advertiser, bid)` pairs.
    pub fn from_bids<A: Into<AdvertiserId>>(
        network_id: impl Into<NetworkId>,
        bids: impl IntoIterator<Item = (A, MoneyMicros)>,
    ) -> Result<Self, NetworkError> {
        let entries = bids
            .into_iter()
            .map(|(id, bid)| AdvertiserEntry::new(id, bid))
            .collect();
        AdvertiserBook::new(network_id, entries)
    }

    pub fn empty(network_id: impl Into<NetworkId>) -> Self {
        AdvertiserBook {
            network_id: network_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn network_id(&self) -> &NetworkId {
        &self.network_id
    }

    pub fn entries(&self) -> &[AdvertiserEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Highest bid, lowest advertiser id on ties.
    pub fn top(&self) -> Option<&AdvertiserEntry> {
        self.entries.iter().min_by(|a, b| {
            b.bid
                .cmp(&a.bid)
                .then_with(|| a.advertiser_id.cmp(&b.advertiser_id))
        })
    }

    /// Highest bid among everyone except `selected`; zero if nobody else.
    fn best_other(&self, selected: &AdvertiserEntry) -> MoneyMicros {
        self.entries
            .iter()
            .filter(|e| e.advertiser_id != selected.advertiser_id)
            .map(|e| e.bid)
            .max()
            .unwrap_or(MoneyMicros::ZERO)
    }

    /// Second-highest bid in the book, zero with fewer than two entries.
    pub fn second_bid(&self) -> MoneyMicros {
        self.top().map_or(MoneyMicros::ZERO, |t| self.best_other(t))
    }

    fn push(&mut self, entry: AdvertiserEntry) {
        self.entries.push(entry);
    }
}

/// How a network turns its book into an exchange bid and bills its winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum NetworkPolicy {
    /// Reports the true internal second price as the optional bid.
    HonestSecondPrice,
    /// Withholds the optional bid, charges the internal second price and keeps the spread.
    PocketDifference,
    /// Withholds the optional bid and passes the exchange price through.
    BiddingClub,
    /// Sells to its advertisers at a posted price.
    FixedPrice { price: MoneyMicros },
    /// Runs a first price sale internally.
    FirstPriceInternal,
}

impl NetworkPolicy {
    pub const ALL_NAMES: [&'static str; 5] =
        ["honest", "pocket", "club", "fixed:<price>", "first-price"];
}

impl fmt::Display for NetworkPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkPolicy::HonestSecondPrice => f.write_str("honest"),
            NetworkPolicy::PocketDifference => f.write_str("pocket"),
            NetworkPolicy::BiddingClub => f.write_str("club"),
            NetworkPolicy::FixedPrice { price } => write!(f, "fixed:{price}"),
            NetworkPolicy::FirstPriceInternal => f.write_str("first-price"),
        }
    }
}

impl FromStr for NetworkPolicy {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || NetworkError::UnknownPolicy(s.to_string());
        match s.trim() {
            "honest" | "honest-second-price" => Ok(NetworkPolicy::HonestSecondPrice),
            "pocket" | "pocket-difference" => Ok(NetworkPolicy::PocketDifference),
            "club" | "bidding-club" => Ok(NetworkPolicy::BiddingClub),
            "first-price" | "first-price-internal" => Ok(NetworkPolicy::FirstPriceInternal),
            other => {
                let price = other.strip_prefix("fixed:").ok_or_else(unknown)?;
                let price = price.parse().map_err(|_| unknown())?;
                Ok(NetworkPolicy::FixedPrice { price })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BidDecision {
    Bid(NetworkBid),
    Decline,
}

impl BidDecision {
    pub fn bid(&self) -> Option<&NetworkBid> {
        match self {
            BidDecision::Bid(b) => Some(b),
            BidDecision::Decline => None,
        }
    }

    pub fn into_bid(self) -> Option<NetworkBid> {
        match self {
            BidDecision::Bid(b) => Some(b),
            BidDecision::Decline => None,
        }
    }
}

/// Money flows after the exchange clears, seen from one network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub winning_advertiser_id: Option<AdvertiserId>,
    pub advertiser_payment: MoneyMicros,
    pub exchange_payment: MoneyMicros,
    /// `advertiser_payment - exchange_payment`.
    pub network_margin: i128,
}

impl Settlement {
    pub fn lost() -> Self {
        Settlement {
            winning_advertiser_id: None,
            advertiser_payment: MoneyMicros::ZERO,
            exchange_payment: MoneyMicros::ZERO,
            network_margin: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("advertiser {0} appears more than once in the book")]
    DuplicateAdvertiserId(AdvertiserId),
    #[error("need at least two networks, got {0}")]
    KTooSmall(usize),
    #[error("need at least one bidder")]
    NoBidders,
    #[error("bids must be sorted non-increasing")]
    NotSorted,
    #[error("unknown network policy `{0}`")]
    UnknownPolicy(String),
    #[error("settlement precondition violated: {0}")]
    PreconditionViolated(String),
}

/// The advertiser a policy would sell to, if any.
fn internal_winner(book: &AdvertiserBook, policy: NetworkPolicy) -> Option<&AdvertiserEntry> {
    match policy {
        NetworkPolicy::FixedPrice { price } => book
            .entries
            .iter()
            .filter(|e| e.bid >= price)
            .min_by(|a, b| a.advertiser_id.cmp(&b.advertiser_id)),
        _ => book.top(),
    }
}

/// Builds the network's exchange submission. An empty book declines.
pub fn form_exchange_bid(book: &AdvertiserBook, policy: NetworkPolicy) -> BidDecision {
    let Some(selected) = internal_winner(book, policy) else {
        return BidDecision::Decline;
    };
    let (mandatory, optional) = match policy {
        NetworkPolicy::HonestSecondPrice => (selected.bid, book.best_other(selected)),
        NetworkPolicy::PocketDifference
        | NetworkPolicy::BiddingClub
        | NetworkPolicy::FirstPriceInternal => (selected.bid, MoneyMicros::ZERO),
        NetworkPolicy::FixedPrice { price } => (price, MoneyMicros::ZERO),
    };
    BidDecision::Bid(NetworkBid {
        network_id: book.network_id.clone(),
        mandatory,
        optional,
        creative_id: selected.creative_id.clone(),
    })
}

/// Bills the internal winner after the exchange has cleared.
pub fn settle_internal(
    book: &AdvertiserBook,
    policy: NetworkPolicy,
    won: bool,
    clearing_price: MoneyMicros,
) -> Result<Settlement, NetworkError> {
    if !won {
        return Ok(Settlement::lost());
    }
    let (Some(selected), BidDecision::Bid(bid)) = (
        internal_winner(book, policy),
        form_exchange_bid(book, policy),
    ) else {
        return Err(NetworkError::PreconditionViolated(format!(
            "network {} won without submitting a bid",
            book.network_id
        )));
    };
    if clearing_price > bid.mandatory {
        return Err(NetworkError::PreconditionViolated(format!(
            "clearing price {clearing_price} exceeds mandatory bid {} of network {}",
            bid.mandatory, book.network_id
        )));
    }

    let advertiser_payment = match policy {
        NetworkPolicy::HonestSecondPrice | NetworkPolicy::BiddingClub => clearing_price,
        NetworkPolicy::PocketDifference => book.best_other(selected).max(clearing_price),
        NetworkPolicy::FixedPrice { price } => price,
        NetworkPolicy::FirstPriceInternal => selected.bid,
    };
    Ok(Settlement {
        winning_advertiser_id: Some(selected.advertiser_id.clone()),
        advertiser_payment,
        exchange_payment: clearing_price,
        network_margin: advertiser_payment.signed_diff(clearing_price),
    })
}

/// Id of the network at zero-based `index` out of `k`, e.g. `net1`, or `net01` when k ≥ 10.
pub fn network_id_for(index: usize, k: usize) -> NetworkId {
    let width = digits(k);
    NetworkId::from_smol(format_smolstr!("net{:0width$}", index + 1))
}

/// Id of the bidder with one-based rank `rank` out of `n`, e.g. `d1`.
pub fn rank_advertiser_id(rank: usize, n: usize) -> AdvertiserId {
    let width = digits(n);
    AdvertiserId::from_smol(format_smolstr!("d{:0width$}", rank))
}

fn digits(mut x: usize) -> usize {
    let mut d = 1;
    while x >= 10 {
        x /= 10;
        d += 1;
    }
    d
}

pub(crate) fn check_sorted(bids: &[MoneyMicros]) -> Result<(), NetworkError> {
    if bids.windows(2).any(|w| w[0] < w[1]) {
        return Err(NetworkError::NotSorted);
    }
    Ok(())
}

/// Builds `k` books from an explicit bidder → network map (`assignment[j]`
/// is the network index of the bidder ranked `j + 1`).
pub fn books_from_assignment(
    sorted_bids: &[MoneyMicros],
    k: usize,
    assignment: &[usize],
) -> Vec<AdvertiserBook> {
    debug_assert_eq!(sorted_bids.len(), assignment.len());
    let n = sorted_bids.len();
    let mut books: Vec<AdvertiserBook> = (0..k)
        .map(|i| AdvertiserBook::empty(network_id_for(i, k)))
        .collect();
    for (j, (&bid, &net)) in sorted_bids.iter().zip(assignment).enumerate() {
        books[net].push(AdvertiserEntry::new(rank_advertiser_id(j + 1, n), bid));
    }
    books
}

/// Places each bidder independently and uniformly into one of `k` networks.
/// Deterministic in `rng_seed`; the bidder ranked `j` gets advertiser id `d<j>`.
pub fn assign_bidders_uniform(
    sorted_bids: &[MoneyMicros],
    k: usize,
    rng_seed: u64,
) -> Result<Vec<AdvertiserBook>, NetworkError> {
    if k < 2 {
        return Err(NetworkError::KTooSmall(k));
    }
    if sorted_bids.is_empty() {
        return Err(NetworkError::NoBidders);
    }
    check_sorted(sorted_bids)?;
    let assignment = draw_assignment(sorted_bids.len(), k, rng_seed);
    Ok(books_from_assignment(sorted_bids, k, &assignment))
}

/// The network index of each of `n` bidders, as used by [`assign_bidders_uniform`].
pub fn draw_assignment(n: usize, k: usize, rng_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::validate_network_bid;
    use proptest::prelude::*;

    fn units(u: u64) -> MoneyMicros {
        MoneyMicros::from_units(u)
    }

    fn book(pairs: &[(&str, u64)]) -> AdvertiserBook {
        AdvertiserBook::from_bids("net1", pairs.iter().map(|&(a, b)| (a, units(b)))).unwrap()
    }

    fn mo(decision: &BidDecision) -> (MoneyMicros, MoneyMicros) {
        let b = decision.bid().expect("bid");
        (b.mandatory, b.optional)
    }

    #[test]
    fn honest_reports_second_price() {
        let d = form_exchange_bid(
            &book(&[("a", 10), ("b", 8)]),
            NetworkPolicy::HonestSecondPrice,
        );
        assert_eq!(mo(&d), (units(10), units(8)));
        assert_eq!(d.bid().unwrap().creative_id.as_str(), "a");
        let single = form_exchange_bid(&book(&[("a", 10)]), NetworkPolicy::HonestSecondPrice);
        assert_eq!(mo(&single), (units(10), units(0)));
    }

    #[test]
    fn pocket_withholds_optional() {
        let d = form_exchange_bid(
            &book(&[("a", 10), ("b", 8)]),
            NetworkPolicy::PocketDifference,
        );
        assert_eq!(mo(&d), (units(10), units(0)));
    }

    #[test]
    fn fixed_price_bids_the_posted_price() {
        let b = book(&[("a", 10), ("b", 8), ("c", 12)]);
        let d = form_exchange_bid(&b, NetworkPolicy::FixedPrice { price: units(11) });
        assert_eq!(mo(&d), (units(11), units(0)));
        // scan: lowest id among entries willing to pay 11
        let mut eligible: Vec<&AdvertiserEntry> =
            b.entries().iter().filter(|e| e.bid >= units(11)).collect();
        eligible.sort_by(|x, y| x.advertiser_id.cmp(&y.advertiser_id));
        assert_eq!(d.bid().unwrap().creative_id, eligible[0].creative_id);
        assert_eq!(d.bid().unwrap().creative_id.as_str(), "c");

        let none = form_exchange_bid(&b, NetworkPolicy::FixedPrice { price: units(13) });
        assert_eq!(none, BidDecision::Decline);
    }

    #[test]
    fn fixed_price_tie_goes_to_lowest_id() {
        let b = book(&[("z", 20), ("m", 15), ("q", 11)]);
        let d = form_exchange_bid(&b, NetworkPolicy::FixedPrice { price: units(11) });
        assert_eq!(d.bid().unwrap().creative_id.as_str(), "m");
    }

    #[test]
    fn empty_book_declines() {
        let empty = AdvertiserBook::empty("net1");
        for policy in [
            NetworkPolicy::HonestSecondPrice,
            NetworkPolicy::PocketDifference,
            NetworkPolicy::BiddingClub,
            NetworkPolicy::FixedPrice { price: units(0) },
            NetworkPolicy::FirstPriceInternal,
        ] {
            assert_eq!(form_exchange_bid(&empty, policy), BidDecision::Decline);
        }
    }

    #[test]
    fn top_ties_by_lowest_id() {
        let b = book(&[("b", 10), ("a", 10), ("c", 3)]);
        assert_eq!(b.top().unwrap().advertiser_id.as_str(), "a");
        assert_eq!(b.second_bid(), units(10));
    }

    #[test]
    fn duplicate_advertiser_rejected() {
        assert!(matches!(
            AdvertiserBook::from_bids("n", [("a", units(1)), ("a", units(2))]),
            Err(NetworkError::DuplicateAdvertiserId(_))
        ));
    }

    #[test]
    fn settlement_examples() {
        let b = book(&[("a", 10), ("b", 8)]);
        let s = settle_internal(&b, NetworkPolicy::PocketDifference, true, units(5)).unwrap();
        assert_eq!(s.winning_advertiser_id.as_ref().unwrap().as_str(), "a");
        assert_eq!(
            (s.advertiser_payment, s.network_margin),
            (units(8), 3_000_000)
        );

        let s = settle_internal(&b, NetworkPolicy::BiddingClub, true, units(5)).unwrap();
        assert_eq!((s.advertiser_payment, s.network_margin), (units(5), 0));

        let s = settle_internal(&b, NetworkPolicy::HonestSecondPrice, true, units(8)).unwrap();
        assert_eq!((s.advertiser_payment, s.network_margin), (units(8), 0));

        let s = settle_internal(
            &book(&[("a", 10)]),
            NetworkPolicy::FirstPriceInternal,
            true,
            units(6),
        )
        .unwrap();
        assert_eq!(
            (s.advertiser_payment, s.network_margin),
            (units(10), 4_000_000)
        );

        let s = settle_internal(
            &book(&[("a", 10), ("b", 8), ("c", 12)]),
            NetworkPolicy::FixedPrice { price: units(11) },
            true,
            units(7),
        )
        .unwrap();
        assert_eq!(s.winning_advertiser_id.unwrap().as_str(), "c");
        assert_eq!(
            (s.advertiser_payment, s.network_margin),
            (units(11), 4_000_000)
        );
    }

    #[test]
    fn pocket_never_charges_below_clearing() {
        let b = book(&[("a", 10), ("b", 2)]);
        let s = settle_internal(&b, NetworkPolicy::PocketDifference, true, units(4)).unwrap();
        assert_eq!((s.advertiser_payment, s.network_margin), (units(4), 0));
    }

    #[test]
    fn lost_settlement_is_zero() {
        let b = book(&[("a", 10), ("b", 8)]);
        assert_eq!(
            settle_internal(&b, NetworkPolicy::PocketDifference, false, units(5)),
            Ok(Settlement::lost())
        );
    }

    #[test]
    fn settlement_preconditions() {
        let b = book(&[("a", 10), ("b", 8)]);
        assert!(matches!(
            settle_internal(&b, NetworkPolicy::HonestSecondPrice, true, units(11)),
            Err(NetworkError::PreconditionViolated(_))
        ));
        assert!(matches!(
            settle_internal(
                &AdvertiserBook::empty("n"),
                NetworkPolicy::BiddingClub,
                true,
                units(0)
            ),
            Err(NetworkError::PreconditionViolated(_))
        ));
        assert!(matches!(
            settle_internal(
                &b,
                NetworkPolicy::FixedPrice { price: units(20) },
                true,
                units(1)
            ),
            Err(NetworkError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn policy_parse_round_trip() {
        for policy in [
            NetworkPolicy::HonestSecondPrice,
            NetworkPolicy::PocketDifference,
            NetworkPolicy::BiddingClub,
            NetworkPolicy::FixedPrice {
                price: MoneyMicros::from_micros(2_500_000),
            },
            NetworkPolicy::FirstPriceInternal,
        ] {
            assert_eq!(policy.to_string().parse::<NetworkPolicy>(), Ok(policy));
        }
        assert!("auction".parse::<NetworkPolicy>().is_err());
        assert!("fixed:abc".parse::<NetworkPolicy>().is_err());
    }

    #[test]
    fn book_json_shape() {
        let b = book(&[("a", 10)]);
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(
            json,
            r#"{"network_id":"net1","entries":[{"advertiser_id":"a","bid_micros":10000000,"creative_id":"a"}]}"#
        );
        assert_eq!(serde_json::from_str::<AdvertiserBook>(&json).unwrap(), b);
        let dup = r#"{"network_id":"n","entries":[{"advertiser_id":"a","bid_micros":1,"creative_id":"x"},{"advertiser_id":"a","bid_micros":2,"creative_id":"y"}]}"#;
        assert!(serde_json::from_str::<AdvertiserBook>(dup).is_err());
    }

    #[test]
    fn assignment_is_deterministic() {
        let bids = [units(3), units(2), units(1)];
        let x = assign_bidders_uniform(&bids, 2, 42).unwrap();
        let y = assign_bidders_uniform(&bids, 2, 42).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.len(), 2);
        assert_eq!(x.iter().map(AdvertiserBook::len).sum::<usize>(), 3);
    }

    #[test]
    fn single_bidder_lands_in_one_book() {
        for k in 2..6 {
            let books = assign_bidders_uniform(&[units(5)], k, 7).unwrap();
            assert_eq!(books.len(), k);
            assert_eq!(books.iter().filter(|b| !b.is_empty()).count(), 1);
            let holder = books.iter().find(|b| !b.is_empty()).unwrap();
            assert_eq!(holder.entries()[0].advertiser_id.as_str(), "d1");
        }
    }

    #[test]
    fn assignment_errors() {
        assert_eq!(
            assign_bidders_uniform(&[units(1)], 1, 0),
            Err(NetworkError::KTooSmall(1))
        );
        assert_eq!(
            assign_bidders_uniform(&[], 2, 0),
            Err(NetworkError::NoBidders)
        );
        assert_eq!(
            assign_bidders_uniform(&[units(1), units(2)], 2, 0),
            Err(NetworkError::NotSorted)
        );
    }

    #[test]
    fn ids_sort_by_rank() {
        assert_eq!(rank_advertiser_id(2, 12).as_str(), "d02");
        assert!(rank_advertiser_id(2, 12) < rank_advertiser_id(10, 12));
        assert_eq!(network_id_for(0, 2).as_str(), "net1");
        assert!(network_id_for(1, 12) < network_id_for(9, 12));
    }

    fn arb_policy() -> impl Strategy<Value = NetworkPolicy> {
        prop_oneof![
            Just(NetworkPolicy::HonestSecondPrice),
            Just(NetworkPolicy::PocketDifference),
            Just(NetworkPolicy::BiddingClub),
            (0u64..30).prop_map(|p| NetworkPolicy::FixedPrice {
                price: MoneyMicros::from_micros(p)
            }),
            Just(NetworkPolicy::FirstPriceInternal),
        ]
    }

    proptest! {
        #[test]
        fn formed_bids_are_valid(bids in prop::collection::vec(0u64..30, 0..8), policy in arb_policy()) {
            let b = AdvertiserBook::from_bids(
                "n",
                bids.iter().enumerate().map(|(i, &x)| (format!("a{i}"), MoneyMicros::from_micros(x))),
            ).unwrap();
            if let BidDecision::Bid(bid) = form_exchange_bid(&b, policy) {
                prop_assert!(validate_network_bid(&bid).is_ok());
                prop_assert_eq!(bid.network_id.as_str(), "n");
            }
        }
    }
}
