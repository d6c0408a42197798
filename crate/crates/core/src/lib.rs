//! Optional second price auctions with intermediary ad networks.
//!
//! * [`auction`] clears a single impression among network bids and provides
//!   a brute-force global second price oracle.
//! * [`network`] models networks that hold advertiser books and choose how
//!   much of their internal price information to reveal.
//! * [`analysis`] computes exact publisher-loss expressions, enumerates them
//!   by brute force, and runs seeded Monte Carlo experiments.

pub mod analysis;
pub mod auction;
pub mod ids;
pub mod money;
pub mod network;

pub use auction::{
    clear_osp_auction, run_osp_auction, second_price_oracle, validate_network_bid, AuctionError,
    AuctionOutcome, AuctionRequest, Clearing, NetworkBid, OracleOutcome, PriceComponents, TieRule,
    ValidationError,
};
pub use ids::{AdvertiserId, CreativeId, NetworkId, PageId, RequestId};
pub use money::{MoneyMicros, MoneyParseError, MICROS_PER_UNIT};
pub use network::{
    assign_bidders_uniform, books_from_assignment, draw_assignment, form_exchange_bid,
    settle_internal, AdvertiserBook, AdvertiserEntry, BidDecision, NetworkError, NetworkPolicy,
    Settlement,
};
