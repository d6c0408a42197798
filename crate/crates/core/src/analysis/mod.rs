//! Publisher-loss analysis of markets where winning networks may withhold
//! their optional bid.

mod closed_form;
mod enumerate;
mod pipeline;
mod report;
mod simulate;

use thiserror::Error;

use crate::auction::{AuctionError, AuctionOutcome};
use crate::network::NetworkError;

pub use closed_form::{
    closed_form_publisher_loss, expected_loss_uniform, loss_upper_bound,
    lying_winner_expected_price, UniformExpectation,
};
pub use enumerate::{
    enumerate_losses, enumerate_losses_with_reserve, enumeration_size, MAX_ENUMERATION,
};
pub use pipeline::{policy_for, run_trial, TrialOutcome};
pub use report::{format_units, read_csv, write_csv, ReportTable};
pub use simulate::{
    derive_trial_seed, draw_uniform_bids, simulate_losses, BidModel, LossReport, SimulationConfig,
    DEFAULT_SEED,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("bids must be sorted non-increasing")]
    NotSorted,
    #[error("need at least two networks, got {0}")]
    KTooSmall(usize),
    #[error("{liars} liars exceed {k} networks")]
    TooManyLiars { liars: usize, k: usize },
    #[error("need at least one trial")]
    NoTrials,
    #[error("need at least one bidder")]
    NoBidders,
    #[error("n = {n} but {bids} bids were given")]
    BidCountMismatch { n: usize, bids: usize },
    #[error("{k}^{n} assignments exceed the enumeration limit")]
    InstanceTooLarge { n: usize, k: usize },
    #[error("invalid bid model `{0}`")]
    BadBidModel(String),
    #[error("exchange and oracle disagree on whether the impression sells")]
    FillMismatch,
    #[error("accumulator overflow")]
    Overflow,
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Network(NetworkError),
}

impl From<NetworkError> for AnalysisError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::NotSorted => AnalysisError::NotSorted,
            NetworkError::KTooSmall(k) => AnalysisError::KTooSmall(k),
            NetworkError::NoBidders => AnalysisError::NoBidders,
            other => AnalysisError::Network(other),
        }
    }
}

/// Fraction of outcomes that returned an ad; zero for no outcomes.
pub fn fill_rate(outcomes: &[AuctionOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let filled = outcomes.iter().filter(|o| o.is_filled()).count();
    filled as f64 / outcomes.len() as f64
}
