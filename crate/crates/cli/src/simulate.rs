use std::path::PathBuf;

use clap::Args;
use osp_core::analysis::{
    enumerate_losses_with_reserve, enumeration_size, simulate_losses, write_csv, BidModel,
    ReportTable, SimulationConfig, DEFAULT_SEED,
};
use osp_core::{
    assign_bidders_uniform, form_exchange_bid, run_osp_auction, second_price_oracle, AdvertiserId,
    MoneyMicros, NetworkId, NetworkPolicy, OracleOutcome, TieRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

/// Largest assignment count for which `simulate` also enumerates exactly.
const EXACT_LIMIT: u64 = 1_000_000;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of bidders; required with `--bids uniform`.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    liars: usize,
    /// Comma separated amounts (`10,8,5`), a file holding such a list, or `uniform`.
    #[arg(long)]
    bids: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// A number or `random`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = "0")]
    reserve: String,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrosscheckArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Bids are drawn as whole units in `0..=max-bid`.
    #[arg(long, default_value_t = 5)]
    max_bid: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = "0")]
    reserve: String,
}

fn parse_seed(seed: Option<&str>) -> Result<u64, CliError> {
    match seed {
        None => Ok(DEFAULT_SEED),
        Some("random") => {
            let seed = rand::random();
            eprintln!("seed={seed}");
            Ok(seed)
        }
        Some(s) => s
            .parse()
            .map_err(|_| CliError::Input(format!("bad seed `{s}`"))),
    }
}

fn parse_money(s: &str) -> Result<MoneyMicros, CliError> {
    s.trim()
        .parse()
        .map_err(|e| CliError::Input(format!("bad amount `{s}`: {e}")))
}

fn parse_bids(arg: &str) -> Result<BidModel, CliError> {
    if arg == "uniform" {
        return Ok(BidModel::UniformUnit);
    }
    let text = match std::fs::read_to_string(arg) {
        Ok(text) => text,
        Err(_) => arg.to_string(),
    };
    let mut bids = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_money)
        .collect::<Result<Vec<_>, _>>()?;
    bids.sort_unstable_by(|a, b| b.cmp(a));
    Ok(BidModel::Fixed(bids))
}

pub fn run(args: &SimulateArgs) -> Result<u8, CliError> {
    let bid_model = parse_bids(&args.bids)?;
    let n = match (&bid_model, args.n) {
        (BidModel::Fixed(bids), None) => bids.len(),
        (_, Some(n)) => n,
        (BidModel::UniformUnit, None) => {
            return Err(CliError::Input("--bids uniform needs --n".into()))
        }
    };
    let config = SimulationConfig {
        n,
        k: args.k,
        liars: args.liars,
        bid_model,
        trials: args.trials,
        seed: parse_seed(args.seed.as_deref())?,
        reserve: parse_money(&args.reserve)?,
    };
    config
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;

    let report = simulate_losses(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
    let enumerated = match &config.bid_model {
        BidModel::Fixed(bids)
            if enumeration_size(n, config.k).is_some_and(|s| s <= EXACT_LIMIT) =>
        {
            Some(
                enumerate_losses_with_reserve(bids, config.k, config.liars, config.reserve)
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
            )
        }
        _ => None,
    };

    println!(
        "bids={} seed={} reserve={}",
        config.bid_model, config.seed, config.reserve
    );
    print!(
        "{}",
        ReportTable {
            rows: vec![(&report, enumerated)],
        }
    );
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        write_csv(file, std::slice::from_ref(&report))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(0)
}

pub fn crosscheck(args: &CrosscheckArgs) -> Result<u8, CliError> {
    if args.k < 2 || args.n == 0 {
        return Err(CliError::Input("need --n ≥ 1 and --k ≥ 2".into()));
    }
    let seed = parse_seed(args.seed.as_deref())?;
    let reserve = parse_money(&args.reserve)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0u64;
    for trial in 0..args.trials {
        let mut bids: Vec<MoneyMicros> = (0..args.n)
            .map(|_| MoneyMicros::from_units(rng.random_range(0..=args.max_bid)))
            .collect();
        bids.sort_unstable_by(|a, b| b.cmp(a));
        let books = assign_bidders_uniform(&bids, args.k, rng.random())
            .map_err(|e| CliError::Runtime(e.to_string()))?;

        let submitted: Vec<_> = books
            .iter()
            .filter_map(|b| form_exchange_bid(b, NetworkPolicy::HonestSecondPrice).into_bid())
            .collect();
        let outcome = run_osp_auction(&submitted, reserve, TieRule::LowestNetworkId)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let union: Vec<((NetworkId, AdvertiserId), MoneyMicros)> = books
            .iter()
            .flat_map(|b| {
                b.entries()
                    .iter()
                    .map(move |e| ((b.network_id().clone(), e.advertiser_id.clone()), e.bid))
            })
            .collect();
        let truth =
            second_price_oracle(&union, reserve).map_err(|e| CliError::Runtime(e.to_string()))?;

        let agrees = match &truth {
            OracleOutcome::Filled {
                advertiser_id: (net, _),
                price,
            } => outcome.winner() == Some(net) && outcome.clearing_price() == Some(*price),
            OracleOutcome::Unfilled => !outcome.is_filled(),
        };
        if !agrees {
            mismatches += 1;
            println!("mismatch trial={trial} bids={}", BidModel::Fixed(bids));
        }
    }
    println!("trials={} mismatches={mismatches}", args.trials);
    Ok(if mismatches == 0 { 0 } else { 1 })
}
