//! CSV and plain-text renderings of [`LossReport`].

use std::fmt;
use std::io;

use num_bigint::Sign;
use num_integer::Integer;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::money::{MoneyMicros, MICROS_PER_UNIT};

use super::simulate::{LossReport, SimulationConfig};
use super::AnalysisError;

/// Formats a rational micro amount as units with six decimals, rounding
/// half away from zero.
pub fn format_units(micros: &BigRational) -> String {
    let rounded = micros.round().to_integer();
    let negative = rounded.sign() == Sign::Minus;
    let (whole, frac) = rounded.magnitude().div_rem(&MICROS_PER_UNIT.into());
    format!("{}{whole}.{frac:06}", if negative { "-" } else { "" })
}

fn format_f64_units(micros: f64) -> String {
    format!("{:.6}", micros / MICROS_PER_UNIT as f64)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    n: usize,
    k: usize,
    liars: usize,
    bid_model: String,
    trials: u64,
    seed: u64,
    reserve_micros: u64,
    empirical_mean: f64,
    std_error: f64,
    closed_form: String,
    upper_bound: String,
    fill_rate: f64,
    revenue_baseline: String,
    baseline_mean: f64,
    baseline_std_error: f64,
    mean_revenue: f64,
    total_loss_micros: i128,
    min_trial_loss_micros: i128,
    max_trial_loss_micros: i128,
}

fn parse_ratio(field: &str, value: &str) -> Result<BigRational, AnalysisError> {
    value
        .parse()
        .map_err(|_| AnalysisError::Report(format!("{field}: `{value}` is not a rational")))
}

impl From<&LossReport> for CsvRow {
    fn from(r: &LossReport) -> Self {
        CsvRow {
            n: r.config.n,
            k: r.config.k,
            liars: r.config.liars,
            bid_model: r.config.bid_model.to_string(),
            trials: r.config.trials,
            seed: r.config.seed,
            reserve_micros: r.config.reserve.micros(),
            empirical_mean: r.empirical_mean_loss,
            std_error: r.empirical_std_error,
            closed_form: r
                .closed_form_loss
                .as_ref()
                .map(ToString::to_string)
                .unwrap_or_default(),
            upper_bound: r.upper_bound.to_string(),
            fill_rate: r.fill_rate,
            revenue_baseline: r.revenue_baseline.to_string(),
            baseline_mean: r.empirical_baseline,
            baseline_std_error: r.baseline_std_error,
            mean_revenue: r.mean_revenue,
            total_loss_micros: r.total_loss,
            min_trial_loss_micros: r.min_trial_loss,
            max_trial_loss_micros: r.max_trial_loss,
        }
    }
}

impl TryFrom<CsvRow> for LossReport {
    type Error = AnalysisError;

    fn try_from(row: CsvRow) -> Result<Self, Self::Error> {
        let closed_form_loss = if row.closed_form.is_empty() {
            None
        } else {
            Some(parse_ratio("closed_form", &row.closed_form)?)
        };
        Ok(LossReport {
            config: SimulationConfig {
                n: row.n,
                k: row.k,
                liars: row.liars,
                bid_model: row.bid_model.parse()?,
                trials: row.trials,
                seed: row.seed,
                reserve: MoneyMicros::from_micros(row.reserve_micros),
            },
            empirical_mean_loss: row.empirical_mean,
            empirical_std_error: row.std_error,
            closed_form_loss,
            upper_bound: parse_ratio("upper_bound", &row.upper_bound)?,
            revenue_baseline: parse_ratio("revenue_baseline", &row.revenue_baseline)?,
            empirical_baseline: row.baseline_mean,
            baseline_std_error: row.baseline_std_error,
            mean_revenue: row.mean_revenue,
            fill_rate: row.fill_rate,
            total_loss: row.total_loss_micros,
            min_trial_loss: row.min_trial_loss_micros,
            max_trial_loss: row.max_trial_loss_micros,
        })
    }
}

/// Writes one CSV row per report, with a header. Money columns are micros;
/// exact values are written as `p/q` rationals.
pub fn write_csv<W: io::Write>(writer: W, reports: &[LossReport]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(CsvRow::from(r))
            .map_err(|e| AnalysisError::Report(e.to_string()))?;
    }
    w.flush().map_err(|e| AnalysisError::Report(e.to_string()))
}

pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<LossReport>, AnalysisError> {
    csv::Reader::from_reader(reader)
        .deserialize::<CsvRow>()
        .map(|row| {
            row.map_err(|e| AnalysisError::Report(e.to_string()))
                .and_then(LossReport::try_from)
        })
        .collect()
}

/// A plain-text table of reports, values in units. The optional second
/// column of each row is an exact enumerated loss to print alongside.
pub struct ReportTable<'a> {
    pub rows: Vec<(&'a LossReport, Option<BigRational>)>,
}

impl fmt::Display for ReportTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>4} {:>3} {:>5} {:>9} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>9} {:>7}",
            "n",
            "k",
            "liars",
            "trials",
            "mean_loss",
            "std_error",
            "closed_form",
            "enumerated",
            "upper_bound",
            "baseline",
            "fill_rate",
            "z"
        )?;
        let dash = "-".to_string();
        for (r, enumerated) in &self.rows {
            let z = r
                .z_score()
                .map_or_else(|| dash.clone(), |z| format!("{z:.2}"));
            writeln!(
                f,
                "{:>4} {:>3} {:>5} {:>9} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>9.6} {:>7}",
                r.config.n,
                r.config.k,
                r.config.liars,
                r.config.trials,
                format_f64_units(r.empirical_mean_loss),
                format_f64_units(r.empirical_std_error),
                r.closed_form_loss
                    .as_ref()
                    .map_or_else(|| dash.clone(), format_units),
                enumerated
                    .as_ref()
                    .map_or_else(|| dash.clone(), format_units),
                format_units(&r.upper_bound),
                format_units(&r.revenue_baseline),
                r.fill_rate,
                z
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::simulate::simulate_losses;

    #[test]
    fn units_formatting() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(format_units(&r(2_750_000, 1)), "2.750000");
        assert_eq!(format_units(&r(1_000_000, 6)), "0.166667");
        assert_eq!(format_units(&r(-5, 2)), "-0.000003");
        assert_eq!(format_units(&r(0, 1)), "0.000000");
    }

    #[test]
    fn csv_round_trip() {
        let reports = vec![
            simulate_losses(&SimulationConfig::uniform(3, 2, 2, 500, 4)).unwrap(),
            simulate_losses(&SimulationConfig::fixed(
                vec![MoneyMicros::from_units(10), MoneyMicros::from_units(8)],
                3,
                1,
                300,
                4,
            ))
            .unwrap(),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &reports).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with(
            "n,k,liars,bid_model,trials,seed,reserve_micros,empirical_mean,std_error,closed_form,upper_bound,fill_rate"
        ));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn table_lists_each_report() {
        let r = simulate_losses(&SimulationConfig::uniform(2, 2, 2, 100, 1)).unwrap();
        let text = ReportTable {
            rows: vec![(&r, None), (&r, Some(BigRational::from_integer(1.into())))],
        }
        .to_string();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("closed_form"));
        assert!(text.contains("0.166667"));
    }
}
