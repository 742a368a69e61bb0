//! `compare-rates` subcommand: rate table over an (η, τ) grid.

use piag::rates;

use crate::config::CompareRatesConfig;
use crate::experiment::write_output;
use crate::report::format_float;
use crate::CliError;

pub const TABLE_HEADER: &str = "eta,tau,rate_at_alpha_max,rate_result4,rate_prior";

/// One row per grid point: the rate realized at the maximal step size, its
/// condition-number form, and the previously published
/// `1 − 1/(49η(τ+1))` for reference.
pub fn compare_rates(cfg: &CompareRatesConfig, quiet: bool) -> Result<(), CliError> {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for &eta in &cfg.eta {
        for &tau in &cfg.tau {
            let bounds = rates::TheoreticalBounds::new(1.0, eta, tau)?;
            let prior = 1.0 - 1.0 / ((49 * (tau + 1)) as f64 * eta);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_float(eta),
                tau,
                format_float(bounds.rate_a),
                format_float(bounds.rate_result4),
                format_float(prior),
            ));
        }
    }
    write_output(&cfg.output, "csv", &out)?;
    if !quiet {
        print!("{out}");
    }
    Ok(())
}
