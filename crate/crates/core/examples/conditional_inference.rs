//! Test and bound the Sharpe ratio of the best-looking asset, conditioning
//! on the fact that it was picked because it looked best.
//!
//! cargo run --release --example conditional_inference

use maxsharpe::moments::{estimate_moments, sharpe_covariance_gaussian};
use maxsharpe::selection::{naive_normal_lower_bound, select_max, truncation_bounds};
use maxsharpe::sim::{sample_returns, SimConfig, SnrConfig};

fn main() -> maxsharpe::Result<()> {
    // 25 assets, 5 years of daily data, no asset has any skill
    let config = SimConfig { k: 25, n: 1260, rho: 0.5, snr: SnrConfig::Zero, seed: 7, ..SimConfig::default() };
    let panel = sample_returns(&config, 0)?;
    let est = estimate_moments(&panel, 0.0)?;

    let event = select_max(&est.sharpe)?;
    let best = event.selected_index();
    let q = sharpe_covariance_gaussian(&est.corr, &est.sharpe, est.n)?;
    let interval = truncation_bounds(&event, &est.sharpe, &q)?;

    println!("selected {} with sample Sharpe {:.4} per period", panel.labels()[best], interval.statistic);
    println!("truncation window [{:.4}, {:.4}], sd {:.4}", interval.v_min, interval.v_max, interval.variance.sqrt());

    let outcome = interval.test(0.0, 0.05)?;
    println!("conditional p-value {:.4}, reject: {}", outcome.p_value, outcome.reject);

    let alpha = 0.05;
    let naive = naive_normal_lower_bound(interval.statistic, interval.variance, alpha);
    let conditional = interval.lower_bound(alpha)?;
    println!("95% lower bound: naive {naive:.4}, conditional {conditional:.4}");
    Ok(())
}
