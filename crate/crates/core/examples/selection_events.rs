//! The polyhedral events beyond plain max selection: largest absolute Sharpe,
//! top-m, a hurdle, and a portfolio of the survivors as the test direction.
//!
//! cargo run --release --example selection_events

use maxsharpe::moments::{estimate_moments, sharpe_covariance_gaussian};
use maxsharpe::selection::{
    build_abs_max_constraint, build_threshold_constraint, build_top_m_constraint, truncation_bounds,
    with_test_vector, SelectionEvent,
};
use maxsharpe::sim::{sample_returns, SimConfig, SnrConfig};
use nalgebra::DVector;

fn report(name: &str, event: &SelectionEvent, sharpe: &DVector<f64>, q: &maxsharpe::SharpeCovariance) -> maxsharpe::Result<()> {
    let t = truncation_bounds(event, sharpe, q)?;
    // a selected point always lies in its own event
    assert!(event.contains_arranged(&event.arrange(sharpe)?, 1e-12));
    println!(
        "{name:<10} rows {:>4}  eta'y {:>8.4}  window [{:>8.4}, {:>8.4}]  p {:.4}  lcb {:.4}",
        event.a_matrix().nrows(),
        t.statistic,
        t.v_min,
        t.v_max,
        t.p_value(0.0)?,
        t.lower_bound(0.05)?
    );
    Ok(())
}

fn main() -> maxsharpe::Result<()> {
    let config = SimConfig {
        k: 12,
        n: 756,
        rho: 0.3,
        snr: SnrConfig::UniformRange { lo: -0.06, hi: 0.06 },
        seed: 3,
        ..SimConfig::default()
    };
    let panel = sample_returns(&config, 0)?;
    let est = estimate_moments(&panel, 0.0)?;
    let q = sharpe_covariance_gaussian(&est.corr, &est.sharpe, est.n)?;

    let abs = build_abs_max_constraint(&est.sharpe)?;
    report("abs-max", &abs, &est.sharpe, &q)?;

    let top = build_top_m_constraint(&est.sharpe, 3)?;
    report("top-3", &top, &est.sharpe, &q)?;

    let hurdle = build_threshold_constraint(&est.sharpe, 0.02)?;
    report("hurdle", &hurdle, &est.sharpe, &q)?;

    // equal weight on whatever cleared the hurdle
    let weights = DVector::from_fn(est.k(), |j, _| if est.sharpe[j] > 0.02 { 1.0 } else { 0.0 });
    let portfolio = with_test_vector(hurdle, &weights, &est.corr)?;
    report("portfolio", &portfolio, &est.sharpe, &q)?;
    Ok(())
}
