//! Multivariate t returns. The Gaussian delta-method covariance understates
//! the spread of the Sharpe estimates; the elliptical one corrects for the
//! kurtosis, either known or estimated from the panel.
//!
//! cargo run --release --example heavy_tails

use maxsharpe::moments::{
    estimate_kurtosis_factor, estimate_moments, sharpe_covariance, CovarianceFlavor,
};
use maxsharpe::selection::{select_max, truncation_bounds};
use maxsharpe::sim::{run_null_calibration, sample_returns, CovarianceMode, ReturnsLaw, SimConfig};
use maxsharpe::Method;

fn main() -> maxsharpe::Result<()> {
    let law = ReturnsLaw::StudentT { df: 6.0 };
    let config = SimConfig { k: 30, n: 1260, returns_law: law, replications: 600, ..SimConfig::default() };

    let panel = sample_returns(&config, 0)?;
    let est = estimate_moments(&panel, 0.0)?;
    let kappa = estimate_kurtosis_factor(&panel)?;
    println!("kurtosis factor: true {:.3}, estimated {kappa:.3}", law.kurtosis_factor());

    let event = select_max(&est.sharpe)?;
    for flavor in [CovarianceFlavor::Gaussian, CovarianceFlavor::Elliptical { kurtosis_factor: kappa }] {
        let q = sharpe_covariance(&est.corr, &est.sharpe, flavor, est.n)?;
        let t = truncation_bounds(&event, &est.sharpe, &q)?;
        println!("{flavor:?}: p {:.4}, 95% lcb {:.4}", t.p_value(0.0)?, t.lower_bound(0.05)?);
    }

    for mode in [CovarianceMode::FeasibleGaussian, CovarianceMode::FeasibleElliptical] {
        let c = SimConfig { covariance_mode: mode, methods: vec![Method::Conditional], ..config.clone() };
        let s = run_null_calibration(&c)?;
        let m = s.method(Method::Conditional).expect("requested");
        println!("{mode:?}: size {:.4}, K-S {:.4}", m.rejection_rate, m.ks_statistic.unwrap_or(f64::NAN));
    }
    Ok(())
}
