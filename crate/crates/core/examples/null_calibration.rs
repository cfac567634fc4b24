//! Under the null the conditional p-values should be uniform. Runs the
//! calibration study and prints the K-S distance and tail deviations with
//! their binomial bands.
//!
//! cargo run --release --example null_calibration [replications]

use maxsharpe::sim::{run_null_calibration, CovarianceMode, SimConfig};
use maxsharpe::Method;

fn main() -> maxsharpe::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let config = SimConfig {
        replications,
        covariance_mode: CovarianceMode::FeasibleGaussian,
        methods: vec![Method::Conditional, Method::Naive],
        ..SimConfig::default()
    };
    let summary = run_null_calibration(&config)?;
    for m in &summary.methods {
        println!(
            "{:<12} size {:.4}  K-S {:.4}  failures {}",
            m.method.as_str(),
            m.rejection_rate,
            m.ks_statistic.unwrap_or(f64::NAN),
            m.failures
        );
        for d in &m.delta_curve {
            let flag = if d.within_band() { "" } else { "  outside band" };
            println!("    q {:>5.3}  delta {:+.4}  band [{:+.4}, {:+.4}]{flag}", d.q, d.delta, d.band_lo, d.band_hi);
        }
    }
    Ok(())
}
