//! Power of the conditional test against the rho-based alternatives when one
//! asset is good and the rest are bad, binned by the true Sharpe of the
//! asset that got selected.
//!
//! cargo run --release --example power_study

use maxsharpe::sim::{run_power_study, CovarianceMode, SimConfig, SnrConfig};
use maxsharpe::Method;

fn main() -> maxsharpe::Result<()> {
    for snr in [SnrConfig::OneGood { zeta: 0.1 }, SnrConfig::HalfGood { zeta: 0.05 }] {
        let config = SimConfig {
            k: 50,
            n: 1008,
            rho: 0.0,
            snr: snr.clone(),
            replications: 500,
            covariance_mode: CovarianceMode::FeasibleGaussian,
            methods: vec![Method::Conditional, Method::Bonferroni, Method::Chibar, Method::Follman],
            ..SimConfig::default()
        };
        let s = run_power_study(&config)?;
        println!("{snr:?}: picked a bad asset {} times of {}", s.bad_selection_count, s.replications);
        for m in &s.methods {
            println!("  {:<12} power {:.3}", m.method.as_str(), m.rejection_rate);
        }
        let cond = s.method(Method::Conditional).expect("requested");
        for b in cond.power_by_selected_snr.iter().filter(|b| b.trials > 0) {
            let note = if b.low_confidence { " (few trials)" } else { "" };
            println!("  selected snr [{:+.3}, {:+.3}): {}/{}{note}", b.lo, b.hi, b.rejections, b.trials);
        }
    }
    Ok(())
}
