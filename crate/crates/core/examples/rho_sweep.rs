//! Size of each test as the common correlation grows, with no skill anywhere.
//! Plain Bonferroni becomes conservative; the conditional test does not.
//!
//! cargo run --release --example rho_sweep

use maxsharpe::sim::{run_rho_sweep, CovarianceMode, SimConfig, SnrConfig};
use maxsharpe::Method;

fn main() -> maxsharpe::Result<()> {
    let template = SimConfig {
        k: 50,
        n: 504,
        snr: SnrConfig::Zero,
        replications: 1000,
        covariance_mode: CovarianceMode::FeasibleGaussian,
        methods: vec![Method::Conditional, Method::Bonferroni, Method::BonferroniFixed],
        ..SimConfig::default()
    };
    let rows = run_rho_sweep(&template, &[0.0, 0.2, 0.4, 0.6, 0.8])?;
    println!("{:>5} {:<18} {:>8}", "rho", "method", "size");
    for r in rows {
        println!("{:>5.1} {:<18} {:>8.4}", r.rho, r.method.as_str(), r.rejection_rate);
    }
    Ok(())
}
