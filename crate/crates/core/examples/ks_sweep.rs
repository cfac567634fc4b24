//! How far the conditional p-values drift from uniform across panel shapes.
//!
//! cargo run --release --example ks_sweep

use maxsharpe::sim::{run_ks_sweep, with_threads, CovarianceMode, SimConfig, SnrConfig};

fn main() -> maxsharpe::Result<()> {
    let mut grid = Vec::new();
    for n in [126, 2016] {
        for k in [20, 250] {
            grid.push(SimConfig {
                k,
                n,
                rho: 0.0,
                snr: SnrConfig::UniformRange { lo: 0.0, hi: 0.1 },
                replications: 1000,
                covariance_mode: CovarianceMode::FeasibleGaussian,
                ..SimConfig::default()
            });
        }
    }
    // results do not depend on the thread count
    let rows = with_threads(4, || run_ks_sweep(&grid))??;
    for r in rows {
        println!("n {:>5}  k {:>4}  K-S {:.4}", r.n, r.k, r.ks_statistic.unwrap_or(f64::NAN));
    }
    Ok(())
}
