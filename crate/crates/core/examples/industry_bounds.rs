//! Reads a wide CSV of returns (first column dates), picks the asset with the
//! best Sharpe ratio and prints every method's 95% lower bound. This is what
//! `maxsharpe ci` does; without an argument a synthetic five-asset monthly
//! panel is written to a temporary file first.
//!
//! cargo run --release --example industry_bounds [returns.csv]

use std::path::PathBuf;

use clap::Parser;
use maxsharpe::cli::render_table;
use maxsharpe::io::{load_panel, PanelFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn synthetic(dir: &std::path::Path) -> std::io::Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(1926);
    let drift = [0.95, 0.9, 0.85, 0.8, 0.7];
    let mut s = String::from("date,Cnsmr,Manuf,HiTec,Hlth,Other\n");
    for t in 0..1104 {
        let market: f64 = rng.sample(StandardNormal);
        s.push_str(&format!("{}{:02}", 1926 + (t + 6) / 12, (t + 6) % 12 + 1));
        for d in drift {
            let own: f64 = rng.sample(StandardNormal);
            s.push_str(&format!(",{:.4}", d + 4.5 * market + 2.5 * own));
        }
        s.push('\n');
    }
    let path = dir.join("industries.csv");
    std::fs::write(&path, s)?;
    Ok(path)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => synthetic(tmp.path())?,
    };

    let loaded = load_panel(&PanelFile::new(&path))?;
    println!("{} months, {} assets", loaded.panel.n(), loaded.panel.k());

    // same code path as the binary
    let cli = maxsharpe::cli::Cli::try_parse_from(["maxsharpe", "ci", "-i", path.to_str().unwrap(), "--methods", "all"])?;
    if let maxsharpe::cli::Command::Ci(args) = cli.command {
        let report = maxsharpe::cli::cmd_ci(&args)?;
        print!("{}", render_table(&report, 1.0));
    }
    Ok(())
}
