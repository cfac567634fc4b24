use maxsharpe::classical::{bonferroni_rho_fixed, chi_bar_square_test, follman_test, hansen_chi_bar_square_with_margin};
use maxsharpe::dist::norm_sf;
use maxsharpe::sim::{run_ks_sweep, run_power_study, CovarianceMode, SimConfig, SnrConfig};
use maxsharpe::Method;
use nalgebra::DVector;

fn feasible(k: usize, n: usize) -> SimConfig {
    SimConfig {
        k,
        n,
        rho: 0.0,
        snr: SnrConfig::UniformRange { lo: 0.0, hi: 0.1 },
        replications: 2000,
        covariance_mode: CovarianceMode::FeasibleGaussian,
        ..SimConfig::default()
    }
}

#[test]
fn ks_larger_when_assets_outnumber_periods() {
    let grid = [feasible(200, 126), feasible(50, 2016)];
    let rows = run_ks_sweep(&grid).unwrap();
    let wide = rows[0].ks_statistic.unwrap();
    let long = rows[1].ks_statistic.unwrap();
    assert!(wide > long, "k >> n {wide} vs {long}");
    assert_eq!(run_ks_sweep(&grid).unwrap(), rows);
}

#[test]
fn half_good_never_selects_a_bad_asset_at_moderate_snr() {
    let c = SimConfig {
        k: 100,
        n: 1008,
        rho: 0.0,
        snr: SnrConfig::HalfGood { zeta: 0.06 },
        methods: vec![Method::Conditional],
        ..feasible(100, 1008)
    };
    let s = run_power_study(&c).unwrap();
    assert_eq!(s.bad_selection_count, 0);
    let bins = &s.method(Method::Conditional).unwrap().power_by_selected_snr;
    assert_eq!(bins.iter().map(|b| b.trials).sum::<usize>(), 2000);
    assert_eq!(bins.last().unwrap().trials, 2000);
    assert!(bins[..bins.len() - 1].iter().all(|b| b.low_confidence));
}

#[test]
fn zero_rho_reduces_to_uncorrected_forms() {
    let z = DVector::from_column_slice(&[0.05, 0.11, -0.02, 0.07]);
    let (n, c0) = (400usize, 0.01);
    let sn = (n as f64).sqrt();
    let fixed = bonferroni_rho_fixed(&z, n, 0.0, c0, 0.05).unwrap();
    assert!((fixed.statistic - sn * (0.11 - c0)).abs() < 1e-12);
    assert!((fixed.p_value - 4.0 * norm_sf(sn * (0.11 - c0))).abs() < 1e-15);
    let chi = chi_bar_square_test(&z, n, 0.0, c0, 0.05).unwrap();
    let direct: f64 = z.iter().map(|v| (v - c0).max(0.0).powi(2)).sum::<f64>() * n as f64;
    assert!((chi.statistic - direct).abs() < 1e-12);
    let hansen = hansen_chi_bar_square_with_margin(&z, n, 0.0, c0, 0.05, f64::INFINITY).unwrap();
    assert_eq!(hansen.p_value, chi.p_value);
    let fol = follman_test(&z, n, 0.0, c0, 0.05).unwrap();
    let g2: f64 = z.iter().map(|v| (v - c0).powi(2)).sum::<f64>() * n as f64;
    assert!((fol.statistic - g2).abs() < 1e-9);
}
