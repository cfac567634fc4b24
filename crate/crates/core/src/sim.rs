//! Seeded Monte Carlo experiments: null calibration, K-S sweeps, power under
//! structured alternatives, and size versus common correlation.
//!
//! Every replication draws from its own ChaCha stream selected by
//! `(seed, replication)`, and results are reduced in replication order, so
//! output does not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::classical::{bonferroni_naive, bonferroni_slepian, rho_estimate, rho_from_column, run_rho_test, RhoSource};
use crate::error::{Error, Result};
use crate::moments::{
    argmax, correlation_column, estimate_kurtosis_factor, estimate_marginals, estimate_moments, rank_one_correlation,
    sharpe_covariance_column, CovarianceFlavor, ReturnsPanel,
};
use crate::outcome::{check_alpha, Method, TestOutcome};
use crate::selection::{select_max, truncation_bounds_from_q_eta};

/// Quantiles at which the sampled-CDF deviation is tracked.
pub const DELTA_QUANTILES: [f64; 5] = [0.005, 0.01, 0.025, 0.05, 0.10];
pub const POWER_BINS: usize = 20;
/// Bins with fewer observations are flagged.
pub const LOW_CONFIDENCE_COUNT: usize = 25;
/// Largest tolerated fraction of failed (replication, method) pairs.
pub const MAX_FAILURE_RATE: f64 = 0.001;

/// Population SNR vector of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SnrConfig {
    /// Evenly spaced from `lo` to `hi` inclusive.
    UniformRange { lo: f64, hi: f64 },
    AllEqual { zeta: f64 },
    /// One asset at `zeta`, the rest at `-zeta`.
    OneGood { zeta: f64 },
    /// `k / 2` assets at `zeta`, the rest at `-zeta`.
    HalfGood { zeta: f64 },
    Zero,
}

impl SnrConfig {
    pub fn vector(&self, k: usize) -> DVector<f64> {
        match *self {
            SnrConfig::UniformRange { lo, hi } => {
                if k == 1 {
                    DVector::from_element(1, lo)
                } else {
                    DVector::from_fn(k, |i, _| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                }
            }
            SnrConfig::AllEqual { zeta } => DVector::from_element(k, zeta),
            SnrConfig::OneGood { zeta } => DVector::from_fn(k, |i, _| if i == 0 { zeta } else { -zeta }),
            SnrConfig::HalfGood { zeta } => {
                let m = (k / 2).max(1);
                DVector::from_fn(k, |i, _| if i < m { zeta } else { -zeta })
            }
            SnrConfig::Zero => DVector::zeros(k),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            SnrConfig::UniformRange { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            SnrConfig::AllEqual { zeta } | SnrConfig::OneGood { zeta } | SnrConfig::HalfGood { zeta } => {
                zeta.is_finite()
            }
            SnrConfig::Zero => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReturnsLaw {
    Gaussian,
    /// Multivariate t, rescaled so its covariance equals the target.
    StudentT { df: f64 },
}

impl ReturnsLaw {
    /// One third of the marginal kurtosis.
    pub fn kurtosis_factor(&self) -> f64 {
        match *self {
            ReturnsLaw::Gaussian => 1.0,
            ReturnsLaw::StudentT { df } => 1.0 + 2.0 / (df - 4.0),
        }
    }
}

/// Where the conditional test gets its covariance and the rho-based tests
/// get rho.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// True correlation, SNR and kurtosis.
    Infeasible,
    FeasibleGaussian,
    FeasibleElliptical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub n: usize,
    /// Common correlation, in `[0, 1)`.
    pub rho: f64,
    pub snr: SnrConfig,
    pub returns_law: ReturnsLaw,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub covariance_mode: CovarianceMode,
    /// Null value for power studies and rho sweeps. Null calibration always
    /// tests at the true SNR of the selected asset.
    pub null_value: f64,
    pub retain_p_values: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            k: 100,
            n: 1260,
            rho: 0.7,
            snr: SnrConfig::UniformRange { lo: -0.1, hi: 0.1 },
            returns_law: ReturnsLaw::Gaussian,
            replications: 2000,
            seed: 2019,
            methods: vec![Method::Conditional],
            alpha: 0.05,
            covariance_mode: CovarianceMode::Infeasible,
            null_value: 0.0,
            retain_p_values: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.n < 4 {
            return Err(Error::Config(format!("n must be at least 4, got {}", self.n)));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !self.snr.is_finite() {
            return Err(Error::Config(format!("SNR configuration is not finite: {:?}", self.snr)));
        }
        if let ReturnsLaw::StudentT { df } = self.returns_law {
            if !(df > 2.0) {
                return Err(Error::Config(format!("t degrees of freedom must exceed 2, got {df}")));
            }
            if !(df > 4.0) {
                return Err(Error::Config(format!("t degrees of freedom must exceed 4 for finite kurtosis, got {df}")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if !self.null_value.is_finite() {
            return Err(Error::Config("null value must be finite".into()));
        }
        check_alpha(self.alpha).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn snr_vector(&self) -> DVector<f64> {
        self.snr.vector(self.k)
    }
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

fn sample_values(config: &SimConfig, snr: &DVector<f64>, replication: usize) -> DMatrix<f64> {
    let mut rng = replication_rng(config.seed, replication);
    let (n, k) = (config.n, config.k);
    let load = config.rho.sqrt();
    let idio = (1.0 - config.rho).sqrt();
    let chi = match config.returns_law {
        ReturnsLaw::StudentT { df } => Some((df, ChiSquared::new(df).expect("df validated"))),
        ReturnsLaw::Gaussian => None,
    };
    let mut x = DMatrix::zeros(n, k);
    for t in 0..n {
        let scale = match &chi {
            Some((df, law)) => ((df - 2.0) / law.sample(&mut rng)).sqrt(),
            None => 1.0,
        };
        let f: f64 = rng.sample(StandardNormal);
        for j in 0..k {
            let e: f64 = rng.sample(StandardNormal);
            x[(t, j)] = snr[j] + scale * (load * f + idio * e);
        }
    }
    x
}

/// Draws the returns panel of one replication: unit volatilities, constant
/// correlation `rho`, and means equal to the configured SNRs.
pub fn sample_returns(config: &SimConfig, replication: usize) -> Result<ReturnsPanel> {
    config.validate()?;
    ReturnsPanel::from_matrix(sample_values(config, &config.snr_vector(), replication))
}

/// `sup |F_m(p) - p|` for the empirical CDF of `p_values`.
pub fn ks_statistic(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("K-S statistic of an empty sample".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let mut v = p_values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0_f64, |d, (i, &p)| {
        d.max((i as f64 + 1.0) / m - p).max(p - i as f64 / m)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub q: f64,
    /// Fraction of p-values at or below `q`, minus `q`.
    pub delta: f64,
    /// Central 95% binomial band for `delta` under uniformity.
    pub band_lo: f64,
    pub band_hi: f64,
}

impl DeltaPoint {
    pub fn within_band(&self) -> bool {
        self.delta >= self.band_lo && self.delta <= self.band_hi
    }

    pub fn half_width(&self) -> f64 {
        self.band_hi.max(-self.band_lo)
    }
}

fn binomial_quantile(law: &Binomial, n: u64, prob: f64) -> u64 {
    // smallest x with cdf(x) >= prob
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if law.cdf(mid) >= prob {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Sampled-CDF deviations at each `q` with binomial 95% bands.
pub fn delta_curve(p_values: &[f64], quantiles: &[f64]) -> Vec<DeltaPoint> {
    let m = p_values.len();
    quantiles
        .iter()
        .map(|&q| {
            if m == 0 {
                return DeltaPoint { q, delta: f64::NAN, band_lo: f64::NAN, band_hi: f64::NAN };
            }
            let mf = m as f64;
            let hits = p_values.iter().filter(|&&p| p <= q).count();
            let law = Binomial::new(q, m as u64).expect("q in (0, 1)");
            let lo = binomial_quantile(&law, m as u64, 0.025) as f64;
            let hi = binomial_quantile(&law, m as u64, 0.975) as f64;
            DeltaPoint { q, delta: hits as f64 / mf - q, band_lo: lo / mf - q, band_hi: hi / mf - q }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBin {
    pub lo: f64,
    pub hi: f64,
    pub trials: usize,
    pub rejections: usize,
    pub rejection_rate: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub ks_statistic: Option<f64>,
    pub delta_curve: Vec<DeltaPoint>,
    pub power_by_selected_snr: Vec<PowerBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub replications: usize,
    /// Replications whose selected asset has negative SNR.
    pub bad_selection_count: usize,
    pub methods: Vec<MethodSummary>,
    /// First few failure messages, for diagnosis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_samples: Vec<String>,
}

impl SimSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NullPolicy {
    TrueSelected,
    Configured,
}

struct Replication {
    selected_snr: f64,
    outcomes: Vec<std::result::Result<(f64, bool), String>>,
}

struct Setup<'a> {
    config: &'a SimConfig,
    snr: DVector<f64>,
    null: NullPolicy,
}

impl Setup<'_> {
    fn run(&self, replication: usize) -> Replication {
        let config = self.config;
        let values = sample_values(config, &self.snr, replication);
        let result = ReturnsPanel::from_matrix(values).and_then(|panel| {
            let marginals = estimate_marginals(&panel, 0.0)?;
            Ok((panel, marginals))
        });
        let (panel, marginals) = match result {
            Ok(v) => v,
            Err(e) => {
                let s = argmax(&self.snr);
                return Replication {
                    selected_snr: self.snr[s],
                    outcomes: config.methods.iter().map(|_| Err(e.to_string())).collect(),
                };
            }
        };
        let sharpe = &marginals.sharpe;
        let s = argmax(sharpe);
        let selected_snr = self.snr[s];
        let null_value = match self.null {
            NullPolicy::TrueSelected => selected_snr,
            NullPolicy::Configured => config.null_value,
        };
        let feasible = config.covariance_mode != CovarianceMode::Infeasible;
        let corr_col = if feasible {
            correlation_column(&panel, &marginals, s)
        } else {
            DVector::from_fn(config.k, |i, _| if i == s { 1.0 } else { config.rho })
        };
        let rho = if feasible {
            rho_from_column(&corr_col, s)
        } else {
            rho_estimate(config.rho, config.k, RhoSource::Supplied)
        };
        let outcomes = config
            .methods
            .iter()
            .map(|&m| {
                self.one(m, &panel, sharpe, s, &corr_col, &rho, null_value)
                    .map(|o| (o.p_value, o.reject))
                    .map_err(|e| format!("replication {replication}, {m}: {e}"))
            })
            .collect();
        Replication { selected_snr, outcomes }
    }

    #[allow(clippy::too_many_arguments)]
    fn one(
        &self,
        method: Method,
        panel: &ReturnsPanel,
        sharpe: &DVector<f64>,
        s: usize,
        corr_col: &DVector<f64>,
        rho: &crate::classical::RhoEstimate,
        null_value: f64,
    ) -> Result<TestOutcome> {
        let config = self.config;
        let (n, k, alpha) = (config.n, config.k, config.alpha);
        match method {
            Method::Conditional => {
                let (snr, flavor) = match config.covariance_mode {
                    CovarianceMode::Infeasible => {
                        let kappa = config.returns_law.kurtosis_factor();
                        let flavor = if kappa == 1.0 {
                            CovarianceFlavor::Gaussian
                        } else {
                            CovarianceFlavor::Elliptical { kurtosis_factor: kappa }
                        };
                        (&self.snr, flavor)
                    }
                    CovarianceMode::FeasibleGaussian => (sharpe, CovarianceFlavor::Gaussian),
                    CovarianceMode::FeasibleElliptical => {
                        let kappa = estimate_kurtosis_factor(panel)?;
                        (sharpe, CovarianceFlavor::Elliptical { kurtosis_factor: kappa })
                    }
                };
                let q_eta = sharpe_covariance_column(corr_col, snr, s, flavor, n)?;
                let event = select_max(sharpe)?;
                truncation_bounds_from_q_eta(&event, sharpe, &q_eta)?.test(null_value, alpha)
            }
            Method::Naive => bonferroni_naive(sharpe[s], n, 1, null_value, alpha),
            Method::Bonferroni => bonferroni_naive(sharpe[s], n, k, null_value, alpha),
            Method::BonferroniSlepian => {
                let corr = if config.covariance_mode == CovarianceMode::Infeasible {
                    rank_one_correlation(config.rho, k)?
                } else {
                    estimate_moments(panel, 0.0)?.corr
                };
                bonferroni_slepian(sharpe, n, &corr, null_value, alpha)
            }
            _ => run_rho_test(method, sharpe, n, rho, null_value, alpha),
        }
    }
}

fn power_bins(snr: &DVector<f64>) -> Vec<(f64, f64)> {
    let lo = snr.min();
    let hi = snr.max();
    if !(hi > lo) {
        return vec![(lo, hi)];
    }
    let w = (hi - lo) / POWER_BINS as f64;
    (0..POWER_BINS)
        .map(|i| (lo + w * i as f64, if i + 1 == POWER_BINS { hi } else { lo + w * (i + 1) as f64 }))
        .collect()
}

fn bin_index(bins: &[(f64, f64)], x: f64) -> usize {
    let last = bins.len() - 1;
    if bins.len() == 1 {
        return 0;
    }
    let (lo, _) = bins[0];
    let w = bins[0].1 - lo;
    (((x - lo) / w).floor().max(0.0) as usize).min(last)
}

fn run_replications(config: &SimConfig, null: NullPolicy) -> Result<SimSummary> {
    config.validate()?;
    let setup = Setup { config, snr: config.snr_vector(), null };
    let reps: Vec<Replication> = (0..config.replications).into_par_iter().map(|r| setup.run(r)).collect();
    summarize(config, &setup.snr, &reps)
}

fn summarize(config: &SimConfig, snr: &DVector<f64>, reps: &[Replication]) -> Result<SimSummary> {
    let bins = power_bins(snr);
    let bad_selection_count = reps.iter().filter(|r| r.selected_snr < 0.0).count();
    let mut failure_samples = Vec::new();
    let mut total_failures = 0usize;
    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let mut p_values = Vec::with_capacity(reps.len());
        let mut rejections = 0usize;
        let mut failures = 0usize;
        let mut bin_trials = vec![0usize; bins.len()];
        let mut bin_rejections = vec![0usize; bins.len()];
        for r in reps {
            match &r.outcomes[mi] {
                Ok((p, reject)) => {
                    p_values.push(*p);
                    let b = bin_index(&bins, r.selected_snr);
                    bin_trials[b] += 1;
                    if *reject {
                        rejections += 1;
                        bin_rejections[b] += 1;
                    }
                }
                Err(msg) => {
                    failures += 1;
                    if failure_samples.len() < 5 {
                        failure_samples.push(msg.clone());
                    }
                }
            }
        }
        total_failures += failures;
        let trials = p_values.len();
        let power_by_selected_snr = bins
            .iter()
            .zip(bin_trials.iter().zip(&bin_rejections))
            .map(|(&(lo, hi), (&t, &rj))| PowerBin {
                lo,
                hi,
                trials: t,
                rejections: rj,
                rejection_rate: (t > 0).then(|| rj as f64 / t as f64),
                low_confidence: t < LOW_CONFIDENCE_COUNT,
            })
            .collect();
        methods.push(MethodSummary {
            method,
            trials,
            failures,
            rejections,
            rejection_rate: if trials > 0 { rejections as f64 / trials as f64 } else { f64::NAN },
            ks_statistic: if trials > 0 { Some(ks_statistic(&p_values)?) } else { None },
            delta_curve: delta_curve(&p_values, &DELTA_QUANTILES),
            power_by_selected_snr,
            p_values: config.retain_p_values.then_some(p_values),
        });
    }
    let attempted = reps.len() * config.methods.len();
    if total_failures as f64 > MAX_FAILURE_RATE * attempted as f64 {
        return Err(Error::Simulation(format!(
            "{total_failures} of {attempted} replication tests failed; first: {}",
            failure_samples.first().map(String::as_str).unwrap_or("")
        )));
    }
    Ok(SimSummary { replications: reps.len(), bad_selection_count, methods, failure_samples })
}

/// Null calibration: every method is tested at the true SNR of the selected
/// asset, so its p-values should be uniform.
pub fn run_null_calibration(config: &SimConfig) -> Result<SimSummary> {
    run_replications(config, NullPolicy::TrueSelected)
}

/// Rejection rates at `config.null_value`, binned by the true SNR of the
/// selected asset.
pub fn run_power_study(config: &SimConfig) -> Result<SimSummary> {
    if matches!(config.snr, SnrConfig::UniformRange { .. }) {
        return Err(Error::Config("power study needs an all_equal, one_good, half_good or zero SNR".into()));
    }
    run_replications(config, NullPolicy::Configured)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub n: usize,
    pub k: usize,
    pub rho: f64,
    pub method: Method,
    pub ks_statistic: Option<f64>,
}

/// One null calibration per grid cell.
pub fn run_ks_sweep(grid: &[SimConfig]) -> Result<Vec<KsRow>> {
    let mut rows = Vec::new();
    for config in grid {
        let summary = run_null_calibration(config)?;
        for m in &summary.methods {
            rows.push(KsRow { n: config.n, k: config.k, rho: config.rho, method: m.method, ks_statistic: m.ks_statistic });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepRow {
    pub rho: f64,
    pub method: Method,
    pub trials: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
}

/// Empirical size per method at each `rho`, under a zero SNR.
pub fn run_rho_sweep(template: &SimConfig, rhos: &[f64]) -> Result<Vec<RhoSweepRow>> {
    if template.snr != SnrConfig::Zero {
        return Err(Error::Config("rho sweep needs snr = zero".into()));
    }
    let mut rows = Vec::new();
    for &rho in rhos {
        let config = SimConfig { rho, ..template.clone() };
        let summary = run_replications(&config, NullPolicy::Configured)?;
        for m in summary.methods {
            rows.push(RhoSweepRow {
                rho,
                method: m.method,
                trials: m.trials,
                rejections: m.rejections,
                rejection_rate: m.rejection_rate,
            });
        }
    }
    Ok(rows)
}

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Simulation(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
