//! Competing tests of `H0: zeta_i = zeta0 for all i`: Bonferroni variants,
//! chi-bar-square, Follman, and Hansen's log-log adjusted forms.
//!
//! The rho-based tests assume the constant-correlation model
//! `R = rho 11' + (1 - rho) I` and work with the whitened Sharpe vector
//! `xi = R^{-1/2} zhat`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{chi_square_sf, noncentral_t_cdf, norm_sf};
use crate::error::{Error, Result};
use crate::moments::{argmax, check_rho, median, MomentEstimates};
use crate::outcome::{check_alpha, Method, TestOutcome};

/// Margin kept from the singular ends of the rho range when clamping.
pub const RHO_CLAMP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    Supplied,
    MeanSelectedVsRest,
    MedianPairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho: f64,
    pub source: RhoSource,
    /// Set when the raw estimate left the positive-definite range.
    pub clamped: bool,
}

fn clamp_rho(raw: f64, k: usize) -> (f64, bool) {
    let lower = if k > 1 { -1.0 / (k as f64 - 1.0) } else { -1.0 };
    let (lo, hi) = (lower + RHO_CLAMP_EPS, 1.0 - RHO_CLAMP_EPS);
    if raw < lo {
        (lo, true)
    } else if raw > hi {
        (hi, true)
    } else {
        (raw, false)
    }
}

/// Common correlation estimate from the sample correlation matrix.
pub fn estimate_rho(moments: &MomentEstimates, selected: usize, source: RhoSource) -> Result<RhoEstimate> {
    let k = moments.k();
    if k < 2 {
        return Err(Error::InvalidArgument("rho needs at least two assets".into()));
    }
    if selected >= k {
        return Err(Error::InvalidArgument(format!("selected index {selected} out of range for k = {k}")));
    }
    let raw = match source {
        RhoSource::MeanSelectedVsRest | RhoSource::Supplied => {
            (0..k).filter(|&j| j != selected).map(|j| moments.corr[(selected, j)]).sum::<f64>() / (k as f64 - 1.0)
        }
        RhoSource::MedianPairwise => {
            let mut v: Vec<f64> = (0..k).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| moments.corr[(i, j)]).collect();
            median(&mut v)
        }
    };
    Ok(rho_estimate(raw, k, source))
}

/// Mean correlation of the selected asset against the rest, from one
/// correlation column.
pub fn rho_from_column(corr_column: &DVector<f64>, selected: usize) -> RhoEstimate {
    let k = corr_column.len();
    let raw = (0..k).filter(|&j| j != selected).map(|j| corr_column[j]).sum::<f64>() / (k as f64 - 1.0).max(1.0);
    rho_estimate(raw, k, RhoSource::MeanSelectedVsRest)
}

/// Wraps a rho, clamping into the valid range if needed.
pub fn rho_estimate(raw: f64, k: usize, source: RhoSource) -> RhoEstimate {
    let (rho, clamped) = clamp_rho(raw, k);
    RhoEstimate { rho, source, clamped }
}

fn with_rho_warning(mut outcome: TestOutcome, rho: &RhoEstimate) -> TestOutcome {
    if rho.clamped {
        outcome.warnings.push(format!("rho clamped into the positive-definite range ({:.6})", rho.rho));
    }
    outcome
}

/// Binomial mixing weights of the chi-bar-square law, `C(k, i) 2^-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiBarWeights {
    weights: Vec<f64>,
    k: usize,
}

impl ChiBarWeights {
    pub fn new(k: usize) -> Self {
        // ratios outward from the mode, then normalise; 2^-k underflows past k = 1074
        let mode = k / 2;
        let mut weights = vec![0.0; k + 1];
        weights[mode] = 1.0;
        for i in (0..mode).rev() {
            weights[i] = weights[i + 1] * (i + 1) as f64 / (k - i) as f64;
        }
        for i in mode + 1..=k {
            weights[i] = weights[i - 1] * (k - i + 1) as f64 / i as f64;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        ChiBarWeights { weights, k }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `1 - sum_i w_i F_{chi2_i}(x)`, summed as upper tails.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return (1.0 - self.weights[0]).max(0.0);
        }
        self.weights.iter().enumerate().skip(1).map(|(i, w)| w * chi_square_sf(x, i)).sum::<f64>().clamp(0.0, 1.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.sf(x)
    }
}

fn check_common(sharpe: &DVector<f64>, n: usize, rho: f64, alpha: f64) -> Result<()> {
    if sharpe.is_empty() {
        return Err(Error::InvalidArgument("empty Sharpe vector".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    check_rho(rho, sharpe.len())?;
    check_alpha(alpha)
}

fn mean(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// `c = (1 + (k - 1) rho)^{-1/2}`, the eigenvalue of `R^{-1/2}` on `1`.
pub fn ones_scale(rho: f64, k: usize) -> f64 {
    (1.0 + (k as f64 - 1.0) * rho).powf(-0.5)
}

/// Whitened Sharpe vector `xi = R^{-1/2} zhat` for the constant-correlation
/// model, in `O(k)`.
pub fn xi_transform(sharpe: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    let k = sharpe.len();
    check_rho(rho, k)?;
    let c = ones_scale(rho, k);
    let b = (1.0 - rho).powf(-0.5);
    let m = mean(sharpe);
    Ok(sharpe.map(|z| c * m + b * (z - m)))
}

/// Noncentral-t Bonferroni test on the largest Sharpe ratio.
///
/// `p = k (1 - F(sqrt(n) max zhat))` under the noncentral t with `n - 1`
/// degrees of freedom and noncentrality `sqrt(n) c0`.
pub fn bonferroni_naive(max_sharpe: f64, n: usize, k: usize, c0: f64, alpha: f64) -> Result<TestOutcome> {
    if n < 2 || k < 1 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and k >= 1, got n = {n}, k = {k}")));
    }
    check_alpha(alpha)?;
    let sn = (n as f64).sqrt();
    let t = sn * max_sharpe;
    let upper = 1.0 - noncentral_t_cdf(t, n as f64 - 1.0, sn * c0)?;
    let method = if k == 1 { Method::Naive } else { Method::Bonferroni };
    Ok(TestOutcome::from_p_value(method, t, (k as f64 * upper).min(1.0), alpha, c0))
}

/// Bonferroni critical value on the `sqrt(n) zhat` scale: the `1 - alpha/k`
/// quantile of the noncentral t.
pub fn bonferroni_critical_value(n: usize, k: usize, c0: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    crate::dist::noncentral_t_quantile(1.0 - alpha / k as f64, n as f64 - 1.0, (n as f64).sqrt() * c0)
}

/// Bonferroni with the constant-correlation fix. The statistic is the
/// coordinate of `sqrt(n) R^{-1/2} (zhat - c0 1)` belonging to the largest
/// Sharpe ratio (the transform preserves order).
pub fn bonferroni_rho_fixed(sharpe: &DVector<f64>, n: usize, rho: f64, c0: f64, alpha: f64) -> Result<TestOutcome> {
    check_common(sharpe, n, rho, alpha)?;
    let k = sharpe.len();
    let sn = (n as f64).sqrt();
    let top = sharpe[argmax(sharpe)];
    let b = (1.0 - rho).powf(-0.5);
    let coef = (1.0 - rho + k as f64 * rho).powf(-0.5) - b;
    let z1 = sn * (top - c0) * b + coef * sn * (mean(sharpe) - c0);
    let p = (k as f64 * norm_sf(z1)).min(1.0);
    Ok(TestOutcome::from_p_value(Method::BonferroniFixed, z1, p, alpha, c0))
}

/// Worst-case constant-correlation Bonferroni: plugs in the smallest
/// off-diagonal correlation.
pub fn bonferroni_slepian(
    sharpe: &DVector<f64>,
    n: usize,
    corr: &DMatrix<f64>,
    c0: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    let k = sharpe.len();
    if corr.nrows() != k || corr.ncols() != k {
        return Err(Error::Dimension(format!("{}x{} correlation for {k} assets", corr.nrows(), corr.ncols())));
    }
    let mut rho = if k > 1 { f64::INFINITY } else { 0.0 };
    for i in 0..k {
        for j in 0..k {
            if i != j {
                if corr[(i, j)] < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative correlation {} between assets {i} and {j}",
                        corr[(i, j)]
                    )));
                }
                rho = rho.min(corr[(i, j)]);
            }
        }
    }
    let est = rho_estimate(rho, k, RhoSource::Supplied);
    let mut out = bonferroni_rho_fixed(sharpe, n, est.rho, c0, alpha)?;
    out.method = Method::BonferroniSlepian;
    Ok(with_rho_warning(out, &est))
}

/// Chi-bar-square statistic `n sum_i (xi_i - c zeta0)_+^2`.
pub fn chi_bar_statistic(xi: &DVector<f64>, n: usize, shift: f64) -> f64 {
    n as f64 * xi.iter().map(|&x| (x - shift).max(0.0).powi(2)).sum::<f64>()
}

/// One-sided chi-bar-square test under the constant-correlation model.
pub fn chi_bar_square_test(sharpe: &DVector<f64>, n: usize, rho: f64, zeta0: f64, alpha: f64) -> Result<TestOutcome> {
    check_common(sharpe, n, rho, alpha)?;
    let k = sharpe.len();
    let xi = xi_transform(sharpe, rho)?;
    let shift = ones_scale(rho, k) * zeta0;
    let stat = chi_bar_statistic(&xi, n, shift);
    let p = ChiBarWeights::new(k).sf(stat);
    Ok(TestOutcome::from_p_value(Method::Chibar, stat, p, alpha, zeta0))
}

/// Follman's test. The p-value is half the chi-square tail when the mean
/// Sharpe exceeds `zeta0`, and 1 otherwise.
pub fn follman_test(sharpe: &DVector<f64>, n: usize, rho: f64, zeta0: f64, alpha: f64) -> Result<TestOutcome> {
    check_common(sharpe, n, rho, alpha)?;
    let k = sharpe.len();
    let nf = n as f64;
    let m = mean(sharpe);
    let c = ones_scale(rho, k);
    let spread: f64 = sharpe.iter().map(|z| (z - m).powi(2)).sum();
    let g2 = nf * k as f64 * c * c * (m - zeta0).powi(2) + nf / (1.0 - rho) * spread;
    let p = if m > zeta0 { 0.5 * chi_square_sf(g2, k) } else { 1.0 };
    Ok(TestOutcome::from_p_value(Method::Follman, g2, p, alpha, zeta0))
}

/// `sqrt(2 log log n / n)`, Hansen's threshold margin.
pub fn hansen_margin(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("log log n needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    Ok((2.0 * nf.ln().ln() / nf).sqrt())
}

fn count_above(xi: &DVector<f64>, threshold: f64) -> usize {
    xi.iter().filter(|&&x| x > threshold).count()
}

/// Number of whitened Sharpes above `c zeta0 - sqrt(2 log log n / n)`.
pub fn hansen_effective_count(sharpe: &DVector<f64>, n: usize, rho: f64, zeta0: f64) -> Result<usize> {
    let margin = hansen_margin(n)?;
    let xi = xi_transform(sharpe, rho)?;
    Ok(count_above(&xi, ones_scale(rho, sharpe.len()) * zeta0 - margin))
}

/// Hansen's chi-bar-square: the chi-bar mixture over `0..=k_eff` only.
pub fn hansen_chi_bar_square(sharpe: &DVector<f64>, n: usize, rho: f64, zeta0: f64, alpha: f64) -> Result<TestOutcome> {
    let margin = hansen_margin(n)?;
    hansen_chi_bar_square_with_margin(sharpe, n, rho, zeta0, alpha, margin)
}

/// As [`hansen_chi_bar_square`] with an explicit threshold margin; an
/// infinite margin keeps every asset and reproduces the plain chi-bar test.
pub fn hansen_chi_bar_square_with_margin(
    sharpe: &DVector<f64>,
    n: usize,
    rho: f64,
    zeta0: f64,
    alpha: f64,
    margin: f64,
) -> Result<TestOutcome> {
    check_common(sharpe, n, rho, alpha)?;
    let k = sharpe.len();
    let xi = xi_transform(sharpe, rho)?;
    let shift = ones_scale(rho, k) * zeta0;
    let k_eff = count_above(&xi, shift - margin);
    let stat = chi_bar_statistic(&xi, n, shift);
    let p = if k_eff == 0 { 1.0 } else { ChiBarWeights::new(k_eff).sf(stat) };
    let mut out = TestOutcome::from_p_value(Method::HansenChibar, stat, p, alpha, zeta0);
    if k_eff == 0 {
        out.reject = false;
    }
    Ok(out)
}

/// Hansen's SPA-style max test on the whitened Sharpes with `k_eff`
/// hypotheses. The statistic is `sqrt(n) (max xi - c zeta0)`.
pub fn hansen_spa(sharpe: &DVector<f64>, n: usize, rho: f64, zeta0: f64, alpha: f64) -> Result<TestOutcome> {
    check_common(sharpe, n, rho, alpha)?;
    let margin = hansen_margin(n)?;
    let k = sharpe.len();
    let xi = xi_transform(sharpe, rho)?;
    let shift = ones_scale(rho, k) * zeta0;
    let k_eff = count_above(&xi, shift - margin);
    let top = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let stat = (n as f64).sqrt() * (top - shift);
    let p = if k_eff == 0 { 1.0 } else { (k_eff as f64 * norm_sf(stat)).min(1.0) };
    let mut out = TestOutcome::from_p_value(Method::HansenSpa, stat, p, alpha, zeta0);
    if k_eff == 0 {
        out.reject = false;
    }
    Ok(out)
}

/// Runs a rho-based test by tag.
pub fn run_rho_test(
    method: Method,
    sharpe: &DVector<f64>,
    n: usize,
    rho: &RhoEstimate,
    zeta0: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    let out = match method {
        Method::BonferroniFixed => bonferroni_rho_fixed(sharpe, n, rho.rho, zeta0, alpha)?,
        Method::Chibar => chi_bar_square_test(sharpe, n, rho.rho, zeta0, alpha)?,
        Method::Follman => follman_test(sharpe, n, rho.rho, zeta0, alpha)?,
        Method::HansenChibar => hansen_chi_bar_square(sharpe, n, rho.rho, zeta0, alpha)?,
        Method::HansenSpa => hansen_spa(sharpe, n, rho.rho, zeta0, alpha)?,
        other => return Err(Error::InvalidArgument(format!("{other} is not a rho-based test"))),
    };
    Ok(with_rho_warning(out, rho))
}

/// Lower end of the one-sided confidence interval from inverting a test of
/// `zeta_i = zeta0`: the boundary between null values that are rejected
/// (low) and those that are not (high). `test` maps `zeta0` to an outcome.
pub fn invert_to_lower_bound<F>(test: F, sharpe: &DVector<f64>, n: usize, alpha: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<TestOutcome>,
{
    check_alpha(alpha)?;
    if sharpe.is_empty() || n < 2 {
        return Err(Error::InvalidArgument("inversion needs a nonempty Sharpe vector and n >= 2".into()));
    }
    let rejects = |z0: f64| test(z0).map(|o| o.p_value <= alpha);
    let top = sharpe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = 10.0 / (n as f64).sqrt();
    let (mut lo, mut hi) = (top - step, top + step);
    let mut width = hi - lo;
    let mut tries = 0;
    while !rejects(lo)? {
        width *= 2.0;
        lo -= width;
        tries += 1;
        if tries > 60 {
            return Err(Error::RootSearch("test never rejects below the observed Sharpe ratios".into()));
        }
    }
    while rejects(hi)? {
        width *= 2.0;
        hi += width;
        tries += 1;
        if tries > 60 {
            return Err(Error::RootSearch("test rejects at every null value tried".into()));
        }
    }
    // coarse scan for a second switch in the bracket
    let grid = 32;
    let mut prev = true;
    for i in 1..grid {
        let z0 = lo + (hi - lo) * i as f64 / grid as f64;
        let r = rejects(z0)?;
        if r && !prev {
            return Err(Error::RootSearch(format!("rejection region is not monotone in zeta0 near {z0}")));
        }
        prev = r;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rejects(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{estimate_moments, rank_one_correlation, rank_one_inverse_sqrt, ReturnsPanel};
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn moments_with_corr(corr: DMatrix<f64>) -> MomentEstimates {
        let k = corr.nrows();
        MomentEstimates {
            mu: DVector::zeros(k),
            mom2: DVector::from_element(k, 1.0),
            sigma: DVector::from_element(k, 1.0),
            sharpe: DVector::zeros(k),
            corr,
            rfr: 0.0,
            n: 100,
        }
    }

    #[test]
    fn rho_estimates() {
        let m = moments_with_corr(DMatrix::identity(4, 4));
        assert_eq!(estimate_rho(&m, 0, RhoSource::MeanSelectedVsRest).unwrap().rho, 0.0);
        let m = moments_with_corr(rank_one_correlation(0.7, 5).unwrap());
        for src in [RhoSource::MeanSelectedVsRest, RhoSource::MedianPairwise] {
            assert!((estimate_rho(&m, 2, src).unwrap().rho - 0.7).abs() < 1e-15);
        }
        let e = estimate_rho(&moments_with_corr(DMatrix::from_element(3, 3, 1.0)), 0, RhoSource::MeanSelectedVsRest).unwrap();
        assert!(e.clamped);
        assert!(e.rho < 1.0);
        let mut c = DMatrix::from_element(3, 3, -0.9);
        c.fill_diagonal(1.0);
        let e = estimate_rho(&moments_with_corr(c), 1, RhoSource::MedianPairwise).unwrap();
        assert!(e.clamped);
        assert!(e.rho > -0.5);
    }

    #[test]
    fn chi_bar_weights() {
        for (w, e) in ChiBarWeights::new(2).weights().iter().zip([0.25, 0.5, 0.25]) {
            assert!((w - e).abs() < 1e-14);
        }
        for k in [1usize, 5, 50, 1000] {
            let w = ChiBarWeights::new(k);
            assert!((w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12, "k = {k}");
            assert!(w.weights().iter().all(|&x| x >= 0.0));
        }
        // exact binomial coefficients in integers
        let k = 60u32;
        let mut c: u128 = 1;
        let w = ChiBarWeights::new(k as usize);
        for i in 0..=k {
            let exact = c as f64 / 2f64.powi(k as i32);
            assert!((w.weights()[i as usize] - exact).abs() <= 1e-14 * exact, "i = {i}");
            c = c * (k - i) as u128 / (i + 1) as u128;
        }
        let big = ChiBarWeights::new(5000);
        assert!(big.weights().iter().all(|w| w.is_finite()));
        assert!((big.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_bar_floor() {
        let z = dv(&[-0.1, -0.2, -0.05]);
        let o = chi_bar_square_test(&z, 100, 0.3, 0.0, 0.05).unwrap();
        assert_eq!(o.statistic, 0.0);
        assert!((o.p_value - (1.0 - 0.125)).abs() < 1e-15);
        assert!(!o.reject);
    }

    #[test]
    fn chi_bar_pvalue_nonincreasing_in_each_sharpe_when_rho_nonpositive() {
        let base = [0.05, 0.02, -0.01, 0.04];
        for rho in [0.0, -0.2] {
            for i in 0..4 {
                let mut last = 1.0;
                for step in 0..40 {
                    let mut z = base;
                    z[i] = -0.2 + 0.01 * step as f64;
                    let p = chi_bar_square_test(&dv(&z), 500, rho, 0.0, 0.05).unwrap().p_value;
                    assert!(p <= last + 1e-15, "rho {rho} asset {i} step {step}");
                    last = p;
                }
            }
        }
    }

    #[test]
    fn chi_bar_pvalue_nonincreasing_under_common_shift() {
        let base = [0.05, 0.02, -0.01, 0.04];
        for rho in [0.3, 0.8] {
            let mut last = 1.0;
            for step in 0..60 {
                let z: Vec<f64> = base.iter().map(|v| v - 0.3 + 0.01 * step as f64).collect();
                let p = chi_bar_square_test(&dv(&z), 500, rho, 0.0, 0.05).unwrap().p_value;
                assert!(p <= last + 1e-15, "rho {rho} step {step}");
                last = p;
            }
        }
    }

    #[test]
    fn chi_bar_not_coordinatewise_monotone_for_positive_rho() {
        // Whitening with rho > 0 pulls the other coordinates down as one rises.
        let lo = chi_bar_square_test(&dv(&[-0.2, 0.05, 0.02, 0.04]), 500, 0.5, 0.0, 0.05).unwrap();
        let hi = chi_bar_square_test(&dv(&[-0.1, 0.05, 0.02, 0.04]), 500, 0.5, 0.0, 0.05).unwrap();
        assert!(hi.statistic < lo.statistic);
        assert!(hi.p_value > lo.p_value);
    }

    #[test]
    fn xi_transform_matches_matrix() {
        let z = dv(&[0.1, -0.3, 0.25, 0.0, 0.07]);
        for rho in [0.0, 0.3, 0.8, -0.2] {
            let m = rank_one_inverse_sqrt(rho, 5).unwrap();
            assert!((xi_transform(&z, rho).unwrap() - &m * &z).amax() < 1e-12);
        }
        assert_eq!(xi_transform(&z, 0.0).unwrap(), z);
        let c = ones_scale(0.6, 4);
        let x = xi_transform(&DVector::from_element(4, 0.2), 0.6).unwrap();
        assert!(x.iter().all(|v| (v - c * 0.2).abs() < 1e-15));
        assert!(xi_transform(&z, 1.0).is_err());
    }

    #[test]
    fn rho_zero_fixed_is_plain_max_z() {
        let z = dv(&[0.05, 0.12, 0.03]);
        let o = bonferroni_rho_fixed(&z, 400, 0.0, 0.01, 0.05).unwrap();
        let plain = 20.0 * (0.12 - 0.01);
        assert!((o.statistic - plain).abs() < 1e-12);
        assert!((o.p_value - (3.0 * norm_sf(plain)).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn fixed_statistic_is_whitened_coordinate() {
        let z = dv(&[0.05, 0.12, 0.03, -0.02]);
        let (rho, n, c0) = (0.6, 250usize, 0.02);
        let m = rank_one_inverse_sqrt(rho, 4).unwrap();
        let w = &m * (&z - DVector::from_element(4, c0)) * (n as f64).sqrt();
        let o = bonferroni_rho_fixed(&z, n, rho, c0, 0.05).unwrap();
        assert!((o.statistic - w[1]).abs() < 1e-12);
    }

    #[test]
    fn slepian_reductions() {
        let z = dv(&[0.05, 0.12, 0.03]);
        let r = rank_one_correlation(0.4, 3).unwrap();
        let a = bonferroni_slepian(&z, 300, &r, 0.0, 0.05).unwrap();
        let b = bonferroni_rho_fixed(&z, 300, 0.4, 0.0, 0.05).unwrap();
        assert_eq!(a.p_value, b.p_value);
        let i = bonferroni_slepian(&z, 300, &DMatrix::identity(3, 3), 0.0, 0.05).unwrap();
        assert!((i.statistic - 300f64.sqrt() * 0.12).abs() < 1e-12);
        let mut neg = r.clone();
        neg[(0, 2)] = -0.1;
        neg[(2, 0)] = -0.1;
        assert!(bonferroni_slepian(&z, 300, &neg, 0.0, 0.05).is_err());
    }

    #[test]
    fn naive_single_asset_is_t_test() {
        let (z, n) = (0.1, 120usize);
        let o = bonferroni_naive(z, n, 1, 0.0, 0.05).unwrap();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap();
        assert!((o.p_value - (1.0 - t.cdf(z * (n as f64).sqrt()))).abs() < 1e-12);
        assert_eq!(o.method, Method::Naive);
    }

    #[test]
    fn naive_critical_value_against_central_t() {
        let (n, k, alpha) = (505usize, 20usize, 0.05);
        let q = bonferroni_critical_value(n, k, 0.0, alpha).unwrap();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap();
        let oracle = t.inverse_cdf(1.0 - 0.0025);
        assert!((q - oracle).abs() < 1e-6, "{q} vs {oracle}");
    }

    #[test]
    fn follman_reductions() {
        let z = DVector::from_element(4, 0.05);
        let o = follman_test(&z, 200, 0.3, 0.05, 0.05).unwrap();
        assert_eq!(o.statistic, 0.0);
        assert!(!o.reject);
        let o = follman_test(&dv(&[0.2]), 100, 0.0, 0.05, 0.05).unwrap();
        assert!((o.statistic - 100.0 * 0.15f64.powi(2)).abs() < 1e-12);
        assert!((o.p_value - 0.5 * chi_square_sf(o.statistic, 1)).abs() < 1e-15);
        let o = follman_test(&dv(&[-0.2]), 100, 0.0, 0.05, 0.05).unwrap();
        assert_eq!(o.p_value, 1.0);
    }

    #[test]
    fn hansen_counts() {
        let z = DVector::from_element(5, 1.0);
        assert_eq!(hansen_effective_count(&z, 100, 0.2, 0.0).unwrap(), 5);
        let z = DVector::from_element(5, -1.0);
        assert_eq!(hansen_effective_count(&z, 100, 0.2, 0.0).unwrap(), 0);
        assert!(hansen_effective_count(&z, 2, 0.2, 0.0).is_err());
        let h = hansen_chi_bar_square(&z, 100, 0.2, 0.0, 0.05).unwrap();
        assert!(!h.reject);
        let s = hansen_spa(&z, 100, 0.2, 0.0, 0.05).unwrap();
        assert!(!s.reject);
    }

    #[test]
    fn hansen_infinite_margin_is_chi_bar() {
        let z = dv(&[0.08, -0.3, 0.02, 0.11, -0.05]);
        let a = hansen_chi_bar_square_with_margin(&z, 300, 0.4, 0.01, 0.05, f64::INFINITY).unwrap();
        let b = chi_bar_square_test(&z, 300, 0.4, 0.01, 0.05).unwrap();
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
    }

    #[test]
    fn hansen_spa_full_count_rho_zero_is_max_z() {
        let z = dv(&[0.3, 0.2, 0.25]);
        let o = hansen_spa(&z, 400, 0.0, 0.0, 0.05).unwrap();
        let expected = 3.0 * norm_sf(20.0 * 0.3);
        assert!((o.p_value - expected).abs() < 1e-15);
    }

    #[test]
    fn level_monotone_rejections() {
        let z = dv(&[0.09, 0.05, 0.01, 0.07]);
        let (n, rho) = (500usize, 0.5);
        let r = rank_one_correlation(rho, 4).unwrap();
        let alphas = [0.001, 0.01, 0.05, 0.1, 0.2, 0.5];
        let runs: Vec<Box<dyn Fn(f64) -> TestOutcome>> = vec![
            Box::new(|a| bonferroni_naive(0.09, n, 4, 0.0, a).unwrap()),
            Box::new(|a| bonferroni_rho_fixed(&z, n, rho, 0.0, a).unwrap()),
            Box::new(|a| bonferroni_slepian(&z, n, &r, 0.0, a).unwrap()),
            Box::new(|a| chi_bar_square_test(&z, n, rho, 0.0, a).unwrap()),
            Box::new(|a| follman_test(&z, n, rho, 0.0, a).unwrap()),
            Box::new(|a| hansen_chi_bar_square(&z, n, rho, 0.0, a).unwrap()),
            Box::new(|a| hansen_spa(&z, n, rho, 0.0, a).unwrap()),
        ];
        for run in &runs {
            let mut rejected = false;
            for &a in &alphas {
                let r = run(a).reject;
                assert!(!rejected || r);
                rejected = r;
            }
        }
    }

    #[test]
    fn inversion_round_trips() {
        let z = dv(&[0.193, 0.187, 0.172, 0.170, 0.140]);
        let (n, rho, alpha) = (1104usize, 0.801, 0.05);
        let tests: Vec<Box<dyn Fn(f64) -> Result<TestOutcome>>> = vec![
            Box::new(|c| chi_bar_square_test(&z, n, rho, c, alpha)),
            Box::new(|c| bonferroni_rho_fixed(&z, n, rho, c, alpha)),
            Box::new(|c| bonferroni_naive(0.193, n, 5, c, alpha)),
            Box::new(|c| hansen_spa(&z, n, rho, c, alpha)),
        ];
        for t in &tests {
            let b = invert_to_lower_bound(t, &z, n, alpha).unwrap();
            let p = t(b).unwrap().p_value;
            assert!((p - alpha).abs() < 1e-4, "p = {p} at bound {b}");
        }
    }

    #[test]
    fn rounded_table_values_give_published_bounds() {
        // Only the naive, Bonferroni and fixed bounds are recoverable from the
        // rounded Sharpe ratios and rho alone.
        let z = dv(&[0.193, 0.187, 0.172, 0.170, 0.140]);
        let (n, alpha) = (1104usize, 0.05);
        let naive = invert_to_lower_bound(|c| bonferroni_naive(0.193, n, 1, c, alpha), &z, n, alpha).unwrap();
        assert!((naive - 0.143).abs() < 0.002, "{naive}");
        let bonf = invert_to_lower_bound(|c| bonferroni_naive(0.193, n, 5, c, alpha), &z, n, alpha).unwrap();
        assert!((bonf - 0.122).abs() < 0.002, "{bonf}");
        let fixed = invert_to_lower_bound(|c| bonferroni_rho_fixed(&z, n, 0.801, c, alpha), &z, n, alpha).unwrap();
        assert!((fixed - 0.125).abs() < 0.002, "{fixed}");
    }

    #[test]
    fn run_rho_test_dispatch() {
        let z = dv(&[0.1, 0.05]);
        let rho = rho_estimate(0.3, 2, RhoSource::Supplied);
        assert!(run_rho_test(Method::Chibar, &z, 100, &rho, 0.0, 0.05).is_ok());
        assert!(run_rho_test(Method::Conditional, &z, 100, &rho, 0.0, 0.05).is_err());
    }

    #[test]
    fn estimate_rho_from_panel() {
        let m = DMatrix::from_fn(30, 3, |t, j| ((t * 7 + j * 3) % 11) as f64 + (t % 4) as f64 * (j as f64 + 1.0));
        let panel = ReturnsPanel::from_matrix(m).unwrap();
        let est = estimate_moments(&panel, 0.0).unwrap();
        let e = estimate_rho(&est, 1, RhoSource::MeanSelectedVsRest).unwrap();
        assert!((e.rho - 0.5 * (est.corr[(1, 0)] + est.corr[(1, 2)])).abs() < 1e-15);
        let col = est.corr.column(1).into_owned();
        assert_eq!(rho_from_column(&col, 1).rho, e.rho);
    }
}
