//! Sample moments of a returns panel and the delta-method covariance of the
//! vector of Sharpe ratios.
//!
//! All second moments use the `1/n` divisor. Sharpe ratios are in units of
//! per-square-root-period of the input data and are never annualized here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues of a plug-in covariance below this are an error; those in
/// `(-PSD_TOLERANCE, 0)` are clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// An `n x k` matrix of per-period returns, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    values: DMatrix<f64>,
    labels: Vec<String>,
    periods_per_year: Option<f64>,
}

impl ReturnsPanel {
    /// Builds a panel, checking shape, finiteness and that every column varies.
    pub fn new(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (n, k) = values.shape();
        if k == 0 {
            return Err(Error::Data("panel has no assets".into()));
        }
        if n < 2 {
            return Err(Error::Data(format!("panel needs at least 2 rows, got {n}")));
        }
        if labels.len() != k {
            return Err(Error::Dimension(format!("{} labels for {k} columns", labels.len())));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx % n, idx / n);
            return Err(Error::Parse {
                row: row + 1,
                column: labels[col].clone(),
                message: "non-finite value".into(),
            });
        }
        for (j, label) in labels.iter().enumerate() {
            let col = values.column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return Err(Error::DegenerateColumn(label.clone()));
            }
        }
        Ok(Self { values, labels, periods_per_year: None })
    }

    /// Panel with generated labels `asset_1 .. asset_k`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=values.ncols()).map(|j| format!("asset_{j}")).collect();
        Self::new(values, labels)
    }

    pub fn with_periods_per_year(mut self, periods_per_year: f64) -> Result<Self> {
        if !(periods_per_year > 0.0) || !periods_per_year.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "periods_per_year must be positive, got {periods_per_year}"
            )));
        }
        self.periods_per_year = Some(periods_per_year);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn periods_per_year(&self) -> Option<f64> {
        self.periods_per_year
    }

    /// Reorders columns: column `j` of the result is column `order[j]` of `self`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.k() {
            return Err(Error::Dimension(format!("permutation of length {} for k = {}", order.len(), self.k())));
        }
        let values = self.values.select_columns(order);
        let labels = order.iter().map(|&j| self.labels[j].clone()).collect();
        Ok(Self { values, labels, periods_per_year: self.periods_per_year })
    }
}

/// Per-asset sample moments plus the sample correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub mu: DVector<f64>,
    pub mom2: DVector<f64>,
    pub sigma: DVector<f64>,
    pub sharpe: DVector<f64>,
    pub corr: DMatrix<f64>,
    pub rfr: f64,
    pub n: usize,
}

/// Means, uncentered second moments, volatilities and Sharpe ratios without
/// the `k x k` correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub mu: DVector<f64>,
    pub mom2: DVector<f64>,
    pub sigma: DVector<f64>,
    pub sharpe: DVector<f64>,
    pub rfr: f64,
    pub n: usize,
}

pub fn estimate_marginals(panel: &ReturnsPanel, rfr: f64) -> Result<Marginals> {
    let x = panel.values();
    let (n, k) = x.shape();
    let nf = n as f64;
    let mut mu = DVector::zeros(k);
    let mut mom2 = DVector::zeros(k);
    let mut sigma = DVector::zeros(k);
    for j in 0..k {
        let col = x.column(j);
        let m = col.sum() / nf;
        let m2 = col.iter().map(|v| v * v).sum::<f64>() / nf;
        // centred pass for the variance; mom2 - mu^2 cancels badly when |mu| >> sigma
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
        if !(var > 0.0) {
            return Err(Error::DegenerateColumn(panel.labels()[j].clone()));
        }
        mu[j] = m;
        mom2[j] = m2;
        sigma[j] = var.sqrt();
    }
    let sharpe = DVector::from_fn(k, |j, _| (mu[j] - rfr) / sigma[j]);
    Ok(Marginals { mu, mom2, sigma, sharpe, rfr, n })
}

/// Sample correlations of column `j` against every column (entry `j` is 1).
pub fn correlation_column(panel: &ReturnsPanel, marginals: &Marginals, j: usize) -> DVector<f64> {
    let x = panel.values();
    let (n, k) = x.shape();
    let nf = n as f64;
    let xj = x.column(j);
    let mj = marginals.mu[j];
    DVector::from_fn(k, |i, _| {
        if i == j {
            return 1.0;
        }
        let xi = x.column(i);
        let mi = marginals.mu[i];
        let cov = xi.iter().zip(xj.iter()).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>() / nf;
        (cov / (marginals.sigma[i] * marginals.sigma[j])).clamp(-1.0, 1.0)
    })
}

/// Sample moments of a panel. Permuting the panel's columns permutes every
/// output the same way.
pub fn estimate_moments(panel: &ReturnsPanel, rfr: f64) -> Result<MomentEstimates> {
    let m = estimate_marginals(panel, rfr)?;
    let x = panel.values();
    let (n, k) = x.shape();
    let centred = DMatrix::from_fn(n, k, |t, j| (x[(t, j)] - m.mu[j]) / m.sigma[j]);
    let mut corr = centred.tr_mul(&centred) / n as f64;
    for i in 0..k {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            let r = (0.5 * (corr[(i, j)] + corr[(j, i)])).clamp(-1.0, 1.0);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    Ok(MomentEstimates { mu: m.mu, mom2: m.mom2, sigma: m.sigma, sharpe: m.sharpe, corr, rfr, n })
}

impl MomentEstimates {
    pub fn k(&self) -> usize {
        self.sharpe.len()
    }

    /// Index of the largest Sharpe ratio, ties to the lowest index.
    pub fn argmax_sharpe(&self) -> usize {
        argmax(&self.sharpe)
    }
}

pub(crate) fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceFlavor {
    Gaussian,
    Elliptical { kurtosis_factor: f64 },
}

impl CovarianceFlavor {
    pub fn kurtosis_factor(&self) -> f64 {
        match *self {
            CovarianceFlavor::Gaussian => 1.0,
            CovarianceFlavor::Elliptical { kurtosis_factor } => kurtosis_factor,
        }
    }
}

/// Approximate covariance of the Sharpe vector, already divided by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeCovariance {
    q: DMatrix<f64>,
    flavor: CovarianceFlavor,
    n: usize,
}

impl SharpeCovariance {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn flavor(&self) -> CovarianceFlavor {
        self.flavor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.q.nrows()
    }
}

fn check_corr_snr(corr: &DMatrix<f64>, snr: &DVector<f64>, n: usize) -> Result<()> {
    if !corr.is_square() || corr.nrows() != snr.len() {
        return Err(Error::Dimension(format!(
            "correlation is {}x{} but the SNR vector has length {}",
            corr.nrows(),
            corr.ncols(),
            snr.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sample size must be at least 2, got {n}")));
    }
    Ok(())
}

/// `Q = (R + (kappa-1)/4 zeta zeta' + kappa/2 diag(zeta)(R o R)diag(zeta)) / n`.
fn build_q(corr: &DMatrix<f64>, snr: &DVector<f64>, kappa: f64, n: usize) -> DMatrix<f64> {
    let k = snr.len();
    let nf = n as f64;
    DMatrix::from_fn(k, k, |i, j| {
        let r = corr[(i, j)];
        let zz = snr[i] * snr[j];
        (r + 0.25 * (kappa - 1.0) * zz + 0.5 * kappa * zz * r * r) / nf
    })
}

fn finish_psd(mut q: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = q.nrows();
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = s;
            q[(j, i)] = s;
        }
    }
    let eig = SymmetricEigen::new(q.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    if min < 0.0 {
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        q = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    }
    Ok(q)
}

/// Delta-method covariance of the Sharpe vector for Gaussian returns.
pub fn sharpe_covariance_gaussian(corr: &DMatrix<f64>, snr: &DVector<f64>, n: usize) -> Result<SharpeCovariance> {
    check_corr_snr(corr, snr, n)?;
    let q = finish_psd(build_q(corr, snr, 1.0, n))?;
    Ok(SharpeCovariance { q, flavor: CovarianceFlavor::Gaussian, n })
}

/// Delta-method covariance for elliptical returns with kurtosis factor
/// `kappa` (one third of the marginal kurtosis; 1 for the normal).
pub fn sharpe_covariance_elliptical(
    corr: &DMatrix<f64>,
    snr: &DVector<f64>,
    kurtosis_factor: f64,
    n: usize,
) -> Result<SharpeCovariance> {
    check_corr_snr(corr, snr, n)?;
    if !(kurtosis_factor >= 1.0 / 3.0) || !kurtosis_factor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kurtosis factor must be finite and at least 1/3, got {kurtosis_factor}"
        )));
    }
    let q = finish_psd(build_q(corr, snr, kurtosis_factor, n))?;
    Ok(SharpeCovariance {
        q,
        flavor: CovarianceFlavor::Elliptical { kurtosis_factor },
        n,
    })
}

/// Dispatches on `flavor`.
pub fn sharpe_covariance(
    corr: &DMatrix<f64>,
    snr: &DVector<f64>,
    flavor: CovarianceFlavor,
    n: usize,
) -> Result<SharpeCovariance> {
    match flavor {
        CovarianceFlavor::Gaussian => sharpe_covariance_gaussian(corr, snr, n),
        CovarianceFlavor::Elliptical { kurtosis_factor } => {
            sharpe_covariance_elliptical(corr, snr, kurtosis_factor, n)
        }
    }
}

/// Column `j` of the Sharpe covariance, built from the correlations of asset
/// `j` against all assets. Costs `O(k)` instead of `O(k^2)`.
pub fn sharpe_covariance_column(
    corr_column: &DVector<f64>,
    snr: &DVector<f64>,
    j: usize,
    flavor: CovarianceFlavor,
    n: usize,
) -> Result<DVector<f64>> {
    if corr_column.len() != snr.len() || j >= snr.len() {
        return Err(Error::Dimension(format!(
            "correlation column of length {} vs SNR length {} (index {j})",
            corr_column.len(),
            snr.len()
        )));
    }
    let kappa = flavor.kurtosis_factor();
    let nf = n as f64;
    Ok(DVector::from_fn(snr.len(), |i, _| {
        let r = corr_column[i];
        let zz = snr[i] * snr[j];
        (r + 0.25 * (kappa - 1.0) * zz + 0.5 * kappa * zz * r * r) / nf
    }))
}

/// Jacobian of the Sharpe vector with respect to `(mu, mom2)`: two diagonal
/// `k x k` blocks side by side.
pub fn delta_derivative(mu: &DVector<f64>, mom2: &DVector<f64>, rfr: f64) -> Result<DMatrix<f64>> {
    let k = mu.len();
    if mom2.len() != k {
        return Err(Error::Dimension(format!("mu has length {k}, mom2 has length {}", mom2.len())));
    }
    let mut d = DMatrix::zeros(k, 2 * k);
    for i in 0..k {
        let var = mom2[i] - mu[i] * mu[i];
        if !(var > 0.0) {
            return Err(Error::InvalidArgument(format!("mom2 - mu^2 must be positive at index {i}")));
        }
        let s3 = var * var.sqrt();
        d[(i, i)] = (mom2[i] - mu[i] * rfr) / s3;
        d[(i, k + i)] = (rfr - mu[i]) / (2.0 * s3);
    }
    Ok(d)
}

/// Median over assets of the raw fourth standardized moment, divided by 3.
pub fn estimate_kurtosis_factor(panel: &ReturnsPanel) -> Result<f64> {
    let x = panel.values();
    let (n, k) = x.shape();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("kurtosis needs at least 4 rows, got {n}")));
    }
    let nf = n as f64;
    let mut kurt: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let col = x.column(j);
        let m = col.sum() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in col.iter() {
            let d2 = (v - m) * (v - m);
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m4 /= nf;
        if !(m2 > 0.0) {
            return Err(Error::DegenerateColumn(panel.labels()[j].clone()));
        }
        kurt.push(m4 / (m2 * m2));
    }
    Ok(median(&mut kurt) / 3.0)
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Checks `-1/(k-1) < rho < 1`.
pub fn check_rho(rho: f64, k: usize) -> Result<()> {
    let lower = if k > 1 { -1.0 / (k as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho > lower && rho < 1.0) {
        return Err(Error::RhoOutOfRange { rho, k });
    }
    Ok(())
}

/// Constant-correlation matrix `rho 11' + (1 - rho) I`.
pub fn rank_one_correlation(rho: f64, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    check_rho(rho, k)?;
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho }))
}

/// Closed-form symmetric inverse square root of the constant-correlation
/// matrix.
pub fn rank_one_inverse_sqrt(rho: f64, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    check_rho(rho, k)?;
    let (off, diag) = rank_one_inverse_sqrt_coefficients(rho, k);
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { off + diag } else { off }))
}

/// `(a, b)` with `R^{-1/2} = a 11' + b I`.
pub(crate) fn rank_one_inverse_sqrt_coefficients(rho: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let b = 1.0 / (1.0 - rho).sqrt();
    let a = (1.0 / (1.0 - rho + kf * rho).sqrt() - b) / kf;
    (a, b)
}
