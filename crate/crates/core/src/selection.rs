//! Selection events and conditional (post-selection) inference.
//!
//! A selection event is a polyhedron `A y <= b` on the Sharpe vector,
//! expressed in *arranged* coordinates: the assets are permuted (and, for
//! absolute-max selection, sign flipped) so the selected asset comes first.
//! Conditional on the event, the statistic `eta' y` follows a normal law
//! truncated to `[v_min, v_max]`, where the bounds depend on `y` only
//! through the component orthogonal to `eta`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{norm_quantile, truncated_normal_cdf, truncated_normal_sf};
use crate::error::{Error, Result};
use crate::moments::{argmax, SharpeCovariance};
use crate::outcome::{check_alpha, Method, TestOutcome};

/// Rows with `|(A c)_j|` below this multiple of `|c|` constrain nothing.
const ACTIVE_ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionKind {
    Max,
    AbsMax,
    TopM { m: usize },
    Threshold { zeta_star: f64 },
    Portfolio { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEvent {
    a: DMatrix<f64>,
    b: DVector<f64>,
    eta: DVector<f64>,
    selected_index: usize,
    /// Position `i` of the arranged vector holds original asset `permutation[i]`.
    permutation: Vec<usize>,
    /// Sign applied to each original asset before permuting.
    signs: Vec<f64>,
    kind: SelectionKind,
}

impl SelectionEvent {
    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_vector(&self) -> &DVector<f64> {
        &self.b
    }

    /// Test direction in arranged coordinates.
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn selected_index(&self) -> usize {
        self.selected_index
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn kind(&self) -> &SelectionKind {
        &self.kind
    }

    pub fn k(&self) -> usize {
        self.permutation.len()
    }

    /// Maps a vector in original asset order to arranged coordinates.
    pub fn arrange(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        Ok(DVector::from_fn(self.k(), |i, _| {
            let j = self.permutation[i];
            self.signs[j] * v[j]
        }))
    }

    /// Inverse of [`arrange`](Self::arrange).
    pub fn unarrange(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        let mut out = DVector::zeros(self.k());
        for (i, &j) in self.permutation.iter().enumerate() {
            out[j] = self.signs[j] * v[i];
        }
        Ok(out)
    }

    /// `P S M S P'` for a symmetric matrix `M` in original order.
    pub fn arrange_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.k() || m.ncols() != self.k() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for a selection over {} assets",
                m.nrows(),
                m.ncols(),
                self.k()
            )));
        }
        Ok(DMatrix::from_fn(self.k(), self.k(), |i, j| {
            let (oi, oj) = (self.permutation[i], self.permutation[j]);
            self.signs[oi] * self.signs[oj] * m[(oi, oj)]
        }))
    }

    /// The test direction expressed in original asset order.
    pub fn eta_original(&self) -> DVector<f64> {
        self.unarrange(&self.eta).expect("eta has the event's dimension")
    }

    /// Whether `A y <= b` holds for the arranged vector `y`, up to `tol`.
    pub fn contains_arranged(&self, y: &DVector<f64>, tol: f64) -> bool {
        let ay = &self.a * y;
        ay.iter().zip(self.b.iter()).all(|(l, r)| *l <= r + tol)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.k() {
            return Err(Error::Dimension(format!("vector of length {len} for a selection over {} assets", self.k())));
        }
        Ok(())
    }
}

fn unit(k: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(k);
    e[i] = 1.0;
    e
}

/// Rows `-e_1 + e_j` for `j = 2..k`: the first coordinate is the maximum.
fn max_rows(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k - 1, k, |r, c| {
        if c == 0 {
            -1.0
        } else if c == r + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Max-selection constraint for a Sharpe vector already ordered with the
/// maximum first.
pub fn build_max_constraint(k: usize) -> Result<SelectionEvent> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "selection among k = {k} asset is vacuous; use an unconditional test"
        )));
    }
    Ok(SelectionEvent {
        a: max_rows(k),
        b: DVector::zeros(k - 1),
        eta: unit(k, 0),
        selected_index: 0,
        permutation: (0..k).collect(),
        signs: vec![1.0; k],
        kind: SelectionKind::Max,
    })
}

/// Selects the asset with the largest Sharpe ratio (ties to the lowest
/// index) and moves it to the front; the others keep their order.
pub fn select_max(sharpe: &DVector<f64>) -> Result<SelectionEvent> {
    let k = sharpe.len();
    let mut event = build_max_constraint(k)?;
    let s = argmax(sharpe);
    event.selected_index = s;
    event.permutation = std::iter::once(s).chain((0..k).filter(|&j| j != s)).collect();
    Ok(event)
}

/// Selects the asset with the largest absolute Sharpe ratio, flipping signs
/// so every arranged Sharpe is non-negative.
pub fn build_abs_max_constraint(sharpe: &DVector<f64>) -> Result<SelectionEvent> {
    let k = sharpe.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("abs-max selection needs k >= 2, got {k}")));
    }
    let abs = sharpe.map(f64::abs);
    let s = argmax(&abs);
    let signs: Vec<f64> = sharpe.iter().map(|&z| if z < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut a = DMatrix::zeros(2 * k - 1, k);
    a.rows_mut(0, k - 1).copy_from(&max_rows(k));
    for j in 0..k {
        a[(k - 1 + j, j)] = -1.0;
    }
    Ok(SelectionEvent {
        a,
        b: DVector::zeros(2 * k - 1),
        eta: unit(k, 0),
        selected_index: s,
        permutation: std::iter::once(s).chain((0..k).filter(|&j| j != s)).collect(),
        signs,
        kind: SelectionKind::AbsMax,
    })
}

/// Descending order, ties broken toward the lower index.
fn descending_order(sharpe: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sharpe.len()).collect();
    idx.sort_by(|&i, &j| sharpe[j].total_cmp(&sharpe[i]).then(i.cmp(&j)));
    idx
}

/// Keeps the top `m` assets by Sharpe ratio. Every kept asset beats every
/// dropped asset: `m (k - m)` rows.
pub fn build_top_m_constraint(sharpe: &DVector<f64>, m: usize) -> Result<SelectionEvent> {
    let k = sharpe.len();
    if m == 0 || m >= k {
        return Err(Error::InvalidArgument(format!("top-m selection needs 1 <= m < k, got m = {m}, k = {k}")));
    }
    let order = descending_order(sharpe);
    if sharpe[order[m - 1]] == sharpe[order[m]] {
        return Err(Error::Tie(format!(
            "assets {} and {} tie at the top-{m} boundary",
            order[m - 1], order[m]
        )));
    }
    let kept = &order[..m];
    let mut dropped: Vec<usize> = order[m..].to_vec();
    dropped.sort_unstable();
    let permutation: Vec<usize> = kept.iter().copied().chain(dropped).collect();
    let mut a = DMatrix::zeros(m * (k - m), k);
    let mut row = 0;
    for i in 0..m {
        for j in m..k {
            a[(row, i)] = -1.0;
            a[(row, j)] = 1.0;
            row += 1;
        }
    }
    Ok(SelectionEvent {
        a,
        b: DVector::zeros(m * (k - m)),
        eta: unit(k, 0),
        selected_index: order[0],
        permutation,
        signs: vec![1.0; k],
        kind: SelectionKind::TopM { m },
    })
}

/// Keeps every asset whose Sharpe ratio exceeds `zeta_star`: passers satisfy
/// `-y_i <= -zeta_star`, the rest `y_j <= zeta_star`.
pub fn build_threshold_constraint(sharpe: &DVector<f64>, zeta_star: f64) -> Result<SelectionEvent> {
    let k = sharpe.len();
    if k == 0 {
        return Err(Error::InvalidArgument("empty Sharpe vector".into()));
    }
    if let Some(j) = sharpe.iter().position(|&z| z == zeta_star) {
        return Err(Error::Tie(format!("asset {j} sits exactly on the threshold {zeta_star}")));
    }
    let order = descending_order(sharpe);
    let passers: Vec<usize> = order.iter().copied().filter(|&j| sharpe[j] > zeta_star).collect();
    if passers.is_empty() {
        return Err(Error::InvalidArgument(format!("no asset passes the threshold {zeta_star}")));
    }
    let mut rest: Vec<usize> = (0..k).filter(|&j| sharpe[j] < zeta_star).collect();
    rest.sort_unstable();
    let p = passers.len();
    let permutation: Vec<usize> = passers.iter().copied().chain(rest).collect();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for i in 0..k {
        if i < p {
            a[(i, i)] = -1.0;
            b[i] = -zeta_star;
        } else {
            a[(i, i)] = 1.0;
            b[i] = zeta_star;
        }
    }
    Ok(SelectionEvent {
        a,
        b,
        eta: unit(k, 0),
        selected_index: passers[0],
        permutation,
        signs: vec![1.0; k],
        kind: SelectionKind::Threshold { zeta_star },
    })
}

/// Replaces the test direction with a portfolio in volatility units:
/// `eta = w / sqrt(w' R w)`. `weights` and `corr` are in original asset order.
pub fn with_test_vector(event: SelectionEvent, weights: &DVector<f64>, corr: &DMatrix<f64>) -> Result<SelectionEvent> {
    let w = event.arrange(weights)?;
    let r = event.arrange_matrix(corr)?;
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("portfolio weights are all zero".into()));
    }
    let quad = w.dot(&(&r * &w));
    if !(quad > 0.0) {
        return Err(Error::InvalidArgument(format!("w'Rw must be positive, got {quad}")));
    }
    let eta = w / quad.sqrt();
    Ok(SelectionEvent {
        eta,
        kind: SelectionKind::Portfolio { weights: weights.iter().copied().collect() },
        ..event
    })
}

/// The interval of `eta' y` values compatible with the selection event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationInterval {
    pub v_min: f64,
    pub v_max: f64,
    /// `Q eta / (eta' Q eta)`, arranged coordinates.
    pub c_vector: DVector<f64>,
    /// `y - c (eta' y)`, arranged coordinates.
    pub z_vector: DVector<f64>,
    /// Observed `eta' y`.
    pub statistic: f64,
    /// `eta' Q eta`.
    pub variance: f64,
}

/// Truncation bounds from the full covariance (original asset order).
pub fn truncation_bounds(event: &SelectionEvent, sharpe: &DVector<f64>, q: &SharpeCovariance) -> Result<TruncationInterval> {
    if q.k() != event.k() {
        return Err(Error::Dimension(format!("covariance over {} assets, selection over {}", q.k(), event.k())));
    }
    let q_eta = q.matrix() * event.eta_original();
    truncation_bounds_from_q_eta(event, sharpe, &q_eta)
}

/// Truncation bounds given only `Q eta` (original asset order). This is all
/// the procedure needs; for max selection it is one column of `Q`.
pub fn truncation_bounds_from_q_eta(
    event: &SelectionEvent,
    sharpe: &DVector<f64>,
    q_eta: &DVector<f64>,
) -> Result<TruncationInterval> {
    let y = event.arrange(sharpe)?;
    let q_eta = event.arrange(q_eta)?;
    let eta = &event.eta;
    let variance = eta.dot(&q_eta);
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!("eta' Q eta must be positive, got {variance}")));
    }
    let c = &q_eta / variance;
    let statistic = eta.dot(&y);
    let z = &y - &c * statistic;
    let ac = &event.a * &c;
    let az = &event.a * &z;
    let tol = ACTIVE_ROW_TOLERANCE * c.norm();
    let mut v_min = f64::NEG_INFINITY;
    let mut v_max = f64::INFINITY;
    for j in 0..ac.len() {
        let ratio = (event.b[j] - az[j]) / ac[j];
        if ac[j] < -tol {
            v_min = v_min.max(ratio);
        } else if ac[j] > tol {
            v_max = v_max.min(ratio);
        }
    }
    if !(v_min < v_max) {
        return Err(Error::EmptyTruncation { v_min, v_max });
    }
    Ok(TruncationInterval { v_min, v_max, c_vector: c, z_vector: z, statistic, variance })
}

impl TruncationInterval {
    /// `u = F(eta' y; v_min, v_max, null_value, eta' Q eta)`.
    pub fn u(&self, null_value: f64) -> Result<f64> {
        truncated_normal_cdf(self.statistic, self.v_min, self.v_max, null_value, self.variance)
    }

    /// `1 - u`, evaluated without cancellation.
    pub fn p_value(&self, null_value: f64) -> Result<f64> {
        truncated_normal_sf(self.statistic, self.v_min, self.v_max, null_value, self.variance)
    }

    /// Test of `eta' zeta = null_value` against `eta' zeta > null_value`.
    pub fn test(&self, null_value: f64, alpha: f64) -> Result<TestOutcome> {
        check_alpha(alpha)?;
        let p = self.p_value(null_value)?;
        Ok(TestOutcome::from_p_value(Method::Conditional, self.statistic, p, alpha, null_value))
    }

    /// Smallest null value not rejected at level `alpha`: solves
    /// `u(c0) = 1 - alpha` by bisection. `u` is strictly decreasing in `c0`.
    pub fn lower_bound(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let se = self.variance.sqrt();
        // p(c0) = 1 - u(c0) increases in c0; find p(c0) = alpha
        let g = |c0: f64| self.p_value(c0).map(|p| p - alpha);
        let mut lo = self.statistic - 10.0 * se;
        let mut hi = self.statistic + 10.0 * se;
        let mut doublings = 0;
        let mut width = hi - lo;
        while g(lo)? > 0.0 {
            width *= 2.0;
            lo -= width;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::RootSearch("conditional lower bound: cannot bracket from below".into()));
            }
        }
        while g(hi)? < 0.0 {
            width *= 2.0;
            hi += width;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::RootSearch("conditional lower bound: cannot bracket from above".into()));
            }
        }
        while hi - lo > 1e-12 * se.max(1e-300) + 1e-14 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Conditional test at `null_value` with the full covariance.
pub fn conditional_pvalue(
    event: &SelectionEvent,
    sharpe: &DVector<f64>,
    q: &SharpeCovariance,
    null_value: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    truncation_bounds(event, sharpe, q)?.test(null_value, alpha)
}

/// One-sided `1 - alpha` lower confidence bound on `eta' zeta`.
pub fn conditional_lower_bound(
    event: &SelectionEvent,
    sharpe: &DVector<f64>,
    q: &SharpeCovariance,
    alpha: f64,
) -> Result<f64> {
    truncation_bounds(event, sharpe, q)?.lower_bound(alpha)
}

/// Unconditional normal bound `eta' y + Phi^{-1}(alpha) sqrt(eta' Q eta)`.
pub fn naive_normal_lower_bound(statistic: f64, variance: f64, alpha: f64) -> f64 {
    statistic + norm_quantile(alpha) * variance.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{rank_one_correlation, sharpe_covariance_gaussian};
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    /// `Q = I / n`.
    fn iso(k: usize, n: usize) -> SharpeCovariance {
        sharpe_covariance_gaussian(&DMatrix::identity(k, k), &DVector::zeros(k), n).unwrap()
    }

    #[test]
    fn max_constraint_display() {
        let e = build_max_constraint(3).unwrap();
        assert_eq!(e.a_matrix(), &DMatrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, -1.0, 0.0, 1.0]));
        assert_eq!(e.b_vector(), &DVector::zeros(2));
        assert_eq!(e.eta(), &dv(&[1.0, 0.0, 0.0]));
        let e2 = build_max_constraint(2).unwrap();
        assert_eq!(e2.a_matrix(), &DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]));
        assert!(build_max_constraint(1).is_err());
    }

    #[test]
    fn select_max_ties_go_low() {
        let e = select_max(&dv(&[0.1, 0.3, 0.3, 0.2])).unwrap();
        assert_eq!(e.selected_index(), 1);
        assert_eq!(e.permutation(), &[1, 0, 2, 3]);
        let y = e.arrange(&dv(&[0.1, 0.3, 0.3, 0.2])).unwrap();
        assert!(e.contains_arranged(&y, 0.0));
    }

    #[test]
    fn abs_max_flips_signs() {
        let z = dv(&[-0.5, 0.2]);
        let e = build_abs_max_constraint(&z).unwrap();
        assert_eq!(e.selected_index(), 0);
        let y = e.arrange(&z).unwrap();
        assert_eq!(y, dv(&[0.5, 0.2]));
        assert!(e.contains_arranged(&y, 0.0));
        let e3 = build_abs_max_constraint(&dv(&[0.1, -0.4, 0.2])).unwrap();
        assert_eq!(e3.a_matrix().nrows(), 5);
        let flipped = build_abs_max_constraint(&dv(&[-0.1, 0.4, -0.2])).unwrap();
        assert_eq!(flipped.selected_index(), e3.selected_index());
    }

    #[test]
    fn top_m_rows_and_m1_equivalence() {
        let z = dv(&[0.1, 0.5, -0.2, 0.3]);
        let e = build_top_m_constraint(&z, 2).unwrap();
        assert_eq!(e.a_matrix().nrows(), 4);
        assert!(e.contains_arranged(&e.arrange(&z).unwrap(), 0.0));
        let one = build_top_m_constraint(&z, 1).unwrap();
        let max = build_max_constraint(4).unwrap();
        assert_eq!(one.a_matrix(), max.a_matrix());
        assert_eq!(one.b_vector(), max.b_vector());
        assert!(matches!(build_top_m_constraint(&dv(&[0.3, 0.1, 0.1]), 2), Err(Error::Tie(_))));
        assert!(build_top_m_constraint(&z, 4).is_err());
    }

    #[test]
    fn threshold_rows() {
        let z = dv(&[0.3, 0.1, -0.2]);
        let e = build_threshold_constraint(&z, 0.0).unwrap();
        assert_eq!(e.a_matrix().nrows(), 3);
        assert_eq!(e.a_matrix().diagonal().iter().filter(|&&d| d < 0.0).count(), 2);
        assert!(e.contains_arranged(&e.arrange(&z).unwrap(), 0.0));
        let all = build_threshold_constraint(&z, -1e9).unwrap();
        assert!(all.a_matrix().diagonal().iter().all(|&d| d == -1.0));
        assert!(all.b_vector().iter().all(|&b| b == 1e9));
        assert!(build_threshold_constraint(&z, 1.0).is_err());
        assert!(matches!(build_threshold_constraint(&z, 0.1), Err(Error::Tie(_))));
    }

    #[test]
    fn test_vector_normalization() {
        let r = rank_one_correlation(0.4, 3).unwrap();
        let e = with_test_vector(build_max_constraint(3).unwrap(), &dv(&[1.0, 0.0, 0.0]), &r).unwrap();
        assert_eq!(e.eta(), &dv(&[1.0, 0.0, 0.0]));
        let w = DVector::from_element(3, 1.0 / 3.0);
        let e = with_test_vector(build_max_constraint(3).unwrap(), &w, &r).unwrap();
        assert!((e.eta().dot(&(&r * e.eta())) - 1.0).abs() < 1e-14);
        let e5 = with_test_vector(build_max_constraint(3).unwrap(), &(w * 5.0), &r).unwrap();
        assert!((e5.eta() - e.eta()).amax() < 1e-15);
        assert!(with_test_vector(build_max_constraint(3).unwrap(), &DVector::zeros(3), &r).is_err());
    }

    #[test]
    fn isotropic_bounds() {
        let z = dv(&[0.5, 0.2]);
        let q = iso(2, 100);
        let e = select_max(&z).unwrap();
        let t = truncation_bounds(&e, &z, &q).unwrap();
        assert!((t.v_min - 0.2).abs() < 1e-15);
        assert_eq!(t.v_max, f64::INFINITY);
        assert!((t.c_vector.clone() - dv(&[1.0, 0.0])).amax() < 1e-15);

        let z = dv(&[0.1, 0.4, 0.3, -0.2]);
        let q = iso(4, 50);
        let t = truncation_bounds(&select_max(&z).unwrap(), &z, &q).unwrap();
        assert!((t.v_min - 0.3).abs() < 1e-15);
    }

    #[test]
    fn z_orthogonal_to_eta() {
        let z = dv(&[0.1, 0.4, 0.3]);
        let r = rank_one_correlation(0.5, 3).unwrap();
        let q = sharpe_covariance_gaussian(&r, &z, 100).unwrap();
        let e = select_max(&z).unwrap();
        let t = truncation_bounds(&e, &z, &q).unwrap();
        assert!((e.eta().dot(&t.c_vector) - 1.0).abs() < 1e-14);
        let y = e.arrange(&z).unwrap();
        assert!((e.eta().dot(&(&y - &t.z_vector)) - t.statistic).abs() < 1e-15);
    }

    #[test]
    fn pvalue_goes_to_zero_with_large_statistic() {
        let mut last = 1.0;
        for &top in &[0.25, 0.4, 0.8, 2.0] {
            let z = dv(&[top, 0.2]);
            let q = iso(2, 100);
            let o = conditional_pvalue(&select_max(&z).unwrap(), &z, &q, 0.0, 0.05).unwrap();
            assert!(o.p_value <= last);
            last = o.p_value;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn unconstrained_bound_is_naive_normal() {
        // with k = 2 and R = I the second asset does not constrain the first
        // once it is far below; check the V bounds collapse to the naive bound
        let z = dv(&[0.193, -5.0]);
        let q = iso(2, 1104);
        let e = select_max(&z).unwrap();
        let t = truncation_bounds(&e, &z, &q).unwrap();
        let b = t.lower_bound(0.05).unwrap();
        let naive = naive_normal_lower_bound(0.193, 1.0 / 1104.0, 0.05);
        assert!((b - naive).abs() < 1e-8, "{b} vs {naive}");
    }

    #[test]
    fn level_monotonicity_of_bound() {
        let z = dv(&[0.3, 0.25, 0.1]);
        let r = rank_one_correlation(0.6, 3).unwrap();
        let q = sharpe_covariance_gaussian(&r, &z, 200).unwrap();
        let e = select_max(&z).unwrap();
        let b05 = conditional_lower_bound(&e, &z, &q, 0.05).unwrap();
        let b50 = conditional_lower_bound(&e, &z, &q, 0.5).unwrap();
        assert!(b50 > b05);
    }

    fn random_corr(seed: &[f64], k: usize) -> DMatrix<f64> {
        // B B' with unit diagonal
        let b = DMatrix::from_fn(k, k + 1, |i, j| seed[(i * (k + 1) + j) % seed.len()]);
        let s = &b * b.transpose();
        let d = s.diagonal().map(|x| 1.0 / x.sqrt());
        DMatrix::from_fn(k, k, |i, j| s[(i, j)] * d[i] * d[j])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn observed_statistic_inside_interval(
            zs in proptest::collection::vec(-0.5f64..0.5, 3..7),
            seed in proptest::collection::vec(-1.0f64..1.0, 20..60),
            n in 20usize..2000,
        ) {
            let k = zs.len();
            let z = DVector::from_vec(zs);
            let r = random_corr(&seed, k);
            prop_assume!(r.iter().all(|x| x.is_finite()));
            let q = match sharpe_covariance_gaussian(&r, &z, n) { Ok(q) => q, Err(_) => return Ok(()) };
            for event in [select_max(&z).unwrap(), build_abs_max_constraint(&z).unwrap()] {
                let y = event.arrange(&z).unwrap();
                prop_assert!(event.contains_arranged(&y, 0.0));
                let t = truncation_bounds(&event, &z, &q).unwrap();
                prop_assert!(t.v_min <= t.statistic + 1e-12 && t.statistic <= t.v_max + 1e-12,
                    "{} not in [{}, {}]", t.statistic, t.v_min, t.v_max);
            }
        }

        #[test]
        fn inversion_round_trip(
            zs in proptest::collection::vec(-0.3f64..0.3, 2..6),
            rho in 0.0f64..0.9,
            n in 50usize..2000,
            alpha in 0.01f64..0.5,
        ) {
            let k = zs.len();
            let z = DVector::from_vec(zs);
            let r = rank_one_correlation(rho, k).unwrap();
            let q = sharpe_covariance_gaussian(&r, &z, n).unwrap();
            let e = select_max(&z).unwrap();
            let b = conditional_lower_bound(&e, &z, &q, alpha).unwrap();
            let o = conditional_pvalue(&e, &z, &q, b, alpha).unwrap();
            prop_assert!((o.p_value - alpha).abs() < 1e-6, "p {} alpha {}", o.p_value, alpha);
        }

        #[test]
        fn scale_free_pvalues(scale in 0.01f64..100.0) {
            use crate::moments::{estimate_moments, ReturnsPanel};
            let vals: Vec<f64> = (0..60).map(|i| ((i * 37 % 23) as f64 - 10.0) / 100.0 + (i % 3) as f64 * 0.01).collect();
            let m = DMatrix::from_column_slice(20, 3, &vals);
            let p1 = ReturnsPanel::from_matrix(m.clone()).unwrap();
            let p2 = ReturnsPanel::from_matrix(m * scale).unwrap();
            let pv = |p: &ReturnsPanel| {
                let est = estimate_moments(p, 0.0).unwrap();
                let q = sharpe_covariance_gaussian(&est.corr, &est.sharpe, est.n).unwrap();
                let e = select_max(&est.sharpe).unwrap();
                conditional_pvalue(&e, &est.sharpe, &q, 0.0, 0.05).unwrap().p_value
            };
            prop_assert!((pv(&p1) - pv(&p2)).abs() < 1e-9);
        }
    }
}
