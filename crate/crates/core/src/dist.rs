//! Univariate distribution functions used by the tests.
//!
//! Standard normal and chi-square pieces lean on `statrs`; the truncated
//! normal and the noncentral t are implemented here because the library
//! needs tail behaviour `statrs` does not offer.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function, `1 - norm_cdf(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    std_normal().inverse_cdf(p)
}

/// `ln(1 - Phi(x))`, accurate far into the upper tail.
pub fn log_norm_sf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < 30.0 {
        let s = norm_sf(x);
        if x < -1.0 {
            // sf close to 1: ln1p of -cdf keeps precision
            return (-norm_cdf(x)).ln_1p();
        }
        return s.ln();
    }
    // asymptotic Mills-ratio series
    let x2 = x * x;
    let inv = 1.0 / x2;
    let series = 1.0 - inv + 3.0 * inv * inv - 15.0 * inv * inv * inv + 105.0 * inv.powi(4);
    -0.5 * x2 - x.ln() - LN_SQRT_2PI + series.ln()
}

/// `ln Phi(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    log_norm_sf(-x)
}

/// CDF of a normal with mean `mu` and variance `sigma2`, truncated to `[a, b]`.
///
/// Returns 0 for `x <= a` and 1 for `x >= b`. When the whole interval sits
/// in one tail the ratio is evaluated from log survival (or log CDF) values so
/// it does not collapse to 0/0.
pub fn truncated_normal_cdf(x: f64, a: f64, b: f64, mu: f64, sigma2: f64) -> Result<f64> {
    let (xs, as_, bs) = standardize(x, a, b, mu, sigma2)?;
    if xs <= as_ {
        return Ok(0.0);
    }
    if xs >= bs {
        return Ok(1.0);
    }
    let u = if as_ >= 0.0 {
        // upper tail: (S(a) - S(x)) / (S(a) - S(b))
        let la = log_norm_sf(as_);
        let lx = log_norm_sf(xs);
        let lb = log_norm_sf(bs);
        -(lx - la).exp_m1() / -(lb - la).exp_m1()
    } else if bs <= 0.0 {
        // lower tail: (F(x) - F(a)) / (F(b) - F(a))
        let la = log_norm_cdf(as_);
        let lx = log_norm_cdf(xs);
        let lb = log_norm_cdf(bs);
        ((lx - lb).exp() - (la - lb).exp()) / -(la - lb).exp_m1()
    } else {
        (norm_cdf(xs) - norm_cdf(as_)) / (norm_cdf(bs) - norm_cdf(as_))
    };
    Ok(clip_unit(u))
}

/// `1 - truncated_normal_cdf(..)`, computed directly so small upper-tail
/// probabilities keep their relative precision.
pub fn truncated_normal_sf(x: f64, a: f64, b: f64, mu: f64, sigma2: f64) -> Result<f64> {
    let (xs, as_, bs) = standardize(x, a, b, mu, sigma2)?;
    if xs <= as_ {
        return Ok(1.0);
    }
    if xs >= bs {
        return Ok(0.0);
    }
    let s = if as_ >= 0.0 {
        // (S(x) - S(b)) / (S(a) - S(b))
        let la = log_norm_sf(as_);
        let lx = log_norm_sf(xs);
        let lb = log_norm_sf(bs);
        ((lx - la).exp() - (lb - la).exp()) / -(lb - la).exp_m1()
    } else if bs <= 0.0 {
        // (F(b) - F(x)) / (F(b) - F(a))
        let la = log_norm_cdf(as_);
        let lx = log_norm_cdf(xs);
        let lb = log_norm_cdf(bs);
        -(lx - lb).exp_m1() / -(la - lb).exp_m1()
    } else {
        (norm_sf(xs) - norm_sf(bs)) / (norm_sf(as_) - norm_sf(bs))
    };
    Ok(clip_unit(s))
}

fn standardize(x: f64, a: f64, b: f64, mu: f64, sigma2: f64) -> Result<(f64, f64, f64)> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncated normal variance must be positive and finite, got {sigma2}"
        )));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "truncation interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    if x.is_nan() || mu.is_nan() {
        return Err(Error::InvalidArgument("NaN argument to truncated normal".into()));
    }
    let sd = sigma2.sqrt();
    Ok(((x - mu) / sd, (a - mu) / sd, (b - mu) / sd))
}

fn clip_unit(u: f64) -> f64 {
    if u.is_nan() {
        u
    } else {
        u.clamp(0.0, 1.0)
    }
}

/// Upper tail `P(chi2_df > x)`. Zero degrees of freedom is a point mass at 0.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return 0.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0)
}

/// `P(chi2_df <= x)`; for `df == 0` this is 1 on `x >= 0`.
pub fn chi_square_cdf(x: f64, df: usize) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    1.0 - chi_square_sf(x, df)
}

/// Noncentral t CDF, `P(T <= t)` with `df` degrees of freedom and
/// noncentrality `delta` (Lenth's AS 243 series).
pub fn noncentral_t_cdf(t: f64, df: f64, delta: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")));
    }
    if t.is_nan() || delta.is_nan() {
        return Err(Error::InvalidArgument("NaN argument to noncentral t".into()));
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    if t == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    const ITRMAX: usize = 5000;
    const ERRMAX: f64 = 1e-14;

    let (tt, del, negdel) = if t < 0.0 { (-t, -delta, true) } else { (t, delta, false) };

    let x = tt * tt / (tt * tt + df);
    let mut tnc = 0.0;
    if x > 0.0 {
        let lambda = del * del;
        let mut p = 0.5 * (-0.5 * lambda).exp();
        let mut q = (2.0 / std::f64::consts::PI).sqrt() * p * del;
        let mut s = 0.5 - p;
        let mut a = 0.5;
        let b = 0.5 * df;
        let rxb = (1.0 - x).powf(b);
        let albeta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        let mut xodd = beta_reg(a, b, x);
        let mut godd = 2.0 * rxb * (a * x.ln() - albeta).exp();
        let mut xeven = 1.0 - rxb;
        let mut geven = b * x * rxb;
        tnc = p * xodd + q * xeven;

        let mut en = 1.0;
        let mut converged = false;
        for _ in 0..ITRMAX {
            a += 1.0;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1.0) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2.0 * en);
            q *= lambda / (2.0 * en + 1.0);
            s -= p;
            en += 1.0;
            tnc += p * xodd + q * xeven;
            let errbd = 2.0 * s * (xodd - godd);
            if errbd.abs() <= ERRMAX && en > lambda / 2.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootSearch(format!(
                "noncentral t series did not converge (t = {t}, df = {df}, delta = {delta})"
            )));
        }
    }
    tnc += norm_cdf(-del);
    let out = if negdel { 1.0 - tnc } else { tnc };
    Ok(out.clamp(0.0, 1.0))
}

/// Noncentral t quantile by bracketed bisection on [`noncentral_t_cdf`].
pub fn noncentral_t_quantile(p: f64, df: f64, delta: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must be in (0, 1), got {p}")));
    }
    let f = |t: f64| noncentral_t_cdf(t, df, delta).map(|c| c - p);
    let spread = (1.0 + delta * delta / (2.0 * df)).sqrt().max(1.0);
    let guess = delta + norm_quantile(p) * spread;
    let mut lo = guess - 2.0 * spread;
    let mut hi = guess + 2.0 * spread;
    let mut expansions = 0;
    while f(lo)? > 0.0 {
        lo -= (hi - lo).max(1.0);
        expansions += 1;
        if expansions > 200 {
            return Err(Error::RootSearch("noncentral t quantile: lower bracket".into()));
        }
    }
    while f(hi)? < 0.0 {
        hi += (hi - lo).max(1.0);
        expansions += 1;
        if expansions > 200 {
            return Err(Error::RootSearch("noncentral t quantile: upper bracket".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-10 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, StudentsT};

    #[test]
    fn plain_normal_when_untruncated() {
        let u = truncated_normal_cdf(0.3, f64::NEG_INFINITY, f64::INFINITY, 0.3, 2.0).unwrap();
        assert!((u - 0.5).abs() < 1e-15);
        let u = truncated_normal_cdf(1.0, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0).unwrap();
        assert!((u - norm_cdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn endpoints_map_to_zero_and_one() {
        assert_eq!(truncated_normal_cdf(-1.0, -1.0, 2.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(truncated_normal_cdf(2.0, -1.0, 2.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(truncated_normal_sf(2.0, -1.0, 2.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bad_arguments() {
        assert!(truncated_normal_cdf(0.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(truncated_normal_cdf(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(truncated_normal_cdf(0.0, 0.0, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn cdf_and_sf_sum_to_one() {
        for &(x, a, b, mu) in &[
            (0.5, 0.0, 1.0, 0.2),
            (9.5, 9.0, 10.0, 0.0),
            (-9.5, -10.0, -9.0, 0.0),
            (40.2, 40.0, f64::INFINITY, 0.0),
        ] {
            let c = truncated_normal_cdf(x, a, b, mu, 1.0).unwrap();
            let s = truncated_normal_sf(x, a, b, mu, 1.0).unwrap();
            assert!((c + s - 1.0).abs() < 1e-12, "{x} {a} {b}: {c} + {s}");
        }
    }

    #[test]
    fn far_tail_limit_is_exponential() {
        // beyond ~38 sigma plain erfc underflows; the log path must not
        let u = truncated_normal_cdf(50.0 + 1e-3, 50.0, f64::INFINITY, 0.0, 1.0).unwrap();
        // for large a the truncated law is roughly a + Exp(a)
        let approx = 1.0 - (-50.0f64 * 1e-3).exp();
        assert!((u - approx).abs() < 1e-3, "{u} vs {approx}");
    }

    #[test]
    fn log_sf_is_continuous_at_switch() {
        let below = log_norm_sf(30.0 - 1e-9);
        let above = log_norm_sf(30.0 + 1e-9);
        assert!((below - above).abs() < 1e-6);
        assert!((log_norm_sf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((log_norm_sf(-3.0) - norm_cdf(3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn chi_square_against_statrs() {
        for df in 1..8usize {
            let d = ChiSquared::new(df as f64).unwrap();
            for &x in &[0.1, 1.0, 3.5, 12.0] {
                assert!((chi_square_cdf(x, df) - d.cdf(x)).abs() < 1e-12);
            }
        }
        assert_eq!(chi_square_cdf(0.0, 0), 1.0);
        assert_eq!(chi_square_cdf(3.0, 0), 1.0);
        assert_eq!(chi_square_sf(3.0, 0), 0.0);
    }

    #[test]
    fn noncentral_t_reduces_to_central() {
        let d = StudentsT::new(0.0, 1.0, 9.0).unwrap();
        for &t in &[-3.0, -0.5, 0.0, 0.7, 2.5, 6.0] {
            let c = noncentral_t_cdf(t, 9.0, 0.0).unwrap();
            assert!((c - d.cdf(t)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn noncentral_t_tracks_normal_at_large_df() {
        // T -> Z + delta as df grows
        let c = noncentral_t_cdf(2.5, 1e6, 2.0).unwrap();
        assert!((c - norm_cdf(0.5)).abs() < 1e-4);
    }

    #[test]
    fn noncentral_t_reference_values() {
        // independent check: numerically integrate over the chi variate
        // P(T <= t) = E_V[ Phi(t sqrt(V/df) - delta) ], V ~ chi2_df
        let df = 7.0;
        for &(t, delta) in &[(1.0, 0.5), (3.0, 2.0), (-1.0, 1.0), (5.0, 4.0)] {
            let chi = ChiSquared::new(df).unwrap();
            let m = 200_000;
            let mut acc = 0.0;
            for i in 0..m {
                let pr = (i as f64 + 0.5) / m as f64;
                let v = chi.inverse_cdf(pr);
                acc += norm_cdf(t * (v / df).sqrt() - delta);
            }
            let oracle = acc / m as f64;
            let got = noncentral_t_cdf(t, df, delta).unwrap();
            assert!((got - oracle).abs() < 2e-5, "t={t} delta={delta}: {got} vs {oracle}");
        }
    }

    #[test]
    fn noncentral_t_quantile_inverts_cdf() {
        for &(p, df, delta) in &[(0.99, 1103.0, 4.0), (0.05, 20.0, -1.0), (0.5, 3.0, 2.0)] {
            let q = noncentral_t_quantile(p, df, delta).unwrap();
            let back = noncentral_t_cdf(q, df, delta).unwrap();
            assert!((back - p).abs() < 1e-9, "{p} {df} {delta}: {back}");
        }
    }
}
