//! Small statistical utilities shared by the sampler diagnostics and the
//! simulation harness: moments, empirical quantiles, a one-sample
//! Kolmogorov–Smirnov statistic, simple least-squares line fits, isotonic
//! regression, and an autocorrelation-based effective sample size.

use crate::error::{Error, Result};

/// Arithmetic mean. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance. Returns 0 for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean under independence.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Empirical quantile at `level` in [0, 1].
///
/// Uses the left-continuous order statistic x_(⌈level·n⌉); level 0 is the
/// minimum and level 1 the maximum, so the level-(1−ε) quantile degenerates
/// to the smallest observation as ε → 1.
pub fn quantile(xs: &[f64], level: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("quantile of an empty sample".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if level <= 0.0 {
        return Ok(sorted[0]);
    }
    if level >= 1.0 {
        return Ok(sorted[sorted.len() - 1]);
    }
    let k = (level * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.saturating_sub(1)])
}

/// log(Σ exp(x_i)) with the usual max shift; −∞ for all-empty mass.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Result of an ordinary least-squares straight-line fit.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit y ≈ intercept + slope·x by least squares.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "ols_line inputs",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(
            "line fit needs at least two points".into(),
        ));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig(
            "line fit undefined: regressor has zero variance".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(u, v)| {
                let e = v - (intercept + slope * u);
                e * e
            })
            .sum();
        1.0 - ss_res / syy
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Pool-adjacent-violators fit of a nondecreasing sequence to `y` (unit weights).
pub fn isotonic_nondecreasing(y: &[f64]) -> Vec<f64> {
    // Classic PAVA with (sum, count) blocks.
    let mut sums: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len();
            let last = sums[k - 1] / counts[k - 1] as f64;
            let prev = sums[k - 2] / counts[k - 2] as f64;
            if prev <= last {
                break;
            }
            let (s, c) = (sums.pop().unwrap(), counts.pop().unwrap());
            sums[k - 2] += s;
            counts[k - 2] += c;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in sums.iter().zip(&counts) {
        let v = s / *c as f64;
        out.extend(std::iter::repeat(v).take(*c));
    }
    out
}

/// Pool-adjacent-violators fit of a nonincreasing sequence to `y`.
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    isotonic_nondecreasing(&neg).into_iter().map(|v| -v).collect()
}

/// One-sample Kolmogorov–Smirnov statistic sup_x |F_n(x) − F(x)|.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("KS statistic of empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov–Smirnov critical value at significance `alpha`:
/// sqrt(ln(2/α) / (2n)).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Effective sample size of a scalar series via the initial-positive-sequence
/// autocorrelation estimator.
///
/// Sums autocorrelations over consecutive lag pairs (ρ₂ₘ + ρ₂ₘ₊₁) while the
/// pair sums stay positive, τ = 1 + 2·Σρ, ESS = n/τ. The result is clamped to
/// [1, n]; a (near-)constant series counts as fully independent.
pub fn ess_initial_positive(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau).clamp(1.0, n as f64)
}
