//! Error summaries over Monte Carlo replications.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Sum with pairwise splitting, so the result depends on the values and their
/// order only, not on how they were accumulated.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Empirical quantile with linear interpolation between order statistics:
/// position `h = (n - 1) q` in the sorted sample (R's type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("no values to summarise"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot summarise NaN values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `(lo, hi)` percentiles of `values` under [`quantile_sorted`].
pub fn percentile_ci(values: &[f64], lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::invalid("percentile levels must satisfy 0 <= lo <= hi <= 1"));
    }
    let v = sorted_copy(values)?;
    Ok((quantile_sorted(&v, lo), quantile_sorted(&v, hi)))
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(quantile_sorted(&sorted_copy(values)?, 0.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub median_sse: f64,
    pub sse: Vec<f64>,
}

/// `sse_c = (b_c - beta0)ᵀ(b_c - beta0)`, their mean (MSE) and median.
pub fn metrics(estimates: &[DVector<f64>], beta0: &DVector<f64>) -> Result<Metrics> {
    let sse = estimates
        .iter()
        .map(|b| {
            if b.len() != beta0.len() {
                Err(Error::dims(format!("estimate has {} entries, truth has {}", b.len(), beta0.len())))
            } else {
                Ok((b - beta0).norm_squared())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    summarise(sse)
}

pub fn summarise(sse: Vec<f64>) -> Result<Metrics> {
    let median_sse = median(&sse)?;
    Ok(Metrics {
        mse: pairwise_sum(&sse) / sse.len() as f64,
        median_sse,
        sse,
    })
}
