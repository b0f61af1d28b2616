//! Synthetic designs, responses and observer scores for the Monte Carlo studies.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::logistic::logistic;

/// Probabilities handed to the logistic observer are kept inside this margin.
pub const PROBABILITY_CLAMP: f64 = 1e-9;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn check_loading(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")));
    }
    Ok(())
}

/// `x_ij = sqrt(1 - kappa^2) u_ij + kappa u_i,p+1`.
pub fn gen_collinear_predictors<R: Rng + ?Sized>(n: usize, p: usize, kappa: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    check_loading("kappa", kappa)?;
    let own = (1.0 - kappa * kappa).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = normal(rng);
        }
        let shared = normal(rng);
        for j in 0..p {
            x[(i, j)] = own * x[(i, j)] + kappa * shared;
        }
    }
    Ok(x)
}

/// Four predictors: columns 1-2 load `phi` and columns 3-4 load `eta` on one shared factor.
pub fn gen_logistic_predictors<R: Rng + ?Sized>(n: usize, phi: f64, eta: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    check_loading("phi", phi)?;
    check_loading("eta", eta)?;
    let loadings = [phi, phi, eta, eta];
    let mut x = DMatrix::zeros(n, 4);
    for i in 0..n {
        for j in 0..4 {
            x[(i, j)] = normal(rng);
        }
        let shared = normal(rng);
        for (j, &l) in loadings.iter().enumerate() {
            x[(i, j)] = (1.0 - l * l).sqrt() * x[(i, j)] + l * shared;
        }
    }
    Ok(x)
}

/// Centre and scale by the empirical mean and standard deviation. A constant
/// vector is only centred.
pub fn standardize(y: &DVector<f64>) -> DVector<f64> {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    y.map(|v| (v - mean) / scale)
}

/// `R = rho y_std + sqrt(1 - rho^2) u`, so `Cor(R, y) = rho`.
pub fn gen_linear_observer<R: Rng + ?Sized>(y_std: &DVector<f64>, rho: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("observer correlation must lie in [-1, 1], got {rho}")));
    }
    let noise = (1.0 - rho * rho).sqrt();
    Ok(y_std.map(|y| rho * y + noise * normal(rng)))
}

/// Scores for a binary response: `N(0, 1)` when `y = 0`, and
/// `N(rho / sqrt((1 - rho^2) g (1 - g)), 1)` when `y = 1`, with `g = g(x; beta0)`.
/// Returns the scores and how many probabilities had to be clamped.
pub fn gen_logistic_observer<R: Rng + ?Sized>(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    beta0: &DVector<f64>,
    rho: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, usize)> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::invalid(format!("logistic observer correlation must lie in (-1, 1), got {rho}")));
    }
    if x.nrows() != y.len() || x.ncols() != beta0.len() {
        return Err(Error::dims("observer design does not match response or coefficients"));
    }
    let eta = x * beta0;
    let mut clamped = 0;
    let scores = DVector::from_fn(y.len(), |i, _| {
        let shift = if y[i] == 1.0 {
            let raw = logistic(eta[i]);
            let g = raw.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
            if g != raw {
                clamped += 1;
            }
            rho / ((1.0 - rho * rho) * g * (1.0 - g)).sqrt()
        } else {
            0.0
        };
        shift + normal(rng)
    });
    Ok((scores, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cor(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn col(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
        m.column(j).iter().copied().collect()
    }

    #[test]
    fn collinear_correlation_is_kappa_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gen_collinear_predictors(100_000, 3, 0.95, &mut rng).unwrap();
        assert!((cor(&col(&x, 0), &col(&x, 2)) - 0.9025).abs() < 0.01);
        let var = col(&x, 1).iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((var - 1.0).abs() < 0.02);
        assert!(gen_collinear_predictors(2, 2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn logistic_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gen_logistic_predictors(100_000, 0.95, 0.98, &mut rng).unwrap();
        assert!((cor(&col(&x, 0), &col(&x, 1)) - 0.9025).abs() < 0.01);
        assert!((cor(&col(&x, 2), &col(&x, 3)) - 0.9604).abs() < 0.01);
        assert!((cor(&col(&x, 1), &col(&x, 2)) - 0.931).abs() < 0.01);
    }

    #[test]
    fn linear_observer_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = standardize(&DVector::from_fn(100_000, |_, _| normal(&mut rng) * 3.0 + 1.0));
        let r = gen_linear_observer(&y, 0.9, &mut rng).unwrap();
        assert!((cor(r.as_slice(), y.as_slice()) - 0.9).abs() < 0.01);
        assert_eq!(gen_linear_observer(&y, 1.0, &mut rng).unwrap(), y);
    }

    #[test]
    fn logistic_observer_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 50_000;
        let y = DVector::from_element(n, 1.0);
        let x = DMatrix::zeros(n, 1);
        let b = DVector::zeros(1);
        let (s, clamped) = gen_logistic_observer(&y, &x, &b, 0.75, &mut rng).unwrap();
        assert_eq!(clamped, 0);
        let expected = 0.75 / ((1.0f64 - 0.5625) * 0.25).sqrt();
        assert!((expected - 2.2678).abs() < 1e-4);
        assert!((s.mean() - expected).abs() < 4.0 / (n as f64).sqrt());
        let (s0, _) = gen_logistic_observer(&y, &x, &b, 0.0, &mut rng).unwrap();
        assert!(s0.mean().abs() < 4.0 / (n as f64).sqrt());
    }
}
