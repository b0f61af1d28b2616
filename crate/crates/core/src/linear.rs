//! Least squares, ridge and Liu-type estimators for `y = X beta + eps`, the
//! canonical (eigen) form of `S = XᵀX`, plug-in shrinkage parameter rules and
//! closed-form first and second moments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{inverse_checked, shifted, solve_checked, solve_matrix_checked, sym_eigen_desc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShrinkageRule {
    /// Hoerl-Kennard-Baldwin ridge parameter.
    Hkb,
    /// `k = (lambda_1 - 100 lambda_p) / 99` with the matching optimal `d`.
    LiuType,
    /// `k = (p + 1) / beta_ML' beta_ML` for logistic models.
    LogisticKp1,
    /// Numerical minimisation of the Liu-type logistic MSE over `d`.
    LogisticMse,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageParams {
    pub k: f64,
    pub d: f64,
    pub rule: ShrinkageRule,
}

impl ShrinkageParams {
    pub fn manual(k: f64, d: f64) -> Self {
        Self {
            k,
            d,
            rule: ShrinkageRule::Manual,
        }
    }
}

/// Which HKB formula to use. The squared-sigma form is the standard rule; the
/// other keeps the residual standard deviation unsquared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HkbVariant {
    #[default]
    SigmaSquared,
    Sigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub params: Option<ShrinkageParams>,
    /// Residual sum of squares over `N - p`.
    pub sigma2_hat: Option<f64>,
    /// Condition number of the last system solved.
    pub condition: f64,
}

/// Eigen form of `S`: `UᵀSU = diag(lambda)` with `lambda` descending, `Z = XU`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub u: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub z: DMatrix<f64>,
}

pub(crate) fn residual_variance(data: &Dataset, beta: &DVector<f64>) -> f64 {
    let resid = data.y() - data.x() * beta;
    resid.norm_squared() / (data.n() - data.p()) as f64
}

pub fn ls_fit(data: &Dataset) -> Result<FitResult> {
    data.require_overdetermined()?;
    let (beta, condition) = solve_checked(&data.gram(), &data.xty(), "least squares normal equations")?;
    let sigma2_hat = residual_variance(data, &beta);
    Ok(FitResult {
        beta,
        params: None,
        sigma2_hat: Some(sigma2_hat),
        condition,
    })
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("ridge parameter must be finite and non-negative, got {k}")));
    }
    Ok(())
}

/// `(S + kI)⁻¹ Xᵀy`.
pub fn ridge_fit(data: &Dataset, k: f64) -> Result<FitResult> {
    data.require_overdetermined()?;
    check_k(k)?;
    let (beta, condition) = solve_checked(&shifted(&data.gram(), k), &data.xty(), "ridge system")?;
    let sigma2_hat = residual_variance(data, &beta);
    Ok(FitResult {
        beta,
        params: Some(ShrinkageParams::manual(k, 0.0)),
        sigma2_hat: Some(sigma2_hat),
        condition,
    })
}

/// `(S + kI)⁻¹ (Xᵀy + d beta_R)`. `k = 0` is accepted when `S` itself is well conditioned.
pub fn liu_type_fit(data: &Dataset, k: f64, d: f64) -> Result<FitResult> {
    if !d.is_finite() {
        return Err(Error::invalid("Liu parameter d must be finite"));
    }
    let ridge = ridge_fit(data, k)?;
    let rhs = data.xty() + &ridge.beta * d;
    let (beta, condition) = solve_checked(&shifted(&data.gram(), k), &rhs, "Liu-type system")?;
    let sigma2_hat = residual_variance(data, &beta);
    Ok(FitResult {
        beta,
        params: Some(ShrinkageParams::manual(k, d)),
        sigma2_hat: Some(sigma2_hat),
        condition,
    })
}

/// `W = (I + k S⁻¹)⁻¹ = (S + kI)⁻¹ S`, the ridge map applied to `beta_LS`.
pub fn ridge_matrix(s: &DMatrix<f64>, k: f64) -> Result<DMatrix<f64>> {
    check_k(k)?;
    solve_matrix_checked(&shifted(s, k), s, "ridge shrinkage matrix")
}

/// `A_LT = (S + kI)⁻¹ (I + d (S + kI)⁻¹) S`, the Liu-type map applied to `beta_LS`.
pub fn liu_type_matrix(s: &DMatrix<f64>, k: f64, d: f64) -> Result<DMatrix<f64>> {
    check_k(k)?;
    let p = s.nrows();
    let inv = inverse_checked(&shifted(s, k), "Liu-type shrinkage matrix")?;
    let inner = DMatrix::identity(p, p) + &inv * d;
    Ok(&inv * inner * s)
}

/// Liu-type estimate computed as `A_LT beta_LS`.
pub fn liu_type_factored(data: &Dataset, k: f64, d: f64) -> Result<DVector<f64>> {
    let ls = ls_fit(data)?;
    Ok(liu_type_matrix(&data.gram(), k, d)? * ls.beta)
}

pub fn canonical_form(data: &Dataset) -> CanonicalForm {
    let (lambda, u) = sym_eigen_desc(&data.gram());
    // Rounding can leave a tiny negative eigenvalue on a PSD matrix.
    let lambda = lambda.map(|l| l.max(0.0));
    let z = data.x() * &u;
    CanonicalForm { u, lambda, z }
}

/// HKB ridge parameter from the least-squares fit.
pub fn select_k_hkb(data: &Dataset, variant: HkbVariant) -> Result<ShrinkageParams> {
    let ls = ls_fit(data)?;
    let norm2 = ls.beta.norm_squared();
    if norm2 <= 0.0 {
        return Err(Error::DegenerateCoefficients(
            "least-squares coefficients are all zero".into(),
        ));
    }
    let s2 = ls.sigma2_hat.unwrap_or(0.0);
    let scale = match variant {
        HkbVariant::SigmaSquared => s2,
        HkbVariant::Sigma => s2.sqrt(),
    };
    Ok(ShrinkageParams {
        k: data.p() as f64 * scale / norm2,
        d: 0.0,
        rule: ShrinkageRule::Hkb,
    })
}

/// Liu-type `(k, d)`: `k = max(0, (lambda_1 - 100 lambda_p) / 99)` and
///
/// ```text
/// d = - sum_j lambda_j (s2 - k a_j^2) / (lambda_j + k)^3
///       / sum_j lambda_j (lambda_j a_j^2 + s2) / (lambda_j + k)^4
/// ```
///
/// with `a = (Lambda + kI)⁻¹ Zᵀy` and `s2` the ridge residual variance at that `k`.
pub fn select_kd_liu(data: &Dataset) -> Result<ShrinkageParams> {
    data.require_overdetermined()?;
    let canon = canonical_form(data);
    let p = canon.lambda.len();
    let l1 = canon.lambda[0];
    let lp = canon.lambda[p - 1];
    if !(lp > 0.0) || l1 / lp > crate::linalg::SINGULAR_CONDITION {
        return Err(Error::Singular {
            context: "Liu-type parameter selection needs lambda_p > 0".into(),
            condition: if lp > 0.0 { l1 / lp } else { f64::INFINITY },
        });
    }
    let k = ((l1 - 100.0 * lp) / 99.0).max(0.0);
    let zty = canon.z.tr_mul(data.y());
    let alpha = DVector::from_fn(p, |j, _| zty[j] / (canon.lambda[j] + k));
    let s2 = ridge_fit(data, k)?.sigma2_hat.unwrap_or(0.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..p {
        let l = canon.lambda[j];
        let a2 = alpha[j] * alpha[j];
        num += l * (s2 - k * a2) / (l + k).powi(3);
        den += l * (l * a2 + s2) / (l + k).powi(4);
    }
    if !(den > 0.0) {
        return Err(Error::SelectionFailure("Liu d denominator vanished".into()));
    }
    Ok(ShrinkageParams {
        k,
        d: -num / den,
        rule: ShrinkageRule::LiuType,
    })
}

/// Mean and covariance of a linear map `A beta_LS` when `y ~ N(X beta, sigma2 I)`.
fn linear_map_moments(
    s: &DMatrix<f64>,
    a: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let s_inv = inverse_checked(s, "S in moment formula")?;
    let mean = a * beta;
    let cov = a * s_inv * a.transpose() * sigma2;
    Ok((mean, cov))
}

fn check_moment_inputs(x: &DMatrix<f64>, beta: &DVector<f64>, sigma2: f64) -> Result<()> {
    if x.ncols() != beta.len() {
        return Err(Error::dims(format!(
            "design has {} columns but beta has {} entries",
            x.ncols(),
            beta.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("sigma2 must be non-negative"));
    }
    Ok(())
}

/// Least-squares moments: `(beta, sigma2 S⁻¹)`.
pub fn ls_moments(x: &DMatrix<f64>, beta: &DVector<f64>, sigma2: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_moment_inputs(x, beta, sigma2)?;
    let s = x.tr_mul(x);
    let p = s.nrows();
    linear_map_moments(&s, &DMatrix::identity(p, p), beta, sigma2)
}

/// Ridge moments: `(W beta, sigma2 W S⁻¹ Wᵀ)` with `W = (I + kS⁻¹)⁻¹`.
pub fn ridge_moments(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
    k: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_moment_inputs(x, beta, sigma2)?;
    let s = x.tr_mul(x);
    let w = ridge_matrix(&s, k)?;
    linear_map_moments(&s, &w, beta, sigma2)
}

/// Liu-type moments: `(A beta, sigma2 A S⁻¹ Aᵀ)` with `A = A_LT`.
pub fn liu_moments(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
    k: f64,
    d: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_moment_inputs(x, beta, sigma2)?;
    let s = x.tr_mul(x);
    let a = liu_type_matrix(&s, k, d)?;
    linear_map_moments(&s, &a, beta, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        Dataset::continuous(x, y).unwrap()
    }

    fn orthonormal_data() -> Dataset {
        // Columns of a 4x2 design with XᵀX = I.
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        Dataset::continuous(x, y).unwrap()
    }

    #[test]
    fn ls_identity_design() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let d = Dataset::continuous(x, DVector::from_vec(vec![1.0, 2.0, 0.0])).unwrap();
        let fit = ls_fit(&d).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-14 && (fit.beta[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ls_recovers_noiseless_truth() {
        let d = random_data(3, 10, 3);
        let truth = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let exact = Dataset::continuous(d.x().clone(), d.x() * &truth).unwrap();
        let fit = ls_fit(&exact).unwrap();
        assert!((fit.beta - truth).amax() < 1e-10);
        assert!(fit.sigma2_hat.unwrap() < 1e-20);
    }

    #[test]
    fn singular_design_is_reported() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        let d = Dataset::continuous(x, DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!(matches!(ls_fit(&d), Err(Error::Singular { .. })));
    }

    #[test]
    fn ridge_on_orthonormal_design_scales_ls() {
        let d = orthonormal_data();
        let ls = ls_fit(&d).unwrap().beta;
        for k in [0.0, 0.5, 3.0] {
            let r = ridge_fit(&d, k).unwrap().beta;
            assert!((r - &ls / (1.0 + k)).amax() < 1e-12);
        }
    }

    #[test]
    fn liu_on_orthonormal_design_scales_ls() {
        let d = orthonormal_data();
        let ls = ls_fit(&d).unwrap().beta;
        let (k, dd) = (0.7, -0.4);
        let lt = liu_type_fit(&d, k, dd).unwrap().beta;
        let expected = &ls * ((1.0 + dd / (1.0 + k)) / (1.0 + k));
        assert!((lt - expected).amax() < 1e-12);
    }

    #[test]
    fn ridge_norm_is_monotone() {
        let d = random_data(9, 12, 4);
        let mut last = f64::INFINITY;
        for k in [0.0, 0.1, 0.5, 1.0, 5.0, 50.0] {
            let norm = ridge_fit(&d, k).unwrap().beta.norm();
            assert!(norm <= last + 1e-12);
            last = norm;
        }
    }

    #[test]
    fn negative_k_is_rejected() {
        assert!(ridge_fit(&random_data(1, 6, 2), -0.1).is_err());
    }

    #[test]
    fn canonical_form_properties() {
        let d = random_data(4, 15, 4);
        let c = canonical_form(&d);
        let s = d.gram();
        let rebuilt = &c.u * DMatrix::from_diagonal(&c.lambda) * c.u.transpose();
        assert!((rebuilt - &s).norm() <= 1e-8 * s.norm());
        let ztz = c.z.tr_mul(&c.z);
        assert!((ztz - DMatrix::from_diagonal(&c.lambda)).amax() < 1e-8);
        assert!(c.lambda.iter().zip(c.lambda.iter().skip(1)).all(|(a, b)| a >= b));
    }

    #[test]
    fn hkb_examples() {
        // One column, one unit coefficient, unit residual variance.
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0 - 1.0, 1.0 + 1.0, 1.0]);
        let d = Dataset::continuous(x, y).unwrap();
        let k = select_k_hkb(&d, HkbVariant::SigmaSquared).unwrap();
        assert!((k.k - 1.0).abs() < 1e-12);

        let zero = Dataset::continuous(DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 0.0]), DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(select_k_hkb(&zero, HkbVariant::SigmaSquared), Err(Error::DegenerateCoefficients(_))));
    }

    #[test]
    fn liu_k_clamps_at_low_collinearity() {
        let d = orthonormal_data();
        let p = select_kd_liu(&d).unwrap();
        assert_eq!(p.k, 0.0);
    }

    #[test]
    fn liu_k_direct_arithmetic() {
        // Columns scaled so that lambda = (200, 1).
        let x = DMatrix::from_row_slice(4, 2, &[
            200f64.sqrt() / 2.0, 0.5,
            200f64.sqrt() / 2.0, -0.5,
            200f64.sqrt() / 2.0, 0.5,
            200f64.sqrt() / 2.0, -0.5,
        ]);
        let d = Dataset::continuous(x, DVector::from_vec(vec![1.0, 0.0, 2.0, -1.0])).unwrap();
        let p = select_kd_liu(&d).unwrap();
        assert!((p.k - 100.0 / 99.0).abs() < 1e-10);
    }
}
