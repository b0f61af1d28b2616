//! Estimators under a stochastic linear restriction `r = R beta + e`,
//! `Var(e) = sigma^2 Omega`, mixed into the sample information with weight `v`.
//!
//! The default computational path is the update form
//! `b + v S⁻¹Rᵀ(Omega + v R S⁻¹ Rᵀ)⁻¹ (r - R b)`, which never inverts `Omega`.
//! The `*_normal_form` functions evaluate the equivalent
//! `(S + v RᵀOmega⁻¹R)⁻¹ (... + v RᵀOmega⁻¹ r)` expressions.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, inverse_checked, is_symmetric, shifted, solve_checked};
use crate::linear::{ls_fit, residual_variance, ridge_fit, ridge_matrix, FitResult, ShrinkageParams};

/// `Omega` must be at least this well conditioned wherever its inverse is formed.
pub const OMEGA_MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionSpec {
    /// `j x p` restriction matrix.
    pub r_matrix: DMatrix<f64>,
    /// Length-`j` restriction target.
    pub r: DVector<f64>,
    /// `j x j` noise structure.
    pub omega: DMatrix<f64>,
    /// Mixing weight in `(0, 1]`.
    pub v: f64,
}

impl RestrictionSpec {
    pub fn new(r_matrix: DMatrix<f64>, r: DVector<f64>, omega: DMatrix<f64>, v: f64) -> Result<Self> {
        let spec = Self { r_matrix, r, omega, v };
        spec.check_shape()?;
        Ok(spec)
    }

    fn check_shape(&self) -> Result<()> {
        let j = self.r_matrix.nrows();
        if j == 0 {
            return Err(Error::invalid("restriction needs at least one row"));
        }
        if self.r.len() != j || self.omega.nrows() != j || self.omega.ncols() != j {
            return Err(Error::dims(format!(
                "restriction with {j} rows needs r of length {j} and a {j}x{j} Omega"
            )));
        }
        if !is_symmetric(&self.omega, 1e-12) {
            return Err(Error::invalid("Omega must be symmetric"));
        }
        if !(self.v > 0.0 && self.v <= 1.0) {
            return Err(Error::invalid(format!("restriction weight v must lie in (0, 1], got {}", self.v)));
        }
        Ok(())
    }

    fn validate_for(&self, p: usize) -> Result<()> {
        self.check_shape()?;
        if self.r_matrix.ncols() != p {
            return Err(Error::dims(format!(
                "restriction has {} columns, model has {p}",
                self.r_matrix.ncols()
            )));
        }
        Ok(())
    }

    fn omega_inverse(&self) -> Result<DMatrix<f64>> {
        let cond = condition_number(&self.omega);
        if !(cond < OMEGA_MAX_CONDITION) {
            return Err(Error::Singular {
                context: "Omega".into(),
                condition: cond,
            });
        }
        inverse_checked(&self.omega, "Omega")
    }

    /// `v RᵀOmega⁻¹R` and `v RᵀOmega⁻¹r`.
    fn information(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let oi = self.omega_inverse()?;
        let rt_oi = self.r_matrix.transpose() * oi;
        Ok((&rt_oi * &self.r_matrix * self.v, &rt_oi * &self.r * self.v))
    }
}

/// `(A + BCD)⁻¹ = A⁻¹ - A⁻¹B (C⁻¹ + D A⁻¹ B)⁻¹ D A⁻¹`.
pub fn woodbury_inverse(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || c.ncols() != m || b.nrows() != n || b.ncols() != m || d.nrows() != m || d.ncols() != n {
        return Err(Error::dims(format!(
            "Woodbury shapes: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let a_inv = inverse_checked(a, "Woodbury A")?;
    let c_inv = inverse_checked(c, "Woodbury C")?;
    let inner = c_inv + d * &a_inv * b;
    let inner_inv = inverse_checked(&inner, "Woodbury inner matrix")?;
    Ok(&a_inv - &a_inv * b * inner_inv * d * &a_inv)
}

/// `base + v S⁻¹Rᵀ(Omega + v R S⁻¹ Rᵀ)⁻¹ (r - R base)`.
fn restricted_update(s_inv: &DMatrix<f64>, restr: &RestrictionSpec, base: &DVector<f64>) -> Result<DVector<f64>> {
    let s_inv_rt = s_inv * restr.r_matrix.transpose();
    let g = &restr.omega + &restr.r_matrix * &s_inv_rt * restr.v;
    let gap = &restr.r - &restr.r_matrix * base;
    let (coef, _) = solve_checked(&g, &gap, "restriction update")?;
    Ok(base + s_inv_rt * coef * restr.v)
}

fn prepare(data: &Dataset, restr: &RestrictionSpec) -> Result<(FitResult, DMatrix<f64>)> {
    restr.validate_for(data.p())?;
    let ls = ls_fit(data)?;
    let s_inv = inverse_checked(&data.gram(), "S")?;
    Ok((ls, s_inv))
}

fn finish(data: &Dataset, beta: DVector<f64>, params: Option<ShrinkageParams>, condition: f64) -> FitResult {
    let sigma2_hat = residual_variance(data, &beta);
    FitResult {
        beta,
        params,
        sigma2_hat: Some(sigma2_hat),
        condition,
    }
}

/// Weighted mixed estimator, update form.
pub fn mixed_fit(data: &Dataset, restr: &RestrictionSpec) -> Result<FitResult> {
    let (ls, s_inv) = prepare(data, restr)?;
    let beta = restricted_update(&s_inv, restr, &ls.beta)?;
    Ok(finish(data, beta, None, ls.condition))
}

/// Weighted mixed estimator, `(S + vRᵀΩ⁻¹R)⁻¹ (Xᵀy + vRᵀΩ⁻¹r)`.
pub fn mixed_fit_normal_form(data: &Dataset, restr: &RestrictionSpec) -> Result<FitResult> {
    restr.validate_for(data.p())?;
    data.require_overdetermined()?;
    let (info, target) = restr.information()?;
    let (beta, cond) = solve_checked(&(data.gram() + info), &(data.xty() + target), "mixed system")?;
    Ok(finish(data, beta, None, cond))
}

/// `(S + I)⁻¹(S + dI) b`, evaluated as `b + (d - 1)(S + I)⁻¹ b`.
fn liu_one_map(s: &DMatrix<f64>, b: &DVector<f64>, d: f64) -> Result<DVector<f64>> {
    if !d.is_finite() {
        return Err(Error::invalid("Liu parameter d must be finite"));
    }
    let (t, _) = solve_checked(&shifted(s, 1.0), b, "(S + I) system")?;
    Ok(b + t * (d - 1.0))
}

/// Mixed Liu: `(S + I)⁻¹(S + dI) beta_ME`.
pub fn mixed_liu_fit(data: &Dataset, restr: &RestrictionSpec, d: f64) -> Result<FitResult> {
    let me = mixed_fit(data, restr)?;
    let beta = liu_one_map(&data.gram(), &me.beta, d)?;
    Ok(finish(data, beta, Some(ShrinkageParams::manual(1.0, d)), me.condition))
}

/// One-parameter Liu: `(S + I)⁻¹(S + dI) beta_LS`.
pub fn liu_one_fit(data: &Dataset, d: f64) -> Result<FitResult> {
    let ls = ls_fit(data)?;
    let beta = liu_one_map(&data.gram(), &ls.beta, d)?;
    Ok(finish(data, beta, Some(ShrinkageParams::manual(1.0, d)), ls.condition))
}

/// `F_d S⁻¹ Xᵀy` with `F_d = (S + I)⁻¹(S + dI)`, the one-parameter Liu estimate
/// computed without going through `beta_LS`.
pub fn liu_one_closed_form(data: &Dataset, d: f64) -> Result<DVector<f64>> {
    let s = data.gram();
    let f = liu_one_matrix(&s, d)?;
    let (ls_part, _) = solve_checked(&s, &data.xty(), "S")?;
    Ok(f * ls_part)
}

/// `F_d = (S + I)⁻¹(S + dI)`.
pub fn liu_one_matrix(s: &DMatrix<f64>, d: f64) -> Result<DMatrix<f64>> {
    let inv = inverse_checked(&shifted(s, 1.0), "(S + I)")?;
    Ok(inv * shifted(s, d))
}

/// Stochastic restricted Liu estimator, update form around `beta_LT1`.
pub fn srl_fit(data: &Dataset, restr: &RestrictionSpec, d: f64) -> Result<FitResult> {
    let (ls, s_inv) = prepare(data, restr)?;
    let lt1 = liu_one_map(&data.gram(), &ls.beta, d)?;
    let beta = restricted_update(&s_inv, restr, &lt1)?;
    Ok(finish(data, beta, Some(ShrinkageParams::manual(1.0, d)), ls.condition))
}

/// `(S + vRᵀΩ⁻¹R)⁻¹ (F_d Xᵀy + vRᵀΩ⁻¹r)`.
pub fn srl_normal_form(data: &Dataset, restr: &RestrictionSpec, d: f64) -> Result<DVector<f64>> {
    restr.validate_for(data.p())?;
    let s = data.gram();
    let (info, target) = restr.information()?;
    let rhs = liu_one_matrix(&s, d)? * data.xty() + target;
    Ok(solve_checked(&(s + info), &rhs, "SRL system")?.0)
}

/// Stochastic restricted ridge estimator, update form around `beta_R`.
pub fn srr_fit(data: &Dataset, restr: &RestrictionSpec, k: f64) -> Result<FitResult> {
    let (ls, s_inv) = prepare(data, restr)?;
    let ridge = ridge_fit(data, k)?;
    let beta = restricted_update(&s_inv, restr, &ridge.beta)?;
    Ok(finish(data, beta, Some(ShrinkageParams::manual(k, 0.0)), ls.condition))
}

/// `(S + vRᵀΩ⁻¹R)⁻¹ (W Xᵀy + vRᵀΩ⁻¹r)` with `W = (I + kS⁻¹)⁻¹`.
pub fn srr_normal_form(data: &Dataset, restr: &RestrictionSpec, k: f64) -> Result<DVector<f64>> {
    restr.validate_for(data.p())?;
    let s = data.gram();
    let (info, target) = restr.information()?;
    let rhs = ridge_matrix(&s, k)? * data.xty() + target;
    Ok(solve_checked(&(s + info), &rhs, "SRR system")?.0)
}

/// Mixed ridge: `(I + kS⁻¹)⁻¹ beta_ME`, evaluated as `beta_ME - k (S + kI)⁻¹ beta_ME`.
pub fn mixed_ridge_fit(data: &Dataset, restr: &RestrictionSpec, k: f64) -> Result<FitResult> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("ridge parameter must be finite and non-negative, got {k}")));
    }
    let me = mixed_fit(data, restr)?;
    let (t, _) = solve_checked(&shifted(&data.gram(), k), &me.beta, "mixed ridge system")?;
    let beta = &me.beta - t * k;
    Ok(finish(data, beta, Some(ShrinkageParams::manual(k, 0.0)), me.condition))
}

/// Moments of `A (F Xᵀy + v RᵀΩ⁻¹ r)` with `A = (S + vRᵀΩ⁻¹R)⁻¹`, when
/// `y ~ N(X beta, sigma2 I)` and `r ~ N(R beta, sigma2 Omega)` independently.
fn restricted_moments(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
    restr: &RestrictionSpec,
    f: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = x.ncols();
    if beta.len() != p {
        return Err(Error::dims("beta length differs from design width"));
    }
    restr.validate_for(p)?;
    let s = x.tr_mul(x);
    let (info, _) = restr.information()?;
    let a = inverse_checked(&(&s + &info), "S + v RᵀΩ⁻¹R")?;
    let mean = beta + &a * (f - DMatrix::identity(p, p)) * &s * beta;
    // v² RᵀΩ⁻¹R = v * info
    let middle = f * &s * f.transpose() + &info * restr.v;
    let cov = &a * middle * &a * sigma2;
    Ok((mean, cov))
}

/// Mean `beta + A(F_d - I)S beta`, covariance `sigma2 A(F_d S F_dᵀ + v²RᵀΩ⁻¹R)A`.
pub fn srl_moments(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
    restr: &RestrictionSpec,
    d: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let f = liu_one_matrix(&x.tr_mul(x), d)?;
    restricted_moments(x, beta, sigma2, restr, &f)
}

/// Mean `beta + A(W - I)S beta`, covariance `sigma2 A(W S Wᵀ + v²RᵀΩ⁻¹R)A`.
pub fn srr_moments(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    sigma2: f64,
    restr: &RestrictionSpec,
    k: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let w = ridge_matrix(&x.tr_mul(x), k)?;
    restricted_moments(x, beta, sigma2, restr, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(seed: u64) -> (Dataset, RestrictionSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let rm = DMatrix::from_fn(1, 3, |_, _| rng.random_range(-2.0..2.0));
        let restr = RestrictionSpec::new(
            rm,
            DVector::from_vec(vec![rng.random_range(-1.0..1.0)]),
            DMatrix::from_element(1, 1, 0.5),
            0.8,
        )
        .unwrap();
        (Dataset::continuous(x, y).unwrap(), restr)
    }

    #[test]
    fn woodbury_scalar_and_zero_update() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let two = DMatrix::from_element(1, 1, 2.0);
        let inv = woodbury_inverse(&two, &one, &one, &one).unwrap();
        assert!((inv[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let zero = DMatrix::zeros(2, 1);
        let inv = woodbury_inverse(&a, &zero, &one, &zero.transpose()).unwrap();
        assert!((inv - a.try_inverse().unwrap()).amax() < 1e-15);
    }

    #[test]
    fn vanishing_weight_recovers_ls() {
        let (data, mut restr) = random_case(1);
        restr.v = 1e-12;
        let me = mixed_fit(&data, &restr).unwrap();
        let ls = ls_fit(&data).unwrap();
        assert!((me.beta - ls.beta).amax() < 1e-6);
    }

    #[test]
    fn satisfied_restriction_leaves_ls_unchanged() {
        let (data, mut restr) = random_case(2);
        let ls = ls_fit(&data).unwrap().beta;
        restr.r = &restr.r_matrix * &ls;
        let me = mixed_fit(&data, &restr).unwrap();
        assert!((me.beta - &ls).amax() < 1e-12);
    }

    #[test]
    fn neutral_parameters_collapse_to_mixed() {
        let (data, restr) = random_case(3);
        let me = mixed_fit(&data, &restr).unwrap().beta;
        assert_eq!(mixed_liu_fit(&data, &restr, 1.0).unwrap().beta, me);
        assert_eq!(srl_fit(&data, &restr, 1.0).unwrap().beta, me);
        assert_eq!(srr_fit(&data, &restr, 0.0).unwrap().beta, me);
        assert_eq!(mixed_ridge_fit(&data, &restr, 0.0).unwrap().beta, me);
        assert_eq!(liu_one_fit(&data, 1.0).unwrap().beta, ls_fit(&data).unwrap().beta);
    }

    #[test]
    fn orthonormal_reductions() {
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let data = Dataset::continuous(x, DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0])).unwrap();
        let restr = RestrictionSpec::new(
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::from_vec(vec![0.2]),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap();
        let me = mixed_fit(&data, &restr).unwrap().beta;
        let ls = ls_fit(&data).unwrap().beta;
        assert!((mixed_liu_fit(&data, &restr, 0.0).unwrap().beta - &me / 2.0).amax() < 1e-12);
        assert!((liu_one_fit(&data, 0.0).unwrap().beta - &ls / 2.0).amax() < 1e-12);
        let k = 0.6;
        assert!((mixed_ridge_fit(&data, &restr, k).unwrap().beta - &me / (1.0 + k)).amax() < 1e-12);
    }

    #[test]
    fn restriction_satisfied_at_shrunken_base() {
        let (data, mut restr) = random_case(4);
        let d = 0.3;
        let lt1 = liu_one_fit(&data, d).unwrap().beta;
        restr.r = &restr.r_matrix * &lt1;
        assert!((srl_fit(&data, &restr, d).unwrap().beta - &lt1).amax() < 1e-12);
        let k = 0.4;
        let ridge = ridge_fit(&data, k).unwrap().beta;
        restr.r = &restr.r_matrix * &ridge;
        assert!((srr_fit(&data, &restr, k).unwrap().beta - &ridge).amax() < 1e-12);
    }

    #[test]
    fn bad_weight_is_rejected() {
        let (_, restr) = random_case(5);
        assert!(RestrictionSpec::new(restr.r_matrix.clone(), restr.r.clone(), restr.omega.clone(), 1.5).is_err());
        assert!(RestrictionSpec::new(restr.r_matrix.clone(), restr.r.clone(), restr.omega.clone(), 0.0).is_err());
    }

    #[test]
    fn singular_omega_is_rejected_by_normal_form() {
        let (data, mut restr) = random_case(6);
        restr.omega = DMatrix::zeros(1, 1);
        assert!(matches!(mixed_fit_normal_form(&data, &restr), Err(Error::Singular { .. })));
    }

    #[test]
    fn srl_mean_is_unbiased_at_unit_d() {
        let (data, restr) = random_case(7);
        let beta = DVector::from_vec(vec![0.5, -0.2, 1.0]);
        let (mean, _) = srl_moments(data.x(), &beta, 1.0, &restr, 1.0).unwrap();
        assert!((mean - beta).amax() < 1e-12);
    }
}
