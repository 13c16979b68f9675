//! Non-second-order kernel (NOK) loss and its IRLS solver.
//!
//! `ρ(e) = (1 − exp(-e²/2σ²))^{p/2}`, averaged over coordinates. Minimizing
//! it is an M-estimation problem solved by alternating a width update, the
//! weights `γ = ρ′(e)/e`, and a weighted least-squares solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, invalid, Error, Result};
use crate::model::{ls_solve, EXACT_FIT_REL, SIGMA_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NokConfig {
    /// Power order of the loss.
    pub p: f64,
    /// Stop once `‖γ_t − γ_{t−1}‖₂` falls below this.
    pub irls_tol: f64,
    pub irls_max_iter: usize,
    pub weight_cap: f64,
    pub sigma_floor: f64,
}

impl NokConfig {
    pub fn new(p: f64) -> Self {
        NokConfig {
            p,
            irls_tol: 1e-6,
            irls_max_iter: 100,
            weight_cap: 1e8,
            sigma_floor: SIGMA_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.irls_tol > 0.0) {
            return Err(invalid("irls_tol", "must be positive"));
        }
        if !(self.weight_cap > 0.0) {
            return Err(invalid("weight_cap", "must be positive"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(invalid("sigma_floor", "must be positive"));
        }
        if self.irls_max_iter == 0 {
            return Err(invalid("irls_max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

impl Default for NokConfig {
    fn default() -> Self {
        NokConfig::new(1.7)
    }
}

/// Result of [`irls_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsState {
    /// Final weights, rescaled so the largest is 1.
    pub weights: DVector<f64>,
    pub sigma: f64,
    pub coefficients: DVector<f64>,
    /// NOK loss of the final coefficients.
    pub loss: f64,
    /// Loss at the initial coefficients followed by one entry per iteration.
    pub loss_history: Vec<f64>,
    /// `√diag(γ)·(b − A x)`.
    pub weighted_residual: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p", format!("must be positive and finite, got {p}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be positive and finite, got {sigma}")))
    }
}

/// `1 − exp(-e²/2σ²)`, accurate for small `e`.
fn one_minus_kernel(e: f64, sigma: f64) -> f64 {
    -(-(e * e) / (2.0 * sigma * sigma)).exp_m1()
}

/// Single-coordinate `ρ(e)`.
pub fn nok_rho(e: f64, sigma: f64, p: f64) -> f64 {
    one_minus_kernel(e, sigma).powf(0.5 * p)
}

/// Mean NOK loss of the error vector, in `[0, 1]`.
pub fn nok_loss(errors: &[f64], sigma: f64, p: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_p(p)?;
    if errors.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = errors.iter().map(|&e| nok_rho(e, sigma, p)).sum();
    Ok(total / errors.len() as f64)
}

/// Per-coordinate IRLS weights `(p/2σ²)(1 − k)^{p/2−1} k`, capped at `weight_cap`.
///
/// For `p < 2` the weight diverges as `e → 0`; the cap bounds it.
pub fn nok_weights(errors: &[f64], sigma: f64, p: f64, weight_cap: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_p(p)?;
    if !(weight_cap > 0.0) {
        return Err(invalid("weight_cap", "must be positive"));
    }
    let scale = p / (2.0 * sigma * sigma);
    Ok(errors
        .iter()
        .map(|&e| {
            let z = e * e / (2.0 * sigma * sigma);
            let k = (-z).exp();
            let g = scale * (-(-z).exp_m1()).powf(0.5 * p - 1.0) * k;
            if g.is_nan() {
                // 0 · ∞ only when k underflowed; the weight limit there is 0.
                0.0
            } else {
                g.min(weight_cap)
            }
        })
        .collect())
}

/// `max(√(‖b − A x‖² / 2m), sigma_floor)`.
pub fn sigma_update(
    b: &DVector<f64>,
    selected: &DMatrix<f64>,
    x: &DVector<f64>,
    sigma_floor: f64,
) -> Result<f64> {
    check_len(selected.nrows(), b.len())?;
    check_len(selected.ncols(), x.len())?;
    let r = b - selected * x;
    Ok(sigma_from_residual(&r, sigma_floor))
}

fn sigma_from_residual(r: &DVector<f64>, floor: f64) -> f64 {
    (r.norm_squared() / (2.0 * r.len() as f64)).sqrt().max(floor)
}

/// Minimizer of `‖√diag(γ)(b − A x)‖²`, solved by QR on the row-scaled system.
pub fn weighted_ls_step(
    b: &DVector<f64>,
    selected: &DMatrix<f64>,
    weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(selected.nrows(), b.len())?;
    check_len(b.len(), weights.len())?;
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(invalid("weights", format!("must be finite and nonnegative, got {w}")));
    }
    let root = weights.map(f64::sqrt);
    let mut scaled = selected.clone();
    for (mut row, &s) in scaled.row_iter_mut().zip(root.iter()) {
        row *= s;
    }
    let target = b.component_mul(&root);
    ls_solve(&scaled, &target)
}

fn normalized_weights(raw: Vec<f64>) -> Result<DVector<f64>> {
    let max = raw.iter().cloned().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    Ok(DVector::from_iterator(raw.len(), raw.into_iter().map(|g| g / max)))
}

/// Alternates width update, reweighting, and weighted LS from `init_x`.
///
/// The width of each iteration comes from the previous iterate's residual.
/// Weights are rescaled to a maximum of 1 before each solve; the argmin is
/// unchanged by uniform rescaling. Running out of iterations is reported via
/// `converged = false`, not as an error.
pub fn irls_fit(
    b: &DVector<f64>,
    selected: &DMatrix<f64>,
    cfg: &NokConfig,
    init_x: &DVector<f64>,
) -> Result<IrlsState> {
    cfg.validate()?;
    check_len(selected.nrows(), b.len())?;
    check_len(selected.ncols(), init_x.len())?;
    let m = b.len();
    let b_sq = b.norm_squared();

    let mut x = init_x.clone();
    let mut resid = b - selected * &x;
    let mut sigma = sigma_from_residual(&resid, cfg.sigma_floor);
    let mut loss_history = vec![nok_loss(resid.as_slice(), sigma, cfg.p)?];
    let mut weights: Option<DVector<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.irls_max_iter {
        // Exact reconstruction is a fixed point: uniform weights, nothing to reweight.
        if resid.norm_squared() <= EXACT_FIT_REL * b_sq {
            weights = Some(DVector::from_element(m, 1.0));
            converged = true;
            break;
        }
        iterations += 1;
        sigma = sigma_from_residual(&resid, cfg.sigma_floor);
        let raw = nok_weights(resid.as_slice(), sigma, cfg.p, cfg.weight_cap)?;
        let w = normalized_weights(raw)?;
        x = weighted_ls_step(b, selected, &w)?;
        resid = b - selected * &x;
        loss_history.push(nok_loss(resid.as_slice(), sigma, cfg.p)?);

        let delta = weights.as_ref().map(|prev| (&w - prev).norm());
        weights = Some(w);
        if matches!(delta, Some(d) if d < cfg.irls_tol) {
            converged = true;
            break;
        }
    }

    let weights = weights.unwrap_or_else(|| DVector::from_element(m, 1.0));
    let weighted_residual = resid.component_mul(&weights.map(f64::sqrt));
    Ok(IrlsState {
        loss: *loss_history.last().unwrap(),
        weights,
        sigma,
        coefficients: x,
        loss_history,
        weighted_residual,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_examples() {
        assert_eq!(nok_loss(&[0.0; 5], 1.0, 1.7).unwrap(), 0.0);
        assert_relative_eq!(
            nok_loss(&[1.0, -1.0], 1.0, 2.0).unwrap(),
            0.393_469_340_287_366_6,
            max_relative = 1e-14
        );
        assert!(nok_loss(&[1.0], 0.0, 2.0).is_err());
        assert!(nok_loss(&[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn loss_at_p2_is_correntropy_loss() {
        let e = [0.3, -2.0, 5.0, 0.0, 1.1];
        let sigma = 0.8;
        let mean_kernel: f64 = e
            .iter()
            .map(|v| crate::model::gaussian_kernel(*v, sigma, false).unwrap())
            .sum::<f64>()
            / e.len() as f64;
        assert_relative_eq!(nok_loss(&e, sigma, 2.0).unwrap(), 1.0 - mean_kernel, max_relative = 1e-14);
    }

    #[test]
    fn rho_is_an_m_estimator() {
        for &p in &[0.8, 1.3, 1.7, 2.0, 2.5] {
            for &sigma in &[0.5, 2.0] {
                assert_eq!(nok_rho(0.0, sigma, p), 0.0);
                let mut prev = 0.0;
                for i in 1..150 {
                    let e = i as f64 * 0.04;
                    let r = nok_rho(e, sigma, p);
                    assert!(r >= 0.0);
                    assert_eq!(r, nok_rho(-e, sigma, p));
                    assert!(r >= prev, "p={p} sigma={sigma} e={e}");
                    if r < 1.0 - 1e-12 {
                        assert!(r > prev, "p={p} sigma={sigma} e={e}");
                    }
                    prev = r;
                }
            }
        }
    }

    #[test]
    fn weight_examples() {
        let sigma = 1.3;
        let e = [0.0, 0.4, -0.4, 2.5];
        let w = nok_weights(&e, sigma, 2.0, 1e8).unwrap();
        for (wi, ei) in w.iter().zip(&e) {
            let expected = (-(ei * ei) / (2.0 * sigma * sigma)).exp() / (sigma * sigma);
            assert_relative_eq!(*wi, expected, max_relative = 1e-14);
        }
        assert_eq!(nok_weights(&[0.0], 1.0, 2.0, 1e8).unwrap()[0], 1.0);
        assert_eq!(nok_weights(&[0.0], 1.0, 1.7, 1e8).unwrap()[0], 1e8);
        assert_eq!(nok_weights(&[1e6], 1.0, 1.7, 1e8).unwrap()[0], 0.0);
        let w = nok_weights(&[0.7, -0.7], 1.0, 1.7, 1e8).unwrap();
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn sigma_update_cases() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(sigma_update(&b, &a, &x, SIGMA_FLOOR).unwrap(), 1.0, epsilon = 1e-15);
        let b2 = DVector::from_vec(vec![1.0, 4.0]);
        assert_relative_eq!(sigma_update(&b2, &a, &x, SIGMA_FLOOR).unwrap(), 2.0, epsilon = 1e-15);
        let exact = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(sigma_update(&exact, &a, &x, SIGMA_FLOOR).unwrap(), SIGMA_FLOOR);
    }

    #[test]
    fn weighted_ls_identity_and_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let x_true = DVector::from_vec(vec![1.5, -2.0, 0.5]);
        let mut b = &a * &x_true;
        let plain = ls_solve(&a, &b).unwrap();
        let ones = weighted_ls_step(&b, &a, &DVector::from_element(12, 1.0)).unwrap();
        assert_eq!(plain, ones);

        b[4] += 40.0;
        b[9] -= 17.0;
        let mut w = DVector::from_element(12, 1.0);
        w[4] = 0.0;
        w[9] = 0.0;
        let x = weighted_ls_step(&b, &a, &w).unwrap();
        for i in 0..3 {
            assert_relative_eq!(x[i], x_true[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_ls_rejects_bad_weights() {
        let a = DMatrix::from_element(3, 1, 1.0);
        let b = DVector::from_element(3, 1.0);
        assert!(weighted_ls_step(&b, &a, &DVector::from_vec(vec![1.0, -1.0, 1.0])).is_err());
        assert!(matches!(
            weighted_ls_step(&b, &a, &DVector::zeros(3)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn irls_exact_fit_is_immediate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = &a * DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        for &p in &[1.1, 1.7, 2.0, 2.6] {
            let init = ls_solve(&a, &b).unwrap();
            let st = irls_fit(&b, &a, &NokConfig::new(p), &init).unwrap();
            assert!(st.converged);
            assert!(st.iterations <= 2);
            assert!(st.loss < 1e-10);
        }
    }

    #[test]
    fn irls_invalid_config() {
        let a = DMatrix::from_element(3, 1, 1.0);
        let b = DVector::from_element(3, 1.0);
        let mut cfg = NokConfig::new(-1.0);
        assert!(irls_fit(&b, &a, &cfg, &DVector::zeros(1)).is_err());
        cfg.p = 2.0;
        cfg.irls_tol = 0.0;
        assert!(irls_fit(&b, &a, &cfg, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn irls_not_converged_is_not_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
        let mut cfg = NokConfig::new(1.5);
        cfg.irls_max_iter = 1;
        let st = irls_fit(&b, &a, &cfg, &ls_solve(&a, &b).unwrap()).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(!st.converged);
        assert_eq!(st.loss_history.len(), 2);
        assert!(st.weights.iter().all(|w| (0.0..=1.0).contains(w)));
    }
}
