//! Class-wise residual scoring for sparse-representation classification.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::model::{Dictionary, Signal, SIGMA_FLOOR};
use crate::nok::NokConfig;
use crate::pursuit::{pursuit_solve, PursuitConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub class_id: usize,
    /// `(1 − exp(-z))^{p/2}` in `[0, 1]`.
    pub residual_score: f64,
    /// `z = ‖b − b̂_C‖² / 2σ²`. The score is strictly increasing in `z`,
    /// so ranking uses `z` directly: the score saturates at 1 in floating
    /// point once `z` exceeds ~37.
    pub exponent: f64,
}

fn labels(dict: &Dictionary) -> Result<(&[usize], BTreeSet<usize>)> {
    let l = dict.class_labels().ok_or(Error::MissingClassLabels)?;
    Ok((l, l.iter().copied().collect()))
}

/// `b − A_C δ_C(x)` for every class, in ascending label order.
fn class_residual_sq(b: &Signal, dict: &Dictionary, x: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
    check_len(dict.dim(), b.len())?;
    check_len(dict.n_atoms(), x.len())?;
    let (per_atom, classes) = labels(dict)?;
    let target = b.as_vector();
    Ok(classes
        .into_iter()
        .map(|c| {
            let mut recon = DVector::zeros(target.len());
            for (j, &label) in per_atom.iter().enumerate() {
                if label == c && x[j] != 0.0 {
                    recon.axpy(x[j], &dict.atoms().column(j), 1.0);
                }
            }
            (c, (target - recon).norm_squared())
        })
        .collect())
}

/// NOK class scores with the shared width `σ² = ‖b − A x‖² / 2m`.
pub fn class_residuals(b: &Signal, dict: &Dictionary, x: &DVector<f64>, p: f64) -> Result<Vec<ClassScore>> {
    NokConfig::new(p).validate()?;
    let per_class = class_residual_sq(b, dict, x)?;
    let full = (b.as_vector() - dict.atoms() * x).norm_squared();
    let sigma = (full / (2.0 * b.len() as f64)).sqrt().max(SIGMA_FLOOR);
    Ok(per_class
        .into_iter()
        .map(|(class_id, r2)| {
            let z = r2 / (2.0 * sigma * sigma);
            ClassScore {
                class_id,
                residual_score: (-(-z).exp_m1()).powf(0.5 * p),
                exponent: z,
            }
        })
        .collect())
}

/// Plain Euclidean class residuals `‖b − A_C δ_C(x)‖₂`.
pub fn euclidean_class_residuals(b: &Signal, dict: &Dictionary, x: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
    Ok(class_residual_sq(b, dict, x)?
        .into_iter()
        .map(|(c, r2)| (c, r2.sqrt()))
        .collect())
}

/// Lowest score wins; ties go to the lowest label.
pub fn best_class(scores: &[ClassScore]) -> Option<usize> {
    scores
        .iter()
        .min_by(|a, b| {
            a.exponent
                .partial_cmp(&b.exponent)
                .unwrap_or(Ordering::Equal)
                .then(a.class_id.cmp(&b.class_id))
        })
        .map(|s| s.class_id)
}

/// Sparse-codes `b` with `cfg` and returns the class with the smallest NOK score.
pub fn classify(b: &Signal, dict: &Dictionary, cfg: &PursuitConfig, p: f64) -> Result<usize> {
    labels(dict)?;
    let sol = pursuit_solve(b, dict, cfg)?;
    let scores = class_residuals(b, dict, &sol.x, p)?;
    best_class(&scores).ok_or(Error::MissingClassLabels)
}

/// Same pipeline with the Euclidean residual rule.
pub fn classify_euclidean(b: &Signal, dict: &Dictionary, cfg: &PursuitConfig) -> Result<usize> {
    labels(dict)?;
    let sol = pursuit_solve(b, dict, cfg)?;
    let res = euclidean_class_residuals(b, dict, &sol.x)?;
    res.into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)))
        .map(|(c, _)| c)
        .ok_or(Error::MissingClassLabels)
}
