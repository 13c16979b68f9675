//! ITL correlation between a signal and an atom.
//!
//! `V(b, a) = exp(-‖b − β*a‖² / 2σ²) / (√(2π)σ)` with `β* = aᵀb / aᵀa`.
//! Values are carried as natural logs: with the adaptive width
//! `σ² = ‖b − β*a‖² / 2m` the exponent is exactly `-m`, which underflows
//! in linear domain long before the ranking stops being meaningful.
//!
//! Fixed-width mode exists for the algebraic identities (scale laws, bounds)
//! that assume one σ shared by both sides; the atom sweep always runs in
//! adaptive mode.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::model::{dot, norm_sq, Dictionary, SupportSet, EXACT_FIT_REL, SIGMA_FLOOR};

/// Log-value reported for an exact fit under the adaptive width.
pub const EXACT_FIT_LOG_VALUE: f64 = f64::MAX;

/// Log-value reported when the signal is the zero vector (`V → 0`).
pub const ZERO_SIGNAL_LOG_VALUE: f64 = f64::MIN;

/// How the kernel width is chosen for one correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    Fixed(f64),
    Adaptive,
}

/// Atom-selection rule of the greedy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepRule {
    /// `argmax |⟨r, aᵢ⟩|`.
    InnerProduct,
    /// `argmax V(r, aᵢ)` with adaptive width.
    Itl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub beta: f64,
    pub sigma: f64,
    pub log_value: f64,
    pub exact_fit: bool,
}

impl CorrelationResult {
    /// `V` in linear domain. Saturates to `+inf` for the exact-fit sentinel.
    pub fn value(&self) -> f64 {
        if self.log_value == EXACT_FIT_LOG_VALUE {
            f64::INFINITY
        } else {
            self.log_value.exp()
        }
    }
}

fn check_atom(a: &[f64]) -> Result<f64> {
    let aa = norm_sq(a);
    if aa == 0.0 {
        Err(Error::InvalidAtom { index: 0 })
    } else {
        Ok(aa)
    }
}

/// Least-squares contribution coefficient `aᵀb / aᵀa`.
pub fn beta_star(b: &[f64], a: &[f64]) -> Result<f64> {
    check_len(b.len(), a.len())?;
    let aa = check_atom(a)?;
    Ok(dot(a, b) / aa)
}

fn fit_residual_sq(b: &[f64], a: &[f64], beta: f64) -> f64 {
    b.iter()
        .zip(a)
        .map(|(bi, ai)| {
            let d = bi - beta * ai;
            d * d
        })
        .sum()
}

/// Adaptive width `max(√(‖b − βa‖² / 2m), SIGMA_FLOOR)`.
pub fn kernel_width(b: &[f64], a: &[f64], beta: f64) -> Result<f64> {
    check_len(b.len(), a.len())?;
    let m = b.len() as f64;
    Ok((fit_residual_sq(b, a, beta) / (2.0 * m)).sqrt().max(SIGMA_FLOOR))
}

fn correlate(b: &[f64], a: &[f64], mode: SigmaMode, normalizer: f64) -> Result<CorrelationResult> {
    check_len(b.len(), a.len())?;
    let beta = beta_star(b, a)?;
    let resid_sq = fit_residual_sq(b, a, beta);
    let bb = norm_sq(b);
    let m = b.len() as f64;

    let (sigma, adaptive) = match mode {
        SigmaMode::Fixed(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return Err(crate::error::invalid("sigma", format!("fixed width must be positive, got {s}")));
            }
            (s, false)
        }
        SigmaMode::Adaptive => ((resid_sq / (2.0 * m)).sqrt().max(SIGMA_FLOOR), true),
    };

    let exact_fit = resid_sq < EXACT_FIT_REL * bb;
    let log_value = if bb == 0.0 {
        ZERO_SIGNAL_LOG_VALUE
    } else if exact_fit && adaptive {
        EXACT_FIT_LOG_VALUE
    } else {
        -((2.0 * PI).sqrt() * sigma).ln() - resid_sq / (2.0 * sigma * sigma * normalizer)
    };

    Ok(CorrelationResult {
        beta,
        sigma,
        log_value,
        exact_fit,
    })
}

/// ITL correlation of `b` with atom `a`.
///
/// A zero `b` is allowed: `β* = 0` and the value is the zero-signal sentinel.
pub fn itl_correlation(b: &[f64], a: &[f64], mode: SigmaMode) -> Result<CorrelationResult> {
    correlate(b, a, mode, 1.0)
}

/// Variant with the exponent divided by `‖b‖²`, invariant to rescaling either argument.
pub fn itl_correlation_normalized(b: &[f64], a: &[f64], mode: SigmaMode) -> Result<CorrelationResult> {
    let bb = norm_sq(b);
    if bb == 0.0 {
        return Err(Error::InvalidSignal("normalized correlation needs a nonzero signal".into()));
    }
    correlate(b, a, mode, bb)
}

/// `b` and `a` are ITL-orthogonal when `|β*| ≤ tol`.
pub fn is_itl_orthogonal(b: &[f64], a: &[f64], tol: f64) -> Result<bool> {
    Ok(beta_star(b, a)?.abs() <= tol)
}

/// Picks the best non-excluded atom for `residual`. Ties go to the lowest index.
pub fn sweep_select(
    residual: &[f64],
    dict: &Dictionary,
    excluded: &SupportSet,
    rule: SweepRule,
) -> Result<usize> {
    check_len(dict.dim(), residual.len())?;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..dict.n_atoms() {
        if excluded.contains(i) {
            continue;
        }
        let atom = dict.atom(i);
        let score = match rule {
            SweepRule::InnerProduct => dot(residual, atom).abs(),
            SweepRule::Itl => {
                itl_correlation(residual, atom, SigmaMode::Adaptive)
                    .map_err(|e| match e {
                        Error::InvalidAtom { .. } => Error::InvalidAtom { index: i },
                        other => other,
                    })?
                    .log_value
            }
        };
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((i, score)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyCandidates)
}
