//! Greedy outer loops: plain OMP and the configurable robust pursuit.
//!
//! A pursuit is a sweep rule paired with a loss rule:
//!
//! | preset | sweep         | loss             |
//! |--------|---------------|------------------|
//! | `omp`  | inner product | least squares    |
//! | `cmp`  | inner product | NOK, `p = 2`     |
//! | `kns`  | inner product | NOK, general `p` |
//! | `inok` | ITL           | NOK, general `p` |

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::itl::{sweep_select, SweepRule};
use crate::model::{ls_solve, Dictionary, Signal, SupportSet};
use crate::nok::{irls_fit, NokConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossRule {
    LeastSquares,
    Nok(NokConfig),
}

/// Named solver families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Omp,
    Cmp,
    Kns,
    Inok,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Omp, Preset::Cmp, Preset::Kns, Preset::Inok];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Omp => "omp",
            Preset::Cmp => "cmp",
            Preset::Kns => "kns",
            Preset::Inok => "inok",
        }
    }

    /// Configuration for sparsity `l`; `p` is ignored by `omp` and `cmp`.
    pub fn config(self, l: usize, p: f64) -> PursuitConfig {
        let (sweep_rule, loss_rule) = match self {
            Preset::Omp => (SweepRule::InnerProduct, LossRule::LeastSquares),
            Preset::Cmp => (SweepRule::InnerProduct, LossRule::Nok(NokConfig::new(2.0))),
            Preset::Kns => (SweepRule::InnerProduct, LossRule::Nok(NokConfig::new(p))),
            Preset::Inok => (SweepRule::Itl, LossRule::Nok(NokConfig::new(p))),
        };
        PursuitConfig {
            sweep_rule,
            loss_rule,
            sparsity: l,
            residual_eps: DEFAULT_RESIDUAL_EPS,
            max_outer_iter: None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid("solver", format!("unknown solver `{s}` (expected omp, cmp, kns or inok)")))
    }
}

pub const DEFAULT_RESIDUAL_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitConfig {
    pub sweep_rule: SweepRule,
    pub loss_rule: LossRule,
    /// Sparsity level `L`.
    pub sparsity: usize,
    /// Stop once the (weighted) residual norm drops below this.
    pub residual_eps: f64,
    /// Hard bound on outer iterations; `None` means `min(m, N)`.
    pub max_outer_iter: Option<usize>,
}

impl PursuitConfig {
    pub fn omp(l: usize) -> Self {
        Preset::Omp.config(l, 2.0)
    }

    pub fn cmp(l: usize) -> Self {
        Preset::Cmp.config(l, 2.0)
    }

    pub fn kns(l: usize, p: f64) -> Self {
        Preset::Kns.config(l, p)
    }

    pub fn inok(l: usize, p: f64) -> Self {
        Preset::Inok.config(l, p)
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.residual_eps = eps;
        self
    }

    pub fn is_omp(&self) -> bool {
        self.sweep_rule == SweepRule::InnerProduct && self.loss_rule == LossRule::LeastSquares
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(invalid("sparsity", "must be at least 1"));
        }
        if !(self.residual_eps >= 0.0) {
            return Err(invalid("residual_eps", "must be nonnegative"));
        }
        if self.max_outer_iter == Some(0) {
            return Err(invalid("max_outer_iter", "must be at least 1"));
        }
        if let LossRule::Nok(cfg) = &self.loss_rule {
            cfg.validate()?;
        }
        Ok(())
    }

    fn outer_limit(&self, dict: &Dictionary) -> usize {
        let bound = self
            .max_outer_iter
            .unwrap_or_else(|| dict.dim().min(dict.n_atoms()));
        self.sparsity.min(bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub support: SupportSet,
    /// Full-length coefficients, zero off the support.
    pub x: DVector<f64>,
    /// Final observation weights; all ones for least squares.
    pub weights: DVector<f64>,
    pub residual_norm: f64,
    pub outer_iterations: usize,
    /// Residual norm after each outer iteration.
    pub residual_norms: Vec<f64>,
    /// Mean squared residual (least squares) or final NOK loss, per outer iteration.
    pub per_iteration_loss: Vec<f64>,
    /// False when some inner IRLS fit hit its iteration limit.
    pub converged: bool,
}

fn scatter(n: usize, support: &SupportSet, coef: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (&i, &c) in support.indices().iter().zip(coef.iter()) {
        x[i] = c;
    }
    x
}

fn check_inputs(b: &Signal, dict: &Dictionary) -> Result<()> {
    if dict.n_atoms() == 0 {
        return Err(Error::EmptyDictionary);
    }
    crate::error::check_len(dict.dim(), b.len())
}

/// Classical OMP: inner-product sweep, least-squares refit, `r = b − A_S x`.
pub fn omp_solve(b: &Signal, dict: &Dictionary, cfg: &PursuitConfig) -> Result<SparseSolution> {
    cfg.validate()?;
    if !cfg.is_omp() {
        return Err(invalid("cfg", "omp_solve requires the omp preset"));
    }
    check_inputs(b, dict)?;
    let target = b.as_vector();
    let limit = cfg.outer_limit(dict);

    let mut support = SupportSet::new();
    let mut residual = target.clone();
    let mut coef = DVector::zeros(0);
    let mut norms = Vec::new();
    let mut losses = Vec::new();

    while support.len() < limit {
        let i = sweep_select(residual.as_slice(), dict, &support, SweepRule::InnerProduct)?;
        support.insert(i);
        let cols = dict.select(support.indices());
        coef = ls_solve(&cols, target)?;
        residual = target - &cols * &coef;
        let norm = residual.norm();
        norms.push(norm);
        losses.push(norm * norm / target.len() as f64);
        if norm < cfg.residual_eps {
            break;
        }
    }

    Ok(SparseSolution {
        x: scatter(dict.n_atoms(), &support, &coef),
        weights: DVector::from_element(target.len(), 1.0),
        residual_norm: *norms.last().unwrap_or(&target.norm()),
        outer_iterations: support.len(),
        residual_norms: norms,
        per_iteration_loss: losses,
        support,
        converged: true,
    })
}

/// Configurable greedy pursuit.
///
/// Each outer iteration sweeps the current residual, grows the support, and
/// refits. Under the NOK rule the refit starts from the unweighted LS
/// solution on the new support and the carried residual is the weighted one,
/// `√diag(γ)(b − A_S x)`, which is also what the `ε` test sees. Atoms are
/// never reweighted.
pub fn pursuit_solve(b: &Signal, dict: &Dictionary, cfg: &PursuitConfig) -> Result<SparseSolution> {
    cfg.validate()?;
    check_inputs(b, dict)?;
    let target = b.as_vector();
    let m = target.len();
    let limit = cfg.outer_limit(dict);

    let mut support = SupportSet::new();
    let mut residual = target.clone();
    let mut coef = DVector::zeros(0);
    let mut weights = DVector::from_element(m, 1.0);
    let mut norms = Vec::new();
    let mut losses = Vec::new();
    let mut converged = true;

    while support.len() < limit {
        let i = sweep_select(residual.as_slice(), dict, &support, cfg.sweep_rule)?;
        support.insert(i);
        let cols = dict.select(support.indices());
        let ls = ls_solve(&cols, target)?;
        match &cfg.loss_rule {
            LossRule::LeastSquares => {
                residual = target - &cols * &ls;
                coef = ls;
                let n = residual.norm();
                losses.push(n * n / m as f64);
            }
            LossRule::Nok(nok) => {
                let state = irls_fit(target, &cols, nok, &ls)?;
                converged &= state.converged;
                losses.push(state.loss);
                residual = state.weighted_residual;
                weights = state.weights;
                coef = state.coefficients;
            }
        }
        let norm = residual.norm();
        norms.push(norm);
        if norm < cfg.residual_eps {
            break;
        }
    }

    Ok(SparseSolution {
        x: scatter(dict.n_atoms(), &support, &coef),
        weights,
        residual_norm: *norms.last().unwrap_or(&target.norm()),
        outer_iterations: support.len(),
        residual_norms: norms,
        per_iteration_loss: losses,
        support,
        converged,
    })
}
