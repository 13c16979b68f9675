//! Robust sparse recovery by orthogonal matching pursuit.
//!
//! Atoms are picked with an ITL correlation (a Gaussian-kernel similarity
//! fitted through the atom's least-squares contribution coefficient) and
//! coefficients are refit by minimizing a non-second-order kernel (NOK)
//! loss with iteratively reweighted least squares. Plain OMP and the
//! inner-product/NOK hybrids are available as presets.
//!
//! ```
//! use itl_pursuit::{experiments, pursuit_solve, PursuitConfig};
//!
//! let dict = experiments::gen_dictionary(40, 80, 1).unwrap();
//! let x = experiments::gen_sparse_vector(80, 3, 2).unwrap();
//! let b = itl_pursuit::Signal::from_vector(dict.atoms() * &x).unwrap();
//! let sol = pursuit_solve(&b, &dict, &PursuitConfig::inok(3, 1.7)).unwrap();
//! assert!(experiments::recovery_error(&sol.x, &x).unwrap() < 1e-8);
//! ```

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod itl;
pub mod model;
pub mod nok;
pub mod pursuit;

pub use error::{Error, Result};
pub use itl::{SigmaMode, SweepRule};
pub use model::{gaussian_kernel, ls_solve, Dictionary, Signal, SupportSet};
pub use nok::{irls_fit, IrlsState, NokConfig};
pub use pursuit::{omp_solve, pursuit_solve, LossRule, Preset, PursuitConfig, SparseSolution};
