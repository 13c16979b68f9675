use std::fmt;

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Normal, StandardNormal, StudentT};
use serde::Serialize;

use super::data::sample_std;
use crate::error::{invalid, Result};
use crate::model::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// χ² with one degree of freedom.
    Chi2,
    /// Exponential with mean 1.
    Exp,
    /// Student t with three degrees of freedom.
    Tdist,
    /// Zero-mean normal with standard deviation 0.5.
    Gaussian,
    /// White Gaussian noise scaled to an exact empirical SNR.
    Wgn { snr_db: f64 },
    /// Zeroes a fraction of the observation's coordinates.
    Missing { fraction: f64 },
    None,
}

impl NoiseKind {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::Chi2 => "chi2",
            NoiseKind::Exp => "exp",
            NoiseKind::Tdist => "tdist",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Wgn { .. } => "wgn",
            NoiseKind::Missing { .. } => "missing",
            NoiseKind::None => "none",
        }
    }

    /// Parses a label; `snr_db` and `fraction` fill the parameterized kinds.
    pub fn parse(label: &str, snr_db: f64, fraction: f64) -> Result<Self> {
        Ok(match label {
            "chi2" => NoiseKind::Chi2,
            "exp" => NoiseKind::Exp,
            "tdist" => NoiseKind::Tdist,
            "gaussian" => NoiseKind::Gaussian,
            "wgn" => NoiseKind::Wgn { snr_db },
            "missing" => NoiseKind::Missing { fraction },
            "none" => NoiseKind::None,
            other => return Err(invalid("noise", format!("unknown noise kind `{other}`"))),
        })
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub outlier_count: usize,
    pub outlier_magnitude_sigmas: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind) -> Self {
        NoiseSpec {
            kind,
            outlier_count: 0,
            outlier_magnitude_sigmas: 30.0,
        }
    }

    pub fn with_outliers(mut self, count: usize, magnitude_sigmas: f64) -> Self {
        self.outlier_count = count;
        self.outlier_magnitude_sigmas = magnitude_sigmas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::Missing { fraction } if !(0.0..=1.0).contains(&fraction) => {
                return Err(invalid("missing_frac", format!("must lie in [0, 1], got {fraction}")));
            }
            NoiseKind::Wgn { snr_db } if !snr_db.is_finite() => {
                return Err(invalid("snr_db", "must be finite"));
            }
            _ => {}
        }
        if !self.outlier_magnitude_sigmas.is_finite() {
            return Err(invalid("outlier_mag", "must be finite"));
        }
        Ok(())
    }
}

fn draw<D: Distribution<f64>>(rng: &mut ChaCha8Rng, dist: D, m: usize) -> Vec<f64> {
    (0..m).map(|_| dist.sample(rng)).collect()
}

/// Applies `spec` to `clean`, deterministically per seed.
///
/// Outliers add `±outlier_magnitude_sigmas · σ_g` at distinct coordinates,
/// where `σ_g` is the sample standard deviation of the additive noise, or of
/// the clean signal when there is none.
pub fn corrupt(clean: &Signal, spec: &NoiseSpec, seed: u64) -> Result<Signal> {
    spec.validate()?;
    let m = clean.len();
    if spec.outlier_count > m {
        return Err(invalid("outliers", format!("{} outliers exceed signal length {m}", spec.outlier_count)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: DVector<f64> = clean.as_vector().clone();

    let additive = match spec.kind {
        NoiseKind::Chi2 => Some(draw(&mut rng, ChiSquared::new(1.0).unwrap(), m)),
        NoiseKind::Exp => Some(draw(&mut rng, Exp::new(1.0).unwrap(), m)),
        NoiseKind::Tdist => Some(draw(&mut rng, StudentT::new(3.0).unwrap(), m)),
        NoiseKind::Gaussian => Some(draw(&mut rng, Normal::new(0.0, 0.5).unwrap(), m)),
        NoiseKind::Wgn { snr_db } => {
            let w: Vec<f64> = draw(&mut rng, StandardNormal, m);
            let signal_power = clean.as_vector().norm_squared();
            let noise_power: f64 = w.iter().map(|v| v * v).sum();
            let scale = if noise_power > 0.0 {
                (signal_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()
            } else {
                0.0
            };
            Some(w.into_iter().map(|v| v * scale).collect())
        }
        NoiseKind::Missing { fraction } => {
            let count = ((fraction * m as f64).round() as usize).min(m);
            for i in index::sample(&mut rng, m, count) {
                out[i] = 0.0;
            }
            None
        }
        NoiseKind::None => None,
    };

    let sigma_g = match &additive {
        Some(n) => {
            for (o, v) in out.iter_mut().zip(n) {
                *o += v;
            }
            sample_std(n)
        }
        None => sample_std(clean.as_slice()),
    };

    if spec.outlier_count > 0 {
        let mag = spec.outlier_magnitude_sigmas * sigma_g;
        for i in index::sample(&mut rng, m, spec.outlier_count) {
            out[i] += if rng.random_bool(0.5) { mag } else { -mag };
        }
    }
    Signal::from_vector(out)
}
