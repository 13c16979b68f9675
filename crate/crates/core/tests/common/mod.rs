#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn sq_dist_scaled(b: &[f64], a: &[f64], beta: f64) -> f64 {
    b.iter().zip(a).map(|(bi, ai)| (bi - beta * ai).powi(2)).sum()
}

/// Golden-section minimizer of `‖b − βa‖²` on a bracket found by doubling.
pub fn golden_beta(b: &[f64], a: &[f64]) -> f64 {
    let f = |t: f64| sq_dist_scaled(b, a, t);
    let mut half = 1.0;
    while f(half) < f(0.0) || f(-half) < f(0.0) {
        half *= 2.0;
    }
    let (mut lo, mut hi) = (-half, half);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    for _ in 0..300 {
        if f(c) < f(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
        if (hi - lo).abs() < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(ÂᵀÂ) x = Âᵀ b̂` with `Â = √W A`, `b̂ = √W b` by LU on the normal matrix.
pub fn weighted_normal_equations(a: &DMatrix<f64>, b: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let mut ata = DMatrix::zeros(a.ncols(), a.ncols());
    let mut atb = DVector::zeros(a.ncols());
    for i in 0..a.ncols() {
        for j in 0..a.ncols() {
            ata[(i, j)] = (0..a.nrows()).map(|r| w[r] * a[(r, i)] * a[(r, j)]).sum();
        }
        atb[i] = (0..a.nrows()).map(|r| w[r] * a[(r, i)] * b[r]).sum();
    }
    ata.lu().solve(&atb).expect("normal matrix is invertible")
}

/// Index of the atom with the smallest one-dimensional LS residual, lowest index on ties.
pub fn brute_force_best_atom(r: &[f64], a: &DMatrix<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for j in 0..a.ncols() {
        let col: Vec<f64> = a.column(j).iter().copied().collect();
        let beta = col.iter().zip(r).map(|(x, y)| x * y).sum::<f64>() / col.iter().map(|x| x * x).sum::<f64>();
        let resid = sq_dist_scaled(r, &col, beta);
        if resid < best.0 {
            best = (resid, j);
        }
    }
    best.1
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}
