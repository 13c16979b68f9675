use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, invalid, Result};
use crate::model::Dictionary;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of indices into an independent stream seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |h, &p| splitmix64(h ^ splitmix64(p.wrapping_add(1))))
}

/// m×n dictionary of iid standard normal entries.
pub fn gen_dictionary(m: usize, n: usize, seed: u64) -> Result<Dictionary> {
    if m == 0 || n == 0 {
        return Err(invalid("dims", "m and n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dictionary::new(DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)))
}

/// `k` nonzeros at distinct uniform positions, magnitudes uniform on `[1, 2]`, random sign.
pub fn gen_sparse_vector(n: usize, k: usize, seed: u64) -> Result<DVector<f64>> {
    if k == 0 || k > n {
        return Err(invalid("k", format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::zeros(n);
    for i in index::sample(&mut rng, n, k) {
        let mag: f64 = rng.random_range(1.0..=2.0);
        x[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    Ok(x)
}

/// Euclidean distance between estimate and truth.
pub fn recovery_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    Ok((estimate - truth).norm())
}

/// Unbiased (n − 1) sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_statistics() {
        let d = gen_dictionary(200, 400, 42).unwrap();
        assert_eq!((d.dim(), d.n_atoms()), (200, 400));
        let vals = d.atoms().as_slice();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        let var = sample_std(vals).powi(2);
        assert!((0.95..=1.05).contains(&var), "variance {var}");
    }

    #[test]
    fn dictionary_determinism_and_degenerate_shape() {
        assert_eq!(gen_dictionary(7, 5, 3).unwrap(), gen_dictionary(7, 5, 3).unwrap());
        assert_ne!(gen_dictionary(7, 5, 3).unwrap(), gen_dictionary(7, 5, 4).unwrap());
        let one = gen_dictionary(1, 1, 9).unwrap();
        assert_eq!(one.atoms().shape(), (1, 1));
        assert!(gen_dictionary(0, 3, 1).is_err());
    }

    #[test]
    fn sparse_vector_shape() {
        let x = gen_sparse_vector(400, 10, 1).unwrap();
        let nz: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 10);
        assert!(nz.iter().all(|v| (1.0..=2.0).contains(&v.abs())));

        let dense = gen_sparse_vector(5, 5, 2).unwrap();
        assert!(dense.iter().all(|v| (1.0..=2.0).contains(&v.abs())));
        assert!(gen_sparse_vector(3, 4, 0).is_err());
    }

    #[test]
    fn sparse_vector_sign_balance() {
        let draws = 10_000usize;
        let positive = (0..draws as u64)
            .filter(|&s| gen_sparse_vector(3, 1, s).unwrap().iter().any(|v| *v > 0.0))
            .count() as f64;
        let half = draws as f64 / 2.0;
        let sd = (draws as f64 * 0.25).sqrt();
        assert!((positive - half).abs() < 3.0 * sd, "positives {positive}");
    }

    #[test]
    fn recovery_error_cases() {
        let t = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        assert_eq!(recovery_error(&t, &t).unwrap(), 0.0);
        let e = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(recovery_error(&e, &DVector::zeros(3)).unwrap(), 1.0);
        let a = DVector::from_vec(vec![0.5, 1.5, -3.0]);
        let direct = (0..3).map(|i| (a[i] - t[i]).powi(2)).sum::<f64>().sqrt();
        assert!((recovery_error(&a, &t).unwrap() - direct).abs() < 1e-15);
        assert!(recovery_error(&a, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, &[0, 1]);
        assert_eq!(a, derive_seed(42, &[0, 1]));
        assert_ne!(a, derive_seed(42, &[1, 0]));
        assert_ne!(a, derive_seed(43, &[0, 1]));
    }
}
