//! Vector and matrix types shared by every solver, the Gaussian kernel, and
//! the dense least-squares primitive.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, invalid, Error, Result};

/// Lower bound applied to every adaptive kernel width.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Relative squared-residual threshold below which a fit counts as exact.
pub const EXACT_FIT_REL: f64 = 1e-20;

/// Largest `max|R_ii| / min|R_ii|` accepted by [`ls_solve`].
pub const MAX_CONDITION: f64 = 1e12;

/// An observation vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(DVector<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(values))
    }

    pub fn from_vector(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSignal("signal must have at least one entry".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("entry {pos} is not finite")));
        }
        Ok(Signal(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

/// Column-atom dictionary with optional class labels, one per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    class_labels: Option<Vec<usize>>,
}

impl Dictionary {
    /// Atoms are not normalized; every column must be nonzero and finite.
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::EmptyDictionary);
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(invalid("atoms", "dictionary entries must be finite"));
        }
        for (index, col) in atoms.column_iter().enumerate() {
            if col.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidAtom { index });
            }
        }
        Ok(Dictionary {
            atoms,
            class_labels: None,
        })
    }

    pub fn with_labels(atoms: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let mut dict = Self::new(atoms)?;
        check_len(dict.n_atoms(), labels.len())?;
        dict.class_labels = Some(labels);
        Ok(dict)
    }

    /// Signal dimension `m`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        self.class_labels.as_deref()
    }

    /// Column `index` as a contiguous slice (storage is column-major).
    pub fn atom(&self, index: usize) -> &[f64] {
        let m = self.dim();
        &self.atoms.as_slice()[index * m..(index + 1) * m]
    }

    /// The m×k matrix of the atoms listed in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> DMatrix<f64> {
        self.atoms.select_columns(indices)
    }
}

/// Ordered set of selected atom indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new() -> Self {
        SupportSet(Vec::new())
    }

    /// Appends `index`; returns false and leaves the set untouched on a duplicate.
    pub fn insert(&mut self, index: usize) -> bool {
        if self.contains(index) {
            false
        } else {
            self.0.push(index);
            true
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Indices in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = SupportSet::new();
        for i in iter {
            set.insert(i);
        }
        set
    }
}

/// Gaussian kernel `exp(-e²/2σ²)`, optionally scaled by `1/(√(2π)σ)`.
///
/// The ITL correlation uses the normalized form; the NOK loss, its weights
/// and the classifier use the unnormalized one so that the loss vanishes at
/// zero error.
pub fn gaussian_kernel(e: f64, sigma: f64, normalized: bool) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma", format!("must be positive and finite, got {sigma}")));
    }
    let k = (-(e * e) / (2.0 * sigma * sigma)).exp();
    Ok(if normalized {
        k / ((2.0 * PI).sqrt() * sigma)
    } else {
        k
    })
}

/// Least-squares solution of `columns · x ≈ target` via Householder QR.
///
/// Fails with [`Error::Singular`] when the triangular factor has a zero
/// pivot or its diagonal spread exceeds [`MAX_CONDITION`].
pub fn ls_solve(columns: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, k) = columns.shape();
    if k == 0 {
        return Err(invalid("columns", "at least one column is required"));
    }
    check_len(m, target.len())?;
    if m < k {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }

    let qr = columns.clone().qr();
    let r = qr.r();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..k {
        let d = r[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }

    let mut qtb = target.clone();
    qr.q_tr_mul(&mut qtb);
    let rhs = qtb.rows(0, k).into_owned();
    r.solve_upper_triangular(&rhs)
        .ok_or(Error::Singular { condition })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(0.0, 1.0, false).unwrap(), 1.0);
        assert_relative_eq!(
            gaussian_kernel(0.0, 1.0, true).unwrap(),
            0.398_942_280_401_432_7,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            gaussian_kernel(2.0, 1.0, false).unwrap(),
            0.135_335_283_236_612_7,
            max_relative = 1e-15
        );
    }

    #[test]
    fn kernel_rejects_bad_sigma() {
        assert!(gaussian_kernel(1.0, 0.0, false).is_err());
        assert!(gaussian_kernel(1.0, -2.0, true).is_err());
        assert!(gaussian_kernel(1.0, f64::NAN, true).is_err());
    }

    #[test]
    fn kernel_decreasing_in_magnitude() {
        for &sigma in &[0.1, 1.0, 7.5] {
            for normalized in [false, true] {
                let mut prev = gaussian_kernel(0.0, sigma, normalized).unwrap();
                for i in 1..200 {
                    let e = i as f64 * 0.05 * sigma;
                    let k = gaussian_kernel(e, sigma, normalized).unwrap();
                    let k_neg = gaussian_kernel(-e, sigma, normalized).unwrap();
                    assert_eq!(k, k_neg);
                    assert!(k < prev, "not decreasing at e={e}");
                    prev = k;
                }
            }
        }
    }

    #[test]
    fn signal_validation() {
        assert!(Signal::new(vec![]).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(Signal::new(vec![0.0, 2.0]).unwrap().len(), 2);
    }

    #[test]
    fn dictionary_validation() {
        let zero_col = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            Dictionary::new(zero_col),
            Err(Error::InvalidAtom { index: 1 })
        );
        let ok = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert!(matches!(
            Dictionary::with_labels(ok.clone(), vec![0]),
            Err(Error::ShapeMismatch { .. })
        ));
        let dict = Dictionary::with_labels(ok, vec![4, 7]).unwrap();
        assert_eq!(dict.atom(1), &[0.0, 3.0]);
        assert_eq!(dict.class_labels(), Some(&[4, 7][..]));
        assert_eq!(
            Dictionary::new(DMatrix::zeros(3, 0)),
            Err(Error::EmptyDictionary)
        );
    }

    #[test]
    fn support_set_rejects_duplicates() {
        let mut s = SupportSet::new();
        assert!(s.insert(4));
        assert!(s.insert(1));
        assert!(!s.insert(4));
        assert_eq!(s.indices(), &[4, 1]);
        assert_eq!(s.sorted(), vec![1, 4]);
    }

    #[test]
    fn ls_identity_cases() {
        let atom = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let cols = DMatrix::from_column_slice(3, 1, atom.as_slice());
        let x = ls_solve(&cols, &atom).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-15);

        let eye = DMatrix::<f64>::identity(2, 2);
        let x = ls_solve(&eye, &DVector::from_vec(vec![3.0, -4.0])).unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], -4.0, epsilon = 1e-15);
    }

    // Independent route: explicit normal equations (CᵀC)⁻¹Cᵀb.
    fn normal_equations(c: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let gram = c.transpose() * c;
        gram.try_inverse().unwrap() * (c.transpose() * b)
    }

    #[test]
    fn ls_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = DMatrix::from_fn(20, 5, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(20, |_, _| rng.random_range(-3.0..3.0));
            let x = ls_solve(&c, &b).unwrap();
            let oracle = normal_equations(&c, &b);
            for i in 0..5 {
                assert_relative_eq!(x[i], oracle[i], max_relative = 1e-8, epsilon = 1e-12);
            }
            let grad = c.transpose() * (&c * &x - &b);
            assert!(grad.amax() <= 1e-8 * b.norm());
        }
    }

    #[test]
    fn ls_reports_singular() {
        let c = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        match ls_solve(&c, &b) {
            Err(Error::Singular { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected singular, got {other:?}"),
        }
        let wide = DMatrix::from_element(1, 2, 1.0);
        assert!(matches!(
            ls_solve(&wide, &DVector::from_vec(vec![1.0])),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn ls_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = DMatrix::from_fn(15, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
        let x1 = ls_solve(&c, &b).unwrap();
        let x2 = ls_solve(&c, &b).unwrap();
        assert_eq!(x1, x2);
    }
}
