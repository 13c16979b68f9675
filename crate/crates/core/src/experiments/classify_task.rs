use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::data::derive_seed;
use super::occlusion::{occlusion_block, Block, BlockFill};
use crate::classifier::{classify, classify_euclidean};
use crate::error::{invalid, Result};
use crate::model::{Dictionary, Signal};
use crate::pursuit::PursuitConfig;

/// Synthetic multi-class occlusion task on a `rows × cols` grid.
///
/// Class centers share a common component; atoms and queries are centers
/// plus isotropic jitter. Each query gets a constant-valued block covering
/// roughly `occlusion_fraction` of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassTask {
    pub rows: usize,
    pub cols: usize,
    pub classes: usize,
    pub atoms_per_class: usize,
    /// Weight of the class-specific part of each center.
    pub separation: f64,
    /// Standard deviation of per-sample jitter.
    pub jitter: f64,
    pub block_height: usize,
    pub block_width: usize,
    pub occlusion_value: f64,
}

impl Default for ClassTask {
    fn default() -> Self {
        ClassTask {
            rows: 12,
            cols: 10,
            classes: 3,
            atoms_per_class: 8,
            separation: 0.6,
            jitter: 0.4,
            block_height: 4,
            block_width: 6,
            occlusion_value: 4.0,
        }
    }
}

impl ClassTask {
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.atoms_per_class == 0 || self.dim() == 0 {
            return Err(invalid("task", "classes, atoms per class and grid must be nonempty"));
        }
        if self.block_height > self.rows || self.block_width > self.cols {
            return Err(invalid("task", "occlusion block larger than grid"));
        }
        Ok(())
    }

    fn centers(&self, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
        let m = self.dim();
        let common = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        (0..self.classes)
            .map(|_| {
                let own = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                &common + own * self.separation
            })
            .collect()
    }

    fn sample(&self, center: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
        center + DVector::from_fn(center.len(), |_, _| self.jitter * rng.sample::<f64, _>(StandardNormal))
    }

    /// Labeled dictionary and the class centers used to draw queries.
    pub fn dictionary(&self, seed: u64) -> Result<(Dictionary, Vec<DVector<f64>>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = self.centers(&mut rng);
        let n = self.classes * self.atoms_per_class;
        let mut atoms = DMatrix::zeros(self.dim(), n);
        let mut labels = Vec::with_capacity(n);
        for j in 0..n {
            let c = j / self.atoms_per_class;
            atoms.set_column(j, &self.sample(&centers[c], &mut rng));
            labels.push(c);
        }
        Ok((Dictionary::with_labels(atoms, labels)?, centers))
    }

    /// Occluded query from class `class`.
    pub fn query(&self, centers: &[DVector<f64>], class: usize, seed: u64) -> Result<Signal> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = Signal::from_vector(self.sample(&centers[class], &mut rng))?;
        let block = Block {
            height: self.block_height,
            width: self.block_width,
            fill: BlockFill::Patch(vec![self.occlusion_value; self.block_height * self.block_width]),
        };
        occlusion_block(&clean, self.rows, self.cols, &block, derive_seed(seed, &[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationSummary {
    pub trials: usize,
    pub robust_correct: usize,
    pub baseline_correct: usize,
    pub robust_accuracy: f64,
    pub baseline_accuracy: f64,
    /// `[true][predicted]` counts for the robust pipeline.
    pub robust_confusion: Vec<Vec<usize>>,
    pub baseline_confusion: Vec<Vec<usize>>,
}

/// Paired comparison: `robust` with the NOK class rule at power `p` versus
/// `baseline` with the Euclidean class rule, on identical queries.
///
/// Each trial draws a fresh dictionary and one query with true class
/// `trial mod classes`.
pub fn run_classification(
    task: &ClassTask,
    robust: &PursuitConfig,
    baseline: &PursuitConfig,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<ClassificationSummary> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let k = task.classes;
    let mut robust_confusion = vec![vec![0usize; k]; k];
    let mut baseline_confusion = vec![vec![0usize; k]; k];
    for t in 0..trials {
        let truth = t % k;
        let (dict, centers) = task.dictionary(derive_seed(seed, &[t as u64, 0]))?;
        let b = task.query(&centers, truth, derive_seed(seed, &[t as u64, 1]))?;
        robust_confusion[truth][classify(&b, &dict, robust, p)?] += 1;
        baseline_confusion[truth][classify_euclidean(&b, &dict, baseline)?] += 1;
    }
    let diag = |c: &Vec<Vec<usize>>| (0..k).map(|i| c[i][i]).sum::<usize>();
    let robust_correct = diag(&robust_confusion);
    let baseline_correct = diag(&baseline_confusion);
    Ok(ClassificationSummary {
        trials,
        robust_correct,
        baseline_correct,
        robust_accuracy: robust_correct as f64 / trials as f64,
        baseline_accuracy: baseline_correct as f64 / trials as f64,
        robust_confusion,
        baseline_confusion,
    })
}
