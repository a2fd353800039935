//! Gated Gibbs sampler over valid associations, used as a randomized baseline.

use std::collections::HashMap;

use rand::Rng;

use crate::association::MISS;
use crate::error::{AssocError, Result};
use crate::gen::seeded_rng;
use crate::matrix::SparseCostMatrix;

/// One distinct sampled association.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAssociation {
    pub row_to: Vec<usize>,
    pub nll: f64,
    pub visits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    /// Distinct associations in order of first visit.
    pub unique: Vec<SampledAssociation>,
    pub n_samples: usize,
    /// Lowest NLL among the samples.
    pub best_nll: f64,
    /// Total likelihood of the distinct samples over the likelihood of the best one.
    pub likelihood_ratio: f64,
}

impl SampleSummary {
    /// Total likelihood of the distinct samples relative to an association of NLL `reference`.
    pub fn ratio_against(&self, reference: f64) -> f64 {
        self.unique.iter().map(|a| (reference - a.nll).exp()).sum()
    }
}

/// Runs a chain of `n_samples` sweeps from the all-miss association.
pub fn gibbs_sample(matrix: &SparseCostMatrix, n_samples: usize, seed: u64) -> Result<SampleSummary> {
    gibbs_sample_with(matrix, n_samples, &mut seeded_rng(seed, 0))
}

/// As [`gibbs_sample`] with a caller-provided generator.
pub fn gibbs_sample_with<R: Rng>(matrix: &SparseCostMatrix, n_samples: usize, rng: &mut R) -> Result<SampleSummary> {
    if n_samples == 0 {
        return Err(AssocError::invalid("n_samples must be at least 1"));
    }
    let weights: Vec<f64> = (0..matrix.n_rows()).flat_map(|r| matrix.row_costs(r).iter().map(|c| (-c).exp())).collect();
    let mut offsets = Vec::with_capacity(matrix.n_rows() + 1);
    offsets.push(0);
    for r in 0..matrix.n_rows() {
        offsets.push(offsets[r] + matrix.row_cols(r).len());
    }

    let mut row_to = vec![MISS; matrix.n_rows()];
    let mut row_cost = vec![0.0; matrix.n_rows()];
    let mut occupied = vec![false; matrix.n_cols()];
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut unique: Vec<SampledAssociation> = Vec::new();
    let mut cum = Vec::new();

    for _ in 0..n_samples {
        for r in 0..matrix.n_rows() {
            if row_to[r] != MISS {
                occupied[row_to[r]] = false;
            }
            let cols = matrix.row_cols(r);
            let w = &weights[offsets[r]..offsets[r + 1]];
            cum.clear();
            let mut total = 1.0;
            for (k, &j) in cols.iter().enumerate() {
                if !occupied[j] {
                    total += w[k];
                }
                cum.push(total);
            }
            let x = rng.random::<f64>() * total;
            match cum.iter().position(|&c| x < c) {
                // occupied columns add no weight, so the first index above x is free
                Some(k) if x >= 1.0 => {
                    row_to[r] = cols[k];
                    row_cost[r] = matrix.row_costs(r)[k];
                    occupied[cols[k]] = true;
                }
                _ => {
                    row_to[r] = MISS;
                    row_cost[r] = 0.0;
                }
            }
        }
        match index.get(&row_to) {
            Some(&i) => unique[i].visits += 1,
            None => {
                index.insert(row_to.clone(), unique.len());
                unique.push(SampledAssociation { row_to: row_to.clone(), nll: row_cost.iter().sum(), visits: 1 });
            }
        }
    }

    let best_nll = unique.iter().map(|a| a.nll).fold(f64::INFINITY, f64::min);
    let mut summary = SampleSummary { unique, n_samples, best_nll, likelihood_ratio: 0.0 };
    summary.likelihood_ratio = summary.ratio_against(best_nll);
    Ok(summary)
}
