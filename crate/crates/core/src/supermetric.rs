//! A convex combination of the eight fidelity scores whose weights are fitted
//! per dataset so the combined score tracks downstream utility: the objective
//! rewards correlation with both recall and F1 while penalizing the gap
//! between the two correlations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{FidelityVector, MetricId};
use crate::rng::{Rng, RngSeed};
use crate::stats;

/// Nonnegative weights over the eight metrics summing to 1, in canonical
/// metric order. Serialized as a name -> weight map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector(pub [f64; 8]);

const WEIGHT_SUM_TOL: f64 = 1e-9;

impl WeightVector {
    pub fn uniform() -> Self {
        WeightVector([1.0 / 8.0; 8])
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.0.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} out of range")));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(())
    }

    pub fn get(&self, id: MetricId) -> f64 {
        self.0[id as usize]
    }
}

// serialize as a readable named map without giving up the compact array form
// internally
#[derive(Serialize, Deserialize)]
struct NamedWeights {
    hellinger_marginal: f64,
    euclidean_mean: f64,
    pearson_assoc: f64,
    cramers_v_assoc: f64,
    mean_similarity: f64,
    jsd_marginal: f64,
    pmse: f64,
    mmd: f64,
}

impl Serialize for WeightVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let [hellinger_marginal, euclidean_mean, pearson_assoc, cramers_v_assoc, mean_similarity, jsd_marginal, pmse, mmd] =
            self.0;
        NamedWeights {
            hellinger_marginal,
            euclidean_mean,
            pearson_assoc,
            cramers_v_assoc,
            mean_similarity,
            jsd_marginal,
            pmse,
            mmd,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = NamedWeights::deserialize(d)?;
        Ok(WeightVector([
            n.hellinger_marginal,
            n.euclidean_mean,
            n.pearson_assoc,
            n.cramers_v_assoc,
            n.mean_similarity,
            n.jsd_marginal,
            n.pmse,
            n.mmd,
        ]))
    }
}

/// Weighted fidelity score in [0, 1].
pub fn score(weights: &WeightVector, fidelity: &FidelityVector) -> Result<f64> {
    weights.validate()?;
    Ok(weights
        .0
        .iter()
        .zip(fidelity.to_array())
        .map(|(w, m)| w * m)
        .sum())
}

/// One evaluated (dataset, generator, fold) coordinate: the fidelity of the
/// synthetic sample plus the mean TSTR recall/F1 across classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset_id: String,
    pub generator_id: String,
    pub fold: usize,
    pub fidelity: FidelityVector,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Penalty on |corr(S, recall) - corr(S, f1)|.
    pub lambda_gap: f64,
    /// Dirichlet(1, ..., 1) candidates drawn in the random-search stage.
    pub n_random: usize,
    /// Coordinate-refinement sweeps after the random search.
    pub refine_passes: usize,
    /// Step size for each coordinate move during refinement.
    pub refine_step: f64,
    pub seed: RngSeed,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda_gap: 0.5,
            n_random: 2000,
            refine_passes: 5,
            refine_step: 0.02,
            seed: RngSeed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: WeightVector,
    pub objective: f64,
    pub corr_recall: f64,
    pub corr_f1: f64,
}

fn correlations(
    weights: &WeightVector,
    runs: &[RunRecord],
) -> Result<(f64, f64)> {
    let s: Vec<f64> = runs
        .iter()
        .map(|r| score(weights, &r.fidelity))
        .collect::<Result<_>>()?;
    let recall: Vec<f64> = runs.iter().map(|r| r.recall).collect();
    let f1: Vec<f64> = runs.iter().map(|r| r.f1).collect();
    Ok((stats::pearson(&s, &recall)?, stats::pearson(&s, &f1)?))
}

/// J(w) = (corr_recall + corr_f1) / 2 - lambda * |corr_recall - corr_f1|.
/// Errors with InsufficientVariation when the weighted score, recall, or F1
/// is constant across the runs.
pub fn objective_j(weights: &WeightVector, runs: &[RunRecord], lambda_gap: f64) -> Result<f64> {
    if runs.len() < 3 {
        return Err(Error::TooFewRuns {
            required: 3,
            found: runs.len(),
        });
    }
    weights.validate()?;
    let (cr, cf) = correlations(weights, runs)?;
    Ok(0.5 * (cr + cf) - lambda_gap * (cr - cf).abs())
}

/// Renormalized copy of `w` with coordinate `k` nudged by `delta` (floored at
/// zero). None when the move leaves nothing to normalize.
fn nudged(w: &WeightVector, k: usize, delta: f64) -> Option<WeightVector> {
    let mut v = w.0;
    v[k] = (v[k] + delta).max(0.0);
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= sum);
    Some(WeightVector(v))
}

/// Fit weights for the runs of a single dataset: seeded Dirichlet random
/// search followed by greedy coordinate refinement. Falls back to uniform
/// weights when the objective is weight-invariant (spread across the simplex
/// corners and center within 1e-12).
pub fn fit_weights(runs: &[RunRecord], cfg: &FitConfig) -> Result<FitResult> {
    if runs.len() < 3 {
        return Err(Error::TooFewRuns {
            required: 3,
            found: runs.len(),
        });
    }
    if let Some(r) = runs.iter().find(|r| r.dataset_id != runs[0].dataset_id) {
        return Err(Error::InvalidParameter(format!(
            "runs span datasets '{}' and '{}'; fit one dataset at a time",
            runs[0].dataset_id, r.dataset_id
        )));
    }
    for (name, column) in [
        ("recall", runs.iter().map(|r| r.recall).collect::<Vec<_>>()),
        ("f1", runs.iter().map(|r| r.f1).collect::<Vec<_>>()),
    ] {
        if stats::is_constant(&column) {
            return Err(Error::InsufficientVariation(format!(
                "{name} is constant across runs"
            )));
        }
    }

    let result_at = |w: WeightVector| -> Result<FitResult> {
        let (corr_recall, corr_f1) = correlations(&w, runs)?;
        Ok(FitResult {
            weights: w,
            objective: 0.5 * (corr_recall + corr_f1)
                - cfg.lambda_gap * (corr_recall - corr_f1).abs(),
            corr_recall,
            corr_f1,
        })
    };

    // weight-invariance probe: the center and all eight corners
    let mut probes = vec![WeightVector::uniform()];
    for k in 0..8 {
        let mut v = [0.0; 8];
        v[k] = 1.0;
        probes.push(WeightVector(v));
    }
    let probe_values: Vec<Option<f64>> = probes
        .iter()
        .map(|w| objective_j(w, runs, cfg.lambda_gap).ok())
        .collect();
    if probe_values.iter().all(Option::is_some) {
        let vals: Vec<f64> = probe_values.iter().map(|v| v.unwrap()).collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread <= 1e-12 {
            return result_at(WeightVector::uniform());
        }
    }

    // stage 1: seeded Dirichlet(1,...,1) random search
    let mut rng = Rng::from_seed(cfg.seed);
    let mut best: Option<(f64, WeightVector)> = None;
    for _ in 0..cfg.n_random {
        let mut v = [0.0; 8];
        let mut sum = 0.0;
        for x in &mut v {
            // exponential draws normalized to the simplex
            *x = -(1.0 - rng.next_f64()).ln();
            sum += *x;
        }
        v.iter_mut().for_each(|x| *x /= sum);
        let w = WeightVector(v);
        if let Ok(j) = objective_j(&w, runs, cfg.lambda_gap) {
            if best.as_ref().is_none_or(|(bj, _)| j > *bj) {
                best = Some((j, w));
            }
        }
    }
    let (mut best_j, mut best_w) = best.ok_or_else(|| {
        Error::InsufficientVariation(
            "no weighting produced a varying score over these runs".into(),
        )
    })?;

    // stage 2: greedy coordinate refinement, strict improvement only
    for _ in 0..cfg.refine_passes {
        for k in 0..8 {
            for delta in [cfg.refine_step, -cfg.refine_step] {
                if let Some(w) = nudged(&best_w, k, delta) {
                    if let Ok(j) = objective_j(&w, runs, cfg.lambda_gap) {
                        if j > best_j {
                            best_j = j;
                            best_w = w;
                        }
                    }
                }
            }
        }
    }

    result_at(best_w)
}
