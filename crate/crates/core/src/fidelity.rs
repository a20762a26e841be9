//! Fidelity scores between a real dataset and a synthetic imitation. Every
//! metric maps to [0, 1] with 1 meaning indistinguishable, so scores can be
//! combined by convex weighting. Metrics that do not apply to the data at
//! hand (Cramér's V on non-binary features) fail loudly rather than being
//! silently skipped.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::utility::classifiers::{LogisticModel, LogisticParams};

/// Histogram resolution for continuous features in the marginal metrics.
const HIST_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Distance,
    Association,
    FeatureSimilarity,
    MultivariateDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    HellingerMarginal,
    EuclideanMean,
    PearsonAssoc,
    CramersVAssoc,
    MeanSimilarity,
    JsdMarginal,
    Pmse,
    Mmd,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::HellingerMarginal,
        MetricId::EuclideanMean,
        MetricId::PearsonAssoc,
        MetricId::CramersVAssoc,
        MetricId::MeanSimilarity,
        MetricId::JsdMarginal,
        MetricId::Pmse,
        MetricId::Mmd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricId::HellingerMarginal => "hellinger_marginal",
            MetricId::EuclideanMean => "euclidean_mean",
            MetricId::PearsonAssoc => "pearson_assoc",
            MetricId::CramersVAssoc => "cramers_v_assoc",
            MetricId::MeanSimilarity => "mean_similarity",
            MetricId::JsdMarginal => "jsd_marginal",
            MetricId::Pmse => "pmse",
            MetricId::Mmd => "mmd",
        }
    }

    pub fn dimension(&self) -> Dimension {
        match self {
            MetricId::HellingerMarginal | MetricId::EuclideanMean => Dimension::Distance,
            MetricId::PearsonAssoc | MetricId::CramersVAssoc => Dimension::Association,
            MetricId::MeanSimilarity | MetricId::JsdMarginal => Dimension::FeatureSimilarity,
            MetricId::Pmse | MetricId::Mmd => Dimension::MultivariateDistribution,
        }
    }
}

/// All eight fidelity scores for one (real, synthetic) pair. Field order is
/// the canonical metric order, which also fixes the JSON key order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityVector {
    pub hellinger_marginal: f64,
    pub euclidean_mean: f64,
    pub pearson_assoc: f64,
    pub cramers_v_assoc: f64,
    pub mean_similarity: f64,
    pub jsd_marginal: f64,
    pub pmse: f64,
    pub mmd: f64,
}

impl FidelityVector {
    pub fn get(&self, id: MetricId) -> f64 {
        match id {
            MetricId::HellingerMarginal => self.hellinger_marginal,
            MetricId::EuclideanMean => self.euclidean_mean,
            MetricId::PearsonAssoc => self.pearson_assoc,
            MetricId::CramersVAssoc => self.cramers_v_assoc,
            MetricId::MeanSimilarity => self.mean_similarity,
            MetricId::JsdMarginal => self.jsd_marginal,
            MetricId::Pmse => self.pmse,
            MetricId::Mmd => self.mmd,
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        MetricId::ALL.map(|id| self.get(id))
    }

    /// Inverse of `to_array`: values in canonical metric order.
    pub fn from_array(values: [f64; 8]) -> Self {
        FidelityVector {
            hellinger_marginal: values[0],
            euclidean_mean: values[1],
            pearson_assoc: values[2],
            cramers_v_assoc: values[3],
            mean_similarity: values[4],
            jsd_marginal: values[5],
            pmse: values[6],
            mmd: values[7],
        }
    }
}

fn check_pair(real: &Dataset, syn: &Dataset) -> Result<()> {
    if real.schema() != syn.schema() {
        return Err(Error::SchemaMismatch(
            "real and synthetic datasets must share a schema".into(),
        ));
    }
    Ok(())
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Discrete marginal distribution of one feature: two cells for binary,
/// `HIST_BINS` equal-width cells on [0, 1] for continuous.
fn marginal_distribution(data: &Dataset, j: usize) -> Vec<f64> {
    let n = data.n_rows() as f64;
    match data.schema().feature_kinds()[j] {
        FeatureKind::Binary => {
            let ones: f64 = data.features().column(j).sum();
            vec![(n - ones) / n, ones / n]
        }
        FeatureKind::Continuous => {
            let mut counts = [0usize; HIST_BINS];
            for v in data.features().column(j) {
                let bin = ((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
                counts[bin] += 1;
            }
            counts.iter().map(|&c| c as f64 / n).collect()
        }
    }
}

fn column_means(m: &Matrix) -> Vec<f64> {
    (0..m.n_cols())
        .map(|j| m.column(j).sum::<f64>() / m.n_rows() as f64)
        .collect()
}

/// 1 - mean per-feature Hellinger distance between marginals. The distance is
/// computed in sqrt space, `sqrt(0.5 * sum (sqrt p - sqrt q)^2)`, which is the
/// same quantity as `sqrt(1 - BC)` but returns exactly 0 when p == q.
pub fn hellinger_marginal_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let d = real.n_features();
    let mut total = 0.0;
    for j in 0..d {
        let p = marginal_distribution(real, j);
        let q = marginal_distribution(syn, j);
        let s: f64 = p
            .iter()
            .zip(&q)
            .map(|(a, b)| {
                let diff = a.sqrt() - b.sqrt();
                diff * diff
            })
            .sum();
        total += (0.5 * s).sqrt().min(1.0);
    }
    Ok(clamp01(1.0 - total / d as f64))
}

/// 1 - ||mean(real) - mean(syn)|| / sqrt(d), the normalized Euclidean
/// distance between the feature-mean vectors.
pub fn euclidean_mean_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let mr = column_means(real.features());
    let ms = column_means(syn.features());
    let sq: f64 = mr.iter().zip(&ms).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(clamp01(1.0 - sq.sqrt() / (mr.len() as f64).sqrt()))
}

/// Pearson correlation of two columns with the zero-variance convention:
/// a degenerate column carries no association, so its correlations are 0.
fn pairwise_pearson(m: &Matrix, means: &[f64], i: usize, j: usize) -> f64 {
    let n = m.n_rows();
    let (mut cov, mut vi, mut vj) = (0.0, 0.0, 0.0);
    for r in 0..n {
        let a = m.get(r, i) - means[i];
        let b = m.get(r, j) - means[j];
        cov += a * b;
        vi += a * a;
        vj += b * b;
    }
    if vi == 0.0 || vj == 0.0 {
        0.0
    } else {
        cov / (vi.sqrt() * vj.sqrt())
    }
}

/// 1 - mean |rho_real - rho_syn| / 2 over all feature pairs.
pub fn pearson_assoc_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let d = real.n_features();
    if d < 2 {
        return Err(Error::TooFewFeatures { required: 2, found: d });
    }
    let (mr, ms) = (column_means(real.features()), column_means(syn.features()));
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..d {
        for j in (i + 1)..d {
            let rr = pairwise_pearson(real.features(), &mr, i, j);
            let rs = pairwise_pearson(syn.features(), &ms, i, j);
            total += (rr - rs).abs() / 2.0;
            pairs += 1;
        }
    }
    Ok(clamp01(1.0 - total / pairs as f64))
}

/// Cramér's V of a binary feature pair (the absolute phi coefficient);
/// degenerate margins yield 0.
fn cramers_v(m: &Matrix, i: usize, j: usize) -> f64 {
    let (mut n11, mut n10, mut n01, mut n00) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for r in 0..m.n_rows() {
        match (m.get(r, i) == 1.0, m.get(r, j) == 1.0) {
            (true, true) => n11 += 1.0,
            (true, false) => n10 += 1.0,
            (false, true) => n01 += 1.0,
            (false, false) => n00 += 1.0,
        }
    }
    let denom = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00);
    if denom == 0.0 {
        0.0
    } else {
        (n11 * n00 - n10 * n01).abs() / denom.sqrt()
    }
}

/// 1 - mean |V_real - V_syn| over all feature pairs. Binary features only.
pub fn cramers_v_assoc_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let d = real.n_features();
    if d < 2 {
        return Err(Error::TooFewFeatures { required: 2, found: d });
    }
    if let Some(j) = real
        .schema()
        .feature_kinds()
        .iter()
        .position(|k| *k != FeatureKind::Binary)
    {
        return Err(Error::NonBinaryFeature(
            real.schema().feature_names()[j].clone(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..d {
        for j in (i + 1)..d {
            let vr = cramers_v(real.features(), i, j);
            let vs = cramers_v(syn.features(), i, j);
            total += (vr - vs).abs();
            pairs += 1;
        }
    }
    Ok(clamp01(1.0 - total / pairs as f64))
}

/// 1 - mean |mu_real_j - mu_syn_j| over features.
pub fn mean_similarity_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let mr = column_means(real.features());
    let ms = column_means(syn.features());
    let total: f64 = mr.iter().zip(&ms).map(|(a, b)| (a - b).abs()).sum();
    Ok(clamp01(1.0 - total / mr.len() as f64))
}

/// Jensen-Shannon divergence (base 2, in [0, 1]) of two discrete
/// distributions; zero cells contribute nothing.
fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mix = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&pa, &pb)| {
                if pa == 0.0 {
                    0.0
                } else {
                    let m = 0.5 * (pa + pb);
                    pa * (pa / m).log2()
                }
            })
            .sum()
    };
    0.5 * kl_to_mix(p, q) + 0.5 * kl_to_mix(q, p)
}

/// 1 - mean per-feature Jensen-Shannon divergence between marginals.
pub fn jsd_marginal_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let d = real.n_features();
    let mut total = 0.0;
    for j in 0..d {
        let p = marginal_distribution(real, j);
        let q = marginal_distribution(syn, j);
        total += jsd(&p, &q).clamp(0.0, 1.0);
    }
    Ok(clamp01(1.0 - total / d as f64))
}

/// Propensity-score MSE, rescaled so 1 means the discriminator cannot tell
/// real from synthetic and 0 means it separates them perfectly. The
/// discriminator is the fixed-hyperparameter logistic model; it is
/// deterministic, and the seed parameter exists for interface stability.
pub fn pmse_score(real: &Dataset, syn: &Dataset, _seed: RngSeed) -> Result<f64> {
    check_pair(real, syn)?;
    let d = real.n_features();
    let n_real = real.n_rows();
    let n_syn = syn.n_rows();
    let mut data = Vec::with_capacity((n_real + n_syn) * d);
    for i in 0..n_real {
        data.extend_from_slice(real.row(i));
    }
    for i in 0..n_syn {
        data.extend_from_slice(syn.row(i));
    }
    let x = Matrix::from_flat(data, n_real + n_syn, d);
    let y: Vec<u8> = std::iter::repeat_n(0u8, n_real)
        .chain(std::iter::repeat_n(1u8, n_syn))
        .collect();
    let model = LogisticModel::fit(&x, &y, LogisticParams::DEFAULT)?;
    let probs = model.predict_proba(&x)?;
    let c = n_syn as f64 / (n_real + n_syn) as f64;
    let pmse: f64 = probs.iter().map(|p| (p - c) * (p - c)).sum::<f64>()
        / (n_real + n_syn) as f64;
    Ok(clamp01(1.0 - pmse / (c * (1.0 - c))))
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Maximum mean discrepancy with an RBF kernel, biased (V-statistic)
/// estimator. The bandwidth sigma^2 is the median squared pairwise distance
/// among real rows, falling back to 1 when that median is 0. Score is
/// 1 - MMD^2 / 2, since the RBF MMD^2 lives in [0, 2].
pub fn mmd_score(real: &Dataset, syn: &Dataset) -> Result<f64> {
    check_pair(real, syn)?;
    let xr = real.features();
    let xs = syn.features();
    let (m, n) = (xr.n_rows(), xs.n_rows());

    let mut pair_d2: Vec<f64> = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            pair_d2.push(sq_distance(xr.row(i), xr.row(j)));
        }
    }
    let sigma2 = if pair_d2.is_empty() {
        1.0
    } else {
        pair_d2.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let med = crate::stats::median_sorted(&pair_d2);
        if med > 0.0 { med } else { 1.0 }
    };
    let scale = -1.0 / (2.0 * sigma2);

    let mut kxx = 0.0;
    for i in 0..m {
        for j in 0..m {
            kxx += (scale * sq_distance(xr.row(i), xr.row(j))).exp();
        }
    }
    let mut kyy = 0.0;
    for i in 0..n {
        for j in 0..n {
            kyy += (scale * sq_distance(xs.row(i), xs.row(j))).exp();
        }
    }
    let mut kxy = 0.0;
    for i in 0..m {
        for j in 0..n {
            kxy += (scale * sq_distance(xr.row(i), xs.row(j))).exp();
        }
    }
    let mmd2 = kxx / (m * m) as f64 + kyy / (n * n) as f64 - 2.0 * kxy / (m * n) as f64;
    Ok(clamp01(1.0 - mmd2 / 2.0))
}

/// Evaluate all eight metrics. Fails if any metric is inapplicable to the
/// schema (e.g. Cramér's V with continuous features present).
pub fn evaluate_all(real: &Dataset, syn: &Dataset, seed: RngSeed) -> Result<FidelityVector> {
    Ok(FidelityVector {
        hellinger_marginal: hellinger_marginal_score(real, syn)?,
        euclidean_mean: euclidean_mean_score(real, syn)?,
        pearson_assoc: pearson_assoc_score(real, syn)?,
        cramers_v_assoc: cramers_v_assoc_score(real, syn)?,
        mean_similarity: mean_similarity_score(real, syn)?,
        jsd_marginal: jsd_marginal_score(real, syn)?,
        pmse: pmse_score(real, syn, seed)?,
        mmd: mmd_score(real, syn)?,
    })
}
