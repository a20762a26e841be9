//! Correlation study over completed runs: per generator, how well does each
//! fidelity metric (and the fitted composite) track downstream recall and F1
//! across (dataset, fold) points, and how consistent, stable, and robust is
//! that relationship.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::MetricId;
use crate::stats;
use crate::supermetric::{score, RunRecord, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricOrSuper {
    Metric(MetricId),
    SuperMetric,
}

impl MetricOrSuper {
    pub const ALL: [MetricOrSuper; 9] = [
        MetricOrSuper::Metric(MetricId::HellingerMarginal),
        MetricOrSuper::Metric(MetricId::EuclideanMean),
        MetricOrSuper::Metric(MetricId::PearsonAssoc),
        MetricOrSuper::Metric(MetricId::CramersVAssoc),
        MetricOrSuper::Metric(MetricId::MeanSimilarity),
        MetricOrSuper::Metric(MetricId::JsdMarginal),
        MetricOrSuper::Metric(MetricId::Pmse),
        MetricOrSuper::Metric(MetricId::Mmd),
        MetricOrSuper::SuperMetric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricOrSuper::Metric(id) => id.name(),
            MetricOrSuper::SuperMetric => "super_metric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Recall,
    F1,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Recall, Target::F1];

    pub fn name(&self) -> &'static str {
        match self {
            Target::Recall => "recall",
            Target::F1 => "f1",
        }
    }
}

/// Pearson correlation between one metric's values and one utility target for
/// one generator. `rho` is None when the correlation is undefined (fewer than
/// 3 points or a constant side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub generator_id: String,
    pub metric: MetricOrSuper,
    pub target: Target,
    pub rho: Option<f64>,
    pub n_points: usize,
}

/// Pearson correlation; errors on mismatched lengths, fewer than 3 points,
/// or a constant input.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    stats::pearson(x, y)
}

/// Build the full grid of correlation cells: every generator x every metric
/// (the composite included, computed through the same code path) x both
/// targets. Records are grouped by generator; each group's points are its
/// (dataset, fold) runs. `weights_by_dataset` must cover every dataset seen.
pub fn per_generator_correlations(
    records: &[RunRecord],
    weights_by_dataset: &BTreeMap<String, WeightVector>,
) -> Result<Vec<CorrelationCell>> {
    // the composite score is just the ninth value column; everything after
    // this loop treats all nine identically
    let mut value_columns: Vec<[f64; 9]> = Vec::with_capacity(records.len());
    for r in records {
        let weights = weights_by_dataset
            .get(&r.dataset_id)
            .ok_or_else(|| Error::UnknownDataset(r.dataset_id.clone()))?;
        let mut row = [0.0; 9];
        for (slot, id) in row.iter_mut().zip(MetricId::ALL) {
            *slot = r.fidelity.get(id);
        }
        row[8] = score(weights, &r.fidelity)?;
        value_columns.push(row);
    }

    let mut by_generator: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_generator.entry(&r.generator_id).or_default().push(i);
    }

    let mut cells = Vec::with_capacity(by_generator.len() * 18);
    for (generator_id, idxs) in &by_generator {
        for (m, metric) in MetricOrSuper::ALL.iter().enumerate() {
            let values: Vec<f64> = idxs.iter().map(|&i| value_columns[i][m]).collect();
            for target in Target::ALL {
                let targets: Vec<f64> = idxs
                    .iter()
                    .map(|&i| match target {
                        Target::Recall => records[i].recall,
                        Target::F1 => records[i].f1,
                    })
                    .collect();
                let rho = match stats::pearson(&values, &targets) {
                    Ok(r) => Some(r),
                    Err(Error::InsufficientVariation(_)) | Err(Error::TooFewRows { .. }) => None,
                    Err(e) => return Err(e),
                };
                cells.push(CorrelationCell {
                    generator_id: generator_id.to_string(),
                    metric: *metric,
                    target,
                    rho,
                    n_points: idxs.len(),
                });
            }
        }
    }
    Ok(cells)
}

fn defined_rhos(cells: &[CorrelationCell]) -> Vec<f64> {
    cells.iter().filter_map(|c| c.rho).collect()
}

/// Fraction of defined cells agreeing with the majority sign. A sign tie
/// counts as a positive majority, and rho = 0 agrees with either sign.
pub fn sign_consistency(cells: &[CorrelationCell]) -> Result<f64> {
    let rhos = defined_rhos(cells);
    if rhos.is_empty() {
        return Err(Error::NoDefinedCells("sign_consistency".into()));
    }
    let pos = rhos.iter().filter(|r| **r > 0.0).count();
    let neg = rhos.iter().filter(|r| **r < 0.0).count();
    let zero = rhos.len() - pos - neg;
    let majority = if pos >= neg { pos } else { neg };
    Ok((majority + zero) as f64 / rhos.len() as f64)
}

/// Population standard deviation of the defined correlations.
pub fn stability_std(cells: &[CorrelationCell]) -> Result<f64> {
    let rhos = defined_rhos(cells);
    if rhos.len() < 2 {
        return Err(Error::TooFewCells {
            required: 2,
            found: rhos.len(),
        });
    }
    Ok(stats::population_variance(&rhos).sqrt())
}

/// Range (max - min) of per-family mean correlations. Needs defined cells in
/// at least two families; `families` maps generator_id to its family tag.
pub fn robustness_range(
    cells: &[CorrelationCell],
    families: &BTreeMap<String, String>,
) -> Result<f64> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for cell in cells {
        let Some(rho) = cell.rho else { continue };
        let family = families.get(&cell.generator_id).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "generator '{}' has no family tag",
                cell.generator_id
            ))
        })?;
        let entry = sums.entry(family).or_insert((0.0, 0));
        entry.0 += rho;
        entry.1 += 1;
    }
    if sums.len() < 2 {
        return Err(Error::TooFewFamilies {
            required: 2,
            found: sums.len(),
        });
    }
    let means = sums.values().map(|(s, n)| s / *n as f64);
    let max = means.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = means.fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// One row of the metric-property study: consistency, stability, and
/// robustness of one metric against one target across generators. Properties
/// whose preconditions fail are None rather than fabricated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub metric: MetricOrSuper,
    pub target: Target,
    pub sign_consistency: Option<f64>,
    pub stability_std: Option<f64>,
    pub robustness_range: Option<f64>,
    pub n_defined: usize,
    pub n_undefined: usize,
}

/// Property rows for all nine metrics x both targets, in canonical order.
pub fn build_property_table(
    cells: &[CorrelationCell],
    families: &BTreeMap<String, String>,
) -> Vec<StudySummary> {
    let mut rows = Vec::with_capacity(18);
    for metric in MetricOrSuper::ALL {
        for target in Target::ALL {
            let group: Vec<CorrelationCell> = cells
                .iter()
                .filter(|c| c.metric == metric && c.target == target)
                .cloned()
                .collect();
            let n_defined = group.iter().filter(|c| c.rho.is_some()).count();
            rows.push(StudySummary {
                metric,
                target,
                sign_consistency: sign_consistency(&group).ok(),
                stability_std: stability_std(&group).ok(),
                robustness_range: robustness_range(&group, families).ok(),
                n_defined,
                n_undefined: group.len() - n_defined,
            });
        }
    }
    rows
}

/// Metric x generator table of correlation strength: each cell is the mean of
/// the recall and F1 correlations, defined only when both are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTable {
    /// Metric names, canonical order (composite last).
    pub row_labels: Vec<String>,
    /// Generator ids, sorted.
    pub col_labels: Vec<String>,
    /// Row-major, row_labels.len() x col_labels.len().
    pub values: Vec<Option<f64>>,
}

impl HeatmapTable {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.col_labels.len() + col]
    }
}

fn heatmap_for(
    cells: &[CorrelationCell],
    combine: impl Fn(Option<f64>, Option<f64>) -> Option<f64>,
) -> Result<HeatmapTable> {
    if cells.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut col_labels: Vec<String> = cells.iter().map(|c| c.generator_id.clone()).collect();
    col_labels.sort_unstable();
    col_labels.dedup();
    let row_labels: Vec<String> = MetricOrSuper::ALL.iter().map(|m| m.name().into()).collect();
    let mut values = Vec::with_capacity(row_labels.len() * col_labels.len());
    for metric in MetricOrSuper::ALL {
        for generator in &col_labels {
            let find = |target: Target| -> Option<f64> {
                cells
                    .iter()
                    .find(|c| {
                        c.metric == metric && c.target == target && c.generator_id == *generator
                    })
                    .and_then(|c| c.rho)
            };
            values.push(combine(find(Target::Recall), find(Target::F1)));
        }
    }
    Ok(HeatmapTable {
        row_labels,
        col_labels,
        values,
    })
}

/// Heatmap of (corr_recall + corr_f1) / 2 per metric and generator; a cell is
/// empty unless both target correlations are defined.
pub fn build_heatmap_table(cells: &[CorrelationCell]) -> Result<HeatmapTable> {
    heatmap_for(cells, |r, f| match (r, f) {
        (Some(r), Some(f)) => Some((r + f) / 2.0),
        _ => None,
    })
}

/// Single-target variant of the heatmap, persisted alongside the combined one
/// so the averaging is auditable.
pub fn build_target_heatmap(cells: &[CorrelationCell], target: Target) -> Result<HeatmapTable> {
    heatmap_for(cells, |r, f| match target {
        Target::Recall => r,
        Target::F1 => f,
    })
}

/// Five-number summary of one metric's defined correlations, either for one
/// target or pooled over both (`target: None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub metric: MetricOrSuper,
    pub target: Option<Target>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n_defined: usize,
}

/// Boxplot rows: per metric, one row per target plus a pooled row. Metrics
/// with no defined cells for some grouping are omitted; errors only when the
/// entire grid is undefined.
pub fn build_boxplot_table(cells: &[CorrelationCell]) -> Result<Vec<BoxplotRow>> {
    let mut rows = Vec::new();
    for metric in MetricOrSuper::ALL {
        let groups: [(Option<Target>, Vec<f64>); 3] = [
            (
                Some(Target::Recall),
                defined_rhos(
                    &cells
                        .iter()
                        .filter(|c| c.metric == metric && c.target == Target::Recall)
                        .cloned()
                        .collect::<Vec<_>>(),
                ),
            ),
            (
                Some(Target::F1),
                defined_rhos(
                    &cells
                        .iter()
                        .filter(|c| c.metric == metric && c.target == Target::F1)
                        .cloned()
                        .collect::<Vec<_>>(),
                ),
            ),
            (
                None,
                defined_rhos(
                    &cells
                        .iter()
                        .filter(|c| c.metric == metric)
                        .cloned()
                        .collect::<Vec<_>>(),
                ),
            ),
        ];
        for (target, rhos) in groups {
            if rhos.is_empty() {
                continue;
            }
            let (min, q1, median, q3, max) = stats::five_number_summary(&rhos);
            rows.push(BoxplotRow {
                metric,
                target,
                min,
                q1,
                median,
                q3,
                max,
                n_defined: rhos.len(),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::NoDefinedCells("boxplot".into()));
    }
    Ok(rows)
}
