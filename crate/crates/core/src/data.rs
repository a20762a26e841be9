use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Rng, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Every observed value is exactly 0.0 or 1.0.
    Binary,
    /// Anything else; stored min-max normalized to [0, 1].
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    label_name: String,
}

impl FeatureSchema {
    pub fn new(
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        label_name: String,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::TooFewFeatures {
                required: 1,
                found: 0,
            });
        }
        if feature_names.len() != feature_kinds.len() {
            return Err(Error::LengthMismatch(format!(
                "{} feature names vs {} kinds",
                feature_names.len(),
                feature_kinds.len()
            )));
        }
        Ok(FeatureSchema {
            feature_names,
            feature_kinds,
            label_name,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn all_binary(&self) -> bool {
        self.feature_kinds.iter().all(|k| *k == FeatureKind::Binary)
    }
}

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    got: r.len(),
                    expected: d,
                });
            }
            data.extend(r);
        }
        Ok(Matrix { data, rows: n, cols: d })
    }

    pub fn from_flat(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { data, rows, cols }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// A labeled binary-classification table. Features are f64 in [0, 1]
/// (binary columns take only {0, 1}); labels are 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    features: Matrix,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn from_parts(schema: FeatureSchema, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.n_rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.n_cols() != schema.n_features() {
            return Err(Error::LengthMismatch(format!(
                "{} matrix columns vs {} schema features",
                features.n_cols(),
                schema.n_features()
            )));
        }
        if labels.len() != features.n_rows() {
            return Err(Error::LengthMismatch(format!(
                "{} labels vs {} rows",
                labels.len(),
                features.n_rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(f64::from(bad)));
        }
        for (j, kind) in schema.feature_kinds().iter().enumerate() {
            for v in features.column(j) {
                match kind {
                    FeatureKind::Binary if v != 0.0 && v != 1.0 => {
                        return Err(Error::NonBinaryFeature(
                            schema.feature_names()[j].clone(),
                        ));
                    }
                    FeatureKind::Continuous if !(0.0..=1.0).contains(&v) => {
                        return Err(Error::InvalidParameter(format!(
                            "feature '{}' outside [0,1]: {v}",
                            schema.feature_names()[j]
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(Dataset {
            schema,
            features,
            labels,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Row indices belonging to `class`, ascending.
    pub fn class_indices(&self, class: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Feature rows at `indices` as a bare matrix (labels dropped).
    pub fn subset_matrix(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        Matrix::from_flat(data, indices.len(), self.n_features())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(indices.len() * self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema.clone(),
            features: Matrix::from_flat(data, indices.len(), self.n_features()),
            labels,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = self
            .schema
            .feature_names()
            .iter()
            .map(String::as_str)
            .collect();
        header.push(self.schema.label_name());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            record.clear();
            for (j, kind) in self.schema.feature_kinds().iter().enumerate() {
                let v = self.features.get(i, j);
                record.push(match kind {
                    FeatureKind::Binary => {
                        if v == 1.0 { "1".to_string() } else { "0".to_string() }
                    }
                    // `{}` prints the shortest representation that parses back
                    // to the same f64, so a written file reloads bit-identically
                    FeatureKind::Continuous => format!("{v}"),
                });
            }
            record.push(self.labels[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Load a CSV with a header row. The `label_name` column becomes the 0/1
/// label; every other column is a feature in header order. Feature columns
/// whose values are all exactly 0 or 1 are Binary; anything else is
/// Continuous and min-max normalized to [0, 1] (constant columns become 0).
pub fn load_csv(path: impl AsRef<Path>, label_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers()?.clone();
    let label_col = header
        .iter()
        .position(|h| h == label_name)
        .ok_or_else(|| Error::MissingLabelColumn(label_name.to_string()))?;

    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::TooFewFeatures {
            required: 1,
            found: 0,
        });
    }

    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => Error::RaggedRow {
                row: rec_idx + 1,
                got: *len as usize,
                expected: *expected_len as usize,
            },
            _ => Error::Csv(e),
        })?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row: rec_idx + 1,
                col: j + 1,
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: rec_idx + 1,
                    col: j + 1,
                });
            }
            if j == label_col {
                if v == 0.0 {
                    labels.push(0);
                } else if v == 1.0 {
                    labels.push(1);
                } else {
                    return Err(Error::InvalidLabel(v));
                }
            } else {
                row.push(v);
            }
        }
        raw.push(row);
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::ConstantLabel);
    }

    let d = feature_names.len();
    let n = raw.len();
    let mut kinds = Vec::with_capacity(d);
    for j in 0..d {
        let binary = raw.iter().all(|r| r[j] == 0.0 || r[j] == 1.0);
        if binary {
            kinds.push(FeatureKind::Binary);
        } else {
            kinds.push(FeatureKind::Continuous);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for r in &raw {
                lo = lo.min(r[j]);
                hi = hi.max(r[j]);
            }
            for r in &mut raw {
                r[j] = if hi > lo { (r[j] - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }

    let mut data = Vec::with_capacity(n * d);
    for r in raw {
        data.extend(r);
    }
    let schema = FeatureSchema::new(feature_names, kinds, label_name.to_string())?;
    Dataset::from_parts(schema, Matrix::from_flat(data, n, d), labels)
}

/// Load a CSV that must already conform to `schema`: identical header (same
/// feature order, label column in any position), values already in model
/// space, so no kind inference and no normalization. Binary columns must be
/// 0/1 and continuous columns must sit in [0, 1].
pub fn load_csv_with_schema(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers()?.clone();
    let label_col = header
        .iter()
        .position(|h| h == schema.label_name())
        .ok_or_else(|| Error::MissingLabelColumn(schema.label_name().to_string()))?;
    let names_in_file: Vec<&str> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_col)
        .map(|(_, h)| h)
        .collect();
    let expected: Vec<&str> = schema.feature_names().iter().map(String::as_str).collect();
    if names_in_file != expected {
        return Err(Error::SchemaMismatch(format!(
            "feature columns {names_in_file:?} do not match the run's schema {expected:?}"
        )));
    }

    let d = expected.len();
    let mut data: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => Error::RaggedRow {
                row: rec_idx + 1,
                got: *len as usize,
                expected: *expected_len as usize,
            },
            _ => Error::Csv(e),
        })?;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row: rec_idx + 1,
                col: j + 1,
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: rec_idx + 1,
                    col: j + 1,
                });
            }
            if j == label_col {
                if v == 0.0 {
                    labels.push(0);
                } else if v == 1.0 {
                    labels.push(1);
                } else {
                    return Err(Error::InvalidLabel(v));
                }
            } else {
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = labels.len();
    Dataset::from_parts(schema.clone(), Matrix::from_flat(data, n, d), labels)
}

/// Count of (class 0, class 1) rows.
pub fn class_counts(data: &Dataset) -> (usize, usize) {
    let ones = data.labels.iter().filter(|&&l| l == 1).count();
    (data.labels.len() - ones, ones)
}

/// Assignment of every row to one of k folds, stratified by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Row indices of fold `f`, ascending.
    pub fn fold_indices(&self, f: usize) -> Vec<usize> {
        assert!(f < self.k);
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == f)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        assert!(f < self.k);
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != f)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Seeded stratified k-fold split. Within each class the (shuffled) rows are
/// dealt into contiguous chunks whose sizes differ by at most one, so every
/// fold's class counts stay within one row of n_class / k.
pub fn stratified_kfold(data: &Dataset, k: usize, seed: RngSeed) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let (n0, n1) = class_counts(data);
    for (class, count) in [(0u8, n0), (1u8, n1)] {
        if count < k {
            return Err(Error::TooFewSamplesPerClass {
                class,
                count,
                required: k,
            });
        }
    }
    let mut rng = Rng::from_seed(seed);
    let mut assignment = vec![0usize; data.n_rows()];
    for class in [0u8, 1u8] {
        let mut idxs = data.class_indices(class);
        rng.shuffle(&mut idxs);
        let base = idxs.len() / k;
        let rem = idxs.len() % k;
        let mut pos = 0;
        for f in 0..k {
            let size = base + usize::from(f < rem);
            for &i in &idxs[pos..pos + size] {
                assignment[i] = f;
            }
            pos += size;
        }
    }
    Ok(FoldPlan { k, assignment })
}

/// (train, test) datasets for fold `f` of the plan.
pub fn split_dataset(data: &Dataset, plan: &FoldPlan, f: usize) -> (Dataset, Dataset) {
    let train = data.subset(&plan.train_indices(f));
    let test = data.subset(&plan.fold_indices(f));
    (train, test)
}
