use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, FeatureKind, Matrix};
use crate::error::{Error, Result};
use crate::rng::{Rng, RngSeed};
use crate::stats::l1_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Per-class product of marginals: Bernoulli for binary features,
    /// empirical bootstrap for continuous ones.
    IndependentMarginals,
    /// Per-class latent Gaussian with the training Pearson matrix as its
    /// correlation; binary features by thresholding, continuous by the
    /// empirical quantile transform.
    GaussianCopula,
    /// Per-class interpolation between a row and one of its k nearest
    /// same-class neighbors (L1 distance); binary features re-thresholded.
    Smote { k_neighbors: usize },
    /// Per-class bootstrap of training rows with each binary bit flipped
    /// independently with probability `flip_rate`.
    NoisyCopy { flip_rate: f64 },
}

impl GeneratorKind {
    pub fn default_family(&self) -> &'static str {
        match self {
            GeneratorKind::IndependentMarginals | GeneratorKind::GaussianCopula => "model",
            GeneratorKind::Smote { .. } => "interpolation",
            GeneratorKind::NoisyCopy { .. } => "perturbation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub family: String,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind) -> Self {
        GeneratorSpec {
            family: kind.default_family().to_string(),
            kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GeneratorKind::Smote { k_neighbors: 0 } => Err(
                Error::InvalidParameter("smote k_neighbors must be >= 1".into()),
            ),
            GeneratorKind::NoisyCopy { flip_rate } if !(0.0..=1.0).contains(&flip_rate) => Err(
                Error::InvalidParameter(format!("flip_rate must be in [0,1], got {flip_rate}")),
            ),
            _ if self.family.is_empty() => {
                Err(Error::InvalidParameter("generator family must be non-empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// Fit per-class state on a training split. Both classes must be present.
    pub fn fit(&self, train: &Dataset) -> Result<FittedGenerator> {
        self.validate()?;
        let mut per_class = Vec::with_capacity(2);
        for class in [0u8, 1u8] {
            let idxs = train.class_indices(class);
            if idxs.is_empty() {
                return Err(Error::DegenerateClass(class));
            }
            let rows = train.subset_matrix(&idxs);
            per_class.push(fit_class(&self.kind, train, rows, class)?);
        }
        Ok(FittedGenerator {
            spec: self.clone(),
            schema: train.schema().clone(),
            per_class,
        })
    }
}

/// Lower-triangular Cholesky factor, dense d*d storage.
struct Chol {
    l: Vec<f64>,
    d: usize,
}

impl Chol {
    /// None when the matrix is not positive definite.
    fn factor(a: &[f64], d: usize) -> Option<Chol> {
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = a[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Some(Chol { l, d })
    }

    /// y = L * g
    fn mul(&self, g: &[f64], out: &mut [f64]) {
        for (i, y) in out.iter_mut().enumerate() {
            let row = &self.l[i * self.d..=i * self.d + i];
            *y = row.iter().zip(g).map(|(l, gv)| l * gv).sum();
        }
    }
}

enum ClassState {
    Marginals {
        p: Vec<f64>,
        pools: Vec<Option<Vec<f64>>>,
    },
    Copula {
        thresholds: Vec<f64>,
        chol: Chol,
        pools: Vec<Option<Vec<f64>>>,
    },
    Smote {
        rows: Matrix,
        neighbors: Vec<Vec<usize>>,
    },
    Rows {
        rows: Matrix,
        flip_rate: f64,
    },
}

pub struct FittedGenerator {
    spec: GeneratorSpec,
    schema: crate::data::FeatureSchema,
    per_class: Vec<ClassState>,
}

fn column_means(rows: &Matrix) -> Vec<f64> {
    (0..rows.n_cols())
        .map(|j| rows.column(j).sum::<f64>() / rows.n_rows() as f64)
        .collect()
}

/// Sorted value pools for continuous features, None for binary ones.
fn continuous_pools(schema: &crate::data::FeatureSchema, rows: &Matrix) -> Vec<Option<Vec<f64>>> {
    schema
        .feature_kinds()
        .iter()
        .enumerate()
        .map(|(j, kind)| match kind {
            FeatureKind::Binary => None,
            FeatureKind::Continuous => {
                let mut pool: Vec<f64> = rows.column(j).collect();
                pool.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                Some(pool)
            }
        })
        .collect()
}

/// Pearson correlation matrix of the columns; zero-variance columns
/// contribute no dependence (identity row/column).
fn correlation_matrix(rows: &Matrix) -> Vec<f64> {
    let d = rows.n_cols();
    let n = rows.n_rows();
    let means = column_means(rows);
    let mut sd = vec![0.0; d];
    for j in 0..d {
        let v: f64 = rows.column(j).map(|x| (x - means[j]).powi(2)).sum();
        sd[j] = (v / n as f64).sqrt();
    }
    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        corr[i * d + i] = 1.0;
        for j in 0..i {
            let c = if sd[i] == 0.0 || sd[j] == 0.0 {
                0.0
            } else {
                let mut cov = 0.0;
                for r in 0..n {
                    cov += (rows.get(r, i) - means[i]) * (rows.get(r, j) - means[j]);
                }
                cov / (n as f64 * sd[i] * sd[j])
            };
            corr[i * d + j] = c;
            corr[j * d + i] = c;
        }
    }
    corr
}

/// Cholesky with escalating diagonal jitter: try the matrix as given, then
/// add 1e-6 * I and keep doubling until the factorization succeeds.
fn jittered_cholesky(mut a: Vec<f64>, d: usize) -> Chol {
    if let Some(c) = Chol::factor(&a, d) {
        return c;
    }
    let mut eps = 1e-6;
    loop {
        for i in 0..d {
            a[i * d + i] += eps;
        }
        if let Some(c) = Chol::factor(&a, d) {
            return c;
        }
        // revert this jitter before applying the doubled one
        for i in 0..d {
            a[i * d + i] -= eps;
        }
        eps *= 2.0;
    }
}

fn fit_class(
    kind: &GeneratorKind,
    train: &Dataset,
    rows: Matrix,
    class: u8,
) -> Result<ClassState> {
    match *kind {
        GeneratorKind::IndependentMarginals => Ok(ClassState::Marginals {
            p: column_means(&rows),
            pools: continuous_pools(train.schema(), &rows),
        }),
        GeneratorKind::GaussianCopula => {
            let p = column_means(&rows);
            let normal = Normal::standard();
            let thresholds = train
                .schema()
                .feature_kinds()
                .iter()
                .zip(&p)
                .map(|(kind, &pj)| match kind {
                    FeatureKind::Continuous => f64::NAN, // unused slot
                    FeatureKind::Binary if pj <= 0.0 => f64::INFINITY,
                    FeatureKind::Binary if pj >= 1.0 => f64::NEG_INFINITY,
                    FeatureKind::Binary => normal.inverse_cdf(1.0 - pj),
                })
                .collect();
            let corr = correlation_matrix(&rows);
            let d = rows.n_cols();
            Ok(ClassState::Copula {
                thresholds,
                chol: jittered_cholesky(corr, d),
                pools: continuous_pools(train.schema(), &rows),
            })
        }
        GeneratorKind::Smote { k_neighbors } => {
            let m = rows.n_rows();
            if m < k_neighbors + 1 {
                return Err(Error::TooFewNeighbors {
                    class,
                    required: k_neighbors + 1,
                    found: m,
                });
            }
            let mut neighbors = Vec::with_capacity(m);
            for i in 0..m {
                let mut dists: Vec<(f64, usize)> = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| (l1_distance(rows.row(i), rows.row(j)), j))
                    .collect();
                dists.sort_unstable_by(|a, b| {
                    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
                });
                neighbors.push(dists[..k_neighbors].iter().map(|&(_, j)| j).collect());
            }
            Ok(ClassState::Smote { rows, neighbors })
        }
        GeneratorKind::NoisyCopy { flip_rate } => Ok(ClassState::Rows { rows, flip_rate }),
    }
}

impl FittedGenerator {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Draw a balanced dataset with `n_per_class` rows per class (class 0
    /// rows first). Every draw comes from the seed's stream alone.
    pub fn sample(&self, n_per_class: usize, seed: RngSeed) -> Result<Dataset> {
        if n_per_class == 0 {
            return Err(Error::InvalidParameter("n_per_class must be >= 1".into()));
        }
        let d = self.schema.n_features();
        let mut rng = Rng::from_seed(seed);
        let mut data = Vec::with_capacity(2 * n_per_class * d);
        let mut labels = Vec::with_capacity(2 * n_per_class);
        for (class, state) in self.per_class.iter().enumerate() {
            for _ in 0..n_per_class {
                sample_row(state, self.schema.feature_kinds(), &mut rng, &mut data);
                labels.push(class as u8);
            }
        }
        Dataset::from_parts(
            self.schema.clone(),
            Matrix::from_flat(data, 2 * n_per_class, d),
            labels,
        )
    }
}

fn pool_quantile(pool: &[f64], u: f64) -> f64 {
    let idx = ((u * pool.len() as f64) as usize).min(pool.len() - 1);
    pool[idx]
}

fn sample_row(state: &ClassState, kinds: &[FeatureKind], rng: &mut Rng, out: &mut Vec<f64>) {
    match state {
        ClassState::Marginals { p, pools } => {
            for (j, kind) in kinds.iter().enumerate() {
                out.push(match kind {
                    FeatureKind::Binary => f64::from(rng.bernoulli(p[j])),
                    FeatureKind::Continuous => {
                        let pool = pools[j].as_ref().unwrap();
                        pool[rng.index(pool.len())]
                    }
                });
            }
        }
        ClassState::Copula { thresholds, chol, pools } => {
            let d = kinds.len();
            let g: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let mut z = vec![0.0; d];
            chol.mul(&g, &mut z);
            let normal = Normal::standard();
            for (j, kind) in kinds.iter().enumerate() {
                out.push(match kind {
                    FeatureKind::Binary => f64::from(z[j] > thresholds[j]),
                    FeatureKind::Continuous => {
                        pool_quantile(pools[j].as_ref().unwrap(), normal.cdf(z[j]))
                    }
                });
            }
        }
        ClassState::Smote { rows, neighbors } => {
            let i = rng.index(rows.n_rows());
            let nb = &neighbors[i];
            let j = nb[rng.index(nb.len())];
            let u = rng.next_f64();
            let (a, b) = (rows.row(i), rows.row(j));
            for (f, kind) in kinds.iter().enumerate() {
                let v = a[f] + u * (b[f] - a[f]);
                out.push(match kind {
                    FeatureKind::Binary => f64::from(v >= 0.5),
                    FeatureKind::Continuous => v,
                });
            }
        }
        ClassState::Rows { rows, flip_rate } => {
            let i = rng.index(rows.n_rows());
            let row = rows.row(i);
            for (f, kind) in kinds.iter().enumerate() {
                out.push(match kind {
                    FeatureKind::Binary => {
                        if rng.bernoulli(*flip_rate) {
                            1.0 - row[f]
                        } else {
                            row[f]
                        }
                    }
                    FeatureKind::Continuous => row[f],
                });
            }
        }
    }
}
