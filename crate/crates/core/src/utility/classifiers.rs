//! From-scratch classifiers with fixed hyperparameters. All four are
//! deterministic given their training data, so evaluation runs reproduce
//! bit-for-bit; the seed parameter on `train` exists for interface stability
//! and is currently unused.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::stats::l1_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    BernoulliNb,
    Knn,
    DecisionTree,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Logistic,
        ClassifierKind::BernoulliNb,
        ClassifierKind::Knn,
        ClassifierKind::DecisionTree,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::BernoulliNb => "bernoulli_nb",
            ClassifierKind::Knn => "knn",
            ClassifierKind::DecisionTree => "decision_tree",
        }
    }

    /// The fixed hyperparameters of each classifier, for the run manifest.
    pub fn hyperparameters(&self) -> serde_json::Value {
        match self {
            ClassifierKind::Logistic => serde_json::json!({
                "learning_rate": LogisticParams::DEFAULT.learning_rate,
                "epochs": LogisticParams::DEFAULT.epochs,
                "l2": LogisticParams::DEFAULT.l2,
            }),
            ClassifierKind::BernoulliNb => serde_json::json!({ "alpha": NB_ALPHA }),
            ClassifierKind::Knn => serde_json::json!({ "k": KNN_K, "distance": "l1" }),
            ClassifierKind::DecisionTree => serde_json::json!({
                "max_depth": TREE_MAX_DEPTH,
                "min_leaf": TREE_MIN_LEAF,
                "criterion": "gini",
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl LogisticParams {
    pub const DEFAULT: LogisticParams = LogisticParams {
        learning_rate: 0.1,
        epochs: 200,
        l2: 1e-3,
    };
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self::DEFAULT
    }
}

const NB_ALPHA: f64 = 1.0;
const KNN_K: usize = 5;
const TREE_MAX_DEPTH: usize = 4;
const TREE_MIN_LEAF: usize = 5;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_xy(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn check_width(expected: usize, x: &Matrix) -> Result<()> {
    if x.n_cols() != expected {
        return Err(Error::SchemaMismatch(format!(
            "model trained on {} features, given {}",
            expected,
            x.n_cols()
        )));
    }
    Ok(())
}

/// Plain logistic regression: zero-initialized, full-batch gradient descent,
/// L2 on the weights but not the bias.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LogisticModel {
    pub fn fit(x: &Matrix, y: &[u8], params: LogisticParams) -> Result<Self> {
        check_xy(x, y)?;
        let n = x.n_rows();
        let d = x.n_cols();
        let inv_n = 1.0 / n as f64;
        let mut weights = vec![0.0; d];
        let mut bias = 0.0;
        let mut grad = vec![0.0; d];
        for _ in 0..params.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (i, &yi) in y.iter().enumerate() {
                let row = x.row(i);
                let t = bias + row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
                let resid = sigmoid(t) - f64::from(yi);
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += resid * a;
                }
                grad_b += resid;
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= params.learning_rate * (*g * inv_n + params.l2 * *w);
            }
            bias -= params.learning_rate * grad_b * inv_n;
        }
        Ok(LogisticModel { weights, bias })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_width(self.weights.len(), x)?;
        Ok(x.rows_iter()
            .map(|row| {
                sigmoid(
                    self.bias
                        + row.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>(),
                )
            })
            .collect())
    }
}

/// Bernoulli naive Bayes with Laplace smoothing; inputs binarized at 0.5.
#[derive(Debug, Clone)]
pub struct BernoulliNbModel {
    log_prior: [f64; 2],
    log_p: [Vec<f64>; 2],
    log_q: [Vec<f64>; 2],
}

impl BernoulliNbModel {
    pub fn fit(x: &Matrix, y: &[u8]) -> Result<Self> {
        check_xy(x, y)?;
        let d = x.n_cols();
        let n = x.n_rows();
        let n1 = y.iter().filter(|&&l| l == 1).count();
        let counts = [n - n1, n1];
        let mut log_p = [vec![0.0; d], vec![0.0; d]];
        let mut log_q = [vec![0.0; d], vec![0.0; d]];
        for c in 0..2 {
            for j in 0..d {
                let ones = (0..n)
                    .filter(|&i| usize::from(y[i]) == c && x.get(i, j) >= 0.5)
                    .count();
                let p = (ones as f64 + NB_ALPHA) / (counts[c] as f64 + 2.0 * NB_ALPHA);
                log_p[c][j] = p.ln();
                log_q[c][j] = (1.0 - p).ln();
            }
        }
        Ok(BernoulliNbModel {
            log_prior: [
                (counts[0] as f64 / n as f64).ln(),
                (counts[1] as f64 / n as f64).ln(),
            ],
            log_p,
            log_q,
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_width(self.log_p[0].len(), x)?;
        Ok(x.rows_iter()
            .map(|row| {
                let mut s = self.log_prior;
                for ((sc, lp), lq) in s.iter_mut().zip(&self.log_p).zip(&self.log_q) {
                    for (j, &v) in row.iter().enumerate() {
                        *sc += if v >= 0.5 { lp[j] } else { lq[j] };
                    }
                }
                // p(1 | x) = 1 / (1 + exp(s0 - s1))
                sigmoid(s[1] - s[0])
            })
            .collect())
    }
}

/// k-nearest-neighbors vote under L1 distance. Distance ties break toward the
/// lower training-row index; the probability is the class-1 share of the k.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Matrix,
    labels: Vec<u8>,
    k: usize,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[u8], k: usize) -> Result<Self> {
        check_xy(x, y)?;
        if x.n_rows() < k {
            return Err(Error::TooFewRows {
                required: k,
                found: x.n_rows(),
            });
        }
        Ok(KnnModel {
            train: x.clone(),
            labels: y.to_vec(),
            k,
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_width(self.train.n_cols(), x)?;
        let mut dists: Vec<(f64, usize)> = Vec::with_capacity(self.train.n_rows());
        Ok(x.rows_iter()
            .map(|row| {
                dists.clear();
                dists.extend(
                    self.train
                        .rows_iter()
                        .enumerate()
                        .map(|(i, t)| (l1_distance(row, t), i)),
                );
                dists.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let ones = dists[..self.k]
                    .iter()
                    .filter(|&&(_, i)| self.labels[i] == 1)
                    .count();
                ones as f64 / self.k as f64
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
enum TreeNode {
    Leaf { p1: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART-style tree on Gini impurity, depth-limited with a minimum leaf size.
/// Split ties keep the lowest feature index, then the lowest threshold.
#[derive(Debug, Clone)]
pub struct DecisionTreeModel {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

fn gini(n1: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = n1 as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl DecisionTreeModel {
    pub fn fit(x: &Matrix, y: &[u8]) -> Result<Self> {
        check_xy(x, y)?;
        let mut model = DecisionTreeModel {
            nodes: Vec::new(),
            n_features: x.n_cols(),
        };
        let indices: Vec<usize> = (0..x.n_rows()).collect();
        model.build(x, y, indices, 0);
        Ok(model)
    }

    /// Appends the subtree for `indices` and returns its root node id.
    fn build(&mut self, x: &Matrix, y: &[u8], indices: Vec<usize>, depth: usize) -> usize {
        let n = indices.len();
        let n1 = indices.iter().filter(|&&i| y[i] == 1).count();
        let leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf { p1: n1 as f64 / n as f64 });
            nodes.len() - 1
        };
        if depth >= TREE_MAX_DEPTH || n < 2 * TREE_MIN_LEAF || n1 == 0 || n1 == n {
            return leaf(&mut self.nodes);
        }

        let parent_impurity = gini(n1, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..x.n_cols() {
            let mut values: Vec<f64> = indices.iter().map(|&i| x.get(i, j)).collect();
            values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for t in values.windows(2) {
                let threshold = (t[0] + t[1]) / 2.0;
                let (mut nl, mut nl1) = (0usize, 0usize);
                for &i in &indices {
                    if x.get(i, j) <= threshold {
                        nl += 1;
                        nl1 += usize::from(y[i] == 1);
                    }
                }
                let nr = n - nl;
                if nl < TREE_MIN_LEAF || nr < TREE_MIN_LEAF {
                    continue;
                }
                let nr1 = n1 - nl1;
                let children = (nl as f64 * gini(nl1, nl) + nr as f64 * gini(nr1, nr)) / n as f64;
                // zero-gain splits are allowed (required to enter e.g. an xor
                // pattern); strict > keeps the earliest candidate on ties
                let gain = parent_impurity - children;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, j, threshold));
                }
            }
        }

        match best {
            None => leaf(&mut self.nodes),
            Some((_, feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    indices.iter().partition(|&&i| x.get(i, feature) <= threshold);
                // reserve this node's slot before recursing so children ids are known
                self.nodes.push(TreeNode::Leaf { p1: 0.0 });
                let id = self.nodes.len() - 1;
                let left = self.build(x, y, left_idx, depth + 1);
                let right = self.build(x, y, right_idx, depth + 1);
                self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
                id
            }
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_width(self.n_features, x)?;
        Ok(x.rows_iter()
            .map(|row| {
                let mut node = 0usize;
                loop {
                    match self.nodes[node] {
                        TreeNode::Leaf { p1 } => return p1,
                        TreeNode::Split { feature, threshold, left, right } => {
                            node = if row[feature] <= threshold { left } else { right };
                        }
                    }
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub enum FittedClassifier {
    Logistic(LogisticModel),
    BernoulliNb(BernoulliNbModel),
    Knn(KnnModel),
    DecisionTree(DecisionTreeModel),
}

impl FittedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            FittedClassifier::Logistic(_) => ClassifierKind::Logistic,
            FittedClassifier::BernoulliNb(_) => ClassifierKind::BernoulliNb,
            FittedClassifier::Knn(_) => ClassifierKind::Knn,
            FittedClassifier::DecisionTree(_) => ClassifierKind::DecisionTree,
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            FittedClassifier::Logistic(m) => m.predict_proba(x),
            FittedClassifier::BernoulliNb(m) => m.predict_proba(x),
            FittedClassifier::Knn(m) => m.predict_proba(x),
            FittedClassifier::DecisionTree(m) => m.predict_proba(x),
        }
    }
}

/// Train a classifier on a raw matrix. Both classes must be present.
pub fn train_on_matrix(
    kind: ClassifierKind,
    x: &Matrix,
    y: &[u8],
    _seed: RngSeed,
) -> Result<FittedClassifier> {
    check_xy(x, y)?;
    for class in [0u8, 1u8] {
        if !y.contains(&class) {
            return Err(Error::DegenerateClass(class));
        }
    }
    Ok(match kind {
        ClassifierKind::Logistic => {
            FittedClassifier::Logistic(LogisticModel::fit(x, y, LogisticParams::DEFAULT)?)
        }
        ClassifierKind::BernoulliNb => {
            FittedClassifier::BernoulliNb(BernoulliNbModel::fit(x, y)?)
        }
        ClassifierKind::Knn => FittedClassifier::Knn(KnnModel::fit(x, y, KNN_K)?),
        ClassifierKind::DecisionTree => {
            FittedClassifier::DecisionTree(DecisionTreeModel::fit(x, y)?)
        }
    })
}
