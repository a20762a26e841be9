//! Small numeric helpers shared across modules. Public API surfaces live in
//! the modules that own them (`analysis::pearson_corr` wraps `pearson`).

use crate::error::{Error, Result};

/// L1 distance; equals the Hamming distance on binary rows.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|v| *v == xs[0])
}

/// Population variance (divides by n).
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Pearson correlation; errors when lengths differ, n < 3, or either side has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "pearson inputs of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::TooFewRows {
            required: 3,
            found: x.len(),
        });
    }
    // an exactly-constant column must be degenerate even though its computed
    // variance can be a nonzero rounding residue
    if is_constant(x) || is_constant(y) {
        return Err(Error::InsufficientVariation(
            "zero variance in pearson input".into(),
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        cov += da * db;
        vx += da * da;
        vy += db * db;
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::InsufficientVariation(
            "zero variance in pearson input".into(),
        ));
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Median of an already sorted slice; even lengths average the middle pair.
pub fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Five-number summary (min, q1, median, q3, max) using median-of-halves
/// quartiles that exclude the median element for odd lengths.
pub fn five_number_summary(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    let med = median_sorted(&v);
    if m == 1 {
        return (v[0], v[0], med, v[0], v[0]);
    }
    let q1 = median_sorted(&v[..m / 2]);
    let q3 = median_sorted(&v[m.div_ceil(2)..]);
    (v[0], q1, med, q3, v[m - 1])
}
