//! Multi-class linear discriminant analysis with covariance shrinkage.
//!
//! Gaussian equal-covariance discriminants: score_k(x) = w_k . x + b_k with
//! w_k = S^{-1} mu_k and b_k = -0.5 mu_k . w_k + log prior_k. Ties break
//! toward the first class in declared label order.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{min_eigenvalue, solve_spd};
use crate::scalar::Scalar;
use crate::types::ClassLabel;
use crate::Real;

#[derive(Debug, Clone)]
pub struct LdaModel<T> {
    pub class_labels: Vec<ClassLabel>,
    /// `[n_classes, n_features]`
    pub class_means: Array2<T>,
    /// shrunk pooled within-class covariance
    pub pooled_covariance: Array2<T>,
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    pub priors: Array1<T>,
    pub shrinkage_lambda: T,
}

/// Fit from raw feature rows and labels. Pooled covariance uses the N - K
/// denominator; shrinkage pulls toward the scaled identity
/// `(trace(S)/d) I`.
pub fn fit_lda_raw<T: Scalar>(
    x: &Array2<T>,
    labels: &[ClassLabel],
    shrinkage_lambda: T,
) -> Result<LdaModel<T>> {
    let n = x.nrows();
    let d = x.ncols();
    if labels.len() != n {
        return Err(Error::shape("feature rows and labels differ in length"));
    }
    if !(shrinkage_lambda >= T::zero() && shrinkage_lambda <= T::one()) {
        return Err(Error::domain("shrinkage lambda must lie in [0, 1]"));
    }
    let mut class_labels: Vec<ClassLabel> = Vec::new();
    for l in labels {
        if !class_labels.contains(l) {
            class_labels.push(l.clone());
        }
    }
    let k = class_labels.len();
    if k < 2 {
        return Err(Error::domain("LDA needs at least 2 classes"));
    }
    let counts: Vec<usize> = class_labels
        .iter()
        .map(|c| labels.iter().filter(|l| *l == c).count())
        .collect();
    if let Some(i) = counts.iter().position(|&c| c < 2) {
        return Err(Error::domain(format!(
            "class '{}' has {} trials; at least 2 required",
            class_labels[i], counts[i]
        )));
    }

    let mut means = Array2::<T>::zeros((k, d));
    for (ci, class) in class_labels.iter().enumerate() {
        let mut cnt = T::zero();
        for (row, l) in labels.iter().enumerate() {
            if l == class {
                for j in 0..d {
                    means[[ci, j]] = means[[ci, j]] + x[[row, j]];
                }
                cnt = cnt + T::one();
            }
        }
        for j in 0..d {
            means[[ci, j]] = means[[ci, j]] / cnt;
        }
    }

    let mut pooled = Array2::<T>::zeros((d, d));
    for (row, l) in labels.iter().enumerate() {
        let ci = class_labels.iter().position(|c| c == l).unwrap();
        let diff: Vec<T> = (0..d).map(|j| x[[row, j]] - means[[ci, j]]).collect();
        for i in 0..d {
            for j in 0..d {
                pooled[[i, j]] = pooled[[i, j]] + diff[i] * diff[j];
            }
        }
    }
    let denom = T::from_f64_lit((n - k) as f64);
    pooled = pooled.mapv(|v| v / denom);

    let tr: T = (0..d).map(|i| pooled[[i, i]]).sum();
    let target = tr / T::from_f64_lit(d as f64);
    let one_minus = T::one() - shrinkage_lambda;
    let mut shrunk = pooled.mapv(|v| one_minus * v);
    for i in 0..d {
        shrunk[[i, i]] = shrunk[[i, i]] + shrinkage_lambda * target;
    }

    let n_t = T::from_f64_lit(n as f64);
    let priors = Array1::from_iter(counts.iter().map(|&c| T::from_f64_lit(c as f64) / n_t));

    let mut weights = Array2::<T>::zeros((k, d));
    let mut biases = Array1::<T>::zeros(k);
    for ci in 0..k {
        let mu = means.row(ci).to_owned();
        let w = solve_spd(&shrunk, &mu).map_err(|e| {
            if shrinkage_lambda == T::zero() {
                Error::numerical(format!(
                    "pooled covariance singular at lambda = 0 ({e}); retry with lambda > 0"
                ))
            } else {
                e
            }
        })?;
        let half = T::from_f64_lit(0.5);
        biases[ci] = priors[ci].ln() - half * mu.dot(&w);
        weights.row_mut(ci).assign(&w);
    }

    Ok(LdaModel {
        class_labels,
        class_means: means,
        pooled_covariance: shrunk,
        weights,
        biases,
        priors,
        shrinkage_lambda,
    })
}

/// Fit on a [`FeatureMatrix`].
pub fn fit_lda(features: &FeatureMatrix, shrinkage_lambda: Real) -> Result<LdaModel<Real>> {
    fit_lda_raw(&features.values, &features.labels, shrinkage_lambda)
}

impl<T: Scalar> LdaModel<T> {
    /// Discriminant scores, one row per trial, one column per class.
    pub fn scores(&self, x: &Array2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.weights.ncols() {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.weights.ncols(),
                x.ncols()
            )));
        }
        let mut s = x.dot(&self.weights.t());
        for mut row in s.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v + self.biases[j];
            }
        }
        Ok(s)
    }

    /// Argmax classification; ties go to the first class in label order.
    pub fn predict_rows(&self, x: &Array2<T>) -> Result<Vec<ClassLabel>> {
        let s = self.scores(x)?;
        Ok(s.outer_iter()
            .map(|row| {
                let mut best = 0usize;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                self.class_labels[best].clone()
            })
            .collect())
    }

    /// Smallest eigenvalue of the (shrunk) pooled covariance.
    pub fn min_covariance_eigenvalue(&self) -> Result<T> {
        min_eigenvalue(&self.pooled_covariance)
    }
}

pub fn predict(model: &LdaModel<Real>, features: &FeatureMatrix) -> Result<Vec<ClassLabel>> {
    model.predict_rows(&features.values)
}

pub fn predict_scores(model: &LdaModel<Real>, features: &FeatureMatrix) -> Result<Array2<Real>> {
    model.scores(&features.values)
}

pub const LDA_SCHEMA_VERSION: u32 = 1;

/// Serializable form; load re-verifies the weight/bias identities.
#[derive(Debug, Serialize, Deserialize)]
pub struct LdaModelFile {
    pub schema_version: u32,
    pub class_labels: Vec<String>,
    pub class_means: Vec<Vec<Real>>,
    pub pooled_covariance: Vec<Vec<Real>>,
    pub weights: Vec<Vec<Real>>,
    pub biases: Vec<Real>,
    pub priors: Vec<Real>,
    pub shrinkage_lambda: Real,
}

impl LdaModelFile {
    pub fn from_model(m: &LdaModel<Real>) -> Self {
        let rows = |a: &Array2<Real>| a.outer_iter().map(|r| r.to_vec()).collect();
        LdaModelFile {
            schema_version: LDA_SCHEMA_VERSION,
            class_labels: m.class_labels.iter().map(|l| l.0.clone()).collect(),
            class_means: rows(&m.class_means),
            pooled_covariance: rows(&m.pooled_covariance),
            weights: rows(&m.weights),
            biases: m.biases.to_vec(),
            priors: m.priors.to_vec(),
            shrinkage_lambda: m.shrinkage_lambda,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lda model serializes")
    }

    pub fn from_json(text: &str) -> Result<LdaModel<Real>> {
        let f: LdaModelFile = serde_json::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
        if f.schema_version != LDA_SCHEMA_VERSION {
            return Err(Error::parse(format!(
                "lda model schema version {} unsupported (expected {LDA_SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        let k = f.class_labels.len();
        let d = f.weights.first().map(|r| r.len()).unwrap_or(0);
        let to_arr = |v: &Vec<Vec<Real>>, rows: usize, cols: usize| -> Result<Array2<Real>> {
            if v.len() != rows || v.iter().any(|r| r.len() != cols) {
                return Err(Error::shape("lda model file has inconsistent shapes"));
            }
            Ok(Array2::from_shape_fn((rows, cols), |(i, j)| v[i][j]))
        };
        let model = LdaModel {
            class_labels: f.class_labels.iter().map(|s| ClassLabel::new(s.clone())).collect(),
            class_means: to_arr(&f.class_means, k, d)?,
            pooled_covariance: to_arr(&f.pooled_covariance, d, d)?,
            weights: to_arr(&f.weights, k, d)?,
            biases: Array1::from(f.biases),
            priors: Array1::from(f.priors),
            shrinkage_lambda: f.shrinkage_lambda,
        };
        // invariant check: weights solve the covariance system for the means
        for ci in 0..k {
            let w = solve_spd(&model.pooled_covariance, &model.class_means.row(ci).to_owned())?;
            for j in 0..d {
                if (w[j] - model.weights[[ci, j]]).abs() > 1e-8 {
                    return Err(Error::parse(
                        "lda model file fails the weight/covariance invariant".to_string(),
                    ));
                }
            }
        }
        Ok(model)
    }
}
