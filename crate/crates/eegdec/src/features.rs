//! Covariance estimation, two-class and one-vs-rest CSP, log-variance
//! features, and band-power topography.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dsp::{design_butterworth_bandpass, filtfilt_matrix};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::montage::Montage;
use crate::scalar::Scalar;
use crate::types::{ClassLabel, EpochSet};
use crate::Real;

/// Relative ridge added to the composite covariance before whitening. Kept
/// small enough that the whitening identity holds to 1e-8 on well-posed
/// inputs while still rejecting exactly singular composites.
pub const COV_REGULARIZATION: f64 = 1e-12;

/// Spatial filter bank for one class pair (or one class vs the rest).
///
/// `filters` rows project signals; `patterns` columns are the matching
/// activation patterns (columns of the inverse of the full filter matrix).
/// `filters_full` keeps the untruncated matrix so the whitening identity
/// `W (C1+C2) W^T = I` stays checkable after fitting.
#[derive(Debug, Clone)]
pub struct CspModel<T> {
    pub filters: Array2<T>,
    pub patterns: Array2<T>,
    pub eigenvalues: Vec<T>,
    pub n_per_side: usize,
    pub filters_full: Array2<T>,
    pub eigenvalues_full: Vec<T>,
}

impl<T: Scalar> CspModel<T> {
    pub fn n_components(&self) -> usize {
        self.filters.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.filters.ncols()
    }
}

/// Trace-normalized sample covariance `X X^T / trace(X X^T)`.
pub fn trial_covariance<T: Scalar>(trial: &ArrayView2<'_, T>) -> Result<Array2<T>> {
    let scatter = trial_scatter(trial);
    let tr: T = (0..scatter.nrows()).map(|i| scatter[[i, i]]).sum();
    if !(tr > T::zero()) {
        return Err(Error::numerical(
            "degenerate covariance: trial has zero total power",
        ));
    }
    Ok(scatter.mapv(|v| v / tr))
}

/// Unnormalized scatter `X X^T`.
pub fn trial_scatter<T: Scalar>(trial: &ArrayView2<'_, T>) -> Array2<T> {
    trial.dot(&trial.t())
}

/// Average of trace-normalized trial covariances over a set of scatters.
fn mean_covariance<T: Scalar>(scatters: &[&Array2<T>]) -> Result<Array2<T>> {
    let n = scatters.len();
    if n == 0 {
        return Err(Error::domain("no trials to average"));
    }
    let d = scatters[0].nrows();
    let mut acc = Array2::<T>::zeros((d, d));
    for s in scatters {
        let tr: T = (0..d).map(|i| s[[i, i]]).sum();
        if !(tr > T::zero()) {
            return Err(Error::numerical(
                "degenerate covariance: trial has zero total power",
            ));
        }
        acc = acc + &s.mapv(|v| v / tr);
    }
    let nn = T::from_f64_lit(n as f64);
    Ok(acc.mapv(|v| v / nn))
}

/// CSP from two class-average covariances.
///
/// Solves `C1 w = lambda (C1 + C2) w` by whitening: eigendecompose the
/// (ridge-regularized) composite, whiten C1 in that basis, eigendecompose
/// again. Keeps `n_per_side` filters from each end of the spectrum; each
/// filter row is scaled so its largest-magnitude coefficient is positive.
pub fn fit_csp_from_covariances<T: Scalar>(
    c1: &Array2<T>,
    c2: &Array2<T>,
    n_per_side: usize,
) -> Result<CspModel<T>> {
    let n = c1.nrows();
    if c2.nrows() != n || c1.ncols() != n || c2.ncols() != n {
        return Err(Error::shape("class covariances must be square and equal-sized"));
    }
    if n_per_side < 1 || 2 * n_per_side > n {
        return Err(Error::domain(format!(
            "n_per_side {n_per_side} invalid for {n} channels"
        )));
    }
    let mut composite = c1 + c2;
    let tr: T = (0..n).map(|i| composite[[i, i]]).sum();
    let eps = T::from_f64_lit(COV_REGULARIZATION) * tr;
    for i in 0..n {
        composite[[i, i]] = composite[[i, i]] + eps;
    }

    let comp_eig = sym_eigen(&composite)?;
    let lam_min = comp_eig.values[n - 1];
    if !(lam_min > T::zero()) {
        return Err(Error::numerical(format!(
            "composite covariance rank-deficient beyond regularization; smallest eigenvalue {lam_min}"
        )));
    }
    // whitening P = Lambda^{-1/2} U^T, and its inverse U Lambda^{1/2}
    let mut p = comp_eig.vectors.t().to_owned();
    let mut p_inv = comp_eig.vectors.clone();
    for j in 0..n {
        let s = comp_eig.values[j].sqrt();
        for k in 0..n {
            p[[j, k]] = p[[j, k]] / s;
            p_inv[[k, j]] = p_inv[[k, j]] * s;
        }
    }

    let whitened = p.dot(c1).dot(&p.t());
    // symmetrize against roundoff
    let whitened = (&whitened + &whitened.t()) * T::from_f64_lit(0.5);
    let inner = sym_eigen(&whitened)?;

    // rows of the full filter matrix, descending eigenvalue
    let mut filters_full = inner.vectors.t().dot(&p);
    let mut patterns_full = p_inv.dot(&inner.vectors);
    for r in 0..n {
        let mut best = T::zero();
        for c in 0..n {
            if filters_full[[r, c]].abs() > best.abs() {
                best = filters_full[[r, c]];
            }
        }
        if best < T::zero() {
            for c in 0..n {
                filters_full[[r, c]] = -filters_full[[r, c]];
                patterns_full[[c, r]] = -patterns_full[[c, r]];
            }
        }
    }
    let eigenvalues_full: Vec<T> = inner.values.to_vec();

    let keep: Vec<usize> = (0..n_per_side)
        .chain((n - n_per_side)..n)
        .collect();
    let mut filters = Array2::zeros((keep.len(), n));
    let mut patterns = Array2::zeros((n, keep.len()));
    let mut eigenvalues = Vec::with_capacity(keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        filters.row_mut(dst).assign(&filters_full.row(src));
        patterns.column_mut(dst).assign(&patterns_full.column(src));
        eigenvalues.push(eigenvalues_full[src]);
    }

    Ok(CspModel {
        filters,
        patterns,
        eigenvalues,
        n_per_side,
        filters_full,
        eigenvalues_full,
    })
}

fn class_scatters(epochs: &EpochSet) -> Vec<Array2<Real>> {
    (0..epochs.n_trials())
        .map(|i| trial_scatter(&epochs.trial(i)))
        .collect()
}

/// Two-class CSP on epoch sets (class A drives the large-eigenvalue end).
pub fn fit_csp_pair(
    epochs_a: &EpochSet,
    epochs_b: &EpochSet,
    n_per_side: usize,
) -> Result<CspModel<Real>> {
    if epochs_a.n_channels() != epochs_b.n_channels() {
        return Err(Error::shape("channel count mismatch between classes"));
    }
    if epochs_a.n_trials() < 2 || epochs_b.n_trials() < 2 {
        return Err(Error::domain("each class needs at least 2 trials"));
    }
    let sa = class_scatters(epochs_a);
    let sb = class_scatters(epochs_b);
    let c1 = mean_covariance(&sa.iter().collect::<Vec<_>>())?;
    let c2 = mean_covariance(&sb.iter().collect::<Vec<_>>())?;
    fit_csp_from_covariances(&c1, &c2, n_per_side)
}

/// One-vs-rest CSP models from precomputed per-trial scatters, in the given
/// label-set order. This is the leakage-sensitive path: only the listed
/// trial indices contribute.
pub fn fit_csp_ovr_from_scatters(
    scatters: &[Array2<Real>],
    labels: &[ClassLabel],
    label_set: &[ClassLabel],
    indices: &[usize],
    n_per_side: usize,
) -> Result<Vec<(ClassLabel, CspModel<Real>)>> {
    if label_set.len() < 2 {
        return Err(Error::domain("one-vs-rest needs at least 2 classes"));
    }
    let mut out = Vec::with_capacity(label_set.len());
    for class in label_set {
        let own: Vec<&Array2<Real>> = indices
            .iter()
            .filter(|&&i| &labels[i] == class)
            .map(|&i| &scatters[i])
            .collect();
        let rest: Vec<&Array2<Real>> = indices
            .iter()
            .filter(|&&i| &labels[i] != class)
            .map(|&i| &scatters[i])
            .collect();
        if own.len() < 2 || rest.len() < 2 {
            return Err(Error::domain(format!(
                "class '{class}' needs at least 2 trials on each side ({} vs {})",
                own.len(),
                rest.len()
            )));
        }
        let c1 = mean_covariance(&own)?;
        let c2 = mean_covariance(&rest)?;
        out.push((class.clone(), fit_csp_from_covariances(&c1, &c2, n_per_side)?));
    }
    Ok(out)
}

/// One-vs-rest CSP over a full epoch set; label-set order is first-appearance
/// order of the labels.
pub fn fit_csp_ovr(
    epochs: &EpochSet,
    n_per_side: usize,
) -> Result<Vec<(ClassLabel, CspModel<Real>)>> {
    let scatters = class_scatters(epochs);
    let label_set = epochs.label_set();
    let indices: Vec<usize> = (0..epochs.n_trials()).collect();
    fit_csp_ovr_from_scatters(&scatters, epochs.labels(), &label_set, &indices, n_per_side)
}

/// Feature rows aligned with trial labels.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub values: Array2<Real>,
    pub labels: Vec<ClassLabel>,
    pub feature_names: Vec<String>,
}

/// Log of normalized projected variance, per model and kept filter, computed
/// from per-trial scatters. Normalization runs over the filters of one model.
pub fn csp_features_from_scatters(
    models: &[(ClassLabel, CspModel<Real>)],
    scatters: &[Array2<Real>],
    labels: &[ClassLabel],
    indices: &[usize],
    band_tag: Option<&str>,
) -> Result<FeatureMatrix> {
    let n_features: usize = models.iter().map(|(_, m)| m.n_components()).sum();
    let mut values = Array2::zeros((indices.len(), n_features));
    let mut names = Vec::with_capacity(n_features);
    for (class, m) in models {
        for k in 0..m.n_components() {
            match band_tag {
                Some(tag) => names.push(format!("{tag}:{class}:csp{k}")),
                None => names.push(format!("{class}:csp{k}")),
            }
        }
    }
    for (row, &idx) in indices.iter().enumerate() {
        let s = &scatters[idx];
        let mut col = 0usize;
        for (_, m) in models {
            if m.n_channels() != s.nrows() {
                return Err(Error::shape(format!(
                    "model expects {} channels, trial has {}",
                    m.n_channels(),
                    s.nrows()
                )));
            }
            let mut vars = Vec::with_capacity(m.n_components());
            for w in m.filters.outer_iter() {
                let sw = s.dot(&w.to_owned());
                let v = w.dot(&sw);
                vars.push(v);
            }
            let total: Real = vars.iter().sum();
            for &v in &vars {
                if !(v > 0.0) {
                    return Err(Error::numerical(
                        "degenerate feature: zero projected variance on a CSP filter",
                    ));
                }
                values[[row, col]] = (v / total).ln();
                col += 1;
            }
        }
    }
    let out_labels = indices.iter().map(|&i| labels[i].clone()).collect();
    Ok(FeatureMatrix {
        values,
        labels: out_labels,
        feature_names: names,
    })
}

/// Log-variance CSP features straight from an epoch set (already filtered to
/// the target band).
pub fn csp_features(
    models: &[(ClassLabel, CspModel<Real>)],
    epochs: &EpochSet,
) -> Result<FeatureMatrix> {
    let scatters = class_scatters(epochs);
    let indices: Vec<usize> = (0..epochs.n_trials()).collect();
    csp_features_from_scatters(models, &scatters, epochs.labels(), &indices, None)
}

/// Per-window, per-channel band power averaged over trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopographyMap {
    pub band_hz: (Real, Real),
    pub windows_ms: Vec<(Real, Real)>,
    pub channel_labels: Vec<String>,
    /// `[n_windows][n_channels]` mean squared amplitude
    pub power: Vec<Vec<Real>>,
}

/// Mean squared amplitude of the band-filtered signal per channel, per time
/// window (ms relative to event onset), averaged across trials.
pub fn band_power_topography(
    epochs: &EpochSet,
    band_hz: (Real, Real),
    windows_ms: &[(Real, Real)],
) -> Result<TopographyMap> {
    if windows_ms.is_empty() {
        return Err(Error::domain("no topography windows given"));
    }
    let fs = epochs.sample_rate_hz();
    let t0 = epochs.t0_ms();
    let t_end = t0 + epochs.n_epoch_samples() as Real / fs * 1000.0;
    let mut spans = Vec::with_capacity(windows_ms.len());
    for &(a, b) in windows_ms {
        if !(a < b) {
            return Err(Error::domain(format!("empty topography window {a}:{b} ms")));
        }
        if a < t0 - 1e-9 || b > t_end + 1e-9 {
            return Err(Error::domain(format!(
                "window {a}:{b} ms outside epoch span {t0}:{t_end} ms"
            )));
        }
        let s0 = ((a - t0) * fs / 1000.0).round() as usize;
        let s1 = (((b - t0) * fs / 1000.0).round() as usize).min(epochs.n_epoch_samples());
        if s1 <= s0 {
            return Err(Error::domain(format!("window {a}:{b} ms spans no samples")));
        }
        spans.push((s0, s1));
    }
    let filt = design_butterworth_bandpass::<Real>(3, band_hz.0, band_hz.1, fs)?;
    let n_ch = epochs.n_channels();
    let mut power = vec![vec![0.0 as Real; n_ch]; windows_ms.len()];
    for t in 0..epochs.n_trials() {
        let filtered = filtfilt_matrix(&filt, &epochs.trial(t))?;
        for (wi, &(s0, s1)) in spans.iter().enumerate() {
            for ch in 0..n_ch {
                let seg = filtered.slice(ndarray::s![ch, s0..s1]);
                let msq: Real = seg.iter().map(|v| v * v).sum::<Real>() / (s1 - s0) as Real;
                power[wi][ch] += msq;
            }
        }
    }
    let nt = epochs.n_trials() as Real;
    for row in power.iter_mut() {
        for v in row.iter_mut() {
            *v /= nt;
        }
    }
    Ok(TopographyMap {
        band_hz,
        windows_ms: windows_ms.to_vec(),
        channel_labels: epochs.channel_labels().to_vec(),
        power,
    })
}

/// Long-format topography CSV with montage coordinates, 6 significant digits.
pub fn export_topography_csv(map: &TopographyMap, montage: &Montage, path: &str) -> Result<()> {
    let mut out = String::from("window_start_ms,window_end_ms,channel,x,y,power\n");
    for (wi, &(a, b)) in map.windows_ms.iter().enumerate() {
        for (ci, ch) in map.channel_labels.iter().enumerate() {
            let (x, y) = montage.require(ch)?;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::io::fmt_sig6(a),
                crate::io::fmt_sig6(b),
                ch,
                crate::io::fmt_sig6(x),
                crate::io::fmt_sig6(y),
                crate::io::fmt_sig6(map.power[wi][ci]),
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Serializable view of a fitted CSP model plus the context needed to check
/// it against incoming data.
#[derive(Debug, Serialize, Deserialize)]
pub struct CspModelFile {
    pub schema_version: u32,
    pub channel_labels: Vec<String>,
    pub band_hz: Option<(Real, Real)>,
    pub n_per_side: usize,
    pub eigenvalues: Vec<Real>,
    pub filters: Vec<Vec<Real>>,
    pub patterns: Vec<Vec<Real>>,
}

pub const CSP_SCHEMA_VERSION: u32 = 1;

impl CspModelFile {
    pub fn from_model(
        model: &CspModel<Real>,
        channel_labels: &[String],
        band_hz: Option<(Real, Real)>,
    ) -> Self {
        CspModelFile {
            schema_version: CSP_SCHEMA_VERSION,
            channel_labels: channel_labels.to_vec(),
            band_hz,
            n_per_side: model.n_per_side,
            eigenvalues: model.eigenvalues.clone(),
            filters: model.filters.outer_iter().map(|r| r.to_vec()).collect(),
            patterns: model.patterns.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("csp model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CspModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
        if file.schema_version != CSP_SCHEMA_VERSION {
            return Err(Error::parse(format!(
                "csp model schema version {} unsupported (expected {CSP_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    /// Rebuild the kept-component model. Full matrices are not stored; the
    /// truncated composition checks still hold.
    pub fn to_model(&self) -> Result<CspModel<Real>> {
        let n_comp = self.filters.len();
        let n_ch = self.channel_labels.len();
        if self.filters.iter().any(|r| r.len() != n_ch)
            || self.patterns.len() != n_ch
            || self.patterns.iter().any(|r| r.len() != n_comp)
            || self.eigenvalues.len() != n_comp
        {
            return Err(Error::shape("csp model file has inconsistent shapes"));
        }
        let filters =
            Array2::from_shape_fn((n_comp, n_ch), |(r, c)| self.filters[r][c]);
        let patterns =
            Array2::from_shape_fn((n_ch, n_comp), |(r, c)| self.patterns[r][c]);
        Ok(CspModel {
            filters: filters.clone(),
            patterns,
            eigenvalues: self.eigenvalues.clone(),
            n_per_side: self.n_per_side,
            filters_full: filters,
            eigenvalues_full: self.eigenvalues.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn epochs_from_trials(trials: Vec<Array2<Real>>, labels: Vec<&str>) -> EpochSet {
        let (c, s) = (trials[0].nrows(), trials[0].ncols());
        let mut data = Array3::zeros((trials.len(), c, s));
        for (i, t) in trials.iter().enumerate() {
            data.index_axis_mut(ndarray::Axis(0), i).assign(t);
        }
        let ch_labels: Vec<String> = (0..c).map(|i| format!("ch{i}")).collect();
        EpochSet::new(
            data,
            labels.into_iter().map(ClassLabel::new).collect(),
            ch_labels,
            250.0,
            0.0,
        )
        .unwrap()
    }

    fn random_trial(rng: &mut StdRng, channels: usize, samples: usize, gains: &[f64]) -> Array2<Real> {
        Array2::from_shape_fn((channels, samples), |(c, _)| {
            gains[c] * rng.gen_range(-1.0..1.0)
        })
    }

    #[test]
    fn covariance_of_orthonormal_rows_is_scaled_identity() {
        let x: Array2<Real> = array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let c = trial_covariance(&x.view()).unwrap();
        assert!((c[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((c[[1, 1]] - 0.5).abs() < 1e-12);
        assert!(c[[0, 1]].abs() < 1e-12);
    }

    #[test]
    fn covariance_is_scale_invariant_and_trace_one() {
        let mut rng = StdRng::seed_from_u64(7);
        let x = random_trial(&mut rng, 4, 500, &[1.0, 2.0, 0.5, 1.5]);
        let c = trial_covariance(&x.view()).unwrap();
        let c5 = trial_covariance(&x.mapv(|v| 5.0 * v).view()).unwrap();
        let tr: Real = (0..4).map(|i| c[[i, i]]).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        for (a, b) in c.iter().zip(c5.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // brute-force recomputation
        let scatter = x.dot(&x.t());
        let trs: Real = (0..4).map(|i| scatter[[i, i]]).sum();
        for (a, b) in c.iter().zip(scatter.iter()) {
            assert!((a - b / trs).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trial_covariance_is_an_error() {
        let x = Array2::<Real>::zeros((3, 100));
        assert!(trial_covariance(&x.view()).is_err());
    }

    #[test]
    fn diagonal_case_recovers_axis_filter() {
        // class A variance on channel 0 only, class B on channel 1 only
        let mut rng = StdRng::seed_from_u64(1);
        let a: Vec<Array2<Real>> = (0..6)
            .map(|_| random_trial(&mut rng, 3, 400, &[3.0, 0.05, 0.05]))
            .collect();
        let b: Vec<Array2<Real>> = (0..6)
            .map(|_| random_trial(&mut rng, 3, 400, &[0.05, 3.0, 0.05]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 6]);
        let eb = epochs_from_trials(b, vec!["B"; 6]);
        let m = fit_csp_pair(&ea, &eb, 1).unwrap();
        let w = m.filters.row(0);
        let norm: Real = w.iter().map(|v| v * v).sum::<Real>().sqrt();
        let cosine = (w[0] / norm).abs();
        assert!(cosine > 0.99, "cosine {cosine}");
        assert!(m.eigenvalues[0] > 0.95);
    }

    #[test]
    fn identical_classes_give_half_eigenvalues() {
        let mut rng = StdRng::seed_from_u64(2);
        let trials: Vec<Array2<Real>> = (0..8)
            .map(|_| random_trial(&mut rng, 4, 300, &[1.0, 1.3, 0.7, 1.1]))
            .collect();
        let e = epochs_from_trials(trials, vec!["A"; 8]);
        let scatters = class_scatters(&e);
        let refs: Vec<&Array2<Real>> = scatters.iter().collect();
        let c = mean_covariance(&refs).unwrap();
        let m = fit_csp_from_covariances(&c, &c, 2).unwrap();
        for &lam in &m.eigenvalues {
            assert!((lam - 0.5).abs() < 1e-8, "lambda {lam}");
        }
    }

    #[test]
    fn rayleigh_quotient_identity_holds() {
        let mut rng = StdRng::seed_from_u64(3);
        let a: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 6, 500, &[1.0, 2.0, 0.5, 1.5, 0.8, 1.2]))
            .collect();
        let b: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 6, 500, &[0.7, 0.9, 1.8, 0.6, 1.4, 1.0]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 5]);
        let eb = epochs_from_trials(b, vec!["B"; 5]);
        let sa = class_scatters(&ea);
        let sb = class_scatters(&eb);
        let c1 = mean_covariance(&sa.iter().collect::<Vec<_>>()).unwrap();
        let c2 = mean_covariance(&sb.iter().collect::<Vec<_>>()).unwrap();
        let m = fit_csp_pair(&ea, &eb, 3).unwrap();
        let comp = &c1 + &c2;
        for (k, w) in m.filters.outer_iter().enumerate() {
            let wv = w.to_owned();
            let num = wv.dot(&c1.dot(&wv));
            let den = wv.dot(&comp.dot(&wv));
            assert!((num / den - m.eigenvalues[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalue_symmetry_between_swapped_classes() {
        let mut rng = StdRng::seed_from_u64(4);
        let a: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 5, 400, &[1.0, 2.0, 0.5, 1.5, 0.8]))
            .collect();
        let b: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 5, 400, &[0.7, 0.9, 1.8, 0.6, 1.4]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 5]);
        let eb = epochs_from_trials(b, vec!["B"; 5]);
        let mab = fit_csp_pair(&ea, &eb, 2).unwrap();
        let mba = fit_csp_pair(&eb, &ea, 2).unwrap();
        let rev: Vec<Real> = mba.eigenvalues.iter().rev().map(|&l| 1.0 - l).collect();
        for (x, y) in mab.eigenvalues.iter().zip(rev.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn whitening_constraint_holds_on_full_filters() {
        let mut rng = StdRng::seed_from_u64(5);
        let a: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 4, 400, &[1.0, 2.0, 0.5, 1.5]))
            .collect();
        let b: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 4, 400, &[0.7, 0.9, 1.8, 0.6]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 5]);
        let eb = epochs_from_trials(b, vec!["B"; 5]);
        let sa = class_scatters(&ea);
        let sb = class_scatters(&eb);
        let c1 = mean_covariance(&sa.iter().collect::<Vec<_>>()).unwrap();
        let c2 = mean_covariance(&sb.iter().collect::<Vec<_>>()).unwrap();
        let m = fit_csp_pair(&ea, &eb, 2).unwrap();
        let comp = &c1 + &c2;
        let gram = m.filters_full.dot(&comp).dot(&m.filters_full.t());
        for ((i, j), v) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-8, "gram[{i},{j}] = {v}");
        }
    }

    #[test]
    fn kept_filters_times_patterns_is_identity() {
        let mut rng = StdRng::seed_from_u64(6);
        let a: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 5, 400, &[1.0, 2.0, 0.5, 1.5, 0.9]))
            .collect();
        let b: Vec<Array2<Real>> = (0..5)
            .map(|_| random_trial(&mut rng, 5, 400, &[0.7, 0.9, 1.8, 0.6, 1.1]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 5]);
        let eb = epochs_from_trials(b, vec!["B"; 5]);
        let m = fit_csp_pair(&ea, &eb, 2).unwrap();
        let prod = m.filters.dot(&m.patterns);
        for ((i, j), v) in prod.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-6, "prod[{i},{j}] = {v}");
        }
    }

    #[test]
    fn ovr_counts_and_two_class_consistency() {
        let mut rng = StdRng::seed_from_u64(8);
        let mut trials = Vec::new();
        let mut labels = Vec::new();
        let gains = [
            [3.0, 0.2, 0.2, 0.2, 0.2, 0.2],
            [0.2, 3.0, 0.2, 0.2, 0.2, 0.2],
            [0.2, 0.2, 3.0, 0.2, 0.2, 0.2],
            [0.2, 0.2, 0.2, 3.0, 0.2, 0.2],
        ];
        for (ci, name) in ["a", "b", "c", "d"].iter().enumerate() {
            for _ in 0..6 {
                trials.push(random_trial(&mut rng, 6, 400, &gains[ci]));
                labels.push(*name);
            }
        }
        let e = epochs_from_trials(trials, labels);
        let models = fit_csp_ovr(&e, 3).unwrap();
        assert_eq!(models.len(), 4);
        let total: usize = models.iter().map(|(_, m)| m.n_components()).sum();
        assert_eq!(total, 24);
        // each class's top OVR filter aligns with its dominant channel
        for (ci, (_, m)) in models.iter().enumerate() {
            let w = m.filters.row(0);
            let norm: Real = w.iter().map(|v| v * v).sum::<Real>().sqrt();
            assert!((w[ci] / norm).abs() > 0.95);
        }
    }

    #[test]
    fn features_match_brute_force_projection() {
        let mut rng = StdRng::seed_from_u64(9);
        let a: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[1.0, 2.0, 0.5, 1.5]))
            .collect();
        let b: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[0.7, 0.9, 1.8, 0.6]))
            .collect();
        let ea = epochs_from_trials(a.clone(), vec!["A"; 4]);
        let eb = epochs_from_trials(b, vec!["B"; 4]);
        let m = fit_csp_pair(&ea, &eb, 2).unwrap();
        let models = vec![(ClassLabel::new("A"), m)];
        let feats = csp_features(&models, &ea).unwrap();
        // oracle: explicit projection then variance
        for (t, trial) in a.iter().enumerate() {
            let mut vars = Vec::new();
            for w in models[0].1.filters.outer_iter() {
                let proj: Vec<Real> = (0..trial.ncols())
                    .map(|s| (0..4).map(|c| w[c] * trial[[c, s]]).sum())
                    .collect();
                vars.push(proj.iter().map(|v| v * v).sum::<Real>());
            }
            let total: Real = vars.iter().sum();
            for (k, &v) in vars.iter().enumerate() {
                assert!((feats.values[[t, k]] - (v / total).ln()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scale_invariance_of_features_and_filters() {
        let mut rng = StdRng::seed_from_u64(10);
        let a: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[1.0, 2.0, 0.5, 1.5]))
            .collect();
        let b: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[0.7, 0.9, 1.8, 0.6]))
            .collect();
        let ea = epochs_from_trials(a.clone(), vec!["A"; 4]);
        let eb = epochs_from_trials(b.clone(), vec!["B"; 4]);
        let scaled = |ts: &[Array2<Real>]| -> Vec<Array2<Real>> {
            ts.iter().map(|t| t.mapv(|v| 7.5 * v)).collect()
        };
        let ea2 = epochs_from_trials(scaled(&a), vec!["A"; 4]);
        let eb2 = epochs_from_trials(scaled(&b), vec!["B"; 4]);
        let m1 = fit_csp_pair(&ea, &eb, 2).unwrap();
        let m2 = fit_csp_pair(&ea2, &eb2, 2).unwrap();
        for (x, y) in m1.filters.iter().zip(m2.filters.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
        let models1 = vec![(ClassLabel::new("A"), m1)];
        let models2 = vec![(ClassLabel::new("A"), m2)];
        let f1 = csp_features(&models1, &ea).unwrap();
        let f2 = csp_features(&models2, &ea2).unwrap();
        for (x, y) in f1.values.iter().zip(f2.values.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_is_bitwise_reproducible() {
        let mut rng = StdRng::seed_from_u64(11);
        let a: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[1.0, 2.0, 0.5, 1.5]))
            .collect();
        let b: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[0.7, 0.9, 1.8, 0.6]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 4]);
        let eb = epochs_from_trials(b, vec!["B"; 4]);
        let m1 = fit_csp_pair(&ea, &eb, 2).unwrap();
        let m2 = fit_csp_pair(&ea, &eb, 2).unwrap();
        assert_eq!(m1.filters.as_slice().unwrap(), m2.filters.as_slice().unwrap());
        assert_eq!(m1.eigenvalues, m2.eigenvalues);
    }

    #[test]
    fn csp_model_file_round_trip() {
        let mut rng = StdRng::seed_from_u64(12);
        let a: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[1.0, 2.0, 0.5, 1.5]))
            .collect();
        let b: Vec<Array2<Real>> = (0..4)
            .map(|_| random_trial(&mut rng, 4, 300, &[0.7, 0.9, 1.8, 0.6]))
            .collect();
        let ea = epochs_from_trials(a, vec!["A"; 4]);
        let eb = epochs_from_trials(b, vec!["B"; 4]);
        let m = fit_csp_pair(&ea, &eb, 2).unwrap();
        let labels: Vec<String> = ea.channel_labels().to_vec();
        let file = CspModelFile::from_model(&m, &labels, Some((8.0, 13.0)));
        let text = file.to_json();
        let back = CspModelFile::from_json(&text).unwrap();
        let rebuilt = back.to_model().unwrap();
        assert_eq!(m.filters.as_slice().unwrap(), rebuilt.filters.as_slice().unwrap());
        assert_eq!(m.eigenvalues, rebuilt.eigenvalues);
        // version check
        let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert!(CspModelFile::from_json(&bad).is_err());
    }
}
