//! Repeated stratified cross-validation of the band-filter -> CSP -> LDA
//! pipeline, with leakage-free per-fold fitting and Table-style reporting.
//!
//! "5-by-5-fold" reads as 5 independent repetitions of stratified 5-fold CV
//! (25 fold evaluations). CSP and LDA refit inside every training fold; the
//! band filters themselves are data-independent designs, so pre-filtering the
//! whole set once introduces no leakage.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clf::{fit_lda_raw, LdaModel};
use crate::dsp::{design_butterworth_bandpass, filtfilt_matrix};
use crate::error::{Error, Result};
use crate::features::{
    csp_features_from_scatters, fit_csp_ovr_from_scatters, trial_scatter, CspModel,
};
use crate::io::{EvaluationReport, PerClassRecall, REPORT_SCHEMA_VERSION};
use crate::types::{ClassLabel, EpochSet};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// band-filtered copies whose CSP features are concatenated
    pub bands_hz: Vec<(Real, Real)>,
    pub filter_order: usize,
    pub csp_per_side: usize,
    pub shrinkage: Real,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bands_hz: vec![(8.0, 13.0), (13.0, 30.0)],
            filter_order: 3,
            csp_per_side: 3,
            shrinkage: 0.05,
        }
    }
}

/// Per-band, per-trial scatter matrices of the band-filtered epochs. The
/// fitting path consumes only training-trial entries of this structure.
pub struct BandScatters {
    pub bands_hz: Vec<(Real, Real)>,
    /// `[band][trial]`
    pub scatters: Vec<Vec<Array2<Real>>>,
    pub labels: Vec<ClassLabel>,
}

/// Band-filter the epochs (zero-phase, per trial and channel) and reduce each
/// trial to its channel scatter matrix.
pub fn band_scatters(epochs: &EpochSet, config: &PipelineConfig) -> Result<BandScatters> {
    if config.bands_hz.is_empty() {
        return Err(Error::domain("pipeline needs at least one band"));
    }
    let fs = epochs.sample_rate_hz();
    let mut scatters = Vec::with_capacity(config.bands_hz.len());
    for &(lo, hi) in &config.bands_hz {
        let filt = design_butterworth_bandpass::<Real>(config.filter_order, lo, hi, fs)?;
        let mut per_trial = Vec::with_capacity(epochs.n_trials());
        for t in 0..epochs.n_trials() {
            let filtered = filtfilt_matrix(&filt, &epochs.trial(t))?;
            per_trial.push(trial_scatter(&filtered.view()));
        }
        scatters.push(per_trial);
    }
    Ok(BandScatters {
        bands_hz: config.bands_hz.clone(),
        scatters,
        labels: epochs.labels().to_vec(),
    })
}

/// Models fitted on one training fold.
pub struct FittedFold {
    /// `[band]` -> OVR CSP models in label-set order
    pub csp_by_band: Vec<Vec<(ClassLabel, CspModel<Real>)>>,
    pub lda: LdaModel<Real>,
}

fn band_tag(lo: Real, hi: Real) -> String {
    format!("band{lo}-{hi}")
}

fn assemble_features(
    fitted_csp: &[Vec<(ClassLabel, CspModel<Real>)>],
    data: &BandScatters,
    indices: &[usize],
) -> Result<(Array2<Real>, Vec<ClassLabel>, Vec<String>)> {
    let mut blocks = Vec::new();
    let mut names = Vec::new();
    let mut labels = Vec::new();
    for (bi, models) in fitted_csp.iter().enumerate() {
        let (lo, hi) = data.bands_hz[bi];
        let fm = csp_features_from_scatters(
            models,
            &data.scatters[bi],
            &data.labels,
            indices,
            Some(&band_tag(lo, hi)),
        )?;
        if bi == 0 {
            labels = fm.labels;
        }
        names.extend(fm.feature_names);
        blocks.push(fm.values);
    }
    let rows = indices.len();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut values = Array2::zeros((rows, cols));
    let mut col0 = 0;
    for b in &blocks {
        values
            .slice_mut(ndarray::s![.., col0..col0 + b.ncols()])
            .assign(b);
        col0 += b.ncols();
    }
    Ok((values, labels, names))
}

/// Fit CSP (per band, one-vs-rest) and LDA on the listed training trials
/// only.
pub fn fit_fold(
    data: &BandScatters,
    label_set: &[ClassLabel],
    train_idx: &[usize],
    config: &PipelineConfig,
) -> Result<FittedFold> {
    let mut csp_by_band = Vec::with_capacity(data.scatters.len());
    for band in &data.scatters {
        csp_by_band.push(fit_csp_ovr_from_scatters(
            band,
            &data.labels,
            label_set,
            train_idx,
            config.csp_per_side,
        )?);
    }
    let (values, labels, _names) = assemble_features(&csp_by_band, data, train_idx)?;
    let lda = fit_lda_raw(&values, &labels, config.shrinkage)?;
    Ok(FittedFold { csp_by_band, lda })
}

/// Predict labels for the listed trials with fold-fitted models.
pub fn predict_fold(
    fitted: &FittedFold,
    data: &BandScatters,
    indices: &[usize],
) -> Result<Vec<ClassLabel>> {
    let (values, _labels, _names) = assemble_features(&fitted.csp_by_band, data, indices)?;
    fitted.lda.predict_rows(&values)
}

/// Seeded stratified partition: every trial lands in exactly one fold and
/// per-fold class counts differ by at most one from proportionality.
pub fn stratified_folds(
    labels: &[ClassLabel],
    label_set: &[ClassLabel],
    n_folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::domain("need at least 2 folds"));
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    for class in label_set {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| *l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < n_folds {
            return Err(Error::domain(format!(
                "class '{class}' has {} trials, fewer than {n_folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(rng);
        // contiguous chunks, sizes differing by at most one
        let base = idx.len() / n_folds;
        let extra = idx.len() % n_folds;
        let mut cursor = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let take = base + usize::from(f < extra);
            fold.extend_from_slice(&idx[cursor..cursor + take]);
            cursor += take;
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

fn sample_std(xs: &[Real], mean: Real) -> Real {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: Real = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (xs.len() - 1) as Real).sqrt()
}

/// Run `n_repetitions` of stratified `n_folds`-fold CV of the configured
/// pipeline, refitting CSP and LDA on every training fold.
pub fn cross_validate(
    epochs: &EpochSet,
    config: &PipelineConfig,
    n_folds: usize,
    n_repetitions: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if epochs.n_trials() == 0 {
        return Err(Error::domain("no epochs to evaluate"));
    }
    let label_set = epochs.label_set();
    let k = label_set.len();
    if k < 2 {
        return Err(Error::domain("need at least 2 classes"));
    }
    let data = band_scatters(epochs, config)?;

    let mut fold_accuracies = Vec::with_capacity(n_folds * n_repetitions);
    let mut rep_means = Vec::with_capacity(n_repetitions);
    let mut confusion = vec![vec![0u64; k]; k];

    for rep in 0..n_repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64 + 1);
        let folds = stratified_folds(&data.labels, &label_set, n_folds, &mut rng)?;
        let mut rep_accs = Vec::with_capacity(n_folds);
        for f in 0..n_folds {
            let test = &folds[f];
            let train: Vec<usize> = (0..epochs.n_trials())
                .filter(|i| !test.contains(i))
                .collect();
            let fitted = fit_fold(&data, &label_set, &train, config)?;
            let preds = predict_fold(&fitted, &data, test)?;
            let mut correct = 0usize;
            for (&i, pred) in test.iter().zip(&preds) {
                let true_ci = label_set.iter().position(|c| c == &data.labels[i]).unwrap();
                let pred_ci = label_set.iter().position(|c| c == pred).unwrap();
                confusion[true_ci][pred_ci] += 1;
                if true_ci == pred_ci {
                    correct += 1;
                }
            }
            let acc = correct as Real / test.len() as Real;
            fold_accuracies.push(acc);
            rep_accs.push(acc);
        }
        rep_means.push(rep_accs.iter().sum::<Real>() / rep_accs.len() as Real);
    }

    let mean = fold_accuracies.iter().sum::<Real>() / fold_accuracies.len() as Real;
    let std = sample_std(&fold_accuracies, mean);
    let rep_mean = rep_means.iter().sum::<Real>() / rep_means.len() as Real;
    let repetition_std = sample_std(&rep_means, rep_mean);

    let per_class_recall = label_set
        .iter()
        .enumerate()
        .map(|(ci, label)| {
            let total: u64 = confusion[ci].iter().sum();
            PerClassRecall {
                label: label.0.clone(),
                recall: if total > 0 {
                    confusion[ci][ci] as Real / total as Real
                } else {
                    0.0
                },
            }
        })
        .collect();

    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label_set: label_set.iter().map(|l| l.0.clone()).collect(),
        fold_accuracies,
        mean_accuracy: mean,
        std_accuracy: std,
        repetition_std,
        per_class_recall,
        confusion,
        chance_level: 1.0 / k as Real,
        seed,
        config_echo: config.clone(),
    })
}

/// Table-style text: `MM.MM(±S.SS)%` plus per-class recall lines.
pub fn summarize(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "accuracy: {:.2}(±{:.2})%\n",
        report.mean_accuracy * 100.0,
        report.std_accuracy * 100.0
    ));
    out.push_str(&format!(
        "chance level: {:.2}%\n",
        report.chance_level * 100.0
    ));
    for pc in &report.per_class_recall {
        out.push_str(&format!(
            "recall {}: {:.4} ({:.2}%)\n",
            pc.label,
            pc.recall,
            pc.recall * 100.0
        ));
    }
    out
}

/// Just the `MM.MM(±S.SS)%` cell.
pub fn format_accuracy_cell(mean: Real, std: Real) -> String {
    format!("{:.2}(±{:.2})%", mean * 100.0, std * 100.0)
}
