//! Event-related spectral perturbation maps and their CSV export.
//!
//! Estimator: sliding Hann-window Fourier transform, window length 1 s at the
//! working rate (shortened if the baseline epochs are shorter, so both sides
//! of the ratio share one window), power averaged across trials, then the
//! divisive log baseline `10 log10(P(f, t) / B(f))` sampled at a fixed number
//! of uniformly spaced time points.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::types::EpochSet;
use crate::Real;

/// Channel time-frequency grid of baseline-normalized log power (dB).
#[derive(Debug, Clone)]
pub struct ErspMap<T> {
    pub channel: String,
    pub freqs_hz: Vec<T>,
    pub times_ms: Vec<T>,
    /// `[n_freqs, n_times]`
    pub values_db: ndarray::Array2<T>,
    pub baseline_ms: (T, T),
    /// Frequencies whose period exceeds the baseline length; their baseline
    /// estimate rests on less than one cycle.
    pub flagged_freqs_hz: Vec<T>,
}

/// Baseline power source: a separate epoch set (e.g. rest-phase cuts) or a
/// window inside the analyzed epochs, in ms relative to onset.
pub enum Baseline<'a> {
    Epochs(&'a EpochSet),
    Window(Real, Real),
}

/// Default 1-30 Hz grid, one line per Hz.
pub fn default_freqs() -> Vec<Real> {
    (1..=30).map(|f| f as Real).collect()
}

struct Stft {
    /// `[n_freqs][n_frames]` power, summed over trials in trial order
    power: Vec<Vec<Real>>,
    /// frame centers in ms relative to epoch onset
    centers_ms: Vec<Real>,
    n_trials: usize,
}

fn stft_power(epochs: &EpochSet, channel: usize, freqs: &[Real], win: usize) -> Result<Stft> {
    let fs = epochs.sample_rate_hz();
    let n = epochs.n_epoch_samples();
    if win > n {
        return Err(Error::domain(format!(
            "epoch of {n} samples shorter than the {win}-sample spectral window"
        )));
    }
    let hop = 1.max((n - win) / 256);
    let n_frames = (n - win) / hop + 1;
    let bins: Vec<usize> = freqs
        .iter()
        .map(|&f| (f * win as Real / fs).round() as usize)
        .collect();
    if let Some((i, _)) = bins.iter().enumerate().find(|(_, &b)| b > win / 2) {
        return Err(Error::domain(format!(
            "frequency {} Hz above Nyquist for this window",
            freqs[i]
        )));
    }
    let hann: Vec<Real> = (0..win)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as Real / win as Real).cos()))
        .collect();
    let mut planner = FftPlanner::<Real>::new();
    let fft = planner.plan_fft_forward(win);

    let mut power = vec![vec![0.0 as Real; n_frames]; freqs.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    for t in 0..epochs.n_trials() {
        let trial = epochs.trial(t);
        for frame in 0..n_frames {
            let s0 = frame * hop;
            for i in 0..win {
                buf[i] = Complex::new(trial[[channel, s0 + i]] * hann[i], 0.0);
            }
            fft.process(&mut buf);
            for (fi, &b) in bins.iter().enumerate() {
                power[fi][frame] += buf[b].norm_sqr();
            }
        }
    }
    let centers_ms: Vec<Real> = (0..n_frames)
        .map(|frame| epochs.t0_ms() + ((frame * hop) as Real + win as Real / 2.0) / fs * 1000.0)
        .collect();
    Ok(Stft {
        power,
        centers_ms,
        n_trials: epochs.n_trials(),
    })
}

fn linear_resample(xs: &[Real], ys: &[Real], at: Real) -> Real {
    if at <= xs[0] {
        return ys[0];
    }
    if at >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let mut hi = 1;
    while xs[hi] < at {
        hi += 1;
    }
    let lo = hi - 1;
    let w = (at - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] * (1.0 - w) + ys[hi] * w
}

/// Trial-averaged ERSP of one channel on a `freqs x n_times` grid.
pub fn compute_ersp(
    epochs: &EpochSet,
    baseline: &Baseline<'_>,
    channel_label: &str,
    freqs: &[Real],
    n_times: usize,
) -> Result<ErspMap<Real>> {
    if epochs.n_trials() == 0 {
        return Err(Error::domain("no epochs to analyze"));
    }
    if n_times < 2 {
        return Err(Error::domain("need at least 2 output time points"));
    }
    let channel = epochs.channel_index(channel_label).ok_or_else(|| {
        Error::domain(format!(
            "channel '{channel_label}' not found; available: {}",
            epochs.channel_labels().join(", ")
        ))
    })?;
    let fs = epochs.sample_rate_hz();
    // 1 s window at the working rate, shortened to fit the shorter side
    let mut win = (fs.round() as usize)
        .min(epochs.n_epoch_samples())
        .max(8);
    if let Baseline::Epochs(bl) = baseline {
        win = win.min(bl.n_epoch_samples());
    }
    let stft = stft_power(epochs, channel, freqs, win)?;
    if stft.centers_ms.len() < 2 {
        return Err(Error::domain(
            "analysis epochs too short for more than one spectral frame",
        ));
    }

    let (baseline_mean, baseline_ms): (Vec<Real>, (Real, Real)) = match baseline {
        Baseline::Epochs(bl) => {
            let bch = bl.channel_index(channel_label).ok_or_else(|| {
                Error::domain(format!("channel '{channel_label}' not in baseline epochs"))
            })?;
            let bstft = stft_power(bl, bch, freqs, win)?;
            let nf = bstft.power[0].len() as Real * bstft.n_trials as Real;
            let mean = bstft
                .power
                .iter()
                .map(|row| row.iter().sum::<Real>() / nf)
                .collect();
            let span = (
                bl.t0_ms(),
                bl.t0_ms() + bl.n_epoch_samples() as Real / bl.sample_rate_hz() * 1000.0,
            );
            (mean, span)
        }
        Baseline::Window(a, b) => {
            if !(a < b) {
                return Err(Error::domain("baseline window start must precede end"));
            }
            let idx: Vec<usize> = stft
                .centers_ms
                .iter()
                .enumerate()
                .filter(|(_, &c)| c >= *a && c <= *b)
                .map(|(i, _)| i)
                .collect();
            if idx.is_empty() {
                return Err(Error::domain(format!(
                    "baseline window {a}:{b} ms contains no spectral frames (frame centers span {:.1}:{:.1} ms)",
                    stft.centers_ms[0],
                    stft.centers_ms[stft.centers_ms.len() - 1]
                )));
            }
            let nf = idx.len() as Real * stft.n_trials as Real;
            let mean = stft
                .power
                .iter()
                .map(|row| idx.iter().map(|&i| row[i]).sum::<Real>() / nf)
                .collect();
            (mean, (*a, *b))
        }
    };

    let baseline_len_s = (baseline_ms.1 - baseline_ms.0) / 1000.0;
    let flagged: Vec<Real> = freqs
        .iter()
        .copied()
        .filter(|&f| f > 0.0 && 1.0 / f > baseline_len_s)
        .collect();

    let t_first = stft.centers_ms[0];
    let t_last = stft.centers_ms[stft.centers_ms.len() - 1];
    let times_ms: Vec<Real> = (0..n_times)
        .map(|i| t_first + (t_last - t_first) * i as Real / (n_times - 1) as Real)
        .collect();

    let nt = stft.n_trials as Real;
    let mut values_db = ndarray::Array2::zeros((freqs.len(), n_times));
    for (fi, row) in stft.power.iter().enumerate() {
        let mean_row: Vec<Real> = row.iter().map(|&p| p / nt).collect();
        let b = baseline_mean[fi];
        if !(b > 0.0) {
            return Err(Error::numerical(format!(
                "zero baseline power at {} Hz",
                freqs[fi]
            )));
        }
        for (ti, &at) in times_ms.iter().enumerate() {
            let p = linear_resample(&stft.centers_ms, &mean_row, at);
            values_db[[fi, ti]] = 10.0 * (p / b).log10();
        }
    }

    Ok(ErspMap {
        channel: channel_label.to_string(),
        freqs_hz: freqs.to_vec(),
        times_ms,
        values_db,
        baseline_ms,
        flagged_freqs_hz: flagged,
    })
}

/// Long-format CSV `channel,freq_hz,time_ms,ersp_db`, rows ordered channel
/// then frequency then time, six significant digits, deterministic bytes.
pub fn export_ersp_csv(maps: &[ErspMap<Real>], path: &str) -> Result<()> {
    let mut out = String::from("channel,freq_hz,time_ms,ersp_db\n");
    for m in maps {
        for (fi, &f) in m.freqs_hz.iter().enumerate() {
            for (ti, &t) in m.times_ms.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    m.channel,
                    crate::io::fmt_sig6(f),
                    crate::io::fmt_sig6(t),
                    crate::io::fmt_sig6(m.values_db[[fi, ti]]),
                ));
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
