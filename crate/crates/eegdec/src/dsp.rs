//! IIR filter design and zero-phase application, decimation, epoching.
//!
//! Designs go through the analog Butterworth prototype and the bilinear
//! transform with frequency pre-warping, so magnitudes can be checked against
//! the closed-form Butterworth response. Offline application is always
//! zero-phase (forward-backward); the single-pass -3 dB corners become -6 dB
//! after the squared magnitude.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scalar::Scalar;
use crate::types::{EpochSet, Event, Recording};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bandpass,
    Notch,
    Lowpass,
}

#[derive(Debug, Clone)]
pub struct DesignMeta<T> {
    pub kind: FilterKind,
    pub order: usize,
    pub corner_hz: Vec<T>,
    pub fs_hz: T,
}

/// Digital IIR filter in transfer-function form, `a[0] == 1`.
#[derive(Debug, Clone)]
pub struct IirFilter<T> {
    pub b: Vec<T>,
    pub a: Vec<T>,
    pub design_meta: DesignMeta<T>,
}

impl<T: Scalar> IirFilter<T> {
    /// Magnitude response |H(e^{j 2 pi f / fs})| at frequency `f_hz`.
    pub fn magnitude_at(&self, f_hz: T) -> T {
        let w = T::from_f64_lit(2.0 * std::f64::consts::PI) * f_hz / self.design_meta.fs_hz;
        let z = Complex::new(w.cos(), -w.sin()); // e^{-jw}
        let num = polyval_z(&self.b, z);
        let den = polyval_z(&self.a, z);
        (num / den).norm()
    }

    /// Magnitude response in dB.
    pub fn magnitude_db_at(&self, f_hz: T) -> T {
        let m = self.magnitude_at(f_hz);
        T::from_f64_lit(20.0) * m.log10()
    }

    /// Moduli of the denominator roots, found independently of the design
    /// path with a Durand-Kerner iteration. A stable filter has all of them
    /// strictly inside the unit circle.
    pub fn pole_moduli(&self) -> Vec<T> {
        let a64: Vec<f64> = self.a.iter().map(|&x| x.to_f64().unwrap()).collect();
        poly_roots(&a64)
            .into_iter()
            .map(|r| T::from_f64_lit(r.norm()))
            .collect()
    }

    pub fn max_pole_modulus(&self) -> T {
        self.pole_moduli()
            .into_iter()
            .fold(T::zero(), |acc, m| if m > acc { m } else { acc })
    }
}

/// Horner evaluation of `sum c[k] z^k` (coefficients in delay order, so
/// `z = e^{-jw}` gives the frequency response numerator/denominator).
fn polyval_z<T: Scalar>(coeffs: &[T], z: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &c in coeffs.iter().rev() {
        acc = acc * z + Complex::new(c, T::zero());
    }
    acc
}

/// Durand-Kerner roots, in z, of a filter polynomial given in delay order
/// (`c[0] + c[1] z^-1 + ...`). Multiplying through by z^n turns this into
/// `c[0] z^n + c[1] z^{n-1} + ... + c[n]`, whose roots are the poles/zeros.
fn poly_roots(coeffs: &[T64]) -> Vec<Complex<f64>> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[0];
    // monic in z: z^n + (a1/a0) z^{n-1} + ...
    let monic: Vec<f64> = c.iter().map(|&x| x / lead).collect();
    let eval = |z: Complex<f64>| -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for &co in &monic {
            acc = acc * z + co;
        }
        acc
    };
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|k| Complex::from_polar(0.7, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.5))
        .collect();
    for _ in 0..200 {
        let mut delta = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}

type T64 = f64;

fn check_corner<T: Scalar>(f: T, fs: T, what: &str) -> Result<()> {
    let nyq = fs / T::from_f64_lit(2.0);
    if !(f > T::zero() && f < nyq) {
        return Err(Error::domain(format!(
            "{what} frequency {f} Hz outside (0, {nyq}) Hz at fs {fs} Hz"
        )));
    }
    Ok(())
}

/// Analog Butterworth lowpass prototype poles (unit cutoff, left half-plane).
fn butter_prototype(order: usize) -> Vec<Complex<f64>> {
    (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + order as f64 + 1.0)
                / (2.0 * order as f64);
            Complex::from_polar(1.0, theta)
        })
        .collect()
}

/// Bilinear transform of an analog zero/pole/gain system at sample rate `fs`.
/// Returns digital (zeros, poles, gain).
fn bilinear_zpk(
    zeros: &[Complex<f64>],
    poles: &[Complex<f64>],
    gain: f64,
    fs: f64,
) -> (Vec<Complex<f64>>, Vec<Complex<f64>>, f64) {
    let fs2 = Complex::new(2.0 * fs, 0.0);
    let zd: Vec<Complex<f64>> = zeros.iter().map(|&z| (fs2 + z) / (fs2 - z)).collect();
    let pd: Vec<Complex<f64>> = poles.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
    let num: Complex<f64> = zeros.iter().fold(Complex::new(1.0, 0.0), |acc, &z| acc * (fs2 - z));
    let den: Complex<f64> = poles.iter().fold(Complex::new(1.0, 0.0), |acc, &p| acc * (fs2 - p));
    let kd = gain * (num / den).re;
    // degree deficit maps zeros at analog infinity to z = -1
    let mut zd = zd;
    while zd.len() < pd.len() {
        zd.push(Complex::new(-1.0, 0.0));
    }
    (zd, pd, kd)
}

/// Expand zero/pole/gain into transfer-function coefficients, `a[0] == 1`.
fn zpk_to_tf(zeros: &[Complex<f64>], poles: &[Complex<f64>], gain: f64) -> (Vec<f64>, Vec<f64>) {
    let poly = |roots: &[Complex<f64>]| -> Vec<f64> {
        let mut c = vec![Complex::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i] += ci;
                next[i + 1] -= ci * r;
            }
            c = next;
        }
        c.into_iter().map(|x| x.re).collect()
    };
    let mut b = poly(zeros);
    let a = poly(poles);
    for x in b.iter_mut() {
        *x *= gain;
    }
    (b, a)
}

fn to_scalar_filter<T: Scalar>(
    b: Vec<f64>,
    a: Vec<f64>,
    meta: DesignMeta<T>,
) -> IirFilter<T> {
    IirFilter {
        b: b.into_iter().map(T::from_f64_lit).collect(),
        a: a.into_iter().map(T::from_f64_lit).collect(),
        design_meta: meta,
    }
}

/// Butterworth bandpass via analog prototype + lowpass-to-bandpass transform
/// + bilinear with pre-warped corners. Single-pass magnitude at each corner
/// is -3.01 dB.
pub fn design_butterworth_bandpass<T: Scalar>(
    order: usize,
    low_hz: T,
    high_hz: T,
    fs_hz: T,
) -> Result<IirFilter<T>> {
    if order < 1 || order > 8 {
        return Err(Error::domain(format!("order {order} outside [1, 8]")));
    }
    check_corner(low_hz, fs_hz, "low corner")?;
    check_corner(high_hz, fs_hz, "high corner")?;
    if !(low_hz < high_hz) {
        return Err(Error::domain("low corner must be below high corner"));
    }
    let fs = fs_hz.to_f64().unwrap();
    let warp = |f: f64| 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
    let w1 = warp(low_hz.to_f64().unwrap());
    let w2 = warp(high_hz.to_f64().unwrap());
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let proto = butter_prototype(order);
    let mut poles = Vec::with_capacity(2 * order);
    for p in proto {
        let ps = p * (bw / 2.0);
        let disc = (ps * ps - Complex::new(w0 * w0, 0.0)).sqrt();
        poles.push(ps + disc);
        poles.push(ps - disc);
    }
    let zeros = vec![Complex::new(0.0, 0.0); order];
    let gain = bw.powi(order as i32);

    let (zd, pd, kd) = bilinear_zpk(&zeros, &poles, gain, fs);
    let (b, a) = zpk_to_tf(&zd, &pd, kd);
    let a0 = a[0];
    let b: Vec<f64> = b.into_iter().map(|x| x / a0).collect();
    let a: Vec<f64> = a.into_iter().map(|x| x / a0).collect();
    Ok(to_scalar_filter(
        b,
        a,
        DesignMeta {
            kind: FilterKind::Bandpass,
            order,
            corner_hz: vec![low_hz, high_hz],
            fs_hz,
        },
    ))
}

/// Butterworth lowpass, used as the decimation anti-alias filter.
pub fn design_butterworth_lowpass<T: Scalar>(
    order: usize,
    corner_hz: T,
    fs_hz: T,
) -> Result<IirFilter<T>> {
    if order < 1 || order > 8 {
        return Err(Error::domain(format!("order {order} outside [1, 8]")));
    }
    check_corner(corner_hz, fs_hz, "corner")?;
    let fs = fs_hz.to_f64().unwrap();
    let wc = 2.0 * fs * (std::f64::consts::PI * corner_hz.to_f64().unwrap() / fs).tan();
    let poles: Vec<Complex<f64>> = butter_prototype(order).into_iter().map(|p| p * wc).collect();
    let gain = wc.powi(order as i32);
    let (zd, pd, kd) = bilinear_zpk(&[], &poles, gain, fs);
    let (b, a) = zpk_to_tf(&zd, &pd, kd);
    let a0 = a[0];
    let b: Vec<f64> = b.into_iter().map(|x| x / a0).collect();
    let a: Vec<f64> = a.into_iter().map(|x| x / a0).collect();
    Ok(to_scalar_filter(
        b,
        a,
        DesignMeta {
            kind: FilterKind::Lowpass,
            order,
            corner_hz: vec![corner_hz],
            fs_hz,
        },
    ))
}

/// Second-order IIR notch (biquad), unity gain away from the center.
pub fn design_notch<T: Scalar>(center_hz: T, q: T, fs_hz: T) -> Result<IirFilter<T>> {
    check_corner(center_hz, fs_hz, "center")?;
    if !(q > T::zero()) {
        return Err(Error::domain("notch Q must be positive"));
    }
    let f0 = center_hz.to_f64().unwrap();
    let fs = fs_hz.to_f64().unwrap();
    let qv = q.to_f64().unwrap();
    let w0 = 2.0 * std::f64::consts::PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * qv);
    let cw = w0.cos();
    let a0 = 1.0 + alpha;
    let b = vec![1.0 / a0, -2.0 * cw / a0, 1.0 / a0];
    let a = vec![1.0, -2.0 * cw / a0, (1.0 - alpha) / a0];
    Ok(to_scalar_filter(
        b,
        a,
        DesignMeta {
            kind: FilterKind::Notch,
            order: 2,
            corner_hz: vec![center_hz],
            fs_hz,
        },
    ))
}

/// Direct-form II transposed filtering with initial state `zi` scaled by the
/// caller (pass zeros for a cold start).
fn lfilter<T: Scalar>(b: &[T], a: &[T], x: &[T], zi: &[T]) -> Vec<T> {
    let n = b.len().max(a.len());
    let mut bb = b.to_vec();
    let mut aa = a.to_vec();
    bb.resize(n, T::zero());
    aa.resize(n, T::zero());
    let mut z = zi.to_vec();
    z.resize(n - 1, T::zero());
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = bb[0] * xi + if n > 1 { z[0] } else { T::zero() };
        for k in 0..n.saturating_sub(2) {
            z[k] = bb[k + 1] * xi + z[k + 1] - aa[k + 1] * yi;
        }
        if n > 1 {
            z[n - 2] = bb[n - 1] * xi - aa[n - 1] * yi;
        }
        y.push(yi);
    }
    y
}

/// Steady-state initial conditions for a unit step input, so the filter
/// startup transient vanishes for constant signals.
fn lfilter_zi<T: Scalar>(b: &[T], a: &[T]) -> Result<Vec<T>> {
    let n = b.len().max(a.len());
    if n < 2 {
        return Ok(Vec::new());
    }
    let mut bb = b.to_vec();
    let mut aa = a.to_vec();
    bb.resize(n, T::zero());
    aa.resize(n, T::zero());
    let m = n - 1;
    // (I - companion(a)^T) zi = b[1:] - a[1:] * b[0]
    let mut mat = Array2::<T>::eye(m);
    for r in 0..m {
        mat[[r, 0]] = mat[[r, 0]] + aa[r + 1];
    }
    for r in 0..m.saturating_sub(1) {
        mat[[r, r + 1]] = mat[[r, r + 1]] - T::one();
    }
    let rhs = Array1::from_iter((0..m).map(|r| bb[r + 1] - aa[r + 1] * bb[0]));
    let zi = solve_dense(&mat, &rhs)?;
    Ok(zi.to_vec())
}

/// Zero-phase forward-backward filtering with odd reflective edge padding.
pub fn filtfilt<T: Scalar>(f: &IirFilter<T>, x: &[T]) -> Result<Vec<T>> {
    let ntaps = f.b.len().max(f.a.len());
    let padlen = 3 * ntaps;
    if x.len() <= padlen {
        return Err(Error::domain(format!(
            "input of {} samples too short for zero-phase filtering; need more than {padlen}",
            x.len()
        )));
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    let two = T::from_f64_lit(2.0);
    for i in (1..=padlen).rev() {
        ext.push(two * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(two * x[n - 1] - x[n - 1 - i]);
    }
    let zi = lfilter_zi(&f.b, &f.a)?;
    let scale = |z: &[T], x0: T| -> Vec<T> { z.iter().map(|&v| v * x0).collect() };

    let fwd = lfilter(&f.b, &f.a, &ext, &scale(&zi, ext[0]));
    let mut rev: Vec<T> = fwd.into_iter().rev().collect();
    rev = lfilter(&f.b, &f.a, &rev, &scale(&zi, rev[0]));
    let mut out: Vec<T> = rev.into_iter().rev().collect();
    out.drain(..padlen);
    out.truncate(n);
    Ok(out)
}

/// Zero-phase filter every channel of a trial matrix `[n_channels, n_samples]`.
pub fn filtfilt_matrix<T: Scalar>(f: &IirFilter<T>, x: &ndarray::ArrayView2<'_, T>) -> Result<Array2<T>> {
    let mut out = Array2::zeros(x.raw_dim());
    for (ch, row) in x.outer_iter().enumerate() {
        let v: Vec<T> = row.to_vec();
        let y = filtfilt(f, &v)?;
        out.row_mut(ch).assign(&Array1::from(y));
    }
    Ok(out)
}

/// Anti-alias lowpass (Butterworth order 8, corner 0.4 x new Nyquist,
/// zero-phase) then keep every `factor`-th sample. Events remap to
/// `floor(onset / factor)`; events landing past the shortened recording are
/// dropped.
pub fn decimate(rec: &Recording, factor: usize) -> Result<Recording> {
    if factor < 1 {
        return Err(Error::domain("decimation factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(rec.clone());
    }
    let n_out = rec.n_samples() / factor;
    if n_out < 1 {
        return Err(Error::domain("decimation factor exceeds recording length"));
    }
    let new_fs = rec.sample_rate_hz() / factor as Real;
    let corner = 0.4 * new_fs / 2.0;
    let aa = design_butterworth_lowpass::<Real>(8, corner, rec.sample_rate_hz())?;
    let mut data = Array2::zeros((rec.n_channels(), n_out));
    for (ch, row) in rec.data().outer_iter().enumerate() {
        let v: Vec<Real> = row.to_vec();
        let y = filtfilt(&aa, &v)?;
        for i in 0..n_out {
            data[[ch, i]] = y[i * factor];
        }
    }
    let events: Vec<Event> = rec
        .events()
        .iter()
        .filter_map(|e| {
            let onset = e.onset_sample / factor;
            (onset < n_out).then(|| Event {
                onset_sample: onset,
                label: e.label.clone(),
            })
        })
        .collect();
    rec.with_parts(new_fs, data, events)
}

/// Cut one epoch per event whose label is in `label_set` and whose full
/// window lies inside the recording. Returns the epochs and the number of
/// dropped (out-of-bounds) events.
pub fn extract_epochs(
    rec: &Recording,
    window_ms: (Real, Real),
    label_set: &[crate::types::ClassLabel],
) -> Result<(EpochSet, usize)> {
    let (start_ms, end_ms) = window_ms;
    if !(start_ms < end_ms) {
        return Err(Error::domain("epoch window start must precede end"));
    }
    if label_set.is_empty() {
        return Err(Error::domain("label set must not be empty"));
    }
    let fs = rec.sample_rate_hz();
    let start_off = (start_ms * fs / 1000.0).round() as i64;
    let end_off = (end_ms * fs / 1000.0).round() as i64;
    let n_ep = (end_off - start_off) as usize;
    let n = rec.n_samples() as i64;

    let mut kept = Vec::new();
    let mut dropped = 0usize;
    for e in rec.events() {
        if !label_set.contains(&e.label) {
            continue;
        }
        let s0 = e.onset_sample as i64 + start_off;
        let s1 = s0 + n_ep as i64;
        if s0 < 0 || s1 > n {
            dropped += 1;
            continue;
        }
        kept.push((s0 as usize, e.label.clone()));
    }
    if kept.is_empty() {
        return Err(Error::domain("no epochs extracted: every event dropped or filtered"));
    }
    let mut data = ndarray::Array3::zeros((kept.len(), rec.n_channels(), n_ep));
    let mut labels = Vec::with_capacity(kept.len());
    for (t, (s0, label)) in kept.into_iter().enumerate() {
        data.index_axis_mut(ndarray::Axis(0), t)
            .assign(&rec.data().slice(ndarray::s![.., s0..s0 + n_ep]));
        labels.push(label);
    }
    let epochs = EpochSet::new(
        data,
        labels,
        rec.channel_labels().to_vec(),
        fs,
        start_ms,
    )?;
    Ok((epochs, dropped))
}
