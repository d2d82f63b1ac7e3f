//! Core domain types: recordings, events, epochs, class labels.
//!
//! All types are immutable after construction and safe for concurrent reads.

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::Real;

/// Class label drawn from a dataset-declared label set. Comparison is exact
/// string equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(pub String);

impl ClassLabel {
    pub fn new(name: impl Into<String>) -> Self {
        ClassLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel(s.to_string())
    }
}

/// Canonical demo label set.
pub fn demo_label_set() -> Vec<ClassLabel> {
    ["fabric", "glass", "paper", "fur"]
        .iter()
        .map(|s| ClassLabel::new(*s))
        .collect()
}

/// Cue marker: sample index of the event onset plus its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub onset_sample: usize,
    pub label: ClassLabel,
}

/// Continuous multi-channel recording in microvolts.
///
/// Channel order is authoritative from the header; nothing downstream
/// reorders channels.
#[derive(Debug, Clone)]
pub struct Recording {
    sample_rate_hz: Real,
    channel_labels: Vec<String>,
    /// `[n_channels, n_samples]`
    data: Array2<Real>,
    events: Vec<Event>,
}

/// One invariant violation found by [`validate_recording`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Recording {
    /// Validating constructor. Rejects any input that fails
    /// [`validate_recording`] on the assembled value.
    pub fn new(
        sample_rate_hz: Real,
        channel_labels: Vec<String>,
        data: Array2<Real>,
        mut events: Vec<Event>,
    ) -> Result<Self> {
        events.sort_by_key(|e| e.onset_sample);
        let rec = Recording {
            sample_rate_hz,
            channel_labels,
            data,
            events,
        };
        let violations = validate_recording(&rec);
        if let Some(v) = violations.first() {
            return Err(Error::domain(format!("invalid recording: {v}")));
        }
        Ok(rec)
    }

    pub fn sample_rate_hz(&self) -> Real {
        self.sample_rate_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, Real> {
        self.data.view()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    /// Rebuild with new data/rate/events, keeping channel labels. Used by the
    /// dsp stage; revalidates.
    pub fn with_parts(
        &self,
        sample_rate_hz: Real,
        data: Array2<Real>,
        events: Vec<Event>,
    ) -> Result<Self> {
        Recording::new(
            sample_rate_hz,
            self.channel_labels.clone(),
            data,
            events,
        )
    }
}

/// Reports every invariant violation of a recording-shaped value. Never
/// mutates, never errors: an empty list means valid.
pub fn validate_recording(rec: &Recording) -> Vec<Violation> {
    let mut out = Vec::new();
    if rec.data.nrows() != rec.channel_labels.len() {
        out.push(Violation {
            field: "channel_labels",
            message: format!(
                "data has {} channels but {} labels",
                rec.data.nrows(),
                rec.channel_labels.len()
            ),
        });
    }
    for (i, a) in rec.channel_labels.iter().enumerate() {
        if rec.channel_labels[..i].iter().any(|b| b == a) {
            out.push(Violation {
                field: "channel_labels",
                message: format!("duplicate channel label '{a}' at index {i}"),
            });
        }
    }
    if !(rec.sample_rate_hz > 0.0) {
        out.push(Violation {
            field: "sample_rate_hz",
            message: format!("sample rate must be positive, got {}", rec.sample_rate_hz),
        });
    }
    for ((ch, s), v) in rec.data.indexed_iter() {
        if !v.is_finite() {
            out.push(Violation {
                field: "data",
                message: format!("non-finite sample at channel {ch}, sample {s}"),
            });
        }
    }
    let n = rec.data.ncols();
    for (i, w) in rec.events.windows(2).enumerate() {
        if w[1].onset_sample < w[0].onset_sample {
            out.push(Violation {
                field: "events",
                message: format!("events not sorted by onset at index {}", i + 1),
            });
        }
    }
    for (i, e) in rec.events.iter().enumerate() {
        if e.onset_sample >= n {
            out.push(Violation {
                field: "events",
                message: format!(
                    "event {i} onset {} outside recording of {n} samples",
                    e.onset_sample
                ),
            });
        }
    }
    out
}

/// Trials x channels x samples tensor with per-trial labels.
#[derive(Debug, Clone)]
pub struct EpochSet {
    /// `[n_trials, n_channels, n_epoch_samples]`
    data: Array3<Real>,
    labels: Vec<ClassLabel>,
    channel_labels: Vec<String>,
    sample_rate_hz: Real,
    /// Time of the first epoch sample relative to event onset, in ms.
    t0_ms: Real,
}

impl EpochSet {
    pub fn new(
        data: Array3<Real>,
        labels: Vec<ClassLabel>,
        channel_labels: Vec<String>,
        sample_rate_hz: Real,
        t0_ms: Real,
    ) -> Result<Self> {
        if data.dim().0 != labels.len() {
            return Err(Error::shape(format!(
                "{} trials but {} labels",
                data.dim().0,
                labels.len()
            )));
        }
        if data.dim().1 != channel_labels.len() {
            return Err(Error::shape(format!(
                "{} channels but {} channel labels",
                data.dim().1,
                channel_labels.len()
            )));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::domain("sample rate must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("epoch data contains non-finite samples"));
        }
        Ok(EpochSet {
            data,
            labels,
            channel_labels,
            sample_rate_hz,
            t0_ms,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_epoch_samples(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<Real> {
        &self.data
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn sample_rate_hz(&self) -> Real {
        self.sample_rate_hz
    }

    pub fn t0_ms(&self) -> Real {
        self.t0_ms
    }

    pub fn trial(&self, i: usize) -> ArrayView2<'_, Real> {
        self.data.index_axis(ndarray::Axis(0), i)
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    /// Distinct labels in first-appearance order.
    pub fn label_set(&self) -> Vec<ClassLabel> {
        let mut set = Vec::new();
        for l in &self.labels {
            if !set.contains(l) {
                set.push(l.clone());
            }
        }
        set
    }

    /// Subset of trials by index, preserving order.
    pub fn select_trials(&self, indices: &[usize]) -> EpochSet {
        let (_, c, s) = self.data.dim();
        let mut data = Array3::zeros((indices.len(), c, s));
        let mut labels = Vec::with_capacity(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            data.index_axis_mut(ndarray::Axis(0), k)
                .assign(&self.data.index_axis(ndarray::Axis(0), i));
            labels.push(self.labels[i].clone());
        }
        EpochSet {
            data,
            labels,
            channel_labels: self.channel_labels.clone(),
            sample_rate_hz: self.sample_rate_hz,
            t0_ms: self.t0_ms,
        }
    }

    /// Map each trial's channel-major matrix through `f`, keeping labels and
    /// metadata. `f` must preserve shape.
    pub fn map_trials(&self, mut f: impl FnMut(ArrayView2<'_, Real>) -> Array2<Real>) -> EpochSet {
        let mut data = self.data.clone();
        for i in 0..self.n_trials() {
            let out = f(self.trial(i));
            data.index_axis_mut(ndarray::Axis(0), i).assign(&out);
        }
        EpochSet {
            data,
            labels: self.labels.clone(),
            channel_labels: self.channel_labels.clone(),
            sample_rate_hz: self.sample_rate_hz,
            t0_ms: self.t0_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_channel_rec() -> Recording {
        let data = array![[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]];
        Recording::new(
            250.0,
            vec!["C3".into(), "C4".into()],
            data,
            vec![Event {
                onset_sample: 1,
                label: ClassLabel::new("fabric"),
            }],
        )
        .unwrap()
    }

    #[test]
    fn well_formed_recording_validates_clean() {
        let rec = two_channel_rec();
        assert!(validate_recording(&rec).is_empty());
    }

    #[test]
    fn nan_sample_names_channel_and_index() {
        let mut rec = two_channel_rec();
        rec.data[[1, 2]] = Real::NAN;
        let v = validate_recording(&rec);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("channel 1"));
        assert!(v[0].message.contains("sample 2"));
    }

    #[test]
    fn unsorted_events_flagged_with_index() {
        let mut rec = two_channel_rec();
        rec.events = vec![
            Event {
                onset_sample: 3,
                label: ClassLabel::new("glass"),
            },
            Event {
                onset_sample: 1,
                label: ClassLabel::new("fabric"),
            },
        ];
        let v = validate_recording(&rec);
        assert!(v.iter().any(|x| x.message.contains("not sorted")));
        assert!(v.iter().any(|x| x.message.contains("index 1")));
    }

    #[test]
    fn out_of_range_event_rejected_at_construction() {
        let data = Array2::zeros((1, 10));
        let err = Recording::new(
            100.0,
            vec!["Cz".into()],
            data,
            vec![Event {
                onset_sample: 10,
                label: ClassLabel::new("fur"),
            }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_channel_label_flagged() {
        let data = Array2::zeros((2, 4));
        let err = Recording::new(100.0, vec!["C3".into(), "C3".into()], data, vec![]);
        assert!(err.is_err());
    }
}
