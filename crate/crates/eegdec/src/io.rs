//! Bit-exact file formats: JSON headers, raw little-endian float32 payloads,
//! events CSV, epoch sets, and evaluation reports.
//!
//! Writers are deterministic: identical inputs give byte-identical outputs.
//! Readers are reentrant; concurrent writes to one path are undefined.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassLabel, EpochSet, Event, Recording};
use crate::Real;

pub const FORMAT_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// `%.6g`-style formatting: six significant digits, '.' decimal separator.
pub fn fmt_sig6(v: Real) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 || exp >= 6 {
        let s = format!("{:.5e}", v);
        // trim trailing zeros in the mantissa
        match s.split_once('e') {
            Some((m, e)) => {
                let m = m.trim_end_matches('0').trim_end_matches('.');
                format!("{m}e{e}")
            }
            None => s,
        }
    } else {
        let prec = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", prec, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// Recording header document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub format_version: u32,
    pub sample_rate_hz: Real,
    pub channel_labels: Vec<String>,
    pub n_samples: usize,
    pub byte_order: String,
    pub sample_encoding: String,
}

fn read_to_string(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &str, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a recording from header JSON, channel-major float32 payload and
/// events CSV. The float32 payload is widened to 64-bit.
pub fn read_recording(header_path: &str, data_path: &str, events_path: &str) -> Result<Recording> {
    let header: RecordingHeader = serde_json::from_str(&read_to_string(header_path)?)
        .map_err(|e| Error::format(header_path, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            header_path,
            format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }
    if header.byte_order != "little-endian" || header.sample_encoding != "float32" {
        return Err(Error::format(
            header_path,
            "payload must be little-endian float32".to_string(),
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for l in &header.channel_labels {
        if !seen.insert(l) {
            return Err(Error::format(
                header_path,
                format!("duplicate channel label '{l}'"),
            ));
        }
    }
    let n_ch = header.channel_labels.len();
    let payload = fs::read(data_path).map_err(|e| Error::io(data_path, e))?;
    let expected = n_ch * header.n_samples * 4;
    if payload.len() != expected {
        return Err(Error::format(
            data_path,
            format!(
                "payload size inconsistent with header: {} bytes, expected {expected}",
                payload.len()
            ),
        ));
    }
    let mut data = ndarray::Array2::zeros((n_ch, header.n_samples));
    for ch in 0..n_ch {
        for s in 0..header.n_samples {
            let off = (ch * header.n_samples + s) * 4;
            let v = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap());
            data[[ch, s]] = v as Real;
        }
    }
    let events = read_events_csv(events_path, header.n_samples)?;
    Recording::new(header.sample_rate_hz, header.channel_labels, data, events)
}

fn read_events_csv(path: &str, n_samples: usize) -> Result<Vec<Event>> {
    let text = read_to_string(path)?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "onset_sample,label" {
                return Err(Error::format(
                    path,
                    format!("line 1: expected header 'onset_sample,label', got '{line}'"),
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (onset_s, label) = line.split_once(',').ok_or_else(|| {
            Error::format(path, format!("line {}: expected 'onset_sample,label'", lineno + 1))
        })?;
        let onset: usize = onset_s.parse().map_err(|_| {
            Error::format(
                path,
                format!("line {}: invalid onset sample '{onset_s}'", lineno + 1),
            )
        })?;
        if onset >= n_samples {
            return Err(Error::format(
                path,
                format!(
                    "line {}: onset {onset} out of range for {n_samples}-sample recording",
                    lineno + 1
                ),
            ));
        }
        if label.is_empty() || !label.chars().all(|c| c.is_ascii_graphic() && c != ',') {
            return Err(Error::format(
                path,
                format!("line {}: invalid label '{label}'", lineno + 1),
            ));
        }
        events.push(Event {
            onset_sample: onset,
            label: ClassLabel::new(label),
        });
    }
    Ok(events)
}

/// Write a recording; samples round to float32, events CSV sorted by onset.
pub fn write_recording(
    rec: &Recording,
    header_path: &str,
    data_path: &str,
    events_path: &str,
) -> Result<()> {
    let header = RecordingHeader {
        format_version: FORMAT_VERSION,
        sample_rate_hz: rec.sample_rate_hz(),
        channel_labels: rec.channel_labels().to_vec(),
        n_samples: rec.n_samples(),
        byte_order: "little-endian".to_string(),
        sample_encoding: "float32".to_string(),
    };
    let header_json = serde_json::to_string_pretty(&header).expect("header serializes");
    write_bytes(header_path, header_json.as_bytes())?;

    let mut payload = Vec::with_capacity(rec.n_channels() * rec.n_samples() * 4);
    for ch in 0..rec.n_channels() {
        for s in 0..rec.n_samples() {
            payload.extend_from_slice(&(rec.data()[[ch, s]] as f32).to_le_bytes());
        }
    }
    write_bytes(data_path, &payload)?;

    let mut csv = String::from("onset_sample,label\n");
    let mut events: Vec<&Event> = rec.events().iter().collect();
    events.sort_by_key(|e| e.onset_sample);
    for e in events {
        csv.push_str(&format!("{},{}\n", e.onset_sample, e.label));
    }
    write_bytes(events_path, csv.as_bytes())
}

/// Epoch-set header document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochHeader {
    pub format_version: u32,
    pub sample_rate_hz: Real,
    pub t0_ms: Real,
    pub n_trials: usize,
    pub n_epoch_samples: usize,
    pub channel_labels: Vec<String>,
    pub labels: Vec<String>,
    pub byte_order: String,
    pub sample_encoding: String,
}

/// Write epochs as `<prefix>.epochs.json` + trial-major float32
/// `<prefix>.epochs.f32`.
pub fn write_epochs(epochs: &EpochSet, prefix: &str) -> Result<()> {
    let header = EpochHeader {
        format_version: FORMAT_VERSION,
        sample_rate_hz: epochs.sample_rate_hz(),
        t0_ms: epochs.t0_ms(),
        n_trials: epochs.n_trials(),
        n_epoch_samples: epochs.n_epoch_samples(),
        channel_labels: epochs.channel_labels().to_vec(),
        labels: epochs.labels().iter().map(|l| l.0.clone()).collect(),
        byte_order: "little-endian".to_string(),
        sample_encoding: "float32".to_string(),
    };
    let hp = format!("{prefix}.epochs.json");
    write_bytes(&hp, serde_json::to_string_pretty(&header).unwrap().as_bytes())?;
    let mut payload =
        Vec::with_capacity(epochs.n_trials() * epochs.n_channels() * epochs.n_epoch_samples() * 4);
    for v in epochs.data().iter() {
        payload.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write_bytes(&format!("{prefix}.epochs.f32"), &payload)
}

pub fn read_epochs(prefix: &str) -> Result<EpochSet> {
    let hp = format!("{prefix}.epochs.json");
    let header: EpochHeader = serde_json::from_str(&read_to_string(&hp)?)
        .map_err(|e| Error::format(&hp, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(&hp, "unsupported format version".to_string()));
    }
    let dp = format!("{prefix}.epochs.f32");
    let payload = fs::read(&dp).map_err(|e| Error::io(&dp, e))?;
    let n_ch = header.channel_labels.len();
    let expected = header.n_trials * n_ch * header.n_epoch_samples * 4;
    if payload.len() != expected {
        return Err(Error::format(
            &dp,
            format!(
                "payload size inconsistent with header: {} bytes, expected {expected}",
                payload.len()
            ),
        ));
    }
    let mut data = ndarray::Array3::zeros((header.n_trials, n_ch, header.n_epoch_samples));
    let mut off = 0usize;
    for v in data.iter_mut() {
        *v = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()) as Real;
        off += 4;
    }
    EpochSet::new(
        data,
        header.labels.into_iter().map(ClassLabel::new).collect(),
        header.channel_labels,
        header.sample_rate_hz,
        header.t0_ms,
    )
}

/// Cross-validation result document. Machine fields are fractions in [0, 1];
/// the percent sign appears only in the human-readable summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub label_set: Vec<String>,
    pub fold_accuracies: Vec<Real>,
    pub mean_accuracy: Real,
    pub std_accuracy: Real,
    /// std of the per-repetition mean accuracies
    pub repetition_std: Real,
    pub per_class_recall: Vec<PerClassRecall>,
    /// counts summed over all repetitions, rows true class, columns predicted
    pub confusion: Vec<Vec<u64>>,
    pub chance_level: Real,
    pub seed: u64,
    pub config_echo: crate::eval::PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassRecall {
    pub label: String,
    pub recall: Real,
}

pub fn write_report(report: &EvaluationReport, path: &str) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_bytes(path, json.as_bytes())
}

pub fn read_report(path: &str) -> Result<EvaluationReport> {
    let report: EvaluationReport = serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::format(
            path,
            format!(
                "report schema version {} unsupported (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            ),
        ));
    }
    Ok(report)
}

/// Helper joining a prefix with the recording file suffixes.
pub fn recording_paths(prefix: &str) -> (String, String, String) {
    (
        format!("{prefix}.json"),
        format!("{prefix}.f32"),
        format!("{prefix}.events.csv"),
    )
}

pub fn path_exists(path: &str) -> bool {
    Path::new(path).exists()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn demo_recording() -> Recording {
        let mut data = Array2::zeros((2, 1000));
        for s in 0..1000 {
            data[[0, s]] = (s as Real * 0.01).sin();
            data[[1, s]] = (s as Real * 0.02).cos();
        }
        Recording::new(
            250.0,
            vec!["C3".into(), "C4".into()],
            data,
            vec![
                Event {
                    onset_sample: 100,
                    label: ClassLabel::new("fabric"),
                },
                Event {
                    onset_sample: 500,
                    label: ClassLabel::new("glass"),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn recording_round_trip_at_float32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec").to_str().unwrap().to_string();
        let (h, d, e) = recording_paths(&p);
        let rec = demo_recording();
        write_recording(&rec, &h, &d, &e).unwrap();
        // payload size: 2 channels x 1000 samples x 4 bytes
        assert_eq!(fs::metadata(&d).unwrap().len(), 8000);
        let back = read_recording(&h, &d, &e).unwrap();
        assert_eq!(back.sample_rate_hz(), 250.0);
        assert_eq!(back.events(), rec.events());
        for (a, b) in rec.data().iter().zip(back.data().iter()) {
            assert_eq!(*a as f32 as Real, *b);
        }
    }

    #[test]
    fn payload_size_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec").to_str().unwrap().to_string();
        let (h, d, e) = recording_paths(&p);
        write_recording(&demo_recording(), &h, &d, &e).unwrap();
        let mut payload = fs::read(&d).unwrap();
        payload.truncate(7996);
        fs::write(&d, payload).unwrap();
        let err = read_recording(&h, &d, &e).unwrap_err();
        assert!(err.to_string().contains("payload size inconsistent"));
    }

    #[test]
    fn out_of_range_event_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec").to_str().unwrap().to_string();
        let (h, d, e) = recording_paths(&p);
        write_recording(&demo_recording(), &h, &d, &e).unwrap();
        fs::write(&e, "onset_sample,label\n1000,fabric\n").unwrap();
        let err = read_recording(&h, &d, &e).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn duplicate_channel_label_rejected_from_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec").to_str().unwrap().to_string();
        let (h, d, e) = recording_paths(&p);
        write_recording(&demo_recording(), &h, &d, &e).unwrap();
        let txt = fs::read_to_string(&h).unwrap().replace("\"C4\"", "\"C3\"");
        fs::write(&h, txt).unwrap();
        let err = read_recording(&h, &d, &e).unwrap_err();
        assert!(err.to_string().contains("duplicate channel label"));
    }

    #[test]
    fn empty_event_list_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec").to_str().unwrap().to_string();
        let (h, d, e) = recording_paths(&p);
        let rec = Recording::new(
            100.0,
            vec!["Cz".into()],
            Array2::zeros((1, 10)),
            vec![],
        )
        .unwrap();
        write_recording(&rec, &h, &d, &e).unwrap();
        assert_eq!(fs::read_to_string(&e).unwrap(), "onset_sample,label\n");
    }

    #[test]
    fn writers_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rec = demo_recording();
        let mut bytes = Vec::new();
        for run in 0..2 {
            let p = dir.path().join(format!("r{run}")).to_str().unwrap().to_string();
            let (h, d, e) = recording_paths(&p);
            write_recording(&rec, &h, &d, &e).unwrap();
            bytes.push((fs::read(&h).unwrap(), fs::read(&d).unwrap(), fs::read(&e).unwrap()));
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn epochs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ep").to_str().unwrap().to_string();
        let data = ndarray::Array3::from_shape_fn((3, 2, 50), |(t, c, s)| {
            ((t * 100 + c * 10 + s) as Real * 0.25).sin()
        });
        let ep = EpochSet::new(
            data,
            vec![
                ClassLabel::new("fabric"),
                ClassLabel::new("glass"),
                ClassLabel::new("fabric"),
            ],
            vec!["C3".into(), "C4".into()],
            250.0,
            500.0,
        )
        .unwrap();
        write_epochs(&ep, &p).unwrap();
        let back = read_epochs(&p).unwrap();
        assert_eq!(back.labels(), ep.labels());
        assert_eq!(back.t0_ms(), 500.0);
        for (a, b) in ep.data().iter().zip(back.data().iter()) {
            assert_eq!(*a as f32 as Real, *b);
        }
    }

    #[test]
    fn report_round_trip_and_version_gate() {
        let report = EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            label_set: vec!["fabric".into(), "glass".into()],
            fold_accuracies: vec![0.70, 0.72, 0.71, 0.69, 0.73],
            mean_accuracy: 0.71,
            std_accuracy: 0.0158113883008419,
            repetition_std: 0.0,
            per_class_recall: vec![
                PerClassRecall {
                    label: "fabric".into(),
                    recall: 0.74,
                },
                PerClassRecall {
                    label: "glass".into(),
                    recall: 0.68,
                },
            ],
            confusion: vec![vec![37, 13], vec![16, 34]],
            chance_level: 0.5,
            seed: 42,
            config_echo: crate::eval::PipelineConfig::default(),
        };
        // mean stored alongside raw folds and recomputable from them
        let m: Real =
            report.fold_accuracies.iter().sum::<Real>() / report.fold_accuracies.len() as Real;
        assert!((m - report.mean_accuracy).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.report.json").to_str().unwrap().to_string();
        write_report(&report, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back, report);

        let txt = fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        fs::write(&path, txt).unwrap();
        assert!(read_report(&path).is_err());
    }

    #[test]
    fn fmt_sig6_examples() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(1.0), "1");
        assert_eq!(fmt_sig6(-3.01029995), "-3.0103");
        assert_eq!(fmt_sig6(123456.0), "123456");
        assert_eq!(fmt_sig6(0.000123456), "0.000123456");
        assert_eq!(fmt_sig6(1234567.0), "1.23457e6");
    }

    proptest! {
        #[test]
        fn fmt_sig6_parses_back_to_six_digits(v in -1e9f64..1e9f64) {
            let s = fmt_sig6(v);
            let back: f64 = s.parse().unwrap();
            let tol = v.abs().max(1e-12) * 1e-5;
            prop_assert!((back - v).abs() <= tol, "{s} vs {v}");
        }

        #[test]
        fn float32_round_trip_loses_only_quantization(v in -1e6f32..1e6f32) {
            let widened = v as Real;
            let bytes = (widened as f32).to_le_bytes();
            let back = f32::from_le_bytes(bytes) as Real;
            prop_assert_eq!(widened, back);
        }
    }
}
