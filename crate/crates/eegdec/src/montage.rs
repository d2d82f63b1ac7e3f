//! 64-channel 10/20-extended scalp layout projected onto the unit disc.
//!
//! Coordinates are a schematic top view (nose up, left ear at negative x),
//! good enough to drive topography exports and spatial source mixing; they
//! are not digitized electrode positions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::Real;

/// Map channel label -> (x, y) within the unit disc.
#[derive(Debug, Clone)]
pub struct Montage {
    positions: BTreeMap<String, (Real, Real)>,
}

/// Standard 64 labels of a 10/20-extended cap with FCz used as reference
/// (hence absent).
pub const STANDARD_64_LABELS: [&str; 64] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz",
    "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7", "P3", "Pz", "P4", "P8", "PO9",
    "O1", "Oz", "O2", "PO10", "AF7", "AF3", "AF4", "AF8", "F5", "F1", "F2", "F6", "FT9", "FT7",
    "FC3", "FC4", "FT8", "FT10", "C5", "C1", "C2", "C6", "TP7", "CP3", "CPz", "CP4", "TP8", "P5",
    "P1", "P2", "P6", "PO7", "PO3", "POz", "PO4", "PO8",
];

fn grid_position(label: &str) -> Option<(Real, Real)> {
    // split into row prefix and column token
    let split = label.find(|c: char| c.is_ascii_digit() || c == 'z')?;
    let (row, col) = label.split_at(split);
    let y = match row {
        "Fp" => 0.8,
        "AF" => 0.6,
        "F" => 0.4,
        "FT" | "FC" => 0.2,
        "T" | "C" => 0.0,
        "TP" | "CP" => -0.2,
        "P" => -0.4,
        "PO" => -0.6,
        "O" => -0.8,
        _ => return None,
    };
    let x = if col == "z" {
        0.0
    } else {
        let d: u32 = col.parse().ok()?;
        let mag = ((d + 1) / 2) as Real * 0.2;
        if d % 2 == 1 {
            -mag
        } else {
            mag
        }
    };
    Some((x, y))
}

impl Montage {
    /// The 64-channel standard layout.
    pub fn standard_64() -> Montage {
        let mut positions = BTreeMap::new();
        for label in STANDARD_64_LABELS {
            let (x, y) = grid_position(label).expect("standard label parses");
            // pull outliers back onto the disc
            let r = (x * x + y * y).sqrt();
            let (x, y) = if r > 0.98 {
                (x * 0.98 / r, y * 0.98 / r)
            } else {
                (x, y)
            };
            positions.insert(label.to_string(), (x, y));
        }
        Montage { positions }
    }

    pub fn position(&self, label: &str) -> Option<(Real, Real)> {
        self.positions.get(label).copied()
    }

    pub fn require(&self, label: &str) -> Result<(Real, Real)> {
        self.position(label)
            .ok_or_else(|| Error::domain(format!("channel '{label}' not in montage")))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.positions.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Euclidean distance between two montage positions.
    pub fn distance(&self, a: &str, b: &str) -> Option<Real> {
        let (ax, ay) = self.position(a)?;
        let (bx, by) = self.position(b)?;
        Some(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt())
    }
}
