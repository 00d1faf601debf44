//! Sample records, manifests, frame sampling, grouped splits and the
//! synthetic thermal-image generator.

mod frames;
mod manifest;
mod split;
mod synth;

pub use frames::select_frames;
pub use manifest::{load_manifest, parse_manifest, save_manifest, to_csv, MANIFEST_HEADER};
pub use split::split_manifest;
pub use synth::{
    generate_synthetic, render_synthetic, SyntheticParams, CUVETTE_RADIUS, FIELD_LEVEL, IMAGE_SIZE, NOISE_AMPLITUDE,
};

use std::collections::HashSet;
use std::fmt;
use std::path::{Component, Path};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("row {row}: adulteration_pct `{value}` is not one of 0, 10, 25, 50")]
    UnknownLevel { row: usize, value: String },
    #[error("row {row}: duplicate path `{path}` (first seen on row {first})")]
    DuplicatePath { row: usize, first: usize, path: String },
    #[error("row {row}: missing column `{column}`")]
    MissingColumn { row: usize, column: &'static str },
    #[error("row {row}: unexpected column `{column}`")]
    UnexpectedColumn { row: usize, column: String },
    #[error("row {row}: invalid {column} value `{value}`")]
    BadField { row: usize, column: &'static str, value: String },
    #[error("row {row}: path `{path}` must be relative and stay inside the dataset directory")]
    UnsafePath { row: usize, path: String },
    #[error("manifest is empty or has no header")]
    NoHeader,
    #[error("sample `{sample_id}` mixes adulterated and unadulterated records")]
    MixedSample { sample_id: String },
    #[error("class {class} has {found} samples; at least 2 are needed to split")]
    TooFewSamples { class: Label, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Study adulteration levels (percent glucose syrup by weight).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdulterationLevel {
    Pure,
    Pct10,
    Pct25,
    Pct50,
}

impl AdulterationLevel {
    pub const ALL: [AdulterationLevel; 4] = [Self::Pure, Self::Pct10, Self::Pct25, Self::Pct50];

    pub fn percent(self) -> u8 {
        match self {
            Self::Pure => 0,
            Self::Pct10 => 10,
            Self::Pct25 => 25,
            Self::Pct50 => 50,
        }
    }

    pub fn from_percent(pct: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.percent() == pct)
    }

    pub fn label(self) -> Label {
        match self {
            Self::Pure => Label::Unadulterated,
            _ => Label::Adulterated,
        }
    }
}

/// Binary class. Adulterated is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Unadulterated,
    Adulterated,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Adulterated
    }

    /// 0.0 / 1.0 target for the loss.
    pub fn target(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Unadulterated => "unadulterated",
            Label::Adulterated => "adulterated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Unassigned => "unassigned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "unassigned" | "" => Some(Split::Unassigned),
            _ => None,
        }
    }
}

/// One labelled thermal image. The label is always derived from the level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    /// Relative to the manifest's directory.
    pub path: String,
    pub level: AdulterationLevel,
    pub sample_id: String,
    pub split: Split,
    pub augmented: bool,
}

impl SampleRecord {
    pub fn label(&self) -> Label {
        self.level.label()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    /// Free-text header lines (source, seed, tool version).
    pub provenance: Vec<String>,
}

impl Manifest {
    pub fn new(records: Vec<SampleRecord>) -> Self {
        Self {
            records,
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (unadulterated, adulterated) record counts.
    pub fn class_counts(&self) -> (usize, usize) {
        self.records.iter().fold((0, 0), |(n, p), r| {
            if r.label().is_positive() {
                (n, p + 1)
            } else {
                (n + 1, p)
            }
        })
    }

    /// Record counts per adulteration level in [`AdulterationLevel::ALL`] order.
    pub fn level_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for r in &self.records {
            counts[AdulterationLevel::ALL.iter().position(|&l| l == r.level).expect("known level")] += 1;
        }
        counts
    }

    /// Records in the given fold.
    pub fn fold(&self, split: Split) -> Manifest {
        Manifest {
            records: self.records.iter().filter(|r| r.split == split).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Checks path uniqueness and path safety; errors carry 1-based record numbers.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if !is_safe_relative(&r.path) {
                return Err(DatasetError::UnsafePath { row: i + 1, path: r.path.clone() });
            }
            if let Some(first) = seen.insert(r.path.as_str(), i + 1) {
                return Err(DatasetError::DuplicatePath {
                    row: i + 1,
                    first,
                    path: r.path.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn sample_ids(&self) -> HashSet<&str> {
        self.records.iter().map(|r| r.sample_id.as_str()).collect()
    }
}

/// Relative, no `..`, non-empty, no commas (the CSV has no quoting).
pub fn is_safe_relative(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty()
        && !path.contains(',')
        && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_derivation_is_total() {
        for l in AdulterationLevel::ALL {
            assert_eq!(l.label() == Label::Unadulterated, l.percent() == 0);
            assert_eq!(AdulterationLevel::from_percent(l.percent()), Some(l));
        }
        assert_eq!(AdulterationLevel::from_percent(30), None);
    }

    #[test]
    fn path_safety() {
        assert!(is_safe_relative("img/a.ppm"));
        assert!(!is_safe_relative("/etc/passwd"));
        assert!(!is_safe_relative("../x.ppm"));
        assert!(!is_safe_relative("a,b.ppm"));
        assert!(!is_safe_relative(""));
    }
}
