//! Per-point selection masks and their index-list file format:
//! a `n=<count>` line followed by one ascending selected index per line.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaskFileError {
    #[error("mask has {actual} entries but the cloud has {expected} points")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("malformed mask file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("mask i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// One selection bit per point of a cloud.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PointMask {
    bits: Vec<bool>,
}

impl PointMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    /// Builds a mask of `len` bits with the given indices set. Indices
    /// past the end are ignored.
    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; len];
        for i in indices {
            if let Some(b) = bits.get_mut(i) {
                *b = true;
            }
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits.get(index).copied().unwrap_or(false)
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn count_selected(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Selected indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Renders the mask file text.
    pub fn to_file_string(&self) -> String {
        let mut s = format!("n={}\n", self.len());
        for i in self.indices() {
            let _ = writeln!(s, "{i}");
        }
        s
    }
}

/// Parses mask file text.
pub fn parse_point_mask(text: &str) -> Result<PointMask, MaskFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (line, first) = lines.next().ok_or(MaskFileError::Malformed {
        line: 1,
        reason: "missing `n=` header".into(),
    })?;
    let n: usize = first
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| MaskFileError::Malformed {
            line,
            reason: format!("expected `n=<count>`, found `{first}`"),
        })?;

    let mut bits = vec![false; n];
    let mut previous: Option<usize> = None;
    for (line, entry) in lines {
        if entry.is_empty() {
            continue;
        }
        let idx: usize = entry.parse().map_err(|_| MaskFileError::Malformed {
            line,
            reason: format!("not an index: `{entry}`"),
        })?;
        if idx >= n {
            return Err(MaskFileError::Malformed {
                line,
                reason: format!("index {idx} out of range for n={n}"),
            });
        }
        if previous.is_some_and(|p| idx <= p) {
            return Err(MaskFileError::Malformed {
                line,
                reason: "indices must be strictly ascending".into(),
            });
        }
        previous = Some(idx);
        bits[idx] = true;
    }
    Ok(PointMask { bits })
}

/// Writes `mask` after checking it covers exactly `cloud_len` points.
pub fn save_point_mask(mask: &PointMask, cloud_len: usize, path: &Path) -> Result<(), MaskFileError> {
    if mask.len() != cloud_len {
        return Err(MaskFileError::LengthMismatch {
            expected: cloud_len,
            actual: mask.len(),
        });
    }
    std::fs::write(path, mask.to_file_string())?;
    Ok(())
}

pub fn load_point_mask(path: &Path) -> Result<PointMask, MaskFileError> {
    parse_point_mask(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_lists_selected_indices() {
        let mask = PointMask::new(vec![true, false, true]);
        assert_eq!(mask.to_file_string(), "n=3\n0\n2\n");
        assert_eq!(parse_point_mask("n=3\n0\n2\n").unwrap(), mask);
    }

    #[test]
    fn all_zero_mask_records_n() {
        let mask = PointMask::empty(4);
        assert_eq!(mask.to_file_string(), "n=4\n");
        assert_eq!(parse_point_mask("n=4\n").unwrap(), mask);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mask = PointMask::new(vec![true, false, true]);
        let err = save_point_mask(&mask, 4, &dir.path().join("m.txt")).unwrap_err();
        assert!(matches!(err, MaskFileError::LengthMismatch { expected: 4, actual: 3 }));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.txt");
        let mask = PointMask::from_indices(10, [1, 4, 9]);
        save_point_mask(&mask, 10, &path).unwrap();
        assert_eq!(load_point_mask(&path).unwrap(), mask);
    }

    #[test]
    fn malformed_files() {
        assert!(parse_point_mask("").is_err());
        assert!(parse_point_mask("count=3\n").is_err());
        assert!(parse_point_mask("n=3\n3\n").is_err());
        assert!(parse_point_mask("n=3\n2\n1\n").is_err());
        assert!(parse_point_mask("n=3\nx\n").is_err());
    }
}
