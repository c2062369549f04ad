//! Run-length coding of binary masks: alternating run lengths in row-major
//! order, always starting with a (possibly zero-length) run of zeros.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RleError {
    #[error("runs cover {covered} cells, expected {expected}")]
    LengthMismatch { covered: u64, expected: usize },
}

pub fn encode(bits: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut length = 0u32;
    for &b in bits {
        if b == current {
            length += 1;
        } else {
            runs.push(length);
            current = b;
            length = 1;
        }
    }
    if !bits.is_empty() {
        runs.push(length);
    }
    runs
}

/// Expands `runs` into exactly `len` cells.
pub fn decode(runs: &[u32], len: usize) -> Result<Vec<bool>, RleError> {
    let covered: u64 = runs.iter().map(|&r| r as u64).sum();
    if covered != len as u64 {
        return Err(RleError::LengthMismatch {
            covered,
            expected: len,
        });
    }
    let mut bits = Vec::with_capacity(len);
    for (n, &run) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat(n % 2 == 1).take(run as usize));
    }
    Ok(bits)
}
